#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dan/trainer.hpp"

namespace dan {

enum class BaselineKind { kRandomPolicy, kCoverage, kExactOracle };

BaselineKind parse_baseline(const std::string& name);
const char* to_string(BaselineKind kind);

/// Per-axis exact Bayes filters on the factored model; each step picks the
/// camera with the largest summed expected information gain and predicts the
/// belief argmax on both axes. No learning.
TrackingScore evaluate_exact_oracle(const TrackingTask& task, const std::vector<Track>& tracks,
                                    std::size_t max_episodes, std::uint64_t seed);

struct BaselineResult {
  std::vector<CurvePoint> curve;  // empty for the oracle
  TrackingScore score;
};

/// random_policy and coverage train with `config` (policy / reward mode
/// overridden); exact_oracle evaluates on the test split.
BaselineResult run_baseline(BaselineKind kind, const TrackingTask& task, TrainConfig config, std::uint64_t seed,
                            EventLog* log = nullptr);

}  // namespace dan
