#pragma once

#include <cstdint>
#include <span>

namespace dan {

double mean(std::span<const double> v);
double median(std::span<const double> v);

/// One-sided two-sample permutation test of mean(a) > mean(b): the fraction of
/// relabelings whose mean difference is at least the observed one. Exact
/// enumeration when there are at most `max_exact` relabelings, otherwise
/// `samples` random relabelings drawn from `seed`.
double permutation_p_value(std::span<const double> a, std::span<const double> b, std::uint64_t seed = 0,
                           std::uint64_t max_exact = 2'000'000, std::uint64_t samples = 200'000);

}  // namespace dan
