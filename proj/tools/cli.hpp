#pragma once

// The `dan` command-line front end as a library, so tests can drive it
// in-process.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "dan/attention_env.hpp"
#include "dan/tracking_env.hpp"
#include "dan/trainer.hpp"

namespace dan::cli {

enum ExitCode : int { kOk = 0, kUsageError = 1, kCheckFailed = 2 };

enum class Task { kTracking, kAttention };

Task parse_task(const std::string& name);
const char* to_string(Task task);

/// Everything a run depends on besides command-line flags.
struct RunConfig {
  Task task = Task::kTracking;
  std::uint64_t seed = 1;
  GridConfig grid;
  std::size_t tracks = 500;
  std::size_t glyphs_per_class = 100;
  double glyph_noise = 0.05;
  GlimpseSpec glimpse;
  TrainConfig train;

  void validate() const;
};

/// Desk-scale defaults for the task.
RunConfig default_run_config(Task task);

/// Applies an INI-style file ([section] then key = value lines) on top of the
/// task defaults. Unknown sections or keys and malformed values throw
/// ValidationError naming the offending entry.
RunConfig load_run_config(const std::string& path, Task task);
RunConfig parse_run_config(const std::string& text, Task task);

/// Resolved configuration as JSON, in schema order.
std::string run_config_to_json(const RunConfig& config);

/// Runs one command. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dan::cli
