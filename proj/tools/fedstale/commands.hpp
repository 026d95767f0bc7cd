#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "fedstale/config.hpp"
#include "fedstale/engine.hpp"
#include "fedstale/hard_instance.hpp"

namespace fedstale::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitDivergence = 3;
inline constexpr int kExitIo = 4;

/// Environment variable naming the default output root.
inline constexpr const char* kOutRootEnv = "FEDSTALE_OUT_ROOT";

struct CommandOptions {
  /// run, repeat, grid, theory, lowerbound or replay.
  std::string command;
  std::filesystem::path config;
  std::optional<std::filesystem::path> out;
  std::optional<std::vector<std::uint64_t>> seeds;
  std::vector<std::string> overrides;
  std::optional<std::size_t> threads;
  bool force = false;
  bool comparability = false;
  /// Participation trace for replay.
  std::optional<std::filesystem::path> trace;
  std::ostream* out_stream = nullptr;  // null = std::cout
  std::ostream* err_stream = nullptr;  // null = std::cerr
};

/// Parses "0,1,2" and inclusive ranges such as "0-9" (mixable).
std::vector<std::uint64_t> parse_seed_list(const std::string& text);

/// $FEDSTALE_OUT_ROOT (or "runs") / <command>-<config stem>.
std::filesystem::path default_out_dir(const std::string& command,
                                      const std::filesystem::path& config);

/// Runs one subcommand end to end and returns the process exit code. Never
/// throws: errors are reported on err_stream and, once the output directory
/// exists, in a FAILED file inside it.
int run_command(const CommandOptions& options);

/// Lower-bound verification tables.
struct FrontierRow {
  std::size_t tau = 0;
  std::size_t t = 0;
  std::size_t k = 0;
  long long bound = 0;
  bool violation = false;
};

struct ExpectationRow {
  double p_min = 0.0;
  std::size_t t = 0;
  double mean_k = 0.0;
  double stderr_k = 0.0;
  double bound = 0.0;
  bool ok = true;
};

struct DominanceRow {
  double beta = 0.0;
  std::size_t t = 0;
  double min_mean_grad_norm_sq = 0.0;
  double envelope = 0.0;
  bool ok = true;
};

/// Deterministic-schedule automaton against the closed-form bound for every
/// tau and t = 0 .. max_t.
std::vector<FrontierRow> frontier_table(const std::vector<std::size_t>& taus,
                                        std::size_t max_t);

/// Monte-Carlo mean of the frontier under Bernoulli participation of the
/// second client (the first always participates). Schedules are keyed by
/// (seed, schedule index), so the table is reproducible.
std::vector<ExpectationRow> expectation_table(const std::vector<double>& p_mins,
                                              const std::vector<std::size_t>& eval_rounds,
                                              std::size_t schedules, std::size_t max_k,
                                              std::uint64_t seed);

/// Runs FedStale on the hard instance for each beta over `seeds` participation
/// seeds and compares min_{s <= t} E||grad F(w^(s+1))||^2 (with w^(1) included)
/// against the lower-bound envelope at t = 0 .. rounds.
std::vector<DominanceRow> dominance_table(const HardInstance& instance,
                                          const TrainConfig& base,
                                          const std::vector<double>& betas,
                                          std::size_t seeds, std::size_t threads);

}  // namespace fedstale::cli
