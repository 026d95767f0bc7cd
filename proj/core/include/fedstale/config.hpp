#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "fedstale/engine.hpp"
#include "fedstale/objective.hpp"
#include "fedstale/participation.hpp"
#include "fedstale/synthetic_data.hpp"

namespace fedstale {

enum class ObjectiveKind { kQuadratic, kSoftmax, kHardInstance };
std::string_view to_string(ObjectiveKind kind);

struct QuadraticSpec {
  /// "two_client" (default curvature-mismatched pair), "isotropic" or "custom".
  std::string preset = "two_client";
  /// Custom centers and Hessians (row-major), one entry per client.
  std::vector<std::vector<double>> centers;
  std::vector<std::vector<double>> hessians;
  double noise_variance = 0.0;
};

struct HardInstanceSpec {
  std::size_t dimension = 201;
  std::size_t horizon = 100;
  double L = 1.0;
  std::size_t clients = 2;
};

struct ParticipationSpec {
  /// "explicit" (probs list) or "two_group".
  std::string mode = "explicit";
  std::vector<double> probs;
  double p_min = 0.1;
  std::size_t group2_size = 0;  // 0 = half the clients
  std::uint64_t seed = 0;
};

struct TheorySpec {
  double a1 = 1.0;
  double a2 = 1.0;
  std::size_t probes = 8;
  double probe_radius = 5.0;
  std::size_t stats_batch = 1;
  bool allow_violation = true;
  std::vector<double> betas{0.0, 0.2, 0.5, 0.8, 1.0};
};

struct LowerBoundSpec {
  std::vector<std::size_t> taus{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  std::size_t max_t = 500;
  std::vector<double> p_mins{0.1, 0.25};
  std::vector<std::size_t> eval_rounds{50, 200};
  std::size_t schedules = 10000;
  /// Participation seeds for the empirical dominance runs.
  std::size_t seeds = 100;
  std::vector<double> betas{0.0, 1.0};
  std::size_t rounds = 100;
  double p_min = 0.1;
};

struct ExperimentConfig {
  ObjectiveKind objective = ObjectiveKind::kQuadratic;
  QuadraticSpec quadratic;
  LabelSwapOptions softmax;
  double softmax_l2 = 0.0;
  HardInstanceSpec hard;
  ParticipationSpec participation;
  /// Training settings; `train.profile` is filled by make_train_config.
  TrainConfig train;
  std::vector<std::uint64_t> seeds{0};
  bool comparability = true;
  GridOptions grid;
  TheorySpec theory;
  LowerBoundSpec lowerbound;

  /// Line on which each key was set (0 for defaults and command-line overrides).
  std::map<std::string, std::size_t> key_lines;
};

/// Parses sectioned key=value text (or JSON with the same schema when the
/// text starts with '{'), then applies `overrides` ("key=value", where key is
/// either "section.key" or an unambiguous bare key). Throws ConfigError naming
/// the key and line for unknown keys, malformed values and range violations.
ExperimentConfig parse_config_text(std::string_view text,
                                   const std::vector<std::string>& overrides = {});
ExperimentConfig parse_config(const std::filesystem::path& path,
                              const std::vector<std::string>& overrides = {});

/// Every key with its effective value, in sectioned key=value form that
/// parse_config_text accepts back.
std::string render_config(const ExperimentConfig& cfg);

/// All known "section.key" names.
std::vector<std::string> config_keys();

std::shared_ptr<const Objective> make_objective(const ExperimentConfig& cfg);
ParticipationProfile make_profile(const ExperimentConfig& cfg,
                                  std::size_t n_clients);
/// cfg.train with the profile and a default init point filled in.
TrainConfig make_train_config(const ExperimentConfig& cfg,
                              const Objective& obj);
/// Grid factory: softmax data with the cell's swap fraction and groups.
ObjectiveFactory make_objective_factory(const ExperimentConfig& cfg);

}  // namespace fedstale
