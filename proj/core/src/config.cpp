#include "fedstale/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <functional>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "fedstale/csv.hpp"
#include "fedstale/errors.hpp"
#include "fedstale/hard_instance.hpp"
#include "fedstale/quadratic.hpp"
#include "fedstale/softmax.hpp"

namespace fedstale {

std::string_view to_string(ObjectiveKind kind) {
  switch (kind) {
    case ObjectiveKind::kQuadratic: return "quadratic";
    case ObjectiveKind::kSoftmax: return "softmax";
    case ObjectiveKind::kHardInstance: return "hard_instance";
  }
  return "unknown";
}

namespace {

// ---- value parsing ---------------------------------------------------------

double parse_double(std::string_view text) {
  text = trim(text);
  double v = 0.0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end || text.empty()) {
    throw std::invalid_argument("expected a number, got '" + std::string(text) + "'");
  }
  if (!std::isfinite(v)) throw std::invalid_argument("value must be finite");
  return v;
}

std::uint64_t parse_u64(std::string_view text) {
  text = trim(text);
  std::uint64_t v = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end || text.empty()) {
    throw std::invalid_argument("expected a non-negative integer, got '" +
                                std::string(text) + "'");
  }
  return v;
}

std::size_t parse_size(std::string_view text) {
  return static_cast<std::size_t>(parse_u64(text));
}

bool parse_bool(std::string_view text) {
  text = trim(text);
  if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
  if (text == "false" || text == "0" || text == "no" || text == "off") return false;
  throw std::invalid_argument("expected true or false, got '" + std::string(text) + "'");
}

template <class T, class F>
std::vector<T> parse_list(std::string_view text, F parse_one) {
  std::vector<T> out;
  if (trim(text).empty()) return out;
  for (const auto& field : split_trimmed(text, ',')) out.push_back(parse_one(field));
  return out;
}

std::vector<double> parse_doubles(std::string_view text) {
  return parse_list<double>(text, [](const std::string& s) { return parse_double(s); });
}

std::vector<std::size_t> parse_sizes(std::string_view text) {
  return parse_list<std::size_t>(text, [](const std::string& s) { return parse_size(s); });
}

std::vector<std::uint64_t> parse_u64s(std::string_view text) {
  return parse_list<std::uint64_t>(text, [](const std::string& s) { return parse_u64(s); });
}

std::vector<std::vector<double>> parse_rows(std::string_view text) {
  std::vector<std::vector<double>> out;
  if (trim(text).empty()) return out;
  for (const auto& row : split_trimmed(text, ';')) out.push_back(parse_doubles(row));
  return out;
}

// ---- value rendering -------------------------------------------------------

// Shortest text that parses back to the same double.
std::string fmt(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}
std::string fmt(bool v) { return v ? "true" : "false"; }
template <class T>
std::string fmt_int(T v) { return std::to_string(v); }

std::string fmt_doubles(const std::vector<double>& v) {
  std::string out;
  for (std::size_t k = 0; k < v.size(); ++k) out += (k ? "," : "") + fmt(v[k]);
  return out;
}

template <class T>
std::string fmt_ints(const std::vector<T>& v) {
  std::string out;
  for (std::size_t k = 0; k < v.size(); ++k) out += (k ? "," : "") + std::to_string(v[k]);
  return out;
}

std::string fmt_rows(const std::vector<std::vector<double>>& rows) {
  std::string out;
  for (std::size_t k = 0; k < rows.size(); ++k) out += (k ? ";" : "") + fmt_doubles(rows[k]);
  return out;
}

// ---- range checks ----------------------------------------------------------

double positive(double v) {
  if (!(v > 0.0)) throw std::invalid_argument("must be > 0");
  return v;
}
double non_negative(double v) {
  if (!(v >= 0.0)) throw std::invalid_argument("must be >= 0");
  return v;
}
double unit_interval(double v) {
  if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("must lie in [0, 1]");
  return v;
}
double probability(double v) {
  if (!(v > 0.0 && v <= 1.0)) throw std::invalid_argument("must lie in (0, 1]");
  return v;
}
std::size_t at_least_one(std::size_t v) {
  if (v == 0) throw std::invalid_argument("must be >= 1");
  return v;
}
template <class T, class F>
std::vector<T> each(std::vector<T> v, F check) {
  for (auto& x : v) x = check(x);
  return v;
}
template <class T>
std::vector<T> nonempty(std::vector<T> v) {
  if (v.empty()) throw std::invalid_argument("list must not be empty");
  return v;
}

// ---- key table -------------------------------------------------------------

using Setter = std::function<void(ExperimentConfig&, std::string_view)>;
using Getter = std::function<std::string(const ExperimentConfig&)>;

struct Key {
  std::string section;
  std::string name;
  Setter set;
  Getter get;

  std::string full() const { return section + "." + name; }
};

const std::vector<Key>& key_table() {
  using C = ExperimentConfig;
  using S = std::string_view;
  static const std::vector<Key> table = {
      // experiment
      {"experiment", "objective",
       [](C& c, S v) {
         const auto t = trim(v);
         if (t == "quadratic" || t == "quadratic2d") {
           c.objective = ObjectiveKind::kQuadratic;
           if (t == "quadratic2d") c.quadratic.preset = "two_client";
         } else if (t == "softmax") {
           c.objective = ObjectiveKind::kSoftmax;
         } else if (t == "hard_instance") {
           c.objective = ObjectiveKind::kHardInstance;
         } else {
           throw std::invalid_argument("expected quadratic, quadratic2d, softmax or "
                                       "hard_instance, got '" + std::string(t) + "'");
         }
       },
       [](const C& c) { return std::string(to_string(c.objective)); }},
      {"experiment", "seeds",
       [](C& c, S v) { c.seeds = nonempty(parse_u64s(v)); },
       [](const C& c) { return fmt_ints(c.seeds); }},
      {"experiment", "comparability",
       [](C& c, S v) { c.comparability = parse_bool(v); },
       [](const C& c) { return fmt(c.comparability); }},

      // quadratic
      {"quadratic", "preset",
       [](C& c, S v) {
         const std::string t(trim(v));
         if (t != "two_client" && t != "isotropic" && t != "custom") {
           throw std::invalid_argument("expected two_client, isotropic or custom, got '" + t +
                                       "'");
         }
         c.quadratic.preset = t;
       },
       [](const C& c) { return c.quadratic.preset; }},
      {"quadratic", "centers",
       [](C& c, S v) { c.quadratic.centers = parse_rows(v); },
       [](const C& c) { return fmt_rows(c.quadratic.centers); }},
      {"quadratic", "hessians",
       [](C& c, S v) { c.quadratic.hessians = parse_rows(v); },
       [](const C& c) { return fmt_rows(c.quadratic.hessians); }},
      {"quadratic", "noise_variance",
       [](C& c, S v) { c.quadratic.noise_variance = non_negative(parse_double(v)); },
       [](const C& c) { return fmt(c.quadratic.noise_variance); }},

      // softmax
      {"softmax", "clients",
       [](C& c, S v) { c.softmax.n_clients = at_least_one(parse_size(v)); },
       [](const C& c) { return fmt_int(c.softmax.n_clients); }},
      {"softmax", "samples",
       [](C& c, S v) { c.softmax.samples_per_client = at_least_one(parse_size(v)); },
       [](const C& c) { return fmt_int(c.softmax.samples_per_client); }},
      {"softmax", "test_samples",
       [](C& c, S v) { c.softmax.test_samples_per_client = parse_size(v); },
       [](const C& c) { return fmt_int(c.softmax.test_samples_per_client); }},
      {"softmax", "features",
       [](C& c, S v) { c.softmax.feature_count = at_least_one(parse_size(v)); },
       [](const C& c) { return fmt_int(c.softmax.feature_count); }},
      {"softmax", "classes",
       [](C& c, S v) {
         const std::size_t n = parse_size(v);
         if (n < 2) throw std::invalid_argument("must be >= 2");
         c.softmax.class_count = static_cast<int>(n);
       },
       [](const C& c) { return fmt_int(c.softmax.class_count); }},
      {"softmax", "swap_fraction",
       [](C& c, S v) { c.softmax.swap_fraction = unit_interval(parse_double(v)); },
       [](const C& c) { return fmt(c.softmax.swap_fraction); }},
      {"softmax", "class_pair",
       [](C& c, S v) {
         const auto p = parse_sizes(v);
         if (p.size() != 2 || p[0] == p[1]) {
           throw std::invalid_argument("expected two distinct class indices");
         }
         c.softmax.class_pair = {static_cast<int>(p[0]), static_cast<int>(p[1])};
       },
       [](const C& c) {
         return std::to_string(c.softmax.class_pair.first) + "," +
                std::to_string(c.softmax.class_pair.second);
       }},
      {"softmax", "center_seed",
       [](C& c, S v) { c.softmax.center_seed = parse_u64(v); },
       [](const C& c) { return fmt_int(c.softmax.center_seed); }},
      {"softmax", "center_scale",
       [](C& c, S v) { c.softmax.center_scale = positive(parse_double(v)); },
       [](const C& c) { return fmt(c.softmax.center_scale); }},
      {"softmax", "spread",
       [](C& c, S v) { c.softmax.cluster_spread = positive(parse_double(v)); },
       [](const C& c) { return fmt(c.softmax.cluster_spread); }},
      {"softmax", "data_seed",
       [](C& c, S v) { c.softmax.data_seed = parse_u64(v); },
       [](const C& c) { return fmt_int(c.softmax.data_seed); }},
      {"softmax", "l2",
       [](C& c, S v) { c.softmax_l2 = non_negative(parse_double(v)); },
       [](const C& c) { return fmt(c.softmax_l2); }},

      // hard instance
      {"hard", "dimension",
       [](C& c, S v) { c.hard.dimension = at_least_one(parse_size(v)); },
       [](const C& c) { return fmt_int(c.hard.dimension); }},
      {"hard", "horizon",
       [](C& c, S v) { c.hard.horizon = at_least_one(parse_size(v)); },
       [](const C& c) { return fmt_int(c.hard.horizon); }},
      {"hard", "L",
       [](C& c, S v) { c.hard.L = positive(parse_double(v)); },
       [](const C& c) { return fmt(c.hard.L); }},
      {"hard", "clients",
       [](C& c, S v) {
         const std::size_t n = parse_size(v);
         if (n < 2) throw std::invalid_argument("must be >= 2");
         c.hard.clients = n;
       },
       [](const C& c) { return fmt_int(c.hard.clients); }},

      // participation
      {"participation", "mode",
       [](C& c, S v) {
         const std::string t(trim(v));
         if (t != "explicit" && t != "two_group") {
           throw std::invalid_argument("expected explicit or two_group, got '" + t + "'");
         }
         c.participation.mode = t;
       },
       [](const C& c) { return c.participation.mode; }},
      {"participation", "probs",
       [](C& c, S v) { c.participation.probs = each(parse_doubles(v), probability); },
       [](const C& c) { return fmt_doubles(c.participation.probs); }},
      {"participation", "p_min",
       [](C& c, S v) { c.participation.p_min = probability(parse_double(v)); },
       [](const C& c) { return fmt(c.participation.p_min); }},
      {"participation", "group2_size",
       [](C& c, S v) { c.participation.group2_size = parse_size(v); },
       [](const C& c) { return fmt_int(c.participation.group2_size); }},
      {"participation", "seed",
       [](C& c, S v) { c.participation.seed = parse_u64(v); },
       [](const C& c) { return fmt_int(c.participation.seed); }},

      // train
      {"train", "rounds",
       [](C& c, S v) { c.train.rounds = at_least_one(parse_size(v)); },
       [](const C& c) { return fmt_int(c.train.rounds); }},
      {"train", "server_lr",
       [](C& c, S v) { c.train.server_lr = positive(parse_double(v)); },
       [](const C& c) { return fmt(c.train.server_lr); }},
      {"train", "local_steps",
       [](C& c, S v) { c.train.local.local_steps = at_least_one(parse_size(v)); },
       [](const C& c) { return fmt_int(c.train.local.local_steps); }},
      {"train", "client_lr",
       [](C& c, S v) { c.train.local.client_lr = positive(parse_double(v)); },
       [](const C& c) { return fmt(c.train.local.client_lr); }},
      {"train", "batch_size",
       [](C& c, S v) { c.train.local.batch_size = at_least_one(parse_size(v)); },
       [](const C& c) { return fmt_int(c.train.local.batch_size); }},
      {"train", "rule",
       [](C& c, S v) { c.train.aggregator.rule = parse_rule(trim(v)); },
       [](const C& c) { return std::string(to_string(c.train.aggregator.rule)); }},
      {"train", "beta",
       [](C& c, S v) { c.train.aggregator.beta = unit_interval(parse_double(v)); },
       [](const C& c) { return fmt(c.train.aggregator.beta); }},
      {"train", "weights",
       [](C& c, S v) { c.train.aggregator.weights = parse_weight_source(trim(v)); },
       [](const C& c) { return std::string(to_string(c.train.aggregator.weights)); }},
      {"train", "master_seed",
       [](C& c, S v) { c.train.master_seed = parse_u64(v); },
       [](const C& c) { return fmt_int(c.train.master_seed); }},
      {"train", "participation_seed",
       [](C& c, S v) {
         if (trim(v) == "auto") {
           c.train.participation_seed.reset();
         } else {
           c.train.participation_seed = parse_u64(v);
         }
       },
       [](const C& c) {
         return c.train.participation_seed ? fmt_int(*c.train.participation_seed)
                                           : std::string("auto");
       }},
      {"train", "init_point",
       [](C& c, S v) {
         const auto p = parse_doubles(v);
         c.train.init_point = Eigen::Map<const ParamVector>(p.data(),
                                                            static_cast<Eigen::Index>(p.size()));
       },
       [](const C& c) {
         return fmt_doubles(std::vector<double>(c.train.init_point.begin(),
                                                c.train.init_point.end()));
       }},
      {"train", "threads",
       [](C& c, S v) { c.train.threads = at_least_one(parse_size(v)); },
       [](const C& c) { return fmt_int(c.train.threads); }},
      {"train", "weight_cap",
       [](C& c, S v) {
         const double cap = non_negative(parse_double(v));
         if (cap != 0.0 && cap < 1.0) throw std::invalid_argument("must be 0 or >= 1");
         c.train.weight_cap = cap;
       },
       [](const C& c) { return fmt(c.train.weight_cap); }},
      {"train", "record_timing",
       [](C& c, S v) { c.train.record_timing = parse_bool(v); },
       [](const C& c) { return fmt(c.train.record_timing); }},

      // grid
      {"grid", "ratios",
       [](C& c, S v) {
         c.grid.ratios = nonempty(each(parse_doubles(v), [](double r) {
           if (!(r >= 1.0)) throw std::invalid_argument("ratios must be >= 1");
           return r;
         }));
       },
       [](const C& c) { return fmt_doubles(c.grid.ratios); }},
      {"grid", "swap_fractions",
       [](C& c, S v) { c.grid.swap_fractions = nonempty(each(parse_doubles(v), unit_interval)); },
       [](const C& c) { return fmt_doubles(c.grid.swap_fractions); }},
      {"grid", "betas",
       [](C& c, S v) { c.grid.betas = nonempty(each(parse_doubles(v), unit_interval)); },
       [](const C& c) { return fmt_doubles(c.grid.betas); }},
      {"grid", "client_lrs",
       [](C& c, S v) { c.grid.client_lrs = nonempty(each(parse_doubles(v), positive)); },
       [](const C& c) { return fmt_doubles(c.grid.client_lrs); }},
      {"grid", "seeds",
       [](C& c, S v) { c.grid.seeds = nonempty(parse_u64s(v)); },
       [](const C& c) { return fmt_ints(c.grid.seeds); }},
      {"grid", "clients",
       [](C& c, S v) { c.grid.n_clients = at_least_one(parse_size(v)); },
       [](const C& c) { return fmt_int(c.grid.n_clients); }},
      {"grid", "group2_size",
       [](C& c, S v) { c.grid.group2_size = at_least_one(parse_size(v)); },
       [](const C& c) { return fmt_int(c.grid.group2_size); }},
      {"grid", "profile_seed",
       [](C& c, S v) { c.grid.profile_seed = parse_u64(v); },
       [](const C& c) { return fmt_int(c.grid.profile_seed); }},
      {"grid", "rare_participations",
       [](C& c, S v) { c.grid.rare_participations = non_negative(parse_double(v)); },
       [](const C& c) { return fmt(c.grid.rare_participations); }},
      {"grid", "metric",
       [](C& c, S v) {
         const auto t = trim(v);
         if (t == "accuracy") {
           c.grid.metric = GridMetric::kHeldoutAccuracy;
         } else if (t == "loss") {
           c.grid.metric = GridMetric::kFinalLoss;
         } else {
           throw std::invalid_argument("expected accuracy or loss, got '" + std::string(t) +
                                       "'");
         }
       },
       [](const C& c) {
         return std::string(c.grid.metric == GridMetric::kHeldoutAccuracy ? "accuracy"
                                                                          : "loss");
       }},
      {"grid", "threads",
       [](C& c, S v) { c.grid.threads = at_least_one(parse_size(v)); },
       [](const C& c) { return fmt_int(c.grid.threads); }},

      // theory
      {"theory", "a1",
       [](C& c, S v) { c.theory.a1 = positive(parse_double(v)); },
       [](const C& c) { return fmt(c.theory.a1); }},
      {"theory", "a2",
       [](C& c, S v) { c.theory.a2 = positive(parse_double(v)); },
       [](const C& c) { return fmt(c.theory.a2); }},
      {"theory", "probes",
       [](C& c, S v) {
         const std::size_t n = parse_size(v);
         if (n < 2) throw std::invalid_argument("must be >= 2");
         c.theory.probes = n;
       },
       [](const C& c) { return fmt_int(c.theory.probes); }},
      {"theory", "probe_radius",
       [](C& c, S v) { c.theory.probe_radius = positive(parse_double(v)); },
       [](const C& c) { return fmt(c.theory.probe_radius); }},
      {"theory", "stats_batch",
       [](C& c, S v) { c.theory.stats_batch = at_least_one(parse_size(v)); },
       [](const C& c) { return fmt_int(c.theory.stats_batch); }},
      {"theory", "allow_violation",
       [](C& c, S v) { c.theory.allow_violation = parse_bool(v); },
       [](const C& c) { return fmt(c.theory.allow_violation); }},
      {"theory", "betas",
       [](C& c, S v) { c.theory.betas = nonempty(each(parse_doubles(v), unit_interval)); },
       [](const C& c) { return fmt_doubles(c.theory.betas); }},

      // lowerbound
      {"lowerbound", "taus",
       [](C& c, S v) { c.lowerbound.taus = nonempty(each(parse_sizes(v), at_least_one)); },
       [](const C& c) { return fmt_ints(c.lowerbound.taus); }},
      {"lowerbound", "max_t",
       [](C& c, S v) { c.lowerbound.max_t = parse_size(v); },
       [](const C& c) { return fmt_int(c.lowerbound.max_t); }},
      {"lowerbound", "p_mins",
       [](C& c, S v) { c.lowerbound.p_mins = nonempty(each(parse_doubles(v), probability)); },
       [](const C& c) { return fmt_doubles(c.lowerbound.p_mins); }},
      {"lowerbound", "eval_rounds",
       [](C& c, S v) { c.lowerbound.eval_rounds = nonempty(parse_sizes(v)); },
       [](const C& c) { return fmt_ints(c.lowerbound.eval_rounds); }},
      {"lowerbound", "schedules",
       [](C& c, S v) { c.lowerbound.schedules = at_least_one(parse_size(v)); },
       [](const C& c) { return fmt_int(c.lowerbound.schedules); }},
      {"lowerbound", "seeds",
       [](C& c, S v) { c.lowerbound.seeds = at_least_one(parse_size(v)); },
       [](const C& c) { return fmt_int(c.lowerbound.seeds); }},
      {"lowerbound", "betas",
       [](C& c, S v) { c.lowerbound.betas = nonempty(each(parse_doubles(v), unit_interval)); },
       [](const C& c) { return fmt_doubles(c.lowerbound.betas); }},
      {"lowerbound", "rounds",
       [](C& c, S v) { c.lowerbound.rounds = at_least_one(parse_size(v)); },
       [](const C& c) { return fmt_int(c.lowerbound.rounds); }},
      {"lowerbound", "p_min",
       [](C& c, S v) { c.lowerbound.p_min = probability(parse_double(v)); },
       [](const C& c) { return fmt(c.lowerbound.p_min); }},
  };
  return table;
}

const Key& resolve(std::string_view name, std::string_view section, std::size_t line) {
  const auto& table = key_table();
  const std::string full = name.find('.') != std::string_view::npos
                               ? std::string(name)
                               : (section.empty() ? std::string()
                                                  : std::string(section) + "." +
                                                        std::string(name));
  if (!full.empty()) {
    for (const auto& k : table) {
      if (k.full() == full) return k;
    }
    if (name.find('.') != std::string_view::npos || !section.empty()) {
      throw ConfigError(std::string(name), line, "unknown key '" + full + "'");
    }
  }
  const Key* found = nullptr;
  std::string candidates;
  for (const auto& k : table) {
    if (k.name != name) continue;
    candidates += (candidates.empty() ? "" : ", ") + k.full();
    if (found) {
      throw ConfigError(std::string(name), line,
                        "ambiguous key; qualify it as one of " + candidates + ", ...");
    }
    found = &k;
  }
  if (!found) throw ConfigError(std::string(name), line, "unknown key");
  return *found;
}

void apply(ExperimentConfig& cfg, std::string_view name, std::string_view section,
           std::string_view value, std::size_t line, std::set<std::string>* seen) {
  const Key& key = resolve(name, section, line);
  if (seen && !seen->insert(key.full()).second) {
    throw ConfigError(key.full(), line, "duplicate key");
  }
  try {
    key.set(cfg, value);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(key.full(), line, e.what());
  }
  cfg.key_lines[key.full()] = line;
}

std::size_t line_of(const ExperimentConfig& cfg, const std::string& key) {
  const auto it = cfg.key_lines.find(key);
  return it == cfg.key_lines.end() ? 0 : it->second;
}

[[noreturn]] void fail(const ExperimentConfig& cfg, const std::string& key,
                       const std::string& message) {
  throw ConfigError(key, line_of(cfg, key), message);
}

void cross_validate(const ExperimentConfig& cfg) {
  const auto& q = cfg.quadratic;
  if (cfg.objective == ObjectiveKind::kQuadratic && q.preset != "two_client") {
    if (q.centers.empty()) fail(cfg, "quadratic.centers", "required for preset " + q.preset);
    const std::size_t d = q.centers.front().size();
    for (const auto& c : q.centers) {
      if (c.size() != d || d == 0) {
        fail(cfg, "quadratic.centers", "all centers need the same nonzero dimension");
      }
    }
    if (q.preset == "custom") {
      if (q.hessians.size() != q.centers.size()) {
        fail(cfg, "quadratic.hessians", "need one Hessian per center");
      }
      for (const auto& h : q.hessians) {
        if (h.size() != d * d) {
          fail(cfg, "quadratic.hessians", "each Hessian needs d*d = " +
                                              std::to_string(d * d) + " entries");
        }
      }
    }
  }
  if (cfg.softmax.class_pair.first >= cfg.softmax.class_count ||
      cfg.softmax.class_pair.second >= cfg.softmax.class_count) {
    fail(cfg, "softmax.class_pair", "class index exceeds softmax.classes");
  }
  if (2 * cfg.hard.horizon + 1 > cfg.hard.dimension) {
    fail(cfg, "hard.horizon", "needs 2*horizon+1 <= hard.dimension");
  }
  if (cfg.grid.group2_size > cfg.grid.n_clients) {
    fail(cfg, "grid.group2_size", "exceeds grid.clients");
  }
  for (double r : cfg.grid.ratios) {
    if (r > 1.0 && cfg.grid.group2_size == cfg.grid.n_clients) {
      fail(cfg, "grid.ratios", "ratios above 1 need group2_size < clients");
    }
  }
  if (cfg.objective == ObjectiveKind::kSoftmax &&
      cfg.train.local.batch_size > cfg.softmax.samples_per_client) {
    fail(cfg, "train.batch_size", "exceeds softmax.samples");
  }
  const auto& lb = cfg.lowerbound;
  if (lb.rounds > cfg.hard.horizon) {
    fail(cfg, "lowerbound.rounds", "must not exceed hard.horizon");
  }
}

// Flattens a JSON document into (section.key, value-text) pairs.
std::vector<std::pair<std::string, std::string>> flatten_json(std::string_view text) {
  using nlohmann::json;
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("", 0, std::string("malformed JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("", 0, "JSON config must be an object");

  std::function<std::string(const json&, const std::string&)> scalar;
  scalar = [&](const json& v, const std::string& key) -> std::string {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    if (v.is_number_unsigned()) return std::to_string(v.get<std::uint64_t>());
    if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
    if (v.is_number_float()) return fmt(v.get<double>());
    if (v.is_array()) {
      std::string out;
      const bool nested = !v.empty() && v.front().is_array();
      for (std::size_t k = 0; k < v.size(); ++k) {
        if (k) out += nested ? ";" : ",";
        out += scalar(v[k], key);
      }
      return out;
    }
    throw ConfigError(key, 0, "unsupported JSON value type");
  };

  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& [name, value] : doc.items()) {
    if (value.is_object()) {
      for (const auto& [inner, v] : value.items()) {
        out.emplace_back(name + "." + inner, scalar(v, name + "." + inner));
      }
    } else {
      out.emplace_back(name, scalar(value, name));
    }
  }
  return out;
}

}  // namespace

ExperimentConfig parse_config_text(std::string_view text,
                                   const std::vector<std::string>& overrides) {
  ExperimentConfig cfg;
  std::set<std::string> seen;
  if (!trim(text).empty() && trim(text).front() == '{') {
    for (const auto& [key, value] : flatten_json(text)) {
      apply(cfg, key, "", value, 0, &seen);
    }
  } else {
    std::string section;
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
      const std::size_t end = std::min(text.find('\n', start), text.size());
      std::string_view line = text.substr(start, end - start);
      start = end + 1;
      ++line_no;
      if (const auto hash = line.find('#'); hash != std::string_view::npos) {
        line = line.substr(0, hash);
      }
      line = trim(line);
      if (line.empty()) {
        if (end == text.size()) break;
        continue;
      }
      if (line.front() == '[') {
        if (line.back() != ']' || line.size() < 3) {
          throw ConfigError("", line_no, "malformed section header");
        }
        section = std::string(trim(line.substr(1, line.size() - 2)));
        const auto& table = key_table();
        if (std::none_of(table.begin(), table.end(),
                         [&](const Key& k) { return k.section == section; })) {
          throw ConfigError(section, line_no, "unknown section [" + section + "]");
        }
      } else {
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
          throw ConfigError("", line_no, "expected key = value");
        }
        const auto key = trim(line.substr(0, eq));
        if (key.empty()) throw ConfigError("", line_no, "missing key before '='");
        apply(cfg, key, section, trim(line.substr(eq + 1)), line_no, &seen);
      }
      if (end == text.size()) break;
    }
  }
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(o, 0, "override must have the form KEY=VALUE");
    }
    apply(cfg, trim(std::string_view(o).substr(0, eq)), "",
          trim(std::string_view(o).substr(eq + 1)), 0, nullptr);
  }
  cross_validate(cfg);
  return cfg;
}

ExperimentConfig parse_config(const std::filesystem::path& path,
                              const std::vector<std::string>& overrides) {
  return parse_config_text(read_text(path), overrides);
}

std::string render_config(const ExperimentConfig& cfg) {
  std::ostringstream out;
  std::string section;
  for (const auto& k : key_table()) {
    if (k.section != section) {
      if (!section.empty()) out << '\n';
      section = k.section;
      out << '[' << section << "]\n";
    }
    out << k.name << " = " << k.get(cfg) << '\n';
  }
  return out.str();
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& k : key_table()) out.push_back(k.full());
  return out;
}

ParticipationProfile make_profile(const ExperimentConfig& cfg, std::size_t n_clients) {
  const auto& p = cfg.participation;
  if (p.mode == "two_group") {
    const std::size_t g = p.group2_size == 0 ? n_clients / 2 : p.group2_size;
    if (g > n_clients) fail(cfg, "participation.group2_size", "exceeds the client count");
    return make_two_group_profile(n_clients, p.p_min, g, p.seed);
  }
  if (p.probs.empty()) return ParticipationProfile(std::vector<double>(n_clients, 1.0));
  if (p.probs.size() != n_clients) {
    fail(cfg, "participation.probs",
         "has " + std::to_string(p.probs.size()) + " entries but the objective has " +
             std::to_string(n_clients) + " clients");
  }
  // Clients below the top probability form group 2.
  const double top = *std::max_element(p.probs.begin(), p.probs.end());
  std::vector<int> groups(n_clients);
  for (std::size_t i = 0; i < n_clients; ++i) groups[i] = p.probs[i] < top ? 2 : 1;
  return ParticipationProfile(p.probs, groups);
}

std::shared_ptr<const Objective> make_objective(const ExperimentConfig& cfg) {
  switch (cfg.objective) {
    case ObjectiveKind::kQuadratic: {
      const auto& q = cfg.quadratic;
      if (q.preset == "two_client") {
        return std::make_shared<QuadraticObjective>(
            QuadraticObjective::two_client_example(q.noise_variance));
      }
      std::vector<QuadraticClient> clients;
      for (std::size_t i = 0; i < q.centers.size(); ++i) {
        const auto d = static_cast<Eigen::Index>(q.centers[i].size());
        QuadraticClient c;
        c.center = Eigen::Map<const ParamVector>(q.centers[i].data(), d);
        if (q.preset == "custom") {
          c.hessian = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                                     Eigen::RowMajor>>(q.hessians[i].data(), d, d);
        } else {
          c.hessian = Eigen::MatrixXd::Identity(d, d);
        }
        clients.push_back(std::move(c));
      }
      try {
        return std::make_shared<QuadraticObjective>(std::move(clients), q.noise_variance);
      } catch (const std::invalid_argument& e) {
        fail(cfg, "quadratic.hessians", e.what());
      }
    }
    case ObjectiveKind::kSoftmax: {
      LabelSwapOptions opts = cfg.softmax;
      opts.groups = make_profile(cfg, opts.n_clients).groups();
      return std::make_shared<SoftmaxObjective>(build_label_swap_dataset(opts), cfg.softmax_l2);
    }
    case ObjectiveKind::kHardInstance:
      return std::make_shared<HardInstance>(cfg.hard.dimension, cfg.hard.horizon, cfg.hard.L,
                                            cfg.hard.clients);
  }
  throw std::logic_error("unhandled objective kind");
}

TrainConfig make_train_config(const ExperimentConfig& cfg, const Objective& obj) {
  TrainConfig train = cfg.train;
  train.profile = make_profile(cfg, obj.client_count());
  if (train.init_point.size() != 0 &&
      static_cast<std::size_t>(train.init_point.size()) != obj.dimension()) {
    fail(cfg, "train.init_point",
         "has " + std::to_string(train.init_point.size()) + " entries but the model has " +
             std::to_string(obj.dimension()) + " parameters");
  }
  try {
    train.validate(obj);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("train", 0, e.what());
  }
  return train;
}

ObjectiveFactory make_objective_factory(const ExperimentConfig& cfg) {
  const LabelSwapOptions base = cfg.softmax;
  const double l2 = cfg.softmax_l2;
  return [base, l2](double swap, const ParticipationProfile& profile) {
    LabelSwapOptions opts = base;
    opts.swap_fraction = swap;
    opts.n_clients = profile.client_count();
    opts.groups = profile.groups();
    return std::shared_ptr<const Objective>(
        std::make_shared<SoftmaxObjective>(build_label_swap_dataset(opts), l2));
  };
}

}  // namespace fedstale
