#include "fedstale/theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace fedstale {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_nonneg(double v, const char* name) {
  if (!(v >= 0.0)) throw std::invalid_argument(std::string(name) + " must be >= 0");
}

}  // namespace

void BoundInputs::validate() const {
  require_nonneg(L, "L");
  require_nonneg(sigma_sq, "sigma_sq");
  require_nonneg(sg_sq, "sg_sq");
  require_nonneg(F_init_gap, "F_init_gap");
  require_nonneg(H_init, "H_init");
  if (!(eta_c > 0.0) || !(eta_s > 0.0)) {
    throw std::invalid_argument("learning rates must be positive");
  }
  if (!(a1 > 0.0) || !(a2 > 0.0)) throw std::invalid_argument("a1, a2 must be positive");
  if (!(beta >= 0.0 && beta <= 1.0)) throw std::invalid_argument("beta must lie in [0, 1]");
  if (n_clients == 0 || K == 0 || T == 0) {
    throw std::invalid_argument("N, K and T must be >= 1");
  }
  if (!(stats.p_min > 0.0 && stats.p_min <= 1.0) || !(stats.p_avg >= stats.p_min) ||
      !(stats.p_var > 0.0)) {
    throw std::invalid_argument("participation statistics out of range");
  }
}

std::string_view to_string(LrConstraint c) {
  switch (c) {
    case LrConstraint::kClientLr: return "client_lr";
    case LrConstraint::kServerLrFresh: return "server_lr_fresh";
    case LrConstraint::kServerLrStale: return "server_lr_stale";
  }
  return "unknown";
}

double LrCheck::server_lr_max() const {
  return std::min(server_lr_max_fresh, server_lr_max_stale);
}

LrCheck check_lr_constraints(const BoundInputs& in) {
  in.validate();
  LrCheck out;
  const double n = static_cast<double>(in.n_clients);
  const double k = static_cast<double>(in.K);
  out.client_lr_max = in.L > 0.0 ? 1.0 / (8.0 * in.L * k) : kInf;
  const double one_minus = 1.0 - in.beta;
  const bool full = std::isinf(in.stats.p_var);
  out.server_lr_max_fresh =
      full || one_minus == 0.0 ? kInf : n * in.stats.p_var / (12.0 * one_minus * one_minus);
  out.server_lr_max_stale =
      full || in.beta == 0.0
          ? kInf
          : in.stats.p_var * in.stats.p_min / (3.0 * in.beta * in.beta * in.stats.p_avg);
  if (in.eta_c > out.client_lr_max) out.violated.push_back(LrConstraint::kClientLr);
  if (in.eta_s > out.server_lr_max_fresh) out.violated.push_back(LrConstraint::kServerLrFresh);
  if (in.eta_s > out.server_lr_max_stale) out.violated.push_back(LrConstraint::kServerLrStale);
  out.ok = out.violated.empty();
  return out;
}

BoundBreakdown theorem1_bound(const BoundInputs& in, bool allow_violation) {
  const LrCheck check = check_lr_constraints(in);
  BoundBreakdown b;
  if (!check.ok) {
    if (!allow_violation) {
      std::string names;
      for (auto c : check.violated) {
        if (!names.empty()) names += ", ";
        names += to_string(c);
      }
      throw std::domain_error("learning-rate constraints violated: " + names);
    }
    b.constraints_overridden = true;
  }
  const double n = static_cast<double>(in.n_clients);
  const double k = static_cast<double>(in.K);
  const double t = static_cast<double>(in.T);
  const double r = in.stats.p_avg / in.stats.p_min;
  const double inv_pvar = std::isinf(in.stats.p_var) ? 0.0 : 1.0 / in.stats.p_var;
  const double rate = in.eta_s * in.eta_c;
  const double b2 = in.beta * in.beta;
  const double om2 = (1.0 - in.beta) * (1.0 - in.beta);

  b.iterate_init_term = in.F_init_gap / (rate * k * t);
  b.memory_init_term = b2 * rate * in.L * k * in.H_init * inv_pvar / (in.stats.p_min * t);
  b.stochastic_term = (1.0 / n + b2 * r) * rate * in.L * in.sigma_sq * inv_pvar;
  b.heterogeneity_term =
      (om2 / n + b2 * in.eta_c * in.eta_c * in.L * in.L * k * (k - 1.0) * r) * rate * in.L *
      k * in.sg_sq * inv_pvar;
  b.total = b.iterate_init_term + b.memory_init_term + b.stochastic_term + b.heterogeneity_term;
  return b;
}

double beta_star(const BoundInputs& in) {
  in.validate();
  const double n = static_cast<double>(in.n_clients);
  const double k = static_cast<double>(in.K);
  const double r = in.stats.p_avg / in.stats.p_min;
  const double denom =
      in.a1 * r * in.sigma_sq / k +
      (1.0 / n + in.a2 * r * in.eta_c * in.eta_c * in.L * in.L * k * (k - 1.0)) * in.sg_sq;
  if (!(denom > 0.0)) throw std::domain_error("beta* undefined: sigma^2 = sigma_g^2 = 0");
  return std::clamp((in.sg_sq / n) / denom, 0.0, 1.0);
}

double lower_bound_curve(double p_min, double t, double F_gap, double L) {
  if (!(p_min > 0.0 && p_min <= 1.0)) throw std::invalid_argument("p_min must lie in (0, 1]");
  if (!(t >= 0.0)) throw std::invalid_argument("t must be >= 0");
  const double a = p_min * t + 2.0;
  const double b = 4.0 * p_min * t + 9.0;
  return 3.0 * L * F_gap / (a * b * b);
}

std::vector<CoordinateFrontier> track_frontier(std::span<const FrontierStep> schedule,
                                               std::size_t max_k) {
  std::vector<CoordinateFrontier> out;
  out.reserve(schedule.size());
  std::size_t k = 0;
  for (std::size_t t = 0; t < schedule.size(); ++t) {
    const bool even = k % 2 == 0;
    const bool grows = (even && schedule[t].first_active) || (!even && schedule[t].second_active);
    if (grows && k < max_k) ++k;
    out.push_back({t, k});
  }
  return out;
}

std::vector<FrontierStep> deterministic_schedule(std::size_t tau, std::size_t rounds) {
  if (tau == 0) throw std::invalid_argument("tau must be >= 1");
  std::vector<FrontierStep> out(rounds);
  for (std::size_t t = 0; t < rounds; ++t) {
    out[t].first_active = true;
    out[t].second_active = t % tau == 1 % tau;
  }
  return out;
}

namespace {

long long floor_div(long long a, long long b) {
  long long q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

}  // namespace

long long frontier_bound(long long t, long long tau) {
  if (tau <= 0) throw std::invalid_argument("tau must be >= 1");
  return 1 + floor_div(t + tau - 2, tau) + floor_div(t + tau - 1, tau);
}

GradientFloor frontier_gradient_floor(std::size_t k, std::size_t horizon, double L) {
  if (k == 0 || k > horizon) {
    throw std::invalid_argument("k must lie in [1, horizon]");
  }
  const double kk = static_cast<double>(k);
  const double denom = kk * (kk + 1.0) * (2.0 * kk + 1.0);
  GradientFloor out;
  out.value = 3.0 * L * L / (8.0 * denom);
  out.minimizer.resize(static_cast<Eigen::Index>(k - 1));
  for (std::size_t i = 1; i < k; ++i) {
    const double x = static_cast<double>(i);
    out.minimizer(static_cast<Eigen::Index>(i - 1)) =
        (2.0 * kk * kk * kk - 3.0 * (x - 1.0) * kk * kk - (3.0 * x - 1.0) * kk + x * x * x - x) /
        denom;
  }
  return out;
}

std::vector<CoordinateFrontier> track_frontier(const HardInstance& instance,
                                               std::span<const RoundParticipation> schedule) {
  std::vector<FrontierStep> steps;
  steps.reserve(schedule.size());
  for (const auto& rp : schedule) {
    if (rp.present.size() != instance.client_count()) {
      throw std::invalid_argument("schedule does not match the instance's clients");
    }
    steps.push_back({rp.present[instance.first_client()],
                     rp.present[instance.second_client()]});
  }
  return track_frontier(steps, 2 * instance.horizon() + 1);
}

GradientFloor frontier_gradient_floor(const HardInstance& instance, std::size_t k) {
  return frontier_gradient_floor(k, instance.horizon(), instance.L());
}

double hard_instance_gap(const HardInstance& instance) {
  const ParamVector origin = ParamVector::Zero(static_cast<Eigen::Index>(instance.dimension()));
  return instance.global_loss(origin) - *instance.optimal_value();
}

}  // namespace fedstale
