#include "fedstale/softmax.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace fedstale {
namespace {

using ConstWeights = Eigen::Map<const Eigen::MatrixXd>;
using Weights = Eigen::Map<Eigen::MatrixXd>;

// Column c of the (d+1) x C weight view holds class c's weights and bias.
void log_softmax_row(const ConstWeights& W, const Eigen::MatrixXd& x, Eigen::Index s,
                     Eigen::VectorXd& logits) {
  const Eigen::Index d = x.cols();
  logits = W.topRows(d).transpose() * x.row(s).transpose() + W.row(d).transpose();
  const double m = logits.maxCoeff();
  const double lse = m + std::log((logits.array() - m).exp().sum());
  logits.array() -= lse;
}

}  // namespace

SoftmaxObjective::SoftmaxObjective(SyntheticDataset data, double l2)
    : data_(std::move(data)), l2_(l2) {
  if (data_.clients.empty()) throw std::invalid_argument("softmax objective needs clients");
  if (!(l2_ >= 0.0) || !std::isfinite(l2_)) {
    throw std::invalid_argument("l2 must be finite and non-negative");
  }
  for (const auto& cd : data_.clients) {
    if (static_cast<std::size_t>(cd.features.cols()) != data_.feature_count ||
        static_cast<std::size_t>(cd.features.rows()) != cd.labels.size()) {
      throw std::invalid_argument("client data has inconsistent shape");
    }
    for (int y : cd.labels) {
      if (y < 0 || y >= data_.class_count) throw std::invalid_argument("label out of range");
    }
  }
  dimension_ = static_cast<std::size_t>(data_.class_count) * (data_.feature_count + 1);
}

std::size_t SoftmaxObjective::client_sample_count(std::size_t client) const {
  return data_.clients.at(client).labels.size();
}

double SoftmaxObjective::client_loss(std::size_t client, const ParamVector& w) const {
  const auto& cd = data_.clients.at(client);
  const auto d = static_cast<Eigen::Index>(data_.feature_count);
  const ConstWeights W(w.data(), d + 1, data_.class_count);
  Eigen::VectorXd logp;
  double sum = 0.0;
  for (Eigen::Index s = 0; s < cd.features.rows(); ++s) {
    log_softmax_row(W, cd.features, s, logp);
    sum -= logp(cd.labels[static_cast<std::size_t>(s)]);
  }
  const double n = static_cast<double>(std::max<std::size_t>(cd.labels.size(), 1));
  return sum / n + 0.5 * l2_ * w.squaredNorm();
}

ParamVector SoftmaxObjective::batch_gradient(std::size_t client,
                                             std::span<const std::size_t> indices,
                                             const ParamVector& w) const {
  const auto& cd = data_.clients.at(client);
  const auto d = static_cast<Eigen::Index>(data_.feature_count);
  const ConstWeights W(w.data(), d + 1, data_.class_count);
  ParamVector grad = ParamVector::Zero(w.size());
  Weights G(grad.data(), d + 1, data_.class_count);
  Eigen::VectorXd logp;
  for (std::size_t s : indices) {
    if (s >= cd.labels.size()) throw std::out_of_range("sample index out of range");
    const auto row = static_cast<Eigen::Index>(s);
    log_softmax_row(W, cd.features, row, logp);
    Eigen::VectorXd residual = logp.array().exp();
    residual(cd.labels[s]) -= 1.0;
    G.topRows(d).noalias() += cd.features.row(row).transpose() * residual.transpose();
    G.row(d) += residual.transpose();
  }
  if (!indices.empty()) grad /= static_cast<double>(indices.size());
  if (l2_ > 0.0) grad += l2_ * w;
  return grad;
}

ParamVector SoftmaxObjective::client_gradient(std::size_t client,
                                              const ParamVector& w) const {
  std::vector<std::size_t> all(client_sample_count(client));
  std::iota(all.begin(), all.end(), std::size_t{0});
  return batch_gradient(client, all, w);
}

ParamVector SoftmaxObjective::client_stochastic_gradient(std::size_t client,
                                                         const ParamVector& w,
                                                         std::size_t batch_size,
                                                         CounterRng& rng) const {
  const std::size_t n = client_sample_count(client);
  if (batch_size == 0 || batch_size > n) {
    throw std::invalid_argument("batch size must lie in [1, " + std::to_string(n) + "]");
  }
  // Partial Fisher-Yates: the first batch_size slots form a uniform subset.
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t k = 0; k < batch_size; ++k) {
    const std::size_t j = k + static_cast<std::size_t>(rng.below(n - k));
    std::swap(idx[k], idx[j]);
  }
  idx.resize(batch_size);
  std::sort(idx.begin(), idx.end());
  return batch_gradient(client, idx, w);
}

std::optional<double> SoftmaxObjective::heldout_accuracy(const ParamVector& w) const {
  const auto d = static_cast<Eigen::Index>(data_.feature_count);
  const ConstWeights W(w.data(), d + 1, data_.class_count);
  double total = 0.0;
  std::size_t counted = 0;
  for (const auto& cd : data_.clients) {
    if (cd.test_labels.empty()) continue;
    std::size_t correct = 0;
    for (Eigen::Index s = 0; s < cd.test_features.rows(); ++s) {
      Eigen::VectorXd logits =
          W.topRows(d).transpose() * cd.test_features.row(s).transpose() +
          W.row(d).transpose();
      Eigen::Index best = 0;
      logits.maxCoeff(&best);
      if (best == cd.test_labels[static_cast<std::size_t>(s)]) ++correct;
    }
    total += static_cast<double>(correct) / static_cast<double>(cd.test_labels.size());
    ++counted;
  }
  if (counted == 0) return std::nullopt;
  return total / static_cast<double>(counted);
}

}  // namespace fedstale
