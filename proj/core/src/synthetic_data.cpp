#include "fedstale/synthetic_data.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "fedstale/csv.hpp"
#include "fedstale/rng.hpp"

namespace fedstale {
namespace {

// Relabels floor(f * m_a) samples of class a as b and floor(f * m_b) of class
// b as a. The chosen samples are a seeded random subset of each class.
void swap_labels(std::vector<int>& labels, std::pair<int, int> pair, double fraction,
                 CounterRng& rng) {
  std::vector<std::size_t> of_a, of_b;
  for (std::size_t s = 0; s < labels.size(); ++s) {
    if (labels[s] == pair.first) of_a.push_back(s);
    if (labels[s] == pair.second) of_b.push_back(s);
  }
  const auto pick = [&](std::vector<std::size_t>& idx) {
    const auto take = static_cast<std::size_t>(
        std::floor(fraction * static_cast<double>(idx.size()) + 1e-12));
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(std::min(take, idx.size()));
  };
  pick(of_a);
  pick(of_b);
  for (std::size_t s : of_a) labels[s] = pair.second;
  for (std::size_t s : of_b) labels[s] = pair.first;
}

void draw_samples(Eigen::MatrixXd& x, std::vector<int>& y, std::size_t count,
                  const Eigen::MatrixXd& centers, double spread, CounterRng& rng) {
  const auto classes = static_cast<std::uint64_t>(centers.rows());
  x.resize(static_cast<Eigen::Index>(count), centers.cols());
  y.resize(count);
  for (std::size_t s = 0; s < count; ++s) {
    const auto label = static_cast<int>(rng.below(classes));
    y[s] = label;
    for (Eigen::Index j = 0; j < centers.cols(); ++j) {
      x(static_cast<Eigen::Index>(s), j) = centers(label, j) + spread * rng.normal();
    }
  }
}

}  // namespace

SyntheticDataset build_label_swap_dataset(const LabelSwapOptions& o) {
  if (o.n_clients == 0) throw std::invalid_argument("dataset needs at least one client");
  if (o.feature_count == 0) throw std::invalid_argument("feature_count must be positive");
  if (o.class_count < 2) throw std::invalid_argument("class_count must be at least 2");
  if (!(o.swap_fraction >= 0.0 && o.swap_fraction <= 1.0)) {
    throw std::invalid_argument("swap_fraction must lie in [0, 1]");
  }
  const auto [a, b] = o.class_pair;
  if (a == b || a < 0 || b < 0 || a >= o.class_count || b >= o.class_count) {
    throw std::invalid_argument("class_pair must name two distinct classes");
  }
  if (!o.groups.empty() && o.groups.size() != o.n_clients) {
    throw std::invalid_argument("groups must have one entry per client");
  }

  SyntheticDataset out;
  out.class_count = o.class_count;
  out.feature_count = o.feature_count;
  out.swap_fraction = o.swap_fraction;
  out.class_pair = o.class_pair;

  Eigen::MatrixXd centers(o.class_count, static_cast<Eigen::Index>(o.feature_count));
  CounterRng center_rng(o.center_seed, StreamTag::kClassCenters, {});
  for (Eigen::Index c = 0; c < centers.rows(); ++c) {
    for (Eigen::Index j = 0; j < centers.cols(); ++j) {
      centers(c, j) = o.center_scale * center_rng.normal();
    }
  }

  out.clients.resize(o.n_clients);
  for (std::size_t i = 0; i < o.n_clients; ++i) {
    auto& cd = out.clients[i];
    cd.group = o.groups.empty() ? (i < (o.n_clients + 1) / 2 ? 1 : 2) : o.groups[i];
    if (cd.group != 1 && cd.group != 2) throw std::invalid_argument("groups must be 1 or 2");
    CounterRng train_rng(o.data_seed, StreamTag::kDataset, {i, 0});
    CounterRng test_rng(o.data_seed, StreamTag::kDataset, {i, 1});
    draw_samples(cd.features, cd.labels, o.samples_per_client, centers, o.cluster_spread,
                 train_rng);
    draw_samples(cd.test_features, cd.test_labels, o.test_samples_per_client, centers,
                 o.cluster_spread, test_rng);
    if (cd.group == 2 && o.swap_fraction > 0.0) {
      CounterRng swap_rng(o.data_seed, StreamTag::kDataset, {i, 2});
      swap_labels(cd.labels, o.class_pair, o.swap_fraction, swap_rng);
      swap_labels(cd.test_labels, o.class_pair, o.swap_fraction, swap_rng);
    }
  }
  return out;
}

void write_dataset_csv(const SyntheticDataset& data, const std::filesystem::path& path) {
  std::ostringstream out;
  out << "client_id,group";
  for (std::size_t j = 0; j < data.feature_count; ++j) out << ",feature_" << j;
  out << ",label\n";
  for (std::size_t i = 0; i < data.clients.size(); ++i) {
    const auto& cd = data.clients[i];
    for (Eigen::Index s = 0; s < cd.features.rows(); ++s) {
      out << i << ',' << cd.group;
      for (Eigen::Index j = 0; j < cd.features.cols(); ++j) {
        out << ',' << format_double(cd.features(s, j));
      }
      out << ',' << cd.labels[static_cast<std::size_t>(s)] << '\n';
    }
  }
  write_text_atomic(path, out.str());
}

}  // namespace fedstale
