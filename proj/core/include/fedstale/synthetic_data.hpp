#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace fedstale {

/// Samples held by one client. Rows of `features` are samples.
struct ClientData {
  Eigen::MatrixXd features;
  std::vector<int> labels;
  Eigen::MatrixXd test_features;
  std::vector<int> test_labels;
  int group = 1;  // 1 = untouched labels, 2 = label-swapped
};

struct SyntheticDataset {
  std::vector<ClientData> clients;
  int class_count = 10;
  std::size_t feature_count = 0;
  double swap_fraction = 0.0;
  std::pair<int, int> class_pair{0, 1};
};

struct LabelSwapOptions {
  std::size_t n_clients = 24;
  std::size_t samples_per_client = 60;
  std::size_t test_samples_per_client = 30;
  std::size_t feature_count = 10;
  int class_count = 10;
  double swap_fraction = 0.0;
  std::pair<int, int> class_pair{0, 1};
  /// Seed for the class centers; shared across grid cells so only the swap
  /// fraction changes the data distribution.
  std::uint64_t center_seed = 20240611;
  double center_scale = 1.0;
  double cluster_spread = 1.0;
  /// Seed for samples, partition and which samples get relabeled.
  std::uint64_t data_seed = 0;
  /// Group of each client (1 or 2). Empty means the first half is group 1.
  std::vector<int> groups;
};

/// Gaussian-cluster classification data, randomly partitioned over clients.
///
/// On every group-2 client, exactly floor(swap_fraction * m_a) samples of class
/// a are relabeled b and floor(swap_fraction * m_b) of class b relabeled a,
/// where m_a, m_b count the client's samples of those classes before the swap.
/// The same rule is applied to the client's held-out split.
SyntheticDataset build_label_swap_dataset(const LabelSwapOptions& options);

/// CSV with columns client_id,group,feature_0..feature_{d-1},label (training
/// split only).
void write_dataset_csv(const SyntheticDataset& data,
                       const std::filesystem::path& path);

}  // namespace fedstale
