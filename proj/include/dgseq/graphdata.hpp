#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "dgseq/diffcore/tensor.hpp"

namespace dgseq {

enum class Action { post, reply };

struct EventRecord {
  std::string user_id;
  std::int64_t timestamp = 0;
  int subforum_id = 0;
  Action action = Action::post;
};

/// Keyword-frequency profile of one subforum, L1-normalised when nonzero.
struct SubforumProfile {
  int subforum_id = 0;
  Eigen::RowVectorXd topic;
};

/// One time window: directed weighted adjacency (N x N) and node features (N x D).
struct SnapshotGraph {
  TensorD adjacency;
  TensorD features;

  [[nodiscard]] Eigen::Index num_nodes() const { return adjacency.rows(); }
  [[nodiscard]] Eigen::Index feature_dim() const { return features.cols(); }
  static SnapshotGraph zeros(Eigen::Index nodes, Eigen::Index dim) {
    return {TensorD::Zero(nodes, nodes), TensorD::Zero(nodes, dim)};
  }
};

/// A user's dynamic graph paired with its stage-token target. `visits` keeps
/// the raw per-window subforum visit order, which the sequence-only baseline
/// consumes.
struct DynGraphSample {
  std::string user_id;
  std::vector<SnapshotGraph> snapshots;
  std::vector<std::vector<int>> visits;
  std::vector<int> target;

  [[nodiscard]] std::size_t num_windows() const { return snapshots.size(); }
};

/// Six treatment stages followed by the BOS, EOS and PAD markers.
class StageVocabulary {
 public:
  static constexpr int kStageCount = 6;
  static constexpr int kBos = 6;
  static constexpr int kEos = 7;
  static constexpr int kPad = 8;
  static constexpr int kSize = 9;

  static constexpr std::array<std::string_view, kSize> kTokens = {
      "Dx", "Chemotherapy", "Targeted", "Hormonal", "Radiation", "Surgery", "<bos>", "<eos>", "<pad>"};

  static std::string_view token(int id);
  /// Throws DataError for unknown tokens.
  static int id(std::string_view token);
  static bool is_stage(int id) { return id >= 0 && id < kStageCount; }
};

struct DynamicGraph {
  std::vector<SnapshotGraph> snapshots;
  std::vector<std::vector<int>> visits;
};

inline constexpr std::int64_t kDefaultWindowSeconds = 2'592'000;  // 30 days

/// Partitions a user's time-sorted events into fixed windows and builds one
/// transition graph per window, from the first event's window to the last.
DynamicGraph build_dynamic_graph(std::span<const EventRecord> events, std::int64_t window_seconds,
                                 std::span<const SubforumProfile> profiles);

struct SyntheticConfig {
  int num_users = 100;
  int num_subforums = 10;
  int feature_dim = 9;  // keyword dimensions + 1 activity-count dimension
  int max_windows = 8;
  int stage_count = StageVocabulary::kStageCount;
  double emission_strength = 0.9;
  /// Per-window probability that the current stage ends (geometric persistence).
  double stage_end_probability = 0.5;
  int min_events_per_window = 6;
  int max_events_per_window = 14;
  std::uint64_t seed = 0;
};

struct SyntheticDataset {
  std::vector<DynGraphSample> samples;
  std::vector<SubforumProfile> profiles;
  /// planted_subforum[stage] = the subforum that stage's activity concentrates on.
  std::vector<int> planted_subforum;
  /// Hidden stage of every emitted window, per user.
  std::vector<std::vector<int>> window_stages;
  /// Full planned stage chain and sampled durations (in windows) per user,
  /// before truncation at max_windows.
  std::vector<std::vector<int>> stage_chains;
  std::vector<std::vector<int>> stage_durations;
};

SyntheticDataset generate_synthetic(const SyntheticConfig& config);
void validate(const SyntheticConfig& config);
nlohmann::json to_json(const SyntheticConfig& config);
/// Missing fields keep their defaults; unknown fields are a ConfigError.
SyntheticConfig synthetic_config_from_json(const nlohmann::json& j);

/// Sums all adjacency matrices and all feature matrices into one snapshot.
SnapshotGraph aggregate_static(const DynGraphSample& sample);

/// Concatenates the per-window visit sequences in time order, collapsing
/// consecutive duplicates inside each window.
std::vector<int> flatten_to_sequence(const DynGraphSample& sample);

struct DatasetSplit {
  std::vector<DynGraphSample> train;
  std::vector<DynGraphSample> validation;
  std::vector<DynGraphSample> test;
};

DatasetSplit split_dataset(std::vector<DynGraphSample> samples, std::array<double, 3> ratios,
                           std::uint64_t seed);

/// Throws DataError unless every snapshot shares one (N, D) and targets are
/// stage tokens. Unlabelled samples (empty target) pass only when allowed.
void validate(const DynGraphSample& sample, bool allow_unlabelled = false);

// ---- file formats -------------------------------------------------------

std::vector<EventRecord> read_event_log(const std::filesystem::path& path);
std::vector<SubforumProfile> read_profiles(const std::filesystem::path& path);
void write_profiles(const std::vector<SubforumProfile>& profiles, const std::filesystem::path& path);

void write_dataset(const std::vector<DynGraphSample>& samples, const std::filesystem::path& path);
std::vector<DynGraphSample> read_dataset(const std::filesystem::path& path);

/// Groups events by user (first-appearance order), sorts each user's events by
/// time and builds one sample per user. Targets come from `targets`
/// (user_id -> stage tokens); users without an entry get an empty target.
std::vector<DynGraphSample> samples_from_events(
    std::vector<EventRecord> events, std::int64_t window_seconds, std::span<const SubforumProfile> profiles,
    const std::vector<std::pair<std::string, std::vector<int>>>& targets = {});

/// Reads a JSON object {user_id: [stage token, ...]}.
std::vector<std::pair<std::string, std::vector<int>>> read_targets(const std::filesystem::path& path);

}  // namespace dgseq
