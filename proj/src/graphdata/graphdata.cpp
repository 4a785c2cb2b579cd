#include "dgseq/graphdata.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "dgseq/errors.hpp"

namespace dgseq {

std::string_view StageVocabulary::token(int id) {
  if (id < 0 || id >= kSize) throw DataError("vocabulary: unknown token id " + std::to_string(id));
  return kTokens[static_cast<std::size_t>(id)];
}

int StageVocabulary::id(std::string_view token) {
  for (int i = 0; i < kSize; ++i) {
    if (kTokens[static_cast<std::size_t>(i)] == token) return i;
  }
  throw DataError("vocabulary: unknown token '" + std::string(token) + "'");
}

DynamicGraph build_dynamic_graph(std::span<const EventRecord> events, std::int64_t window_seconds,
                                 std::span<const SubforumProfile> profiles) {
  if (events.empty()) throw ContractError("build_dynamic_graph: no events");
  if (window_seconds <= 0) throw ContractError("build_dynamic_graph: window_seconds must be positive");
  if (profiles.empty()) throw DataError("build_dynamic_graph: no subforum profiles");
  const auto n = static_cast<Eigen::Index>(profiles.size());
  const Eigen::Index keywords = profiles.front().topic.size();
  for (std::size_t i = 0; i < profiles.size(); ++i) {
    if (profiles[i].subforum_id != static_cast<int>(i)) {
      throw DataError("build_dynamic_graph: profiles must be ordered by subforum_id 0..N-1");
    }
    if (profiles[i].topic.size() != keywords) throw DataError("build_dynamic_graph: ragged profile widths");
  }
  for (std::size_t i = 0; i < events.size(); ++i) {
    const auto& e = events[i];
    if (e.timestamp < 0) throw DataError("build_dynamic_graph: negative timestamp for user " + e.user_id);
    if (e.subforum_id < 0 || e.subforum_id >= n) {
      throw DataError("build_dynamic_graph: subforum_id " + std::to_string(e.subforum_id) + " outside [0, " +
                      std::to_string(n) + ")");
    }
    if (i > 0 && e.timestamp < events[i - 1].timestamp) {
      throw ContractError("build_dynamic_graph: events are not sorted by timestamp");
    }
  }

  const std::int64_t first = events.front().timestamp / window_seconds;
  const std::int64_t last = events.back().timestamp / window_seconds;
  const auto windows = static_cast<std::size_t>(last - first + 1);

  DynamicGraph g;
  g.visits.resize(windows);
  for (const auto& e : events) {
    g.visits[static_cast<std::size_t>(e.timestamp / window_seconds - first)].push_back(e.subforum_id);
  }
  g.snapshots.reserve(windows);
  for (const auto& visit : g.visits) {
    SnapshotGraph s = SnapshotGraph::zeros(n, keywords + 1);
    std::vector<double> counts(static_cast<std::size_t>(n), 0.0);
    for (std::size_t i = 0; i < visit.size(); ++i) {
      counts[static_cast<std::size_t>(visit[i])] += 1.0;
      if (i > 0 && visit[i] != visit[i - 1]) s.adjacency(visit[i - 1], visit[i]) += 1.0;
    }
    for (Eigen::Index f = 0; f < n; ++f) {
      const double c = counts[static_cast<std::size_t>(f)];
      if (c == 0.0) continue;
      s.features.row(f).head(keywords) = profiles[static_cast<std::size_t>(f)].topic * c;
      s.features(f, keywords) = c;
    }
    g.snapshots.push_back(std::move(s));
  }
  return g;
}

void validate(const SyntheticConfig& c) {
  if (c.num_users < 1) throw ConfigError("num_users must be >= 1");
  if (c.num_subforums < 1) throw ConfigError("num_subforums must be >= 1");
  if (c.feature_dim < 2) throw ConfigError("feature_dim must be >= 2 (keywords + activity count)");
  if (c.max_windows < 1) throw ConfigError("max_windows must be >= 1");
  if (c.stage_count < 1 || c.stage_count > StageVocabulary::kStageCount) {
    throw ConfigError("stage_count must be in [1, " + std::to_string(StageVocabulary::kStageCount) + "]");
  }
  if (c.num_subforums < c.stage_count) throw ConfigError("num_subforums must be >= stage_count");
  if (!(c.emission_strength > 0.0 && c.emission_strength <= 1.0)) {
    throw ConfigError("emission_strength must be in (0, 1]");
  }
  if (!(c.stage_end_probability > 0.0 && c.stage_end_probability <= 1.0)) {
    throw ConfigError("stage_end_probability must be in (0, 1]");
  }
  if (c.min_events_per_window < 1 || c.max_events_per_window < c.min_events_per_window) {
    throw ConfigError("min_events_per_window must be >= 1 and <= max_events_per_window");
  }
}

SyntheticDataset generate_synthetic(const SyntheticConfig& config) {
  validate(config);
  SyntheticDataset ds;
  const int n = config.num_subforums;
  const int keywords = config.feature_dim - 1;

  std::seed_seq global_seq{config.seed, std::uint64_t{0x5eed}};
  std::mt19937_64 global(global_seq);
  std::exponential_distribution<double> expo(1.0);
  for (int f = 0; f < n; ++f) {
    Eigen::RowVectorXd topic(keywords);
    for (int k = 0; k < keywords; ++k) topic[k] = expo(global);
    topic /= topic.sum();
    ds.profiles.push_back({f, topic});
  }
  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), global);
  ds.planted_subforum.assign(perm.begin(), perm.begin() + config.stage_count);

  const std::int64_t window = kDefaultWindowSeconds;
  for (int u = 0; u < config.num_users; ++u) {
    std::mt19937_64 rng(config.seed ^ static_cast<std::uint64_t>(u));
    std::uniform_int_distribution<int> chain_len(1, config.stage_count);
    std::geometric_distribution<int> extra(config.stage_end_probability);
    std::uniform_int_distribution<int> event_count(config.min_events_per_window, config.max_events_per_window);
    std::uniform_int_distribution<std::int64_t> offset(0, window - 1);
    std::uniform_int_distribution<int> any_forum(0, n - 1);
    std::uniform_int_distribution<int> start_window(0, 23);
    std::bernoulli_distribution emit(config.emission_strength);
    std::bernoulli_distribution reply(0.5);

    std::vector<int> stages(static_cast<std::size_t>(config.stage_count));
    std::iota(stages.begin(), stages.end(), 0);
    std::shuffle(stages.begin(), stages.end(), rng);
    stages.resize(static_cast<std::size_t>(chain_len(rng)));
    std::vector<int> durations;
    std::vector<int> per_window;
    for (int s : stages) {
      const int d = 1 + extra(rng);
      durations.push_back(d);
      for (int k = 0; k < d && static_cast<int>(per_window.size()) < config.max_windows; ++k) {
        per_window.push_back(s);
      }
    }

    const std::string user_id = "u" + std::to_string(u);
    const std::int64_t base = start_window(rng);
    std::vector<EventRecord> events;
    for (std::size_t w = 0; w < per_window.size(); ++w) {
      const int count = event_count(rng);
      std::vector<EventRecord> batch;
      for (int e = 0; e < count; ++e) {
        const int forum = emit(rng) ? ds.planted_subforum[static_cast<std::size_t>(per_window[w])] : any_forum(rng);
        const std::int64_t ts = (base + static_cast<std::int64_t>(w)) * window + offset(rng);
        batch.push_back({user_id, ts, forum, reply(rng) ? Action::reply : Action::post});
      }
      std::stable_sort(batch.begin(), batch.end(),
                       [](const EventRecord& a, const EventRecord& b) { return a.timestamp < b.timestamp; });
      events.insert(events.end(), batch.begin(), batch.end());
    }

    auto graph = build_dynamic_graph(events, window, ds.profiles);
    DynGraphSample sample;
    sample.user_id = user_id;
    sample.snapshots = std::move(graph.snapshots);
    sample.visits = std::move(graph.visits);
    for (int s : per_window) {
      if (sample.target.empty() || sample.target.back() != s) sample.target.push_back(s);
    }
    ds.samples.push_back(std::move(sample));
    ds.window_stages.push_back(std::move(per_window));
    ds.stage_chains.push_back(std::move(stages));
    ds.stage_durations.push_back(std::move(durations));
  }
  return ds;
}

SnapshotGraph aggregate_static(const DynGraphSample& sample) {
  validate(sample, true);
  SnapshotGraph out = sample.snapshots.front();
  for (std::size_t t = 1; t < sample.snapshots.size(); ++t) {
    out.adjacency += sample.snapshots[t].adjacency;
    out.features += sample.snapshots[t].features;
  }
  return out;
}

std::vector<int> flatten_to_sequence(const DynGraphSample& sample) {
  std::vector<int> out;
  for (const auto& window : sample.visits) {
    for (std::size_t i = 0; i < window.size(); ++i) {
      if (i == 0 || window[i] != window[i - 1]) out.push_back(window[i]);
    }
  }
  return out;
}

DatasetSplit split_dataset(std::vector<DynGraphSample> samples, std::array<double, 3> ratios,
                           std::uint64_t seed) {
  if (std::abs(ratios[0] + ratios[1] + ratios[2] - 1.0) > 1e-9) throw ConfigError("split ratios must sum to 1");
  if (std::any_of(ratios.begin(), ratios.end(), [](double r) { return r < 0.0; })) {
    throw ConfigError("split ratios must be non-negative");
  }
  const std::size_t n = samples.size();
  if (n < 3) throw DataError("split_dataset: need at least 3 samples, got " + std::to_string(n));

  std::array<std::size_t, 3> sizes{};
  sizes[0] = static_cast<std::size_t>(std::llround(ratios[0] * static_cast<double>(n)));
  sizes[1] = static_cast<std::size_t>(std::llround(ratios[1] * static_cast<double>(n)));
  sizes[0] = std::min(sizes[0], n);
  sizes[1] = std::min(sizes[1], n - sizes[0]);
  sizes[2] = n - sizes[0] - sizes[1];
  // every partition gets at least one user
  for (auto& s : sizes) {
    if (s == 0) {
      auto largest = std::max_element(sizes.begin(), sizes.end());
      --*largest;
      s = 1;
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  DatasetSplit split;
  for (std::size_t i = 0; i < n; ++i) {
    auto& sample = samples[order[i]];
    if (i < sizes[0]) {
      split.train.push_back(std::move(sample));
    } else if (i < sizes[0] + sizes[1]) {
      split.validation.push_back(std::move(sample));
    } else {
      split.test.push_back(std::move(sample));
    }
  }
  return split;
}

void validate(const DynGraphSample& sample, bool allow_unlabelled) {
  if (sample.snapshots.empty()) throw DataError("sample " + sample.user_id + ": no snapshots");
  const auto n = sample.snapshots.front().num_nodes();
  const auto d = sample.snapshots.front().feature_dim();
  for (const auto& s : sample.snapshots) {
    if (s.adjacency.rows() != n || s.adjacency.cols() != n || s.features.rows() != n ||
        s.features.cols() != d) {
      throw DataError("sample " + sample.user_id + ": snapshots disagree on node or feature count");
    }
    if ((s.adjacency.array() < 0.0).any()) throw DataError("sample " + sample.user_id + ": negative edge weight");
  }
  if (!sample.visits.empty() && sample.visits.size() != sample.snapshots.size()) {
    throw DataError("sample " + sample.user_id + ": visit lists do not match snapshot count");
  }
  if (sample.target.empty() && !allow_unlabelled) throw DataError("sample " + sample.user_id + ": empty target");
  for (int tok : sample.target) {
    if (!StageVocabulary::is_stage(tok)) {
      throw DataError("sample " + sample.user_id + ": target token " + std::to_string(tok) + " is not a stage");
    }
  }
}

}  // namespace dgseq
