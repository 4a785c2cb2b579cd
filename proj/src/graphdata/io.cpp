#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "dgseq/errors.hpp"
#include "dgseq/graphdata.hpp"

namespace dgseq {

using nlohmann::json;

namespace {

std::ifstream open_in(const std::filesystem::path& path, const char* what) {
  std::ifstream in(path);
  if (!in) throw DataError(std::string("cannot read ") + what + " " + path.string());
  return in;
}

std::ofstream open_out(const std::filesystem::path& path, const char* what) {
  std::ofstream out(path);
  if (!out) throw DataError(std::string("cannot write ") + what + " " + path.string());
  return out;
}

json matrix_json(const TensorD& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

TensorD matrix_from_json(const json& j) {
  if (!j.is_array() || j.empty() || !j[0].is_array()) throw DataError("dataset: expected a non-empty matrix");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  TensorD m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& row = j[static_cast<std::size_t>(i)];
    if (static_cast<Eigen::Index>(row.size()) != cols) throw DataError("dataset: ragged matrix");
    for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

}  // namespace

json to_json(const SyntheticConfig& c) {
  return {{"num_users", c.num_users},
          {"num_subforums", c.num_subforums},
          {"feature_dim", c.feature_dim},
          {"max_windows", c.max_windows},
          {"stage_count", c.stage_count},
          {"emission_strength", c.emission_strength},
          {"stage_end_probability", c.stage_end_probability},
          {"min_events_per_window", c.min_events_per_window},
          {"max_events_per_window", c.max_events_per_window},
          {"seed", c.seed}};
}

SyntheticConfig synthetic_config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("data config must be a JSON object");
  SyntheticConfig c;
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "num_users") c.num_users = value.get<int>();
      else if (key == "num_subforums") c.num_subforums = value.get<int>();
      else if (key == "feature_dim") c.feature_dim = value.get<int>();
      else if (key == "max_windows") c.max_windows = value.get<int>();
      else if (key == "stage_count") c.stage_count = value.get<int>();
      else if (key == "emission_strength") c.emission_strength = value.get<double>();
      else if (key == "stage_end_probability") c.stage_end_probability = value.get<double>();
      else if (key == "min_events_per_window") c.min_events_per_window = value.get<int>();
      else if (key == "max_events_per_window") c.max_events_per_window = value.get<int>();
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else throw ConfigError("unknown data config field '" + key + "'");
    } catch (const json::exception&) {
      throw ConfigError("data config field '" + key + "' has the wrong type");
    }
  }
  validate(c);
  return c;
}

std::vector<EventRecord> read_event_log(const std::filesystem::path& path) {
  auto in = open_in(path, "event log");
  std::vector<EventRecord> events;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = json::parse(line);
      EventRecord e;
      e.user_id = j.at("user_id").get<std::string>();
      e.timestamp = j.at("timestamp").get<std::int64_t>();
      e.subforum_id = j.at("subforum_id").get<int>();
      const auto action = j.at("action").get<std::string>();
      if (action == "post") {
        e.action = Action::post;
      } else if (action == "reply") {
        e.action = Action::reply;
      } else {
        throw DataError("unknown action '" + action + "'");
      }
      if (e.timestamp < 0) throw DataError("negative timestamp");
      events.push_back(std::move(e));
    } catch (const json::exception& ex) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + ex.what());
    } catch (const DataError& ex) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + ex.what());
    }
  }
  return events;
}

std::vector<SubforumProfile> read_profiles(const std::filesystem::path& path) {
  auto in = open_in(path, "profile table");
  std::string line;
  if (!std::getline(in, line)) throw DataError("profile table " + path.string() + " is empty");
  std::vector<SubforumProfile> profiles;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> values;
    SubforumProfile p;
    bool first = true;
    while (std::getline(ss, cell, ',')) {
      try {
        if (first) {
          p.subforum_id = std::stoi(cell);
          first = false;
        } else {
          values.push_back(std::stod(cell));
        }
      } catch (const std::exception&) {
        throw DataError("profile table: bad cell '" + cell + "'");
      }
    }
    if (values.empty()) throw DataError("profile table: row without keyword weights");
    if (std::any_of(values.begin(), values.end(), [](double v) { return v < 0.0; })) {
      throw DataError("profile table: negative keyword weight");
    }
    p.topic = Eigen::Map<Eigen::RowVectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
    const double mass = p.topic.sum();
    if (mass > 0.0) p.topic /= mass;
    profiles.push_back(std::move(p));
  }
  std::sort(profiles.begin(), profiles.end(),
            [](const SubforumProfile& a, const SubforumProfile& b) { return a.subforum_id < b.subforum_id; });
  for (std::size_t i = 0; i < profiles.size(); ++i) {
    if (profiles[i].subforum_id != static_cast<int>(i)) {
      throw DataError("profile table: subforum ids must be exactly 0..N-1");
    }
  }
  return profiles;
}

void write_profiles(const std::vector<SubforumProfile>& profiles, const std::filesystem::path& path) {
  auto out = open_out(path, "profile table");
  out.precision(17);
  out << "subforum_id";
  const auto width = profiles.empty() ? 0 : profiles.front().topic.size();
  for (Eigen::Index k = 0; k < width; ++k) out << ",kw" << k;
  out << '\n';
  for (const auto& p : profiles) {
    out << p.subforum_id;
    for (Eigen::Index k = 0; k < p.topic.size(); ++k) out << ',' << p.topic[k];
    out << '\n';
  }
}

void write_dataset(const std::vector<DynGraphSample>& samples, const std::filesystem::path& path) {
  auto out = open_out(path, "dataset");
  for (const auto& s : samples) {
    json snaps = json::array();
    for (std::size_t t = 0; t < s.snapshots.size(); ++t) {
      json snap = {{"adjacency", matrix_json(s.snapshots[t].adjacency)},
                   {"features", matrix_json(s.snapshots[t].features)}};
      snap["visits"] = t < s.visits.size() ? json(s.visits[t]) : json::array();
      snaps.push_back(std::move(snap));
    }
    json target = json::array();
    for (int tok : s.target) target.push_back(std::string(StageVocabulary::token(tok)));
    out << json{{"user_id", s.user_id}, {"snapshots", std::move(snaps)}, {"target", std::move(target)}}.dump()
        << '\n';
  }
}

std::vector<DynGraphSample> read_dataset(const std::filesystem::path& path) {
  auto in = open_in(path, "dataset");
  std::vector<DynGraphSample> samples;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = json::parse(line);
      DynGraphSample s;
      s.user_id = j.at("user_id").get<std::string>();
      for (const auto& snap : j.at("snapshots")) {
        s.snapshots.push_back({matrix_from_json(snap.at("adjacency")), matrix_from_json(snap.at("features"))});
        s.visits.push_back(snap.value("visits", std::vector<int>{}));
      }
      for (const auto& tok : j.at("target")) s.target.push_back(StageVocabulary::id(tok.get<std::string>()));
      validate(s, true);
      samples.push_back(std::move(s));
    } catch (const json::exception& ex) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + ex.what());
    } catch (const DataError& ex) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + ex.what());
    }
  }
  if (samples.empty()) throw DataError("dataset " + path.string() + " has no samples");
  return samples;
}

std::vector<DynGraphSample> samples_from_events(
    std::vector<EventRecord> events, std::int64_t window_seconds, std::span<const SubforumProfile> profiles,
    const std::vector<std::pair<std::string, std::vector<int>>>& targets) {
  std::vector<std::string> order;
  std::map<std::string, std::vector<EventRecord>> by_user;
  for (auto& e : events) {
    auto [it, inserted] = by_user.try_emplace(e.user_id);
    if (inserted) order.push_back(e.user_id);
    it->second.push_back(std::move(e));
  }
  std::map<std::string, std::vector<int>> labels(targets.begin(), targets.end());
  std::vector<DynGraphSample> samples;
  for (const auto& user : order) {
    auto& evs = by_user[user];
    std::stable_sort(evs.begin(), evs.end(),
                     [](const EventRecord& a, const EventRecord& b) { return a.timestamp < b.timestamp; });
    auto g = build_dynamic_graph(evs, window_seconds, profiles);
    DynGraphSample s{user, std::move(g.snapshots), std::move(g.visits), {}};
    if (auto it = labels.find(user); it != labels.end()) s.target = it->second;
    validate(s, true);
    samples.push_back(std::move(s));
  }
  return samples;
}

std::vector<std::pair<std::string, std::vector<int>>> read_targets(const std::filesystem::path& path) {
  auto in = open_in(path, "target table");
  try {
    json j;
    in >> j;
    std::vector<std::pair<std::string, std::vector<int>>> out;
    for (const auto& [user, tokens] : j.items()) {
      std::vector<int> ids;
      for (const auto& t : tokens) ids.push_back(StageVocabulary::id(t.get<std::string>()));
      out.emplace_back(user, std::move(ids));
    }
    return out;
  } catch (const json::exception& ex) {
    throw DataError(path.string() + ": " + ex.what());
  }
}

}  // namespace dgseq
