#include "mrope/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>

#include "json.hpp"
#include "mrope/errors.hpp"

namespace mrope {

LoggedDataset LoggedDataset::categorical(std::vector<std::int64_t> context_ids,
                                         std::vector<int> actions, std::vector<double> outcomes,
                                         int n_actions, std::uint64_t seed,
                                         std::vector<int> embeddings,
                                         std::size_t embedding_width) {
  LoggedDataset d;
  d.categorical_ = true;
  d.context_ids_ = std::move(context_ids);
  d.actions_ = std::move(actions);
  d.outcomes_ = std::move(outcomes);
  d.n_actions_ = n_actions;
  d.seed_ = seed;
  d.embeddings_ = std::move(embeddings);
  d.embedding_width_ = embedding_width;
  d.validate();
  return d;
}

LoggedDataset LoggedDataset::dense(std::size_t dim, std::vector<double> features,
                                   std::vector<int> actions, std::vector<double> outcomes,
                                   int n_actions, std::uint64_t seed, std::vector<int> embeddings,
                                   std::size_t embedding_width) {
  LoggedDataset d;
  d.categorical_ = false;
  d.dim_ = dim;
  d.features_ = std::move(features);
  d.actions_ = std::move(actions);
  d.outcomes_ = std::move(outcomes);
  d.n_actions_ = n_actions;
  d.seed_ = seed;
  d.embeddings_ = std::move(embeddings);
  d.embedding_width_ = embedding_width;
  d.validate();
  return d;
}

void LoggedDataset::validate() const {
  const std::size_t n = actions_.size();
  if (n == 0) throw ConfigurationError("logged dataset must contain at least one record");
  if (n_actions_ < 1) throw ConfigurationError("logged dataset needs n_actions >= 1");
  if (outcomes_.size() != n) throw ConfigurationError("outcomes length differs from actions");
  if (categorical_) {
    if (context_ids_.size() != n) throw ConfigurationError("context ids length differs from actions");
    for (auto id : context_ids_)
      if (id < 0) throw ConfigurationError("categorical context ids must be nonnegative");
  } else {
    if (dim_ == 0) throw ConfigurationError("dense contexts need dim >= 1");
    if (features_.size() != n * dim_) throw ConfigurationError("feature matrix is not n x dim");
  }
  for (int a : actions_)
    if (a < 0 || a >= n_actions_) throw std::out_of_range("action outside [0, n_actions)");
  if (embedding_width_ == 0) {
    if (!embeddings_.empty()) throw ConfigurationError("embeddings given without a width");
  } else if (embeddings_.size() != n * embedding_width_) {
    throw ConfigurationError("embeddings must be present for all records or none");
  }
}

ContextRef LoggedDataset::context(std::size_t i) const {
  if (categorical_) return ContextRef(context_ids_[i]);
  return ContextRef(std::span<const double>(features_).subspan(i * dim_, dim_));
}

std::span<const int> LoggedDataset::embedding(std::size_t i) const {
  return std::span<const int>(embeddings_).subspan(i * embedding_width_, embedding_width_);
}

std::int64_t LoggedDataset::context_cardinality() const {
  if (!categorical_) return 0;
  return *std::max_element(context_ids_.begin(), context_ids_.end()) + 1;
}

LoggedDataset LoggedDataset::with_role(DatasetRole role) const {
  LoggedDataset d = *this;
  d.role_ = role;
  return d;
}

LoggedDataset LoggedDataset::with_outcomes(std::vector<double> outcomes) const {
  LoggedDataset d = *this;
  d.outcomes_ = std::move(outcomes);
  d.validate();
  return d;
}

LoggedDataset LoggedDataset::slice(std::size_t begin, std::size_t end) const {
  if (begin >= end || end > size()) throw std::out_of_range("LoggedDataset::slice: bad range");
  LoggedDataset d;
  d.categorical_ = categorical_;
  d.dim_ = dim_;
  d.n_actions_ = n_actions_;
  d.seed_ = seed_;
  d.role_ = role_;
  d.embedding_width_ = embedding_width_;
  d.actions_.assign(actions_.begin() + begin, actions_.begin() + end);
  d.outcomes_.assign(outcomes_.begin() + begin, outcomes_.begin() + end);
  if (categorical_) {
    d.context_ids_.assign(context_ids_.begin() + begin, context_ids_.begin() + end);
  } else {
    d.features_.assign(features_.begin() + begin * dim_, features_.begin() + end * dim_);
  }
  if (embedding_width_ > 0) {
    d.embeddings_.assign(embeddings_.begin() + begin * embedding_width_,
                         embeddings_.begin() + end * embedding_width_);
  }
  return d;
}

void write_jsonl(const LoggedDataset& data, std::ostream& out) {
  nlohmann::json header = {{"schema", "logged-v1"},
                           {"n", data.size()},
                           {"n_actions", data.n_actions()},
                           {"seed", data.seed()}};
  out << header.dump() << '\n';
  for (std::size_t i = 0; i < data.size(); ++i) {
    nlohmann::json rec;
    if (data.is_categorical()) {
      rec["x"] = data.context_id(i);
    } else {
      auto f = data.context(i).features();
      rec["x"] = std::vector<double>(f.begin(), f.end());
    }
    rec["a"] = data.action(i);
    rec["y"] = data.outcome(i);
    if (data.has_embeddings()) {
      auto e = data.embedding(i);
      rec["e"] = std::vector<int>(e.begin(), e.end());
    }
    out << rec.dump() << '\n';
  }
}

LoggedDataset read_jsonl(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw IngestionError("dataset: missing header line");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw IngestionError(std::string("dataset header: ") + e.what());
  }
  if (header.value("schema", "") != "logged-v1")
    throw IngestionError("dataset header: expected schema logged-v1");
  const auto n = header.at("n").get<std::size_t>();
  const int n_actions = header.at("n_actions").get<int>();
  const auto seed = header.value("seed", std::uint64_t{0});

  std::vector<std::int64_t> ids;
  std::vector<double> features;
  std::vector<int> actions;
  std::vector<double> outcomes;
  std::vector<int> embeddings;
  std::size_t dim = 0, width = 0;
  bool categorical = false;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ++row;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
      const auto& x = rec.at("x");
      if (row == 1) {
        categorical = x.is_number_integer();
        dim = categorical ? 0 : x.size();
        width = rec.contains("e") ? rec["e"].size() : 0;
      }
      if (categorical) {
        if (!x.is_number_integer()) throw IngestionError("mixed context kinds");
        ids.push_back(x.get<std::int64_t>());
      } else {
        if (!x.is_array() || x.size() != dim) throw IngestionError("context dimension changes");
        for (const auto& v : x) features.push_back(v.get<double>());
      }
      actions.push_back(rec.at("a").get<int>());
      outcomes.push_back(rec.at("y").get<double>());
      if (width > 0) {
        const auto& e = rec.at("e");
        if (e.size() != width) throw IngestionError("embedding width changes");
        for (const auto& v : e) embeddings.push_back(v.get<int>());
      } else if (rec.contains("e")) {
        throw IngestionError("embeddings must be present for all records or none");
      }
    } catch (const nlohmann::json::exception& e) {
      throw IngestionError("dataset record " + std::to_string(row) + ": " + e.what());
    } catch (const IngestionError& e) {
      throw IngestionError("dataset record " + std::to_string(row) + ": " + e.what());
    }
  }
  if (actions.size() != n)
    throw IngestionError("dataset: header declares n=" + std::to_string(n) + " but found " +
                         std::to_string(actions.size()) + " records");
  if (categorical)
    return LoggedDataset::categorical(std::move(ids), std::move(actions), std::move(outcomes),
                                      n_actions, seed, std::move(embeddings), width);
  return LoggedDataset::dense(dim, std::move(features), std::move(actions), std::move(outcomes),
                              n_actions, seed, std::move(embeddings), width);
}

LoggedDataset read_jsonl_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open dataset file: " + path);
  return read_jsonl(in);
}

}  // namespace mrope
