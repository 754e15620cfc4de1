#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace mrope {

// A context is either a categorical id (exact-oracle path) or a dense real
// vector (experiment path). Views never own their storage.
class ContextRef {
 public:
  explicit ContextRef(std::int64_t id) : id_(id) {}
  explicit ContextRef(std::span<const double> features) : features_(features) {}

  bool is_categorical() const { return id_ >= 0; }
  std::int64_t id() const { return id_; }
  std::span<const double> features() const { return features_; }

 private:
  std::int64_t id_ = -1;
  std::span<const double> features_;
};

// Fitting code refuses evaluation-tagged datasets.
enum class DatasetRole { kUnspecified, kTrain, kEval };

class LoggedDataset {
 public:
  LoggedDataset() = default;

  static LoggedDataset categorical(std::vector<std::int64_t> context_ids, std::vector<int> actions,
                                   std::vector<double> outcomes, int n_actions,
                                   std::uint64_t seed = 0, std::vector<int> embeddings = {},
                                   std::size_t embedding_width = 0);

  // features is row-major, n x dim.
  static LoggedDataset dense(std::size_t dim, std::vector<double> features,
                             std::vector<int> actions, std::vector<double> outcomes,
                             int n_actions, std::uint64_t seed = 0,
                             std::vector<int> embeddings = {}, std::size_t embedding_width = 0);

  std::size_t size() const { return actions_.size(); }
  int n_actions() const { return n_actions_; }
  bool is_categorical() const { return categorical_; }
  std::size_t dim() const { return dim_; }
  std::uint64_t seed() const { return seed_; }
  DatasetRole role() const { return role_; }

  ContextRef context(std::size_t i) const;
  std::int64_t context_id(std::size_t i) const { return context_ids_.at(i); }
  int action(std::size_t i) const { return actions_[i]; }
  double outcome(std::size_t i) const { return outcomes_[i]; }
  std::span<const int> actions() const { return actions_; }
  std::span<const double> outcomes() const { return outcomes_; }
  std::span<const double> features() const { return features_; }
  std::span<const std::int64_t> context_ids() const { return context_ids_; }

  bool has_embeddings() const { return embedding_width_ > 0; }
  std::size_t embedding_width() const { return embedding_width_; }
  std::span<const int> embedding(std::size_t i) const;

  // Largest categorical id + 1 (0 for dense data).
  std::int64_t context_cardinality() const;

  LoggedDataset with_role(DatasetRole role) const;
  LoggedDataset with_outcomes(std::vector<double> outcomes) const;
  // Records [begin, end).
  LoggedDataset slice(std::size_t begin, std::size_t end) const;

  bool operator==(const LoggedDataset&) const = default;

 private:
  void validate() const;

  bool categorical_ = false;
  std::size_t dim_ = 0;
  std::vector<std::int64_t> context_ids_;
  std::vector<double> features_;
  std::vector<int> actions_;
  std::vector<double> outcomes_;
  std::vector<int> embeddings_;
  std::size_t embedding_width_ = 0;
  int n_actions_ = 0;
  std::uint64_t seed_ = 0;
  DatasetRole role_ = DatasetRole::kUnspecified;
};

// JSON-lines: a header {"schema":"logged-v1","n":..,"n_actions":..,"seed":..}
// followed by one {"x":..,"a":..,"y":..[,"e":[..]]} object per record.
void write_jsonl(const LoggedDataset& data, std::ostream& out);
LoggedDataset read_jsonl(std::istream& in);
LoggedDataset read_jsonl_file(const std::string& path);

}  // namespace mrope
