#include "mrope/models.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mrope/errors.hpp"

namespace mrope {

PolicyRatio PolicyRatio::from_policies(Policy target, Policy behavior, double floor) {
  if (!(floor > 0.0 && floor < 1.0)) throw std::domain_error("policy ratio: floor must lie in (0, 1)");
  if (target.n_actions() != behavior.n_actions())
    throw ConfigurationError("policy ratio: target and behavior disagree on n_actions");
  PolicyRatio r;
  r.target_ = std::make_shared<const Policy>(std::move(target));
  r.behavior_ = std::make_shared<const Policy>(std::move(behavior));
  r.floor_ = floor;
  return r;
}

PolicyRatio PolicyRatio::ate(Policy behavior, double floor) {
  if (!(floor > 0.0 && floor < 1.0)) throw std::domain_error("policy ratio: floor must lie in (0, 1)");
  if (behavior.n_actions() != 2) throw ConfigurationError("ATE ratio needs exactly two actions");
  PolicyRatio r;
  r.behavior_ = std::make_shared<const Policy>(std::move(behavior));
  r.floor_ = floor;
  r.signed_ = true;
  return r;
}

PolicyRatio PolicyRatio::from_function(Fn fn, bool signed_ratio) {
  if (!fn) throw ConfigurationError("policy ratio: empty callable");
  PolicyRatio r;
  r.fn_ = std::move(fn);
  r.signed_ = signed_ratio;
  return r;
}

double PolicyRatio::operator()(ContextRef ctx, int a) const {
  if (fn_) return fn_(ctx, a);
  const double b = std::max(behavior_->prob(ctx, a), floor_);
  if (!target_) return (a == 1 ? 1.0 : -1.0) / b;
  return target_->prob(ctx, a) / b;
}

const char* ratio_kind_name(RatioKind kind) {
  switch (kind) {
    case RatioKind::kMarginalRatio: return "marginal-ratio";
    case RatioKind::kHModel: return "h-model";
    case RatioKind::kRepresentationRatio: return "representation-ratio";
    case RatioKind::kAteMarginalRatio: return "ate-marginal-ratio";
  }
  return "?";
}

RatioKind ratio_kind_from_name(const std::string& name) {
  for (auto k : {RatioKind::kMarginalRatio, RatioKind::kHModel, RatioKind::kRepresentationRatio,
                 RatioKind::kAteMarginalRatio})
    if (name == ratio_kind_name(k)) return k;
  throw IngestionError("unknown ratio model kind '" + name + "'");
}

DiscreteRatioTable DiscreteRatioTable::fit(std::span<const std::vector<double>> keys,
                                           std::span<const double> targets) {
  if (keys.empty()) throw FitError("discrete ratio table: empty training set");
  if (keys.size() != targets.size()) throw ConfigurationError("discrete ratio table: length mismatch");
  std::map<std::vector<double>, std::pair<double, std::size_t>> acc;
  double total = 0.0;
  for (std::size_t i = 0; i < keys.size(); ++i) {
    auto& cell = acc[keys[i]];
    cell.first += targets[i];
    cell.second += 1;
    total += targets[i];
  }
  DiscreteRatioTable t;
  for (const auto& [key, cell] : acc) t.entries_[key] = cell.first / static_cast<double>(cell.second);
  t.fallback_ = total / static_cast<double>(keys.size());
  return t;
}

DiscreteRatioTable DiscreteRatioTable::from_entries(std::map<std::vector<double>, double> entries,
                                                    double fallback) {
  DiscreteRatioTable t;
  t.entries_ = std::move(entries);
  t.fallback_ = fallback;
  return t;
}

double DiscreteRatioTable::lookup(std::span<const double> key) const {
  const auto it = entries_.find(std::vector<double>(key.begin(), key.end()));
  return it == entries_.end() ? fallback_ : it->second;
}

RatioModel RatioModel::from_table(RatioKind kind, DiscreteRatioTable table) {
  RatioModel m;
  m.kind_ = kind;
  m.backing_ = Backing::kTable;
  m.key_dim_ = table.entries().empty() ? 1 : table.entries().begin()->first.size();
  m.table_ = std::make_shared<const DiscreteRatioTable>(std::move(table));
  return m;
}

RatioModel RatioModel::from_mlp(RatioKind kind, MlpRegressor mlp) {
  RatioModel m;
  m.kind_ = kind;
  m.backing_ = Backing::kMlp;
  m.key_dim_ = mlp.input_dim();
  m.mlp_ = std::make_shared<const MlpRegressor>(std::move(mlp));
  return m;
}

RatioModel RatioModel::from_function(RatioKind kind, std::size_t key_dim, Fn fn) {
  if (!fn) throw ConfigurationError("ratio model: empty callable");
  RatioModel m;
  m.kind_ = kind;
  m.backing_ = Backing::kFunction;
  m.key_dim_ = key_dim;
  m.fn_ = std::move(fn);
  return m;
}

bool RatioModel::fitted() const { return backing_ != Backing::kMlp || mlp_->fitted(); }

double RatioModel::operator()(std::span<const double> key) const {
  double v = 0.0;
  switch (backing_) {
    case Backing::kTable: v = table_->lookup(key); break;
    case Backing::kMlp: v = mlp_->predict(key); break;
    case Backing::kFunction: v = fn_(key); break;
  }
  return clamp_ ? std::max(v, 0.0) : v;
}

RatioModel RatioModel::clamped_at_zero(bool clamp) const {
  RatioModel m = *this;
  m.clamp_ = clamp;
  return m;
}

nlohmann::json RatioModel::to_json() const {
  nlohmann::json j;
  j["kind"] = ratio_kind_name(kind_);
  j["clamp_at_zero"] = clamp_;
  switch (backing_) {
    case Backing::kTable: {
      nlohmann::json entries = nlohmann::json::array();
      for (const auto& [key, value] : table_->entries())
        entries.push_back({{"key", key}, {"value", value}});
      j["backing"] = "table";
      j["entries"] = entries;
      j["fallback"] = table_->fallback();
      break;
    }
    case Backing::kMlp:
      j["backing"] = "mlp";
      j["mlp"] = mlp_->to_json();
      break;
    case Backing::kFunction:
      throw ConfigurationError("function-backed ratio models cannot be serialized");
  }
  return j;
}

RatioModel RatioModel::from_json(const nlohmann::json& j) {
  try {
    const RatioKind kind = ratio_kind_from_name(j.at("kind").get<std::string>());
    const std::string backing = j.at("backing").get<std::string>();
    RatioModel m;
    if (backing == "table") {
      std::map<std::vector<double>, double> entries;
      for (const auto& e : j.at("entries")) {
        const auto& key = e.at("key");
        entries[key.is_array() ? key.get<std::vector<double>>()
                               : std::vector<double>{key.get<double>()}] = e.at("value").get<double>();
      }
      m = from_table(kind, DiscreteRatioTable::from_entries(std::move(entries),
                                                            j.at("fallback").get<double>()));
    } else if (backing == "mlp") {
      m = from_mlp(kind, MlpRegressor::from_json(j.at("mlp")));
    } else {
      throw IngestionError("ratio model: unknown backing '" + backing + "'");
    }
    return m.clamped_at_zero(j.value("clamp_at_zero", false));
  } catch (const nlohmann::json::exception& e) {
    throw IngestionError(std::string("ratio model json: ") + e.what());
  }
}

OutcomeModel OutcomeModel::from_function(std::size_t n_actions, Fn fn) {
  if (!fn) throw ConfigurationError("outcome model: empty callable");
  OutcomeModel m;
  m.n_actions_ = n_actions;
  m.fn_ = std::move(fn);
  return m;
}

OutcomeModel OutcomeModel::tabular(std::size_t n_actions, std::vector<double> table) {
  if (n_actions == 0 || table.size() % n_actions != 0)
    throw ConfigurationError("outcome model: table must be n_contexts x n_actions");
  OutcomeModel m;
  m.n_actions_ = n_actions;
  m.table_ = std::move(table);
  return m;
}

OutcomeModel OutcomeModel::linear(std::size_t n_actions, std::size_t dim, std::vector<double> weights) {
  OutcomeModel m;
  m.n_actions_ = n_actions;
  m.linear_ = std::make_shared<const Scores>(Scores::linear(n_actions, dim, std::move(weights)));
  return m;
}

double OutcomeModel::operator()(ContextRef ctx, int a) const {
  if (a < 0 || static_cast<std::size_t>(a) >= n_actions_)
    throw std::out_of_range("outcome model: action out of range");
  if (fn_) return fn_(ctx, a);
  if (linear_) {
    std::vector<double> s(n_actions_);
    linear_->eval(ctx, s);
    return s[static_cast<std::size_t>(a)];
  }
  if (!ctx.is_categorical()) throw ConfigurationError("tabular outcome model needs categorical contexts");
  const auto idx = static_cast<std::size_t>(ctx.id()) * n_actions_ + static_cast<std::size_t>(a);
  if (idx >= table_.size()) throw std::out_of_range("outcome model: context id out of range");
  return table_[idx];
}

nlohmann::json OutcomeModel::to_json() const {
  if (fn_) throw ConfigurationError("function-backed outcome models cannot be serialized");
  if (linear_) return {{"kind", "linear"}, {"scores", linear_->to_json()}};
  return {{"kind", "tabular"}, {"n_actions", n_actions_}, {"table", table_}};
}

OutcomeModel OutcomeModel::from_json(const nlohmann::json& j) {
  try {
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "linear") {
      const Scores s = Scores::from_json(j.at("scores"));
      return linear(s.n_actions(), s.dim(), {s.linear_weights().begin(), s.linear_weights().end()});
    }
    if (kind == "tabular")
      return tabular(j.at("n_actions").get<std::size_t>(), j.at("table").get<std::vector<double>>());
    throw IngestionError("outcome model: unknown kind '" + kind + "'");
  } catch (const nlohmann::json::exception& e) {
    throw IngestionError(std::string("outcome model json: ") + e.what());
  }
}

}  // namespace mrope
