#include "mrope/policy.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "mrope/errors.hpp"

namespace mrope {

Scores Scores::linear(std::size_t n_actions, std::size_t dim, std::vector<double> weights) {
  if (weights.size() != n_actions * (dim + 1))
    throw ConfigurationError("linear scores: expected n_actions x (dim + 1) weights");
  Scores s;
  s.n_actions_ = n_actions;
  s.dim_ = dim;
  s.weights_ = std::move(weights);
  return s;
}

Scores Scores::custom(std::size_t n_actions, Fn fn) {
  if (!fn) throw ConfigurationError("custom scores: empty callable");
  Scores s;
  s.n_actions_ = n_actions;
  s.fn_ = std::move(fn);
  return s;
}

void Scores::eval(ContextRef ctx, std::span<double> out) const {
  if (fn_) {
    fn_(ctx, out);
    return;
  }
  const std::size_t stride = dim_ + 1;
  if (ctx.is_categorical()) {
    const auto id = static_cast<std::size_t>(ctx.id());
    if (id >= dim_) throw std::out_of_range("linear scores: context id outside one-hot width");
    for (std::size_t a = 0; a < n_actions_; ++a)
      out[a] = weights_[a * stride + id] + weights_[a * stride + dim_];
    return;
  }
  const auto x = ctx.features();
  if (x.size() != dim_) throw ConfigurationError("linear scores: context dimension mismatch");
  for (std::size_t a = 0; a < n_actions_; ++a) {
    const double* w = weights_.data() + a * stride;
    double s = w[dim_];
    for (std::size_t k = 0; k < dim_; ++k) s += w[k] * x[k];
    out[a] = s;
  }
}

nlohmann::json Scores::to_json() const {
  if (fn_) throw ConfigurationError("custom score functions cannot be serialized");
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t a = 0; a < n_actions_; ++a)
    rows.push_back(std::vector<double>(weights_.begin() + a * (dim_ + 1),
                                       weights_.begin() + (a + 1) * (dim_ + 1)));
  return {{"kind", "linear"}, {"n_actions", n_actions_}, {"dim", dim_}, {"weights", rows}};
}

Scores Scores::from_json(const nlohmann::json& j) {
  if (j.value("kind", "") != "linear") throw IngestionError("scores: only linear scores load");
  const auto n_actions = j.at("n_actions").get<std::size_t>();
  const auto dim = j.at("dim").get<std::size_t>();
  std::vector<double> w;
  for (const auto& row : j.at("weights")) {
    if (row.size() != dim + 1) throw IngestionError("scores: weight row has wrong length");
    for (const auto& v : row) w.push_back(v.get<double>());
  }
  return linear(n_actions, dim, std::move(w));
}

namespace {

void check_row(std::span<const double> row) {
  double total = 0.0;
  for (double p : row) {
    if (!(p >= 0.0)) throw ConfigurationError("policy probabilities must be nonnegative");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-10) throw ConfigurationError("policy row does not sum to 1");
}

}  // namespace

Policy Policy::tabular(std::size_t n_actions, std::vector<double> table) {
  if (n_actions == 0 || table.empty() || table.size() % n_actions != 0)
    throw ConfigurationError("tabular policy: table is not n_contexts x n_actions");
  for (std::size_t r = 0; r < table.size() / n_actions; ++r)
    check_row(std::span<const double>(table).subspan(r * n_actions, n_actions));
  Policy p;
  p.variant_ = Variant::kTabular;
  p.n_actions_ = n_actions;
  p.table_ = std::move(table);
  return p;
}

Policy Policy::fixed(std::vector<double> probs) {
  if (probs.empty()) throw ConfigurationError("fixed policy: empty distribution");
  check_row(probs);
  Policy p;
  p.variant_ = Variant::kFixed;
  p.n_actions_ = probs.size();
  p.table_ = std::move(probs);
  return p;
}

Policy Policy::uniform(std::size_t n_actions) {
  return fixed(std::vector<double>(n_actions, 1.0 / static_cast<double>(n_actions)));
}

Policy Policy::point_mass(std::size_t n_actions, int action) {
  if (action < 0 || static_cast<std::size_t>(action) >= n_actions)
    throw std::out_of_range("point_mass: action outside range");
  std::vector<double> probs(n_actions, 0.0);
  probs[static_cast<std::size_t>(action)] = 1.0;
  return fixed(std::move(probs));
}

Policy Policy::softmax(Scores scores, double sign) {
  Policy p;
  p.variant_ = Variant::kSoftmax;
  p.n_actions_ = scores.n_actions();
  p.scores_ = std::make_shared<const Scores>(std::move(scores));
  p.sign_ = sign;
  return p;
}

Policy Policy::alpha_argmax(Scores scores, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::domain_error("alpha_star must lie in [0, 1]");
  Policy p;
  p.variant_ = Variant::kAlphaArgmax;
  p.n_actions_ = scores.n_actions();
  p.scores_ = std::make_shared<const Scores>(std::move(scores));
  p.alpha_ = alpha;
  return p;
}

void Policy::probs(ContextRef ctx, std::span<double> out) const {
  switch (variant_) {
    case Variant::kTabular: {
      if (!ctx.is_categorical()) throw ConfigurationError("tabular policy needs categorical contexts");
      const auto row = static_cast<std::size_t>(ctx.id());
      if ((row + 1) * n_actions_ > table_.size())
        throw std::out_of_range("tabular policy: context id outside table");
      std::copy_n(table_.begin() + row * n_actions_, n_actions_, out.begin());
      return;
    }
    case Variant::kFixed:
      std::copy(table_.begin(), table_.end(), out.begin());
      return;
    case Variant::kSoftmax: {
      scores_->eval(ctx, out);
      double top = -INFINITY;
      for (std::size_t a = 0; a < n_actions_; ++a) {
        out[a] *= sign_;
        top = std::max(top, out[a]);
      }
      double total = 0.0;
      for (std::size_t a = 0; a < n_actions_; ++a) {
        out[a] = std::exp(out[a] - top);
        total += out[a];
      }
      for (std::size_t a = 0; a < n_actions_; ++a) out[a] /= total;
      return;
    }
    case Variant::kAlphaArgmax: {
      scores_->eval(ctx, out);
      std::size_t best = 0;
      for (std::size_t a = 1; a < n_actions_; ++a)
        if (out[a] > out[best]) best = a;
      const double floor = (1.0 - alpha_) / static_cast<double>(n_actions_);
      for (std::size_t a = 0; a < n_actions_; ++a) out[a] = floor;
      out[best] += alpha_;
      return;
    }
  }
}

std::vector<double> Policy::probs(ContextRef ctx) const {
  std::vector<double> out(n_actions_);
  probs(ctx, out);
  return out;
}

double Policy::prob(ContextRef ctx, int action) const {
  if (action < 0 || static_cast<std::size_t>(action) >= n_actions_)
    throw std::out_of_range("policy_prob: action " + std::to_string(action) + " outside [0, " +
                            std::to_string(n_actions_) + ")");
  if (variant_ == Variant::kFixed) return table_[static_cast<std::size_t>(action)];
  return probs(ctx)[static_cast<std::size_t>(action)];
}

nlohmann::json Policy::to_json() const {
  switch (variant_) {
    case Variant::kTabular: {
      nlohmann::json rows = nlohmann::json::array();
      for (std::size_t r = 0; r < table_.size() / n_actions_; ++r)
        rows.push_back(std::vector<double>(table_.begin() + r * n_actions_,
                                           table_.begin() + (r + 1) * n_actions_));
      return {{"variant", "tabular"}, {"n_actions", n_actions_}, {"table", rows}};
    }
    case Variant::kFixed:
      return {{"variant", "fixed"}, {"probs", table_}};
    case Variant::kSoftmax:
      return {{"variant", "softmax"}, {"sign", sign_}, {"scores", scores_->to_json()}};
    case Variant::kAlphaArgmax:
      return {{"variant", "alpha-argmax"}, {"alpha", alpha_}, {"scores", scores_->to_json()}};
  }
  return {};
}

Policy Policy::from_json(const nlohmann::json& j) {
  try {
    const auto variant = j.at("variant").get<std::string>();
    if (variant == "tabular") {
      const auto n_actions = j.at("n_actions").get<std::size_t>();
      std::vector<double> table;
      for (const auto& row : j.at("table")) {
        if (row.size() != n_actions) throw IngestionError("policy: table row has wrong length");
        for (const auto& v : row) table.push_back(v.get<double>());
      }
      return tabular(n_actions, std::move(table));
    }
    if (variant == "fixed") return fixed(j.at("probs").get<std::vector<double>>());
    if (variant == "uniform") return uniform(j.at("n_actions").get<std::size_t>());
    if (variant == "softmax")
      return softmax(Scores::from_json(j.at("scores")), j.value("sign", 1.0));
    if (variant == "alpha-argmax")
      return alpha_argmax(Scores::from_json(j.at("scores")), j.at("alpha").get<double>());
    throw IngestionError("policy: unknown variant '" + variant + "'");
  } catch (const nlohmann::json::exception& e) {
    throw IngestionError(std::string("policy JSON: ") + e.what());
  }
}

}  // namespace mrope
