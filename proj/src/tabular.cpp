#include "mrope/tabular.hpp"

#include <cmath>
#include <string>

#include "mrope/errors.hpp"
#include "mrope/rng.hpp"

namespace mrope {
namespace {

constexpr double kRowTolerance = 1e-12;

void check_rows(std::span<const double> table, std::size_t width, const char* what) {
  if (width == 0 || table.size() % width != 0)
    throw ConfigurationError(std::string(what) + ": table has the wrong shape");
  for (std::size_t r = 0; r < table.size() / width; ++r) {
    double total = 0.0;
    for (std::size_t c = 0; c < width; ++c) {
      const double p = table[r * width + c];
      if (!(p >= 0.0)) throw ConfigurationError(std::string(what) + ": negative probability");
      total += p;
    }
    if (std::abs(total - 1.0) > kRowTolerance)
      throw ConfigurationError(std::string(what) + ": row " + std::to_string(r) +
                               " does not sum to 1");
  }
}

}  // namespace

TabularEnvironment::TabularEnvironment(Spec spec) : spec_(std::move(spec)) {
  const std::size_t nx = spec_.context_probs.size();
  const std::size_t na = spec_.n_actions;
  const std::size_t ny = spec_.outcomes.size();
  if (nx == 0 || na == 0 || ny == 0) throw ConfigurationError("tabular env: empty support");
  check_rows(spec_.context_probs, nx, "context distribution");
  for (std::size_t i = 0; i < ny; ++i)
    for (std::size_t j = i + 1; j < ny; ++j)
      if (spec_.outcomes[i] == spec_.outcomes[j])
        throw ConfigurationError("tabular env: outcome support values must be distinct");
  if (spec_.behavior.size() != nx * na || spec_.target.size() != nx * na)
    throw ConfigurationError("tabular env: policy tables must be n_contexts x n_actions");
  check_rows(spec_.behavior, na, "behavior policy");
  check_rows(spec_.target, na, "target policy");
  for (std::size_t i = 0; i < nx * na; ++i)
    if (spec_.target[i] > 0.0 && !(spec_.behavior[i] > 0.0))
      throw SupportViolationError("tabular env: target mass where behavior has none");

  if (spec_.embedding && spec_.chain)
    throw ConfigurationError("tabular env: embedding and chain structures are exclusive");

  std::vector<double> derived;
  if (spec_.embedding) {
    const auto& emb = *spec_.embedding;
    const std::size_t ne = emb.n_embeddings;
    if (emb.given_action.size() != na * ne || emb.outcome_given_xe.size() != nx * ne * ny)
      throw ConfigurationError("tabular env: embedding tables have the wrong shape");
    check_rows(emb.given_action, ne, "p(e|a)");
    check_rows(emb.outcome_given_xe, ny, "p(y|x,e)");
    derived.assign(nx * na * ny, 0.0);
    for (std::size_t x = 0; x < nx; ++x)
      for (std::size_t a = 0; a < na; ++a)
        for (std::size_t e = 0; e < ne; ++e)
          for (std::size_t y = 0; y < ny; ++y)
            derived[(x * na + a) * ny + y] +=
                emb.given_action[a * ne + e] * emb.outcome_given_xe[(x * ne + e) * ny + y];
  } else if (spec_.chain) {
    const auto& ch = *spec_.chain;
    if (ch.r1_given_xa.size() != nx * na * ch.n_r1 || ch.r2_given_r1.size() != ch.n_r1 * ch.n_r2 ||
        ch.outcome_given_r2.size() != ch.n_r2 * ny)
      throw ConfigurationError("tabular env: chain tables have the wrong shape");
    check_rows(ch.r1_given_xa, ch.n_r1, "p(r1|x,a)");
    check_rows(ch.r2_given_r1, ch.n_r2, "p(r2|r1)");
    check_rows(ch.outcome_given_r2, ny, "p(y|r2)");
    derived.assign(nx * na * ny, 0.0);
    for (std::size_t xa = 0; xa < nx * na; ++xa)
      for (std::size_t r1 = 0; r1 < ch.n_r1; ++r1)
        for (std::size_t r2 = 0; r2 < ch.n_r2; ++r2)
          for (std::size_t y = 0; y < ny; ++y)
            derived[xa * ny + y] += ch.r1_given_xa[xa * ch.n_r1 + r1] *
                                    ch.r2_given_r1[r1 * ch.n_r2 + r2] *
                                    ch.outcome_given_r2[r2 * ny + y];
  }
  if (!derived.empty()) {
    if (spec_.outcome_table.empty()) {
      spec_.outcome_table = std::move(derived);
    } else {
      if (spec_.outcome_table.size() != derived.size())
        throw ConfigurationError("tabular env: outcome table has the wrong shape");
      for (std::size_t i = 0; i < derived.size(); ++i)
        if (std::abs(derived[i] - spec_.outcome_table[i]) > 1e-12)
          throw ConfigurationError("tabular env: outcome table disagrees with declared structure");
    }
  }
  if (spec_.outcome_table.size() != nx * na * ny)
    throw ConfigurationError("tabular env: outcome table must be n_contexts x n_actions x n_outcomes");
  check_rows(spec_.outcome_table, ny, "p(y|x,a)");
}

double TabularEnvironment::embedding_prob(std::size_t a, std::size_t e) const {
  const auto& emb = spec_.embedding.value();
  return emb.given_action[a * emb.n_embeddings + e];
}

double TabularEnvironment::outcome_given_embedding(std::size_t x, std::size_t e,
                                                   std::size_t y) const {
  const auto& emb = spec_.embedding.value();
  return emb.outcome_given_xe[(x * emb.n_embeddings + e) * n_outcomes() + y];
}

Policy TabularEnvironment::behavior_policy() const {
  return Policy::tabular(n_actions(), spec_.behavior);
}

Policy TabularEnvironment::target_policy() const {
  return Policy::tabular(n_actions(), spec_.target);
}

TabularEnvironment TabularEnvironment::with_target(std::vector<double> target) const {
  Spec s = spec_;
  s.target = std::move(target);
  if (s.embedding || s.chain) s.outcome_table.clear();
  return TabularEnvironment(std::move(s));
}

TabularEnvironment TabularEnvironment::with_behavior(std::vector<double> behavior) const {
  Spec s = spec_;
  s.behavior = std::move(behavior);
  if (s.embedding || s.chain) s.outcome_table.clear();
  return TabularEnvironment(std::move(s));
}

LoggedDataset sample_logged_dataset(const TabularEnvironment& env, std::size_t n,
                                    std::uint64_t seed, std::uint64_t stream) {
  if (n == 0) throw ConfigurationError("sample_logged_dataset: n must be >= 1");
  Rng rng = make_rng(seed, stream);
  const auto& spec = env.spec();
  const std::size_t na = env.n_actions();
  const std::size_t ny = env.n_outcomes();

  std::vector<std::int64_t> ids(n);
  std::vector<int> actions(n);
  std::vector<double> outcomes(n);
  std::vector<int> embeddings;
  std::size_t width = 0;
  if (spec.embedding) width = 1;
  if (spec.chain) width = 2;
  embeddings.reserve(n * width);

  for (std::size_t i = 0; i < n; ++i) {
    const int x = sample_categorical(spec.context_probs, rng);
    const auto xs = static_cast<std::size_t>(x);
    const int a = sample_categorical(std::span<const double>(spec.behavior).subspan(xs * na, na), rng);
    const auto as = static_cast<std::size_t>(a);
    int y = 0;
    if (spec.embedding) {
      const auto& emb = *spec.embedding;
      const std::size_t ne = emb.n_embeddings;
      const int e = sample_categorical(std::span<const double>(emb.given_action).subspan(as * ne, ne), rng);
      y = sample_categorical(std::span<const double>(emb.outcome_given_xe)
                                 .subspan((xs * ne + static_cast<std::size_t>(e)) * ny, ny),
                             rng);
      embeddings.push_back(e);
    } else if (spec.chain) {
      const auto& ch = *spec.chain;
      const int r1 = sample_categorical(
          std::span<const double>(ch.r1_given_xa).subspan((xs * na + as) * ch.n_r1, ch.n_r1), rng);
      const int r2 = sample_categorical(
          std::span<const double>(ch.r2_given_r1).subspan(static_cast<std::size_t>(r1) * ch.n_r2, ch.n_r2),
          rng);
      y = sample_categorical(
          std::span<const double>(ch.outcome_given_r2).subspan(static_cast<std::size_t>(r2) * ny, ny), rng);
      embeddings.push_back(r1);
      embeddings.push_back(r2);
    } else {
      y = sample_categorical(
          std::span<const double>(spec.outcome_table).subspan((xs * na + as) * ny, ny), rng);
    }
    ids[i] = x;
    actions[i] = a;
    outcomes[i] = env.outcome_value(static_cast<std::size_t>(y));
  }
  return LoggedDataset::categorical(std::move(ids), std::move(actions), std::move(outcomes),
                                    static_cast<int>(na), seed, std::move(embeddings), width);
}

}  // namespace mrope
