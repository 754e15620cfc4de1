#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "mrope/dataset.hpp"
#include "mrope/policy.hpp"

namespace mrope {

// A summary R of (X, A[, E], Y) used by G-MIPS. `distribution` enumerates
// p_pi(r | x) under a policy and is only needed by GM-DR.
struct Representation {
  using Key = std::vector<double>;
  using OfRecord = std::function<Key(const LoggedDataset&, std::size_t)>;
  using Distribution =
      std::function<std::vector<std::pair<Key, double>>(ContextRef, const Policy&)>;

  std::string name;
  bool needs_embeddings = false;
  OfRecord of_record;
  Distribution distribution;

  // r = (x, a). Categorical contexts contribute their id, dense ones the
  // feature vector.
  static Representation context_action();
  // r = y
  static Representation outcome();
  // r = (x, e) with the logged embedding tuple.
  static Representation context_embedding();
  // r = e alone.
  static Representation embedding();
};

}  // namespace mrope
