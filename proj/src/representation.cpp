#include "mrope/representation.hpp"

namespace mrope {
namespace {

Representation::Key context_key(const LoggedDataset& d, std::size_t i) {
  if (d.is_categorical()) return {static_cast<double>(d.context_id(i))};
  const auto f = d.context(i).features();
  return {f.begin(), f.end()};
}

}  // namespace

Representation Representation::context_action() {
  Representation r;
  r.name = "x,a";
  r.of_record = [](const LoggedDataset& d, std::size_t i) {
    auto key = context_key(d, i);
    key.push_back(d.action(i));
    return key;
  };
  return r;
}

Representation Representation::outcome() {
  Representation r;
  r.name = "y";
  r.of_record = [](const LoggedDataset& d, std::size_t i) { return Key{d.outcome(i)}; };
  return r;
}

Representation Representation::context_embedding() {
  Representation r;
  r.name = "x,e";
  r.needs_embeddings = true;
  r.of_record = [](const LoggedDataset& d, std::size_t i) {
    auto key = context_key(d, i);
    for (int e : d.embedding(i)) key.push_back(e);
    return key;
  };
  return r;
}

Representation Representation::embedding() {
  Representation r;
  r.name = "e";
  r.needs_embeddings = true;
  r.of_record = [](const LoggedDataset& d, std::size_t i) {
    Key key;
    for (int e : d.embedding(i)) key.push_back(e);
    return key;
  };
  return r;
}

}  // namespace mrope
