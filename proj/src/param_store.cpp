#include "setcast/param_store.hpp"

#include <stdexcept>

namespace setcast {

const char* to_string(ParamGroup g) {
  switch (g) {
    case ParamGroup::kDefault: return "default";
    case ParamGroup::kFast: return "fast";
    case ParamGroup::kSlow: return "slow";
  }
  return "default";
}

ParamGroup param_group_from_string(const std::string& s) {
  if (s == "default") return ParamGroup::kDefault;
  if (s == "fast") return ParamGroup::kFast;
  if (s == "slow") return ParamGroup::kSlow;
  throw std::invalid_argument("unknown parameter group: " + s);
}

ParamStore::Entry& ParamStore::add(const std::string& name, Eigen::Index rows,
                                   Eigen::Index cols, ParamGroup group) {
  if (entries_.count(name) != 0) {
    throw std::invalid_argument("ParamStore::add: duplicate parameter name: " + name);
  }
  Entry& e = entries_[name];
  e.value = Eigen::MatrixXd::Zero(rows, cols);
  e.grad = Eigen::MatrixXd::Zero(rows, cols);
  e.group = group;
  return e;
}

ParamStore::Entry& ParamStore::add_random(const std::string& name, Eigen::Index rows,
                                          Eigen::Index cols, Rng& rng, double scale,
                                          ParamGroup group) {
  Entry& e = add(name, rows, cols, group);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      e.value(i, j) = scale * rng.gaussian();
    }
  }
  return e;
}

ParamStore::Entry& ParamStore::add_constant(const std::string& name, Eigen::Index rows,
                                            Eigen::Index cols, double fill,
                                            ParamGroup group) {
  Entry& e = add(name, rows, cols, group);
  e.value.setConstant(fill);
  return e;
}

ParamStore::Entry& ParamStore::at(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) {
    throw std::invalid_argument("ParamStore: unknown parameter: " + name);
  }
  return it->second;
}

const ParamStore::Entry& ParamStore::at(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) {
    throw std::invalid_argument("ParamStore: unknown parameter: " + name);
  }
  return it->second;
}

void ParamStore::zero_grads() {
  for (auto& [name, e] : entries_) e.grad.setZero();
}

}  // namespace setcast
