#ifndef SETCAST_PARAM_STORE_HPP_
#define SETCAST_PARAM_STORE_HPP_

#include <Eigen/Dense>
#include <map>
#include <string>

#include "setcast/rng.hpp"

namespace setcast {

enum class ParamGroup { kDefault, kFast, kSlow };

const char* to_string(ParamGroup g);
ParamGroup param_group_from_string(const std::string& s);

// Registry of named trainable parameters with matching gradient storage.
// Vectors are stored as n x 1 matrices. Iteration order is the sorted name
// order (std::map), which keeps optimizer sweeps deterministic.
class ParamStore {
 public:
  struct Entry {
    Eigen::MatrixXd value;
    Eigen::MatrixXd grad;
    ParamGroup group = ParamGroup::kDefault;
  };

  Entry& add(const std::string& name, Eigen::Index rows, Eigen::Index cols,
             ParamGroup group = ParamGroup::kDefault);
  // Gaussian init scaled by `scale`.
  Entry& add_random(const std::string& name, Eigen::Index rows, Eigen::Index cols,
                    Rng& rng, double scale, ParamGroup group = ParamGroup::kDefault);
  Entry& add_constant(const std::string& name, Eigen::Index rows, Eigen::Index cols,
                      double fill, ParamGroup group = ParamGroup::kDefault);

  bool has(const std::string& name) const { return entries_.count(name) != 0; }
  Entry& at(const std::string& name);
  const Entry& at(const std::string& name) const;
  Eigen::MatrixXd& value(const std::string& name) { return at(name).value; }
  Eigen::MatrixXd& grad(const std::string& name) { return at(name).grad; }

  void zero_grads();
  std::size_t size() const { return entries_.size(); }

  std::map<std::string, Entry>& entries() { return entries_; }
  const std::map<std::string, Entry>& entries() const { return entries_; }

 private:
  std::map<std::string, Entry> entries_;
};

}  // namespace setcast

#endif  // SETCAST_PARAM_STORE_HPP_
