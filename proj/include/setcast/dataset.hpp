#ifndef SETCAST_DATASET_HPP_
#define SETCAST_DATASET_HPP_

#include <Eigen/Dense>
#include <array>
#include <string>
#include <vector>

#include <json.hpp>

namespace setcast {

// One (opinion, platform, bin) record. Masked-out levels always carry zero
// counts and are excluded from every loss and metric.
struct RawInstance {
  long bin = 0;
  std::string opinion;
  std::string platform;
  std::array<long, 4> y{0, 0, 0, 0};
  std::array<bool, 4> mask{true, true, true, true};
  long n = 0;
  Eigen::VectorXd c;  // content features (topic vector with emotion intensity appended)
  Eigen::VectorXd t;  // time features (hour/day phases + normalized bin index)
};

struct SynthDataset {
  std::vector<RawInstance> instances;  // strictly ordered by (bin, opinion, platform)
  nlohmann::json manifest;             // planted parameters + seed

  std::vector<std::string> platforms() const;
  std::vector<std::string> opinions() const;
  long total_bins() const { return manifest.at("total_bins").get<long>(); }
};

// Sin/cos phases of hour-of-day and day-of-week plus normalized bin index,
// for 30-minute bins (48 per day, 336 per week).
Eigen::VectorXd time_features(long bin, long total_bins);
inline constexpr int kTimeFeatureDim = 5;

// Line-delimited JSON records plus a companion manifest.json in `dir`.
void emit_dataset(const SynthDataset& ds, const std::string& dir);
SynthDataset load_dataset(const std::string& dir);

}  // namespace setcast

#endif  // SETCAST_DATASET_HPP_
