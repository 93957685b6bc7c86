#include "setcast/dataset.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <stdexcept>

namespace setcast {

namespace {

nlohmann::json vec_to_json(const Eigen::VectorXd& v) {
  nlohmann::json arr = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

Eigen::VectorXd json_to_vec(const nlohmann::json& arr) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(arr.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = arr[static_cast<std::size_t>(i)].get<double>();
  return v;
}

}  // namespace

std::vector<std::string> SynthDataset::platforms() const {
  std::vector<std::string> out;
  for (const auto& p : manifest.at("platforms")) out.push_back(p.at("id").get<std::string>());
  return out;
}

std::vector<std::string> SynthDataset::opinions() const {
  std::vector<std::string> out;
  for (const auto& o : manifest.at("opinions")) out.push_back(o.at("id").get<std::string>());
  return out;
}

Eigen::VectorXd time_features(long bin, long total_bins) {
  const double two_pi = 2.0 * std::numbers::pi;
  Eigen::VectorXd t(kTimeFeatureDim);
  double day_phase = two_pi * static_cast<double>(bin % 48) / 48.0;
  double week_phase = two_pi * static_cast<double>(bin % 336) / 336.0;
  t[0] = std::sin(day_phase);
  t[1] = std::cos(day_phase);
  t[2] = std::sin(week_phase);
  t[3] = std::cos(week_phase);
  t[4] = total_bins > 1 ? static_cast<double>(bin) / static_cast<double>(total_bins - 1) : 0.0;
  return t;
}

void emit_dataset(const SynthDataset& ds, const std::string& dir) {
  {
    std::ofstream mf(dir + "/manifest.json");
    if (!mf) throw std::runtime_error("cannot write " + dir + "/manifest.json");
    mf << ds.manifest.dump(2) << "\n";
  }
  std::ofstream out(dir + "/data.jsonl");
  if (!out) throw std::runtime_error("cannot write " + dir + "/data.jsonl");
  for (const auto& r : ds.instances) {
    nlohmann::json j;
    j["bin"] = r.bin;
    j["opinion"] = r.opinion;
    j["platform"] = r.platform;
    j["y"] = r.y;
    j["mask"] = r.mask;
    j["n"] = r.n;
    j["c"] = vec_to_json(r.c);
    j["t"] = vec_to_json(r.t);
    out << j.dump() << "\n";
  }
}

SynthDataset load_dataset(const std::string& dir) {
  SynthDataset ds;
  {
    std::ifstream mf(dir + "/manifest.json");
    if (!mf) throw std::runtime_error("cannot read " + dir + "/manifest.json");
    mf >> ds.manifest;
  }
  std::ifstream in(dir + "/data.jsonl");
  if (!in) throw std::runtime_error("cannot read " + dir + "/data.jsonl");
  std::string line;
  long lineno = 0;
  std::set<std::string> known_platforms;
  for (const auto& p : ds.platforms()) known_platforms.insert(p);
  long prev_bin = -1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error("data.jsonl line " + std::to_string(lineno) + ": " + e.what());
    }
    RawInstance r;
    try {
      r.bin = j.at("bin").get<long>();
      r.opinion = j.at("opinion").get<std::string>();
      r.platform = j.at("platform").get<std::string>();
      r.y = j.at("y").get<std::array<long, 4>>();
      r.mask = j.at("mask").get<std::array<bool, 4>>();
      r.n = j.at("n").get<long>();
      r.c = json_to_vec(j.at("c"));
      r.t = json_to_vec(j.at("t"));
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error("data.jsonl line " + std::to_string(lineno) + ": " + e.what());
    }
    if (!known_platforms.count(r.platform))
      throw std::runtime_error("data.jsonl line " + std::to_string(lineno) +
                               ": platform '" + r.platform + "' not in manifest");
    for (int l = 0; l < 4; ++l)
      if (!r.mask[l] && r.y[l] != 0)
        throw std::runtime_error("data.jsonl line " + std::to_string(lineno) +
                                 ": nonzero count at masked level " + std::to_string(l));
    if (r.bin < prev_bin)
      throw std::runtime_error("data.jsonl line " + std::to_string(lineno) +
                               ": records out of bin order");
    prev_bin = r.bin;
    ds.instances.push_back(std::move(r));
  }
  return ds;
}

}  // namespace setcast
