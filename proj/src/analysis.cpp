#include "setcast/analysis.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <stdexcept>

namespace setcast {

namespace {

std::ofstream open_csv(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << std::fixed << std::setprecision(6);
  return out;
}

Eigen::VectorXd ranks(const Eigen::VectorXd& v) {
  const Eigen::Index n = v.size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&v](Eigen::Index a, Eigen::Index b) { return v[a] < v[b]; });
  Eigen::VectorXd r(n);
  Eigen::Index i = 0;
  while (i < n) {
    Eigen::Index j = i;
    while (j + 1 < n && v[order[static_cast<std::size_t>(j + 1)]] ==
                            v[order[static_cast<std::size_t>(i)]])
      ++j;
    double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (Eigen::Index k = i; k <= j; ++k) r[order[static_cast<std::size_t>(k)]] = avg;
    i = j + 1;
  }
  return r;
}

}  // namespace

double spearman(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size() || a.size() < 2)
    throw std::invalid_argument("spearman needs two equally sized vectors of length >= 2");
  Eigen::VectorXd ra = ranks(a), rb = ranks(b);
  Eigen::VectorXd da = ra.array() - ra.mean(), db = rb.array() - rb.mean();
  double denom = std::sqrt(da.squaredNorm() * db.squaredNorm());
  if (denom == 0.0) throw std::invalid_argument("spearman undefined for a constant vector");
  return da.dot(db) / denom;
}

std::map<std::string, EvalReport> run_ablations(const TrainConfig& base, const DataTable& table,
                                                std::uint64_t seed,
                                                const std::vector<Ablation>& variants) {
  std::map<std::string, EvalReport> out;
  for (Ablation a : variants) {
    TrainConfig cfg = base;
    cfg.ablation = a;
    Trainer trainer(cfg, table, seed);
    trainer.calibrate();
    trainer.train();
    out[to_string(a)] = trainer.evaluate_test();
  }
  return out;
}

std::vector<MemoryWeightRow> analyze_memory_weights(const EvalReport& report, double threshold) {
  std::vector<MemoryWeightRow> rows;
  std::array<double, 4> centroid_sum{0, 0, 0, 0};
  std::array<long, 4> centroid_n{0, 0, 0, 0};
  for (const InstanceRecord& rec : report.records) {
    if (!(rec.mape < threshold)) continue;
    for (int l = 0; l < 4; ++l) {
      if (!rec.mask[static_cast<std::size_t>(l)]) continue;
      rows.push_back({rec.id, l, rec.alpha});
      centroid_sum[static_cast<std::size_t>(l)] += rec.alpha;
      ++centroid_n[static_cast<std::size_t>(l)];
    }
  }
  for (int l = 0; l < 4; ++l) {
    if (centroid_n[static_cast<std::size_t>(l)] == 0) continue;
    rows.push_back({"centroid", l,
                    centroid_sum[static_cast<std::size_t>(l)] /
                        static_cast<double>(centroid_n[static_cast<std::size_t>(l)])});
  }
  return rows;
}

void write_eval_csv(const std::string& path, const EvalReport& r,
                    const std::vector<std::string>& platforms) {
  auto out = open_csv(path);
  out << "platform,horizon_bins,engagement_mape,volume_mape\n";
  for (const std::string& p : platforms) {
    auto it = r.per_platform_mape.find(p);
    auto vit = r.per_platform_volume_mape.find(p);
    if (it == r.per_platform_mape.end()) continue;
    out << p << "," << r.horizon_bins << "," << it->second << ","
        << (vit == r.per_platform_volume_mape.end() ? 0.0 : vit->second) << "\n";
  }
}

void write_ablation_csv(const std::string& path,
                        const std::map<std::string, EvalReport>& reports) {
  auto out = open_csv(path);
  out << "ablation,mape,volume_mape,instances\n";
  for (const auto& [name, r] : reports)
    out << name << "," << r.model_mape << "," << r.model_volume_mape << "," << r.instances
        << "\n";
}

void write_memory_weights_csv(const std::string& path,
                              const std::vector<MemoryWeightRow>& rows) {
  auto out = open_csv(path);
  out << "instance,level,alpha\n";
  for (const auto& r : rows) out << r.instance << "," << r.level << "," << r.alpha << "\n";
}

void write_exchange_rates_csv(const std::string& path, const FilmBank& film,
                              const ParamStore& store) {
  Eigen::MatrixXd gamma = film.extract_exchange_rates(store);
  Eigen::MatrixXd beta = film.extract_beta_means(store);
  auto out = open_csv(path);
  out << "platform,level,gamma_mean,beta_mean\n";
  for (std::size_t p = 0; p < film.platforms().size(); ++p)
    for (int l = 0; l < kEngagementLevels; ++l)
      out << film.platforms()[p] << "," << l << "," << gamma(static_cast<long>(p), l) << ","
          << beta(static_cast<long>(p), l) << "\n";
}

}  // namespace setcast
