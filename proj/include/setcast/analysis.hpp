#ifndef SETCAST_ANALYSIS_HPP_
#define SETCAST_ANALYSIS_HPP_

#include <map>
#include <string>
#include <vector>

#include "setcast/train.hpp"

namespace setcast {

// Trains one model per variant (none + the four ablations) from the same seed
// and reports test MAPE for each.
std::map<std::string, EvalReport> run_ablations(const TrainConfig& base, const DataTable& table,
                                                std::uint64_t seed,
                                                const std::vector<Ablation>& variants);

// Rows for memory_weights.csv: one per (instance, level) whose instance MAPE
// beats the threshold, plus one centroid row per level (mean alpha).
struct MemoryWeightRow {
  std::string instance;  // instance id, or "centroid"
  int level = 0;
  double alpha = 0.0;
};
std::vector<MemoryWeightRow> analyze_memory_weights(const EvalReport& report,
                                                    double threshold = 0.10);

// All CSV output is fixed-point with six decimals.
void write_eval_csv(const std::string& path, const EvalReport& report,
                    const std::vector<std::string>& platforms);
void write_ablation_csv(const std::string& path, const std::map<std::string, EvalReport>& reports);
void write_memory_weights_csv(const std::string& path, const std::vector<MemoryWeightRow>& rows);
void write_exchange_rates_csv(const std::string& path, const FilmBank& film,
                              const ParamStore& store);

// Spearman rank correlation; ties get average ranks.
double spearman(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

}  // namespace setcast

#endif  // SETCAST_ANALYSIS_HPP_
