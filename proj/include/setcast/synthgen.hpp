#ifndef SETCAST_SYNTHGEN_HPP_
#define SETCAST_SYNTHGEN_HPP_

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "setcast/dataset.hpp"

namespace setcast {

struct PlatformProfile {
  std::string id;
  double kappa = 1.0;                          // per-unit effort cost
  std::array<double, 4> gamma_star{1, 1, 1, 1};  // planted per-level exchange slopes
  double beta_star = 0.0;
  double phi = 1.0;                            // amplification of emotional value
  std::array<bool, 4> mask{true, true, true, true};
  double base_rate = 5.0;
};

struct ReciprocityKernel {
  double fast_weight = 1.0;
  double slow_weight = 1.0;
  double fast_half_life_bins = 12.0;   // 6 hours of 30-minute bins
  double slow_half_life_bins = 168.0;  // 3.5 days

  double fast_decay() const;
  double slow_decay() const;
  // Geometric-series limit of the decayed sum of a constant unit history.
  double fast_mass() const;
  double slow_mass() const;
};

struct OpinionSpec {
  std::string id;
  std::string category = "neutral";  // positive | negative | ambiguous | neutral
  double emotion_intensity = 0.5;
  double context_alignment = 0.5;
  double alpha_emotion = 1.0;
  double beta_context = 0.5;
  int topic_dim = 6;
  // Interest lifecycle: a Gaussian bump over the stream. Stories rise, peak
  // and fade; width <= 0 disables the envelope (flat interest).
  double peak_frac = 0.5;        // peak position as a fraction of total_bins
  double lifecycle_width = 0.0;  // bump std as a fraction of total_bins
  double lifecycle_floor = 1.0;  // off-peak multiplier in (0, 1]
};

struct Scenario {
  long total_bins = 4032;  // 12 weeks of 30-minute bins
  std::array<double, 4> efforts{0.5, 1.0, 2.0, 4.0};
  ReciprocityKernel kernel;
  std::vector<PlatformProfile> platforms;
  std::vector<OpinionSpec> opinions;
  long regime_shift_bin = -1;  // if >=0, exchange slopes rotate one level after this bin
  bool negative_binomial = false;
  double nb_dispersion = 10.0;

  void validate() const;
};

Scenario default_scenario();
// Presets: default | fast_only | slow_only | two_phase | long (24-week default).
Scenario preset_scenario(const std::string& name);
// {"preset": name} plus optional top-level overrides; unknown keys rejected.
Scenario scenario_from_json(const nlohmann::json& j);
nlohmann::json scenario_to_json(const Scenario& sc);

// U = R - I * kappa.
double utility(double reward, double investment, double kappa);
// f_p,l(e) = gamma* log1p(e) + beta*. Negative effort is a contract violation;
// rate clipping happens where rates are assembled, not here.
double exchange_value(const PlatformProfile& p, int level, double effort,
                      long bin, long regime_shift_bin);
// Softplus of kernel-weighted decayed sums of past per-bin utilities
// (most recent entry carries weight decay^0).
double reciprocity_drive(const std::vector<double>& utility_history,
                         const ReciprocityKernel& kernel);
// utility(R, I, kappa) / (1 + R + I): bounded so the reciprocity feedback
// loop cannot run away.
double bin_utility(const std::array<long, 4>& counts, const std::array<double, 4>& efforts,
                   double kappa);
// alpha * E * phi + beta * C.
double emotional_value(double emotion_intensity, double phi, double context, double alpha,
                       double beta);
// floor + (1 - floor) * exp(-((t/T - peak)/width)^2 / 2); 1 when width <= 0.
double lifecycle_envelope(const OpinionSpec& o, long bin, long total_bins);

SynthDataset simulate(const Scenario& sc, std::uint64_t seed);

// Regenerates from the manifest and compares every record.
void verify_dataset(const SynthDataset& ds);

}  // namespace setcast

#endif  // SETCAST_SYNTHGEN_HPP_
