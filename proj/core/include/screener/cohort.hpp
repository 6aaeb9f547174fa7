#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "screener/fitting.hpp"
#include "screener/random.hpp"
#include "screener/signal_sim.hpp"

namespace screener {

enum class TissueClass { Active = 0, Chronic = 1, Healthy = 2 };

inline constexpr std::array<TissueClass, 3> kAllClasses{TissueClass::Active, TissueClass::Chronic,
                                                        TissueClass::Healthy};

std::string_view to_string(TissueClass c);
/// Accepts "active", "chronic", "healthy" (case-insensitive).
TissueClass parse_tissue_class(std::string_view name);

/// Independent Gaussian priors for one tissue class. Diffusivities in mm^2/s.
struct TissueDistribution {
  TissueClass label = TissueClass::Healthy;
  double mean_f = 0.1, std_f = 0.0;
  double mean_d = 1e-3, std_d = 0.0;
  double mean_dstar = 1e-2, std_dstar = 0.0;

  void validate() const;
  bool operator==(const TissueDistribution&) const = default;
};

using DistributionSet = std::vector<TissueDistribution>;

const TissueDistribution& find_distribution(const DistributionSet& dists, TissueClass c);

/// Subject counts per class. Classes absent from the map are not sampled.
struct CohortSpec {
  std::map<TissueClass, int> counts{{TissueClass::Active, 20},
                                    {TissueClass::Chronic, 21},
                                    {TissueClass::Healthy, 21}};

  void validate() const;
  [[nodiscard]] int total() const;
  /// Restricted to `classes`, keeping this spec's counts.
  [[nodiscard]] CohortSpec restricted_to(std::span<const TissueClass> classes) const;
};

class MissingDistribution : public std::runtime_error {
 public:
  explicit MissingDistribution(TissueClass c)
      : std::runtime_error("no tissue distribution for class '" + std::string(to_string(c)) + "'"),
        label(c) {}
  TissueClass label;
};

struct CohortMember {
  TissueClass label;
  IvimParams truth;
};

using Cohort = std::vector<CohortMember>;

/// Truncation limits applied by rejection when sampling.
inline constexpr double kMinSampledF = 0.001;
inline constexpr double kMaxSampledF = 0.999;

/// Draws one parameter tuple per subject, classes in Active, Chronic, Healthy order.
/// f is kept in [0.001, 0.999]; d, d_star > 0 and d_star >= d, re-drawing on violation.
Cohort sample_cohort(const DistributionSet& dists, const CohortSpec& spec, Rng& rng);

/// Draws a single truncated tuple from one class distribution.
IvimParams sample_params(const TissueDistribution& dist, Rng& rng);

struct Subject {
  TissueClass label;
  IvimParams truth;
  SignalVector signals;
  std::optional<FitResult> fit;
};

struct Dataset {
  AcquisitionProtocol protocol = AcquisitionProtocol::ad_hoc();
  std::vector<Subject> subjects;

  [[nodiscard]] std::size_t size() const { return subjects.size(); }
  [[nodiscard]] bool empty() const { return subjects.empty(); }
};

/// Simulates one acquisition per cohort member. Each subject draws its noise from a
/// stream derived from (seed, subject index).
Dataset simulate_dataset(const Cohort& cohort, const AcquisitionProtocol& protocol,
                         const ScannerConfig& scanner, std::uint64_t seed);

/// Fits every subject in place.
void fit_dataset(Dataset& data, const FitConfig& config = {});

/// Tissue-distribution file (JSON). Schema:
///   {"schema_version": 1, "classes": [{"label": "active", "mean_f": .., "std_f": ..,
///     "mean_d": .., "std_d": .., "mean_dstar": .., "std_dstar": ..}, ...]}
DistributionSet load_distributions(const std::filesystem::path& path);
void save_distributions(const DistributionSet& dists, const std::filesystem::path& path,
                        const std::string& comment = {});
std::string distributions_to_json(const DistributionSet& dists, const std::string& comment = {});
DistributionSet distributions_from_json(const std::string& text);

}  // namespace screener
