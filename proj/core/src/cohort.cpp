#include "screener/cohort.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace screener {

using nlohmann::json;

std::string_view to_string(TissueClass c) {
  switch (c) {
    case TissueClass::Active: return "active";
    case TissueClass::Chronic: return "chronic";
    case TissueClass::Healthy: return "healthy";
  }
  return "unknown";
}

TissueClass parse_tissue_class(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  for (TissueClass c : kAllClasses) {
    if (lower == to_string(c)) return c;
  }
  throw std::invalid_argument("unknown tissue class '" + std::string(name) + "'");
}

void TissueDistribution::validate() const {
  const std::string who = "TissueDistribution(" + std::string(to_string(label)) + "): ";
  if (std_f < 0.0 || std_d < 0.0 || std_dstar < 0.0) throw std::invalid_argument(who + "negative std");
  if (!(mean_d > 0.0) || !(mean_dstar > 0.0)) throw std::invalid_argument(who + "means of d, d_star must be > 0");
  if (!(mean_f > 0.0 && mean_f < 1.0)) throw std::invalid_argument(who + "mean_f must lie in (0, 1)");
}

const TissueDistribution& find_distribution(const DistributionSet& dists, TissueClass c) {
  for (const auto& d : dists) {
    if (d.label == c) return d;
  }
  throw MissingDistribution(c);
}

void CohortSpec::validate() const {
  for (const auto& [label, n] : counts) {
    if (n < 1) {
      throw std::invalid_argument("CohortSpec: class '" + std::string(to_string(label)) +
                                  "' needs at least one subject");
    }
  }
}

int CohortSpec::total() const {
  int n = 0;
  for (const auto& [label, count] : counts) n += count;
  return n;
}

CohortSpec CohortSpec::restricted_to(std::span<const TissueClass> classes) const {
  CohortSpec out;
  out.counts.clear();
  for (TissueClass c : classes) {
    auto it = counts.find(c);
    if (it == counts.end()) {
      throw std::invalid_argument("CohortSpec: no subject count for class '" + std::string(to_string(c)) + "'");
    }
    out.counts[c] = it->second;
  }
  return out;
}

IvimParams sample_params(const TissueDistribution& dist, Rng& rng) {
  std::normal_distribution<double> f_dist(dist.mean_f, dist.std_f);
  std::normal_distribution<double> d_dist(dist.mean_d, dist.std_d);
  std::normal_distribution<double> ds_dist(dist.mean_dstar, dist.std_dstar);

  auto draw = [&rng](auto& g, auto accept) {
    // Bounded retries: a configuration whose mass lies outside the support is an error.
    for (int attempt = 0; attempt < 100000; ++attempt) {
      const double v = g(rng);
      if (accept(v)) return v;
    }
    throw std::runtime_error("truncated sampling failed: distribution mass outside support");
  };

  const double f = draw(f_dist, [](double v) { return v >= kMinSampledF && v <= kMaxSampledF; });
  const double d = draw(d_dist, [](double v) { return v > 0.0; });
  const double d_star = draw(ds_dist, [d](double v) { return v > 0.0 && v >= d; });
  return IvimParams{1.0, f, d, d_star};
}

Cohort sample_cohort(const DistributionSet& dists, const CohortSpec& spec, Rng& rng) {
  spec.validate();
  Cohort cohort;
  cohort.reserve(static_cast<std::size_t>(spec.total()));
  for (TissueClass c : kAllClasses) {
    auto it = spec.counts.find(c);
    if (it == spec.counts.end()) continue;
    const TissueDistribution& dist = find_distribution(dists, c);
    for (int i = 0; i < it->second; ++i) cohort.push_back({c, sample_params(dist, rng)});
  }
  return cohort;
}

Dataset simulate_dataset(const Cohort& cohort, const AcquisitionProtocol& protocol,
                         const ScannerConfig& scanner, std::uint64_t seed) {
  Dataset data;
  data.protocol = protocol;
  data.subjects.reserve(cohort.size());
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    Rng rng = make_rng(seed, i);
    data.subjects.push_back(
        {cohort[i].label, cohort[i].truth, simulate_acquisition(cohort[i].truth, protocol, scanner, rng), std::nullopt});
  }
  return data;
}

void fit_dataset(Dataset& data, const FitConfig& config) {
  const auto& b = data.protocol.b_values();
  for (auto& s : data.subjects) s.fit = segmented_fit(s.signals, b, config);
}

std::string distributions_to_json(const DistributionSet& dists, const std::string& comment) {
  json j;
  j["schema_version"] = 1;
  if (!comment.empty()) j["comment"] = comment;
  j["classes"] = json::array();
  for (const auto& d : dists) {
    j["classes"].push_back({{"label", std::string(to_string(d.label))},
                            {"mean_f", d.mean_f},
                            {"std_f", d.std_f},
                            {"mean_d", d.mean_d},
                            {"std_d", d.std_d},
                            {"mean_dstar", d.mean_dstar},
                            {"std_dstar", d.std_dstar}});
  }
  return j.dump(2) + "\n";
}

DistributionSet distributions_from_json(const std::string& text) {
  const json j = json::parse(text);
  if (j.value("schema_version", 0) != 1) throw std::runtime_error("tissue distributions: unsupported schema_version");
  DistributionSet out;
  for (const auto& c : j.at("classes")) {
    TissueDistribution d;
    d.label = parse_tissue_class(c.at("label").get<std::string>());
    d.mean_f = c.at("mean_f").get<double>();
    d.std_f = c.at("std_f").get<double>();
    d.mean_d = c.at("mean_d").get<double>();
    d.std_d = c.at("std_d").get<double>();
    d.mean_dstar = c.at("mean_dstar").get<double>();
    d.std_dstar = c.at("std_dstar").get<double>();
    d.validate();
    for (const auto& prev : out) {
      if (prev.label == d.label) throw std::runtime_error("tissue distributions: duplicate class block");
    }
    out.push_back(d);
  }
  return out;
}

DistributionSet load_distributions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open tissue distribution file: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return distributions_from_json(ss.str());
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

void save_distributions(const DistributionSet& dists, const std::filesystem::path& path,
                        const std::string& comment) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << distributions_to_json(dists, comment);
}

}  // namespace screener
