#pragma once

// JSON mapping for every result and config type. Non-finite numbers and
// undefined optionals are written as null and read back as NaN / nullopt.
// Doubles are written in shortest round-trip form, so re-reading a document
// reproduces each number bit-exactly.

#include <cmath>
#include <limits>
#include <optional>
#include <string>

#include <json.hpp>

#include "elfor/anomaly.hpp"
#include "elfor/fingerprint.hpp"
#include "elfor/ingest.hpp"
#include "elfor/rigging.hpp"
#include "elfor/stuffing.hpp"
#include "elfor/synth.hpp"

namespace elfor {

using json = nlohmann::ordered_json;

namespace detail {

inline json num(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }
inline json num(const std::optional<double>& x) { return x ? num(*x) : json(nullptr); }

inline double get_num(const json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}
inline std::optional<double> get_opt(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

template <class T>
void read_if(const json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end() && !it->is_null()) out = it->template get<T>();
}

}  // namespace detail

// --- ingest ---------------------------------------------------------------

namespace stats {
inline void to_json(json& j, const MeanSd& m) {
  j = {{"mean", elfor::detail::num(m.mean)}, {"sd", elfor::detail::num(m.sd)}};
}
inline void from_json(const json& j, MeanSd& m) {
  m.mean = elfor::detail::get_num(j.at("mean"));
  m.sd = elfor::detail::get_num(j.at("sd"));
}
}  // namespace stats

inline void to_json(json& j, const ExclusionSummary& e) {
  j = {{"min_electorate", e.min_electorate},
       {"total_stations", e.total_stations},
       {"excluded_stations", e.excluded_stations},
       {"excluded_vote_fraction", detail::num(e.excluded_vote_fraction)}};
}
inline void from_json(const json& j, ExclusionSummary& e) {
  e.min_electorate = j.at("min_electorate").get<Count>();
  e.total_stations = j.at("total_stations").get<std::size_t>();
  e.excluded_stations = j.at("excluded_stations").get<std::size_t>();
  e.excluded_vote_fraction = detail::get_num(j.at("excluded_vote_fraction"));
}

inline void to_json(json& j, const DatasetSummary& s) {
  j = {{"station_count", s.station_count},
       {"village_count", s.village_count},
       {"district_count", s.district_count},
       {"province_count", s.province_count},
       {"undefined_vote_share_count", s.undefined_vote_share_count},
       {"sd_convention", "population"},
       {"eligible", s.eligible},
       {"turnout", s.turnout},
       {"yes", s.yes},
       {"rel_turnout", s.rel_turnout},
       {"vote_share", s.vote_share},
       {"exclusion", s.exclusion ? json(*s.exclusion) : json(nullptr)}};
}
inline void from_json(const json& j, DatasetSummary& s) {
  s.station_count = j.at("station_count").get<std::size_t>();
  s.village_count = j.at("village_count").get<std::size_t>();
  s.district_count = j.at("district_count").get<std::size_t>();
  s.province_count = j.at("province_count").get<std::size_t>();
  s.undefined_vote_share_count = j.at("undefined_vote_share_count").get<std::size_t>();
  s.eligible = j.at("eligible").get<stats::MeanSd>();
  s.turnout = j.at("turnout").get<stats::MeanSd>();
  s.yes = j.at("yes").get<stats::MeanSd>();
  s.rel_turnout = j.at("rel_turnout").get<stats::MeanSd>();
  s.vote_share = j.at("vote_share").get<stats::MeanSd>();
  if (!j.at("exclusion").is_null()) s.exclusion = j.at("exclusion").get<ExclusionSummary>();
}

inline void to_json(json& j, const ColumnMapping& c) {
  j = {{"province", c.province}, {"district", c.district}, {"village", c.village}, {"station", c.station},
       {"eligible", c.eligible}, {"turnout", c.turnout},   {"yes", c.yes}};
}
inline void from_json(const json& j, ColumnMapping& c) {
  detail::read_if(j, "province", c.province);
  detail::read_if(j, "district", c.district);
  detail::read_if(j, "village", c.village);
  detail::read_if(j, "station", c.station);
  detail::read_if(j, "eligible", c.eligible);
  detail::read_if(j, "turnout", c.turnout);
  detail::read_if(j, "yes", c.yes);
}

inline void to_json(json& j, const FormatConfig& f) {
  j = {{"delimiter", std::string(1, f.delimiter)}, {"columns", f.columns}};
}
inline void from_json(const json& j, FormatConfig& f) {
  if (auto it = j.find("delimiter"); it != j.end()) {
    const auto d = it->get<std::string>();
    if (d.size() != 1) throw InvalidArgument("format.delimiter must be a single character");
    f.delimiter = d[0];
  }
  detail::read_if(j, "columns", f.columns);
}

// --- fingerprint ----------------------------------------------------------

inline void to_json(json& j, const Axis& a) { j = {{"bins", a.bins}, {"lo", a.lo}, {"hi", a.hi}}; }
inline void from_json(const json& j, Axis& a) {
  a.bins = j.at("bins").get<std::size_t>();
  a.lo = j.at("lo").get<double>();
  a.hi = j.at("hi").get<double>();
}

inline const char* to_string(AxisKind k) { return k == AxisKind::raw ? "raw" : "standardized"; }

inline void to_json(json& j, const Fingerprint& f) {
  j = {{"type", "fingerprint"},
       {"axes", to_string(f.kind)},
       {"x", f.geometry.x},
       {"y", f.geometry.y},
       {"layout", "row-major, row = y bin"},
       {"out_of_range", f.out_of_range},
       {"cells", f.cells}};
}
inline void from_json(const json& j, Fingerprint& f) {
  f.kind = j.at("axes").get<std::string>() == "raw" ? AxisKind::raw : AxisKind::standardized;
  f.geometry = {j.at("x").get<Axis>(), j.at("y").get<Axis>()};
  f.out_of_range = j.at("out_of_range").get<std::uint64_t>();
  f.cells = j.at("cells").get<std::vector<std::uint64_t>>();
  if (f.cells.size() != f.geometry.x.bins * f.geometry.y.bins)
    throw InvalidArgument("fingerprint: cell count does not match geometry");
}

inline const char* to_string(CurveMode m) { return m == CurveMode::by_turnout_level ? "by_turnout_level" : "by_size_rank"; }

inline void to_json(json& j, const CumulativeCurve& c) {
  json xs = json::array(), ys = json::array();
  for (const auto& p : c.points) {
    xs.push_back(p.x);
    ys.push_back(p.cumulative);
  }
  j = {{"type", "cumulative_curve"}, {"mode", to_string(c.mode)}, {"x", xs}, {"cumulative", ys}};
}
inline void from_json(const json& j, CumulativeCurve& c) {
  c.mode = j.at("mode").get<std::string>() == "by_size_rank" ? CurveMode::by_size_rank : CurveMode::by_turnout_level;
  const auto& xs = j.at("x");
  const auto& ys = j.at("cumulative");
  if (xs.size() != ys.size()) throw InvalidArgument("cumulative curve: length mismatch");
  c.points.clear();
  for (std::size_t i = 0; i < xs.size(); ++i) c.points.push_back({xs[i].get<double>(), ys[i].get<double>()});
}

// --- stuffing -------------------------------------------------------------

inline void to_json(json& j, const StuffingParams& p) {
  j = {{"f", detail::num(p.f)}, {"f_extreme", detail::num(p.f_extreme)}, {"alpha", detail::num(p.alpha)}};
}
inline void from_json(const json& j, StuffingParams& p) {
  detail::read_if(j, "f", p.f);
  detail::read_if(j, "f_extreme", p.f_extreme);
  detail::read_if(j, "alpha", p.alpha);
}

inline void to_json(json& j, const MomentEstimate& m) {
  j = {{"mean_v", detail::num(m.mean_v)}, {"sd_v", detail::num(m.sd_v)},
       {"mean_t", detail::num(m.mean_t)}, {"sd_t", detail::num(m.sd_t)}};
}
inline void from_json(const json& j, MomentEstimate& m) {
  m.mean_v = detail::get_num(j.at("mean_v"));
  m.sd_v = detail::get_num(j.at("sd_v"));
  m.mean_t = detail::get_num(j.at("mean_t"));
  m.sd_t = detail::get_num(j.at("sd_t"));
}

inline void to_json(json& j, const ReplicateEstimate& r) {
  j = {{"seed", r.seed}, {"params", r.params}, {"objective", detail::num(r.objective)},
       {"iterations", r.iterations}, {"converged", r.converged}};
}
inline void from_json(const json& j, ReplicateEstimate& r) {
  r.seed = j.at("seed").get<std::uint64_t>();
  r.params = j.at("params").get<StuffingParams>();
  r.objective = detail::get_num(j.at("objective"));
  r.iterations = j.at("iterations").get<int>();
  r.converged = j.at("converged").get<bool>();
}

inline void to_json(json& j, const StuffingFit& f) {
  j = {{"params", f.params},
       {"uncertainty", f.uncertainty},
       {"uncertainty_kind", "sample standard deviation over replicate fits"},
       {"objective", detail::num(f.objective)},
       {"data_moments", f.data_moments},
       {"model_moments", f.model_moments},
       {"replicates", f.replicates}};
}
inline void from_json(const json& j, StuffingFit& f) {
  f.params = j.at("params").get<StuffingParams>();
  f.uncertainty = j.at("uncertainty").get<StuffingParams>();
  f.objective = detail::get_num(j.at("objective"));
  f.data_moments = j.at("data_moments").get<MomentEstimate>();
  f.model_moments = j.at("model_moments").get<MomentEstimate>();
  f.replicates = j.at("replicates").get<std::vector<ReplicateEstimate>>();
}

inline void to_json(json& j, const FitConfig& c) {
  j = {{"replicates", c.replicates},
       {"seed", c.seed},
       {"max_iterations", c.simplex.max_iterations},
       {"xtol", c.simplex.xtol},
       {"ftol", c.simplex.ftol},
       {"start", c.start},
       {"steps", c.steps},
       {"alpha_min", c.alpha_min},
       {"alpha_max", c.alpha_max},
       {"bins", c.bins},
       {"turnout_bands", c.turnout_bands},
       {"target", c.target == FitTarget::vote_share ? "vote_share" : "fingerprint"},
       {"moments", c.moments == MomentMethod::raw ? "raw" : "trimmed"},
       {"correct_truncation", c.correct_truncation},
       {"moment_rounds", c.moment_rounds},
       {"moment_iterations", c.moment_iterations},
       {"simulation_multiplier", c.simulation_multiplier},
       {"extreme_spread", c.extreme_spread}};
}
inline void from_json(const json& j, FitConfig& c) {
  detail::read_if(j, "replicates", c.replicates);
  detail::read_if(j, "seed", c.seed);
  detail::read_if(j, "max_iterations", c.simplex.max_iterations);
  detail::read_if(j, "xtol", c.simplex.xtol);
  detail::read_if(j, "ftol", c.simplex.ftol);
  detail::read_if(j, "start", c.start);
  detail::read_if(j, "steps", c.steps);
  detail::read_if(j, "alpha_min", c.alpha_min);
  detail::read_if(j, "alpha_max", c.alpha_max);
  detail::read_if(j, "bins", c.bins);
  detail::read_if(j, "turnout_bands", c.turnout_bands);
  if (auto it = j.find("target"); it != j.end())
    c.target = it->get<std::string>() == "vote_share" ? FitTarget::vote_share : FitTarget::fingerprint;
  if (auto it = j.find("moments"); it != j.end())
    c.moments = it->get<std::string>() == "trimmed" ? MomentMethod::trimmed : MomentMethod::raw;
  detail::read_if(j, "correct_truncation", c.correct_truncation);
  detail::read_if(j, "moment_rounds", c.moment_rounds);
  detail::read_if(j, "moment_iterations", c.moment_iterations);
  detail::read_if(j, "simulation_multiplier", c.simulation_multiplier);
  detail::read_if(j, "extreme_spread", c.extreme_spread);
}

// --- rigging --------------------------------------------------------------

inline void to_json(json& j, const DisplacementCurve& c) {
  json p = json::array(), d = json::array(), dv = json::array(), dt = json::array(), ns = json::array(),
       cut = json::array();
  for (const auto& pt : c.points) {
    p.push_back(pt.p);
    d.push_back(detail::num(pt.delta));
    dv.push_back(detail::num(pt.dv));
    dt.push_back(detail::num(pt.dt));
    ns.push_back(pt.small_count);
    cut.push_back(pt.cutoff);
  }
  j = {{"type", "displacement_curve"}, {"label", c.label}, {"p", p}, {"delta", d}, {"dv", dv},
       {"dt", dt}, {"small_count", ns}, {"cutoff", cut}};
}
inline void from_json(const json& j, DisplacementCurve& c) {
  c.label = j.value("label", std::string{});
  const auto& p = j.at("p");
  const auto& d = j.at("delta");
  c.points.clear();
  for (std::size_t i = 0; i < p.size(); ++i) {
    DisplacementPoint pt;
    pt.p = p[i].get<int>();
    pt.delta = detail::get_opt(d.at(i));
    if (j.contains("dv")) pt.dv = detail::get_num(j["dv"].at(i));
    if (j.contains("dt")) pt.dt = detail::get_num(j["dt"].at(i));
    if (j.contains("small_count")) pt.small_count = j["small_count"].at(i).get<std::size_t>();
    if (j.contains("cutoff")) pt.cutoff = j["cutoff"].at(i).get<Count>();
    c.points.push_back(pt);
  }
}

inline void to_json(json& j, const AcceptanceRegion& r) {
  json lo = json::array(), hi = json::array();
  for (std::size_t k = 0; k < r.p.size(); ++k) {
    lo.push_back(detail::num(r.lower[k]));
    hi.push_back(detail::num(r.upper[k]));
  }
  j = {{"type", "acceptance_region"}, {"confidence", r.confidence}, {"provenance", r.provenance},
       {"reference_count", r.reference_count}, {"p", r.p}, {"lower", lo}, {"upper", hi}};
}
inline void from_json(const json& j, AcceptanceRegion& r) {
  r.confidence = j.at("confidence").get<double>();
  r.provenance = j.value("provenance", std::string{});
  r.reference_count = j.value("reference_count", std::size_t{0});
  r.p = j.at("p").get<std::vector<int>>();
  r.lower.clear();
  r.upper.clear();
  for (std::size_t k = 0; k < r.p.size(); ++k) {
    r.lower.push_back(detail::get_opt(j.at("lower").at(k)));
    r.upper.push_back(detail::get_opt(j.at("upper").at(k)));
  }
}

inline void to_json(json& j, const ProvinceEntry& e) {
  j = {{"province", e.province}, {"mean_delta", detail::num(e.mean_delta)}, {"max_delta", detail::num(e.max_delta)},
       {"scored_stations", e.scored_stations}, {"defined_points", e.defined_points}};
}
inline void from_json(const json& j, ProvinceEntry& e) {
  e.province = j.at("province").get<std::string>();
  e.mean_delta = detail::get_num(j.at("mean_delta"));
  e.max_delta = detail::get_num(j.at("max_delta"));
  e.scored_stations = j.at("scored_stations").get<std::size_t>();
  e.defined_points = j.at("defined_points").get<std::size_t>();
}

inline void to_json(json& j, const ProvinceRanking& r) { j = {{"entries", r.entries}, {"excluded", r.excluded}}; }
inline void from_json(const json& j, ProvinceRanking& r) {
  r.entries = j.at("entries").get<std::vector<ProvinceEntry>>();
  r.excluded = j.at("excluded").get<std::vector<std::string>>();
}

// --- anomaly --------------------------------------------------------------

inline void to_json(json& j, const BenfordResult& b) {
  json expected = json::array();
  for (double e : b.expected) expected.push_back(e);
  j = {{"level", to_string(b.level)},
       {"min_value", b.min_value},
       {"n", b.n},
       {"counts", b.counts},
       {"expected", expected},
       {"chi2", detail::num(b.chi2)},
       {"p_value", detail::num(b.p_value)},
       {"log10_bf01", detail::num(b.log10_bf01)},
       {"log10_posterior", detail::num(b.log10_posterior)},
       {"posterior", detail::num(b.posterior)},
       {"log10_bf01_lower_bound", detail::num(b.log10_bf01_lower_bound)}};
}
inline void from_json(const json& j, BenfordResult& b) {
  b.level = j.at("level").get<std::string>() == "village" ? AggregationLevel::village : AggregationLevel::station;
  b.min_value = j.at("min_value").get<std::uint64_t>();
  b.n = j.at("n").get<std::uint64_t>();
  b.counts = j.at("counts").get<std::array<std::uint64_t, 10>>();
  for (std::size_t d = 0; d < 10; ++d) b.expected[d] = j.at("expected").at(d).get<double>();
  b.chi2 = detail::get_num(j.at("chi2"));
  b.p_value = detail::get_num(j.at("p_value"));
  b.log10_bf01 = detail::get_num(j.at("log10_bf01"));
  b.log10_posterior = detail::get_num(j.at("log10_posterior"));
  b.posterior = detail::get_num(j.at("posterior"));
  b.log10_bf01_lower_bound = j.at("log10_bf01_lower_bound").is_null()
                                 ? -std::numeric_limits<double>::infinity()
                                 : j.at("log10_bf01_lower_bound").get<double>();
}

inline void to_json(json& j, const AssignmentResult& a) {
  json idx = json::array(), z = json::array(), var = json::array(), ex = json::array(), perm = json::array();
  for (const auto& s : a.stations) {
    idx.push_back(s.station);
    z.push_back(detail::num(s.z));
    var.push_back(detail::num(s.variance));
    ex.push_back(s.exceeds);
    perm.push_back(s.permutation);
  }
  j = {{"testable_villages", a.testable_villages},
       {"tested_stations", a.tested_stations},
       {"exceed_count", a.exceed_count},
       {"exceedance_fraction", detail::num(a.exceedance_fraction)},
       {"expected_fraction", a.expected_fraction},
       {"critical_z", a.critical_z},
       {"binomial_p_value", detail::num(a.binomial_p_value)},
       {"statistic", "fraction of |z| above the two-sided 99% normal quantile, binomial test against 1%"},
       {"permutation_villages", a.permutation_villages},
       {"station_index", idx},
       {"z", z},
       {"variance", var},
       {"exceeds", ex},
       {"permutation", perm}};
}
inline void from_json(const json& j, AssignmentResult& a) {
  a.testable_villages = j.at("testable_villages").get<std::size_t>();
  a.tested_stations = j.at("tested_stations").get<std::size_t>();
  a.exceed_count = j.at("exceed_count").get<std::size_t>();
  a.exceedance_fraction = detail::get_num(j.at("exceedance_fraction"));
  a.expected_fraction = j.at("expected_fraction").get<double>();
  a.critical_z = j.at("critical_z").get<double>();
  a.binomial_p_value = detail::get_num(j.at("binomial_p_value"));
  a.permutation_villages = j.at("permutation_villages").get<std::size_t>();
  a.stations.clear();
  const auto& idx = j.at("station_index");
  for (std::size_t k = 0; k < idx.size(); ++k) {
    StationZ s;
    s.station = idx[k].get<std::size_t>();
    s.z = detail::get_num(j.at("z").at(k));
    s.variance = detail::get_num(j.at("variance").at(k));
    s.exceeds = j.at("exceeds").at(k).get<bool>();
    s.permutation = j.at("permutation").at(k).get<bool>();
    a.stations.push_back(s);
  }
}

// --- synth ----------------------------------------------------------------

inline void to_json(json& j, const SyntheticSpec& s) {
  j = {{"provinces", s.provinces},
       {"districts_per_province", s.districts_per_province},
       {"villages_per_district", s.villages_per_district},
       {"stations_per_village", s.stations_per_village},
       {"size_log_mean", s.size_log_mean},
       {"size_log_sd", s.size_log_sd},
       {"size_floor", s.size_floor},
       {"size_cap", s.size_cap},
       {"mean_v", s.mean_v},
       {"sd_v", s.sd_v},
       {"mean_t", s.mean_t},
       {"sd_t", s.sd_t},
       {"district_spread_v", s.district_spread_v},
       {"district_spread_t", s.district_spread_t},
       {"stuffing", s.stuffing},
       {"extreme_spread", s.extreme_spread},
       {"rig_percentile", s.rig_percentile},
       {"rig_dv", s.rig_dv},
       {"rig_dt", s.rig_dt},
       {"seed", s.seed}};
}
inline void from_json(const json& j, SyntheticSpec& s) {
  detail::read_if(j, "provinces", s.provinces);
  detail::read_if(j, "districts_per_province", s.districts_per_province);
  detail::read_if(j, "villages_per_district", s.villages_per_district);
  detail::read_if(j, "stations_per_village", s.stations_per_village);
  detail::read_if(j, "size_log_mean", s.size_log_mean);
  detail::read_if(j, "size_log_sd", s.size_log_sd);
  detail::read_if(j, "size_floor", s.size_floor);
  detail::read_if(j, "size_cap", s.size_cap);
  detail::read_if(j, "mean_v", s.mean_v);
  detail::read_if(j, "sd_v", s.sd_v);
  detail::read_if(j, "mean_t", s.mean_t);
  detail::read_if(j, "sd_t", s.sd_t);
  detail::read_if(j, "district_spread_v", s.district_spread_v);
  detail::read_if(j, "district_spread_t", s.district_spread_t);
  detail::read_if(j, "stuffing", s.stuffing);
  detail::read_if(j, "extreme_spread", s.extreme_spread);
  detail::read_if(j, "rig_percentile", s.rig_percentile);
  detail::read_if(j, "rig_dv", s.rig_dv);
  detail::read_if(j, "rig_dt", s.rig_dt);
  detail::read_if(j, "seed", s.seed);
}

}  // namespace elfor
