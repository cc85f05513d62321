#pragma once

// End-to-end run: ingest, filter, the enabled tests, one JSON report plus the
// intermediate artifacts and figures in the output directory.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "elfor/anomaly.hpp"
#include "elfor/fingerprint.hpp"
#include "elfor/ingest.hpp"
#include "elfor/plot.hpp"
#include "elfor/report.hpp"
#include "elfor/rigging.hpp"
#include "elfor/stuffing.hpp"
#include "elfor/synth.hpp"

namespace elfor {

inline constexpr const char* kReportVersion = "elfor-report/1";

struct StuffingStage {
  bool enabled = true;
  FitConfig fit{};
  double signal_ratio = 2.0;  // signal if f > ratio * uncertainty(f)
};

struct RiggingStage {
  bool enabled = true;
  double confidence = 0.95;
  std::vector<int> p_grid = default_p_grid();
  std::size_t signal_run = 3;  // consecutive grid points above the region
  // Reference curves from a file, or else a synthetic clean baseline built on
  // the data's own stations.
  std::optional<std::string> reference_path;
  std::size_t baseline_count = 200;
  SyntheticSpec baseline{};
  bool baseline_from_data = true;  // take v/t means and spreads from the data
  bool rank_provinces = true;
};

struct BenfordStage {
  bool enabled = true;
  bool station_level = true;
  bool village_level = true;
  Count min_value = 100;
  double signal_posterior = 0.05;
};

struct AssignmentStage {
  bool enabled = true;
  AssignmentOptions options{};
  double signal_p = 0.01;
};

struct PipelineConfig {
  std::vector<std::string> inputs;
  FormatConfig format{};
  Count min_electorate = 100;
  std::uint64_t seed = 1;
  unsigned threads = 1;
  std::string out_dir = ".";
  bool write_artifacts = true;
  bool write_plots = true;
  StuffingStage stuffing{};
  RiggingStage rigging{};
  BenfordStage benford{};
  AssignmentStage assignment{};

  void validate() const {
    if (inputs.empty()) throw InvalidArgument("pipeline: no input file given");
    if (min_electorate < 0) throw InvalidArgument("pipeline: min_electorate must be non-negative");
    if (rigging.enabled && !rigging.reference_path && rigging.baseline_count < 2)
      throw InvalidArgument("pipeline: the synthetic baseline needs at least two elections");
    if (!(rigging.confidence > 0.0 && rigging.confidence <= 1.0))
      throw InvalidArgument("pipeline: rigging.confidence outside (0, 1]");
    if (rigging.p_grid.empty()) throw InvalidArgument("pipeline: empty p grid");
    if (benford.enabled && !benford.station_level && !benford.village_level)
      throw InvalidArgument("pipeline: benford enabled with no aggregation level");
  }
};

enum class VerdictLabel { signal, no_signal, not_run };

inline const char* to_string(VerdictLabel v) {
  switch (v) {
    case VerdictLabel::signal: return "signal";
    case VerdictLabel::no_signal: return "no-signal";
    case VerdictLabel::not_run: return "not-run";
  }
  return "?";
}

inline VerdictLabel parse_verdict(const std::string& s) {
  if (s == "signal") return VerdictLabel::signal;
  if (s == "no-signal") return VerdictLabel::no_signal;
  if (s == "not-run") return VerdictLabel::not_run;
  throw InvalidArgument("unknown verdict '" + s + "'");
}

struct Verdict {
  std::string test;
  VerdictLabel label = VerdictLabel::not_run;
  std::string rule;
  double threshold = 0.0;
  std::string error;  // set when the test failed
};

struct RiggingReport {
  DisplacementCurve curve;
  AcceptanceRegion region;
  RegionCheck check;
  std::optional<ProvinceRanking> ranking;
};

struct ReportBundle {
  std::uint64_t seed = 0;
  Count min_electorate = 0;
  std::vector<std::string> inputs;
  json config;  // the configuration that produced the report
  DatasetSummary summary;
  std::optional<StuffingFit> stuffing;
  std::optional<RiggingReport> rigging;
  std::vector<BenfordResult> benford;
  std::optional<AssignmentResult> assignment;
  std::vector<Verdict> verdicts;

  const Verdict* verdict(std::string_view test) const {
    for (const auto& v : verdicts)
      if (v.test == test) return &v;
    return nullptr;
  }
  bool complete() const {
    for (const auto& v : verdicts)
      if (!v.error.empty()) return false;
    return true;
  }
};

// --- verdict rules -------------------------------------------------------

inline Verdict stuffing_verdict(const StuffingFit& fit, double ratio) {
  const bool sig = fit.params.f > ratio * fit.uncertainty.f;
  return {"stuffing", sig ? VerdictLabel::signal : VerdictLabel::no_signal,
          "signal if params.f > threshold * uncertainty.f", ratio, {}};
}

inline Verdict rigging_verdict(const RegionCheck& check, std::size_t run) {
  const bool sig = check.longest_run_above >= run;
  return {"rigging", sig ? VerdictLabel::signal : VerdictLabel::no_signal,
          "signal if delta(p) lies above the acceptance region at >= threshold consecutive grid points",
          static_cast<double>(run), {}};
}

inline Verdict benford_verdict(const std::vector<BenfordResult>& results, double threshold) {
  bool sig = false;
  for (const auto& r : results) sig = sig || r.posterior < threshold;
  return {"benford", sig ? VerdictLabel::signal : VerdictLabel::no_signal,
          "signal if the Benford posterior at any tested level is below threshold", threshold, {}};
}

inline Verdict assignment_verdict(const AssignmentResult& a, double threshold) {
  const bool sig = a.binomial_p_value < threshold;
  return {"assignment", sig ? VerdictLabel::signal : VerdictLabel::no_signal,
          "signal if the binomial p-value of the |z| exceedance count is below threshold", threshold, {}};
}

// --- JSON ----------------------------------------------------------------

inline void to_json(json& j, const RegionCheck& c) {
  j = {{"compared", c.compared}, {"above", c.above}, {"below", c.below},
       {"longest_run_above", c.longest_run_above}, {"exit_fraction", detail::num(c.exit_fraction())}};
}
inline void from_json(const json& j, RegionCheck& c) {
  c.compared = j.at("compared").get<std::size_t>();
  c.above = j.at("above").get<std::vector<int>>();
  c.below = j.at("below").get<std::vector<int>>();
  c.longest_run_above = j.at("longest_run_above").get<std::size_t>();
}

inline void to_json(json& j, const Verdict& v) {
  j = {{"test", v.test}, {"verdict", to_string(v.label)}, {"rule", v.rule}, {"threshold", v.threshold}};
  if (!v.error.empty()) j["error"] = v.error;
}
inline void from_json(const json& j, Verdict& v) {
  v.test = j.at("test").get<std::string>();
  v.label = parse_verdict(j.at("verdict").get<std::string>());
  v.rule = j.at("rule").get<std::string>();
  v.threshold = j.at("threshold").get<double>();
  v.error = j.value("error", std::string{});
}

inline void to_json(json& j, const StuffingStage& s) {
  j = {{"enabled", s.enabled}, {"signal_ratio", s.signal_ratio}, {"fit", s.fit}};
}
inline void from_json(const json& j, StuffingStage& s) {
  detail::read_if(j, "enabled", s.enabled);
  detail::read_if(j, "signal_ratio", s.signal_ratio);
  detail::read_if(j, "fit", s.fit);
}

inline void to_json(json& j, const RiggingStage& s) {
  j = {{"enabled", s.enabled},
       {"confidence", s.confidence},
       {"p_grid", s.p_grid},
       {"signal_run", s.signal_run},
       {"reference_path", s.reference_path ? json(*s.reference_path) : json(nullptr)},
       {"baseline_count", s.baseline_count},
       {"baseline_from_data", s.baseline_from_data},
       {"baseline", s.baseline},
       {"rank_provinces", s.rank_provinces}};
}
inline void from_json(const json& j, RiggingStage& s) {
  detail::read_if(j, "enabled", s.enabled);
  detail::read_if(j, "confidence", s.confidence);
  detail::read_if(j, "p_grid", s.p_grid);
  detail::read_if(j, "signal_run", s.signal_run);
  if (auto it = j.find("reference_path"); it != j.end() && !it->is_null()) s.reference_path = it->get<std::string>();
  detail::read_if(j, "baseline_count", s.baseline_count);
  detail::read_if(j, "baseline_from_data", s.baseline_from_data);
  detail::read_if(j, "baseline", s.baseline);
  detail::read_if(j, "rank_provinces", s.rank_provinces);
}

inline void to_json(json& j, const BenfordStage& s) {
  j = {{"enabled", s.enabled}, {"station_level", s.station_level}, {"village_level", s.village_level},
       {"min_value", s.min_value}, {"signal_posterior", s.signal_posterior}};
}
inline void from_json(const json& j, BenfordStage& s) {
  detail::read_if(j, "enabled", s.enabled);
  detail::read_if(j, "station_level", s.station_level);
  detail::read_if(j, "village_level", s.village_level);
  detail::read_if(j, "min_value", s.min_value);
  detail::read_if(j, "signal_posterior", s.signal_posterior);
}

inline void to_json(json& j, const AssignmentStage& s) {
  j = {{"enabled", s.enabled}, {"permutation", s.options.permutation}, {"permutations", s.options.permutations},
       {"min_variance", s.options.min_variance}, {"signal_p", s.signal_p}};
}
inline void from_json(const json& j, AssignmentStage& s) {
  detail::read_if(j, "enabled", s.enabled);
  detail::read_if(j, "permutation", s.options.permutation);
  detail::read_if(j, "permutations", s.options.permutations);
  detail::read_if(j, "min_variance", s.options.min_variance);
  detail::read_if(j, "signal_p", s.signal_p);
}

inline void to_json(json& j, const PipelineConfig& c) {
  j = {{"inputs", c.inputs},
       {"format", c.format},
       {"min_electorate", c.min_electorate},
       {"seed", c.seed},
       {"threads", c.threads},
       {"out_dir", c.out_dir},
       {"write_artifacts", c.write_artifacts},
       {"write_plots", c.write_plots},
       {"stuffing", c.stuffing},
       {"rigging", c.rigging},
       {"benford", c.benford},
       {"assignment", c.assignment}};
}
inline void from_json(const json& j, PipelineConfig& c) {
  if (auto it = j.find("inputs"); it != j.end()) {
    if (it->is_string())
      c.inputs = {it->get<std::string>()};
    else
      c.inputs = it->get<std::vector<std::string>>();
  }
  detail::read_if(j, "format", c.format);
  detail::read_if(j, "min_electorate", c.min_electorate);
  detail::read_if(j, "seed", c.seed);
  detail::read_if(j, "threads", c.threads);
  detail::read_if(j, "out_dir", c.out_dir);
  detail::read_if(j, "write_artifacts", c.write_artifacts);
  detail::read_if(j, "write_plots", c.write_plots);
  detail::read_if(j, "stuffing", c.stuffing);
  detail::read_if(j, "rigging", c.rigging);
  detail::read_if(j, "benford", c.benford);
  detail::read_if(j, "assignment", c.assignment);
}

inline void to_json(json& j, const ReportBundle& r) {
  j = {{"format", kReportVersion},
       {"seed", r.seed},
       {"min_electorate", r.min_electorate},
       {"inputs", r.inputs},
       {"config", r.config},
       {"summary", r.summary},
       {"verdicts", r.verdicts}};
  j["stuffing"] = r.stuffing ? json(*r.stuffing) : json(nullptr);
  if (r.rigging) {
    j["rigging"] = {{"curve", r.rigging->curve},
                    {"region", r.rigging->region},
                    {"check", r.rigging->check},
                    {"ranking", r.rigging->ranking ? json(*r.rigging->ranking) : json(nullptr)}};
  } else {
    j["rigging"] = nullptr;
  }
  j["benford"] = r.benford;
  j["assignment"] = r.assignment ? json(*r.assignment) : json(nullptr);
}
inline void from_json(const json& j, ReportBundle& r) {
  if (j.value("format", std::string{}) != kReportVersion) throw InvalidArgument("report: unknown format tag");
  r.seed = j.at("seed").get<std::uint64_t>();
  r.min_electorate = j.at("min_electorate").get<Count>();
  r.inputs = j.at("inputs").get<std::vector<std::string>>();
  r.config = j.at("config");
  r.summary = j.at("summary").get<DatasetSummary>();
  r.verdicts = j.at("verdicts").get<std::vector<Verdict>>();
  r.stuffing.reset();
  r.rigging.reset();
  r.assignment.reset();
  if (!j.at("stuffing").is_null()) r.stuffing = j.at("stuffing").get<StuffingFit>();
  if (const auto& rg = j.at("rigging"); !rg.is_null()) {
    RiggingReport rr;
    rr.curve = rg.at("curve").get<DisplacementCurve>();
    rr.region = rg.at("region").get<AcceptanceRegion>();
    rr.check = rg.at("check").get<RegionCheck>();
    if (!rg.at("ranking").is_null()) rr.ranking = rg.at("ranking").get<ProvinceRanking>();
    r.rigging = std::move(rr);
  }
  r.benford = j.at("benford").get<std::vector<BenfordResult>>();
  if (!j.at("assignment").is_null()) r.assignment = j.at("assignment").get<AssignmentResult>();
}

// --- running -------------------------------------------------------------

inline std::vector<StationRecord> read_inputs(const std::vector<std::string>& paths, const FormatConfig& format) {
  std::vector<StationRecord> all;
  for (const auto& p : paths) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw IoError(p, "cannot open input file");
    std::vector<StationRecord> part;
    try {
      part = parse_results(in, format);
    } catch (const Error& e) {
      throw IoError(p, e.what());
    }
    all.insert(all.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
  }
  if (paths.size() > 1) {
    std::set<RegionKey> seen;
    for (const auto& r : all)
      if (!seen.insert(r.region).second) throw DuplicateKeyError(r.region.to_string());
  }
  return all;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path.string(), "cannot open for writing");
  out << text;
  if (!out) throw IoError(path.string(), "write failed");
}

inline std::string dump_report(const ReportBundle& r) { return json(r).dump(2) + "\n"; }

inline SyntheticSpec baseline_spec(const RiggingStage& stage, const DatasetSummary& s) {
  SyntheticSpec spec = stage.baseline;
  if (stage.baseline_from_data) {
    spec.mean_v = s.vote_share.mean;
    spec.sd_v = s.vote_share.sd;
    spec.mean_t = s.rel_turnout.mean;
    spec.sd_t = s.rel_turnout.sd;
    // District spreads must stay below the national spread.
    spec.district_spread_v = std::min(spec.district_spread_v, 0.5 * spec.sd_v);
    spec.district_spread_t = std::min(spec.district_spread_t, 0.5 * spec.sd_t);
  }
  spec.stuffing = {0.0, 0.0, 1.0};
  spec.rig_percentile = 0.0;
  spec.rig_dv = spec.rig_dt = 0.0;
  return spec;
}

/// Displacement curves of `count` clean synthetic elections on the stations of
/// `records`, seeded from (seed, k).
inline std::vector<DisplacementCurve> synthetic_reference_curves(std::span<const StationRecord> records,
                                                                 SyntheticSpec spec, std::size_t count,
                                                                 std::uint64_t seed, std::span<const int> p_grid,
                                                                 unsigned threads = 1) {
  std::vector<DisplacementCurve> curves(count);
  const auto layout = layout_of(records);
  spec.threads = 1;
  parallel_for(count, threads, [&](std::size_t k) {
    SyntheticSpec s = spec;
    s.seed = stream_key(seed, kReplicateDomain ^ 0x5249'4747ULL, k);
    const auto election = generate(layout, s);
    curves[k] = displacement_curve(election.records, p_grid, {}, "clean-" + std::to_string(k + 1));
  });
  return curves;
}

inline ReportBundle run_pipeline(const PipelineConfig& cfg, std::ostream* log = nullptr) {
  cfg.validate();
  auto note = [&](const std::string& msg) {
    if (log) *log << msg << '\n';
  };
  // Input problems are fatal and leave no report behind.
  const auto raw = read_inputs(cfg.inputs, cfg.format);
  const auto filtered = filter_stations(raw, cfg.min_electorate);
  const auto& records = filtered.retained;
  const std::filesystem::path out = cfg.out_dir;
  std::filesystem::create_directories(out);

  ReportBundle rep;
  rep.seed = cfg.seed;
  rep.min_electorate = cfg.min_electorate;
  rep.inputs = cfg.inputs;
  rep.config = cfg;
  rep.config.erase("out_dir");
  rep.summary = summarize(records);
  rep.summary.exclusion = filtered.exclusion;
  note("stations kept: " + std::to_string(records.size()) + " of " + std::to_string(raw.size()));

  auto guarded = [&](const std::string& name, bool enabled, const std::function<Verdict()>& body) {
    if (!enabled) {
      rep.verdicts.push_back({name, VerdictLabel::not_run, "disabled in config", 0.0, {}});
      return;
    }
    note("running " + name);
    try {
      rep.verdicts.push_back(body());
    } catch (const std::exception& e) {
      rep.verdicts.push_back({name, VerdictLabel::not_run, "test failed", 0.0, name + ": " + e.what()});
      note(name + " failed: " + e.what());
    }
  };

  std::optional<Fingerprint> std_fp;
  std::vector<FingerprintGroup> groups;
  if (cfg.write_artifacts) {
    try {
      const auto raw_fp = compute_fingerprint(std::span<const StationRecord>(records), Geometry::raw_default(),
                                              cfg.threads);
      const auto set = standardize_scores(records);
      std_fp = compute_fingerprint(std::span<const StandardizedScore>(set.scores), Geometry::standardized_default(),
                                   cfg.threads);
      write_text(out / "fingerprint_raw.json", json(raw_fp).dump() + "\n");
      write_text(out / "fingerprint_standardized.json", json(*std_fp).dump() + "\n");
      write_text(out / "cumulative_by_turnout.json",
                 json(cumulative_curve(records, CurveMode::by_turnout_level)).dump() + "\n");
      write_text(out / "cumulative_by_size_rank.json",
                 json(cumulative_curve(records, CurveMode::by_size_rank)).dump() + "\n");
      if (cfg.write_plots) {
        write_text(out / "fingerprint_raw.svg", emit_plot(raw_fp, PlotKind::heatmap, {.title = "fingerprint"}));
        write_text(out / "fingerprint_standardized.svg",
                   emit_plot(*std_fp, PlotKind::heatmap, {.title = "standardized fingerprint"}));
        // small vs large stations at the 10th size percentile
        const auto sized = sized_scores(records, set);
        std::vector<Count> sizes;
        for (const auto& s : sized) sizes.push_back(s.size);
        std::sort(sizes.begin(), sizes.end());
        if (!sizes.empty()) {
          const Count cut = nearest_rank(sizes, 10.0);
          std::vector<Point2> small, large;
          for (const auto& s : sized) (s.size <= cut ? small : large).push_back({s.z_v, s.z_t});
          if (!small.empty() && !large.empty()) {
            groups.push_back({"small (p = 10%)", compute_fingerprint(small, Geometry::standardized_default(),
                                                                     AxisKind::standardized, cfg.threads)});
            groups.push_back({"large", compute_fingerprint(large, Geometry::standardized_default(),
                                                           AxisKind::standardized, cfg.threads)});
            write_text(out / "fingerprint_contour.svg",
                       emit_plot(groups, PlotKind::contour, {.title = "standardized fingerprint by station size"}));
          }
        }
        write_text(out / "cumulative_by_size_rank.svg",
                   emit_plot(cumulative_curve(records, CurveMode::by_size_rank), PlotKind::line,
                             {.title = "cumulative vote share by size rank"}));
      }
    } catch (const IoError&) {
      throw;
    } catch (const std::exception& e) {
      note(std::string("fingerprint artifacts skipped: ") + e.what());
    }
  }

  guarded("stuffing", cfg.stuffing.enabled, [&] {
    FitConfig fc = cfg.stuffing.fit;
    fc.seed = stream_key(cfg.seed, kReplicateDomain ^ 0x5354'5546ULL, 0);
    fc.threads = cfg.threads;
    rep.stuffing = fit_stuffing(records, fc);
    return stuffing_verdict(*rep.stuffing, cfg.stuffing.signal_ratio);
  });

  guarded("rigging", cfg.rigging.enabled, [&] {
    const auto& st = cfg.rigging;
    std::vector<DisplacementCurve> refs;
    std::string provenance;
    if (st.reference_path) {
      std::ifstream in(*st.reference_path);
      if (!in) throw IoError(*st.reference_path, "cannot open reference curves");
      refs = read_reference_curves(in);
      provenance = "reference file " + *st.reference_path;
    } else {
      const auto spec = baseline_spec(st, rep.summary);
      refs = synthetic_reference_curves(records, spec, st.baseline_count, cfg.seed, st.p_grid, cfg.threads);
      provenance = "synthetic clean baseline: " + std::to_string(st.baseline_count) +
                   " elections on the observed stations";
      if (cfg.write_artifacts) {
        std::ofstream rf(out / "reference_curves.csv");
        if (!rf) throw IoError((out / "reference_curves.csv").string(), "cannot open for writing");
        write_reference_curves(rf, refs);
      }
    }
    RiggingReport rr;
    rr.curve = displacement_curve(records, st.p_grid, {}, "observed");
    rr.region = acceptance_region(refs, st.confidence, provenance);
    rr.check = check_region(rr.curve, rr.region);
    if (st.rank_provinces) rr.ranking = rank_provinces(records, ranking_p_grid(), {.threads = cfg.threads});
    if (cfg.write_artifacts && cfg.write_plots)
      write_text(out / "displacement.svg",
                 emit_plot(DisplacementPlot{{rr.curve}, rr.region}, PlotKind::line, {.title = "delta(p)"}));
    rep.rigging = std::move(rr);
    return rigging_verdict(rep.rigging->check, st.signal_run);
  });

  guarded("benford", cfg.benford.enabled, [&] {
    if (cfg.benford.station_level)
      rep.benford.push_back(benford_test(station_yes_counts(records), AggregationLevel::station, cfg.benford.min_value));
    if (cfg.benford.village_level)
      rep.benford.push_back(benford_test(village_yes_totals(records), AggregationLevel::village, cfg.benford.min_value));
    return benford_verdict(rep.benford, cfg.benford.signal_posterior);
  });

  guarded("assignment", cfg.assignment.enabled, [&] {
    AssignmentOptions opt = cfg.assignment.options;
    opt.seed = stream_key(cfg.seed, kPermutationDomain, 0);
    rep.assignment = assignment_test(records, opt);
    return assignment_verdict(*rep.assignment, cfg.assignment.signal_p);
  });

  write_text(out / "report.json", dump_report(rep));
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm utc{};
  gmtime_r(&now, &utc);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", &utc);
  json meta = {{"format", kReportVersion}, {"generated_at", stamp}, {"out_dir", cfg.out_dir}};
  write_text(out / "report.meta.json", meta.dump(2) + "\n");
  return rep;
}

}  // namespace elfor
