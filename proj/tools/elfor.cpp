// elfor: election forensics from station-level results.
//
// Exit status: 0 success, 1 usage error, 2 runtime error, 3 report written
// but at least one test failed to run. Verdicts never change the status.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "elfor/elfor.hpp"

namespace fs = std::filesystem;
using namespace elfor;

namespace {

struct Globals {
  std::vector<std::string> inputs;
  std::string config_path;
  std::uint64_t seed = 1;
  Count min_electorate = 100;
  std::string out_dir = ".";
  unsigned threads = 1;
  std::string delimiter = ";";
};

json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path, "cannot open");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw IoError(path, std::string("invalid JSON: ") + e.what());
  }
}

// Config file first, then command-line flags on top.
PipelineConfig make_config(const Globals& g, const CLI::App& app) {
  PipelineConfig cfg;
  if (!g.config_path.empty()) cfg = load_json(g.config_path).get<PipelineConfig>();
  if (!g.inputs.empty()) cfg.inputs = g.inputs;
  if (app.count("--seed") || g.config_path.empty()) cfg.seed = g.seed;
  if (app.count("--min-electorate") || g.config_path.empty()) cfg.min_electorate = g.min_electorate;
  if (app.count("--out-dir") || g.config_path.empty()) cfg.out_dir = g.out_dir;
  if (app.count("--threads") || g.config_path.empty()) cfg.threads = g.threads;
  if (app.count("--delimiter")) {
    if (g.delimiter.size() != 1) throw InvalidArgument("--delimiter must be a single character");
    cfg.format.delimiter = g.delimiter[0];
  }
  return cfg;
}

std::vector<StationRecord> load_filtered(const PipelineConfig& cfg, ExclusionSummary* excl = nullptr) {
  if (cfg.inputs.empty()) throw InvalidArgument("no input: pass --input or set \"inputs\" in --config");
  auto raw = read_inputs(cfg.inputs, cfg.format);
  auto f = filter_stations(raw, cfg.min_electorate);
  if (excl) *excl = f.exclusion;
  std::cerr << "stations: " << f.retained.size() << " kept, " << f.exclusion.excluded_stations
            << " below electorate " << cfg.min_electorate << '\n';
  return std::move(f.retained);
}

fs::path out_path(const PipelineConfig& cfg, const std::string& name) {
  fs::create_directories(cfg.out_dir);
  return fs::path(cfg.out_dir) / name;
}

void emit(const PipelineConfig& cfg, const std::string& name, const json& j) {
  const auto p = out_path(cfg, name);
  write_text(p, j.dump(2) + "\n");
  std::cerr << "wrote " << p.string() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"elfor: statistical forensics of station-level election results"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("-i,--input", g.inputs, "Station results file(s), delimiter-separated with header");
  app.add_option("-c,--config", g.config_path, "JSON pipeline configuration; flags override it");
  app.add_option("--seed", g.seed, "Master random seed")->capture_default_str();
  app.add_option("--min-electorate", g.min_electorate, "Drop stations with fewer eligible voters")
      ->capture_default_str();
  app.add_option("-o,--out-dir", g.out_dir, "Output directory")->capture_default_str();
  app.add_option("-j,--threads", g.threads, "Worker threads, 0 = all cores")->capture_default_str();
  app.add_option("--delimiter", g.delimiter, "Field delimiter of input files")->capture_default_str();

  auto* ingest = app.add_subcommand("ingest", "Parse and filter input; write normalized stations.csv");

  auto* summ = app.add_subcommand("summarize", "Descriptive statistics of the filtered stations");

  std::string axes = "both";
  auto* fpr = app.add_subcommand("fingerprint", "2-d vote/turnout histograms and cumulative curves");
  fpr->add_option("--axes", axes, "raw, standardized or both")
      ->check(CLI::IsMember({"raw", "standardized", "both"}))
      ->capture_default_str();

  std::size_t replicates = 0;
  std::string target;
  auto* stuff = app.add_subcommand("stuffing", "Fit the ballot-stuffing model");
  stuff->add_option("--replicates", replicates, "Replicate fits (default 10)");
  stuff->add_option("--target", target, "Fit target: fingerprint or vote_share")
      ->check(CLI::IsMember({"fingerprint", "vote_share"}));

  std::string reference;
  std::size_t baseline_count = 0;
  double confidence = 0;
  auto* rig = app.add_subcommand("rigging", "Small vs large station displacement against a clean region");
  rig->add_option("--reference", reference, "Reference curves file (election_id;p;delta)");
  rig->add_option("--baseline-count", baseline_count, "Clean synthetic elections when no reference file (default 200)");
  rig->add_option("--confidence", confidence, "Acceptance region level (default 0.95)");

  std::string level = "both";
  Count min_value = 100;
  auto* ben = app.add_subcommand("benford", "Second-digit Benford test of 'Yes' counts");
  ben->add_option("--level", level, "station, village or both")
      ->check(CLI::IsMember({"station", "village", "both"}))
      ->capture_default_str();
  ben->add_option("--min-value", min_value, "Ignore counts below this")->capture_default_str();

  bool permutation = false;
  auto* asg = app.add_subcommand("assignment", "Within-village random voter assignment test");
  asg->add_flag("--permutation", permutation, "Permutation null for low-variance villages");

  std::string spec_path, synth_output;
  double syn_f = -1, syn_fe = -1, syn_alpha = -1, rig_p = -1, rig_dv = -1, rig_dt = -1;
  std::size_t provinces = 0;
  auto* syn = app.add_subcommand("synth", "Generate a synthetic election in the input file format");
  syn->add_option("--spec", spec_path, "JSON synthetic spec (or the \"synth\" key of --config)");
  syn->add_option("--output", synth_output, "Output file (default <out-dir>/synthetic.csv)");
  syn->add_option("--f", syn_f, "Incremental stuffing fraction");
  syn->add_option("--f-extreme", syn_fe, "Extreme stuffing fraction");
  syn->add_option("--alpha", syn_alpha, "Vote-stealing exponent");
  syn->add_option("--rig-percentile", rig_p, "Rig stations at or below this size percentile");
  syn->add_option("--rig-dv", rig_dv, "Vote-share shift of rigged stations");
  syn->add_option("--rig-dt", rig_dt, "Turnout shift of rigged stations");
  syn->add_option("--provinces", provinces, "Province count (default 10; 10x20x5 stations each)");

  auto* rep = app.add_subcommand("report", "Run every enabled test and write report.json");

  std::vector<std::string> artifacts, labels;
  std::string kind, region_path, plot_output, title;
  auto* plt = app.add_subcommand("plot", "Render a JSON artifact as SVG");
  plt->add_option("--artifact", artifacts, "Artifact JSON file(s)")->required();
  plt->add_option("--kind", kind, "heatmap, contour or line")
      ->required()
      ->check(CLI::IsMember({"heatmap", "contour", "line"}));
  plt->add_option("--region", region_path, "Acceptance region JSON for line plots of delta(p)");
  plt->add_option("--label", labels, "Labels for the artifacts, in order");
  plt->add_option("--title", title, "Figure title");
  plt->add_option("--output", plot_output, "SVG file (default <out-dir>/plot.svg)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    auto cfg = make_config(g, app);

    if (app.got_subcommand(ingest)) {
      ExclusionSummary ex;
      const auto records = load_filtered(cfg, &ex);
      const auto p = out_path(cfg, "stations.csv");
      std::ofstream out(p);
      if (!out) throw IoError(p.string(), "cannot open for writing");
      write_results(out, records, cfg.format);
      std::cerr << "wrote " << p.string() << '\n';
      std::cout << json(ex).dump(2) << '\n';
    } else if (app.got_subcommand(summ)) {
      ExclusionSummary ex;
      const auto records = load_filtered(cfg, &ex);
      auto s = summarize(records);
      s.exclusion = ex;
      emit(cfg, "summary.json", s);
      std::cout << json(s).dump(2) << '\n';
    } else if (app.got_subcommand(fpr)) {
      const auto records = load_filtered(cfg);
      if (axes != "standardized")
        emit(cfg, "fingerprint_raw.json",
             compute_fingerprint(std::span<const StationRecord>(records), Geometry::raw_default(), cfg.threads));
      if (axes != "raw") {
        const auto set = standardize_scores(records);
        std::cerr << "standardized " << set.scores.size() << " stations, skipped " << set.skipped << '\n';
        emit(cfg, "fingerprint_standardized.json",
             compute_fingerprint(std::span<const StandardizedScore>(set.scores), Geometry::standardized_default(),
                                 cfg.threads));
      }
      emit(cfg, "cumulative_by_turnout.json", cumulative_curve(records, CurveMode::by_turnout_level));
      emit(cfg, "cumulative_by_size_rank.json", cumulative_curve(records, CurveMode::by_size_rank));
    } else if (app.got_subcommand(stuff)) {
      const auto records = load_filtered(cfg);
      FitConfig fc = cfg.stuffing.fit;
      if (replicates) fc.replicates = replicates;
      if (!target.empty()) fc.target = target == "vote_share" ? FitTarget::vote_share : FitTarget::fingerprint;
      fc.seed = cfg.seed;
      fc.threads = cfg.threads;
      const auto fit = fit_stuffing(records, fc);
      emit(cfg, "stuffing.json", {{"seed", cfg.seed}, {"config", fc}, {"fit", fit}});
      std::cout << "f = " << fit.params.f << " +- " << fit.uncertainty.f << "  f_e = " << fit.params.f_extreme
                << " +- " << fit.uncertainty.f_extreme << "  alpha = " << fit.params.alpha << " +- "
                << fit.uncertainty.alpha << "  (replicate sd)\n";
    } else if (app.got_subcommand(rig)) {
      const auto records = load_filtered(cfg);
      auto st = cfg.rigging;
      if (!reference.empty()) st.reference_path = reference;
      if (baseline_count) st.baseline_count = baseline_count;
      if (confidence > 0) st.confidence = confidence;
      std::vector<DisplacementCurve> refs;
      std::string provenance;
      if (st.reference_path) {
        std::ifstream in(*st.reference_path);
        if (!in) throw IoError(*st.reference_path, "cannot open reference curves");
        refs = read_reference_curves(in);
        provenance = "reference file " + *st.reference_path;
      } else {
        refs = synthetic_reference_curves(records, baseline_spec(st, summarize(records)), st.baseline_count, cfg.seed,
                                          st.p_grid, cfg.threads);
        provenance = "synthetic clean baseline: " + std::to_string(st.baseline_count) +
                     " elections on the observed stations";
        std::ofstream rf(out_path(cfg, "reference_curves.csv"));
        write_reference_curves(rf, refs);
      }
      const auto curve = displacement_curve(records, st.p_grid, {}, "observed");
      const auto region = acceptance_region(refs, st.confidence, provenance);
      const auto check = check_region(curve, region);
      emit(cfg, "displacement.json", curve);
      emit(cfg, "region.json", region);
      json j = {{"seed", cfg.seed}, {"check", check}, {"verdict", rigging_verdict(check, st.signal_run)}};
      if (st.rank_provinces) j["ranking"] = rank_provinces(records, ranking_p_grid(), {.threads = cfg.threads});
      emit(cfg, "rigging.json", j);
      std::cout << "grid points above region: " << check.above.size() << " of " << check.compared
                << ", longest run " << check.longest_run_above << '\n';
    } else if (app.got_subcommand(ben)) {
      const auto records = load_filtered(cfg);
      std::vector<BenfordResult> results;
      if (level != "village") results.push_back(benford_test(station_yes_counts(records), AggregationLevel::station, min_value));
      if (level != "station") results.push_back(benford_test(village_yes_totals(records), AggregationLevel::village, min_value));
      emit(cfg, "benford.json", results);
      for (const auto& r : results)
        std::cout << to_string(r.level) << ": n = " << r.n << "  chi2 = " << r.chi2 << "  p = " << r.p_value
                  << "  log10 BF01 = " << r.log10_bf01 << "  log10 posterior = " << r.log10_posterior << '\n';
    } else if (app.got_subcommand(asg)) {
      const auto records = load_filtered(cfg);
      AssignmentOptions opt = cfg.assignment.options;
      opt.permutation = opt.permutation || permutation;
      opt.seed = cfg.seed;
      const auto a = assignment_test(records, opt);
      emit(cfg, "assignment.json", a);
      std::cout << "stations tested: " << a.tested_stations << "  |z| > " << a.critical_z << ": " << a.exceed_count
                << " (" << a.exceedance_fraction << ")  binomial p = " << a.binomial_p_value << '\n';
    } else if (app.got_subcommand(syn)) {
      SyntheticSpec spec;
      if (!spec_path.empty())
        spec = load_json(spec_path).get<SyntheticSpec>();
      else if (!g.config_path.empty()) {
        const auto j = load_json(g.config_path);
        if (j.contains("synth")) spec = j.at("synth").get<SyntheticSpec>();
      }
      if (app.count("--seed") || (spec_path.empty() && g.config_path.empty())) spec.seed = cfg.seed;
      spec.threads = cfg.threads;
      if (syn_f >= 0) spec.stuffing.f = syn_f;
      if (syn_fe >= 0) spec.stuffing.f_extreme = syn_fe;
      if (syn_alpha >= 0) spec.stuffing.alpha = syn_alpha;
      if (rig_p >= 0) spec.rig_percentile = rig_p;
      if (rig_dv >= 0) spec.rig_dv = rig_dv;
      if (rig_dt >= 0) spec.rig_dt = rig_dt;
      if (provinces) spec.provinces = provinces;
      const auto election = generate_synthetic(spec);
      const fs::path p = synth_output.empty() ? out_path(cfg, "synthetic.csv") : fs::path(synth_output);
      std::ofstream out(p);
      if (!out) throw IoError(p.string(), "cannot open for writing");
      write_results(out, election.records, cfg.format);
      std::cerr << "wrote " << p.string() << '\n';
      std::cout << json{{"stations", election.records.size()},
                        {"stuffed_stations", election.stuffed_stations},
                        {"rigged_stations", election.rigged_stations},
                        {"clamped_stations", election.clamped_stations},
                        {"spec", spec}}
                       .dump(2)
                << '\n';
    } else if (app.got_subcommand(rep)) {
      const auto bundle = run_pipeline(cfg, &std::cerr);
      for (const auto& v : bundle.verdicts)
        std::cout << v.test << ": " << to_string(v.label) << (v.error.empty() ? "" : "  (" + v.error + ")") << '\n';
      std::cerr << "wrote " << (fs::path(cfg.out_dir) / "report.json").string() << '\n';
      return bundle.complete() ? 0 : 3;
    } else if (app.got_subcommand(plt)) {
      const auto pk = parse_plot_kind(kind);
      std::vector<json> docs;
      for (const auto& a : artifacts) docs.push_back(load_json(a));
      const auto type = docs.front().value("type", std::string{});
      for (const auto& d : docs)
        if (d.value("type", std::string{}) != type) throw InvalidArgument("plot: artifacts of mixed type");
      PlotArtifact artifact;
      if (type == "fingerprint") {
        if (docs.size() == 1 && pk != PlotKind::contour) {
          artifact = docs.front().get<Fingerprint>();
        } else {
          std::vector<FingerprintGroup> groups;
          for (std::size_t k = 0; k < docs.size(); ++k)
            groups.push_back({k < labels.size() ? labels[k] : fs::path(artifacts[k]).stem().string(),
                              docs[k].get<Fingerprint>()});
          artifact = std::move(groups);
        }
      } else if (type == "cumulative_curve") {
        if (docs.size() != 1) throw InvalidArgument("plot: one cumulative curve per figure");
        artifact = docs.front().get<CumulativeCurve>();
      } else if (type == "displacement_curve") {
        DisplacementPlot dp;
        for (std::size_t k = 0; k < docs.size(); ++k) {
          dp.curves.push_back(docs[k].get<DisplacementCurve>());
          if (k < labels.size()) dp.curves.back().label = labels[k];
        }
        if (!region_path.empty()) dp.region = load_json(region_path).get<AcceptanceRegion>();
        artifact = std::move(dp);
      } else {
        throw InvalidArgument("plot: unsupported artifact type '" + type + "'");
      }
      PlotOptions po;
      po.title = title;
      const auto svg = emit_plot(artifact, pk, po);
      const fs::path p = plot_output.empty() ? out_path(cfg, "plot.svg") : fs::path(plot_output);
      write_text(p, svg);
      std::cerr << "wrote " << p.string() << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
