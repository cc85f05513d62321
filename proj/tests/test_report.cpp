#include <gtest/gtest.h>

#include <cmath>

#include "helpers.hpp"

using namespace elfor;

namespace {

// Serialize, parse, deserialize, serialize again: the two texts must agree.
template <class T>
T round_trip(const T& value) {
  const std::string text = json(value).dump();
  const T back = json::parse(text).get<T>();
  EXPECT_EQ(json(back).dump(), text);
  return back;
}

const std::vector<StationRecord>& election() {
  static const auto e = [] {
    SyntheticSpec s;
    s.provinces = 3;
    s.stuffing = {0.05, 0.01, 1.3};
    return generate_synthetic(s).records;
  }();
  return e;
}

}  // namespace

TEST(ReportJson, Summary) {
  auto filtered = filter_stations(election(), 200);
  auto s = summarize(filtered.retained);
  s.exclusion = filtered.exclusion;
  const auto back = round_trip(s);
  EXPECT_EQ(back.station_count, s.station_count);
  EXPECT_EQ(back.vote_share.sd, s.vote_share.sd);
  ASSERT_TRUE(back.exclusion.has_value());
  EXPECT_EQ(back.exclusion->excluded_vote_fraction, s.exclusion->excluded_vote_fraction);
  const auto j = json(s);
  EXPECT_EQ(j.at("sd_convention"), "population");

  // single station: undefined spreads survive as null
  const auto one = summarize(std::vector{testing_support::station("A", "B", "C", "1", 100, 0, 0)});
  const auto back1 = round_trip(one);
  EXPECT_EQ(back1.undefined_vote_share_count, 1u);
  EXPECT_EQ(std::isnan(back1.vote_share.mean), std::isnan(one.vote_share.mean));
}

TEST(ReportJson, Format) {
  FormatConfig f;
  f.delimiter = '\t';
  f.columns.turnout = "valid votes";
  const auto back = round_trip(f);
  EXPECT_EQ(back.delimiter, '\t');
  EXPECT_EQ(back.columns.turnout, "valid votes");
  EXPECT_THROW(json::parse(R"({"delimiter": ";;"})").get<FormatConfig>(), std::exception);
}

TEST(ReportJson, Fingerprints) {
  const auto raw = compute_fingerprint(std::span<const StationRecord>(election()));
  EXPECT_EQ(round_trip(raw), raw);
  const auto set = standardize_scores(election());
  const auto z = compute_fingerprint(std::span<const StandardizedScore>(set.scores));
  EXPECT_EQ(round_trip(z), z);
  EXPECT_EQ(json(z).at("type"), "fingerprint");
}

TEST(ReportJson, CumulativeCurves) {
  for (auto mode : {CurveMode::by_turnout_level, CurveMode::by_size_rank}) {
    const auto c = cumulative_curve(election(), mode);
    EXPECT_EQ(round_trip(c), c);
  }
}

TEST(ReportJson, StuffingFitAndConfig) {
  StuffingFit fit;
  fit.params = {0.0612, 0.00031, 1.2999999999999998};
  fit.uncertainty = {0.0049, 1e-300, 0.11};
  fit.objective = 3.3e-7;
  fit.data_moments = {0.53, 0.23, 0.86, 0.085};
  fit.model_moments = {0.531, 0.241, 0.9, 0.1};
  fit.replicates = {{17, {0.06, 0.0, 1.3}, 1e-7, 120, true}, {18, {0.062, 0.001, 1.31}, 2e-7, 300, false}};
  const auto back = round_trip(fit);
  EXPECT_EQ(back.params, fit.params);
  EXPECT_EQ(back.uncertainty, fit.uncertainty);
  EXPECT_EQ(back.replicates[1].converged, false);
  EXPECT_EQ(back.replicates[0].seed, 17u);

  FitConfig cfg;
  cfg.replicates = 3;
  cfg.target = FitTarget::vote_share;
  cfg.moments = MomentMethod::trimmed;
  cfg.seed = 0xffffffffffffffffULL;
  const auto cb = round_trip(cfg);
  EXPECT_EQ(cb.target, FitTarget::vote_share);
  EXPECT_EQ(cb.moments, MomentMethod::trimmed);
  EXPECT_EQ(cb.seed, cfg.seed);
}

TEST(ReportJson, RiggingArtifacts) {
  const auto grid = default_p_grid();
  const auto curve = displacement_curve(std::span<const StationRecord>(election()), grid);
  const auto back = round_trip(curve);
  ASSERT_EQ(back.points.size(), curve.points.size());
  for (std::size_t k = 0; k < curve.points.size(); ++k) {
    EXPECT_EQ(back.points[k].delta, curve.points[k].delta);
    EXPECT_EQ(back.points[k].cutoff, curve.points[k].cutoff);
  }
  DisplacementCurve sparse{"x", {DisplacementPoint{5, std::nullopt}, DisplacementPoint{6, 0.25, 0.1, 0.2, 3, 170}}};
  const auto sb = round_trip(sparse);
  EXPECT_FALSE(sb.points[0].delta.has_value());
  EXPECT_TRUE(std::isnan(sb.points[0].dv));

  const std::vector refs{curve, sparse};
  const auto region = acceptance_region(refs, 0.9, "two curves");
  const auto rb = round_trip(region);
  EXPECT_EQ(rb.lower, region.lower);
  EXPECT_EQ(rb.upper, region.upper);
  EXPECT_EQ(rb.provenance, "two curves");

  const auto ranking = rank_provinces(election(), ranking_p_grid());
  const auto kb = round_trip(ranking);
  ASSERT_EQ(kb.entries.size(), ranking.entries.size());
  EXPECT_EQ(kb.entries[0].mean_delta, ranking.entries[0].mean_delta);
}

TEST(ReportJson, BenfordAndAssignment) {
  const auto b = benford_test(station_yes_counts(election()), AggregationLevel::station, 10);
  const auto bb = round_trip(b);
  EXPECT_EQ(bb.counts, b.counts);
  EXPECT_EQ(bb.log10_bf01, b.log10_bf01);
  std::vector<Count> degenerate(500, 130);
  const auto d = benford_test(degenerate);
  const auto db = round_trip(d);
  EXPECT_EQ(db.log10_bf01_lower_bound, -std::numeric_limits<double>::infinity());
  EXPECT_EQ(db.posterior, d.posterior);

  AssignmentOptions opt;
  opt.permutation = true;
  const auto a = assignment_test(election(), opt);
  const auto ab = round_trip(a);
  ASSERT_EQ(ab.stations.size(), a.stations.size());
  for (std::size_t k = 0; k < a.stations.size(); ++k) {
    EXPECT_EQ(ab.stations[k].station, a.stations[k].station);
    EXPECT_EQ(ab.stations[k].z, a.stations[k].z);
    EXPECT_EQ(ab.stations[k].variance, a.stations[k].variance);
    EXPECT_EQ(ab.stations[k].exceeds, a.stations[k].exceeds);
    EXPECT_EQ(ab.stations[k].permutation, a.stations[k].permutation);
  }
  EXPECT_EQ(ab.binomial_p_value, a.binomial_p_value);
}

TEST(ReportJson, SyntheticSpecDrivesIdenticalElection) {
  SyntheticSpec s;
  s.provinces = 2;
  s.stuffing = {0.1, 0.02, 1.7};
  s.rig_percentile = 12.5;
  s.rig_dv = 0.05;
  s.seed = 123456789012345ULL;
  const auto back = round_trip(s);
  EXPECT_EQ(generate_synthetic(back).records, generate_synthetic(s).records);
}

TEST(ReportJson, PipelineConfigAndBundle) {
  PipelineConfig cfg;
  cfg.inputs = {"a.csv", "b.csv"};
  cfg.seed = 99;
  cfg.rigging.reference_path = "refs.csv";
  cfg.rigging.p_grid = {5, 10, 20};
  cfg.assignment.options.permutation = true;
  cfg.benford.village_level = false;
  const auto cb = round_trip(cfg);
  EXPECT_EQ(cb.inputs, cfg.inputs);
  EXPECT_EQ(cb.rigging.reference_path, cfg.rigging.reference_path);
  EXPECT_EQ(cb.rigging.p_grid, cfg.rigging.p_grid);
  EXPECT_FALSE(cb.benford.village_level);
  const auto single = json::parse(R"({"inputs": "one.csv"})").get<PipelineConfig>();
  EXPECT_EQ(single.inputs, std::vector<std::string>{"one.csv"});

  ReportBundle r;
  r.seed = 99;
  r.min_electorate = 100;
  r.inputs = cfg.inputs;
  r.config = json(cfg);
  r.summary = summarize(election());
  r.benford.push_back(benford_test(station_yes_counts(election())));
  r.verdicts = {benford_verdict(r.benford, 0.05), Verdict{"assignment", VerdictLabel::not_run, "", 0.01, "no testable village"}};
  const auto rb = round_trip(r);
  EXPECT_FALSE(rb.stuffing.has_value());
  EXPECT_FALSE(rb.rigging.has_value());
  EXPECT_FALSE(rb.complete());
  ASSERT_NE(rb.verdict("assignment"), nullptr);
  EXPECT_EQ(rb.verdict("assignment")->label, VerdictLabel::not_run);
  EXPECT_EQ(json(rb).at("format"), kReportVersion);
}

TEST(Verdicts, DerivableFromStoredNumbers) {
  StuffingFit fit;
  fit.params.f = 0.05;
  fit.uncertainty.f = 0.02;
  EXPECT_EQ(stuffing_verdict(fit, 2.0).label, VerdictLabel::signal);
  fit.uncertainty.f = 0.025;
  EXPECT_EQ(stuffing_verdict(fit, 2.0).label, VerdictLabel::no_signal);
  RegionCheck chk;
  chk.longest_run_above = 2;
  EXPECT_EQ(rigging_verdict(chk, 3).label, VerdictLabel::no_signal);
  chk.longest_run_above = 3;
  EXPECT_EQ(rigging_verdict(chk, 3).label, VerdictLabel::signal);
  AssignmentResult a;
  a.binomial_p_value = 0.0099;
  EXPECT_EQ(assignment_verdict(a, 0.01).label, VerdictLabel::signal);
  EXPECT_EQ(assignment_verdict(a, 0.0099).label, VerdictLabel::no_signal);
  BenfordResult b;
  b.posterior = 0.5;
  EXPECT_EQ(benford_verdict({b}, 0.05).label, VerdictLabel::no_signal);
  b.posterior = 0.01;
  EXPECT_EQ(benford_verdict({b}, 0.05).label, VerdictLabel::signal);
  for (auto l : {VerdictLabel::signal, VerdictLabel::no_signal, VerdictLabel::not_run})
    EXPECT_EQ(parse_verdict(to_string(l)), l);
}
