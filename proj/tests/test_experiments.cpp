#include <gtest/gtest.h>

#include <cmath>

#include "plateau/experiments.hpp"

using namespace plateau;
using nlohmann::json;

namespace {

json minimal() { return json{{"schema", std::string(kConfigSchema)}}; }

std::string error_field(const json& j) {
  try {
    parse_config(j);
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "";
}

ExperimentConfig small_sweep() {
  ExperimentConfig c;
  c.tag = "t";
  c.n = 4;
  c.n_samples = 400;
  c.master_seed = 7;
  c.setting = Setting{GeneratorPolicy::full_minus_identity, EntanglerKind::cx_brick, InitKind::plus};
  c.k_modes = {KMode::random_effective(), KMode::random_all()};
  c.sweep = SweepAxes{{3, 4}, {1, 2}, {1, 2}, {0.0, 0.5}, {}};
  return c;
}

}  // namespace

TEST(Config, MinimalDocumentGetsDefaults) {
  const ExperimentConfig c = parse_config(minimal());
  EXPECT_EQ(c.n, 4u);
  EXPECT_EQ(c.l, 1u);
  EXPECT_EQ(c.observable, "global_z");
  ASSERT_EQ(c.k_modes.size(), 1u);
  EXPECT_EQ(c.k_modes[0].str(), "random_effective");
}

TEST(Config, ErrorsNameTheOffendingField) {
  json j = minimal();
  j["bogus"] = 1;
  EXPECT_EQ(error_field(j), "bogus");
  j = minimal();
  j["circuit"] = {{"entangler", "ladder"}};
  EXPECT_EQ(error_field(j), "circuit.entangler");
  j = minimal();
  j["circuit"] = {{"n", "four"}};
  EXPECT_EQ(error_field(j), "circuit.n");
  j = minimal();
  j["sweep"] = {{"n", json::array({2, "x"})}};
  EXPECT_EQ(error_field(j), "sweep.n[1]");
  j = minimal();
  j["n_samples"] = 1;
  EXPECT_EQ(error_field(j), "n_samples");
  j = minimal();
  j["schema"] = "other/1";
  EXPECT_EQ(error_field(j), "schema");
  EXPECT_EQ(error_field(json{{"tag", "x"}}), "schema");
  j = minimal();
  j["circuit"] = {{"prune_fraction", 1.5}};
  EXPECT_EQ(error_field(j), "circuit.prune_fraction");
  j = minimal();
  j["circuit"] = {{"n", 2}, {"s", 1}, {"generator_policy", "xyz_only"}};
  j["sweep"] = {{"s", json::array({1, 2})}};
  EXPECT_EQ(error_field(j), "circuit.generator_policy");
}

TEST(Config, JsonRoundTripAndHashIgnoresWorkers) {
  ExperimentConfig c = small_sweep();
  c.deep_c0 = 1.25;
  const ExperimentConfig back = parse_config(to_json(c));
  EXPECT_EQ(to_json(back), to_json(c));
  ExperimentConfig w = c;
  w.workers = 6;
  EXPECT_EQ(config_hash(w), config_hash(c));
  w.master_seed = 8;
  EXPECT_NE(config_hash(w), config_hash(c));
}

TEST(Sweep, ExpansionSkipsIndivisibleWidths) {
  std::size_t skipped = 0;
  const auto pts = expand_sweep(small_sweep(), &skipped);
  EXPECT_EQ(pts.size(), 12u);  // n=3: s=1 only; n=4: s=1,2; times l and prune
  EXPECT_EQ(skipped, 4u);
  EXPECT_EQ(pts.front().n, 3u);
}

TEST(Sweep, RowsAreWorkerIndependent) {
  ExperimentConfig a = small_sweep();
  ExperimentConfig b = a;
  b.workers = 3;
  EXPECT_EQ(to_csv(run_sweep(a).rows), to_csv(run_sweep(b).rows));
}

TEST(Sweep, FullPruningGivesZeroVariance) {
  ExperimentConfig c = small_sweep();
  c.sweep->prune_fraction = {1.0};
  const SweepResult res = run_sweep(c);
  ASSERT_FALSE(res.rows.empty());
  for (const auto& r : res.rows) {
    EXPECT_EQ(r.k_mode, "random_all");
    EXPECT_EQ(r.n_eff, 0u);
    EXPECT_EQ(r.var_est, 0.0);
    EXPECT_EQ(r.predicted, 0.0);
  }
  EXPECT_FALSE(res.notes.empty());
}

TEST(Sweep, RowsSatisfyInvariants) {
  const SweepResult res = run_sweep(small_sweep());
  EXPECT_TRUE(row_invariant_violations(res.rows).empty());
  for (const auto& r : res.rows) {
    if (r.l > 1) EXPECT_EQ(r.prefactor_mode, "deep_fit");
  }
}

TEST(Predict, SingleLayerCarriesBothPrefactorModes) {
  ExperimentConfig c;
  c.n = 9;
  c.s = 3;
  c.observable = "z_prefix:9";
  c.k_modes = {KMode::random_all()};
  const auto rows = predict_rows(c);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].n_eff, 3u);
  EXPECT_EQ(rows[1].prefactor_mode, "figure1");
  EXPECT_NEAR(rows[1].predicted, 25.0 / 576 * std::pow(17.0 / 126, 2), 1e-15);
  EXPECT_NEAR(rows[1].predicted, 7.90e-4, 5e-7);
  EXPECT_TRUE(std::isnan(rows[0].var_est));
  EXPECT_EQ(rows[0].n_samples, 0u);
}

TEST(Predict, ConditionalModesDropSlotFraction) {
  EXPECT_DOUBLE_EQ(single_layer_prediction(4, 1, 2, KMode::random_effective(), PrefactorMode::eq14) * 2.0 / 4.0,
                   single_layer_prediction(4, 1, 2, KMode::random_all(), PrefactorMode::eq14));
  EXPECT_EQ(single_layer_prediction(4, 1, 0, KMode::random_all(), PrefactorMode::eq14), 0.0);
}

TEST(Predict, DeepRowsNeedConstantAndHalveWithDepth) {
  ExperimentConfig c;
  c.n = 6;
  c.l = 10;
  EXPECT_THROW(predict_rows(c), ConfigError);
  c.deep_c0 = 2.0;
  c.sweep = SweepAxes{{}, {10, 20}, {}, {}, {}};
  const auto rows = predict_rows(c);
  ASSERT_EQ(rows.size(), 2u);
  // N_eff grows with l here, so the prediction scales as N_eff / l.
  EXPECT_DOUBLE_EQ(rows[1].predicted, rows[0].predicted * (static_cast<double>(rows[1].n_eff) / rows[0].n_eff) / 2.0);
  EXPECT_DOUBLE_EQ(deep_basis(6, 1, 60, 20), deep_basis(6, 1, 60, 10) / 2.0);
  EXPECT_EQ(rows[0].prefactor_mode, "deep_fit");
}

TEST(Figures, DeskConfigsAreValid) {
  for (const auto& tag : figure_tags()) {
    FigureOptions o;
    o.tag = tag;
    EXPECT_NO_THROW(validate(figure_config(o))) << tag;
  }
  FigureOptions o;
  o.tag = "fig3";
  o.setting = Setting{GeneratorPolicy::full, EntanglerKind::none, InitKind::zeros};
  EXPECT_EQ(figure_config(o).setting.entangler, EntanglerKind::cz_brick);
  EXPECT_TRUE(figure_needs_calibration("fig1"));
  EXPECT_FALSE(figure_needs_calibration("fig4"));
}

TEST(Figures, CollapseAnalysisOnExactLine) {
  std::vector<ResultRow> rows;
  for (std::size_t s : {1u, 2u}) {
    for (std::size_t ne : {0u, 2u, 4u}) {
      ResultRow r;
      r.n = 4;
      r.s = s;
      r.l = 10;
      r.n_eff = ne;
      r.var_est = 0.01 * static_cast<double>(s * ne) / 10.0;
      r.ci_low = r.var_est * 0.9;
      r.ci_high = r.var_est * 1.1;
      rows.push_back(r);
    }
  }
  const json a = analyze_fig4(rows);
  EXPECT_NEAR(a.at("fit").at("r2").get<double>(), 1.0, 1e-12);
  EXPECT_NEAR(a.at("fit").at("slope").get<double>(), 0.01, 1e-15);
  EXPECT_TRUE(a.at("zero_point_exact").get<bool>());
  ASSERT_EQ(a.at("equal_s_n_eff_groups").size(), 1u);  // s N_eff = 4 from (1,4) and (2,2)
  EXPECT_TRUE(a.at("equal_s_n_eff_groups")[0].at("ci_overlap").get<bool>());
}

TEST(Manifest, RecordsHashesAndSeed) {
  const ExperimentConfig c = small_sweep();
  const json m = make_manifest(c, "sample", 1.5, "abc");
  EXPECT_EQ(m.at("master_seed").get<std::uint64_t>(), 7u);
  EXPECT_EQ(m.at("config_hash").get<std::string>(), config_hash(c));
  EXPECT_EQ(m.at("csv_fnv1a64").get<std::string>(), hex64(fnv1a64("abc")));
}
