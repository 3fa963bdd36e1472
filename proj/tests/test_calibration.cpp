#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "plateau/calibration.hpp"

using namespace plateau;

TEST(Settings, GridHasEighteenDistinctEntries) {
  const auto grid = default_settings_grid();
  EXPECT_EQ(grid.size(), 18u);
  std::set<std::string> ids;
  for (const auto& s : grid) {
    ids.insert(s.id());
    EXPECT_EQ(Setting::parse(s.id()), s);
  }
  EXPECT_EQ(ids.size(), 18u);
  EXPECT_THROW(Setting::parse("full/cz_brick"), std::invalid_argument);
}

TEST(Settings, XyzOnlyIsSingleQubit) {
  const Setting x{GeneratorPolicy::xyz_only, EntanglerKind::none, InitKind::zeros};
  EXPECT_TRUE(x.applicable(1));
  EXPECT_FALSE(x.applicable(2));
}

TEST(Observables, ZStrings) {
  EXPECT_EQ(global_z(3).str(), "ZZZ");
  EXPECT_EQ(z_prefix(4, 2).str(), "ZZII");
  EXPECT_THROW(z_prefix(2, 3), std::invalid_argument);
}

TEST(Fit, RecoversExactGeometricFamily) {
  std::vector<CalibrationPoint> pts;
  for (std::size_t n = 2; n <= 8; ++n) {
    CalibrationPoint p;
    p.n = n;
    p.s = 1;
    p.n_eff = n;
    p.var_mc = 0.25 * std::pow(5.0 / 12.0, static_cast<double>(n) - 1.0);
    pts.push_back(p);
  }
  pts.push_back({4, 2, 2, 0.0});
  const LogLinearFit f = fit_family(pts, 1);
  ASSERT_TRUE(f.available);
  EXPECT_NEAR(f.F_hat, 0.25, 1e-12);
  EXPECT_NEAR(f.G_hat, 5.0 / 12.0, 1e-12);
  EXPECT_NEAR(f.r2, 1.0, 1e-12);
  const LogLinearFit g = fit_family(pts, 2);
  EXPECT_FALSE(g.available);
  EXPECT_EQ(g.dropped, 1u);
}

TEST(Calibrate, SmallGridReportIsCompleteAndReproducible) {
  CalibrationOptions o;
  o.grid = {Setting{GeneratorPolicy::full, EntanglerKind::none, InitKind::zeros},
            Setting{GeneratorPolicy::xyz_only, EntanglerKind::none, InitKind::zeros}};
  o.targets = {{2, 1}, {3, 1}, {4, 1}, {4, 2}};
  o.samples = 300;
  o.master_seed = 3;
  const CalibrationReport a = calibrate_single_layer(o);
  ASSERT_EQ(a.settings.size(), 2u);
  EXPECT_TRUE(a.settings[0].eligible);
  EXPECT_FALSE(a.settings[1].eligible);
  EXPECT_EQ(a.settings[1].per_n.size(), 3u);
  EXPECT_EQ(a.selected, a.settings[0].setting.id());
  const auto j = to_json(a);
  EXPECT_EQ(j.at("master_seed").get<std::uint64_t>(), 3u);
  EXPECT_EQ(j.at("settings").size(), 2u);
  o.workers = 3;
  EXPECT_EQ(to_json(calibrate_single_layer(o)).dump(), j.dump());
  EXPECT_THROW(calibrate_single_layer(CalibrationOptions{.grid = {}}), std::invalid_argument);
}
