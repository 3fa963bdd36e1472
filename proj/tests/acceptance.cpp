// Acceptance criteria, one pass/fail line each.
//
//   acceptance            run every criterion
//   acceptance 6 7        run the listed criteria
//
// Exit status is 0 only if every requested criterion passes.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "plateau/calibration.hpp"
#include "plateau/experiments.hpp"
#include "plateau/io.hpp"
#include "plateau/verify.hpp"

using namespace plateau;

namespace {

constexpr std::uint64_t kSeed = 20240611;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string num(double v, int prec = 4) {
  std::ostringstream os;
  os << std::setprecision(prec) << v;
  return os.str();
}

std::size_t workers() {
  const char* w = std::getenv("PLATEAU_WORKERS");
  return w ? std::max<std::size_t>(1, std::strtoull(w, nullptr, 10)) : 1;
}

/// Rows as they would be read back from the emitted CSV.
std::vector<ResultRow> via_csv(const std::vector<ResultRow>& rows) { return parse_csv(to_csv(rows)); }

CalibrationReport run_calibration() {
  CalibrationOptions o;
  o.samples = 20000;
  o.master_seed = kSeed;
  o.workers = workers();
  return calibrate_single_layer(o);
}

Setting calibrated_setting() { return Setting::parse(run_calibration().selected); }

Outcome twirl_identities() {
  const auto st = twirl_identity_stats(100, kSeed);
  return {st.first_max <= 1e-12 && st.trace_max <= 1e-10,
          "single-block twirl max entry error " + num(st.first_max) + " (tol 1e-12); |Tr remainder| max " +
              num(st.trace_max) + " (tol 1e-10); 100 inputs, n <= 4, s in {1,2}"};
}

Outcome gradient_triple() {
  const auto g = gradient_agreement(200, 8, {1, 2, 3}, kSeed);
  return {g.commutator_max <= 1e-10 && g.finite_difference_max <= 1e-6,
          std::to_string(g.triples) + " triples: |shift - commutator| max " + num(g.commutator_max) +
              " (tol 1e-10), |shift - central difference| max " + num(g.finite_difference_max) + " (tol 1e-6)"};
}

Outcome light_cone() {
  const auto r = fig5_light_cone(100, kSeed);
  std::string eff;
  for (auto k : r.effective) eff += (eff.empty() ? "" : ",") + std::to_string(k + 1);
  const bool ok = r.effective == std::vector<std::size_t>{0, 1, 2, 3, 4, 6} && r.ineffective_max <= 1e-12;
  return {ok, "effective {theta_" + eff + "} (expected 1-5,7); |grad| of theta_6, theta_8, theta_9 max " +
                  num(r.ineffective_max) + " over 100 instances"};
}

Outcome unitality_resolution() {
  std::mt19937_64 rng(kSeed);
  double unital = 0.0;
  for (std::size_t n = 1; n <= 4; ++n) {
    for (std::size_t s : {1u, 2u}) {
      if (n % s) continue;
      for (std::size_t l : {1u, 2u, 3u}) {
        for (auto e : {EntanglerKind::none, EntanglerKind::cz_brick, EntanglerKind::cx_brick}) {
          for (auto p : {GeneratorPolicy::full, GeneratorPolicy::full_minus_identity}) {
            const CircuitSpec spec = CircuitSpec::make(n, l, s, e, p);
            const auto id = DenseOperator::identity(n);
            unital = std::max(unital, max_abs_diff(exact_twirl_first_moment(id, spec), id));
          }
        }
      }
    }
  }
  const auto r = eq12_resolution(kSeed);
  const bool written = r.as_written_max <= 1e-10;
  const bool block = r.block_normalized_max <= 1e-10;
  const bool exactly_one = written != block;
  std::string selected = exactly_one ? (written ? "as_written" : "block_normalized") : "none";
  const auto shallow = eq12_resolution(kSeed, {1, 2});
  std::string d = "unitality max " + num(unital) + " (tol 1e-12); max error vs exact twirl: as_written " +
                  num(r.as_written_max) + ", block_normalized " + num(r.block_normalized_max) +
                  " (tol 1e-10); selected mode: " + selected;
  if (!exactly_one) {
    d += "; on l <= 2 only block_normalized agrees (" + num(shallow.block_normalized_max) + "), first miss at " +
         (r.failures.empty() ? std::string("-") : r.failures.front());
  }
  return {unital <= 1e-12 && exactly_one, d};
}

Outcome second_moment_vs_mc() {
  bool ok = true;
  std::string d;
  for (std::size_t n : {1u, 2u}) {
    for (std::size_t l : {1u, 2u}) {
      const auto c = plateau::eq13_vs_mc(n, l, 1'000'000, kSeed, workers());
      ok = ok && c.max_excess <= 0.0;
      d += (d.empty() ? "" : "; ") + c.label + ": max |lead - MC| " + num(c.max_abs_diff) + ", excess over max(5 se, " +
           num(c.floor, 3) + ") " + num(c.max_excess, 3);
    }
  }
  return {ok, d};
}

Outcome calibration_criterion() {
  const CalibrationReport rep = run_calibration();
  std::size_t fits = 0;
  std::size_t degenerate = 0;
  double worst_r2 = 1.0;
  std::string worst;
  for (const auto& s : rep.settings) {
    if (s.degenerate) {
      ++degenerate;
      continue;
    }
    for (const auto& f : s.fits) {
      if (!f.available) continue;
      ++fits;
      if (f.r2 < worst_r2) {
        worst_r2 = f.r2;
        worst = s.setting.id() + " s=" + std::to_string(f.s);
      }
    }
  }
  const SettingResult* sel = nullptr;
  for (const auto& s : rep.settings) {
    if (s.setting.id() == rep.selected) sel = &s;
  }
  std::string d = std::to_string(rep.settings.size()) + " settings; outcome " +
                  (rep.any_match ? "(a): a setting reproduces the closed forms" : "(b): no setting matches, reproduction gap");
  d += "; selected " + rep.selected;
  if (sel && !sel->fits.empty() && sel->fits.front().available) {
    d += " (F_hat " + num(sel->fits.front().F_hat) + ", G_hat " + num(sel->fits.front().G_hat) + " vs 1/4, 5/12)";
  }
  if (!rep.any_match) {
    d += "; worst R^2 " + num(worst_r2) + " at " + worst + " over " + std::to_string(fits) + " fits (min 0.98), " +
         std::to_string(degenerate) + " settings with zero-variance points excluded";
  }
  // Persist the report next to the test binary for inspection.
  try {
    write_text_file("calibration.json", to_json(rep).dump(2) + "\n");
  } catch (const std::exception&) {
  }
  return {rep.any_match || rep.all_fits_pass, d};
}

Outcome fig2_trend() {
  FigureOptions o;
  o.tag = "fig2";
  o.samples = 10000;
  o.master_seed = kSeed;
  o.workers = workers();
  o.setting = calibrated_setting();
  const FigureReport rep = run_figure(o);
  const auto a = analyze_fig2(via_csv(rep.sweep.rows));
  bool ok = false;
  std::string d = "setting " + o.setting.id();
  for (const auto& mode : {std::string("random_effective"), std::string("random_all")}) {
    const auto& e = a.at(mode);
    const bool dec = e.at("strictly_decreasing").get<bool>();
    const double r2 = e.at("fit").is_null() ? 0.0 : e.at("fit").at("r2").get<double>();
    std::size_t zeros = 0;
    for (const auto& pt : e.at("points")) zeros += pt.at("var").get<double>() == 0.0;
    const bool pass = dec && r2 >= 0.95;
    if (mode == "random_effective") ok = pass;
    d += "; " + mode + ": strictly decreasing " + (dec ? "yes" : "no") + ", R^2 " + num(r2) + " (min 0.95)" +
         (zeros ? ", " + std::to_string(zeros) + " supports with zero sample variance (no fit)" : "");
  }
  return {ok, d + "; criterion evaluated on random_effective"};
}

Outcome fig3_deep() {
  FigureOptions o;
  o.tag = "fig3";
  o.master_seed = kSeed;
  o.workers = workers();
  o.setting = calibrated_setting();
  ExperimentConfig c = figure_config(o);
  c.n_samples = 10000;
  c.sweep->l = {100, 150};
  const SweepResult res = run_sweep(c);
  const auto a = analyze_fig3(via_csv(res.rows));
  if (a.at("better_matching_k_mode").is_null()) return {false, "no k-mode produced a fit"};
  const std::string best = a.at("better_matching_k_mode").get<std::string>();
  const auto& e = a.at("k_modes").at(best);
  const double base = e.at("fit").at("base").get<double>();
  const bool sat = e.at("saturated").get<bool>();
  const bool base_ok = std::abs(base - kDeepBase) <= 0.2 * kDeepBase;
  double worst = 0.0;
  for (const auto& s : e.at("saturation")) worst = std::max(worst, s.at("relative_change").get<double>());
  return {sat && base_ok, "setting " + c.setting.id() + ", k-mode " + best + ": max |var(150)/var(100) - 1| " +
                              num(worst) + " (max 0.10); fitted base " + num(base) + ", ln-slope " +
                              num(std::log(base)) + " vs 9/32 = 0.28125 (+-20%)"};
}

Outcome fig4_collapse() {
  FigureOptions o;
  o.tag = "fig4";
  o.samples = 10000;
  o.master_seed = kSeed;
  o.workers = workers();
  o.setting = calibrated_setting();
  const FigureReport rep = run_figure(o);
  const auto a = analyze_fig4(via_csv(rep.sweep.rows));
  const double r2 = a.at("fit").at("r2").get<double>();
  const bool zero = a.at("zero_point_exact").get<bool>();
  return {r2 >= 0.9 && zero, "setting " + rep.config.setting.id() + ": zero-intercept R^2 " + num(r2) +
                                 " (min 0.9) over " + std::to_string(rep.sweep.rows.size()) +
                                 " points; N_eff = 0 variance exactly 0: " + (zero ? "yes" : "no")};
}

Outcome determinism() {
  std::vector<std::string> failures;
  std::size_t checked = 0;
  ExperimentConfig c;
  c.tag = "det";
  c.n = 6;
  c.n_samples = 3000;
  c.master_seed = kSeed;
  c.setting = Setting{GeneratorPolicy::full_minus_identity, EntanglerKind::cx_brick, InitKind::plus};
  c.k_modes = {KMode::random_effective(), KMode::random_all()};
  c.sweep = SweepAxes{{4, 6}, {1, 3}, {1, 2}, {0.0, 0.5}, {}};
  for (const auto& cfg : {c}) {
    std::string ref;
    for (std::size_t w : {1u, 2u, 5u}) {
      ExperimentConfig x = cfg;
      x.workers = w;
      const std::string csv = to_csv(run_sweep(x).rows);
      if (ref.empty()) ref = csv;
      else if (csv != ref) failures.push_back("workers=" + std::to_string(w));
      ++checked;
    }
  }
  FigureOptions o;
  o.tag = "fig2";
  o.samples = 500;
  o.master_seed = kSeed;
  std::string ref;
  for (std::size_t w : {1u, 3u}) {
    o.workers = w;
    const std::string csv = to_csv(run_figure(o).sweep.rows);
    if (ref.empty()) ref = csv;
    else if (csv != ref) failures.push_back("fig2 workers=" + std::to_string(w));
    ++checked;
  }
  return {failures.empty(), std::to_string(checked) + " sweep runs across worker counts 1, 2, 3, 5; " +
                                (failures.empty() ? "all CSVs byte-identical" : "mismatch at " + failures.front())};
}

}  // namespace

int main(int argc, char** argv) {
  const std::map<int, std::pair<std::string, std::function<Outcome()>>> criteria{
      {1, {"twirl identities", twirl_identities}},
      {2, {"gradient triple agreement", gradient_triple}},
      {3, {"light cone / ineffective parameters", light_cone}},
      {4, {"unitality + subset-expansion normalization", unitality_resolution}},
      {5, {"second-moment leading term vs Monte Carlo", second_moment_vs_mc}},
      {6, {"single-layer calibration", calibration_criterion}},
      {7, {"variance vs observable support (n = 18)", fig2_trend}},
      {8, {"deep-circuit saturation and decay in n", fig3_deep}},
      {9, {"collapse onto s N_eff / l", fig4_collapse}},
      {10, {"determinism across worker counts", determinism}},
  };
  std::vector<int> which;
  for (int i = 1; i < argc; ++i) which.push_back(std::atoi(argv[i]));
  if (which.empty()) {
    for (const auto& [k, v] : criteria) which.push_back(k);
  }
  bool all = true;
  for (int k : which) {
    const auto it = criteria.find(k);
    if (it == criteria.end()) {
      std::cerr << "unknown criterion " << k << "\n";
      return 2;
    }
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = it->second.second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << "criterion " << k << " [" << it->second.first << "]: " << (o.pass ? "PASS" : "FAIL") << " ("
              << std::fixed << std::setprecision(1) << secs << " s) " << o.detail << std::endl;
    all = all && o.pass;
  }
  return all ? 0 : 1;
}
