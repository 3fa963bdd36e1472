// plateau: gradient-variance experiments for layered Pauli-rotation circuits.
//
//   plateau sample    --config cfg.json --out results
//   plateau predict   --config cfg.json --out results
//   plateau calibrate --out results
//   plateau verify    [--level fast|full]
//   plateau figure    fig1|fig2|fig3|fig4 --scale desk --out results
//
// Exit codes: 0 success, 1 invariant failure, 2 config error.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <chrono>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "plateau/calibration.hpp"
#include "plateau/experiments.hpp"
#include "plateau/io.hpp"
#include "plateau/verify.hpp"

namespace fs = std::filesystem;
using namespace plateau;

namespace {

constexpr int kOk = 0;
constexpr int kInvariant = 1;
constexpr int kConfig = 2;

struct Flags {
  std::string config;
  std::optional<std::size_t> samples;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  std::string out = "results";
  std::string scale = "desk";
  std::optional<std::string> prefactor;
  std::string level = "fast";
  std::string tag;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

ExperimentConfig load_config(const Flags& f) {
  if (f.config.empty()) throw ConfigError("--config", "a config file is required for this command");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(f.config));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("<file>", std::string("not valid JSON: ") + e.what());
  } catch (const std::runtime_error& e) {
    throw ConfigError("--config", e.what());
  }
  ExperimentConfig c = parse_config(j);
  if (f.samples) c.n_samples = *f.samples;
  if (f.seed) c.master_seed = *f.seed;
  if (f.workers) c.workers = *f.workers;
  if (f.prefactor) c.prefactor = detail::wrap_parse("--prefactor", [&] { return parse_prefactor_mode(*f.prefactor); });
  validate(c);
  return c;
}

void ensure_out(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("--out", "cannot create directory '" + dir + "': " + ec.message());
}

std::string out_path(const Flags& f, const std::string& name) { return (fs::path(f.out) / name).string(); }

int report_violations(const std::vector<ResultRow>& rows) {
  const auto bad = row_invariant_violations(rows);
  for (const auto& b : bad) std::cerr << "invariant: " << b << "\n";
  return bad.empty() ? kOk : kInvariant;
}

int cmd_sample(const Flags& f) {
  const ExperimentConfig c = load_config(f);
  ensure_out(f.out);
  const auto t0 = Clock::now();
  const SweepResult res = run_sweep(c);
  const std::string csv = to_csv(res.rows);
  write_text_file(out_path(f, c.tag + ".csv"), csv);
  nlohmann::json m = make_manifest(c, "sample", seconds_since(t0), csv);
  m["skipped_points"] = res.skipped_points;
  m["notes"] = res.notes;
  if (!res.deep_c0.empty()) m["deep_c0"] = res.deep_c0;
  write_text_file(out_path(f, c.tag + ".manifest.json"), m.dump(2) + "\n");
  std::cout << "wrote " << res.rows.size() << " rows to " << out_path(f, c.tag + ".csv") << "\n";
  return report_violations(res.rows);
}

int cmd_predict(const Flags& f) {
  const ExperimentConfig c = load_config(f);
  ensure_out(f.out);
  const auto t0 = Clock::now();
  std::vector<ResultRow> rows;
  try {
    rows = predict_rows(c);
  } catch (const std::out_of_range& e) {
    throw ConfigError("circuit.s", e.what());
  }
  const std::string tag = c.tag + "_predicted";
  const std::string csv = to_csv(rows);
  write_text_file(out_path(f, tag + ".csv"), csv);
  write_text_file(out_path(f, tag + ".manifest.json"), make_manifest(c, "predict", seconds_since(t0), csv).dump(2) + "\n");
  std::cout << "wrote " << rows.size() << " rows to " << out_path(f, tag + ".csv") << "\n";
  for (const auto& r : rows) {
    if (!(r.predicted >= 0.0)) return kInvariant;
  }
  return kOk;
}

int cmd_calibrate(const Flags& f) {
  CalibrationOptions o;
  if (f.samples) o.samples = *f.samples;
  if (o.samples < 2) throw ConfigError("--samples", "must be at least 2");
  if (f.seed) o.master_seed = *f.seed;
  if (f.workers) o.workers = *f.workers;
  if (o.workers == 0) throw ConfigError("--workers", "must be positive");
  if (f.prefactor) o.prefactor = detail::wrap_parse("--prefactor", [&] { return parse_prefactor_mode(*f.prefactor); });
  ensure_out(f.out);
  const auto t0 = Clock::now();
  const CalibrationReport rep = calibrate_single_layer(o);
  nlohmann::json j = to_json(rep);
  j["wall_time_seconds"] = seconds_since(t0);
  write_text_file(out_path(f, "calibration.json"), j.dump(2) + "\n");
  std::cout << "settings: " << rep.settings.size() << ", outcome " << (rep.any_match ? "(a) match" : "(b) no match")
            << (rep.any_match ? "" : ", reproduction gap flagged") << "\n";
  std::cout << "selected canonical setting: " << rep.selected << "\n";
  std::cout << "wrote " << out_path(f, "calibration.json") << "\n";
  return kOk;
}

int cmd_verify(const Flags& f) {
  const VerifyLevel level = detail::wrap_parse("--level", [&] { return parse_verify_level(f.level); });
  const auto results = run_verify(level, f.seed.value_or(1), f.workers.value_or(1));
  bool ok = true;
  for (const auto& r : results) {
    std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << " (" << std::fixed << std::setprecision(1) << r.seconds
              << " s): " << r.detail << "\n";
    ok = ok && r.passed;
  }
  std::cout << (ok ? "all checks passed" : "invariant failure") << "\n";
  return ok ? kOk : kInvariant;
}

int cmd_figure(const Flags& f) {
  FigureOptions o;
  o.tag = f.tag;
  if (std::find(figure_tags().begin(), figure_tags().end(), o.tag) == figure_tags().end()) {
    throw ConfigError("tag", "unknown figure '" + o.tag + "' (expected fig1, fig2, fig3 or fig4)");
  }
  o.scale = detail::wrap_parse("--scale", [&] { return parse_scale(f.scale); });
  o.samples = f.samples;
  o.master_seed = f.seed.value_or(1);
  o.workers = f.workers.value_or(1);
  if (f.prefactor) o.prefactor = detail::wrap_parse("--prefactor", [&] { return parse_prefactor_mode(*f.prefactor); });
  const std::string cal = out_path(f, "calibration.json");
  if (fs::exists(cal)) {
    try {
      o.setting = load_selected_setting(cal);
    } catch (const std::exception& e) {
      throw ConfigError("calibration.json", e.what());
    }
    o.setting_source = cal;
  } else if (figure_needs_calibration(o.tag)) {
    throw ConfigError("calibration.json", "no calibration report at '" + cal + "'; run `plateau calibrate --out " +
                                              f.out + "` first, since " + o.tag +
                                              " compares against the calibrated single-layer convention");
  }
  ensure_out(f.out);
  const auto t0 = Clock::now();
  const FigureReport rep = run_figure(o);
  const std::string csv = to_csv(rep.sweep.rows);
  write_text_file(out_path(f, o.tag + ".csv"), csv);
  write_text_file(out_path(f, o.tag + ".svg"), render_svg(rep.panels, rep.columns));
  nlohmann::json m = make_manifest(rep.config, "figure " + o.tag, seconds_since(t0), csv);
  m["scale"] = std::string(to_string(o.scale));
  m["setting_source"] = o.setting_source;
  m["analysis"] = rep.analysis;
  m["skipped_points"] = rep.sweep.skipped_points;
  m["notes"] = rep.sweep.notes;
  if (!rep.sweep.deep_c0.empty()) m["deep_c0"] = rep.sweep.deep_c0;
  write_text_file(out_path(f, o.tag + ".manifest.json"), m.dump(2) + "\n");
  std::cout << "wrote " << out_path(f, o.tag + ".csv") << ", .svg and .manifest.json (" << rep.sweep.rows.size()
            << " rows)\n";
  return report_violations(rep.sweep.rows);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gradient-variance experiments for layered Pauli-rotation circuits"};
  app.require_subcommand(1);
  Flags f;

  auto common = [&](CLI::App* sub, bool with_config) {
    if (with_config) sub->add_option("--config", f.config, "Experiment config (JSON)");
    sub->add_option("--samples", f.samples, "Samples per point");
    sub->add_option("--seed", f.seed, "Master seed (unsigned 64-bit)");
    sub->add_option("--workers", f.workers, "Worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--out", f.out, "Output directory");
    sub->add_option("--prefactor", f.prefactor, "Single-layer prefactor: eq14 or figure1")
        ->check(CLI::IsMember({"eq14", "figure1"}));
  };

  auto* sample = app.add_subcommand("sample", "Run an ensemble sweep from a config");
  common(sample, true);
  auto* predict = app.add_subcommand("predict", "Closed-form predictions over a config grid");
  common(predict, true);
  auto* calibrate = app.add_subcommand("calibrate", "Search the single-layer convention grid");
  common(calibrate, false);
  auto* verify = app.add_subcommand("verify", "Run the invariant suites");
  verify->add_option("--level", f.level, "fast or full")->check(CLI::IsMember({"fast", "full"}));
  verify->add_option("--seed", f.seed, "Seed for randomized checks");
  verify->add_option("--workers", f.workers, "Worker threads")->check(CLI::PositiveNumber);
  auto* figure = app.add_subcommand("figure", "Reproduce one figure");
  figure->add_option("tag", f.tag, "fig1, fig2, fig3 or fig4")->required();
  common(figure, false);
  figure->add_option("--scale", f.scale, "desk or paper")->check(CLI::IsMember({"desk", "paper"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (*sample) return cmd_sample(f);
    if (*predict) return cmd_predict(f);
    if (*calibrate) return cmd_calibrate(f);
    if (*verify) return cmd_verify(f);
    if (*figure) return cmd_figure(f);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInvariant;
  }
  return kConfig;
}
