#pragma once

// Experiment configs, sweeps and the figure drivers.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "plateau/analytics.hpp"
#include "plateau/calibration.hpp"
#include "plateau/circuit.hpp"
#include "plateau/estimator.hpp"
#include "plateau/io.hpp"

namespace plateau {

/// Invalid configuration; `field` is a dotted path into the config document.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& message)
      : std::runtime_error(field + ": " + message), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

inline constexpr std::string_view kConfigSchema = "plateau.experiment/1";
inline constexpr std::uint64_t kPruneStream = 1ULL << 63;
inline constexpr std::size_t kMaxQubits = 24;

struct SweepAxes {
  std::vector<std::size_t> n;
  std::vector<std::size_t> l;
  std::vector<std::size_t> s;
  std::vector<double> prune_fraction;
  std::vector<std::size_t> support;  // observable Z on qubits [0, m)
};

struct ExperimentConfig {
  std::string tag = "sample";
  std::size_t n = 4;
  std::size_t l = 1;
  std::size_t s = 1;
  Setting setting;
  double prune_fraction = 0.0;
  std::string observable = "global_z";  // "global_z", "z_prefix:m" or a Pauli string such as "ZZII"
  std::vector<KMode> k_modes{KMode::random_effective()};
  std::size_t n_samples = 1000;
  std::uint64_t master_seed = 1;
  std::size_t workers = 1;
  PrefactorMode prefactor = PrefactorMode::figure1;
  std::optional<double> deep_c0;
  std::optional<SweepAxes> sweep;
};

// ---------------------------------------------------------------------------
// JSON

namespace detail {

template <class T>
T get_field(const nlohmann::json& j, const std::string& key, const std::string& path) {
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + key, std::string("wrong type (") + e.what() + ")");
  }
}

template <class T>
std::vector<T> get_axis(const nlohmann::json& j, const std::string& key, const std::string& path) {
  if (!j.contains(key)) return {};
  const auto& a = j.at(key);
  if (!a.is_array()) throw ConfigError(path + key, "sweep axis must be an array");
  if (a.empty()) throw ConfigError(path + key, "sweep axis must be non-empty");
  std::vector<T> out;
  for (std::size_t i = 0; i < a.size(); ++i) {
    try {
      out.push_back(a[i].get<T>());
    } catch (const nlohmann::json::exception&) {
      throw ConfigError(path + key + "[" + std::to_string(i) + "]", "wrong element type");
    }
  }
  return out;
}

template <class F>
auto wrap_parse(const std::string& field, F&& f) {
  try {
    return f();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(field, e.what());
  }
}

}  // namespace detail

inline nlohmann::json to_json(const ExperimentConfig& c) {
  using nlohmann::json;
  json j;
  j["schema"] = std::string(kConfigSchema);
  j["tag"] = c.tag;
  j["circuit"] = {{"n", c.n},
                  {"l", c.l},
                  {"s", c.s},
                  {"entangler", std::string(to_string(c.setting.entangler))},
                  {"generator_policy", std::string(to_string(c.setting.policy))},
                  {"init_kind", std::string(to_string(c.setting.init))},
                  {"theta_dist", "uniform_0_2pi"},
                  {"prune_fraction", c.prune_fraction}};
  j["observable"] = c.observable;
  json km = json::array();
  for (const auto& k : c.k_modes) km.push_back(k.str());
  j["k_mode"] = km;
  j["n_samples"] = c.n_samples;
  j["master_seed"] = c.master_seed;
  j["workers"] = c.workers;
  j["prefactor_mode"] = std::string(to_string(c.prefactor));
  if (c.deep_c0) j["deep_c0"] = *c.deep_c0;
  if (c.sweep) {
    json sw = json::object();
    if (!c.sweep->n.empty()) sw["n"] = c.sweep->n;
    if (!c.sweep->l.empty()) sw["l"] = c.sweep->l;
    if (!c.sweep->s.empty()) sw["s"] = c.sweep->s;
    if (!c.sweep->prune_fraction.empty()) sw["prune_fraction"] = c.sweep->prune_fraction;
    if (!c.sweep->support.empty()) sw["support"] = c.sweep->support;
    j["sweep"] = sw;
  }
  return j;
}

/// Hash of the config with the worker count removed (workers never change results).
inline std::string config_hash(const ExperimentConfig& c) {
  nlohmann::json j = to_json(c);
  j.erase("workers");
  return hex64(fnv1a64(j.dump()));
}

inline void validate(const ExperimentConfig& c);

inline ExperimentConfig parse_config(const nlohmann::json& j) {
  using detail::get_field;
  if (!j.is_object()) throw ConfigError("<root>", "config must be a JSON object");
  ExperimentConfig c;
  if (!j.contains("schema")) throw ConfigError("schema", "missing; expected \"" + std::string(kConfigSchema) + "\"");
  if (get_field<std::string>(j, "schema", "") != kConfigSchema) {
    throw ConfigError("schema", "unsupported schema; expected \"" + std::string(kConfigSchema) + "\"");
  }
  static const std::set<std::string> known{"schema",   "tag",     "circuit",        "observable", "k_mode",
                                           "n_samples", "master_seed", "workers", "prefactor_mode", "deep_c0",
                                           "sweep"};
  for (const auto& [k, v] : j.items()) {
    if (!known.count(k)) throw ConfigError(k, "unknown field");
  }
  if (j.contains("tag")) c.tag = get_field<std::string>(j, "tag", "");
  if (c.tag.empty() || c.tag.find_first_of("/\\,\"\n") != std::string::npos) {
    throw ConfigError("tag", "must be a non-empty file-name-safe string");
  }
  if (j.contains("circuit")) {
    const auto& cj = j.at("circuit");
    if (!cj.is_object()) throw ConfigError("circuit", "must be an object");
    static const std::set<std::string> ck{"n", "l", "s", "entangler", "generator_policy", "init_kind", "theta_dist",
                                          "prune_fraction"};
    for (const auto& [k, v] : cj.items()) {
      if (!ck.count(k)) throw ConfigError("circuit." + k, "unknown field");
    }
    if (cj.contains("n")) c.n = get_field<std::size_t>(cj, "n", "circuit.");
    if (cj.contains("l")) c.l = get_field<std::size_t>(cj, "l", "circuit.");
    if (cj.contains("s")) c.s = get_field<std::size_t>(cj, "s", "circuit.");
    if (cj.contains("entangler")) {
      const auto v = get_field<std::string>(cj, "entangler", "circuit.");
      c.setting.entangler = detail::wrap_parse("circuit.entangler", [&] { return parse_entangler_kind(v); });
    }
    if (cj.contains("generator_policy")) {
      const auto v = get_field<std::string>(cj, "generator_policy", "circuit.");
      c.setting.policy = detail::wrap_parse("circuit.generator_policy", [&] { return parse_generator_policy(v); });
    }
    if (cj.contains("init_kind")) {
      const auto v = get_field<std::string>(cj, "init_kind", "circuit.");
      c.setting.init = detail::wrap_parse("circuit.init_kind", [&] { return parse_init_kind(v); });
    }
    if (cj.contains("theta_dist") && get_field<std::string>(cj, "theta_dist", "circuit.") != "uniform_0_2pi") {
      throw ConfigError("circuit.theta_dist", "only uniform_0_2pi is supported");
    }
    if (cj.contains("prune_fraction")) c.prune_fraction = get_field<double>(cj, "prune_fraction", "circuit.");
  }
  if (j.contains("observable")) c.observable = get_field<std::string>(j, "observable", "");
  if (j.contains("k_mode")) {
    const auto& kj = j.at("k_mode");
    std::vector<std::string> names;
    if (kj.is_string()) {
      names.push_back(kj.get<std::string>());
    } else if (kj.is_array() && !kj.empty()) {
      names = detail::get_axis<std::string>(j, "k_mode", "");
    } else {
      throw ConfigError("k_mode", "must be a string or a non-empty array of strings");
    }
    c.k_modes.clear();
    for (const auto& name : names) c.k_modes.push_back(detail::wrap_parse("k_mode", [&] { return KMode::parse(name); }));
  }
  if (j.contains("n_samples")) c.n_samples = get_field<std::size_t>(j, "n_samples", "");
  if (j.contains("master_seed")) c.master_seed = get_field<std::uint64_t>(j, "master_seed", "");
  if (j.contains("workers")) c.workers = get_field<std::size_t>(j, "workers", "");
  if (j.contains("prefactor_mode")) {
    const auto v = get_field<std::string>(j, "prefactor_mode", "");
    c.prefactor = detail::wrap_parse("prefactor_mode", [&] { return parse_prefactor_mode(v); });
  }
  if (j.contains("deep_c0")) c.deep_c0 = get_field<double>(j, "deep_c0", "");
  if (j.contains("sweep")) {
    const auto& sj = j.at("sweep");
    if (!sj.is_object()) throw ConfigError("sweep", "must be an object");
    static const std::set<std::string> sk{"n", "l", "s", "prune_fraction", "support"};
    for (const auto& [k, v] : sj.items()) {
      if (!sk.count(k)) throw ConfigError("sweep." + k, "unknown axis");
    }
    SweepAxes ax;
    ax.n = detail::get_axis<std::size_t>(sj, "n", "sweep.");
    ax.l = detail::get_axis<std::size_t>(sj, "l", "sweep.");
    ax.s = detail::get_axis<std::size_t>(sj, "s", "sweep.");
    ax.prune_fraction = detail::get_axis<double>(sj, "prune_fraction", "sweep.");
    ax.support = detail::get_axis<std::size_t>(sj, "support", "sweep.");
    if (ax.n.empty() && ax.l.empty() && ax.s.empty() && ax.prune_fraction.empty() && ax.support.empty()) {
      throw ConfigError("sweep", "must name at least one axis");
    }
    c.sweep = ax;
  }
  validate(c);
  return c;
}

// ---------------------------------------------------------------------------
// Sweep points

struct SweepPoint {
  std::size_t n = 0;
  std::size_t l = 1;
  std::size_t s = 1;
  double prune_fraction = 0.0;
  std::optional<std::size_t> support;
};

/// Cartesian product in the order n, s, l, prune_fraction, support. Points with s
/// not dividing n, or support wider than n, are left out.
inline std::vector<SweepPoint> expand_sweep(const ExperimentConfig& c, std::size_t* skipped = nullptr) {
  const SweepAxes ax = c.sweep.value_or(SweepAxes{});
  const auto ns = ax.n.empty() ? std::vector<std::size_t>{c.n} : ax.n;
  const auto ls = ax.l.empty() ? std::vector<std::size_t>{c.l} : ax.l;
  const auto ss = ax.s.empty() ? std::vector<std::size_t>{c.s} : ax.s;
  const auto ps = ax.prune_fraction.empty() ? std::vector<double>{c.prune_fraction} : ax.prune_fraction;
  std::vector<std::optional<std::size_t>> ms;
  if (ax.support.empty()) ms.push_back(std::nullopt);
  for (auto m : ax.support) ms.push_back(m);
  std::vector<SweepPoint> out;
  std::size_t skip = 0;
  for (auto n : ns) {
    for (auto s : ss) {
      for (auto l : ls) {
        for (auto p : ps) {
          for (auto m : ms) {
            if (s == 0 || n % s != 0 || (m && *m > n)) {
              ++skip;
              continue;
            }
            out.push_back({n, l, s, p, m});
          }
        }
      }
    }
  }
  if (skipped) *skipped = skip;
  return out;
}

inline PauliString resolve_observable(const ExperimentConfig& c, const SweepPoint& p) {
  if (p.support) return z_prefix(p.n, *p.support);
  const std::string& o = c.observable;
  if (o == "global_z") return global_z(p.n);
  if (o.rfind("z_prefix:", 0) == 0) {
    const std::size_t m = detail::wrap_parse("observable", [&] { return static_cast<std::size_t>(std::stoull(o.substr(9))); });
    if (m > p.n) throw ConfigError("observable", "support " + std::to_string(m) + " exceeds n = " + std::to_string(p.n));
    return z_prefix(p.n, m);
  }
  const PauliString ps = detail::wrap_parse("observable", [&] { return PauliString::parse(o); });
  if (ps.n_sites() != p.n) {
    throw ConfigError("observable", "has " + std::to_string(ps.n_sites()) + " letters but n = " + std::to_string(p.n));
  }
  if (!ps.hermitian()) throw ConfigError("observable", "must carry a real sign (+ or -)");
  return ps;
}

inline void validate(const ExperimentConfig& c) {
  if (c.n_samples < 2) throw ConfigError("n_samples", "must be at least 2");
  if (c.workers == 0) throw ConfigError("workers", "must be positive");
  if (c.k_modes.empty()) throw ConfigError("k_mode", "must name at least one mode");
  if (!(c.prune_fraction >= 0.0 && c.prune_fraction <= 1.0)) throw ConfigError("circuit.prune_fraction", "must be in [0, 1]");
  if (c.deep_c0 && !(*c.deep_c0 >= 0.0)) throw ConfigError("deep_c0", "must be non-negative");
  if (c.sweep) {
    for (double p : c.sweep->prune_fraction) {
      if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("sweep.prune_fraction", "values must be in [0, 1]");
    }
  }
  const auto pts = expand_sweep(c);
  if (pts.empty()) throw ConfigError(c.sweep ? "sweep" : "circuit.s", "no valid (n, s) combination (s must divide n)");
  for (const auto& p : pts) {
    const std::string where = c.sweep ? "sweep" : "circuit";
    if (p.n == 0 || p.n > kMaxQubits) throw ConfigError(where + ".n", "must be in 1.." + std::to_string(kMaxQubits));
    if (p.l == 0) throw ConfigError(where + ".l", "must be positive");
    if (c.setting.policy == GeneratorPolicy::xyz_only && p.s != 1) {
      throw ConfigError("circuit.generator_policy", "xyz_only requires s = 1");
    }
    if (p.l == 1 && p.s > 4) {
      throw ConfigError(where + ".s", "single-layer predictions are tabulated only for s <= 4");
    }
    (void)resolve_observable(c, p);
    for (const auto& k : c.k_modes) {
      if (k.kind == KMode::Kind::fixed_slot && k.slot >= p.n * p.l / p.s) {
        throw ConfigError("k_mode", "fixed slot " + std::to_string(k.slot) + " is out of range");
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Running sweeps

inline std::string point_tag(const std::string& tag, const SweepPoint& p, const ExperimentConfig& c) {
  std::string out = tag;
  std::string extra;
  const bool prune_axis = c.sweep && !c.sweep->prune_fraction.empty();
  if (p.support) extra += "m=" + std::to_string(*p.support);
  if (prune_axis || p.prune_fraction > 0.0) {
    if (!extra.empty()) extra += ";";
    extra += "p=" + format_double(p.prune_fraction);
  }
  if (!extra.empty()) out += "[" + extra + "]";
  return out;
}

inline CircuitSpec build_spec(const ExperimentConfig& c, const SweepPoint& p, std::size_t point_index) {
  CircuitSpec spec = CircuitSpec::make(p.n, p.l, p.s, c.setting.entangler, c.setting.policy, c.setting.init);
  if (p.prune_fraction > 0.0) {
    RandomStream stream(c.master_seed, kPruneStream + point_index);
    spec = prune(spec, p.prune_fraction, stream);
  }
  return spec;
}

/// Single-layer prediction for the chosen k-mode: random_all keeps the (s N/n)
/// prefactor, the other modes condition on an effective slot and drop it.
inline double single_layer_prediction(std::size_t n, std::size_t s, std::size_t ne, const KMode& k, PrefactorMode mode) {
  if (ne == 0) return 0.0;
  const double v = predict_single_layer_variance(n, s, ne, mode);
  if (k.kind == KMode::Kind::random_all) return v;
  return v * static_cast<double>(n) / static_cast<double>(s * ne);
}

/// (9/32)^n s N/(n l): the deep-circuit law with unit constant.
inline double deep_basis(std::size_t n, std::size_t s, std::size_t ne, std::size_t l) {
  return predict_deep_variance(n, s, ne, l, 1.0);
}

struct SweepResult {
  std::vector<ResultRow> rows;
  std::size_t skipped_points = 0;
  std::vector<std::string> notes;
  std::map<std::string, double> deep_c0;  // per k-mode, fitted or supplied
};

inline constexpr std::string_view kDeepPrefactor = "deep_fit";

/// Fits c0 per k-mode over deep rows (l > 1) unless the config supplies it, then
/// fills their predicted column.
inline void apply_deep_predictions(const ExperimentConfig& c, SweepResult& res) {
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> per_mode;
  for (const auto& r : res.rows) {
    if (r.l == 1) continue;
    auto& xy = per_mode[r.k_mode];
    xy.first.push_back(deep_basis(r.n, r.s, r.n_eff, r.l));
    xy.second.push_back(r.var_est);
  }
  for (auto& [mode, xy] : per_mode) {
    double c0 = 0.0;
    if (c.deep_c0) {
      c0 = *c.deep_c0;
    } else if (std::any_of(xy.first.begin(), xy.first.end(), [](double x) { return x > 0.0; })) {
      if (xy.first.size() >= 2) {
        c0 = fit_proportional(xy.first, xy.second).slope;
      } else {
        c0 = xy.second[0] / xy.first[0];
      }
    }
    c0 = std::max(c0, 0.0);
    res.deep_c0[mode] = c0;
  }
  for (auto& r : res.rows) {
    if (r.l == 1) continue;
    r.predicted = res.deep_c0[r.k_mode] * deep_basis(r.n, r.s, r.n_eff, r.l);
    r.prefactor_mode = std::string(kDeepPrefactor);
  }
}

/// Runs every sweep point and k-mode. When every slot is active and effective,
/// random_all and random_effective draw identical samples, so one ensemble
/// serves both rows.
inline SweepResult run_sweep(const ExperimentConfig& c) {
  validate(c);
  SweepResult res;
  const auto points = expand_sweep(c, &res.skipped_points);
  for (std::size_t pi = 0; pi < points.size(); ++pi) {
    const SweepPoint& p = points[pi];
    const auto spec = std::make_shared<const CircuitSpec>(build_spec(c, p, pi));
    const PauliString obs = resolve_observable(c, p);
    const std::size_t ne = n_eff(*spec, obs);
    const bool full = ne == spec->slot_count();
    std::optional<std::vector<double>> shared;
    for (const KMode& k : c.k_modes) {
      ResultRow row;
      row.figure_tag = point_tag(c.tag, p, c);
      row.n = p.n;
      row.s = p.s;
      row.l = p.l;
      row.n_eff = ne;
      row.k_mode = k.str();
      row.n_samples = c.n_samples;
      row.master_seed = c.master_seed;
      row.prefactor_mode = std::string(to_string(c.prefactor));
      row.setting_id = c.setting.id();
      if (k.kind != KMode::Kind::random_all && ne == 0) {
        res.notes.push_back(row.figure_tag + " n=" + std::to_string(p.n) + " l=" + std::to_string(p.l) +
                            " s=" + std::to_string(p.s) + ": no effective parameters, " + k.str() + " row omitted");
        continue;
      }
      if (k.kind == KMode::Kind::fixed_slot && !spec->is_active(k.slot)) {
        res.notes.push_back(row.figure_tag + ": fixed slot " + std::to_string(k.slot) + " pruned, row omitted");
        continue;
      }
      std::vector<double> grads;
      const bool shareable = full && k.kind != KMode::Kind::fixed_slot;
      if (shareable && shared) {
        grads = *shared;
      } else {
        grads = sample_gradients(spec, obs, k, c.n_samples, c.master_seed, c.workers);
        if (shareable) shared = grads;
      }
      const VarianceEstimate est = summarize(grads, c.master_seed, k, ne, c.workers);
      row.var_est = est.variance;
      row.ci_low = est.ci_low;
      row.ci_high = est.ci_high;
      row.predicted = p.l == 1 ? single_layer_prediction(p.n, p.s, ne, k, c.prefactor) : 0.0;
      res.rows.push_back(std::move(row));
    }
  }
  apply_deep_predictions(c, res);
  return res;
}

/// Prediction-only rows over the same grid; single-layer points carry both
/// prefactor modes. Deep points need `deep_c0`.
inline std::vector<ResultRow> predict_rows(const ExperimentConfig& c) {
  validate(c);
  std::vector<ResultRow> rows;
  const auto points = expand_sweep(c);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t pi = 0; pi < points.size(); ++pi) {
    const SweepPoint& p = points[pi];
    const CircuitSpec spec = build_spec(c, p, pi);
    const PauliString obs = resolve_observable(c, p);
    const std::size_t ne = n_eff(spec, obs);
    for (const KMode& k : c.k_modes) {
      ResultRow row;
      row.figure_tag = point_tag(c.tag, p, c);
      row.n = p.n;
      row.s = p.s;
      row.l = p.l;
      row.n_eff = ne;
      row.k_mode = k.str();
      row.n_samples = 0;
      row.master_seed = c.master_seed;
      row.var_est = row.ci_low = row.ci_high = nan;
      row.setting_id = c.setting.id();
      if (p.l == 1) {
        for (auto mode : {PrefactorMode::eq14, PrefactorMode::figure1}) {
          row.prefactor_mode = std::string(to_string(mode));
          row.predicted = single_layer_prediction(p.n, p.s, ne, k, mode);
          rows.push_back(row);
        }
      } else {
        if (!c.deep_c0) throw ConfigError("deep_c0", "deep-circuit predictions need a fitted constant");
        row.prefactor_mode = std::string(kDeepPrefactor);
        row.predicted = *c.deep_c0 * deep_basis(p.n, p.s, ne, p.l);
        rows.push_back(row);
      }
    }
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Figures

enum class Scale { desk, paper };

inline Scale parse_scale(std::string_view s) {
  if (s == "desk") return Scale::desk;
  if (s == "paper") return Scale::paper;
  throw std::invalid_argument("unknown scale '" + std::string(s) + "' (expected desk or paper)");
}

inline std::string_view to_string(Scale s) { return s == Scale::desk ? "desk" : "paper"; }

struct FigureOptions {
  std::string tag;
  Scale scale = Scale::desk;
  std::optional<std::size_t> samples;
  std::uint64_t master_seed = 1;
  std::size_t workers = 1;
  std::optional<PrefactorMode> prefactor;
  Setting setting;
  std::string setting_source = "default";
};

inline const std::vector<std::string>& figure_tags() {
  static const std::vector<std::string> tags{"fig1", "fig2", "fig3", "fig4"};
  return tags;
}

inline bool figure_needs_calibration(const std::string& tag) { return tag == "fig1" || tag == "fig2"; }

inline std::vector<std::size_t> range(std::size_t lo, std::size_t hi, std::size_t step = 1) {
  std::vector<std::size_t> v;
  for (std::size_t x = lo; x <= hi; x += step) v.push_back(x);
  return v;
}

/// Deep figures need entangling layers; a calibrated `none` entangler falls back to cz_brick.
inline Setting figure_setting(const FigureOptions& o) {
  Setting st = o.setting;
  if ((o.tag == "fig3" || o.tag == "fig4") && st.entangler == EntanglerKind::none) st.entangler = EntanglerKind::cz_brick;
  return st;
}

inline ExperimentConfig figure_config(const FigureOptions& o) {
  ExperimentConfig c;
  c.tag = o.tag;
  c.setting = figure_setting(o);
  c.master_seed = o.master_seed;
  c.workers = o.workers;
  c.observable = "global_z";
  SweepAxes ax;
  const bool paper = o.scale == Scale::paper;
  if (o.tag == "fig1") {
    c.l = 1;
    ax.n = range(2, paper ? 12 : 10);
    ax.s = {1, 2, 3, 4};
    c.k_modes = {KMode::random_effective()};
    c.n_samples = 20000;
    c.prefactor = PrefactorMode::figure1;
  } else if (o.tag == "fig2") {
    c.n = 18;
    c.l = 1;
    c.s = 1;
    ax.support = range(1, 18);
    c.k_modes = {KMode::random_effective(), KMode::random_all()};
    c.n_samples = 10000;
    c.prefactor = PrefactorMode::eq14;
  } else if (o.tag == "fig3") {
    c.s = 1;
    ax.n = range(2, paper ? 12 : 10, 2);
    ax.l = paper ? std::vector<std::size_t>{5, 10, 25, 50, 75, 100, 125, 150}
                 : std::vector<std::size_t>{5, 10, 25, 50, 100, 150};
    c.k_modes = {KMode::random_effective(), KMode::random_all()};
    c.n_samples = 10000;
  } else if (o.tag == "fig4") {
    c.n = paper ? 12 : 8;
    ax.s = paper ? std::vector<std::size_t>{1, 2, 3, 4, 6} : std::vector<std::size_t>{1, 2, 4};
    ax.l = paper ? std::vector<std::size_t>{50, 100, 150} : std::vector<std::size_t>{50, 100};
    ax.prune_fraction = {0.0, 0.25, 0.5, 0.75, 1.0};
    c.k_modes = {KMode::random_all()};
    c.n_samples = 10000;
  } else {
    throw ConfigError("tag", "unknown figure '" + o.tag + "' (expected fig1, fig2, fig3 or fig4)");
  }
  if (o.samples) c.n_samples = *o.samples;
  if (o.prefactor) c.prefactor = *o.prefactor;
  c.sweep = ax;
  validate(c);
  return c;
}

struct FigureReport {
  ExperimentConfig config;
  SweepResult sweep;
  nlohmann::json analysis;
  std::vector<SvgPanel> panels;
  std::size_t columns = 2;
  bool invariants_ok = true;
};

namespace detail {

inline std::vector<const ResultRow*> select(const std::vector<ResultRow>& rows,
                                            const std::function<bool(const ResultRow&)>& pred) {
  std::vector<const ResultRow*> out;
  for (const auto& r : rows) {
    if (pred(r)) out.push_back(&r);
  }
  return out;
}

inline SvgPoint pt(double x, const ResultRow& r) { return {x, r.var_est, r.ci_low, r.ci_high}; }

/// Support m encoded in a fig2 row tag, e.g. "fig2[m=5]".
inline std::size_t support_of(const std::string& tag) {
  const auto pos = tag.find("m=");
  if (pos == std::string::npos) throw std::invalid_argument("row tag '" + tag + "' carries no support");
  return static_cast<std::size_t>(std::stoull(tag.substr(pos + 2)));
}

inline std::vector<std::string> k_modes_in(const std::vector<ResultRow>& rows) {
  std::vector<std::string> out;
  for (const auto& r : rows) {
    if (std::find(out.begin(), out.end(), r.k_mode) == out.end()) out.push_back(r.k_mode);
  }
  return out;
}

}  // namespace detail

// Analyses read only result rows, so they can be re-run on a parsed CSV.

inline nlohmann::json analyze_fig1(const std::vector<ResultRow>& rows, std::vector<SvgPanel>* panels = nullptr) {
  nlohmann::json a;
  a["per_s"] = nlohmann::json::array();
  for (std::size_t s : {1u, 2u, 3u, 4u}) {
    const auto rs = detail::select(rows, [&](const ResultRow& r) { return r.s == s; });
    if (rs.empty()) continue;
    std::size_t within = 0;
    SvgPanel p;
    p.title = "s = " + std::to_string(s);
    p.xlabel = "n";
    p.ylabel = "Var";
    SvgSeries mc{"simulation", {}, true, false, false, 0};
    SvgSeries th{"closed form", {}, false, true, true, 1};
    for (const auto* r : rs) {
      const double se = 0.5 * (r->ci_high - r->ci_low) / 1.96;
      if (std::abs(r->var_est - r->predicted) <= std::max(0.15 * r->predicted, 3.0 * se)) ++within;
      mc.points.push_back(detail::pt(static_cast<double>(r->n), *r));
      th.points.push_back({static_cast<double>(r->n), r->predicted});
    }
    p.series = {mc, th};
    if (panels) panels->push_back(p);
    a["per_s"].push_back({{"s", s}, {"points", rs.size()}, {"within_tolerance", within}});
  }
  return a;
}

inline nlohmann::json analyze_fig2(const std::vector<ResultRow>& rows, std::vector<SvgPanel>* panels = nullptr) {
  nlohmann::json a = nlohmann::json::object();
  SvgPanel p;
  p.title = "n = 18, s = 1, single layer";
  p.xlabel = "observable support m";
  p.ylabel = "Var";
  std::size_t color = 0;
  for (const auto& mode : detail::k_modes_in(rows)) {
    auto rs = detail::select(rows, [&](const ResultRow& r) { return r.k_mode == mode; });
    std::sort(rs.begin(), rs.end(),
              [](auto* x, auto* y) { return detail::support_of(x->figure_tag) < detail::support_of(y->figure_tag); });
    bool decreasing = true;
    std::vector<double> xs, ys;
    SvgSeries mc{mode, {}, true, true, false, color};
    SvgSeries th{mode + " predicted", {}, false, true, true, color};
    nlohmann::json pts = nlohmann::json::array();
    for (std::size_t i = 0; i < rs.size(); ++i) {
      const double m = static_cast<double>(detail::support_of(rs[i]->figure_tag));
      if (i && !(rs[i]->var_est < rs[i - 1]->var_est)) decreasing = false;
      if (rs[i]->var_est > 0.0) {
        xs.push_back(m);
        ys.push_back(rs[i]->var_est);
      }
      mc.points.push_back(detail::pt(m, *rs[i]));
      th.points.push_back({m, rs[i]->predicted});
      pts.push_back({{"m", m}, {"n_eff", rs[i]->n_eff}, {"var", rs[i]->var_est}});
    }
    ++color;
    p.series.push_back(mc);
    p.series.push_back(th);
    nlohmann::json e{{"strictly_decreasing", decreasing}, {"points", pts}};
    if (xs.size() >= 3 && xs.size() == rs.size()) {
      const auto f = fit_exponential(xs, ys);
      e["fit"] = {{"base", f.base}, {"amplitude", f.amplitude}, {"r2", f.r2}};
    } else {
      e["fit"] = nullptr;
    }
    a[mode] = e;
  }
  if (panels) panels->push_back(p);
  return a;
}

inline constexpr double kDeepBase = 9.0 / 32.0;

inline nlohmann::json analyze_fig3(const std::vector<ResultRow>& rows, std::vector<SvgPanel>* panels = nullptr) {
  nlohmann::json a;
  nlohmann::json per_mode = nlohmann::json::object();
  std::string best;
  double best_err = std::numeric_limits<double>::infinity();
  SvgPanel left{"variance vs depth", "l", "Var", true, {}};
  SvgPanel right{"variance at the deepest l vs n", "n", "Var", true, {}};
  std::size_t color = 0;
  for (const auto& mode : detail::k_modes_in(rows)) {
    const auto rs = detail::select(rows, [&](const ResultRow& r) { return r.k_mode == mode; });
    std::set<std::size_t> ns, ls;
    for (const auto* r : rs) {
      ns.insert(r->n);
      ls.insert(r->l);
    }
    if (ls.size() < 2) continue;
    const std::size_t lmax = *ls.rbegin();
    const std::size_t lprev = *std::next(ls.rbegin());
    auto at = [&](std::size_t n, std::size_t l) -> const ResultRow* {
      for (const auto* r : rs) {
        if (r->n == n && r->l == l) return r;
      }
      return nullptr;
    };
    nlohmann::json sat = nlohmann::json::array();
    bool all_sat = true;
    std::vector<double> xs, ys;
    SvgSeries deep{mode, {}, true, false, false, color};
    for (std::size_t n : ns) {
      const ResultRow* hi = at(n, lmax);
      const ResultRow* lo = at(n, lprev);
      if (!hi || !lo) continue;
      const double rel = lo->var_est > 0.0 ? std::abs(hi->var_est - lo->var_est) / lo->var_est
                                            : std::numeric_limits<double>::infinity();
      const bool ok = rel <= 0.10;
      all_sat = all_sat && ok;
      sat.push_back({{"n", n}, {"l_ref", lprev}, {"l", lmax}, {"relative_change", rel}, {"within_10pct", ok}});
      if (hi->var_est > 0.0) {
        xs.push_back(static_cast<double>(n));
        ys.push_back(hi->var_est);
      }
      deep.points.push_back(detail::pt(static_cast<double>(n), *hi));
      if (mode == detail::k_modes_in(rows).front()) {
        SvgSeries s{"n = " + std::to_string(n), {}, true, true, false, (n / 2) % 8};
        for (std::size_t l : ls) {
          if (const ResultRow* r = at(n, l)) s.points.push_back(detail::pt(static_cast<double>(l), *r));
        }
        left.series.push_back(s);
      }
    }
    nlohmann::json e{{"saturation", sat}, {"saturated", all_sat}, {"l_fit", lmax}};
    if (xs.size() >= 3) {
      const auto f = fit_exponential(xs, ys);
      const double err = std::abs(std::log(f.base / kDeepBase));
      e["fit"] = {{"base", f.base},
                  {"ln_slope", f.slope},
                  {"amplitude", f.amplitude},
                  {"r2", f.r2},
                  {"relative_base_error", std::abs(f.base - kDeepBase) / kDeepBase}};
      if (err < best_err) {
        best_err = err;
        best = mode;
      }
      SvgSeries line{mode + " fit", {}, false, true, true, color};
      for (double x : xs) line.points.push_back({x, f.amplitude * std::pow(f.base, x)});
      right.series.push_back(line);
    } else {
      e["fit"] = nullptr;
    }
    right.series.push_back(deep);
    per_mode[mode] = e;
    ++color;
  }
  SvgSeries ref{"(9/32)^n through first point", {}, false, true, true, 7};
  if (!right.series.empty() && !right.series.back().points.empty()) {
    const auto& first = right.series.back().points.front();
    for (const auto& q : right.series.back().points) {
      ref.points.push_back({q.x, first.y * std::pow(kDeepBase, q.x - first.x)});
    }
    right.series.push_back(ref);
  }
  a["k_modes"] = per_mode;
  a["better_matching_k_mode"] = best.empty() ? nlohmann::json(nullptr) : nlohmann::json(best);
  if (panels) {
    panels->push_back(left);
    panels->push_back(right);
  }
  return a;
}

inline nlohmann::json analyze_fig4(const std::vector<ResultRow>& rows, std::vector<SvgPanel>* panels = nullptr) {
  nlohmann::json a;
  std::vector<double> xs, ys;
  bool zero_exact = true;
  bool has_zero = false;
  SvgPanel p{"variance vs s N_eff / l", "s N_eff / l", "Var", false, {}};
  std::map<std::size_t, SvgSeries> by_s;
  for (const auto& r : rows) {
    const double x = static_cast<double>(r.s * r.n_eff) / static_cast<double>(r.l);
    xs.push_back(x);
    ys.push_back(r.var_est);
    if (r.n_eff == 0) {
      has_zero = true;
      zero_exact = zero_exact && r.var_est == 0.0;
    }
    auto& s = by_s[r.s];
    s.name = "s = " + std::to_string(r.s);
    s.color = by_s.size() - 1;
    s.points.push_back(detail::pt(x, r));
  }
  for (auto& [s, series] : by_s) p.series.push_back(series);
  if (xs.size() >= 2) {
    const auto f = fit_proportional(xs, ys);
    a["fit"] = {{"slope", f.slope}, {"r2", f.r2}, {"points", xs.size()}};
    SvgSeries line{"zero-intercept fit", {}, false, true, true, 7};
    const double xmax = *std::max_element(xs.begin(), xs.end());
    line.points = {{0.0, 0.0}, {xmax, f.slope * xmax}};
    p.series.push_back(line);
  } else {
    a["fit"] = nullptr;
  }
  a["has_zero_point"] = has_zero;
  a["zero_point_exact"] = has_zero && zero_exact;
  // Points sharing (l, s N_eff) across different s.
  std::map<std::pair<std::size_t, std::size_t>, std::vector<const ResultRow*>> groups;
  for (const auto& r : rows) {
    if (r.n_eff) groups[{r.l, r.s * r.n_eff}].push_back(&r);
  }
  nlohmann::json coll = nlohmann::json::array();
  for (const auto& [key, g] : groups) {
    std::set<std::size_t> ss;
    for (const auto* r : g) ss.insert(r->s);
    if (ss.size() < 2) continue;
    double lo = -std::numeric_limits<double>::infinity(), hi = std::numeric_limits<double>::infinity();
    for (const auto* r : g) {
      lo = std::max(lo, r->ci_low);
      hi = std::min(hi, r->ci_high);
    }
    coll.push_back({{"l", key.first}, {"s_n_eff", key.second}, {"members", g.size()}, {"ci_overlap", lo <= hi}});
  }
  a["equal_s_n_eff_groups"] = coll;
  if (panels) panels->push_back(p);
  return a;
}

inline nlohmann::json analyze_figure(const std::string& tag, const std::vector<ResultRow>& rows,
                                     std::vector<SvgPanel>* panels = nullptr) {
  if (tag == "fig1") return analyze_fig1(rows, panels);
  if (tag == "fig2") return analyze_fig2(rows, panels);
  if (tag == "fig3") return analyze_fig3(rows, panels);
  if (tag == "fig4") return analyze_fig4(rows, panels);
  throw std::invalid_argument("unknown figure '" + tag + "'");
}

inline FigureReport run_figure(const FigureOptions& o) {
  FigureReport rep;
  rep.config = figure_config(o);
  rep.sweep = run_sweep(rep.config);
  if (!(rep.config.setting == o.setting)) {
    rep.sweep.notes.push_back("entangler 'none' replaced by cz_brick for deep circuits (" + o.setting.id() + " -> " +
                              rep.config.setting.id() + ")");
  }
  rep.analysis = analyze_figure(o.tag, rep.sweep.rows, &rep.panels);
  rep.columns = o.tag == "fig4" || o.tag == "fig2" ? 1 : 2;
  for (const auto& r : rep.sweep.rows) {
    if (!(r.var_est >= 0.0 && r.ci_low <= r.var_est && r.var_est <= r.ci_high && r.predicted >= 0.0)) {
      rep.invariants_ok = false;
    }
  }
  return rep;
}

/// Row invariants: non-negative variance inside its CI, non-negative prediction.
inline std::vector<std::string> row_invariant_violations(const std::vector<ResultRow>& rows) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (!(r.var_est >= 0.0)) out.push_back("row " + std::to_string(i) + ": negative variance");
    if (!(r.ci_low <= r.var_est && r.var_est <= r.ci_high)) out.push_back("row " + std::to_string(i) + ": CI excludes estimate");
    if (!(r.predicted >= 0.0)) out.push_back("row " + std::to_string(i) + ": negative prediction");
  }
  return out;
}

inline nlohmann::json make_manifest(const ExperimentConfig& c, const std::string& command, double wall_seconds,
                                    const std::string& csv_text) {
  nlohmann::json m;
  m["tool"] = "plateau";
  m["tool_version"] = std::string(kToolVersion);
  m["command"] = command;
  m["config"] = to_json(c);
  m["config_hash"] = config_hash(c);
  m["master_seed"] = c.master_seed;
  m["csv_fnv1a64"] = hex64(fnv1a64(csv_text));
  m["wall_time_seconds"] = wall_seconds;
  return m;
}

}  // namespace plateau
