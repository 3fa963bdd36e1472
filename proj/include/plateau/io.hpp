#pragma once

// Result rows, CSV round-trip, SVG plots and manifests.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace plateau {

inline constexpr std::string_view kToolVersion = "0.1.0";

struct ResultRow {
  std::string figure_tag;
  std::size_t n = 0;
  std::size_t s = 1;
  std::size_t l = 1;
  std::size_t n_eff = 0;
  std::string k_mode;
  std::size_t n_samples = 0;
  std::uint64_t master_seed = 0;
  double var_est = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double predicted = 0.0;
  std::string prefactor_mode;
  std::string setting_id;

  friend bool operator==(const ResultRow&, const ResultRow&) = default;
};

inline constexpr std::array<std::string_view, 14> kCsvColumns{
    "figure_tag", "n",       "s",      "l",         "N_eff",     "k_mode",         "n_samples",
    "master_seed", "var_est", "ci_low", "ci_high", "predicted", "prefactor_mode", "setting_id"};

/// Shortest representation that parses back to the same double.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::array<char, 64> buf{};
  const auto r = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), r.ptr);
}

inline double parse_double(std::string_view s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) {
    throw std::invalid_argument("bad floating-point field '" + std::string(s) + "'");
  }
  return v;
}

template <class T>
T parse_unsigned(std::string_view s) {
  T v{};
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) {
    throw std::invalid_argument("bad integer field '" + std::string(s) + "'");
  }
  return v;
}

inline void require_csv_safe(const std::string& field) {
  if (field.find_first_of(",\"\n\r") != std::string::npos) {
    throw std::invalid_argument("CSV text field contains a separator: '" + field + "'");
  }
}

inline std::string csv_header() {
  std::string h;
  for (std::size_t i = 0; i < kCsvColumns.size(); ++i) {
    if (i) h += ',';
    h += kCsvColumns[i];
  }
  return h;
}

inline std::string to_csv_line(const ResultRow& r) {
  require_csv_safe(r.figure_tag);
  require_csv_safe(r.k_mode);
  require_csv_safe(r.prefactor_mode);
  require_csv_safe(r.setting_id);
  std::string out;
  auto put = [&](const std::string& f) {
    if (!out.empty()) out += ',';
    out += f;
  };
  put(r.figure_tag);
  put(std::to_string(r.n));
  put(std::to_string(r.s));
  put(std::to_string(r.l));
  put(std::to_string(r.n_eff));
  put(r.k_mode);
  put(std::to_string(r.n_samples));
  put(std::to_string(r.master_seed));
  put(format_double(r.var_est));
  put(format_double(r.ci_low));
  put(format_double(r.ci_high));
  put(format_double(r.predicted));
  put(r.prefactor_mode);
  put(r.setting_id);
  return out;
}

inline std::string to_csv(const std::vector<ResultRow>& rows) {
  std::string out = csv_header() + "\n";
  for (const auto& r : rows) out += to_csv_line(r) + "\n";
  return out;
}

inline std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> f;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    f.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return f;
}

inline std::vector<ResultRow> parse_csv(std::string_view text) {
  std::vector<ResultRow> rows;
  std::size_t pos = 0;
  bool header = true;
  std::size_t line_no = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    if (header) {
      if (line != csv_header()) throw std::invalid_argument("CSV header does not match the result schema");
      header = false;
      continue;
    }
    const auto f = split_commas(line);
    if (f.size() != kCsvColumns.size()) {
      throw std::invalid_argument("CSV line " + std::to_string(line_no) + ": expected " +
                                  std::to_string(kCsvColumns.size()) + " fields");
    }
    ResultRow r;
    r.figure_tag = std::string(f[0]);
    r.n = parse_unsigned<std::size_t>(f[1]);
    r.s = parse_unsigned<std::size_t>(f[2]);
    r.l = parse_unsigned<std::size_t>(f[3]);
    r.n_eff = parse_unsigned<std::size_t>(f[4]);
    r.k_mode = std::string(f[5]);
    r.n_samples = parse_unsigned<std::size_t>(f[6]);
    r.master_seed = parse_unsigned<std::uint64_t>(f[7]);
    r.var_est = parse_double(f[8]);
    r.ci_low = parse_double(f[9]);
    r.ci_high = parse_double(f[10]);
    r.predicted = parse_double(f[11]);
    r.prefactor_mode = std::string(f[12]);
    r.setting_id = std::string(f[13]);
    rows.push_back(std::move(r));
  }
  if (header) throw std::invalid_argument("CSV is missing its header");
  return rows;
}

// ---------------------------------------------------------------------------
// Hashing

inline std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

// ---------------------------------------------------------------------------
// Files

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << content;
  if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------------------
// SVG

struct SvgPoint {
  double x = 0.0;
  double y = 0.0;
  double lo = std::numeric_limits<double>::quiet_NaN();  // error bar, optional
  double hi = std::numeric_limits<double>::quiet_NaN();
};

struct SvgSeries {
  std::string name;
  std::vector<SvgPoint> points;
  bool markers = true;
  bool line = false;
  bool dashed = false;
  std::size_t color = 0;  // palette index
};

struct SvgPanel {
  std::string title;
  std::string xlabel;
  std::string ylabel;
  bool log_y = true;
  std::vector<SvgSeries> series;
};

namespace detail {

inline constexpr std::array<const char*, 8> kPalette{"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                                    "#ff7f0e", "#17becf", "#8c564b", "#7f7f7f"};

inline std::string svg_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

inline std::string num(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << v;
  return os.str();
}

inline std::string tick_label(double v) {
  std::ostringstream os;
  os << std::setprecision(3) << v;
  return os.str();
}

}  // namespace detail

/// Panels laid out in a grid of `columns`. Non-positive y values are dropped on log axes.
inline std::string render_svg(const std::vector<SvgPanel>& panels, std::size_t columns = 2) {
  using detail::num;
  columns = std::max<std::size_t>(1, std::min(columns, panels.size()));
  const std::size_t rows = (panels.size() + columns - 1) / columns;
  const double pw = 460, ph = 340, ml = 70, mr = 150, mt = 36, mb = 48;
  const double width = pw * static_cast<double>(columns), height = ph * static_cast<double>(std::max<std::size_t>(rows, 1));
  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(width) << "\" height=\"" << num(height)
    << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (std::size_t pi = 0; pi < panels.size(); ++pi) {
    const SvgPanel& p = panels[pi];
    const double ox = pw * static_cast<double>(pi % columns), oy = ph * static_cast<double>(pi / columns);
    const double x0 = ox + ml, x1 = ox + pw - mr, y0 = oy + ph - mb, y1 = oy + mt;
    auto ty = [&](double y) { return p.log_y ? std::log10(y) : y; };
    auto usable = [&](double y) { return std::isfinite(y) && (!p.log_y || y > 0.0); };
    double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin, ymin = xmin, ymax = -xmin;
    for (const auto& s : p.series) {
      for (const auto& pt : s.points) {
        if (!usable(pt.y) || !std::isfinite(pt.x)) continue;
        xmin = std::min(xmin, pt.x);
        xmax = std::max(xmax, pt.x);
        ymin = std::min(ymin, ty(pt.y));
        ymax = std::max(ymax, ty(pt.y));
        if (usable(pt.lo)) ymin = std::min(ymin, ty(pt.lo));
        if (usable(pt.hi)) ymax = std::max(ymax, ty(pt.hi));
      }
    }
    if (!std::isfinite(xmin)) {
      xmin = 0;
      xmax = 1;
      ymin = 0;
      ymax = 1;
    }
    if (xmax == xmin) {
      xmin -= 0.5;
      xmax += 0.5;
    }
    if (ymax == ymin) {
      ymin -= 0.5;
      ymax += 0.5;
    }
    const double ypad = 0.05 * (ymax - ymin), xpad = 0.04 * (xmax - xmin);
    ymin -= ypad;
    ymax += ypad;
    xmin -= xpad;
    xmax += xpad;
    auto sx = [&](double x) { return x0 + (x - xmin) / (xmax - xmin) * (x1 - x0); };
    auto sy = [&](double y) { return y0 - (ty(y) - ymin) / (ymax - ymin) * (y0 - y1); };

    o << "<g>\n";
    o << "<text x=\"" << num((x0 + x1) / 2) << "\" y=\"" << num(oy + 20) << "\" text-anchor=\"middle\" font-size=\"13\">"
      << detail::svg_escape(p.title) << "</text>\n";
    o << "<rect x=\"" << num(x0) << "\" y=\"" << num(y1) << "\" width=\"" << num(x1 - x0) << "\" height=\""
      << num(y0 - y1) << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int t = 0; t <= 4; ++t) {
      const double fx = xmin + (xmax - xmin) * t / 4.0;
      const double px = sx(fx);
      o << "<line x1=\"" << num(px) << "\" y1=\"" << num(y0) << "\" x2=\"" << num(px) << "\" y2=\"" << num(y0 + 4)
        << "\" stroke=\"black\"/>\n";
      o << "<text x=\"" << num(px) << "\" y=\"" << num(y0 + 16) << "\" text-anchor=\"middle\">"
        << detail::tick_label(fx) << "</text>\n";
      const double fy = ymin + (ymax - ymin) * t / 4.0;
      const double py = y0 - (fy - ymin) / (ymax - ymin) * (y0 - y1);
      o << "<line x1=\"" << num(x0 - 4) << "\" y1=\"" << num(py) << "\" x2=\"" << num(x0) << "\" y2=\"" << num(py)
        << "\" stroke=\"black\"/>\n";
      o << "<text x=\"" << num(x0 - 6) << "\" y=\"" << num(py + 4) << "\" text-anchor=\"end\">"
        << detail::tick_label(p.log_y ? std::pow(10.0, fy) : fy) << "</text>\n";
    }
    o << "<text x=\"" << num((x0 + x1) / 2) << "\" y=\"" << num(y0 + 34) << "\" text-anchor=\"middle\">"
      << detail::svg_escape(p.xlabel) << "</text>\n";
    o << "<text transform=\"translate(" << num(ox + 16) << "," << num((y0 + y1) / 2)
      << ") rotate(-90)\" text-anchor=\"middle\">" << detail::svg_escape(p.ylabel + (p.log_y ? " (log)" : ""))
      << "</text>\n";

    for (std::size_t si = 0; si < p.series.size(); ++si) {
      const SvgSeries& s = p.series[si];
      const char* color = detail::kPalette[s.color % detail::kPalette.size()];
      if (s.line) {
        std::string pts;
        for (const auto& pt : s.points) {
          if (!usable(pt.y)) continue;
          pts += num(sx(pt.x)) + "," + num(sy(pt.y)) + " ";
        }
        o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\""
          << (s.dashed ? " stroke-dasharray=\"5,3\"" : "") << " points=\"" << pts << "\"/>\n";
      }
      if (s.markers) {
        for (const auto& pt : s.points) {
          if (!usable(pt.y)) continue;
          if (usable(pt.lo) && usable(pt.hi)) {
            o << "<line x1=\"" << num(sx(pt.x)) << "\" y1=\"" << num(sy(pt.lo)) << "\" x2=\"" << num(sx(pt.x))
              << "\" y2=\"" << num(sy(pt.hi)) << "\" stroke=\"" << color << "\"/>\n";
          }
          o << "<circle cx=\"" << num(sx(pt.x)) << "\" cy=\"" << num(sy(pt.y)) << "\" r=\"3\" fill=\"" << color
            << "\"/>\n";
        }
      }
      const double ly = y1 + 14 + 16 * static_cast<double>(si);
      o << "<line x1=\"" << num(x1 + 10) << "\" y1=\"" << num(ly - 4) << "\" x2=\"" << num(x1 + 28) << "\" y2=\""
        << num(ly - 4) << "\" stroke=\"" << color << "\" stroke-width=\"2\""
        << (s.dashed ? " stroke-dasharray=\"5,3\"" : "") << "/>\n";
      o << "<text x=\"" << num(x1 + 32) << "\" y=\"" << num(ly) << "\">" << detail::svg_escape(s.name) << "</text>\n";
    }
    o << "</g>\n";
  }
  o << "</svg>\n";
  return o.str();
}

}  // namespace plateau
