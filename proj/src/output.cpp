#include "coopallee/output.hpp"

#include "coopallee/config.hpp"
#include "coopallee/error.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace coopallee {

namespace {

std::string csv_field(const Cell& c) {
  if (auto d = std::get_if<double>(&c)) return format_double(*d);
  if (auto i = std::get_if<long long>(&c)) return std::to_string(*i);
  const auto& s = std::get<std::string>(c);
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char ch : s) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
  return q + "\"";
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char ch : s) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += ch;
    }
  }
  return out;
}

std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", x);
  return buf;
}

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                          "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::vector<double> nice_ticks(double lo, double hi) {
  if (!(hi > lo)) return {lo};
  const double raw = (hi - lo) / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double f : {1.0, 2.0, 5.0, 10.0})
    if (f * mag >= raw) {
      step = f * mag;
      break;
    }
  std::vector<double> t;
  for (double v = std::ceil(lo / step) * step; v <= hi + 1e-9 * step; v += step)
    t.push_back(std::abs(v) < 1e-12 * step ? 0.0 : v);
  return t;
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

// Plot frame shared by the line plot and the heat map.
struct Frame {
  static constexpr double W = 640, H = 480, L = 70, R = 20, T = 40, B = 55;
  double x0, x1, y0, y1;
  double px(double x) const { return L + (x - x0) / (x1 - x0) * (W - L - R); }
  double py(double y) const { return H - B - (y - y0) / (y1 - y0) * (H - T - B); }

  void open(std::ostringstream& s, const std::string& title) const {
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">"
      << xml_escape(title) << "</text>\n";
  }

  void axes(std::ostringstream& s, const std::string& xl, const std::string& yl) const {
    s << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W - L - R << "\" height=\"" << H - T - B
      << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (double v : nice_ticks(x0, x1))
      s << "<line x1=\"" << num(px(v)) << "\" y1=\"" << H - B << "\" x2=\"" << num(px(v)) << "\" y2=\""
        << H - B + 5 << "\" stroke=\"black\"/><text x=\"" << num(px(v)) << "\" y=\"" << H - B + 18
        << "\" text-anchor=\"middle\">" << tick_label(v) << "</text>\n";
    for (double v : nice_ticks(y0, y1))
      s << "<line x1=\"" << L - 5 << "\" y1=\"" << num(py(v)) << "\" x2=\"" << L << "\" y2=\"" << num(py(v))
        << "\" stroke=\"black\"/><text x=\"" << L - 8 << "\" y=\"" << num(py(v) + 4)
        << "\" text-anchor=\"end\">" << tick_label(v) << "</text>\n";
    s << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">" << xml_escape(xl)
      << "</text>\n<text x=\"16\" y=\"" << (T + H - B) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
      << (T + H - B) / 2 << ")\">" << xml_escape(yl) << "</text>\n";
  }
};

std::string ramp(double t) {
  // Blue to yellow through teal and green.
  static const double stops[5][3] = {{68, 1, 84}, {59, 82, 139}, {33, 145, 140}, {94, 201, 98}, {253, 231, 37}};
  t = std::clamp(t, 0.0, 1.0) * 4.0;
  const int i = std::min(3, int(t));
  const double f = t - i;
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", int(stops[i][0] + f * (stops[i + 1][0] - stops[i][0])),
                int(stops[i][1] + f * (stops[i + 1][1] - stops[i][1])),
                int(stops[i][2] + f * (stops[i + 1][2] - stops[i][2])));
  return buf;
}

}  // namespace

void Table::add(std::vector<Cell> row) {
  if (row.size() != columns.size()) throw Error(ErrorCode::InvalidParams, "row width does not match the header");
  rows.push_back(std::move(row));
}

std::string Table::csv() const {
  std::string out;
  for (std::size_t i = 0; i < columns.size(); ++i) out += (i ? "," : "") + csv_field(columns[i]);
  out += "\n";
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.size(); ++i) out += (i ? "," : "") + csv_field(r[i]);
    out += "\n";
  }
  return out;
}

std::string sha256_hex(std::string_view data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("sha256 failed");
  std::string hex;
  char buf[3];
  for (unsigned i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", md[i]);
    hex += buf;
  }
  return hex;
}

std::string LinePlot::svg() const {
  double xl = INFINITY, xh = -INFINITY, yl = INFINITY, yh = -INFINITY;
  auto grow = [&](double x, double y) {
    if (!std::isfinite(x) || !std::isfinite(y)) return;
    xl = std::min(xl, x), xh = std::max(xh, x), yl = std::min(yl, y), yh = std::max(yh, y);
  };
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) grow(s.x[i], s.y[i]);
  for (const auto& p : polygons)
    for (const auto& v : p.vertices) grow(v(0), v(1));
  if (!std::isfinite(xl)) xl = 0, xh = 1, yl = 0, yh = 1;
  if (xh == xl) xl -= 0.5, xh += 0.5;
  if (yh == yl) yl -= 0.5, yh += 0.5;
  const double padx = 0.03 * (xh - xl), pady = 0.05 * (yh - yl);
  Frame f{xrange ? xrange->first : xl - padx, xrange ? xrange->second : xh + padx,
          yrange ? yrange->first : yl - pady, yrange ? yrange->second : yh + pady};

  std::ostringstream s;
  f.open(s, title);
  s << "<clipPath id=\"plot\"><rect x=\"" << f.L << "\" y=\"" << f.T << "\" width=\"" << f.W - f.L - f.R
    << "\" height=\"" << f.H - f.T - f.B << "\"/></clipPath>\n<g clip-path=\"url(#plot)\">\n";
  for (std::size_t k = 0; k < polygons.size(); ++k) {
    const auto& p = polygons[k];
    s << "<polygon points=\"";
    Eigen::Vector2d c = Eigen::Vector2d::Zero();
    for (const auto& v : p.vertices) {
      s << num(f.px(v(0))) << "," << num(f.py(v(1))) << " ";
      c += v;
    }
    c /= double(std::max<std::size_t>(1, p.vertices.size()));
    s << "\" fill=\"" << (p.fill.empty() ? kPalette[k % 10] : p.fill.c_str())
      << "\" fill-opacity=\"0.25\" stroke=\"black\" stroke-width=\"0.5\"/>\n";
    if (!p.label.empty())
      s << "<text x=\"" << num(f.px(c(0))) << "\" y=\"" << num(f.py(c(1))) << "\" text-anchor=\"middle\">"
        << xml_escape(p.label) << "</text>\n";
  }
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& sr = series[k];
    const std::string color = sr.color.empty() ? kPalette[k % 10] : sr.color;
    const std::size_t n = std::min(sr.x.size(), sr.y.size());
    if (sr.markers) {
      for (std::size_t i = 0; i < n; ++i)
        if (std::isfinite(sr.x[i]) && std::isfinite(sr.y[i]))
          s << "<circle cx=\"" << num(f.px(sr.x[i])) << "\" cy=\"" << num(f.py(sr.y[i])) << "\" r=\"2.5\" fill=\""
            << color << "\"/>\n";
      continue;
    }
    // Non-finite values split the polyline.
    std::string pts;
    auto flush = [&] {
      if (!pts.empty())
        s << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.2\" points=\"" << pts << "\"/>\n";
      pts.clear();
    };
    for (std::size_t i = 0; i < n; ++i) {
      if (!std::isfinite(sr.x[i]) || !std::isfinite(sr.y[i])) {
        flush();
        continue;
      }
      pts += num(f.px(sr.x[i])) + "," + num(f.py(sr.y[i])) + " ";
    }
    flush();
  }
  s << "</g>\n";
  f.axes(s, xlabel, ylabel);
  int row = 0;
  for (std::size_t k = 0; k < series.size(); ++k) {
    if (series[k].label.empty()) continue;
    const std::string color = series[k].color.empty() ? kPalette[k % 10] : series[k].color;
    const double y = f.T + 14 + 14 * row++;
    s << "<rect x=\"" << f.W - f.R - 150 << "\" y=\"" << y - 8 << "\" width=\"10\" height=\"10\" fill=\"" << color
      << "\"/><text x=\"" << f.W - f.R - 135 << "\" y=\"" << y + 1 << "\">" << xml_escape(series[k].label)
      << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

std::string HeatMap::svg() const {
  Frame f{x0, x1, y0, y1};
  std::ostringstream s;
  f.open(s, title);
  const long nx = values.rows(), ny = values.cols();
  double lo = INFINITY, hi = -INFINITY;
  for (long i = 0; i < nx; ++i)
    for (long j = 0; j < ny; ++j)
      if (std::isfinite(values(i, j))) lo = std::min(lo, values(i, j)), hi = std::max(hi, values(i, j));
  const double dx = (x1 - x0) / std::max(1L, nx), dy = (y1 - y0) / std::max(1L, ny);
  for (long i = 0; i < nx; ++i)
    for (long j = 0; j < ny; ++j) {
      const double v = values(i, j);
      std::string color = "#ffffff";
      if (std::isfinite(v)) {
        if (integer_levels) {
          const long lvl = std::lround(v);
          color = lvl == 0 ? "#f0f0f0" : kPalette[(lvl - 1 + 10) % 10];
        } else {
          color = ramp(hi > lo ? (v - lo) / (hi - lo) : 0.5);
        }
      }
      const double xa = f.px(x0 + i * dx), xb = f.px(x0 + (i + 1) * dx);
      const double ya = f.py(y0 + (j + 1) * dy), yb = f.py(y0 + j * dy);
      s << "<rect x=\"" << num(xa) << "\" y=\"" << num(ya) << "\" width=\"" << num(xb - xa + 0.3) << "\" height=\""
        << num(yb - ya + 0.3) << "\" fill=\"" << color << "\"/>\n";
    }
  f.axes(s, xlabel, ylabel);
  if (std::isfinite(lo))
    s << "<text x=\"" << f.W - f.R << "\" y=\"" << f.T - 6 << "\" text-anchor=\"end\">range " << tick_label(lo)
      << " .. " << tick_label(hi) << "</text>\n";
  s << "</svg>\n";
  return s.str();
}

std::string dump_json(const nlohmann::json& doc) { return doc.dump(2) + "\n"; }

void ArtifactSet::add(const std::string& name, std::string content) {
  if (name.empty() || name == "manifest.json" || name.find("..") != std::string::npos || name.front() == '/')
    throw Error(ErrorCode::InvalidParams, "bad artifact name '" + name + "'");
  files_[name] = std::move(content);
}

void ArtifactSet::add_json(const std::string& name, const nlohmann::json& doc) { add(name, dump_json(doc)); }

nlohmann::json ArtifactSet::manifest() const {
  nlohmann::json m = nlohmann::json::array();
  for (const auto& [name, content] : files_)
    m.push_back({{"file", name}, {"bytes", content.size()}, {"sha256", sha256_hex(content)}});
  return {{"artifacts", m}};
}

void ArtifactSet::commit(const std::string& dir) const {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  auto write = [&](const std::string& name, const std::string& content) {
    const fs::path path = fs::path(dir) / name;
    fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".part";
    {
      std::ofstream out(tmp, std::ios::binary);
      out << content;
      if (!out) throw Error(ErrorCode::ConfigError, "cannot write " + path.string());
    }
    fs::rename(tmp, path);
  };
  for (const auto& [name, content] : files_) write(name, content);
  write("manifest.json", dump_json(manifest()));
}

}  // namespace coopallee
