#include "floquet/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#ifndef FLOQUET_VERSION
#define FLOQUET_VERSION "0.0.0"
#endif

namespace floquet::io {

std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  if (x == 0.0) x = 0.0;  // drop the sign of negative zero
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

namespace {

std::string quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string cell_text(const Cell& c) {
  if (const auto* s = std::get_if<std::string>(&c)) return quote(*s);
  if (const auto* d = std::get_if<double>(&c)) return format_number(*d);
  return std::to_string(std::get<long long>(c));
}

std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

}  // namespace

void CsvTable::add_row(std::vector<Cell> row) {
  if (row.size() != header_.size())
    throw std::invalid_argument("csv: row has " + std::to_string(row.size()) + " cells, header has " +
                                std::to_string(header_.size()));
  rows_.push_back(std::move(row));
}

std::string CsvTable::str() const {
  std::string out;
  for (std::size_t i = 0; i < header_.size(); ++i) out += (i ? "," : "") + quote(header_[i]);
  out += '\n';
  for (const auto& row : rows_) {
    for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + cell_text(row[i]);
    out += '\n';
  }
  return out;
}

void CsvTable::write(const std::filesystem::path& path) const { open_output(path) << str(); }

std::size_t ParsedCsv::column(const std::string& name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw std::out_of_range("csv: no column " + name);
  return static_cast<std::size_t>(it - header.begin());
}

double ParsedCsv::number(std::size_t row, const std::string& name) const {
  return std::stod(rows.at(row).at(column(name)));
}

ParsedCsv parse_csv(const std::string& text) {
  ParsedCsv out;
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false, any = false;
  auto end_record = [&] {
    fields.push_back(field);
    field.clear();
    if (out.header.empty() && !any) {
      out.header = fields;
    } else {
      out.rows.push_back(fields);
    }
    any = true;
    fields.clear();
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"' && i + 1 < text.size() && text[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(field);
      field.clear();
    } else if (c == '\n') {
      end_record();
    } else if (c != '\r') {
      field += c;
    }
  }
  if (!field.empty() || !fields.empty()) end_record();
  return out;
}

ParsedCsv read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_csv(ss.str());
}

void write_json(const std::filesystem::path& path, const json& doc) { open_output(path) << doc.dump(2) << '\n'; }

std::string hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

json to_json(const RadialGrid& g) {
  return {{"r_min", g.r_min},
          {"r_max", g.r_max},
          {"n_points", g.n_points},
          {"ecs_radius", g.ecs_radius},
          {"ecs_angle", g.ecs_angle}};
}

std::uint64_t content_key(const MoleculeModel& model, const RadialGrid& grid, int n_blocks) {
  auto h = model.fingerprint();
  for (double x : {grid.r_min, grid.r_max, grid.ecs_radius, grid.ecs_angle}) h = fnv1a(&x, sizeof x, h);
  h = fnv1a(&grid.n_points, sizeof grid.n_points, h);
  return fnv1a(&n_blocks, sizeof n_blocks, h);
}

json provenance(const MoleculeModel& model, const RadialGrid& grid, int n_blocks) {
  return {{"code_version", FLOQUET_VERSION},
          {"model", model.name},
          {"model_hash", hex(model.fingerprint())},
          {"content_key", hex(content_key(model, grid, n_blocks))},
          {"grid", to_json(grid)},
          {"n_blocks", n_blocks}};
}

ResultCache::ResultCache(std::filesystem::path path, std::uint64_t key) : path_(std::move(path)), key_(hex(key)) {
  std::ifstream in(path_);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      const auto rec = json::parse(line);
      if (rec.value("key", "") == key_) records_[rec.at("id").get<std::string>()] = rec.at("data");
    } catch (const json::exception&) {
      // A truncated last line from an interrupted run; the entry is recomputed.
    }
  }
}

std::optional<json> ResultCache::lookup(const std::string& id) const {
  std::lock_guard lock(*mutex_);
  const auto it = records_.find(id);
  if (it == records_.end()) return std::nullopt;
  return it->second;
}

void ResultCache::store(const std::string& id, const json& data) {
  if (!enabled()) return;
  std::lock_guard lock(*mutex_);
  records_[id] = data;
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  std::ofstream out(path_, std::ios::app);
  if (!out) throw std::runtime_error("cannot append to cache " + path_.string());
  out << json{{"key", key_}, {"id", id}, {"data", data}}.dump() << '\n';
}

std::size_t ResultCache::size() const {
  std::lock_guard lock(*mutex_);
  return records_.size();
}

// ---------------------------------------------------------------------------------------------
// SVG

namespace {

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"};

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

// Roughly five round tick values covering [lo, hi].
std::vector<double> ticks(double lo, double hi) {
  const double span = hi - lo;
  const double raw = span / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0})
    if (m * mag >= raw) {
      step = m * mag;
      break;
    }
  std::vector<double> out;
  for (double t = std::ceil(lo / step) * step; t <= hi + 1e-9 * span; t += step) out.push_back(std::abs(t) < 1e-12 * span ? 0.0 : t);
  return out;
}

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", x);
  return buf;
}

std::string tick_label(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", x);
  return buf;
}

}  // namespace

SvgPlot::SvgPlot(std::string title, std::string x_label, std::string y_label)
    : title_(std::move(title)), x_label_(std::move(x_label)), y_label_(std::move(y_label)) {}

void SvgPlot::add_line(const std::vector<double>& x, const std::vector<double>& y, const std::string& label,
                       bool dashed) {
  series_.push_back({x, y, label, false, dashed});
}

void SvgPlot::add_points(const std::vector<double>& x, const std::vector<double>& y, const std::string& label) {
  series_.push_back({x, y, label, true, false});
}

void SvgPlot::add_marker(double x, double y, const std::string& text) { markers_.push_back({x, y, text}); }

std::string SvgPlot::render(int width, int height) const {
  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  auto extend = [&](double x, double y) {
    if (!std::isfinite(x) || !std::isfinite(y)) return;
    x0 = std::min(x0, x), x1 = std::max(x1, x), y0 = std::min(y0, y), y1 = std::max(y1, y);
  };
  for (const auto& s : series_)
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) extend(s.x[i], s.y[i]);
  for (const auto& m : markers_) extend(m.x, m.y);
  if (!(x1 >= x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 == x0) x0 -= 0.5, x1 += 0.5;
  if (y1 == y0) y0 -= 0.5 * std::max(std::abs(y0), 1.0), y1 += 0.5 * std::max(std::abs(y1), 1.0);
  const double padx = 0.03 * (x1 - x0), pady = 0.05 * (y1 - y0);
  x0 -= padx, x1 += padx, y0 -= pady, y1 += pady;

  const double left = 80, right = 170, top = 40, bottom = 60;
  const double pw = width - left - right, ph = height - top - bottom;
  auto px = [&](double x) { return left + (x - x0) / (x1 - x0) * pw; };
  auto py = [&](double y) { return top + (1.0 - (y - y0) / (y1 - y0)) * ph; };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << width / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(title_) << "</text>\n";
  o << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
    << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (double t : ticks(x0, x1)) {
    o << "<line x1=\"" << fmt(px(t)) << "\" y1=\"" << top + ph << "\" x2=\"" << fmt(px(t)) << "\" y2=\""
      << top + ph + 5 << "\" stroke=\"black\"/>";
    o << "<text x=\"" << fmt(px(t)) << "\" y=\"" << top + ph + 18 << "\" text-anchor=\"middle\">" << tick_label(t)
      << "</text>\n";
  }
  for (double t : ticks(y0, y1)) {
    o << "<line x1=\"" << left - 5 << "\" y1=\"" << fmt(py(t)) << "\" x2=\"" << left << "\" y2=\"" << fmt(py(t))
      << "\" stroke=\"black\"/>";
    o << "<text x=\"" << left - 8 << "\" y=\"" << fmt(py(t) + 4) << "\" text-anchor=\"end\">" << tick_label(t)
      << "</text>\n";
  }
  o << "<text x=\"" << left + pw / 2 << "\" y=\"" << height - 15 << "\" text-anchor=\"middle\">" << escape(x_label_)
    << "</text>\n";
  o << "<text transform=\"translate(18," << top + ph / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
    << escape(y_label_) << "</text>\n";

  for (std::size_t k = 0; k < series_.size(); ++k) {
    const auto& s = series_[k];
    const char* colour = kPalette[k % std::size(kPalette)];
    const std::size_t n = std::min(s.x.size(), s.y.size());
    if (s.points) {
      for (std::size_t i = 0; i < n; ++i)
        if (std::isfinite(s.x[i]) && std::isfinite(s.y[i]))
          o << "<circle cx=\"" << fmt(px(s.x[i])) << "\" cy=\"" << fmt(py(s.y[i])) << "\" r=\"3\" fill=\"" << colour
            << "\"/>\n";
    } else {
      // Non-finite samples split the polyline.
      std::string pts;
      auto flush = [&] {
        if (!pts.empty())
          o << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1.5\""
            << (s.dashed ? " stroke-dasharray=\"5,3\"" : "") << " points=\"" << pts << "\"/>\n";
        pts.clear();
      };
      for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) {
          flush();
          continue;
        }
        pts += fmt(px(s.x[i])) + "," + fmt(py(s.y[i])) + " ";
      }
      flush();
    }
    const double ly = top + 14 + 16.0 * static_cast<double>(k);
    o << "<line x1=\"" << left + pw + 10 << "\" y1=\"" << fmt(ly - 4) << "\" x2=\"" << left + pw + 30 << "\" y2=\""
      << fmt(ly - 4) << "\" stroke=\"" << colour << "\" stroke-width=\"2\"/>";
    o << "<text x=\"" << left + pw + 35 << "\" y=\"" << fmt(ly) << "\">" << escape(s.label) << "</text>\n";
  }
  for (const auto& m : markers_) {
    const double cx = px(m.x), cy = py(m.y);
    o << "<path d=\"M" << fmt(cx - 5) << "," << fmt(cy - 5) << " L" << fmt(cx + 5) << "," << fmt(cy + 5) << " M"
      << fmt(cx - 5) << "," << fmt(cy + 5) << " L" << fmt(cx + 5) << "," << fmt(cy - 5)
      << "\" stroke=\"black\" stroke-width=\"2\"/>";
    if (!m.text.empty())
      o << "<text x=\"" << fmt(cx + 7) << "\" y=\"" << fmt(cy - 7) << "\" font-size=\"10\">" << escape(m.text)
        << "</text>";
    o << "\n";
  }
  o << "</svg>\n";
  return o.str();
}

void SvgPlot::write(const std::filesystem::path& path) const { open_output(path) << render(); }

}  // namespace floquet::io
