#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "floquet/molecule.hpp"

namespace floquet::io {

using json = nlohmann::json;

/// 12 significant digits, shortest form.
std::string format_number(double x);

using Cell = std::variant<std::string, double, long long>;

class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}
  void add_row(std::vector<Cell> row);
  const std::vector<std::string>& header() const { return header_; }
  std::size_t rows() const { return rows_.size(); }
  std::string str() const;
  void write(const std::filesystem::path& path) const;

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<Cell>> rows_;
};

struct ParsedCsv {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Column index by name; throws std::out_of_range if absent.
  std::size_t column(const std::string& name) const;
  double number(std::size_t row, const std::string& name) const;
};

ParsedCsv parse_csv(const std::string& text);
ParsedCsv read_csv(const std::filesystem::path& path);

void write_json(const std::filesystem::path& path, const json& doc);

/// Provenance block attached to every JSON output.
json provenance(const MoleculeModel& model, const RadialGrid& grid, int n_blocks);
json to_json(const RadialGrid& grid);

std::string hex(std::uint64_t h);

/// Content hash of the model and the discretisation; the cache key.
std::uint64_t content_key(const MoleculeModel& model, const RadialGrid& grid, int n_blocks);

/// Append-only JSON-lines store. Each line holds {"key", "id", "data"}; records whose key
/// differs from the store's key (other model or grid) are ignored on load.
class ResultCache {
 public:
  ResultCache() = default;
  ResultCache(std::filesystem::path path, std::uint64_t key);

  bool enabled() const { return !path_.empty(); }
  std::optional<json> lookup(const std::string& id) const;
  void store(const std::string& id, const json& data);
  std::size_t size() const;

 private:
  std::filesystem::path path_;
  std::string key_;
  std::map<std::string, json> records_;
  std::unique_ptr<std::mutex> mutex_ = std::make_unique<std::mutex>();
};

/// Minimal native SVG line/scatter plot.
class SvgPlot {
 public:
  SvgPlot(std::string title, std::string x_label, std::string y_label);

  void add_line(const std::vector<double>& x, const std::vector<double>& y, const std::string& label,
                bool dashed = false);
  void add_points(const std::vector<double>& x, const std::vector<double>& y, const std::string& label);
  void add_marker(double x, double y, const std::string& text);
  std::string render(int width = 720, int height = 480) const;
  void write(const std::filesystem::path& path) const;

 private:
  struct Series {
    std::vector<double> x, y;
    std::string label;
    bool points = false;
    bool dashed = false;
  };
  struct Marker {
    double x, y;
    std::string text;
  };
  std::string title_, x_label_, y_label_;
  std::vector<Series> series_;
  std::vector<Marker> markers_;
};

}  // namespace floquet::io
