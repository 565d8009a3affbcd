#pragma once

#include <Eigen/Core>
#include <json.hpp>

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace coopallee {

using Cell = std::variant<double, long long, std::string>;

// CSV with doubles at 17 significant digits.
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;

  void add(std::vector<Cell> row);
  std::string csv() const;
};

std::string sha256_hex(std::string_view data);

struct Series {
  std::string label;
  std::vector<double> x, y;
  std::string color;      // empty picks from the palette
  bool markers = false;   // draw points instead of a polyline
};

struct Polygon {
  std::string label;
  std::vector<Eigen::Vector2d> vertices;
  std::string fill;
};

struct LinePlot {
  std::string title, xlabel, ylabel;
  std::vector<Series> series;
  std::vector<Polygon> polygons;
  std::optional<std::pair<double, double>> xrange, yrange;

  std::string svg() const;
};

// values(i, j) is drawn at column i (x) and row j (y), y increasing upwards.
struct HeatMap {
  std::string title, xlabel, ylabel;
  Eigen::MatrixXd values;
  double x0 = 0.0, x1 = 1.0, y0 = 0.0, y1 = 1.0;
  bool integer_levels = false;  // categorical palette for counts

  std::string svg() const;
};

// In-memory artifacts for one run. Nothing touches the disk until commit(), which writes every
// file plus manifest.json (name, bytes, sha256) into `dir`.
class ArtifactSet {
public:
  void add(const std::string& name, std::string content);
  void add_json(const std::string& name, const nlohmann::json& doc);
  void add_csv(const std::string& name, const Table& table) { add(name, table.csv()); }

  const std::map<std::string, std::string>& files() const { return files_; }
  nlohmann::json manifest() const;
  void commit(const std::string& dir) const;

private:
  std::map<std::string, std::string> files_;
};

std::string dump_json(const nlohmann::json& doc);

}  // namespace coopallee
