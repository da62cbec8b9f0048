#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace nsgp {

// A point in the plane (degrees); no geodesic treatment.
struct Location {
  double lon = 0.0;
  double lat = 0.0;

  friend bool operator==(const Location&, const Location&) = default;
};

double distance(const Location& a, const Location& b);

struct BoundingBox {
  double min_lon = 0.0, max_lon = 0.0;
  double min_lat = 0.0, max_lat = 0.0;

  double diameter() const;
  bool contains(const Location& s) const;
};

BoundingBox bounding_box(std::span<const Location> locations);

/// Observation locations with (typically log-scale) responses. Immutable once
/// constructed; the constructor enforces n > 0, finiteness and the absence of
/// exactly duplicated coordinates.
class SpatialDataset {
 public:
  SpatialDataset(std::vector<Location> locations, std::vector<double> values,
                 std::vector<std::string> ids = {});

  std::size_t size() const { return locations_.size(); }
  const std::vector<Location>& locations() const { return locations_; }
  const std::vector<double>& values() const { return values_; }
  const std::vector<std::string>& ids() const { return ids_; }

  SpatialDataset subset(std::span<const std::size_t> indices) const;

 private:
  std::vector<Location> locations_;
  std::vector<double> values_;
  std::vector<std::string> ids_;
};

/// Locations where categorical covariates were recorded. A missing category is
/// std::nullopt.
struct CovariateTable {
  std::vector<Location> locations;
  std::vector<std::string> category_names;
  std::vector<std::vector<std::optional<std::string>>> categories;

  std::vector<std::size_t> complete_cases() const;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const;  // throws InputError
  std::optional<std::size_t> find_column(const std::string& name) const;
};

CsvTable read_csv(const std::string& path);
std::vector<std::string> split_csv_line(const std::string& line);
double parse_double(const std::string& cell, const std::string& context);

// 17 significant digits, the round-trip precision for doubles.
std::string format_double(double x);

SpatialDataset load_observations(const std::string& path, const std::string& value_column,
                                 bool log_transform);
void write_observations(const std::string& path, const SpatialDataset& data,
                        const std::string& value_column = "value");

CovariateTable load_covariates(const std::string& path,
                               const std::vector<std::string>& category_columns);
void write_covariates(const std::string& path, const CovariateTable& table);

std::vector<Location> load_locations(const std::string& path);

}  // namespace nsgp
