#include "nsgp/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "nsgp/error.hpp"

namespace nsgp {

double distance(const Location& a, const Location& b) {
  return std::hypot(a.lon - b.lon, a.lat - b.lat);
}

double BoundingBox::diameter() const { return std::hypot(max_lon - min_lon, max_lat - min_lat); }

bool BoundingBox::contains(const Location& s) const {
  return s.lon >= min_lon && s.lon <= max_lon && s.lat >= min_lat && s.lat <= max_lat;
}

BoundingBox bounding_box(std::span<const Location> locations) {
  if (locations.empty()) throw InputError("bounding_box: no locations");
  BoundingBox box{locations[0].lon, locations[0].lon, locations[0].lat, locations[0].lat};
  for (const auto& s : locations) {
    box.min_lon = std::min(box.min_lon, s.lon);
    box.max_lon = std::max(box.max_lon, s.lon);
    box.min_lat = std::min(box.min_lat, s.lat);
    box.max_lat = std::max(box.max_lat, s.lat);
  }
  return box;
}

SpatialDataset::SpatialDataset(std::vector<Location> locations, std::vector<double> values,
                               std::vector<std::string> ids)
    : locations_(std::move(locations)), values_(std::move(values)), ids_(std::move(ids)) {
  if (locations_.empty()) throw InputError("dataset is empty");
  if (locations_.size() != values_.size())
    throw InputError("dataset: location and value counts differ");
  if (!ids_.empty() && ids_.size() != locations_.size())
    throw InputError("dataset: id count differs from location count");
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(locations_[i].lon) || !std::isfinite(locations_[i].lat))
      throw InputError("dataset: non-finite coordinate at row " + std::to_string(i + 1));
    if (!std::isfinite(values_[i]))
      throw InputError("dataset: non-finite value at row " + std::to_string(i + 1));
  }
  std::map<std::pair<double, double>, std::size_t> seen;
  for (std::size_t i = 0; i < locations_.size(); ++i) {
    auto [it, inserted] = seen.emplace(std::pair{locations_[i].lon, locations_[i].lat}, i);
    if (!inserted)
      throw InputError("dataset: duplicate location at rows " + std::to_string(it->second + 1) +
                       " and " + std::to_string(i + 1));
  }
}

SpatialDataset SpatialDataset::subset(std::span<const std::size_t> indices) const {
  std::vector<Location> locs;
  std::vector<double> vals;
  std::vector<std::string> ids;
  locs.reserve(indices.size());
  vals.reserve(indices.size());
  for (std::size_t i : indices) {
    locs.push_back(locations_.at(i));
    vals.push_back(values_.at(i));
    if (!ids_.empty()) ids.push_back(ids_[i]);
  }
  return SpatialDataset(std::move(locs), std::move(vals), std::move(ids));
}

std::vector<std::size_t> CovariateTable::complete_cases() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < categories.size(); ++i) {
    if (std::all_of(categories[i].begin(), categories[i].end(),
                    [](const auto& c) { return c.has_value(); }))
      out.push_back(i);
  }
  return out;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cell += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cell += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cells.push_back(std::move(cell));
      cell.clear();
    } else if (c != '\r') {
      cell += c;
    }
  }
  cells.push_back(std::move(cell));
  for (auto& s : cells) {
    auto b = s.find_first_not_of(" \t");
    auto e = s.find_last_not_of(" \t");
    s = (b == std::string::npos) ? std::string() : s.substr(b, e - b + 1);
  }
  return cells;
}

std::optional<std::size_t> CsvTable::find_column(const std::string& name) const {
  auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) return std::nullopt;
  return static_cast<std::size_t>(it - header.begin());
}

std::size_t CsvTable::column(const std::string& name) const {
  if (auto c = find_column(name)) return *c;
  throw InputError("missing column '" + name + "'");
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "'");
  CsvTable table;
  std::string line;
  bool have_header = false;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    auto cells = split_csv_line(line);
    if (!have_header) {
      if (!cells.empty() && cells[0].size() >= 3 &&
          cells[0].compare(0, 3, "\xEF\xBB\xBF") == 0)
        cells[0].erase(0, 3);
      table.header = std::move(cells);
      have_header = true;
      continue;
    }
    if (cells.size() != table.header.size())
      throw InputError(path + ": line " + std::to_string(lineno) + " has " +
                       std::to_string(cells.size()) + " fields, expected " +
                       std::to_string(table.header.size()));
    table.rows.push_back(std::move(cells));
  }
  if (!have_header) throw InputError(path + ": empty file");
  return table;
}

double parse_double(const std::string& cell, const std::string& context) {
  double x = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  auto [ptr, ec] = std::from_chars(first, last, x);
  if (cell.empty() || ec != std::errc() || ptr != last)
    throw InputError(context + ": non-numeric cell '" + cell + "'");
  return x;
}

std::string format_double(double x) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general, 17);
  return std::string(buf, ptr);
}

SpatialDataset load_observations(const std::string& path, const std::string& value_column,
                                 bool log_transform) {
  CsvTable t = read_csv(path);
  const std::size_t c_lon = t.column("lon"), c_lat = t.column("lat");
  const std::size_t c_val = t.column(value_column);
  auto c_id = t.find_column("id");
  std::vector<Location> locs;
  std::vector<double> vals;
  std::vector<std::string> ids;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const std::string where = path + " row " + std::to_string(r + 1);
    Location s{parse_double(row[c_lon], where), parse_double(row[c_lat], where)};
    double v = parse_double(row[c_val], where);
    if (log_transform) {
      if (!(v > 0.0))
        throw InputError(where + ": value " + row[c_val] + " is not positive under log transform");
      v = std::log(v);
    }
    locs.push_back(s);
    vals.push_back(v);
    if (c_id) ids.push_back(row[*c_id]);
  }
  if (locs.empty()) throw InputError(path + ": no observations");
  return SpatialDataset(std::move(locs), std::move(vals), std::move(ids));
}

void write_observations(const std::string& path, const SpatialDataset& data,
                        const std::string& value_column) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path + "'");
  const bool with_ids = !data.ids().empty();
  out << "lon,lat," << value_column << (with_ids ? ",id" : "") << '\n';
  for (std::size_t i = 0; i < data.size(); ++i) {
    out << format_double(data.locations()[i].lon) << ',' << format_double(data.locations()[i].lat)
        << ',' << format_double(data.values()[i]);
    if (with_ids) out << ',' << data.ids()[i];
    out << '\n';
  }
}

CovariateTable load_covariates(const std::string& path,
                               const std::vector<std::string>& category_columns) {
  CsvTable t = read_csv(path);
  const std::size_t c_lon = t.column("lon"), c_lat = t.column("lat");
  std::vector<std::string> names = category_columns;
  if (names.empty()) {
    for (const auto& h : t.header)
      if (h != "lon" && h != "lat") names.push_back(h);
  }
  std::vector<std::size_t> cols;
  for (const auto& n : names) cols.push_back(t.column(n));

  CovariateTable table;
  table.category_names = names;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const std::string where = path + " row " + std::to_string(r + 1);
    table.locations.push_back({parse_double(row[c_lon], where), parse_double(row[c_lat], where)});
    std::vector<std::optional<std::string>> cats;
    for (std::size_t c : cols) {
      if (row[c].empty() || row[c] == "NA")
        cats.emplace_back(std::nullopt);
      else
        cats.emplace_back(row[c]);
    }
    table.categories.push_back(std::move(cats));
  }
  if (table.complete_cases().empty())
    throw InputError(path + ": no location has all categories observed");
  return table;
}

void write_covariates(const std::string& path, const CovariateTable& table) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path + "'");
  out << "lon,lat";
  for (const auto& n : table.category_names) out << ',' << n;
  out << '\n';
  for (std::size_t i = 0; i < table.locations.size(); ++i) {
    out << format_double(table.locations[i].lon) << ',' << format_double(table.locations[i].lat);
    for (const auto& c : table.categories[i]) out << ',' << (c ? *c : std::string());
    out << '\n';
  }
}

std::vector<Location> load_locations(const std::string& path) {
  CsvTable t = read_csv(path);
  const std::size_t c_lon = t.column("lon"), c_lat = t.column("lat");
  std::vector<Location> out;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const std::string where = path + " row " + std::to_string(r + 1);
    out.push_back({parse_double(t.rows[r][c_lon], where), parse_double(t.rows[r][c_lat], where)});
  }
  if (out.empty()) throw InputError(path + ": no locations");
  return out;
}

}  // namespace nsgp
