#include "nsgp/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <cstdio>
#include <sstream>

#include "nsgp/data.hpp"
#include "nsgp/error.hpp"

namespace nsgp {
namespace {

std::vector<std::string> split_list(const std::string& v, char sep = ',') {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, sep)) {
    auto b = item.find_first_not_of(" \t");
    auto e = item.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw InputError("config: '" + key + "' expects a boolean, got '" + v + "'");
}

std::size_t parse_count(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const long long x = std::stoll(v, &pos);
    if (pos != v.size() || x < 0) throw std::invalid_argument(v);
    return static_cast<std::size_t>(x);
  } catch (const std::exception&) {
    throw InputError("config: '" + key + "' expects a nonnegative integer, got '" + v + "'");
  }
}

double parse_real(const std::string& key, const std::string& v) { return parse_double(v, "config: '" + key + "'"); }

template <class T>
std::string join(const std::vector<T>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    if constexpr (std::is_same_v<T, double>)
      out += format_double(v[i]);
    else if constexpr (std::is_same_v<T, std::string>)
      out += v[i];
    else
      out += std::to_string(v[i]);
  }
  return out;
}

std::string b2s(bool b) { return b ? "true" : "false"; }

}  // namespace

void PipelineConfig::set(const std::string& key, const std::string& v) {
  auto counts = [&](const std::string& s) {
    std::vector<std::size_t> out;
    for (const auto& x : split_list(s)) out.push_back(parse_count(key, x));
    return out;
  };
  auto reals = [&](const std::string& s) {
    std::vector<double> out;
    for (const auto& x : split_list(s)) out.push_back(parse_real(key, x));
    return out;
  };
  if (key == "input.observations") observations = v;
  else if (key == "input.value_column") value_column = v;
  else if (key == "input.log_transform") log_transform = parse_bool(key, v);
  else if (key == "input.covariates") covariates = v;
  else if (key == "input.category_columns") category_columns = split_list(v);
  else if (key == "input.locations") locations = v;
  else if (key == "partition.K_values") K_values = counts(v);
  else if (key == "partition.restarts") restarts = parse_count(key, v);
  else if (key == "partition.tol") em_tol = parse_real(key, v);
  else if (key == "partition.max_iter") em_max_iter = parse_count(key, v);
  else if (key == "partition.max_keep") max_keep = parse_count(key, v);
  else if (key == "partition.concomitant") concomitant = parse_bool(key, v);
  else if (key == "partition.weighted_assignment") weighted_assignment = parse_bool(key, v);
  else if (key == "chain.n_iter") n_iter = parse_count(key, v);
  else if (key == "chain.burn_in") burn_in = parse_count(key, v);
  else if (key == "chain.thin") thin = parse_count(key, v);
  else if (key == "chain.adapt_window") adapt_window = parse_count(key, v);
  else if (key == "chain.nu") nu = parse_real(key, v);
  else if (key == "evidence.method") evidence_method = v;
  else if (key == "evidence.deltas") deltas = reals(v);
  else if (key == "evidence.population_variance") population_variance = parse_bool(key, v);
  else if (key == "predict.grid_nx") grid_nx = parse_count(key, v);
  else if (key == "predict.grid_ny") grid_ny = parse_count(key, v);
  else if (key == "predict.n_draws") n_draws = parse_count(key, v);
  else if (key == "predict.include_nugget") include_nugget = parse_bool(key, v);
  else if (key == "predict.joint") joint = parse_bool(key, v);
  else if (key == "predict.quantiles") quantiles = reals(v);
  else if (key == "predict.write_draws") write_predictive_draws = parse_bool(key, v);
  else if (key == "variogram.bins") variogram_bins = parse_count(key, v);
  else if (key == "variogram.bootstrap") bootstrap = parse_count(key, v);
  else if (key == "variogram.subregions") {
    auto parts = split_list(v, 'x');
    if (parts.size() != 2) throw InputError("config: variogram.subregions expects RxC, got '" + v + "'");
    subregion_rows = parse_count(key, parts[0]);
    subregion_cols = parse_count(key, parts[1]);
  } else if (key == "evaluate.enabled") evaluate = parse_bool(key, v);
  else if (key == "evaluate.schemes") schemes = split_list(v);
  else if (key == "evaluate.folds") folds = parse_count(key, v);
  else if (key == "evaluate.block_dlon") block_dlon = parse_real(key, v);
  else if (key == "evaluate.block_dlat") block_dlat = parse_real(key, v);
  else if (key == "evaluate.block_min_size") block_min_size = parse_count(key, v);
  else if (key == "evaluate.circular_neighbors") circular_neighbors = parse_count(key, v);
  else if (key == "evaluate.circular_sets") circular_sets = parse_count(key, v);
  else if (key == "evaluate.strict") strict = parse_bool(key, v);
  else if (key == "evaluate.baseline") baseline = parse_bool(key, v);
  else if (key == "run.seed") seed = parse_count(key, v);
  else if (key == "run.output") output = v;
  else if (key == "run.jobs") jobs = parse_count(key, v);
  else throw InputError("config: unknown key '" + key + "'");
}

void PipelineConfig::validate() const {
  chain().validate();
  if (K_values.empty()) throw InputError("config: partition.K_values is empty");
  for (auto K : K_values)
    if (K == 0) throw InputError("config: K values must be positive");
  if (max_keep == 0) throw InputError("config: partition.max_keep must be positive");
  for (double d : deltas)
    if (!(d > 0.0 && d < 1.0)) throw InputError("config: evidence deltas must lie in (0,1)");
  for (double q : quantiles)
    if (!(q >= 0.0 && q <= 1.0)) throw InputError("config: quantiles must lie in [0,1]");
  if (n_draws < 2) throw InputError("config: predict.n_draws must be at least 2");
  if (grid_nx == 0 || grid_ny == 0) throw InputError("config: prediction grid must be nonempty");
  if (jobs == 0) throw InputError("config: run.jobs must be positive");
  for (const auto& s : schemes)
    if (s != "kfold" && s != "block" && s != "circular") throw InputError("config: unknown scheme '" + s + "'");
}

std::map<std::string, std::string> PipelineConfig::canonical() const {
  return {
      {"input.observations", observations},
      {"input.value_column", value_column},
      {"input.log_transform", b2s(log_transform)},
      {"input.covariates", covariates},
      {"input.category_columns", join(category_columns)},
      {"input.locations", locations},
      {"partition.K_values", join(K_values)},
      {"partition.restarts", std::to_string(restarts)},
      {"partition.tol", format_double(em_tol)},
      {"partition.max_iter", std::to_string(em_max_iter)},
      {"partition.max_keep", std::to_string(max_keep)},
      {"partition.concomitant", b2s(concomitant)},
      {"partition.weighted_assignment", b2s(weighted_assignment)},
      {"chain.n_iter", std::to_string(n_iter)},
      {"chain.burn_in", std::to_string(burn_in)},
      {"chain.thin", std::to_string(thin)},
      {"chain.adapt_window", std::to_string(adapt_window)},
      {"chain.nu", format_double(nu)},
      {"evidence.method", evidence_method},
      {"evidence.deltas", join(deltas)},
      {"evidence.population_variance", b2s(population_variance)},
      {"predict.grid_nx", std::to_string(grid_nx)},
      {"predict.grid_ny", std::to_string(grid_ny)},
      {"predict.n_draws", std::to_string(n_draws)},
      {"predict.include_nugget", b2s(include_nugget)},
      {"predict.joint", b2s(joint)},
      {"predict.quantiles", join(quantiles)},
      {"predict.write_draws", b2s(write_predictive_draws)},
      {"variogram.bins", std::to_string(variogram_bins)},
      {"variogram.bootstrap", std::to_string(bootstrap)},
      {"variogram.subregions", std::to_string(subregion_rows) + "x" + std::to_string(subregion_cols)},
      {"evaluate.enabled", b2s(evaluate)},
      {"evaluate.schemes", join(schemes)},
      {"evaluate.folds", std::to_string(folds)},
      {"evaluate.block_dlon", format_double(block_dlon)},
      {"evaluate.block_dlat", format_double(block_dlat)},
      {"evaluate.block_min_size", std::to_string(block_min_size)},
      {"evaluate.circular_neighbors", std::to_string(circular_neighbors)},
      {"evaluate.circular_sets", std::to_string(circular_sets)},
      {"evaluate.strict", b2s(strict)},
      {"evaluate.baseline", b2s(baseline)},
      {"run.seed", std::to_string(seed)},
      {"run.output", output},
      {"run.jobs", std::to_string(jobs)},
  };
}

ChainConfig PipelineConfig::chain() const {
  ChainConfig c;
  c.n_iter = n_iter;
  c.burn_in = burn_in;
  c.thin = thin;
  c.adapt_window = adapt_window;
  c.nu = nu;
  c.seed = RngSeed{seed};
  return c;
}

CandidateOptions PipelineConfig::candidates() const {
  CandidateOptions o;
  o.K_values = K_values;
  o.em.restarts = restarts;
  o.em.tol = em_tol;
  o.em.max_iter = em_max_iter;
  o.max_keep = max_keep;
  o.concomitant = concomitant;
  o.weighted_assignment = weighted_assignment;
  o.jobs = jobs;
  return o;
}

EvidenceOptions PipelineConfig::evidence() const {
  EvidenceOptions o;
  o.deltas = deltas;
  o.divisor = population_variance ? VarianceDivisor::Population : VarianceDivisor::Unbiased;
  return o;
}

PipelineConfig load_config(const std::string& path) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(path, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw InputError("config '" + path + "': " + e.what());
  }
  PipelineConfig cfg;
  for (const auto& [section, body] : tree) {
    if (body.empty()) {
      cfg.set(section, body.data());  // top-level key written as section.key = value
      continue;
    }
    for (const auto& [key, value] : body) cfg.set(section + "." + key, value.data());
  }
  return cfg;
}

std::string config_hash(const std::map<std::string, std::string>& canonical) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  auto feed = [&h](const std::string& s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& [k, v] : canonical) {
    feed(k);
    feed("=");
    feed(v);
    feed("\n");
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace nsgp
