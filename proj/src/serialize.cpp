#include "nsgp/serialize.hpp"

#include <fstream>
#include <iomanip>

#include "nsgp/error.hpp"

namespace nsgp {

using nlohmann::json;

json to_json(const MixtureModel& m) {
  json comps = json::array();
  for (const auto& c : m.components) {
    comps.push_back({{"mean", {c.mean(0), c.mean(1)}},
                     {"cov", {{c.cov(0, 0), c.cov(0, 1)}, {c.cov(1, 0), c.cov(1, 1)}}},
                     {"weight", c.weight}});
  }
  json j = {{"K", m.K()},
            {"log_likelihood", m.log_likelihood},
            {"em_iterations", m.em_iterations},
            {"converged", m.converged},
            {"components", comps}};
  if (m.concomitant) {
    json coef = json::array();
    for (Eigen::Index r = 0; r < m.concomitant->coefficients.rows(); ++r) {
      json row = json::array();
      for (Eigen::Index c = 0; c < m.concomitant->coefficients.cols(); ++c)
        row.push_back(m.concomitant->coefficients(r, c));
      coef.push_back(row);
    }
    j["concomitant"] = {{"category_names", m.concomitant->category_names},
                        {"levels", m.concomitant->levels},
                        {"coefficients", coef}};
  }
  return j;
}

MixtureModel mixture_from_json(const json& j) {
  MixtureModel m;
  m.log_likelihood = j.value("log_likelihood", 0.0);
  m.em_iterations = j.value("em_iterations", std::size_t{0});
  m.converged = j.value("converged", true);
  for (const auto& c : j.at("components")) {
    MixtureComponent comp;
    comp.mean << c.at("mean").at(0).get<double>(), c.at("mean").at(1).get<double>();
    const auto& cv = c.at("cov");
    comp.cov << cv.at(0).at(0).get<double>(), cv.at(0).at(1).get<double>(), cv.at(1).at(0).get<double>(),
        cv.at(1).at(1).get<double>();
    comp.weight = c.value("weight", 1.0);
    m.components.push_back(comp);
  }
  if (m.components.empty()) throw InputError("mixture JSON has no components");
  if (j.contains("concomitant")) {
    ConcomitantWeights cw;
    cw.category_names = j["concomitant"].at("category_names").get<std::vector<std::string>>();
    cw.levels = j["concomitant"].at("levels").get<std::vector<std::vector<std::string>>>();
    const auto& coef = j["concomitant"].at("coefficients");
    cw.coefficients.resize(static_cast<Eigen::Index>(coef.size()),
                           static_cast<Eigen::Index>(coef.empty() ? 0 : coef[0].size()));
    for (std::size_t r = 0; r < coef.size(); ++r)
      for (std::size_t c = 0; c < coef[r].size(); ++c)
        cw.coefficients(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = coef[r][c].get<double>();
    m.concomitant = std::move(cw);
  }
  return m;
}

json to_json(const PartitionSet& set) {
  json parts = json::array();
  for (const auto& p : set.partitions) {
    json j = to_json(p.mixture);
    j["id"] = p.id;
    j["weighted_assignment"] = p.weighted_assignment;
    parts.push_back(j);
  }
  return {{"partitions", parts}};
}

PartitionSet partitions_from_json(const json& j) {
  PartitionSet set;
  try {
    for (const auto& p : j.at("partitions")) {
      Partition part;
      part.id = p.at("id").get<std::size_t>();
      part.weighted_assignment = p.value("weighted_assignment", false);
      part.mixture = mixture_from_json(p);
      set.partitions.push_back(std::move(part));
    }
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed partitions JSON: ") + e.what());
  }
  if (set.partitions.empty()) throw InputError("partitions JSON lists no partitions");
  return set;
}

json to_json(const SegmentParams& p) {
  return {{"tau2", p.tau2}, {"sigma2", p.sigma2}, {"phi1", p.phi1}, {"phi2", p.phi2}, {"eta", p.eta}, {"nu", p.nu}};
}

SegmentParams segment_params_from_json(const json& j, double default_nu) {
  SegmentParams p;
  p.tau2 = j.at("tau2").get<double>();
  p.sigma2 = j.at("sigma2").get<double>();
  p.phi1 = j.at("phi1").get<double>();
  p.phi2 = j.at("phi2").get<double>();
  p.eta = j.value("eta", 0.0);
  p.nu = j.value("nu", default_nu);
  return p;
}

void write_json(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path + "'");
  out << std::setprecision(17) << j.dump(2) << '\n';
}

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw InputError(path + ": " + e.what());
  }
}

void write_draws_csv(const std::string& path, const PosteriorDraws& draws, std::size_t burn_in,
                     std::size_t thin) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path + "'");
  const std::size_t K = draws.states.empty() ? 0 : draws.states.front().segments.size();
  out << "iteration,mu";
  for (std::size_t k = 1; k <= K; ++k)
    out << ",tau2_" << k << ",sigma2_" << k << ",phi1_" << k << ",phi2_" << k << ",eta_" << k;
  out << ",loglik\n";
  for (std::size_t t = 0; t < draws.size(); ++t) {
    const auto& s = draws.states[t];
    out << (burn_in + t * thin + 1) << ',' << format_double(s.mu);
    for (const auto& p : s.segments)
      out << ',' << format_double(p.tau2) << ',' << format_double(p.sigma2) << ',' << format_double(p.phi1) << ','
          << format_double(p.phi2) << ',' << format_double(p.eta);
    out << ',' << format_double(draws.loglik[t]) << '\n';
  }
}

PosteriorDraws read_draws_csv(const std::string& path, std::size_t K, double nu) {
  const CsvTable t = read_csv(path);
  if (t.header.size() != 3 + 5 * K)
    throw InputError(path + ": expected " + std::to_string(3 + 5 * K) + " columns for K=" + std::to_string(K));
  const std::size_t c_mu = t.column("mu"), c_ll = t.column("loglik");
  PosteriorDraws d;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const std::string where = path + " row " + std::to_string(r + 1);
    ModelState s;
    s.mu = parse_double(row[c_mu], where);
    for (std::size_t k = 1; k <= K; ++k) {
      const std::string sfx = "_" + std::to_string(k);
      SegmentParams p;
      p.tau2 = parse_double(row[t.column("tau2" + sfx)], where);
      p.sigma2 = parse_double(row[t.column("sigma2" + sfx)], where);
      p.phi1 = parse_double(row[t.column("phi1" + sfx)], where);
      p.phi2 = parse_double(row[t.column("phi2" + sfx)], where);
      p.eta = parse_double(row[t.column("eta" + sfx)], where);
      p.nu = nu;
      s.segments.push_back(p);
    }
    d.states.push_back(std::move(s));
    d.loglik.push_back(parse_double(row[c_ll], where));
  }
  if (d.states.empty()) throw InputError(path + ": no draws");
  return d;
}

json diagnostics_json(const PosteriorDraws& d) {
  json frames = json::array();
  for (const auto& f : d.frames)
    frames.push_back({{"shift", {f.shift(0), f.shift(1)}},
                      {"scale", {f.scale(0), f.scale(1)}},
                      {"prior_only", f.prior_only},
                      {"degenerate", f.degenerate}});
  return {{"partition_id", d.partition_id},
          {"draws", d.size()},
          {"acceptance", d.diagnostics.acceptance},
          {"segment_sizes", d.diagnostics.segment_sizes},
          {"zero_acceptance_windows", d.diagnostics.zero_acceptance_windows},
          {"flags", d.diagnostics.flags},
          {"frames", frames}};
}

void write_assignments_csv(const std::string& path, const PartitionSet& set,
                           std::span<const Location> locations) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path + "'");
  out << "lon,lat,partition_id,segment\n";
  for (const auto& p : set.partitions)
    for (const auto& s : locations)
      out << format_double(s.lon) << ',' << format_double(s.lat) << ',' << p.id << ','
          << (assign_segment(p, s) + 1) << '\n';
}

EvidenceTable build_evidence_table(std::span<const PosteriorDraws> draws, std::size_t n_obs,
                                   const EvidenceOptions& options) {
  EvidenceTable t;
  std::vector<std::vector<LogMLEstimate>> per_partition;
  for (const auto& d : draws) {
    t.partition_ids.push_back(d.partition_id);
    per_partition.push_back(estimate_all(d.partition_id, d.loglik, n_obs, options));
  }
  if (per_partition.empty()) throw InputError("evidence: no draws supplied");
  const std::size_t M = per_partition.front().size();
  for (std::size_t m = 0; m < M; ++m) {
    t.methods.push_back(per_partition.front()[m].label());
    std::vector<double> col;
    for (const auto& est : per_partition) col.push_back(est[m].value);
    t.scaled.push_back(scale_log_ml(col));
    t.probabilities.push_back(partition_posterior(col, t.methods.back()).probabilities);
    t.log_ml.push_back(std::move(col));
  }
  return t;
}

void write_evidence_csv(const std::string& path, const EvidenceTable& t) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path + "'");
  out << "partition_id,method,log_ml,scaled_log_ml,probability\n";
  for (std::size_t m = 0; m < t.methods.size(); ++m)
    for (std::size_t j = 0; j < t.partition_ids.size(); ++j)
      out << t.partition_ids[j] << ',' << t.methods[m] << ',' << format_double(t.log_ml[m][j]) << ','
          << format_double(t.scaled[m][j]) << ',' << format_double(t.probabilities[m][j]) << '\n';
}

json to_json(const EvidenceTable& t) {
  json methods = json::object();
  for (std::size_t m = 0; m < t.methods.size(); ++m)
    methods[t.methods[m]] = {{"log_ml", t.log_ml[m]}, {"scaled_log_ml", t.scaled[m]},
                             {"probability", t.probabilities[m]}};
  return {{"partition_ids", t.partition_ids}, {"method_order", t.methods}, {"methods", methods}};
}

EvidenceTable evidence_from_json(const json& j) {
  EvidenceTable t;
  try {
    t.partition_ids = j.at("partition_ids").get<std::vector<std::size_t>>();
    t.methods = j.at("method_order").get<std::vector<std::string>>();
    for (const auto& m : t.methods) {
      const auto& e = j.at("methods").at(m);
      t.log_ml.push_back(e.at("log_ml").get<std::vector<double>>());
      t.scaled.push_back(e.at("scaled_log_ml").get<std::vector<double>>());
      t.probabilities.push_back(e.at("probability").get<std::vector<double>>());
    }
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed evidence JSON: ") + e.what());
  }
  return t;
}

void write_prediction_csv(const std::string& path, std::span<const Location> locations,
                          const PredictionSummary& s) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path + "'");
  out << "lon,lat,mean,sd";
  for (double p : s.probs) {
    const int pct = static_cast<int>(std::lround(p * 100));
    out << ",q" << (pct < 10 ? "0" : "") << pct;
  }
  out << '\n';
  for (std::size_t i = 0; i < locations.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    out << format_double(locations[i].lon) << ',' << format_double(locations[i].lat) << ','
        << format_double(s.mean(r)) << ',' << format_double(s.sd(r));
    for (Eigen::Index q = 0; q < s.quantiles.cols(); ++q) out << ',' << format_double(s.quantiles(r, q));
    out << '\n';
  }
}

void write_predictive_draws_csv(const std::string& path, const PredictiveDraws& d) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path + "'");
  out << "draw,partition_id,state";
  for (Eigen::Index c = 0; c < d.draws.cols(); ++c) out << ",loc" << (c + 1);
  out << '\n';
  for (Eigen::Index r = 0; r < d.draws.rows(); ++r) {
    const auto ur = static_cast<std::size_t>(r);
    out << (r + 1) << ',' << d.partition_trace[ur] << ',' << d.state_trace[ur];
    for (Eigen::Index c = 0; c < d.draws.cols(); ++c) out << ',' << format_double(d.draws(r, c));
    out << '\n';
  }
}

void write_variogram_csv(const std::string& path, const std::vector<SubregionVariogram>& cells) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path + "'");
  out << "row,col,n,bin,distance,gamma,pairs,fitted,lower,upper,nugget,partial_sill,range,range_identified\n";
  for (const auto& c : cells) {
    for (std::size_t b = 0; b < c.empirical.gamma.size(); ++b) {
      out << (c.row + 1) << ',' << (c.col + 1) << ',' << c.n << ',' << (c.empirical.bin_index[b] + 1) << ','
          << format_double(c.empirical.bin_centers[b]) << ',' << format_double(c.empirical.gamma[b]) << ','
          << c.empirical.counts[b] << ',';
      if (c.fit) {
        out << format_double((*c.fit)(c.empirical.bin_centers[b])) << ',';
        if (c.fit->bands)
          out << format_double(c.fit->bands->lower[b]) << ',' << format_double(c.fit->bands->upper[b]);
        else
          out << ',';
        out << ',' << format_double(c.fit->nugget) << ',' << format_double(c.fit->partial_sill) << ','
            << format_double(c.fit->range) << ',' << (c.fit->range_identified ? 1 : 0);
      } else {
        out << ",,,,,,";
      }
      out << '\n';
    }
  }
}

void write_score_table_csv(const std::string& path, const ScoreTable& table) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path + "'");
  std::vector<HoldoutKind> kinds;
  for (const auto& row : table.rows)
    for (const auto& s : row.schemes)
      if (std::find(kinds.begin(), kinds.end(), s.kind) == kinds.end()) kinds.push_back(s.kind);
  out << "model";
  for (auto k : kinds) out << ',' << holdout_name(k);
  out << '\n';
  for (const auto& row : table.rows) {
    out << row.model;
    for (auto k : kinds) {
      out << ',';
      for (const auto& s : row.schemes)
        if (s.kind == k) out << format_double(s.mean);
    }
    out << '\n';
  }
}

}  // namespace nsgp
