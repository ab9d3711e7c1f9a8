#pragma once

// Command-line front end: simulate, estimate, project, fit, test, spectral
// and replay. Every run emits a JSON document
//   {tool_version, subcommand, config_echo, seed, results, warnings, runtime_ms}
// (for simulate, as a sidecar next to the CSV). `replay <report.json>`
// re-executes a run from its config_echo.
//
// Exit codes: 0 success, 1 usage error, 2 data or format error,
// 3 numerical failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdint>
#include <functional>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <maxdep/maxdep.hpp>

#include "csv_io.hpp"

namespace maxdep::cli {

using json = nlohmann::ordered_json;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::string subcommand;
  std::string input;
  std::string output = "-";
  std::string sidecar;
  std::string plot_csv;
  std::string atoms_output;
  std::optional<std::uint64_t> seed;

  // simulate / spectral
  std::string model;
  std::optional<std::size_t> n;
  std::optional<double> theta;
  std::size_t dim = 2;
  std::string sites;
  std::vector<std::string> site;
  double range = 1.0;
  std::string correlation = "exponential";
  double truncation = 5.0;
  std::optional<double> sigma;
  std::string covariance;
  double padding = 5.0;
  std::string spectral;
  std::string margins;
  std::size_t draws = 100000;

  // estimate / project / fit
  std::string method = "cfg";
  std::size_t resolution = 20;
  bool corrected = false;
  double weight = 0.5;
  std::size_t atoms_resolution = 0;
  std::string family = "logistic";
  std::optional<double> lower;
  std::optional<double> upper;

  // test
  std::string kind;
  std::size_t replicates = 500;
  std::string m_set = "2,3,4,5";
};

namespace detail {

struct EchoEntry {
  std::string name;
  std::function<std::optional<json>()> value;
};

template <class T>
std::optional<json> echo_value(const T& v) {
  return json(v);
}
template <class T>
std::optional<json> echo_value(const std::optional<T>& v) {
  if (!v) return std::nullopt;
  return json(*v);
}
inline std::optional<json> echo_value(const std::string& v) {
  if (v.empty()) return std::nullopt;
  return json(v);
}
inline std::optional<json> echo_value(const std::vector<std::string>& v) {
  if (v.empty()) return std::nullopt;
  return json(v);
}

class Registry {
 public:
  template <class T>
  CLI::Option* add(CLI::App* sub, const std::string& name, T& target, const std::string& help) {
    entries_[sub].push_back({name, [&target] { return echo_value(target); }});
    return sub->add_option("--" + name, target, help);
  }
  CLI::Option* flag(CLI::App* sub, const std::string& name, bool& target, const std::string& help) {
    entries_[sub].push_back({name, [&target]() -> std::optional<json> {
                               if (!target) return std::nullopt;
                               return json(true);
                             }});
    return sub->add_flag("--" + name, target, help);
  }
  json echo(CLI::App* sub) const {
    json out = json::object();
    for (const auto& e : entries_.at(sub)) {
      if (auto v = e.value()) out[e.name] = *v;
    }
    return out;
  }

 private:
  std::map<CLI::App*, std::vector<EchoEntry>> entries_;
};

inline json report_skeleton(const std::string& subcommand, const json& echo, std::uint64_t seed) {
  json report;
  report["tool_version"] = maxdep::version;
  report["subcommand"] = subcommand;
  report["config_echo"] = echo;
  report["seed"] = seed;
  report["results"] = json::object();
  report["warnings"] = json::array();
  report["runtime_ms"] = 0.0;
  return report;
}

inline void emit(const std::string& path, const std::string& content, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << content;
  } else {
    write_atomic(path, content);
  }
}

inline json matrix_json(const RowMatrix& m) {
  json rows = json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) rows.push_back(std::vector<double>(m.row(i).begin(), m.row(i).end()));
  return rows;
}

inline SiteLayout load_sites(const RunConfig& cfg) {
  if (!cfg.sites.empty() && !cfg.site.empty()) throw UsageError("give either --sites or --site, not both");
  if (!cfg.sites.empty()) {
    const CsvTable table = read_csv(cfg.sites);
    if (table.values.rows() == 0) throw DataError(cfg.sites + ": no sites");
    try {
      return SiteLayout(table.values);
    } catch (const std::invalid_argument& e) {
      throw DataError(cfg.sites + ": " + e.what());
    }
  }
  if (cfg.site.empty()) throw UsageError("spatial models need --sites <csv> or --site x[,y] (repeatable)");
  std::vector<std::vector<double>> points;
  for (const auto& s : cfg.site) {
    std::vector<double> p;
    for (const auto& f : split(s)) p.push_back(parse_double(f, "--site"));
    points.push_back(std::move(p));
  }
  return SiteLayout::from_points(points);
}

inline SpectralProcessConfig process_config(const RunConfig& cfg, const SiteLayout& sites) {
  if (cfg.model == "schlather") {
    return SchlatherModel{parse_correlation(cfg.correlation), cfg.range, cfg.truncation};
  }
  if (cfg.model == "smith") {
    const std::size_t p = sites.space_dimension();
    SmithModel model;
    model.padding = cfg.padding;
    if (!cfg.covariance.empty()) {
      for (const auto& f : split(cfg.covariance)) model.covariance.push_back(parse_double(f, "--covariance"));
    } else {
      const double s = cfg.sigma.value_or(1.0);
      model.covariance.assign(p * p, 0.0);
      for (std::size_t c = 0; c < p; ++c) model.covariance[c * p + c] = s * s;
    }
    return model;
  }
  if (cfg.model == "unit") return UnitModel{};
  throw UsageError("unknown spatial model '" + cfg.model + "'");
}

inline DiscreteSpectralMeasure load_measure(const std::string& path) {
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw DataError(path + ": " + e.what());
  }
  const json* node = &doc;
  if (doc.contains("results") && doc["results"].contains("measure")) node = &doc["results"]["measure"];
  if (!node->contains("atoms") || !node->contains("masses")) throw DataError(path + ": expected {atoms, masses}");
  const auto atoms = (*node)["atoms"].get<std::vector<std::vector<double>>>();
  const auto masses = (*node)["masses"].get<std::vector<double>>();
  try {
    return DiscreteSpectralMeasure(RowMatrix::from_rows(atoms), masses);
  } catch (const std::invalid_argument& e) {
    throw DataError(path + ": " + e.what());
  }
}

inline Dataset load_dataset(const std::string& path) {
  const CsvTable table = read_csv(path);
  if (table.values.rows() < 2) throw DataError(path + ": need at least 2 data rows");
  if (table.values.cols() < 2) throw DataError(path + ": need at least 2 columns");
  return Dataset(table.values, table.header);
}

struct PilotInput {
  RowMatrix points;
  std::vector<double> values;
  std::size_t dimension = 0;
  std::size_t resolution = 0;
};

inline bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

/// Pilot values from an `estimate` report, or estimated from a data CSV.
inline PilotInput load_pilot(const RunConfig& cfg, json& warnings) {
  if (ends_with(cfg.input, ".json")) {
    json doc;
    try {
      doc = json::parse(read_file(cfg.input));
    } catch (const json::parse_error& e) {
      throw DataError(cfg.input + ": " + e.what());
    }
    if (!doc.contains("results") || !doc["results"].contains("grid") || !doc["results"].contains("values")) {
      throw DataError(cfg.input + ": not an estimate report (missing results.grid / results.values)");
    }
    const auto& r = doc["results"];
    PilotInput pilot;
    pilot.points = RowMatrix::from_rows(r["grid"].get<std::vector<std::vector<double>>>());
    pilot.values = r["values"].get<std::vector<double>>();
    pilot.dimension = pilot.points.cols();
    pilot.resolution = r.value("resolution", std::size_t{0});
    if (pilot.values.size() != pilot.points.rows() || pilot.points.rows() == 0) {
      throw DataError(cfg.input + ": grid and values disagree");
    }
    return pilot;
  }
  const Dataset data = load_dataset(cfg.input);
  const PseudoObservations pobs = pseudo_observations(data, RankScaling::over_n_plus_1);
  if (pobs.tied_observations() > 0) warnings.push_back(std::to_string(pobs.tied_observations()) + " tied observations");
  const DependenceEstimate est =
      estimate_surface(pobs, cfg.resolution, parse_estimator_method(cfg.method), true, cfg.weight);
  return {est.grid.points(), est.values, est.grid.dimension(), est.grid.resolution()};
}

inline std::vector<int> parse_m_set(const std::string& text) {
  std::vector<int> out;
  for (const auto& f : split(text)) {
    const double m = parse_double(f, "--m-set");
    if (m != std::floor(m) || m < 2) throw UsageError("--m-set entries must be integers >= 2");
    out.push_back(static_cast<int>(m));
  }
  if (out.empty()) throw UsageError("--m-set is empty");
  return out;
}

inline json test_results(const TestReport& r) {
  json out;
  out["name"] = r.name;
  out["statistic"] = r.statistic;
  out["p_value"] = r.p_value;
  out["B"] = r.replicates;
  json detail = json::object();
  json per_m = json::object();
  for (const auto& [k, v] : r.details) {
    if (k.rfind("S_m", 0) == 0) per_m[k.substr(3)] = v;
    else detail[k] = v;
  }
  if (!per_m.empty()) out["per_m"] = per_m;
  out["detail"] = detail;
  return out;
}

// ---------------------------------------------------------------- commands

inline void cmd_simulate(const RunConfig& cfg, std::uint64_t seed, json& report, std::ostream& out) {
  if (!cfg.n) throw UsageError("--n is required");
  const std::size_t n = *cfg.n;
  if (n < 1) throw UsageError("--n must be >= 1");
  RowMatrix values;
  std::vector<std::string> header;
  std::string margins = cfg.margins;
  if (cfg.model == "logistic") {
    if (!cfg.theta) throw UsageError("--model logistic needs --theta");
    if (cfg.dim < 2) throw UsageError("--dim must be >= 2");
    values = sample_logistic_ev(n, cfg.dim, *cfg.theta, seed).values();
    if (margins.empty()) margins = "uniform";
  } else if (cfg.model == "spectral") {
    if (cfg.spectral.empty()) throw UsageError("--model spectral needs --spectral <measure.json>");
    values = sample_spectral_ev(load_measure(cfg.spectral), n, seed).values();
    if (margins.empty()) margins = "uniform";
  } else if (cfg.model == "schlather" || cfg.model == "smith") {
    const SiteLayout sites = load_sites(cfg);
    values = simulate_field(process_config(cfg, sites), sites, n, seed).values;
    if (margins.empty()) margins = "frechet";
  } else {
    throw UsageError("--model must be one of logistic, schlather, smith, spectral");
  }
  if (margins == "frechet" && (cfg.model == "logistic" || cfg.model == "spectral")) {
    for (double& x : values.data()) x = -1.0 / std::log(x);
  } else if (margins == "uniform" && (cfg.model == "schlather" || cfg.model == "smith")) {
    for (double& x : values.data()) x = std::exp(-1.0 / x);
  } else if (margins != "uniform" && margins != "frechet") {
    throw UsageError("--margins must be uniform or frechet");
  }
  for (std::size_t d = 0; d < values.cols(); ++d) {
    header.push_back((cfg.model == "schlather" || cfg.model == "smith" ? "S" : "U") + std::to_string(d + 1));
  }
  emit(cfg.output, to_csv(header, values), out);
  report["results"]["rows"] = values.rows();
  report["results"]["columns"] = header;
  report["results"]["margins"] = margins;
  report["results"]["output"] = cfg.output;
}

inline void cmd_estimate(const RunConfig& cfg, json& report) {
  if (cfg.input.empty()) throw UsageError("--input is required");
  if (cfg.resolution < 1) throw UsageError("--resolution must be >= 1");
  const Dataset data = load_dataset(cfg.input);
  const PseudoObservations pobs = pseudo_observations(data, RankScaling::over_n_plus_1);
  const EstimatorMethod method = parse_estimator_method(cfg.method);
  const NegLogRanks ranks(pobs);
  const DependenceEstimate raw = estimate_surface(ranks, cfg.resolution, method, false, cfg.weight);
  const DependenceEstimate corr = estimate_surface(ranks, cfg.resolution, method, true, cfg.weight);
  auto& r = report["results"];
  r["method"] = to_string(method);
  r["n"] = data.size();
  r["dimension"] = data.dimension();
  r["resolution"] = cfg.resolution;
  r["corrected"] = cfg.corrected;
  if (method == EstimatorMethod::weighted) r["pickands_weight"] = cfg.weight;
  r["ties"] = pobs.tied_observations();
  r["grid"] = matrix_json(raw.grid.points());
  r["raw"] = raw.values;
  r["corrected_values"] = corr.values;
  r["values"] = cfg.corrected ? corr.values : raw.values;
  std::size_t outside = 0;
  const auto& chosen = cfg.corrected ? corr.values : raw.values;
  for (std::size_t j = 0; j < raw.grid.size(); ++j) {
    const auto v = raw.grid.point(j);
    const double lower = *std::max_element(v.begin(), v.end());
    if (chosen[j] < lower || chosen[j] > 1.0) ++outside;
  }
  r["points_outside_bounds"] = outside;
  if (pobs.tied_observations() > 0) {
    report["warnings"].push_back(std::to_string(pobs.tied_observations()) + " tied observations; midranks used");
  }
  if (!cfg.plot_csv.empty()) {
    std::string csv;
    for (std::size_t d = 0; d < data.dimension(); ++d) csv += "v" + std::to_string(d + 1) + ",";
    csv += "A_hat,method\n";
    for (std::size_t j = 0; j < raw.grid.size(); ++j) {
      for (double x : raw.grid.point(j)) csv += format_double(x) + ",";
      csv += format_double(chosen[j]) + "," + to_string(method) + (cfg.corrected ? "_corrected" : "") + "\n";
    }
    write_atomic(cfg.plot_csv, csv);
  }
}

inline void cmd_project(const RunConfig& cfg, json& report) {
  if (cfg.input.empty()) throw UsageError("--input is required");
  const PilotInput pilot = load_pilot(cfg, report["warnings"]);
  std::size_t k = cfg.atoms_resolution;
  if (k == 0) k = pilot.resolution > 0 ? pilot.resolution : 20;
  const SimplexGrid atoms(pilot.dimension, k);
  const ProjectionResult result = project_pickands(pilot.points, pilot.values, atoms);
  auto& r = report["results"];
  r["atoms_resolution"] = k;
  r["objective"] = result.objective;
  r["constraint_residual"] = result.constraint_residual;
  r["iterations"] = result.iterations;
  r["penalty"] = result.penalty;
  r["clipped"] = result.clipped;
  r["kkt_satisfied"] = result.kkt_satisfied;
  r["measure"]["atoms"] = matrix_json(result.measure.atoms());
  r["measure"]["masses"] = result.measure.masses();
  std::vector<double> projected(pilot.points.rows());
  double change = 0.0;
  for (std::size_t j = 0; j < pilot.points.rows(); ++j) {
    projected[j] = result.measure.pickands(pilot.points.row(j));
    change = std::max(change, std::abs(projected[j] - pilot.values[j]));
  }
  r["grid"] = matrix_json(pilot.points);
  r["pilot"] = pilot.values;
  r["projected"] = projected;
  r["max_abs_change"] = change;
  if (result.clipped > 0) report["warnings"].push_back(std::to_string(result.clipped) + " pilot values clipped to [max v, 1]");
  if (!result.kkt_satisfied) report["warnings"].push_back("active-set refinement stopped before certifying optimality");
}

inline void cmd_fit(const RunConfig& cfg, json& report) {
  if (cfg.input.empty()) throw UsageError("--input is required");
  const PilotInput pilot = load_pilot(cfg, report["warnings"]);
  const ParametricFamily family = parse_family(cfg.family);
  std::optional<ParameterBounds> bounds;
  if (cfg.lower || cfg.upper) {
    const ParameterBounds def = default_bounds(family);
    bounds = ParameterBounds{cfg.lower.value_or(def.lower), cfg.upper.value_or(def.upper)};
  }
  const FitResult fit = fit_parametric_min_distance(pilot.points, pilot.values, family, bounds);
  const ParameterBounds used = bounds.value_or(default_bounds(family));
  auto& r = report["results"];
  r["family"] = to_string(family);
  r["parameter"] = fit.parameter;
  r["objective"] = fit.objective;
  r["lower"] = used.lower;
  r["upper"] = used.upper;
  r["at_boundary"] = fit.at_boundary;
  r["multimodal_scan"] = fit.multimodal_scan;
  if (fit.at_boundary) report["warnings"].push_back("fitted parameter lies on the boundary of its range");
  if (fit.multimodal_scan) report["warnings"].push_back("objective scan has several local minima");
}

inline void cmd_test(const RunConfig& cfg, std::uint64_t seed, json& report) {
  if (cfg.input.empty()) throw UsageError("--input is required");
  if (cfg.replicates < 1) throw UsageError("--B must be >= 1");
  const Dataset data = load_dataset(cfg.input);
  TestReport result;
  if (cfg.kind == "kendall") {
    if (data.dimension() != 2) throw DataError("kendall test needs exactly 2 columns");
    result = kendall_moment_test(data);
  } else if (cfg.kind == "cvm") {
    result = cvm_maxstability_test(data, {parse_m_set(cfg.m_set), cfg.replicates, seed});
  } else if (cfg.kind == "comparison") {
    result = estimator_comparison_test(data, {parse_estimator_method(cfg.method), cfg.replicates, seed, 0});
  } else if (cfg.kind == "gof") {
    const ParametricFamily family = parse_family(cfg.family);
    if (family == ParametricFamily::husler_reiss && data.dimension() != 2) {
      throw DataError("husler_reiss goodness of fit needs exactly 2 columns");
    }
    GofOptions options;
    options.family = family;
    options.replicates = cfg.replicates;
    options.seed = seed;
    result = gof_parametric_test(data, options);
  } else {
    throw UsageError("--kind must be one of kendall, cvm, comparison, gof");
  }
  report["results"] = test_results(result);
  for (const auto& w : result.warnings) report["warnings"].push_back(w);
}

inline void cmd_spectral(const RunConfig& cfg, std::uint64_t seed, json& report) {
  const SiteLayout sites = load_sites(cfg);
  const SpectralProcessConfig config = process_config(cfg, sites);
  const EmpiricalSpectralMeasure result = empirical_spectral_measure(config, sites, cfg.draws, seed);
  auto& r = report["results"];
  r["model"] = model_name(config);
  r["draws"] = result.draws;
  r["zero_draws"] = result.zero_draws;
  r["atoms"] = result.measure.size();
  r["moments"] = result.moments;
  r["moment_standard_errors"] = result.moment_standard_errors;
  r["moment_residual"] = result.moment_residual;
  r["total_mass"] = result.total_mass;
  r["total_mass_standard_error"] = result.total_mass_standard_error;
  r["pickands_barycenter"] = result.measure.pickands(SimplexPoint::barycenter(sites.size()).values());
  if (!cfg.atoms_output.empty()) {
    std::vector<std::string> header;
    for (std::size_t d = 0; d < sites.size(); ++d) header.push_back("s" + std::to_string(d + 1));
    header.push_back("mass");
    RowMatrix table(result.measure.size(), sites.size() + 1);
    for (std::size_t k = 0; k < result.measure.size(); ++k) {
      const auto s = result.measure.atom(k);
      std::copy(s.begin(), s.end(), table.row(k).begin());
      table(k, sites.size()) = result.measure.mass(k);
    }
    write_atomic(cfg.atoms_output, to_csv(header, table));
  }
}

inline std::vector<std::string> replay_arguments(const std::string& path, const std::string& output,
                                                 const std::string& sidecar) {
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw DataError(path + ": " + e.what());
  }
  if (!doc.contains("subcommand") || !doc.contains("config_echo")) {
    throw DataError(path + ": not a report (missing subcommand / config_echo)");
  }
  std::vector<std::string> args{doc["subcommand"].get<std::string>()};
  for (const auto& [key, value] : doc["config_echo"].items()) {
    if ((key == "output" && !output.empty()) || (key == "sidecar" && !sidecar.empty())) continue;
    if (value.is_boolean()) {
      if (value.get<bool>()) args.push_back("--" + key);
    } else if (value.is_array()) {
      for (const auto& item : value) {
        args.push_back("--" + key);
        args.push_back(item.is_string() ? item.get<std::string>() : item.dump());
      }
    } else if (value.is_string()) {
      args.push_back("--" + key);
      args.push_back(value.get<std::string>());
    } else if (value.is_number_float()) {
      args.push_back("--" + key);
      args.push_back(format_double(value.get<double>()));
    } else {
      args.push_back("--" + key);
      args.push_back(value.dump());
    }
  }
  if (!output.empty()) {
    args.push_back("--output");
    args.push_back(output);
  }
  if (!sidecar.empty() && args.front() == "simulate") {
    args.push_back("--sidecar");
    args.push_back(sidecar);
  }
  return args;
}

}  // namespace detail

/// Runs one invocation; args excludes the program name.
inline int run(std::vector<std::string> args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  using namespace detail;
  for (int depth = 0; depth < 2; ++depth) {
    RunConfig cfg;
    Registry reg;
    CLI::App app{"maxdep: rank-based inference for max-stable dependence", "maxdep"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(maxdep::version));

    auto common = [&](CLI::App* sub) {
      reg.add(sub, "output", cfg.output, "Output path ('-' for standard output)");
      reg.add(sub, "seed", cfg.seed, "Random seed (drawn from entropy and recorded when omitted)");
    };
    auto spatial = [&](CLI::App* sub) {
      reg.add(sub, "model", cfg.model, "Model");
      reg.add(sub, "sites", cfg.sites, "CSV of site coordinates (header x[,y])");
      reg.add(sub, "site", cfg.site, "Inline site 'x[,y]' (repeatable)")->allow_extra_args(false);
      reg.add(sub, "range", cfg.range, "Schlather correlation range");
      reg.add(sub, "correlation", cfg.correlation, "Schlather correlation: exponential, gaussian, constant");
      reg.add(sub, "truncation", cfg.truncation, "Schlather truncation bound B");
      reg.add(sub, "sigma", cfg.sigma, "Smith isotropic kernel scale (Sigma = sigma^2 I)");
      reg.add(sub, "covariance", cfg.covariance, "Smith kernel covariance, row-major 'a,b,c,d'");
      reg.add(sub, "padding", cfg.padding, "Smith window padding in kernel standard deviations");
    };

    CLI::App* simulate = app.add_subcommand("simulate", "Simulate max-stable data to CSV");
    common(simulate);
    spatial(simulate);
    simulate->get_option("--model")->required();
    reg.add(simulate, "n", cfg.n, "Number of rows")->required();
    reg.add(simulate, "theta", cfg.theta, "Logistic dependence parameter (>= 1)");
    reg.add(simulate, "dim", cfg.dim, "Logistic dimension");
    reg.add(simulate, "spectral", cfg.spectral, "Spectral measure JSON (model spectral)");
    reg.add(simulate, "margins", cfg.margins, "uniform or frechet");
    reg.add(simulate, "sidecar", cfg.sidecar, "Sidecar JSON path (default <output>.json)");

    CLI::App* estimate = app.add_subcommand("estimate", "Estimate the Pickands function on a simplex grid");
    common(estimate);
    reg.add(estimate, "input", cfg.input, "Data CSV")->required();
    reg.add(estimate, "method", cfg.method, "pickands, cfg or weighted");
    reg.add(estimate, "resolution", cfg.resolution, "Grid resolution k");
    reg.flag(estimate, "corrected", cfg.corrected, "Report endpoint-corrected values");
    reg.add(estimate, "weight", cfg.weight, "Pickands weight for the weighted method");
    reg.add(estimate, "plot-csv", cfg.plot_csv, "Long-format CSV (v, A_hat, method)");

    CLI::App* project = app.add_subcommand("project", "Project a pilot estimate onto valid dependence functions");
    common(project);
    reg.add(project, "input", cfg.input, "estimate report (.json) or data CSV")->required();
    reg.add(project, "atoms-resolution", cfg.atoms_resolution, "Atom grid resolution (default: pilot resolution)");
    reg.add(project, "method", cfg.method, "Estimator when the input is a CSV");
    reg.add(project, "resolution", cfg.resolution, "Pilot resolution when the input is a CSV");

    CLI::App* fit = app.add_subcommand("fit", "Minimum-distance fit of a parametric family");
    common(fit);
    reg.add(fit, "input", cfg.input, "estimate report (.json) or data CSV")->required();
    reg.add(fit, "family", cfg.family, "logistic or husler_reiss");
    reg.add(fit, "lower", cfg.lower, "Lower parameter bound");
    reg.add(fit, "upper", cfg.upper, "Upper parameter bound");
    reg.add(fit, "method", cfg.method, "Estimator when the input is a CSV");
    reg.add(fit, "resolution", cfg.resolution, "Pilot resolution when the input is a CSV");

    CLI::App* test = app.add_subcommand("test", "Tests of max-stability and goodness of fit");
    common(test);
    reg.add(test, "kind", cfg.kind, "kendall, cvm, comparison or gof")->required();
    reg.add(test, "input", cfg.input, "Data CSV")->required();
    reg.add(test, "B", cfg.replicates, "Resampling replicates");
    reg.add(test, "m-set", cfg.m_set, "Comma-separated integer m values (cvm)");
    reg.add(test, "method", cfg.method, "Estimator for the comparison test");
    reg.add(test, "family", cfg.family, "Family for the gof test");

    CLI::App* spectral = app.add_subcommand("spectral", "Recover the spectral measure of a spatial model");
    common(spectral);
    spatial(spectral);
    spectral->get_option("--model")->required();
    reg.add(spectral, "N", cfg.draws, "Number of spectral function draws");
    reg.add(spectral, "atoms-output", cfg.atoms_output, "CSV of atoms and masses");

    std::string replay_path;
    std::string replay_output;
    std::string replay_sidecar;
    CLI::App* replay = app.add_subcommand("replay", "Re-run a command from its JSON report");
    replay->add_option("report", replay_path, "Report or sidecar JSON")->required();
    replay->add_option("--output", replay_output, "Override the output path");
    replay->add_option("--sidecar", replay_sidecar, "Override the sidecar path");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
      app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
      return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
      return app.exit(e, out, err);
    } catch (const CLI::CallForVersion& e) {
      return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
      app.exit(e, out, err);
      for (CLI::App* sub : app.get_subcommands()) err << sub->help();
      if (app.get_subcommands().empty()) err << app.help();
      return 1;
    }

    CLI::App* active = app.get_subcommands().front();
    cfg.subcommand = active->get_name();
    if (active == replay) {
      try {
        args = replay_arguments(replay_path, replay_output, replay_sidecar);
      } catch (const DataError& e) {
        err << "maxdep: " << e.what() << "\n";
        return 2;
      }
      continue;
    }

    if (!cfg.seed) cfg.seed = (static_cast<std::uint64_t>(std::random_device{}()) << 32) | std::random_device{}();
    const std::uint64_t seed = *cfg.seed;
    const auto started = std::chrono::steady_clock::now();
    json report = report_skeleton(cfg.subcommand, reg.echo(active), seed);
    auto finish = [&] {
      report["runtime_ms"] =
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
    };
    try {
      if (cfg.subcommand == "simulate") {
        cmd_simulate(cfg, seed, report, out);
        finish();
        std::string sidecar = cfg.sidecar;
        if (sidecar.empty() && cfg.output != "-") sidecar = cfg.output + ".json";
        if (!sidecar.empty()) write_atomic(sidecar, report.dump(2) + "\n");
        return 0;
      }
      if (cfg.subcommand == "estimate") cmd_estimate(cfg, report);
      else if (cfg.subcommand == "project") cmd_project(cfg, report);
      else if (cfg.subcommand == "fit") cmd_fit(cfg, report);
      else if (cfg.subcommand == "test") cmd_test(cfg, seed, report);
      else if (cfg.subcommand == "spectral") cmd_spectral(cfg, seed, report);
      finish();
      emit(cfg.output, report.dump(2) + "\n", out);
      return 0;
    } catch (const UsageError& e) {
      err << "maxdep " << cfg.subcommand << ": " << e.what() << "\n" << active->help();
      return 1;
    } catch (const NumericalError& e) {
      finish();
      report["results"] = json::object();
      report["error"] = {{"type", "numerical"}, {"message", e.what()}};
      err << "maxdep " << cfg.subcommand << ": numerical failure: " << e.what() << "\n";
      try {
        emit(cfg.output == "-" || cfg.subcommand == "simulate" ? std::string("-") : cfg.output, report.dump(2) + "\n",
             cfg.subcommand == "simulate" ? err : out);
      } catch (...) {
      }
      return 3;
    } catch (const DataError& e) {
      err << "maxdep " << cfg.subcommand << ": " << e.what() << "\n";
      return 2;
    } catch (const json::exception& e) {
      err << "maxdep " << cfg.subcommand << ": malformed JSON input: " << e.what() << "\n";
      return 2;
    } catch (const std::invalid_argument& e) {
      err << "maxdep " << cfg.subcommand << ": " << e.what() << "\n";
      return 2;
    } catch (const std::exception& e) {
      err << "maxdep " << cfg.subcommand << ": " << e.what() << "\n";
      return 2;
    }
  }
  err << "maxdep: replay of a replay is not supported\n";
  return 1;
}

inline int run(int argc, char** argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  return run(std::vector<std::string>(argv + 1, argv + argc), out, err);
}

}  // namespace maxdep::cli
