#pragma once

#include <Eigen/Dense>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <system_error>
#include <utility>
#include <vector>

#include <unistd.h>

#include "json.hpp"

#include "hierduals/applications.hpp"
#include "hierduals/errors.hpp"
#include "hierduals/solvers.hpp"

namespace hierduals {

inline constexpr const char* kVersion = "0.1.0";

using json = nlohmann::json;

/// Shortest-form decimals are not used: CSV fields always carry 17 significant digits.
inline std::string format_double(double v) {
  if (!std::isfinite(v)) throw RejectedInput("refusing to write a non-finite value");
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("error while reading '" + path + "'");
  return ss.str();
}

/// Writes to a sibling temporary file and renames it over `path`.
inline void write_file_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
    out << content;
    out.flush();
    if (!out) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw IoError("error while writing '" + tmp.string() + "'");
    }
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    std::error_code ignored;
    fs::remove(tmp, ignored);
    throw IoError("cannot rename onto '" + path + "': " + ec.message());
  }
}

// ---------------------------------------------------------------------------
// CSV.

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  std::size_t size() const noexcept { return rows.size(); }

  int index_of(const std::string& name) const {
    for (std::size_t j = 0; j < header.size(); ++j) {
      if (header[j] == name) return static_cast<int>(j);
    }
    return -1;
  }

  bool has(const std::string& name) const { return index_of(name) >= 0; }

  Eigen::VectorXd column(const std::string& name) const {
    const int j = index_of(name);
    if (j < 0) throw RejectedInput("CSV has no column '" + name + "'");
    Eigen::VectorXd v(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) v[static_cast<Eigen::Index>(i)] = rows[i][j];
    return v;
  }

  void add_column(const std::string& name, const Eigen::VectorXd& v) {
    if (!rows.empty() || !header.empty()) {
      detail::require(static_cast<std::size_t>(v.size()) == rows.size() || header.empty(),
                      "column length does not match the table");
    }
    if (header.empty()) rows.assign(static_cast<std::size_t>(v.size()), {});
    header.push_back(name);
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i].push_back(v[static_cast<Eigen::Index>(i)]);
  }
};

namespace detail {

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(line);
  while (std::getline(ss, cur, ',')) out.push_back(trim(cur));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline double parse_finite(const std::string& s, const std::string& where) {
  double v = 0.0;
  const char* b = s.data();
  const char* e = s.data() + s.size();
  if (!s.empty() && *b == '+') ++b;
  const auto r = std::from_chars(b, e, v);
  if (s.empty() || r.ec != std::errc() || r.ptr != e) throw RejectedInput(where + ": '" + s + "' is not a number");
  if (!std::isfinite(v)) throw RejectedInput(where + ": value is not finite");
  return v;
}

}  // namespace detail

inline CsvTable parse_csv(const std::string& text, const std::string& source = "csv") {
  CsvTable t;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    auto fields = detail::split_commas(line);
    if (t.header.empty()) {
      t.header = std::move(fields);
      continue;
    }
    if (fields.size() != t.header.size()) {
      throw RejectedInput(source + ":" + std::to_string(lineno) + ": expected " + std::to_string(t.header.size()) +
                          " fields, found " + std::to_string(fields.size()));
    }
    std::vector<double> row;
    row.reserve(fields.size());
    for (const auto& f : fields) row.push_back(detail::parse_finite(f, source + ":" + std::to_string(lineno)));
    t.rows.push_back(std::move(row));
  }
  if (t.header.empty()) throw RejectedInput(source + ": empty CSV");
  return t;
}

inline CsvTable read_csv(const std::string& path) { return parse_csv(read_file(path), path); }

inline std::string to_csv(const CsvTable& t) {
  std::string out;
  for (std::size_t j = 0; j < t.header.size(); ++j) {
    if (j) out += ',';
    out += t.header[j];
  }
  out += '\n';
  for (const auto& row : t.rows) {
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (j) out += ',';
      out += format_double(row[j]);
    }
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Manifests.

struct RunManifest {
  std::string command_line;
  std::optional<std::uint64_t> seed;
  json config = json::object();
  std::string version = kVersion;
  std::vector<std::pair<std::string, double>> timings;  // phase, seconds

  json to_json() const {
    json j;
    j["command_line"] = command_line;
    j["seed"] = seed ? json(*seed) : json(nullptr);
    j["config"] = config;
    j["version"] = version;
    json t = json::object();
    for (const auto& [phase, secs] : timings) t[phase] = secs;
    j["timings"] = t;
    return j;
  }

  static RunManifest from_json(const json& j) {
    RunManifest m;
    m.command_line = j.value("command_line", "");
    if (j.contains("seed") && !j["seed"].is_null()) m.seed = j["seed"].get<std::uint64_t>();
    m.config = j.value("config", json::object());
    m.version = j.value("version", "");
    if (j.contains("timings")) {
      for (auto it = j["timings"].begin(); it != j["timings"].end(); ++it) m.timings.emplace_back(it.key(), it.value());
    }
    return m;
  }
};

inline std::string manifest_sidecar(const std::string& csv_path) { return csv_path + ".manifest.json"; }

inline void write_json(const std::string& path, const json& j) { write_file_atomic(path, j.dump(2) + "\n"); }

inline json read_json(const std::string& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw IoError("'" + path + "' is not valid JSON: " + e.what());
  }
}

/// CSV plus its manifest sidecar `<path>.manifest.json`.
inline void write_csv(const std::string& path, const CsvTable& t, const RunManifest& manifest) {
  write_file_atomic(path, to_csv(t));
  json m = manifest.to_json();
  m["file"] = std::filesystem::path(path).filename().string();
  write_json(manifest_sidecar(path), m);
}

// ---------------------------------------------------------------------------
// Dataset schemas.

/// Truth columns written by the simulator, per application.
inline std::vector<std::string> truth_columns(App app) {
  switch (app) {
    case App::rfl:
    case App::fl: return {"truth"};
    case App::qrtf: return {"truth_mean", "truth_sigma"};
    case App::fdp:
    case App::lfl: return {"truth_logodds"};
  }
  return {};
}

inline std::vector<std::string> input_columns(App app) {
  return is_binomial(app) ? std::vector<std::string>{"x", "y", "m"} : std::vector<std::string>{"x", "y"};
}

inline CsvTable dataset_table(const Dataset& d) {
  CsvTable t;
  t.add_column("x", d.x);
  t.add_column("y", d.y);
  switch (d.app) {
    case App::rfl:
    case App::fl: t.add_column("truth", d.truth); break;
    case App::qrtf:
      t.add_column("truth_mean", d.truth);
      t.add_column("truth_sigma", d.sigma);
      break;
    case App::fdp:
    case App::lfl:
      t.add_column("m", d.m);
      t.add_column("truth_logodds", d.truth);
      break;
  }
  return t;
}

struct InputData {
  Eigen::VectorXd x;
  Eigen::VectorXd y;
  Eigen::VectorXd m;  // binomial apps only
  std::vector<std::pair<std::string, Eigen::VectorXd>> truth;
};

/// Accepts exactly the input schema (`x,y` or `x,y,m`), optionally followed by the
/// simulator's truth columns for the same application.
inline InputData read_input(App app, const CsvTable& t) {
  const auto need = input_columns(app);
  const auto extra = truth_columns(app);
  auto describe = [&] {
    std::string s;
    for (std::size_t j = 0; j < need.size(); ++j) s += (j ? "," : "") + need[j];
    return s;
  };
  std::vector<std::string> allowed = need;
  allowed.insert(allowed.end(), extra.begin(), extra.end());
  for (const auto& h : t.header) {
    if (std::find(allowed.begin(), allowed.end(), h) == allowed.end()) {
      throw RejectedInput("unexpected column '" + h + "' for " + to_string(app) + " (schema " + describe() + ")");
    }
  }
  for (const auto& h : need) {
    if (!t.has(h)) throw RejectedInput("missing column '" + h + "' for " + to_string(app) + " (schema " + describe() + ")");
  }
  if (t.size() < 2) throw RejectedInput("need at least two data rows");
  InputData d;
  d.x = t.column("x");
  d.y = t.column("y");
  if (is_binomial(app)) d.m = t.column("m");
  for (const auto& h : extra) {
    if (t.has(h)) d.truth.emplace_back(h, t.column(h));
  }
  return d;
}

inline InputData read_input(App app, const std::string& path) { return read_input(app, read_csv(path)); }

// ---------------------------------------------------------------------------
// Fit and path artifacts.

inline json to_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

inline Eigen::VectorXd vector_from_json(const json& a) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) v[static_cast<Eigen::Index>(i)] = a[i].get<double>();
  return v;
}

/// NaN and ±∞ become null.
inline json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline json fit_to_json(const AppSpec& spec, const FitResult& fit) {
  json j;
  j["app"] = to_string(spec.app);
  j["lambda"] = spec.lam;
  if (spec.app == App::qrtf) {
    j["q"] = spec.q;
    j["k"] = spec.k;
  }
  if (spec.app == App::fdp) j["a"] = spec.a;
  j["beta"] = to_json(fit.beta);
  j["objective"] = number_or_null(fit.objective);
  j["trace"] = json::array();
  for (double v : fit.trace) j["trace"].push_back(number_or_null(v));
  j["iters"] = fit.iters;
  j["converged"] = fit.converged;
  j["df"] = fit.df;
  j["aic"] = number_or_null(fit.aic);
  if (!fit.aux.empty()) {
    json aux = json::object();
    for (const auto& [k, v] : fit.aux) aux[k] = to_json(v);
    j["aux"] = aux;
  }
  return j;
}

inline json path_to_json(const AppSpec& spec, const SolutionPath& path, Criterion criterion, int folds) {
  json j;
  j["app"] = to_string(spec.app);
  if (spec.app == App::qrtf) {
    j["q"] = spec.q;
    j["k"] = spec.k;
  }
  if (spec.app == App::fdp) j["a"] = spec.a;
  j["criterion"] = to_string(criterion);
  if (criterion == Criterion::cv) j["folds"] = folds;
  j["selected"] = path.selected;
  j["selected_lambda"] = path.lambdas.at(static_cast<std::size_t>(path.selected));
  json table = json::array();
  for (std::size_t i = 0; i < path.lambdas.size(); ++i) {
    const FitResult& f = path.fits[i];
    table.push_back({{"lambda", path.lambdas[i]},
                     {"criterion", number_or_null(path.criterion_values[i])},
                     {"objective", number_or_null(f.objective)},
                     {"df", f.df},
                     {"aic", number_or_null(f.aic)},
                     {"iters", f.iters},
                     {"converged", f.converged},
                     {"init", i < path.init_source.size() ? path.init_source[i] : std::string("default")}});
  }
  j["table"] = table;
  j["fit"] = fit_to_json(spec.with_lambda(path.lambdas[static_cast<std::size_t>(path.selected)]),
                         path.fits[static_cast<std::size_t>(path.selected)]);
  return j;
}

// ---------------------------------------------------------------------------
// λ grids.

/// `logspace:<lo>:<hi>:<count>` (exponents, emitted largest first) or a comma list,
/// which must already be strictly decreasing.
inline std::vector<double> parse_lambda_grid(const std::string& spec) {
  const std::string prefix = "logspace:";
  std::vector<double> out;
  if (spec.rfind(prefix, 0) == 0) {
    std::vector<std::string> parts;
    std::istringstream ss(spec.substr(prefix.size()));
    std::string p;
    while (std::getline(ss, p, ':')) parts.push_back(detail::trim(p));
    if (parts.size() != 3) throw RejectedInput("lambda grid '" + spec + "' must be logspace:<lo>:<hi>:<count>");
    const double lo = detail::parse_finite(parts[0], "logspace lo");
    const double hi = detail::parse_finite(parts[1], "logspace hi");
    const double count = detail::parse_finite(parts[2], "logspace count");
    if (count < 1 || count != std::floor(count)) throw RejectedInput("logspace count must be a positive integer");
    if (count > 1 && !(lo < hi)) throw RejectedInput("logspace needs lo < hi");
    out = logspace(lo, hi, static_cast<int>(count));
  } else {
    for (const auto& f : detail::split_commas(spec)) out.push_back(detail::parse_finite(f, "lambda list"));
  }
  require_decreasing(out);
  return out;
}

}  // namespace hierduals
