#include "bisam/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <tuple>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "bisam/error.hpp"

namespace bisam {

using nlohmann::json;

namespace {

std::string trim(std::string s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.pop_back();
  std::size_t k = 0;
  while (k < s.size() && (s[k] == ' ' || s[k] == '\t')) ++k;
  return s.substr(k);
}

// Comma-separated fields; double quotes protect embedded commas.
std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t k = 0; k < line.size(); ++k) {
    const char ch = line[k];
    if (quoted) {
      if (ch == '"' && k + 1 < line.size() && line[k + 1] == '"') {
        field += '"';
        ++k;
      } else if (ch == '"') {
        quoted = false;
      } else {
        field += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      out.push_back(trim(field));
      field.clear();
    } else {
      field += ch;
    }
  }
  out.push_back(trim(field));
  return out;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

bool parse_double(const std::string& s, double& out) {
  const char* end = s.data() + s.size();
  const auto r = std::from_chars(s.data(), end, out);
  return r.ec == std::errc() && r.ptr == end && !s.empty();
}

bool parse_int(const std::string& s, std::int64_t& out) {
  const char* end = s.data() + s.size();
  const auto r = std::from_chars(s.data(), end, out);
  return r.ec == std::errc() && r.ptr == end && !s.empty();
}

std::string number(double v) { return fmt::format("{:.17g}", v); }
std::string summary_number(double v) { return fmt::format("{:.10g}", v); }

bool next_data_line(std::istream& in, std::string& line, int& line_no) {
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    line = t;
    return true;
  }
  return false;
}

Error incompatible_draws() { return Error(ErrorKind::io, "incompatible draw file"); }

void check_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!obj.is_object()) throw invalid_input(fmt::format("config section '{}' must be an object", where));
  for (const auto& item : obj.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || item.key() == a;
    if (!ok) throw invalid_input(fmt::format("unknown config key '{}.{}'", where, item.key()));
  }
}

template <class T>
void read_key(const json& obj, const char* key, T& out) {
  if (obj.contains(key)) out = obj.at(key).get<T>();
}

template <class T>
void read_optional(const json& obj, const char* key, std::optional<T>& out) {
  if (!obj.contains(key)) return;
  if (obj.at(key).is_null()) {
    out.reset();
  } else {
    out = obj.at(key).get<T>();
  }
}

}  // namespace

TransformDirective TransformDirective::parse(const std::string& text) {
  TransformDirective d;
  std::string rest = text;
  if (const auto eq = rest.find('='); eq != std::string::npos) {
    d.target = trim(rest.substr(0, eq));
    rest = rest.substr(eq + 1);
    if (d.target.empty()) throw invalid_input(fmt::format("invalid transform '{}'", text));
  }
  std::stringstream ss(rest);
  std::string part;
  std::getline(ss, part, ':');
  d.source = trim(part);
  while (std::getline(ss, part, ':')) {
    part = trim(part);
    if (part == "log") {
      d.ops.push_back(TransformOp::log);
    } else if (part == "square") {
      d.ops.push_back(TransformOp::square);
    } else {
      throw invalid_input(fmt::format("unknown transform '{}' in '{}'", part, text));
    }
  }
  if (d.source.empty() || d.ops.empty()) throw invalid_input(fmt::format("invalid transform '{}'", text));
  return d;
}

PanelData read_panel(std::istream& in, const PanelSchema& schema) {
  std::string line;
  int line_no = 0;
  if (!next_data_line(in, line, line_no)) throw invalid_input("panel file is empty");
  const auto header = split_csv(line);
  if (header.size() < 3 || header[0] != "unit" || header[1] != "time" || header[2] != "y") {
    throw invalid_input("panel header must start with unit,time,y");
  }
  const std::size_t n_cov = header.size() - 3;

  std::vector<std::string> units;
  std::map<std::string, int> unit_index;
  std::set<std::int64_t> times;
  std::map<std::pair<int, std::int64_t>, std::vector<double>> cells;

  while (next_data_line(in, line, line_no)) {
    const auto fields = split_csv(line);
    if (fields.size() != header.size()) {
      throw invalid_input(fmt::format("parse error at line {}: expected {} fields, found {}", line_no,
                                      header.size(), fields.size()));
    }
    std::int64_t time = 0;
    if (!parse_int(fields[1], time)) {
      throw invalid_input(fmt::format("parse error at line {}, column 2 (time): '{}'", line_no, fields[1]));
    }
    std::vector<double> values(header.size() - 2);
    for (std::size_t k = 2; k < fields.size(); ++k) {
      if (!parse_double(fields[k], values[k - 2]) || !std::isfinite(values[k - 2])) {
        throw invalid_input(fmt::format("parse error at line {}, column {} ({}): '{}'", line_no, k + 1,
                                        header[k], fields[k]));
      }
    }
    auto [it, fresh] = unit_index.emplace(fields[0], static_cast<int>(units.size()));
    if (fresh) units.push_back(fields[0]);
    times.insert(time);
    if (!cells.emplace(std::make_pair(it->second, time), std::move(values)).second) {
      throw invalid_input(fmt::format("duplicate cell ({}, {})", fields[0], time));
    }
  }

  PanelData panel;
  panel.units = units;
  panel.times.assign(times.begin(), times.end());
  const int n = panel.n_units();
  const int t = panel.n_times();
  panel.y.resize(n, t);
  panel.covariates.assign(n_cov, Eigen::MatrixXd(n, t));
  for (std::size_t c = 0; c < n_cov; ++c) panel.covariate_names.push_back(header[c + 3]);
  for (int i = 0; i < n; ++i) {
    for (int s = 0; s < t; ++s) {
      const auto it = cells.find({i, panel.times[s]});
      if (it == cells.end()) {
        throw invalid_input(fmt::format("missing cell ({}, {})", panel.units[i], panel.times[s]));
      }
      panel.y(i, s) = it->second[0];
      for (std::size_t c = 0; c < n_cov; ++c) panel.covariates[c](i, s) = it->second[c + 1];
    }
  }

  for (const auto& d : schema.transforms) {
    Eigen::MatrixXd* src = nullptr;
    if (d.source == "y") {
      src = &panel.y;
    } else {
      const auto it = std::find(panel.covariate_names.begin(), panel.covariate_names.end(), d.source);
      if (it == panel.covariate_names.end()) {
        throw invalid_input(fmt::format("transform refers to unknown column '{}'", d.source));
      }
      src = &panel.covariates[static_cast<std::size_t>(it - panel.covariate_names.begin())];
    }
    Eigen::MatrixXd values = *src;
    for (TransformOp op : d.ops) {
      if (op == TransformOp::log) {
        for (int i = 0; i < n; ++i) {
          for (int s = 0; s < t; ++s) {
            if (!(values(i, s) > 0.0)) {
              throw invalid_input(fmt::format("log of non-positive value in column '{}' at ({}, {})",
                                              d.source, panel.units[i], panel.times[s]));
            }
          }
        }
        values = values.array().log().matrix();
      } else {
        values = values.array().square().matrix();
      }
    }
    if (d.target.empty()) {
      *src = std::move(values);
    } else {
      if (d.target == "y" || std::find(panel.covariate_names.begin(), panel.covariate_names.end(),
                                       d.target) != panel.covariate_names.end()) {
        throw invalid_input(fmt::format("derived column '{}' already exists", d.target));
      }
      panel.covariates.push_back(std::move(values));
      panel.covariate_names.push_back(d.target);
    }
  }

  panel.include_unit_fe = schema.include_unit_fe;
  panel.include_time_fe = schema.include_time_fe;
  panel.validate();
  return panel;
}

PanelData ingest_panel(const std::string& path, const PanelSchema& schema) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, fmt::format("cannot open '{}'", path));
  return read_panel(in, schema);
}

void write_panel(std::ostream& out, const PanelData& panel) {
  out << "unit,time,y";
  for (const auto& name : panel.covariate_names) out << ',' << csv_field(name);
  out << '\n';
  for (int i = 0; i < panel.n_units(); ++i) {
    for (int s = 0; s < panel.n_times(); ++s) {
      out << csv_field(panel.units[i]) << ',' << panel.times[s] << ',' << number(panel.y(i, s));
      for (const auto& x : panel.covariates) out << ',' << number(x(i, s));
      out << '\n';
    }
  }
}

void save_draws(std::ostream& out, const PosteriorDraws& draws, const json& run_info) {
  const int q = draws.n_candidates();
  const int p = static_cast<int>(draws.beta.cols());
  const int n = draws.n_units;
  const int cells = draws.n_units * draws.n_times;

  json header;
  header["format"] = "bisam-draws";
  header["version"] = format_version;
  header["seed"] = draws.seed;
  header["n_units"] = draws.n_units;
  header["n_times"] = draws.n_times;
  header["n_beta"] = p;
  header["records"] = draws.records();
  json cands = json::array();
  for (const auto& c : draws.candidates) cands.push_back({c.unit, c.start});
  header["candidates"] = cands;
  header["diagnostics"] = {{"break_updates", draws.diagnostics.break_updates},
                           {"break_inclusions", draws.diagnostics.break_inclusions},
                           {"underflow_fallbacks", draws.diagnostics.underflow_fallbacks},
                           {"outlier_flags", draws.diagnostics.outlier_flags},
                           {"shift_moves", draws.diagnostics.shift_moves},
                           {"split_moves", draws.diagnostics.split_moves},
                           {"merge_moves", draws.diagnostics.merge_moves}};
  header["run"] = run_info;

  out << "#bisam-draws " << format_version << '\n';
  out << '#' << header.dump() << '\n';
  out << "record,omega";
  for (int k = 0; k < p; ++k) out << ",beta_" << k;
  for (int i = 0; i < n; ++i) out << ",sigma2_" << i;
  for (int c = 0; c < q; ++c) out << ",gamma_" << c;
  for (int c = 0; c < q; ++c) out << ",delta_" << c;
  for (int r = 0; r < cells; ++r) out << ",eps_" << r;
  out << '\n';

  std::string row;
  for (int m = 0; m < draws.records(); ++m) {
    row = std::to_string(m);
    row += ',';
    row += number(draws.omega[m]);
    for (int k = 0; k < p; ++k) (row += ',') += number(draws.beta(m, k));
    for (int i = 0; i < n; ++i) (row += ',') += number(draws.sigma2(m, i));
    for (int c = 0; c < q; ++c) (row += ',') += number(draws.gamma(m, c));
    for (int c = 0; c < q; ++c) (row += ',') += draws.included(m, c) ? '1' : '0';
    for (int r = 0; r < cells; ++r) (row += ',') += draws.outlier(m, r) ? '1' : '0';
    out << row << '\n';
  }
}

void save_draws(const std::string& path, const PosteriorDraws& draws, const json& run_info) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::io, fmt::format("cannot write '{}'", path));
  save_draws(out, draws, run_info);
}

LoadedDraws load_draws(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != fmt::format("#bisam-draws {}", format_version)) {
    throw incompatible_draws();
  }
  LoadedDraws loaded;
  if (!std::getline(in, line) || line.empty() || line[0] != '#') throw incompatible_draws();
  try {
    loaded.header = json::parse(line.substr(1));
  } catch (const json::exception&) {
    throw incompatible_draws();
  }
  const json& h = loaded.header;
  PosteriorDraws& d = loaded.draws;
  int p = 0;
  int records = 0;
  try {
    if (h.at("format") != "bisam-draws" || h.at("version") != format_version) throw incompatible_draws();
    d.seed = h.at("seed").get<std::uint64_t>();
    d.n_units = h.at("n_units").get<int>();
    d.n_times = h.at("n_times").get<int>();
    p = h.at("n_beta").get<int>();
    records = h.at("records").get<int>();
    for (const auto& c : h.at("candidates")) d.candidates.push_back({c.at(0).get<int>(), c.at(1).get<int>()});
    const auto& diag = h.at("diagnostics");
    d.diagnostics.break_updates = diag.at("break_updates").get<std::int64_t>();
    d.diagnostics.break_inclusions = diag.at("break_inclusions").get<std::int64_t>();
    d.diagnostics.underflow_fallbacks = diag.at("underflow_fallbacks").get<std::int64_t>();
    d.diagnostics.outlier_flags = diag.at("outlier_flags").get<std::int64_t>();
    d.diagnostics.shift_moves = diag.at("shift_moves").get<std::int64_t>();
    d.diagnostics.split_moves = diag.at("split_moves").get<std::int64_t>();
    d.diagnostics.merge_moves = diag.at("merge_moves").get<std::int64_t>();
  } catch (const json::exception&) {
    throw incompatible_draws();
  }
  const int q = d.n_candidates();
  const int n = d.n_units;
  const int cells = d.n_units * d.n_times;
  const std::size_t width = 2 + static_cast<std::size_t>(p + n + 2 * q + cells);

  if (!std::getline(in, line) || split_csv(line).size() != width) throw incompatible_draws();

  d.beta.resize(records, p);
  d.sigma2.resize(records, n);
  d.gamma.resize(records, q);
  d.delta_gamma.assign(static_cast<std::size_t>(records) * q, 0);
  d.delta_eps.assign(static_cast<std::size_t>(records) * cells, 0);
  d.omega.assign(static_cast<std::size_t>(records), 0.0);

  auto flag = [](const std::string& s) -> std::uint8_t {
    if (s == "1") return 1;
    if (s == "0") return 0;
    throw incompatible_draws();
  };
  for (int m = 0; m < records; ++m) {
    if (!std::getline(in, line)) throw incompatible_draws();
    const auto f = split_csv(line);
    if (f.size() != width) throw incompatible_draws();
    std::size_t k = 1;
    auto real = [&](double& out) {
      if (!parse_double(f[k++], out)) throw incompatible_draws();
    };
    real(d.omega[m]);
    for (int j = 0; j < p; ++j) real(d.beta(m, j));
    for (int i = 0; i < n; ++i) real(d.sigma2(m, i));
    for (int c = 0; c < q; ++c) real(d.gamma(m, c));
    for (int c = 0; c < q; ++c) d.delta_gamma[static_cast<std::size_t>(m) * q + c] = flag(f[k++]);
    for (int r = 0; r < cells; ++r) d.delta_eps[static_cast<std::size_t>(m) * cells + r] = flag(f[k++]);
  }
  if (std::getline(in, line) && !trim(line).empty()) throw incompatible_draws();
  return loaded;
}

LoadedDraws load_draws(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, fmt::format("cannot open '{}'", path));
  return load_draws(in);
}

void write_pips_csv(std::ostream& out, const BreakReport& report, const PanelData& panel) {
  out << "# " << format_tag << " pips\n";
  out << "unit,start,pip\n";
  for (std::size_t c = 0; c < report.candidates.size(); ++c) {
    const auto& cand = report.candidates[c];
    out << csv_field(panel.units[cand.unit]) << ',' << panel.times[cand.start] << ','
        << summary_number(report.pip(static_cast<Eigen::Index>(c))) << '\n';
  }
}

void write_report_json(std::ostream& out, const BreakReport& report, const PanelData& panel) {
  json j;
  j["format"] = format_tag;
  j["kind"] = "break-report";
  j["n_units"] = report.n_units;
  j["n_times"] = report.n_times;
  j["threshold"] = report.threshold;
  j["rule"] = report.rule == ThresholdRule::at_least ? "at_least" : "greater";

  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  json selected = json::array();
  for (const auto& s : report.gamma_summary) {
    const int c = candidate_index(s.candidate.unit, s.candidate.start, report.n_times);
    json item{{"unit", panel.units[s.candidate.unit]},
              {"start", panel.times[s.candidate.start]},
              {"pip", report.pip(c)},
              {"n_included", s.n_included},
              {"mean", opt(s.mean)},
              {"median", opt(s.median)},
              {"lower90", opt(s.lower)},
              {"upper90", opt(s.upper)}};
    if (!s.mean) item["note"] = "no conditional draws";
    selected.push_back(item);
  }
  j["selected"] = selected;

  json pips = json::array();
  for (std::size_t c = 0; c < report.candidates.size(); ++c) {
    const auto& cand = report.candidates[c];
    pips.push_back({{"unit", panel.units[cand.unit]},
                    {"start", panel.times[cand.start]},
                    {"pip", report.pip(static_cast<Eigen::Index>(c))}});
  }
  j["pip"] = pips;

  json windows = json::array();
  for (const auto& w : report.window_prob) {
    windows.push_back({{"unit", panel.units[w.unit]},
                       {"start", panel.times[w.start]},
                       {"width", w.width},
                       {"probability", w.probability}});
  }
  j["window_prob"] = windows;

  json outliers = json::array();
  for (int i = 0; i < report.n_units; ++i) {
    json row = json::array();
    for (int t = 0; t < report.n_times; ++t) row.push_back(report.outlier_prob(i, t));
    outliers.push_back(row);
  }
  j["outlier_prob"] = outliers;
  out << j.dump(2) << '\n';
}

void write_fitpath_csv(std::ostream& out, const BreakReport& report, const PanelData& panel) {
  std::map<std::tuple<int, int, int>, double> windows;
  for (const auto& w : report.window_prob) windows[{w.unit, w.start, w.width}] = w.probability;

  out << "# " << format_tag << " fitpath\n";
  out << "unit,time,observed,fitted,window_w1,window_w2,window_w3\n";
  for (int i = 0; i < report.n_units; ++i) {
    for (int t = 0; t < report.n_times; ++t) {
      out << csv_field(panel.units[i]) << ',' << panel.times[t] << ',' << number(panel.y(i, t)) << ','
          << number(report.fitted(i, t));
      for (int w = 1; w <= 3; ++w) {
        const auto it = windows.find({i, t, w});
        out << ',' << (it == windows.end() ? std::string("NA") : summary_number(it->second));
      }
      out << '\n';
    }
  }
}

void write_metrics_csv(std::ostream& out, const StudyResult& result) {
  auto field = [](const std::optional<double>& v) { return v ? summary_number(*v) : std::string("NA"); };
  out << "# " << format_tag << " metrics\n";
  out << "method,layout,size,metric,mean,se\n";
  for (const auto& cell : result.cells) {
    const std::pair<const char*, const MetricSummary*> rows[] = {
        {"tpr", &cell.metrics.tpr},
        {"fpr", &cell.metrics.fpr},
        {"precision", &cell.metrics.precision},
        {"f1", &cell.metrics.f1},
        {"near_miss", &cell.metrics.near_miss}};
    for (const auto& [name, m] : rows) {
      out << method_name(cell.method) << ',' << cell.layout << ',' << summary_number(cell.size) << ','
          << name << ',' << field(m->mean) << ',' << field(m->se) << '\n';
    }
  }
}

void write_breaks_csv(std::ostream& out, const std::vector<LabeledBreak>& breaks,
                      const std::string& value_name) {
  out << "# " << format_tag << " breaks\n";
  out << "unit,time";
  if (!value_name.empty()) out << ',' << value_name;
  out << '\n';
  for (const auto& b : breaks) {
    out << csv_field(b.unit) << ',' << b.time;
    if (!value_name.empty()) out << ',' << number(b.value);
    out << '\n';
  }
}

std::vector<LabeledBreak> read_breaks_csv(std::istream& in) {
  std::string line;
  int line_no = 0;
  if (!next_data_line(in, line, line_no)) throw invalid_input("break file is empty");
  const auto header = split_csv(line);
  if (header.size() < 2 || header[0] != "unit" || header[1] != "time") {
    throw invalid_input("break file header must start with unit,time");
  }
  std::vector<LabeledBreak> out;
  while (next_data_line(in, line, line_no)) {
    const auto f = split_csv(line);
    if (f.size() != header.size()) {
      throw invalid_input(fmt::format("parse error at line {}: expected {} fields", line_no, header.size()));
    }
    LabeledBreak b;
    b.unit = f[0];
    if (!parse_int(f[1], b.time)) {
      throw invalid_input(fmt::format("parse error at line {}, column 2 (time): '{}'", line_no, f[1]));
    }
    if (f.size() > 2 && !parse_double(f[2], b.value)) {
      throw invalid_input(fmt::format("parse error at line {}, column 3: '{}'", line_no, f[2]));
    }
    out.push_back(b);
  }
  return out;
}

RunConfig parse_run_config(const json& j) {
  check_keys(j, {"version", "prior", "sampler", "alasso", "inference", "simulation"}, "config");
  if (!j.contains("version")) throw invalid_input("config is missing its version tag");
  RunConfig c;
  try {
    c.version = j.at("version").get<int>();
    if (c.version != format_version) {
      throw invalid_input(fmt::format("unsupported config version {}", c.version));
    }
    if (j.contains("prior")) {
      const json& p = j.at("prior");
      check_keys(p, {"tau", "omega", "omega_prior", "m0", "n0", "beta_prior_var", "eta", "tau_eps", "outliers"},
                 "prior");
      read_key(p, "tau", c.prior.tau);
      read_key(p, "omega", c.prior.omega);
      if (p.contains("omega_prior") && !p.at("omega_prior").is_null()) {
        const json& b = p.at("omega_prior");
        check_keys(b, {"a", "b"}, "prior.omega_prior");
        c.prior.omega_prior = BetaHyperprior{b.at("a").get<double>(), b.at("b").get<double>()};
      }
      read_optional(p, "m0", c.prior.m0);
      read_optional(p, "n0", c.prior.n0);
      read_optional(p, "beta_prior_var", c.prior.beta_prior_var);
      read_key(p, "eta", c.prior.eta);
      read_key(p, "tau_eps", c.prior.tau_eps);
      read_key(p, "outliers", c.prior.outliers_enabled);
    }
    if (j.contains("sampler")) {
      const json& s = j.at("sampler");
      check_keys(s, {"n_burn", "n_draw", "thin", "seed", "grid_points"}, "sampler");
      read_key(s, "n_burn", c.sampler.n_burn);
      read_key(s, "n_draw", c.sampler.n_draw);
      read_key(s, "thin", c.sampler.thin);
      read_key(s, "seed", c.sampler.seed);
      read_key(s, "grid_points", c.sampler.grid_points);
    }
    if (j.contains("alasso")) {
      const json& a = j.at("alasso");
      check_keys(a, {"ridge_lambda_grid", "lasso_lambda_grid", "selection", "weight_power", "tol", "max_iter",
                     "cv_folds"},
                 "alasso");
      read_key(a, "ridge_lambda_grid", c.alasso.ridge_lambda_grid);
      read_key(a, "lasso_lambda_grid", c.alasso.lasso_lambda_grid);
      if (a.contains("selection")) {
        const auto sel = a.at("selection").get<std::string>();
        if (sel == "bic") {
          c.alasso.selection = LambdaSelection::bic;
        } else if (sel == "cv") {
          c.alasso.selection = LambdaSelection::cv;
        } else {
          throw invalid_input(fmt::format("unknown lambda selection '{}'", sel));
        }
      }
      read_key(a, "weight_power", c.alasso.weight_power);
      read_key(a, "tol", c.alasso.tol);
      read_key(a, "max_iter", c.alasso.max_iter);
      read_key(a, "cv_folds", c.alasso.cv_folds);
    }
    if (j.contains("inference")) {
      const json& in = j.at("inference");
      check_keys(in, {"threshold", "rule"}, "inference");
      read_key(in, "threshold", c.threshold);
      if (in.contains("rule")) {
        const auto rule = in.at("rule").get<std::string>();
        if (rule == "at_least") {
          c.rule = ThresholdRule::at_least;
        } else if (rule == "greater") {
          c.rule = ThresholdRule::greater;
        } else {
          throw invalid_input(fmt::format("unknown threshold rule '{}'", rule));
        }
      }
    }
    if (j.contains("simulation")) {
      const json& s = j.at("simulation");
      check_keys(s, {"n_units", "n_times", "sigma2", "layouts", "sizes", "methods", "n_reps", "min_spacing"},
                 "simulation");
      read_key(s, "n_units", c.n_units);
      read_key(s, "n_times", c.n_times);
      read_key(s, "sigma2", c.sigma2);
      read_key(s, "layouts", c.layouts);
      read_key(s, "sizes", c.sizes);
      read_key(s, "methods", c.methods);
      read_key(s, "n_reps", c.n_reps);
      read_key(s, "min_spacing", c.min_spacing);
    }
  } catch (const json::exception& e) {
    throw invalid_input(fmt::format("invalid config: {}", e.what()));
  }
  c.prior.validate();
  c.sampler.validate();
  c.alasso.validate();
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw invalid_input(fmt::format("cannot open config '{}'", path));
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw invalid_input(fmt::format("config '{}' is not valid JSON: {}", path, e.what()));
  }
  return parse_run_config(j);
}

json to_json(const RunConfig& c) {
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  json prior{{"tau", c.prior.tau},
             {"omega", c.prior.omega},
             {"m0", opt(c.prior.m0)},
             {"n0", opt(c.prior.n0)},
             {"beta_prior_var", opt(c.prior.beta_prior_var)},
             {"eta", c.prior.eta},
             {"tau_eps", c.prior.tau_eps},
             {"outliers", c.prior.outliers_enabled}};
  prior["omega_prior"] = c.prior.omega_prior
                             ? json{{"a", c.prior.omega_prior->a}, {"b", c.prior.omega_prior->b}}
                             : json(nullptr);
  return json{
      {"version", c.version},
      {"prior", prior},
      {"sampler",
       {{"n_burn", c.sampler.n_burn},
        {"n_draw", c.sampler.n_draw},
        {"thin", c.sampler.thin},
        {"seed", c.sampler.seed},
        {"grid_points", c.sampler.grid_points}}},
      {"alasso",
       {{"ridge_lambda_grid", c.alasso.ridge_lambda_grid},
        {"lasso_lambda_grid", c.alasso.lasso_lambda_grid},
        {"selection", c.alasso.selection == LambdaSelection::bic ? "bic" : "cv"},
        {"weight_power", c.alasso.weight_power},
        {"tol", c.alasso.tol},
        {"max_iter", c.alasso.max_iter},
        {"cv_folds", c.alasso.cv_folds}}},
      {"inference",
       {{"threshold", c.threshold}, {"rule", c.rule == ThresholdRule::at_least ? "at_least" : "greater"}}},
      {"simulation",
       {{"n_units", c.n_units},
        {"n_times", c.n_times},
        {"sigma2", c.sigma2},
        {"layouts", c.layouts},
        {"sizes", c.sizes},
        {"methods", c.methods},
        {"n_reps", c.n_reps},
        {"min_spacing", c.min_spacing}}},
  };
}

}  // namespace bisam
