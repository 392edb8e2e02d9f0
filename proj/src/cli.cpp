#include "bisam/cli.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <set>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "json.hpp"

#include "bisam/alasso.hpp"
#include "bisam/error.hpp"
#include "bisam/imom.hpp"
#include "bisam/inference.hpp"
#include "bisam/io.hpp"
#include "bisam/sampler.hpp"
#include "bisam/simulation.hpp"

namespace bisam {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct PanelArgs {
  std::string input;
  std::vector<std::string> transforms;
  bool no_unit_fe = false;
  bool no_time_fe = false;

  void add_to(CLI::App& cmd) {
    cmd.add_option("--input", input, "Panel file with header unit,time,y[,cov...]")->required();
    cmd.add_option("--transform", transforms, "Column transform: src:op[:op] or name=src:op (op: log, square)");
    cmd.add_flag("--no-unit-fe", no_unit_fe, "Drop unit fixed effects");
    cmd.add_flag("--no-time-fe", no_time_fe, "Drop time fixed effects");
  }

  PanelData load() const {
    PanelSchema schema;
    for (const auto& t : transforms) schema.transforms.push_back(TransformDirective::parse(t));
    schema.include_unit_fe = !no_unit_fe;
    schema.include_time_fe = !no_time_fe;
    return ingest_panel(input, schema);
  }
};

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::io, fmt::format("cannot write '{}'", path.string()));
  return out;
}

RunConfig base_config(const std::string& path) {
  return path.empty() ? RunConfig{} : load_run_config(path);
}

ThresholdRule parse_rule(const std::string& s) {
  if (s == "at_least") return ThresholdRule::at_least;
  if (s == "greater") return ThresholdRule::greater;
  throw invalid_input(fmt::format("unknown threshold rule '{}'", s));
}

Method parse_method(const std::string& s) {
  if (s == "bisam") return Method::bisam;
  if (s == "alasso") return Method::alasso;
  throw invalid_input(fmt::format("unknown method '{}'", s));
}

void write_error(std::ostream& err, const std::string& kind, const std::string& message) {
  err << "error: " << json{{"kind", kind}, {"message", message}}.dump() << '\n';
}

const char* kind_name(ErrorKind k) {
  switch (k) {
    case ErrorKind::invalid_input: return "invalid_input";
    case ErrorKind::numerical: return "numerical";
    case ErrorKind::io: return "io";
  }
  return "unknown";
}

}  // namespace

int cli_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Structural break detection in panels with BISAM and an adaptive lasso baseline", "bisam"};
  app.require_subcommand(1);
  app.set_version_flag("--version", fmt::format("bisam format {}", format_version));

  // simulate
  auto* sim = app.add_subcommand("simulate", "Monte Carlo comparison of the detectors");
  std::string sim_config;
  std::vector<std::string> sim_layouts;
  std::vector<double> sim_sizes;
  std::vector<std::string> sim_methods;
  int sim_reps = 0, sim_units = 0, sim_times = 0, sim_burn = 0, sim_draws = 0;
  std::uint64_t sim_seed = 0;
  double sim_sigma2 = 0.0;
  std::string sim_out;
  bool sim_serial = false;
  sim->add_option("--config", sim_config, "JSON run configuration");
  auto* o_layout = sim->add_option("--layout", sim_layouts, "sparse, dense or count:K")->delimiter(',');
  auto* o_sizes = sim->add_option("--sizes", sim_sizes, "Break sizes in units of sigma")->delimiter(',');
  auto* o_methods = sim->add_option("--methods", sim_methods, "bisam, alasso")->delimiter(',');
  auto* o_reps = sim->add_option("--reps", sim_reps, "Replications per cell");
  auto* o_seed = sim->add_option("--seed", sim_seed, "Master seed");
  auto* o_units = sim->add_option("--units", sim_units, "Number of units N");
  auto* o_times = sim->add_option("--times", sim_times, "Number of periods T");
  auto* o_sigma2 = sim->add_option("--sigma2", sim_sigma2, "Noise variance");
  auto* o_sburn = sim->add_option("--burn", sim_burn, "Burn-in sweeps per chain");
  auto* o_sdraws = sim->add_option("--draws", sim_draws, "Recorded sweeps per chain");
  sim->add_option("--out", sim_out, "Metrics table path (default: stdout)");
  sim->add_flag("--serial", sim_serial, "Run replications on one thread");

  // fit
  auto* fit = app.add_subcommand("fit", "Run the BISAM sampler on a panel");
  PanelArgs fit_panel;
  fit_panel.add_to(*fit);
  std::string fit_config, fit_rule, fit_dir = ".";
  std::uint64_t fit_seed = 0;
  int fit_burn = 0, fit_draws = 0, fit_thin = 0;
  double fit_tau = 0.0, fit_omega = 0.0, fit_eta = 0.0, fit_threshold = 0.0;
  bool fit_no_outliers = false, fit_save_draws = false;
  fit->add_option("--config", fit_config, "JSON run configuration");
  auto* o_fseed = fit->add_option("--seed", fit_seed, "Chain seed");
  auto* o_fburn = fit->add_option("--burn", fit_burn, "Burn-in sweeps");
  auto* o_fdraws = fit->add_option("--draws", fit_draws, "Recorded sweeps");
  auto* o_fthin = fit->add_option("--thin", fit_thin, "Keep every k-th sweep");
  auto* o_tau = fit->add_option("--tau", fit_tau, "Slab scale");
  auto* o_omega = fit->add_option("--omega", fit_omega, "Prior inclusion probability");
  auto* o_eta = fit->add_option("--eta", fit_eta, "Prior outlier probability");
  auto* o_thr = fit->add_option("--threshold", fit_threshold, "PIP selection threshold");
  auto* o_rule = fit->add_option("--rule", fit_rule, "at_least or greater");
  fit->add_flag("--no-outliers", fit_no_outliers, "Disable the outlier mixture");
  fit->add_option("--out-dir", fit_dir, "Directory for pips.csv, report.json, fitpath.csv");
  fit->add_flag("--save-draws", fit_save_draws, "Also write draws.csv");

  // alasso
  auto* las = app.add_subcommand("alasso", "Run the adaptive lasso baseline on a panel");
  PanelArgs las_panel;
  las_panel.add_to(*las);
  std::string las_config, las_selection, las_dir = ".";
  las->add_option("--config", las_config, "JSON run configuration");
  auto* o_sel = las->add_option("--selection", las_selection, "bic or cv");
  las->add_option("--out-dir", las_dir, "Directory for alasso_breaks.csv and alasso.json");

  // calibrate-tau
  auto* cal = app.add_subcommand("calibrate-tau", "Slab scale putting mass p within m sigma of zero");
  double cal_p = 0.0, cal_mult = 1.0;
  bool cal_numeric = false;
  cal->add_option("--p", cal_p, "Target probability")->required();
  cal->add_option("--multiplier", cal_mult, "Half-width of the central region in sigma units");
  cal->add_flag("--numeric", cal_numeric, "Solve by quadrature and root finding");

  // score
  auto* sc = app.add_subcommand("score", "Classification metrics of detected against true breaks");
  std::string sc_detected, sc_truth, sc_out;
  int sc_q = 0, sc_units = 0, sc_times = 0;
  sc->add_option("--detected", sc_detected, "Detected breaks (unit,time[,...])")->required();
  sc->add_option("--truth", sc_truth, "True breaks (unit,time[,...])")->required();
  auto* o_q = sc->add_option("--q", sc_q, "Number of candidates");
  auto* o_scu = sc->add_option("--units", sc_units, "N, used with --times when --q is absent");
  auto* o_sct = sc->add_option("--times", sc_times, "T, used with --units when --q is absent");
  sc->add_option("--out", sc_out, "Output path (default: stdout)");

  std::vector<std::string> argv_store{"bisam"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_store) argv.push_back(a.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << app.version() << '\n';
    return 0;
  } catch (const CLI::ParseError& e) {
    write_error(err, "usage", e.what());
    return 2;
  }

  try {
    if (sim->parsed()) {
      RunConfig rc = base_config(sim_config);
      if (o_layout->count()) rc.layouts = sim_layouts;
      if (o_sizes->count()) rc.sizes = sim_sizes;
      if (o_methods->count()) rc.methods = sim_methods;
      if (o_reps->count()) rc.n_reps = sim_reps;
      if (o_seed->count()) rc.sampler.seed = sim_seed;
      if (o_units->count()) rc.n_units = sim_units;
      if (o_times->count()) rc.n_times = sim_times;
      if (o_sigma2->count()) rc.sigma2 = sim_sigma2;
      if (o_sburn->count()) rc.sampler.n_burn = sim_burn;
      if (o_sdraws->count()) rc.sampler.n_draw = sim_draws;

      StudyConfig sc_cfg;
      sc_cfg.n_units = rc.n_units;
      sc_cfg.n_times = rc.n_times;
      sc_cfg.sigma2 = rc.sigma2;
      for (const auto& l : rc.layouts) sc_cfg.layouts.push_back(Layout::parse(l));
      sc_cfg.sizes = rc.sizes;
      sc_cfg.methods.clear();
      for (const auto& m : rc.methods) sc_cfg.methods.push_back(parse_method(m));
      sc_cfg.n_reps = rc.n_reps;
      sc_cfg.seed = rc.sampler.seed;
      sc_cfg.min_spacing = rc.min_spacing;
      sc_cfg.threshold = rc.threshold;
      sc_cfg.prior = rc.prior;
      sc_cfg.sampler = rc.sampler;
      sc_cfg.alasso = rc.alasso;
      sc_cfg.prior.validate();
      sc_cfg.sampler.validate();

      const auto result = run_study(sc_cfg, sim_serial ? Execution::serial : Execution::parallel);
      for (const auto& cell : result.cells) {
        for (const auto& msg : cell.failure_messages) {
          err << "warning: " << json{{"method", method_name(cell.method)}, {"layout", cell.layout},
                                     {"size", cell.size}, {"message", msg}}.dump()
              << '\n';
        }
      }
      if (sim_out.empty()) {
        write_metrics_csv(out, result);
      } else {
        auto f = open_output(sim_out);
        write_metrics_csv(f, result);
      }
      return 0;
    }

    if (fit->parsed()) {
      RunConfig rc = base_config(fit_config);
      if (o_fseed->count()) rc.sampler.seed = fit_seed;
      if (o_fburn->count()) rc.sampler.n_burn = fit_burn;
      if (o_fdraws->count()) rc.sampler.n_draw = fit_draws;
      if (o_fthin->count()) rc.sampler.thin = fit_thin;
      if (o_tau->count()) rc.prior.tau = fit_tau;
      if (o_omega->count()) rc.prior.omega = fit_omega;
      if (o_eta->count()) rc.prior.eta = fit_eta;
      if (o_thr->count()) rc.threshold = fit_threshold;
      if (o_rule->count()) rc.rule = parse_rule(fit_rule);
      if (fit_no_outliers) rc.prior.outliers_enabled = false;
      rc.prior.validate();
      rc.sampler.validate();
      if (!(rc.threshold >= 0.0 && rc.threshold <= 1.0)) throw invalid_input("threshold must lie in [0, 1]");

      const PanelData panel = fit_panel.load();
      const SaturatedDesign design = build_design(panel);
      const PosteriorDraws draws = run_chain(design, stack_response(panel), rc.prior, rc.sampler);
      const BreakReport report = make_report(design, draws, rc.threshold, rc.rule);

      const fs::path dir(fit_dir);
      {
        auto f = open_output(dir / "pips.csv");
        write_pips_csv(f, report, panel);
      }
      {
        auto f = open_output(dir / "report.json");
        write_report_json(f, report, panel);
      }
      {
        auto f = open_output(dir / "fitpath.csv");
        write_fitpath_csv(f, report, panel);
      }
      if (fit_save_draws) {
        json info = to_json(rc);
        info["units"] = panel.units;
        info["times"] = panel.times;
        auto f = open_output(dir / "draws.csv");
        save_draws(f, draws, info);
      }
      out << "unit,start,pip\n";
      for (const auto& s : report.selected) {
        const int c = candidate_index(s.unit, s.start, panel.n_times());
        out << panel.units[s.unit] << ',' << panel.times[s.start] << ',' << fmt::format("{:.4f}", report.pip(c))
            << '\n';
      }
      return 0;
    }

    if (las->parsed()) {
      RunConfig rc = base_config(las_config);
      if (o_sel->count()) {
        if (las_selection == "bic") {
          rc.alasso.selection = LambdaSelection::bic;
        } else if (las_selection == "cv") {
          rc.alasso.selection = LambdaSelection::cv;
        } else {
          throw invalid_input(fmt::format("unknown lambda selection '{}'", las_selection));
        }
      }
      rc.alasso.validate();
      const PanelData panel = las_panel.load();
      const SaturatedDesign design = build_design(panel);
      const AlassoResult res = alasso_detect(design, stack_response(panel), rc.alasso);

      std::vector<LabeledBreak> breaks;
      for (const auto& d : res.detected) {
        const int c = candidate_index(d.unit, d.start, panel.n_times());
        breaks.push_back({panel.units[d.unit], panel.times[d.start], res.gamma(c)});
      }
      const fs::path dir(las_dir);
      {
        auto f = open_output(dir / "alasso_breaks.csv");
        write_breaks_csv(f, breaks, "gamma");
      }
      {
        json j{{"format", format_tag},
               {"kind", "alasso"},
               {"fixed_effects_penalized", false},
               {"selection", rc.alasso.selection == LambdaSelection::bic ? "bic" : "cv"},
               {"ridge_lambda", res.ridge_lambda},
               {"lambda_max", res.lambda_max},
               {"lasso_lambda", res.lasso_lambda},
               {"kkt_violation", res.kkt_violation},
               {"n_detected", res.detected.size()}};
        json path = json::array();
        for (const auto& pt : res.path) {
          path.push_back({{"lambda", pt.lambda},
                          {"criterion", pt.criterion},
                          {"n_selected", pt.n_selected},
                          {"sweeps", pt.sweeps},
                          {"converged", pt.converged}});
        }
        j["path"] = path;
        auto f = open_output(dir / "alasso.json");
        f << j.dump(2) << '\n';
      }
      out << "unit,start,gamma\n";
      for (const auto& b : breaks) out << b.unit << ',' << b.time << ',' << fmt::format("{:.6g}", b.value) << '\n';
      return 0;
    }

    if (cal->parsed()) {
      const double tau = cal_numeric ? calibrate_tau_numeric(cal_p, cal_mult) : calibrate_tau(cal_p, cal_mult);
      out << fmt::format("{:.4f}", tau) << '\n';
      return 0;
    }

    if (sc->parsed()) {
      auto read = [](const std::string& path) {
        std::ifstream in(path);
        if (!in) throw Error(ErrorKind::io, fmt::format("cannot open '{}'", path));
        return read_breaks_csv(in);
      };
      const auto detected = read(sc_detected);
      const auto truth = read(sc_truth);
      int q = 0;
      if (o_q->count()) {
        q = sc_q;
      } else if (o_scu->count() && o_sct->count()) {
        q = sc_units * (sc_times - 3);
      } else {
        throw invalid_input("score needs --q or both --units and --times");
      }
      if (q <= 0) throw invalid_input("number of candidates must be positive");

      std::map<std::string, int> unit_ids;
      for (const auto* list : {&truth, &detected}) {
        for (const auto& b : *list) unit_ids.emplace(b.unit, 0);
      }
      int next = 0;
      for (auto& [label, id] : unit_ids) id = next++;
      auto convert = [&](const std::vector<LabeledBreak>& list) {
        std::set<BreakCandidate> s;
        for (const auto& b : list) s.insert({unit_ids.at(b.unit), static_cast<int>(b.time)});
        return std::vector<BreakCandidate>(s.begin(), s.end());
      };
      const ScoreRow row = score(convert(detected), convert(truth), q);

      auto emit = [&](std::ostream& o) {
        auto field = [](const std::optional<double>& v) {
          return v ? fmt::format("{:.10g}", *v) : std::string("NA");
        };
        o << "# " << format_tag << " score\n";
        o << "metric,value\n";
        o << "true_positives," << row.true_positives << '\n';
        o << "false_positives," << row.false_positives << '\n';
        o << "false_negatives," << row.false_negatives << '\n';
        o << "near_misses," << row.near_misses << '\n';
        o << "tpr," << field(row.tpr) << '\n';
        o << "fpr," << field(row.fpr) << '\n';
        o << "precision," << field(row.precision) << '\n';
        o << "f1," << field(row.f1) << '\n';
        o << "near_miss," << field(row.near_miss) << '\n';
      };
      if (sc_out.empty()) {
        emit(out);
      } else {
        auto f = open_output(sc_out);
        emit(f);
      }
      return 0;
    }
  } catch (const Error& e) {
    write_error(err, kind_name(e.kind()), e.what());
    return e.kind() == ErrorKind::invalid_input ? 2 : 1;
  } catch (const std::exception& e) {
    write_error(err, "runtime", e.what());
    return 1;
  }
  return 0;
}

}  // namespace bisam
