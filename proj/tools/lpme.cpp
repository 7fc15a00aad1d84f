// Command-line front end for longitudinal principal manifold estimation:
// simulate benchmark scenarios, fit models, evaluate them, estimate volumes,
// and lift closed clouds into augmented coordinates.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <tuple>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "lpme/io.hpp"
#include "lpme/lpme.hpp"
#include "lpme/parallel.hpp"
#include "lpme/sim.hpp"
#include "lpme/version.hpp"
#include "lpme/volume.hpp"

namespace {

using namespace lpme;

std::string join_command_line(int argc, char** argv) {
  std::string cmd;
  for (int i = 0; i < argc; ++i) {
    if (i) cmd += ' ';
    cmd += argv[i];
  }
  return cmd;
}

VectorXd parse_grid(const std::string& spec) {
  // "e:lo:hi" = exp(lo..hi) at integer steps; otherwise a comma list
  VectorXd grid;
  if (spec.rfind("e:", 0) == 0) {
    std::istringstream is(spec.substr(2));
    int lo = 0, hi = 0;
    char colon = 0;
    if (!(is >> lo >> colon >> hi) || colon != ':' || hi < lo)
      throw std::invalid_argument("malformed grid spec: " + spec);
    grid.resize(hi - lo + 1);
    for (int g = lo; g <= hi; ++g) grid[g - lo] = std::exp(static_cast<double>(g));
  } else {
    std::vector<double> vals;
    std::stringstream ss(spec);
    std::string tok;
    while (std::getline(ss, tok, ',')) vals.push_back(parse_double(tok, "grid spec"));
    if (vals.empty()) throw std::invalid_argument("empty grid spec");
    grid = Eigen::Map<VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size()));
  }
  return grid;
}

VectorXd parse_csv_vector(const std::string& spec) {
  std::vector<double> vals;
  std::stringstream ss(spec);
  std::string tok;
  while (std::getline(ss, tok, ',')) vals.push_back(parse_double(tok, "vector spec"));
  return Eigen::Map<VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size()));
}

struct LiftCliOptions {
  std::string mode;  // "", "polar", "spherical"
  double scale = 1.0;
  std::string center_csv;
};

void add_lift_flags(CLI::App* cmd, LiftCliOptions& opt) {
  cmd->add_option("--lift", opt.mode, "Augment the cloud before fitting: polar | spherical")
      ->check(CLI::IsMember({"polar", "spherical"}));
  cmd->add_option("--lift-scale", opt.scale, "Scale of the appended angle coordinates");
  cmd->add_option("--lift-center", opt.center_csv,
                  "Angular origin as comma-separated coordinates (default: cloud centroid)");
}

LiftSpec make_lift_spec(const LiftCliOptions& opt, const LongitudinalCloud& cloud) {
  LiftSpec spec;
  spec.mode = opt.mode == "polar" ? LiftMode::Polar : LiftMode::Spherical;
  spec.scale = opt.scale;
  if (!opt.center_csv.empty()) {
    spec.center = parse_csv_vector(opt.center_csv);
  } else {
    MatrixXd all(0, cloud.D());
    for (const auto& c : cloud.clouds) {
      MatrixXd merged(all.rows() + c.rows(), c.cols());
      merged << all, c;
      all = merged;
    }
    spec.center = all.colwise().mean().transpose();
  }
  return spec;
}

// ---------------------------------------------------------------------------

// Merges an external per-run results file (lines `case combo master_seed
// name value`) into the factorial table as extra columns, keyed by run.
void write_merged_table(std::ostream& os, const FactorialResult& res, const std::string& header,
                        const std::string& external_path) {
  std::ifstream is(external_path);
  if (!is) throw std::invalid_argument("cannot open external results: " + external_path);
  std::map<std::tuple<int, int, std::uint64_t>, std::map<std::string, double>> extra;
  std::set<std::string> names;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    int case_id = 0, combo = 0;
    std::uint64_t master = 0;
    std::string name, value;
    if (!(ls >> case_id >> combo >> master >> name >> value))
      throw std::invalid_argument(external_path + " line " + std::to_string(line_no) +
                                  ": expected `case combo master_seed name value`");
    extra[{case_id, combo, master}][name] = parse_double(value, external_path);
    names.insert(name);
  }
  os << header;
  os << "case combo master_seed run_seed sd_alpha sd_beta sd_zeta duration interval change "
        "msd_data msd_lpme msd_pme err_lpme err_pme";
  for (const auto& n : names) os << " msd_" << n;
  os << '\n';
  for (const auto& r : res.rows) {
    os << r.case_id << ' ' << r.combo << ' ' << r.master_seed << ' ' << r.run_seed << ' '
       << dec_double(r.sd_alpha) << ' ' << dec_double(r.sd_beta) << ' ' << dec_double(r.sd_zeta)
       << ' ' << dec_double(r.duration) << ' ' << dec_double(r.interval) << ' '
       << change_model_name(r.change) << ' ' << dec_double(r.msd_data) << ' '
       << dec_double(r.msd_lpme) << ' ' << dec_double(r.msd_pme) << ' '
       << (r.error_lpme.empty() ? "-" : "error") << ' '
       << (r.error_pme.empty() ? "-" : "error");
    auto it = extra.find({r.case_id, r.combo, r.master_seed});
    for (const auto& n : names) {
      if (it != extra.end() && it->second.count(n)) {
        os << ' ' << dec_double(it->second.at(n));
      } else {
        os << " nan";
      }
    }
    os << '\n';
  }
}

int cmd_simulate(const CLI::App& app, const std::string& cmdline) {
  SimSpec spec;
  spec.case_id = app.get_option("--case")->as<int>();
  spec.seed = app.get_option("--seed")->as<std::uint64_t>();
  spec.n_per_time = app.get_option("--n-per-time")->as<int>();
  spec.duration = app.get_option("--duration")->as<double>();
  spec.interval = app.get_option("--interval")->as<double>();
  spec.sd_alpha = app.get_option("--sd-alpha")->as<double>();
  spec.sd_beta = app.get_option("--sd-beta")->as<double>();
  spec.sd_zeta = app.get_option("--sd-zeta")->as<double>();
  spec.sd_iota = app.get_option("--sd-iota")->as<double>();
  spec.change = parse_change_model(app.get_option("--change-model")->as<std::string>());
  const std::string out = app.get_option("--out")->as<std::string>();
  const std::string factorial = app.get_option("--factorial")->as<std::string>();
  const int threads = app.get_option("--threads")->as<int>();

  if (factorial.empty()) {
    SimOutput sim = generate(spec);
    std::string header = file_header("cloud", cmdline, spec.seed);
    write_cloud_file(out + "_observed.txt", sim.observed, header);
    write_cloud_file(out + "_truth.txt", sim.truth, header);
    std::cout << "wrote " << out << "_observed.txt and " << out << "_truth.txt\n";
    return 0;
  }

  FactorialSpec fs = desk_preset();
  fs.threads = threads;
  fs.n_per_time = spec.n_per_time;
  fs.sd_iota = spec.sd_iota;
  if (factorial == "full") {
    fs.cases = {1, 2, 3, 4, 5, 6, 7, 8};
    fs.levels_alpha = fs.levels_beta = fs.levels_zeta = {0.0, 0.05, 0.1, 0.25, 0.5, 1.0};
    fs.durations = {1.0, 2.0, 5.0};
    fs.intervals = {0.1, 0.25, 0.5};
    fs.cycle_change_models = false;
    fs.n_per_time = 1000;
    fs.seeds = {spec.seed};
  } else if (factorial != "desk") {
    throw std::invalid_argument("unknown factorial preset: " + factorial);
  }
  auto override_levels = [&](const char* flag, std::vector<double>* target) {
    const auto* o = app.get_option(flag);
    if (o->count()) {
      VectorXd v = parse_csv_vector(o->as<std::string>());
      target->assign(v.data(), v.data() + v.size());
    }
  };
  override_levels("--levels-alpha", &fs.levels_alpha);
  override_levels("--levels-beta", &fs.levels_beta);
  override_levels("--levels-zeta", &fs.levels_zeta);
  override_levels("--durations", &fs.durations);
  override_levels("--intervals", &fs.intervals);
  if (app.get_option("--cases")->count()) {
    VectorXd v = parse_csv_vector(app.get_option("--cases")->as<std::string>());
    fs.cases.assign(v.data(), v.data() + v.size());
  }
  if (app.get_option("--seeds")->count()) {
    VectorXd v = parse_csv_vector(app.get_option("--seeds")->as<std::string>());
    fs.seeds.clear();
    for (int i = 0; i < v.size(); ++i) fs.seeds.push_back(static_cast<std::uint64_t>(v[i]));
  }
  if (app.get_option("--max-components")->count())
    fs.fit.max_components = app.get_option("--max-components")->as<int>();
  fs.run_lpme = !app.get_option("--no-lpme")->as<bool>();
  fs.run_pme = !app.get_option("--no-pme")->as<bool>();

  FactorialResult res = run_factorial(fs);
  std::string header = file_header("factorial", cmdline, spec.seed);
  {
    std::ofstream os(out + "_table.txt", std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for writing: " + out + "_table.txt");
    const auto* ext = app.get_option("--external");
    if (ext->count()) {
      write_merged_table(os, res, header, ext->as<std::string>());
    } else {
      write_factorial_table(os, res, header);
    }
  }
  {
    std::ofstream os(out + "_summary.txt", std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for writing: " + out + "_summary.txt");
    write_factorial_summary(os, res, header);
  }
  std::cout << "wrote " << out << "_table.txt (" << res.rows.size() << " rows) and " << out
            << "_summary.txt\n";
  return 0;
}

// ---------------------------------------------------------------------------

int cmd_fit(const CLI::App& app, const LiftCliOptions& lift_cli, const std::string& cmdline) {
  const std::string input = app.get_option("--input")->as<std::string>();
  const std::string out = app.get_option("--out")->as<std::string>();
  const std::string mode = app.get_option("--mode")->as<std::string>();

  CloudFile cf = read_cloud_file(input);
  LongitudinalCloud cloud = cf.observed;
  if (app.get_option("--d")->count()) {
    cloud.d = app.get_option("--d")->as<int>();
  } else if (cf.declared_d > 0) {
    cloud.d = cf.declared_d;
  } else {
    throw std::invalid_argument("intrinsic dimension unknown: pass --d or use a cloud file with a d header");
  }

  ModelFile mf;
  if (!lift_cli.mode.empty()) {
    mf.lift.active = true;
    mf.lift.spec = make_lift_spec(lift_cli, cloud);
    mf.lift.original_D = cloud.D();
    for (auto& c : cloud.clouds) c = lift(c, mf.lift.spec);
  }

  LpmeOptions opt;
  opt.seed = app.get_option("--seed")->as<std::uint64_t>();
  opt.threads = app.get_option("--threads")->as<int>();
  if (app.get_option("--N0")->count()) opt.N0 = app.get_option("--N0")->as<int>();
  if (app.get_option("--alpha")->count()) opt.alpha = app.get_option("--alpha")->as<double>();
  if (app.get_option("--eps")->count()) opt.eps = app.get_option("--eps")->as<double>();
  if (app.get_option("--itr")->count()) opt.max_iterations = app.get_option("--itr")->as<int>();
  if (app.get_option("--max-components")->count())
    opt.max_components = app.get_option("--max-components")->as<int>();
  if (app.get_option("--isomap-k")->count()) opt.isomap_k = app.get_option("--isomap-k")->as<int>();
  if (app.get_option("--lambda-grid")->count())
    opt.lambda_grid = parse_grid(app.get_option("--lambda-grid")->as<std::string>());
  if (app.get_option("--gamma-grid")->count())
    opt.gamma_grid = parse_grid(app.get_option("--gamma-grid")->as<std::string>());
  if (app.get_option("--gamma")->count()) opt.fixed_gamma = app.get_option("--gamma")->as<double>();

  std::string header = file_header("model", cmdline, opt.seed);
  std::ostringstream report;

  if (mode == "lpme") {
    mf.kind = "lpme";
    mf.lpme = fit_lpme(cloud, opt);
    report << "model lpme\n";
    report << "gamma_star " << dec_double(mf.lpme.gamma_star) << '\n';
    for (int t = 0; t < mf.lpme.T(); ++t)
      report << "time " << dec_double(mf.lpme.times[t]) << " tau " << dec_double(mf.lpme.tau[t])
             << " lambda_star " << dec_double(mf.lpme.lambda_star[t]) << " w "
             << dec_double(mf.lpme.w[t]) << '\n';
    for (const auto& w : mf.lpme.warnings) report << "warning " << w << '\n';
  } else if (mode == "pme") {
    mf.kind = "pme";
    const int N0 = opt.N0 > 0 ? opt.N0 : 10 * cloud.d;
    ReduceOptions ropt;
    ropt.alpha = opt.alpha;
    ropt.eps = opt.eps;
    ropt.max_components = opt.max_components;
    ReducedCloud reduced = reduce_longitudinal(cloud, N0, opt.seed, ropt);
    PmeOptions popt;
    popt.lambda_grid = opt.lambda_grid;
    popt.eps = opt.eps;
    popt.max_iterations = opt.max_iterations;
    popt.threads = opt.threads;
    mf.pme.times = cloud.times;
    mf.pme.tau.resize(cloud.T());
    mf.pme.lambda_star.resize(cloud.T());
    report << "model pme\n";
    for (int t = 0; t < cloud.T(); ++t) {
      MatrixXd iso = isomap_embed(reduced.centers[static_cast<size_t>(t)], cloud.d, opt.isomap_k);
      PmeFit fit = fit_pme(reduced.centers[static_cast<size_t>(t)],
                           reduced.weights[static_cast<size_t>(t)], iso,
                           cloud.clouds[static_cast<size_t>(t)], popt);
      mf.pme.models.push_back(fit.model);
      mf.pme.tau[t] = fit.tau;
      mf.pme.lambda_star[t] = fit.lambda_star;
      report << "time " << dec_double(cloud.times[t]) << " tau " << dec_double(fit.tau)
             << " lambda_star " << dec_double(fit.lambda_star) << '\n';
    }
  } else {
    throw std::invalid_argument("unknown fit mode: " + mode);
  }

  // the metrics block of the report mirrors `evaluate` on the same input
  VectorXd per = per_time_msd(mf, cf.observed);
  for (int t = 0; t < cf.observed.T(); ++t)
    report << "msd time " << dec_double(cf.observed.times[t]) << ' ' << dec_double(per[t]) << '\n';
  report << "msd overall " << dec_double(per.mean()) << '\n';

  write_model_file(out, mf, header);
  std::ofstream rs(out + ".report.txt", std::ios::binary);
  if (!rs) throw std::runtime_error("cannot open for writing: " + out + ".report.txt");
  rs << file_header("report", cmdline, opt.seed) << report.str();
  std::cout << "wrote " << out << " and " << out << ".report.txt\n";
  return 0;
}

// ---------------------------------------------------------------------------

int cmd_evaluate(const CLI::App& app, const std::string& cmdline) {
  const std::string model_path = app.get_option("--model")->as<std::string>();
  const std::string input = app.get_option("--input")->as<std::string>();
  const std::string out = app.get_option("--out")->as<std::string>();

  ModelFile mf = read_model_file(model_path);
  CloudFile cf = read_cloud_file(input);

  std::ofstream os(out, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for writing: " + out);
  os << file_header("metrics", cmdline, 0);

  VectorXd per = per_time_msd(mf, cf.observed);
  os << "metric time value\n";
  for (int t = 0; t < cf.observed.T(); ++t)
    os << "msd " << dec_double(cf.observed.times[t]) << ' ' << dec_double(per[t]) << '\n';
  os << "msd_overall - " << dec_double(per.mean()) << '\n';

  const auto* truth_opt = app.get_option("--truth");
  if (truth_opt->count()) {
    CloudFile tf = read_cloud_file(truth_opt->as<std::string>(), /*allow_empty=*/true);
    const LongitudinalCloud& truth = tf.has_truth ? tf.truth : tf.observed;
    if (truth.times.size() == 0 || truth.clouds.empty()) {
      std::cerr << "warning: truth file has no rows; MSD-to-truth omitted\n";
    } else {
      VectorXd tt(truth.T());
      for (int t = 0; t < truth.T(); ++t) {
        SplineModel m;
        if (mf.kind == "lpme") {
          m = model_at_time(mf.lpme, truth.times[t]);
        } else {
          int idx = -1;
          for (int i = 0; i < mf.pme.times.size(); ++i)
            if (std::abs(mf.pme.times[i] - truth.times[t]) < 1e-9) idx = i;
          if (idx < 0)
            throw std::invalid_argument("model has no fit at truth time " +
                                        std::to_string(truth.times[t]));
          m = mf.pme.models.at(static_cast<size_t>(idx));
        }
        tt[t] = msd_to_truth(m, truth.clouds[static_cast<size_t>(t)]);
      }
      for (int t = 0; t < truth.T(); ++t)
        os << "msd_to_truth " << dec_double(truth.times[t]) << ' ' << dec_double(tt[t]) << '\n';
      os << "msd_to_truth_overall - " << dec_double(tt.mean()) << '\n';
    }
  }

  const auto* sections = app.get_option("--export-sections");
  if (sections->count()) {
    const int n_sections = app.get_option("--sections")->as<int>();
    const int samples = app.get_option("--section-samples")->as<int>();
    std::ofstream ss(sections->as<std::string>(), std::ios::binary);
    if (!ss) throw std::runtime_error("cannot open for writing: " + sections->as<std::string>());
    ss << file_header("sections", cmdline, 0);
    const int keep = mf.lift.active ? mf.lift.original_D : -1;
    ss << "time section r1 r2 coords...\n";
    for (int t = 0; t < cf.observed.T(); ++t) {
      double time = cf.observed.times[t];
      SplineModel m = mf.kind == "lpme" ? model_at_time(mf.lpme, time)
                                        : mf.pme.models.at(static_cast<size_t>(t));
      VectorXd lo = m.knots.colwise().minCoeff(), hi = m.knots.colwise().maxCoeff();
      const int S = m.d() == 1 ? 1 : n_sections;
      for (int sec = 0; sec < S; ++sec) {
        for (int i = 0; i < samples; ++i) {
          VectorXd r(m.d());
          r[0] = lo[0] + (hi[0] - lo[0]) * i / (samples - 1.0);
          if (m.d() == 2) r[1] = S == 1 ? lo[1] : lo[1] + (hi[1] - lo[1]) * sec / (S - 1.0);
          VectorXd x = eval_spline(m, r);
          if (keep > 0) x = x.head(keep).eval();
          ss << dec_double(time) << ' ' << sec << ' ' << dec_double(r[0]) << ' '
             << (m.d() == 2 ? dec_double(r[1]) : std::string("-"));
          for (int l = 0; l < x.size(); ++l) ss << ' ' << dec_double(x[l]);
          ss << '\n';
        }
      }
    }
  }
  std::cout << "wrote " << out << '\n';
  return 0;
}

// ---------------------------------------------------------------------------

int cmd_volume(const CLI::App& app, const std::string& cmdline) {
  const std::string model_path = app.get_option("--model")->as<std::string>();
  const std::string out = app.get_option("--out")->as<std::string>();
  const double voxel = app.get_option("--voxel")->as<double>();
  const int res = app.get_option("--param-resolution")->as<int>();

  ModelFile mf = read_model_file(model_path);
  if (mf.kind != "lpme") throw std::invalid_argument("volume needs an lpme model");

  VectorXd times = mf.lpme.times;
  if (app.get_option("--times")->count())
    times = parse_csv_vector(app.get_option("--times")->as<std::string>());

  std::ofstream os(out, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for writing: " + out);
  os << file_header("volume", cmdline, 0);
  os << "time volume watertight\n";
  for (int i = 0; i < times.size(); ++i) {
    try {
      double v = estimate_volume(mf.lpme, times[i], voxel, res);
      os << dec_double(times[i]) << ' ' << dec_double(v) << " 1\n";
    } catch (const std::runtime_error&) {
      os << dec_double(times[i]) << " nan 0\n";
    }
  }
  std::cout << "wrote " << out << '\n';
  return 0;
}

// ---------------------------------------------------------------------------

int cmd_lift(const CLI::App& app, const LiftCliOptions& lift_cli, const std::string& cmdline) {
  const std::string input = app.get_option("--input")->as<std::string>();
  const std::string out = app.get_option("--out")->as<std::string>();
  CloudFile cf = read_cloud_file(input);
  LongitudinalCloud cloud = cf.observed;
  LiftCliOptions chosen = lift_cli;
  chosen.mode = app.get_option("--mode")->as<std::string>();
  LiftSpec spec = make_lift_spec(chosen, cloud);
  for (auto& c : cloud.clouds) c = lift(c, spec);
  cloud.d = cf.declared_d > 0 ? cf.declared_d : 1;
  write_cloud_file(out, cloud, file_header("cloud", cmdline, 0));
  std::cout << "wrote " << out << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  const std::string cmdline = join_command_line(argc, argv);
  CLI::App app{"longitudinal principal manifold estimation"};
  app.set_version_flag("--version", std::string("lpme ") + lpme::version_string);
  app.set_config("--config");
  app.require_subcommand(1);

  int threads = lpme::default_thread_count();

  auto* sim = app.add_subcommand("simulate", "generate benchmark clouds or run the factorial design");
  sim->add_option("--case", "embedding case 1..8")->default_val(1);
  sim->add_option("--seed", "random seed")->default_val(0);
  sim->add_option("--n-per-time", "points per visit")->default_val(300);
  sim->add_option("--duration", "total time span")->default_val(1.0);
  sim->add_option("--interval", "time between visits")->default_val(0.25);
  sim->add_option("--sd-alpha", "sd of the alpha multipliers")->default_val(0.0);
  sim->add_option("--sd-beta", "sd of the beta multipliers")->default_val(0.0);
  sim->add_option("--sd-zeta", "sd of the structural translation scale")->default_val(0.0);
  sim->add_option("--sd-iota", "sd of the per-point noise")->default_val(0.05);
  sim->add_option("--change-model", "constant | linear | quadratic | sinusoidal")
      ->default_val("constant");
  sim->add_option("--factorial", "run a factorial sweep: desk | full")->default_val("");
  sim->add_option("--cases", "comma list of cases for the sweep");
  sim->add_option("--seeds", "comma list of master seeds for the sweep");
  sim->add_option("--levels-alpha", "comma list of alpha sd levels");
  sim->add_option("--levels-beta", "comma list of beta sd levels");
  sim->add_option("--levels-zeta", "comma list of zeta sd levels");
  sim->add_option("--durations", "comma list of durations");
  sim->add_option("--intervals", "comma list of intervals");
  sim->add_option("--max-components", "cap on mixture components in sweep fits");
  sim->add_flag("--no-lpme", "skip the LPME estimator in the sweep");
  sim->add_option("--external", "merge an external results file (case combo master_seed name value) into the table");
  sim->add_flag("--no-pme", "skip the per-time PME estimator in the sweep");
  sim->add_option("--threads", threads, "worker thread count");
  sim->add_option("--out", "output path prefix")->required();

  LiftCliOptions fit_lift;
  auto* fit = app.add_subcommand("fit", "fit an lpme or per-time pme model to a cloud file");
  fit->add_option("--input", "cloud file")->required();
  fit->add_option("--out", "model output path")->required();
  fit->add_option("--mode", "lpme | pme")->default_val("lpme");
  fit->add_option("--d", "intrinsic dimension (overrides the file header)");
  fit->add_option("--seed", "random seed")->default_val(0);
  fit->add_option("--N0", "minimum mixture components (default 10 d)");
  fit->add_option("--alpha", "level of the mixture stopping test");
  fit->add_option("--eps", "relative tolerance for EM and the PME loop");
  fit->add_option("--itr", "max PME iterations");
  fit->add_option("--max-components", "cap on mixture components");
  fit->add_option("--isomap-k", "neighbor count for the initial parameterization");
  fit->add_option("--lambda-grid", "penalty grid: e:lo:hi or comma list");
  fit->add_option("--gamma-grid", "temporal grid: e:lo:hi or comma list");
  fit->add_option("--gamma", "fixed temporal smoothing (skips LOOCV)");
  fit->add_option("--threads", threads, "worker thread count");
  add_lift_flags(fit, fit_lift);

  auto* ev = app.add_subcommand("evaluate", "score a model file against a cloud file");
  ev->add_option("--model", "model file")->required();
  ev->add_option("--input", "cloud file")->required();
  ev->add_option("--truth", "optional truth cloud for MSD-to-truth");
  ev->add_option("--out", "metrics output path")->required();
  ev->add_option("--export-sections", "also write cross-section polylines to this path");
  ev->add_option("--sections", "number of fixed-coordinate slices for d = 2")->default_val(8);
  ev->add_option("--section-samples", "samples per polyline")->default_val(200);

  auto* vol = app.add_subcommand("volume", "voxel-counting volume of a fitted surface over time");
  vol->add_option("--model", "lpme model file")->required();
  vol->add_option("--voxel", "voxel edge length")->required();
  vol->add_option("--param-resolution", "parameter lattice resolution")->default_val(64);
  vol->add_option("--times", "comma list of times (default: model times)");
  vol->add_option("--out", "output path")->required();

  LiftCliOptions lift_opts;
  auto* lf = app.add_subcommand("lift", "append polar or spherical angle coordinates to a cloud");
  lf->add_option("--input", "cloud file")->required();
  lf->add_option("--mode", "polar | spherical")->required()
      ->check(CLI::IsMember({"polar", "spherical"}));
  lf->add_option("--scale", lift_opts.scale, "scale of the appended coordinates");
  lf->add_option("--center", lift_opts.center_csv, "angular origin (default: cloud centroid)");
  lf->add_option("--out", "output cloud path")->required();

  try {
    app.parse(argc, argv);
    if (sim->parsed()) return cmd_simulate(*sim, cmdline);
    if (fit->parsed()) return cmd_fit(*fit, fit_lift, cmdline);
    if (ev->parsed()) return cmd_evaluate(*ev, cmdline);
    if (vol->parsed()) return cmd_volume(*vol, cmdline);
    if (lf->parsed()) return cmd_lift(*lf, lift_opts, cmdline);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help / --version
    app.exit(e);
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
