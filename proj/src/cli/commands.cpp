#include "geosub/cli.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "geosub/errors.hpp"
#include "geosub/experiments.hpp"
#include "geosub/serialization.hpp"

namespace geosub::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream s;
  s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return s.str();
}

std::string join(const std::vector<std::string>& args) {
  std::string out;
  for (const auto& a : args) out += (out.empty() ? "" : " ") + a;
  return out;
}

io::ReferenceSpec parse_reference(const std::string& name) {
  if (name == "zero") return {io::ReferenceSpec::Kind::kZero, {}};
  if (name == "mean") return {io::ReferenceSpec::Kind::kMean, {}};
  throw InvalidInput("--reference must be 'zero' or 'mean', got '" + name + "'");
}

std::vector<Eigen::Index> parse_ranks(const std::string& text) {
  std::vector<Eigen::Index> ranks;
  auto to_index = [&](const std::string& s) {
    try {
      std::size_t used = 0;
      const long v = std::stol(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return static_cast<Eigen::Index>(v);
    } catch (const std::exception&) {
      throw InvalidInput("--ranks: cannot parse '" + s + "'");
    }
  };
  if (text.find(':') != std::string::npos) {
    std::vector<std::string> parts;
    std::stringstream ss(text);
    std::string part;
    while (std::getline(ss, part, ':')) parts.push_back(part);
    if (parts.size() < 2 || parts.size() > 3) {
      throw InvalidInput("--ranks: expected first:last[:step]");
    }
    const Eigen::Index first = to_index(parts[0]);
    const Eigen::Index last = to_index(parts[1]);
    const Eigen::Index stride = parts.size() == 3 ? to_index(parts[2]) : 1;
    if (stride < 1 || last < first) throw InvalidInput("--ranks: empty or invalid range");
    for (Eigen::Index r = first; r <= last; r += stride) ranks.push_back(r);
  } else {
    std::stringstream ss(text);
    std::string part;
    while (std::getline(ss, part, ',')) ranks.push_back(to_index(part));
  }
  if (ranks.empty()) throw InvalidInput("--ranks: no ranks given");
  return ranks;
}

struct SolverFlags {
  int restarts = 5;
  std::uint64_t seed = 0;
  double grad_tol = 1e-4;
  int max_iters = 5000;

  void add(CLI::App& app) {
    app.add_option("--restarts", restarts, "Independent random initializations")
        ->capture_default_str();
    app.add_option("--seed", seed, "Base random seed")->capture_default_str();
    app.add_option("--grad-tol", grad_tol, "Stop when the Riemannian gradient norm drops below")
        ->capture_default_str();
    app.add_option("--max-iters", max_iters, "Iteration cap per restart")->capture_default_str();
  }

  SolverConfig config() const {
    SolverConfig c;
    c.restarts = restarts;
    c.rng_seed = seed;
    c.grad_tol = grad_tol;
    c.max_iters = max_iters;
    c.validate();
    return c;
  }
};

// One manifest per run, written last (also after failures).
class Manifest {
 public:
  Manifest(std::string command, const std::vector<std::string>& argv)
      : started_(std::chrono::steady_clock::now()) {
    doc_ = {{"format_version", io::kFormatVersion},
            {"command", std::move(command)},
            {"argv", argv},
            {"command_line", "geosub " + join(argv)},
            {"started_at", utc_timestamp()}};
  }

  json& operator[](const char* key) { return doc_[key]; }

  void write(const fs::path& dir, const std::string& status) {
    doc_["status"] = status;
    doc_["finished_at"] = utc_timestamp();
    doc_["wall_time_s"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started_).count();
    doc_["output_dir"] = dir.string();
    io::write_file_atomic(dir / "manifest.json", doc_.dump(2) + "\n");
  }

 private:
  json doc_;
  std::chrono::steady_clock::time_point started_;
};

struct Selection {
  std::string which = "all";
};

SnapshotSet select_split(const SnapshotSet& data, const std::string& which) {
  if (which == "all") return data;
  auto [train, test] = split_train_test(data);
  if (which == "train") return train;
  if (which == "test") return test;
  throw InvalidInput("--split must be all, train or test, got '" + which + "'");
}

// ---------------------------------------------------------------------------

struct GenerateOptions {
  std::string generator;
  fs::path out_dir = ".";
  TransportConfig transport;
  SyntheticWakeConfig wake;
  std::string reference = "zero";
};

void cmd_generate(const GenerateOptions& opt, Manifest& manifest, std::ostream& out) {
  SnapshotSet data;
  json config;
  if (opt.generator == "transport") {
    data = gen_transport(opt.transport);
    const auto& c = opt.transport;
    config = {{"wave_speed", c.wave_speed},
              {"pulse_center", c.pulse_center},
              {"pulse_width", c.pulse_width},
              {"grid_points", c.grid_points},
              {"snapshots", c.snapshot_count},
              {"time_scale", c.time_scale}};
  } else if (opt.generator == "parabola") {
    data = gen_parabola();
  } else if (opt.generator == "synthetic") {
    data = gen_synthetic_wake(opt.wake);
    const auto& c = opt.wake;
    config = {{"nx", c.nx}, {"ny", c.ny}, {"snapshots", c.snapshot_count},
              {"blobs", c.blobs}, {"seed", c.seed}};
  } else {
    throw InvalidInput("unknown generator '" + opt.generator +
                       "' (expected transport, parabola or synthetic)");
  }
  const io::ReferenceSpec ref = parse_reference(opt.reference);
  data.q_ref = ref.resolve(data.Q);
  io::save_snapshots(opt.out_dir, data, ref);

  config["generator"] = opt.generator;
  config["reference"] = opt.reference;
  manifest["config"] = config;
  manifest["outputs"] = {"snapshots.bin", "snapshots.json"};
  out << "wrote " << data.state_dim() << "x" << data.count() << " snapshots to "
      << opt.out_dir.string() << "\n";
}

// ---------------------------------------------------------------------------

struct FitOptions {
  fs::path data;
  fs::path out_dir = ".";
  Eigen::Index rank = 1;
  Eigen::Index features = 1;
  std::string split = "all";
  std::string reference;
  bool allow_rank_deficient = false;
  SolverFlags solver;
};

void cmd_fit(const FitOptions& opt, Manifest& manifest, std::ostream& out) {
  io::ReferenceSpec ref_override;
  const bool override_ref = !opt.reference.empty();
  if (override_ref) ref_override = parse_reference(opt.reference);
  const SnapshotSet all = io::load_snapshots(opt.data, override_ref ? &ref_override : nullptr);
  const SnapshotSet train = select_split(all, opt.split);

  SolverConfig config = opt.solver.config();
  config.rng_seed = rank_seed(opt.solver.seed, opt.rank);
  manifest["config"] = {{"rank", opt.rank},
                        {"features", opt.features},
                        {"split", opt.split},
                        {"reference", override_ref ? opt.reference : "from-data"},
                        {"allow_rank_deficient", opt.allow_rank_deficient},
                        {"seed", opt.solver.seed},
                        {"solver", io::to_json(config)}};
  manifest["inputs"] = {{"data", opt.data.string()}};

  FeatureOptions fopt;
  if (opt.allow_rank_deficient) fopt.rank_policy = RankPolicy::kPad;
  const FeatureModel feature = build_feature_model(train, opt.features, fopt);
  const FitResult fit = solve(feature, opt.rank, config);

  io::save_feature_model(opt.out_dir, feature);
  io::save_params(opt.out_dir, fit.params, feature.time_map);
  json report = io::to_json(fit.report);
  report["rank"] = opt.rank;
  report["n_features"] = opt.features;
  io::write_file_atomic(opt.out_dir / "fit_report.json", report.dump(2) + "\n");

  manifest["fit_wall_time_s"] = fit.report.wall_time;
  manifest["outputs"] = {"features.json", "features_basis.bin", "features_qref.bin",
                         "features_coords.bin", "params.json", "params_T.bin",
                         "fit_report.json"};
  out << "rank " << opt.rank << ": objective " << std::setprecision(6)
      << fit.report.objective_trace.back() << " after " << fit.report.iterations
      << " iterations (" << (fit.report.converged ? "converged" : "not converged") << ")\n";
}

// ---------------------------------------------------------------------------

struct EvaluateOptions {
  fs::path model;
  fs::path data;
  fs::path out_dir = ".";
  std::string split = "all";
  std::vector<double> taus;
  bool reconstruct = false;
};

void cmd_evaluate(const EvaluateOptions& opt, Manifest& manifest, std::ostream& out) {
  const FeatureModel feature = io::load_feature_model(opt.model);
  TimeNormalization time_map;
  const GeodesicParams params = io::load_params(opt.model, &time_map);
  params.validate();
  if (params.features() != feature.features()) {
    throw InvalidInput("params have n_f = " + std::to_string(params.features()) +
                       ", feature model has n_f = " + std::to_string(feature.features()));
  }

  const SnapshotSet all = io::load_snapshots(opt.data);
  if (all.state_dim() != feature.state_dim()) {
    throw InvalidInput("data has N = " + std::to_string(all.state_dim()) +
                       ", saved feature basis is " + std::to_string(feature.state_dim()) + "x" +
                       std::to_string(feature.features()));
  }
  SnapshotSet data = select_split(all, opt.split);
  data.q_ref = feature.q_ref;

  manifest["inputs"] = {{"model", opt.model.string()}, {"data", opt.data.string()}};
  manifest["config"] = {{"split", opt.split}, {"tau", opt.taus}, {"reconstruct", opt.reconstruct}};

  const std::vector<double> tau = time_map.apply(data.times);
  const Matrix Y = feature.project(data.Q);
  const double feature_error = FeatureObjective(Y, tau).relative_error(params);

  const Matrix centered = data.centered();
  const Matrix recon = reconstruct_all(feature, params, data.Q, tau);
  const Matrix residual = data.Q - recon;

  std::ostringstream csv;
  csv << "index,time,tau,abs_error,rel_error\n" << std::setprecision(17);
  for (Eigen::Index j = 0; j < data.count(); ++j) {
    const double abs_err = residual.col(j).norm();
    const double scale = centered.col(j).norm();
    const double rel = scale > 0.0 ? abs_err / scale : 0.0;
    csv << j << ',' << data.times[static_cast<std::size_t>(j)] << ','
        << tau[static_cast<std::size_t>(j)] << ',' << abs_err << ',' << rel << '\n';
  }
  io::write_file_atomic(opt.out_dir / "errors.csv", csv.str());

  const Eigen::Index r = params.rank();
  json summary = {{"format_version", io::kFormatVersion},
                  {"rank", r},
                  {"n_features", feature.features()},
                  {"snapshots", data.count()},
                  {"split", opt.split},
                  {"aggregate_error", feature_error},
                  {"aggregate_full_space_error", residual.norm() / centered.norm()},
                  {"extrapolated_snapshots",
                   std::count_if(tau.begin(), tau.end(),
                                 [](double t) { return t < 0.0 || t > 1.0; })}};
  if (r <= feature.features()) {
    summary["pod_error_r"] = pod_projection_error(feature.basis.leftCols(r), data);
  }
  if (2 * r <= feature.features()) {
    summary["pod_error_2r"] = pod_projection_error(feature.basis.leftCols(2 * r), data);
  }
  json outputs = {"errors.csv", "summary.json"};

  json bases = json::array();
  for (std::size_t i = 0; i < opt.taus.size(); ++i) {
    const GeodesicBasisSample sample = assemble_basis(feature, params, opt.taus[i]);
    const std::string file = "basis_tau_" + std::to_string(i) + ".bin";
    io::write_matrix(opt.out_dir / file, sample.V);
    bases.push_back({{"tau", sample.tau},
                     {"file", file},
                     {"rows", sample.V.rows()},
                     {"cols", sample.V.cols()},
                     {"extrapolated", sample.extrapolated},
                     {"orthonormality_defect", orthonormality_defect(sample.V)}});
    outputs.push_back(file);
  }
  if (!bases.empty()) summary["bases"] = bases;

  if (opt.reconstruct) {
    const fs::path dir = opt.out_dir / "reconstruction";
    SnapshotSet rec{recon, data.times, data.q_ref};
    io::save_snapshots(dir, rec, {io::ReferenceSpec::Kind::kExplicit, data.q_ref});
    outputs.push_back("reconstruction/snapshots.json");
  }
  io::write_file_atomic(opt.out_dir / "summary.json", summary.dump(2) + "\n");
  manifest["outputs"] = outputs;
  out << "aggregate error " << std::setprecision(6) << feature_error << " over "
      << data.count() << " snapshots\n";
}

// ---------------------------------------------------------------------------

struct SweepOptions {
  fs::path data;
  fs::path out_dir = ".";
  std::string ranks = "2:26:2";
  Eigen::Index features = 200;
  bool allow_rank_deficient = false;
  SolverFlags solver;
};

void cmd_sweep(const SweepOptions& opt, Manifest& manifest, std::ostream& out) {
  const std::vector<Eigen::Index> ranks = parse_ranks(opt.ranks);
  const SnapshotSet all = io::load_snapshots(opt.data);
  const auto [train, test] = split_train_test(all);
  const SolverConfig config = opt.solver.config();

  manifest["inputs"] = {{"data", opt.data.string()}};
  manifest["config"] = {{"ranks", ranks},
                        {"features", opt.features},
                        {"allow_rank_deficient", opt.allow_rank_deficient},
                        {"seed", opt.solver.seed},
                        {"solver", io::to_json(config)}};

  FeatureOptions fopt;
  if (opt.allow_rank_deficient) fopt.rank_policy = RankPolicy::kPad;
  json reports = json::array();
  const auto rows = rank_sweep(train, test, ranks, opt.features, config, fopt,
                               [&](const SweepRow& row, const FitResult& fit) {
                                 json rep = io::to_json(fit.report);
                                 rep["rank"] = row.r;
                                 rep["seed"] = rank_seed(config.rng_seed, row.r);
                                 reports.push_back(rep);
                                 out << "r=" << row.r << " pod=" << row.pod_error_r
                                     << " pod2r=" << row.pod_error_2r
                                     << " dyn=" << row.dynamic_error_mean << '\n';
                               });
  std::ostringstream csv;
  write_sweep_csv(csv, rows);
  io::write_file_atomic(opt.out_dir / "sweep.csv", csv.str());
  io::write_file_atomic(opt.out_dir / "sweep_reports.json", reports.dump(2) + "\n");
  manifest["outputs"] = {"sweep.csv", "sweep_reports.json"};
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Dynamic low-rank subspaces as Grassmannian geodesics", "geosub"};
  app.require_subcommand(1);

  GenerateOptions gen;
  auto* generate = app.add_subcommand("generate", "Write an analytic snapshot dataset");
  generate->add_option("generator", gen.generator, "transport | parabola | synthetic")
      ->required();
  generate->add_option("--out", gen.out_dir, "Output directory")->capture_default_str();
  generate->add_option("--snapshots", gen.transport.snapshot_count, "Snapshot count K")
      ->capture_default_str();
  generate->add_option("--grid-points", gen.transport.grid_points, "Grid points N")
      ->capture_default_str();
  generate->add_option("--wave-speed", gen.transport.wave_speed)->capture_default_str();
  generate->add_option("--pulse-center", gen.transport.pulse_center)->capture_default_str();
  generate->add_option("--pulse-width", gen.transport.pulse_width)->capture_default_str();
  generate->add_option("--time-scale", gen.transport.time_scale,
                       "t_j = time_scale * (j - 1) / K")
      ->capture_default_str();
  generate->add_option("--nx", gen.wake.nx, "synthetic: grid columns")->capture_default_str();
  generate->add_option("--ny", gen.wake.ny, "synthetic: grid rows")->capture_default_str();
  generate->add_option("--blobs", gen.wake.blobs, "synthetic: advected blobs")
      ->capture_default_str();
  generate->add_option("--seed", gen.wake.seed, "synthetic: generator seed")
      ->capture_default_str();
  generate->add_option("--reference", gen.reference, "zero | mean")->capture_default_str();

  FitOptions fit;
  auto* fit_cmd = app.add_subcommand("fit", "Learn a geodesic basis from snapshot data");
  fit_cmd->add_option("--data", fit.data, "Snapshot directory, .json sidecar or .csv")
      ->required();
  fit_cmd->add_option("--rank", fit.rank, "Reduced dimension r")->required();
  fit_cmd->add_option("--features", fit.features, "Feature dimension n_f")->required();
  fit_cmd->add_option("--out", fit.out_dir, "Output directory")->capture_default_str();
  fit_cmd->add_option("--split", fit.split, "all | train | test")->capture_default_str();
  fit_cmd->add_option("--reference", fit.reference, "Override q_ref: zero | mean");
  fit_cmd->add_flag("--allow-rank-deficient", fit.allow_rank_deficient,
                    "Keep n_f even if it exceeds the numerical rank");
  fit.solver.add(*fit_cmd);

  EvaluateOptions eval;
  auto* eval_cmd = app.add_subcommand("evaluate", "Evaluate a fitted model on snapshot data");
  eval_cmd->add_option("--model", eval.model, "Directory written by `fit`")->required();
  eval_cmd->add_option("--data", eval.data, "Snapshot directory, .json sidecar or .csv")
      ->required();
  eval_cmd->add_option("--out", eval.out_dir, "Output directory")->capture_default_str();
  eval_cmd->add_option("--split", eval.split, "all | train | test")->capture_default_str();
  eval_cmd->add_option("--tau", eval.taus, "Emit the basis V(tau) at these normalized times");
  eval_cmd->add_flag("--reconstruct", eval.reconstruct, "Write reconstructed snapshots");

  SweepOptions sweep;
  auto* sweep_cmd = app.add_subcommand("sweep", "POD vs. dynamic test error over ranks");
  sweep_cmd->add_option("--data", sweep.data, "Snapshot directory, .json sidecar or .csv")
      ->required();
  sweep_cmd->add_option("--ranks", sweep.ranks, "first:last[:step] or comma list")
      ->capture_default_str();
  sweep_cmd->add_option("--features", sweep.features, "Feature dimension n_f")
      ->capture_default_str();
  sweep_cmd->add_option("--out", sweep.out_dir, "Output directory")->capture_default_str();
  sweep_cmd->add_flag("--allow-rank-deficient", sweep.allow_rank_deficient,
                      "Keep n_f even if it exceeds the numerical rank");
  sweep.solver.add(*sweep_cmd);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kSuccess : kUsageError;
  }

  const char* name = app.get_subcommands().front()->get_name().c_str();
  fs::path out_dir = generate->parsed()   ? gen.out_dir
                     : fit_cmd->parsed()  ? fit.out_dir
                     : eval_cmd->parsed() ? eval.out_dir
                                          : sweep.out_dir;
  Manifest manifest(name, args);
  try {
    fs::create_directories(out_dir);
    if (generate->parsed()) cmd_generate(gen, manifest, out);
    if (fit_cmd->parsed()) cmd_fit(fit, manifest, out);
    if (eval_cmd->parsed()) cmd_evaluate(eval, manifest, out);
    if (sweep_cmd->parsed()) cmd_sweep(sweep, manifest, out);
    manifest.write(out_dir, "ok");
    return kSuccess;
  } catch (const NumericalError& e) {
    json diag = {{"error", e.what()}, {"kind", "numerical"}, {"details", e.diagnostics()}};
    err << diag.dump() << '\n';
    try {
      io::write_file_atomic(out_dir / "diagnostics.json", diag.dump(2) + "\n");
      manifest["error"] = diag;
      manifest.write(out_dir, "numerical_failure");
    } catch (const std::exception&) {
    }
    return kNumericalFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    try {
      manifest["error"] = {{"error", e.what()}, {"kind", "usage"}};
      manifest.write(out_dir, "usage_error");
    } catch (const std::exception&) {
    }
    return kUsageError;
  }
}

}  // namespace geosub::cli
