#include "cli.hpp"

#include "subdiff/experiments.hpp"
#include "subdiff/expression.hpp"
#include "subdiff/field_io.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>
#include <thread>

namespace subdiff::cli {

namespace pt = boost::property_tree;

namespace {

const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::map<std::string, std::set<std::string>> keys = {
      {"run", {"output_dir", "run_id", "jobs", "verbose"}},
      {"problem", {"name", "dim", "q", "u0", "f", "mesh_size", "mesh_file"}},
      {"model", {"alpha", "T", "steps", "solver"}},
      {"inverse",
       {"gamma", "eps", "seed", "lower", "upper", "max_iterations", "discrepancy_factor", "gradient_tolerance",
        "beta_rule", "reference_mesh_size", "reference_steps", "observation", "delta"}},
      {"gradcheck", {"gamma", "eps", "directions", "step", "seed", "tolerance"}},
      {"bench", {"alphas", "T", "eps", "gammas", "gamma_factor"}},
      {"verify",
       {"decay_T", "decay_steps", "decay_t_min", "decay_ratio_max", "positivity_T", "positivity_steps",
        "stability_T", "stability_steps", "perturbations", "seed", "amplitude"}},
  };
  return keys;
}

std::string format_number(double v) {
  std::ostringstream out;
  out << std::setprecision(17) << v;
  return out.str();
}

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

double parse_number(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(t, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (t.empty() || used != t.size()) throw ConfigError(key + ": expected a number, got '" + text + "'");
  return v;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << text;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

struct Setup {
  ProblemData problem;
  MeshPtr mesh;
  std::size_t mesh_size = 0;  ///< 0 when the mesh came from a file
};

Setup resolve_problem(Config& c) {
  Setup s;
  const std::string name = c.get_string("problem.name", "example-4.1");
  const auto q = c.find_string("problem.q");
  const auto u0 = c.find_string("problem.u0");
  const auto f = c.find_string("problem.f");
  try {
    if (name == "custom") {
      const long dim = c.get_int("problem.dim", 1);
      s.problem = custom_problem(static_cast<int>(dim), c.require_string("problem.q"), c.require_string("problem.u0"),
                                 c.require_string("problem.f"));
    } else {
      if (c.has("problem.dim")) throw ConfigError("problem.dim is only used with problem.name = custom");
      s.problem = problem_by_name(name);
      if (q || u0 || f) {
        ProblemData custom = custom_problem(s.problem.dim, q.value_or(s.problem.q_source),
                                            u0.value_or(s.problem.u0_source), f.value_or(s.problem.f_source));
        custom.name = s.problem.name;
        s.problem = std::move(custom);
      }
    }
  } catch (const ExpressionError& e) {
    throw ConfigError(std::string("problem: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("problem: ") + e.what());
  }

  if (const auto file = c.find_string("problem.mesh_file")) {
    if (c.has("problem.mesh_size")) throw ConfigError("problem.mesh_file and problem.mesh_size are exclusive");
    try {
      s.mesh = std::make_shared<const Mesh>(load_mesh(*file));
    } catch (const std::exception& e) {
      throw ConfigError(std::string("problem.mesh_file: ") + e.what());
    }
    if (s.mesh->dim() != s.problem.dim) throw ConfigError("problem.mesh_file: mesh dimension does not match the problem");
  } else {
    const long size = c.get_int("problem.mesh_size", s.problem.dim == 1 ? 113 : 6);
    if (size < 1) throw ConfigError("problem.mesh_size must be positive");
    s.mesh_size = static_cast<std::size_t>(size);
    s.mesh = make_problem_mesh(s.problem.dim, s.mesh_size);
  }
  return s;
}

struct ModelParams {
  double alpha;
  double final_time;
  std::size_t steps;
  SolverOptions solver;
};

ModelParams resolve_model(Config& c) {
  ModelParams m{};
  m.alpha = c.require_double("model.alpha");
  if (!(m.alpha > 0.0 && m.alpha <= 1.0)) throw ConfigError("model.alpha must lie in (0, 1]");
  m.final_time = c.get_double("model.T", 1.0);
  if (!(m.final_time > 0.0)) throw ConfigError("model.T must be positive");
  const long steps = c.get_int("model.steps", 30);
  if (steps < 1) throw ConfigError("model.steps must be positive");
  m.steps = static_cast<std::size_t>(steps);
  const std::string solver = c.get_string("model.solver", "direct");
  if (solver == "direct") {
    m.solver.method = SolverMethod::direct;
  } else if (solver == "pcg") {
    m.solver.method = SolverMethod::pcg;
  } else {
    throw ConfigError("model.solver must be direct or pcg");
  }
  return m;
}

Field true_coefficient(const Setup& s) {
  Field q = interpolate(s.mesh, Space::full, s.problem.q_true);
  if (!(q.values().minCoeff() > 0.0)) throw ConfigError("problem.q must be positive on the mesh");
  return q;
}

std::uint64_t get_seed(Config& c, const std::string& key) {
  const long seed = c.get_int(key, 1);
  if (seed < 0) throw ConfigError(key + " must be nonnegative");
  return static_cast<std::uint64_t>(seed);
}

std::size_t reference_size(Config& c, const Setup& s) {
  const long size = c.get_int("inverse.reference_mesh_size", s.problem.dim == 1 ? 1600 : 48);
  if (size < 1) throw ConfigError("inverse.reference_mesh_size must be positive");
  return static_cast<std::size_t>(size);
}

std::size_t reference_steps(Config& c) {
  const long steps = c.get_int("inverse.reference_steps", 1280);
  if (steps < 1) throw ConfigError("inverse.reference_steps must be positive");
  return static_cast<std::size_t>(steps);
}

BetaRule beta_rule(Config& c) {
  const std::string rule = c.get_string("inverse.beta_rule", "polak-ribiere-plus");
  if (rule == "polak-ribiere-plus") return BetaRule::polak_ribiere_plus;
  if (rule == "fletcher-reeves") return BetaRule::fletcher_reeves;
  throw ConfigError("inverse.beta_rule must be polak-ribiere-plus or fletcher-reeves");
}

Bounds bounds(Config& c) {
  Bounds b{c.get_double("inverse.lower", 0.5), c.get_double("inverse.upper", 5.0)};
  if (!(b.lower > 0.0 && b.lower < b.upper)) throw ConfigError("inverse bounds must satisfy 0 < lower < upper");
  return b;
}

std::filesystem::path begin_run(Config& c, const std::string& command) {
  const auto dir = run_directory(c, command);
  write_text(dir / "config.ini", c.to_ini());
  return dir;
}

}  // namespace

Config Config::parse(const std::string& text) {
  Config c;
  std::istringstream in(text);
  try {
    pt::read_ini(in, c.tree_);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("config line " + std::to_string(e.line()) + ": " + e.message());
  }
  for (const auto& [name, section] : c.tree_)
    if (section.empty() && !section.data().empty()) throw ConfigError("key '" + name + "' is outside any section");
  return c;
}

Config Config::load(const std::filesystem::path& path) { return parse(read_text(path)); }

void Config::set(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("override '" + assignment + "' must have the form section.key=value");
  const std::string key = trim(assignment.substr(0, eq));
  const auto dot = key.find('.');
  if (dot == std::string::npos || dot == 0 || dot + 1 == key.size() || key.find('.', dot + 1) != std::string::npos)
    throw ConfigError("override key '" + key + "' must have the form section.key");
  tree_.put(key, trim(assignment.substr(eq + 1)));
}

bool Config::has(const std::string& key) const { return tree_.get_optional<std::string>(key).has_value(); }

void Config::check_known_keys() const {
  const auto& known = known_keys();
  for (const auto& [section, entries] : tree_) {
    const auto it = known.find(section);
    if (it == known.end()) throw ConfigError("unknown config section [" + section + "]");
    for (const auto& entry : entries)
      if (!it->second.count(entry.first)) throw ConfigError("unknown config key " + section + "." + entry.first);
  }
}

std::string Config::raw(const std::string& key) const { return tree_.get<std::string>(key); }

std::optional<std::string> Config::find_string(const std::string& key) const {
  if (auto v = tree_.get_optional<std::string>(key)) return trim(*v);
  return std::nullopt;
}

std::string Config::require_string(const std::string& key) {
  const auto v = find_string(key);
  if (!v || v->empty()) throw ConfigError("missing required key " + key);
  return *v;
}

double Config::require_double(const std::string& key) { return parse_number(key, require_string(key)); }

std::string Config::get_string(const std::string& key, const std::string& fallback) {
  if (const auto v = find_string(key)) return *v;
  tree_.put(key, fallback);
  return fallback;
}

double Config::get_double(const std::string& key, double fallback) {
  if (const auto v = find_string(key)) return parse_number(key, *v);
  tree_.put(key, format_number(fallback));
  return fallback;
}

long Config::get_int(const std::string& key, long fallback) {
  if (const auto v = find_string(key)) {
    std::size_t used = 0;
    long n = 0;
    try {
      n = std::stol(*v, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (v->empty() || used != v->size()) throw ConfigError(key + ": expected an integer, got '" + *v + "'");
    return n;
  }
  tree_.put(key, std::to_string(fallback));
  return fallback;
}

bool Config::get_bool(const std::string& key, bool fallback) {
  if (const auto v = find_string(key)) {
    if (*v == "true" || *v == "1" || *v == "yes") return true;
    if (*v == "false" || *v == "0" || *v == "no") return false;
    throw ConfigError(key + ": expected true or false, got '" + *v + "'");
  }
  tree_.put(key, fallback ? "true" : "false");
  return fallback;
}

std::vector<double> Config::get_list(const std::string& key, const std::vector<double>& fallback) {
  if (const auto v = find_string(key)) {
    std::vector<double> out;
    std::istringstream in(*v);
    std::string item;
    while (std::getline(in, item, ','))
      if (!trim(item).empty()) out.push_back(parse_number(key, item));
    return out;
  }
  std::string joined;
  for (std::size_t i = 0; i < fallback.size(); ++i) joined += (i ? ", " : "") + format_number(fallback[i]);
  tree_.put(key, joined);
  return fallback;
}

std::string Config::to_ini() const {
  std::ostringstream out;
  pt::write_ini(out, tree_);
  return out.str();
}

std::filesystem::path run_directory(Config& config, const std::string& command) {
  const char* env = std::getenv("SUBDIFF_OUTPUT_DIR");
  const std::string base = config.get_string("run.output_dir", env && *env ? env : "runs");
  const std::string id = config.get_string("run.run_id", command);
  if (id.empty() || id.find('/') != std::string::npos) throw ConfigError("run.run_id must be a plain name");
  const auto dir = std::filesystem::path(base) / id;
  std::filesystem::create_directories(dir);
  return dir;
}

int cmd_forward(Config& c, std::ostream& out, std::ostream&) {
  const Setup s = resolve_problem(c);
  const ModelParams m = resolve_model(c);
  const Field q = true_coefficient(s);
  const auto dir = begin_run(c, "forward");

  const FractionalStepper stepper(q, m.alpha, TimeGrid(m.final_time, m.steps), m.solver);
  const Trajectory traj =
      stepper.forward(l2_project(s.mesh, s.problem.u0), load_vector(*s.mesh, Space::interior, s.problem.f));
  save_mesh(*s.mesh, dir / "mesh.txt");
  write_field(traj.terminal(), dir / "terminal.field", "mesh.txt", "U^N");
  out << std::setprecision(10) << "||U^N||_L2 = " << norm_l2(traj.terminal()) << '\n';
  return exit_ok;
}

int cmd_invert(Config& c, std::ostream& out, std::ostream& err) {
  const Setup s = resolve_problem(c);
  const ModelParams m = resolve_model(c);
  const double gamma = c.get_double("inverse.gamma", 1e-8);
  if (!(gamma >= 0.0)) throw ConfigError("inverse.gamma must be nonnegative");
  const Bounds b = bounds(c);
  const long max_iterations = c.get_int("inverse.max_iterations", 200);
  if (max_iterations < 0) throw ConfigError("inverse.max_iterations must be nonnegative");
  const double discrepancy = c.get_double("inverse.discrepancy_factor", 1.1);
  const double grad_tol = c.get_double("inverse.gradient_tolerance", 1e-8);
  if (!(discrepancy >= 0.0) || !(grad_tol >= 0.0)) throw ConfigError("stopping parameters must be nonnegative");
  const BetaRule rule = beta_rule(c);
  const bool verbose = c.get_bool("run.verbose", false);

  const auto observation = c.find_string("inverse.observation");
  std::optional<double> delta;
  double eps = 0.0;
  std::uint64_t seed = 0;
  std::size_t ref_size = 0, ref_steps = 0;
  if (observation) {
    if (c.has("inverse.delta")) {
      delta = c.require_double("inverse.delta");
      if (!(*delta >= 0.0)) throw ConfigError("inverse.delta must be nonnegative");
    }
  } else {
    if (c.has("inverse.delta")) throw ConfigError("inverse.delta is only used with inverse.observation");
    eps = c.get_double("inverse.eps", 1e-2);
    if (!(eps >= 0.0)) throw ConfigError("inverse.eps must be nonnegative");
    seed = get_seed(c, "inverse.seed");
    ref_size = reference_size(c, s);
    ref_steps = reference_steps(c);
  }
  const auto dir = begin_run(c, "invert");

  Field z_delta = Field::zeros(s.mesh, Space::interior);
  std::optional<SyntheticData> data;
  if (observation) {
    try {
      const Field loaded = parse_field(read_text(*observation), s.mesh);
      z_delta = loaded.space() == Space::interior ? loaded : loaded.to_interior();
    } catch (const std::runtime_error& e) {
      throw ConfigError(std::string("inverse.observation: ") + e.what());
    }
  } else {
    const auto reference = solve_reference(s.problem, m.alpha, m.final_time, ref_size, ref_steps);
    data = synthesize_data(reference, s.mesh, eps, seed);
    z_delta = data->z_delta;
    delta = data->delta;
  }

  InverseSpec spec = make_inverse_spec(s.mesh, m.alpha, TimeGrid(m.final_time, m.steps), s.problem.u0, s.problem.f,
                                       z_delta, gamma);
  spec.bounds = b;
  spec.q_init = project_admissible(spec.q_init, b.lower, b.upper);
  spec.stop.noise_level = delta;
  spec.stop.discrepancy_factor = discrepancy;
  spec.stop.gradient_tolerance = grad_tol;
  spec.stop.max_iterations = static_cast<std::size_t>(max_iterations);
  spec.beta_rule = rule;
  spec.solver = m.solver;
  const InversionResult result = run_inversion(spec);

  if (verbose)
    for (const auto& h : result.history)
      err << "k=" << h.k << " J=" << h.objective << " misfit=" << h.misfit << " |g|=" << h.grad_norm << '\n';

  save_mesh(*s.mesh, dir / "mesh.txt");
  write_text(dir / "history.csv", history_csv(result.history));
  write_field(result.q_star, dir / "q_star.field", "mesh.txt", "q*");
  write_field(z_delta, dir / "observation.field", "mesh.txt", "z_delta");

  nlohmann::json summary = {{"stop_reason", result.stop_reason},
                            {"iterations", result.iterations},
                            {"converged", result.converged},
                            {"objective", result.history.back().objective},
                            {"misfit", result.history.back().misfit}};
  if (delta) summary["delta"] = *delta;
  out << std::setprecision(6) << "stop: " << result.stop_reason << " after " << result.iterations << " iterations\n";
  if (data) {
    const ErrorPair e =
        compute_errors(result.q_star, true_coefficient(s), result.forward.terminal(), data->u_ref_T);
    summary["e_q"] = e.e_q;
    summary["e_u"] = e.e_u;
    out << "e_q = " << e.e_q << ", e_u = " << e.e_u << ", delta = " << data->delta << '\n';
  }
  write_text(dir / "summary.json", summary.dump(2) + "\n");
  return exit_ok;
}

int cmd_gradcheck(Config& c, std::ostream& out, std::ostream&) {
  const Setup s = resolve_problem(c);
  const ModelParams m = resolve_model(c);
  const double gamma = c.get_double("gradcheck.gamma", 1e-8);
  if (!(gamma >= 0.0)) throw ConfigError("gradcheck.gamma must be nonnegative");
  const double eps = c.get_double("gradcheck.eps", 1e-2);
  if (!(eps >= 0.0)) throw ConfigError("gradcheck.eps must be nonnegative");
  const long count = c.get_int("gradcheck.directions", 5);
  if (count < 1) throw ConfigError("gradcheck.directions must be positive");
  const double step = c.get_double("gradcheck.step", 1e-4);
  if (!(step > 0.0)) throw ConfigError("gradcheck.step must be positive");
  const double tolerance = c.get_double("gradcheck.tolerance", 1e-5);
  const std::uint64_t seed = get_seed(c, "gradcheck.seed");
  const Field q_true = true_coefficient(s);
  const auto dir = begin_run(c, "gradcheck");

  // Observation from the same discretization, perturbed by seeded noise.
  const TimeGrid grid(m.final_time, m.steps);
  const Field u_true = FractionalStepper(q_true, m.alpha, grid, m.solver)
                           .forward(l2_project(s.mesh, s.problem.u0), load_vector(*s.mesh, Space::interior, s.problem.f))
                           .terminal();
  const ReferenceSolution reference{m.alpha, m.final_time, s.mesh, u_true, norm_linf(u_true)};
  const SyntheticData data = synthesize_data(reference, s.mesh, eps, seed);

  InverseSpec spec = make_inverse_spec(s.mesh, m.alpha, grid, s.problem.u0, s.problem.f, data.z_delta, gamma);
  spec.solver = m.solver;
  const auto mismatch =
      gradient_check(spec, spec.q_init, random_directions(s.mesh, static_cast<std::size_t>(count), seed), step);

  std::ostringstream csv;
  csv << std::setprecision(17) << "direction,relative_mismatch\n";
  double worst = 0.0;
  for (std::size_t i = 0; i < mismatch.size(); ++i) {
    csv << i << ',' << mismatch[i] << '\n';
    worst = std::max(worst, mismatch[i]);
  }
  write_text(dir / "gradcheck.csv", csv.str());
  out << std::setprecision(6) << "max relative mismatch = " << worst << " (tolerance " << tolerance << ")\n";
  return worst <= tolerance ? exit_ok : exit_check_failed;
}

int cmd_bench(Config& c, std::ostream& out, std::ostream& err) {
  const Setup s = resolve_problem(c);
  if (s.mesh_size == 0) throw ConfigError("bench needs problem.mesh_size; mesh files are not supported");
  ExperimentConfig cfg;
  cfg.problem = s.problem;
  cfg.alphas = c.get_list("bench.alphas", {0.25, 0.5, 0.75});
  cfg.final_times = c.get_list("bench.T", {1.0});
  cfg.noise_levels = c.get_list("bench.eps", {1e-2, 5e-3, 2.5e-3, 1e-3});
  cfg.gammas = c.get_list("bench.gammas", {});
  cfg.gamma_factor = c.get_double("bench.gamma_factor", 4e-4);
  cfg.mesh_size = s.mesh_size;
  const long steps = c.get_int("model.steps", 30);
  if (steps < 1) throw ConfigError("model.steps must be positive");
  cfg.steps = static_cast<std::size_t>(steps);
  cfg.reference_mesh_size = reference_size(c, s);
  cfg.reference_steps = reference_steps(c);
  cfg.seed = get_seed(c, "inverse.seed");
  cfg.bounds = bounds(c);
  cfg.discrepancy_factor = c.get_double("inverse.discrepancy_factor", 1.1);
  cfg.gradient_tolerance = c.get_double("inverse.gradient_tolerance", 1e-8);
  const long max_iterations = c.get_int("inverse.max_iterations", 200);
  if (max_iterations < 0) throw ConfigError("inverse.max_iterations must be nonnegative");
  cfg.max_iterations = static_cast<std::size_t>(max_iterations);
  cfg.beta_rule = beta_rule(c);
  const long jobs = c.get_int("run.jobs", std::max(1u, std::thread::hardware_concurrency()));
  if (jobs < 1) throw ConfigError("run.jobs must be positive");
  cfg.jobs = static_cast<int>(jobs);
  const bool verbose = c.get_bool("run.verbose", false);
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("bench: ") + e.what());
  }
  const auto dir = begin_run(c, "bench");

  const RunReport report = run_sweep(cfg);
  const std::string csv = report_csv(report);
  write_text(dir / "report.csv", csv);
  write_text(dir / "report.json", report_json(cfg, report).dump(2) + "\n");
  out << csv;
  for (const auto& r : report.rates)
    out << std::setprecision(3) << "rate alpha=" << r.alpha << " T=" << r.final_time << ": e_q " << r.rate_q
        << ", e_u " << r.rate_u << '\n';
  bool failed = false;
  for (const auto& r : report.records) {
    if (!r.error.empty()) {
      err << "run alpha=" << r.alpha << " T=" << r.final_time << " eps=" << r.eps << " failed: " << r.error << '\n';
      failed = true;
    } else if (verbose) {
      err << "run alpha=" << r.alpha << " T=" << r.final_time << " eps=" << r.eps << ": " << r.iterations
          << " iterations in " << r.seconds << " s\n";
    }
  }
  return failed ? exit_solver : exit_ok;
}

int cmd_verify(Config& c, std::ostream& out, std::ostream&) {
  const Setup s = resolve_problem(c);
  if (s.mesh_size == 0) throw ConfigError("verify needs problem.mesh_size; mesh files are not supported");
  const double alpha = c.require_double("model.alpha");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("model.alpha must lie in (0, 1]");
  const double decay_T = c.get_double("verify.decay_T", 10.0);
  const long decay_steps = c.get_int("verify.decay_steps", 1000);
  const double t_min = c.get_double("verify.decay_t_min", 1.0);
  const double ratio_max = c.get_double("verify.decay_ratio_max", 10.0);
  const double positivity_T = c.get_double("verify.positivity_T", s.problem.dim == 1 ? 1.0 : 2.0);
  const long positivity_steps = c.get_int("verify.positivity_steps", 30);
  const auto stability_T = c.get_list("verify.stability_T", {1e-5, 5.0});
  const long stability_steps = c.get_int("verify.stability_steps", 30);
  const long perturbations = c.get_int("verify.perturbations", 10);
  const std::uint64_t seed = get_seed(c, "verify.seed");
  const double amplitude = c.get_double("verify.amplitude", 0.1);
  const Bounds b = bounds(c);
  if (!(decay_T > 0.0) || !(positivity_T > 0.0) || !(t_min > 0.0 && t_min <= decay_T))
    throw ConfigError("verify times must be positive with decay_t_min <= decay_T");
  if (decay_steps < 1 || positivity_steps < 1 || stability_steps < 1 || perturbations < 1)
    throw ConfigError("verify step and sample counts must be positive");
  for (double t : stability_T)
    if (!(t > 0.0)) throw ConfigError("verify.stability_T entries must be positive");
  if (!(amplitude > 0.0)) throw ConfigError("verify.amplitude must be positive");
  const auto dir = begin_run(c, "verify");

  std::ostringstream csv;
  csv << std::setprecision(17);
  const DecayTable decay = verify_decay(s.problem, alpha, decay_T, s.mesh_size, static_cast<std::size_t>(decay_steps),
                                        t_min);
  csv << "t,weighted\n";
  for (std::size_t i = 0; i < decay.times.size(); ++i) csv << decay.times[i] << ',' << decay.weighted[i] << '\n';
  write_text(dir / "decay.csv", csv.str());

  const PositivityResult positivity =
      check_positivity(s.problem, alpha, positivity_T, s.mesh_size, static_cast<std::size_t>(positivity_steps));
  save_mesh(positivity.vertex_values.mesh(), dir / "mesh.txt");
  write_field(positivity.vertex_values, dir / "positivity.field", "mesh.txt", "positivity");

  const auto stability = stability_quotient(s.problem, alpha, stability_T, s.mesh_size,
                                            static_cast<std::size_t>(stability_steps),
                                            static_cast<std::size_t>(perturbations), seed, amplitude, b);
  csv.str({});
  csv << "T,sample,quotient\n";
  for (const auto& row : stability)
    for (std::size_t i = 0; i < row.quotients.size(); ++i)
      csv << row.final_time << ',' << i << ',' << row.quotients[i] << '\n';
  write_text(dir / "stability.csv", csv.str());

  out << std::setprecision(6) << "decay ratio on [" << t_min << ", " << decay_T << "] = " << decay.ratio << '\n';
  out << "positivity minimum at T = " << positivity_T << ": " << positivity.minimum << '\n';
  for (const auto& row : stability) out << "stability max quotient at T = " << row.final_time << ": " << row.max_quotient << '\n';
  const bool ok = decay.ratio <= ratio_max && positivity.minimum > 0.0;
  return ok ? exit_ok : exit_check_failed;
}

int run(const Invocation& invocation, std::ostream& out, std::ostream& err) {
  try {
    Config config = invocation.config_file ? Config::load(*invocation.config_file) : Config{};
    for (const auto& o : invocation.overrides) config.set(o);
    if (invocation.output_dir) config.set("run.output_dir=" + invocation.output_dir->string());
    if (invocation.verbose) config.set("run.verbose=true");
    config.check_known_keys();

    const std::string& cmd = invocation.command;
    if (cmd == "forward") return cmd_forward(config, out, err);
    if (cmd == "invert") return cmd_invert(config, out, err);
    if (cmd == "gradcheck") return cmd_gradcheck(config, out, err);
    if (cmd == "bench") return cmd_bench(config, out, err);
    if (cmd == "verify") return cmd_verify(config, out, err);
    err << "error: unknown command '" << cmd << "'\n";
    return exit_config;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return exit_config;
  } catch (const std::invalid_argument& e) {
    err << "config error: " << e.what() << '\n';
    return exit_config;
  } catch (const std::exception& e) {
    err << "solver error: " << e.what() << '\n';
    return exit_solver;
  }
}

}  // namespace subdiff::cli
