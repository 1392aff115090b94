#include "subdiff/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <thread>

namespace subdiff {

namespace {

// Runs task(i) for i in [0, count) on up to `jobs` threads.
template <typename Task>
void parallel_for(std::size_t count, int jobs, Task task) {
  const auto workers = std::min<std::size_t>(count, static_cast<std::size_t>(std::max(1, jobs)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) task(i);
    });
  for (auto& t : pool) t.join();
}

MeshPtr problem_mesh(const ProblemData& problem, std::size_t size) { return make_problem_mesh(problem.dim, size); }

}  // namespace

double ExperimentConfig::gamma_for(std::size_t noise_index) const {
  if (!gammas.empty()) return gammas.at(noise_index);
  const double eps = noise_levels.at(noise_index);
  return gamma_factor * eps * eps;
}

void ExperimentConfig::validate() const {
  if (alphas.empty() || final_times.empty() || noise_levels.empty())
    throw std::invalid_argument("alpha, T and noise lists must be non-empty");
  for (double a : alphas)
    if (!(a > 0.0 && a <= 1.0)) throw std::invalid_argument("alpha must lie in (0, 1]");
  for (double t : final_times)
    if (!(t > 0.0)) throw std::invalid_argument("final times must be positive");
  for (double e : noise_levels)
    if (!(e >= 0.0)) throw std::invalid_argument("noise levels must be nonnegative");
  if (!gammas.empty() && gammas.size() != noise_levels.size())
    throw std::invalid_argument("gamma list must match the noise list in length");
  for (double g : gammas)
    if (!(g >= 0.0)) throw std::invalid_argument("gamma must be nonnegative");
  if (!(gamma_factor >= 0.0)) throw std::invalid_argument("gamma factor must be nonnegative");
  if (mesh_size < 1 || steps < 1) throw std::invalid_argument("mesh size and step count must be positive");
  if (reference_mesh_size <= mesh_size) throw std::invalid_argument("reference mesh must be finer than the coarse mesh");
  if (reference_steps <= steps) throw std::invalid_argument("reference step count must exceed the coarse one");
  if (!(bounds.lower > 0.0 && bounds.lower < bounds.upper)) throw std::invalid_argument("bounds must satisfy 0 < c0 < c1");
}

ReferenceSolution solve_reference(const ProblemData& problem, double alpha, double final_time,
                                  std::size_t reference_mesh_size, std::size_t reference_steps) {
  const MeshPtr mesh = problem_mesh(problem, reference_mesh_size);
  const Field q = interpolate(mesh, Space::full, problem.q_true);
  const auto traj = solve_forward(mesh, q, problem.u0, problem.f, alpha, TimeGrid(final_time, reference_steps));
  const double linf = norm_linf(traj.terminal());
  return ReferenceSolution{.alpha = alpha,
                           .final_time = final_time,
                           .mesh = mesh,
                           .terminal = traj.terminal(),
                           .terminal_linf = linf};
}

SyntheticData synthesize_data(const ReferenceSolution& reference, const MeshPtr& coarse, double eps,
                              std::uint64_t seed) {
  if (!(eps >= 0.0)) throw std::invalid_argument("noise level must be nonnegative");
  Field u_ref = transfer(reference.terminal, coarse, Space::interior);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vector xi(static_cast<Eigen::Index>(coarse->num_interior()));
  for (Eigen::Index i = 0; i < xi.size(); ++i) xi[i] = gauss(rng);
  Field noise(coarse, Space::interior, eps * reference.terminal_linf * xi);
  Field z = u_ref + noise;
  const double delta = norm_l2(noise);
  return SyntheticData{.z_delta = std::move(z), .delta = delta, .u_ref_T = std::move(u_ref), .noise = std::move(noise)};
}

ErrorPair compute_errors(const Field& q_star, const Field& q_true, const Field& terminal, const Field& u_ref_T) {
  if (q_star.mesh_ptr() != q_true.mesh_ptr() || terminal.mesh_ptr() != u_ref_T.mesh_ptr() ||
      q_star.mesh_ptr() != terminal.mesh_ptr())
    throw std::invalid_argument("error metrics need all fields on one mesh");
  return {norm_l2(q_true - q_star), norm_l2(u_ref_T - terminal)};
}

double compute_rate(const std::vector<std::pair<double, double>>& pairs) {
  if (pairs.size() < 2) throw std::invalid_argument("rate fit needs at least two pairs");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& [delta, err] : pairs) {
    if (!(delta > 0.0 && err > 0.0)) throw std::invalid_argument("rate fit needs positive entries");
    const double x = std::log(delta), y = std::log(err);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double n = static_cast<double>(pairs.size());
  const double denom = n * sxx - sx * sx;
  if (denom == 0.0) throw std::invalid_argument("rate fit needs distinct noise levels");
  return (n * sxy - sx * sy) / denom;
}

RunRecord run_single(const ExperimentConfig& config, const ReferenceSolution& reference, const MeshPtr& coarse,
                     std::size_t noise_index) {
  const auto start = std::chrono::steady_clock::now();
  RunRecord rec;
  rec.alpha = reference.alpha;
  rec.final_time = reference.final_time;
  rec.eps = config.noise_levels[noise_index];
  rec.gamma = config.gamma_for(noise_index);
  try {
    const auto data = synthesize_data(reference, coarse, rec.eps, config.seed);
    rec.delta = data.delta;
    InverseSpec spec = make_inverse_spec(coarse, rec.alpha, TimeGrid(rec.final_time, config.steps), config.problem.u0,
                                         config.problem.f, data.z_delta, rec.gamma);
    spec.bounds = config.bounds;
    spec.q_init = project_admissible(spec.q_init, config.bounds.lower, config.bounds.upper);
    spec.stop.noise_level = data.delta;
    spec.stop.discrepancy_factor = config.discrepancy_factor;
    spec.stop.gradient_tolerance = config.gradient_tolerance;
    spec.stop.max_iterations = config.max_iterations;
    spec.beta_rule = config.beta_rule;
    const auto result = run_inversion(spec);
    const Field q_true = interpolate(coarse, Space::full, config.problem.q_true);
    const auto errors = compute_errors(result.q_star, q_true, result.forward.terminal(), data.u_ref_T);
    rec.e_q = errors.e_q;
    rec.e_u = errors.e_u;
    rec.iterations = result.iterations;
    rec.converged = result.converged;
    rec.q_star = result.q_star;
    rec.pointwise_error = q_true - result.q_star;
  } catch (const std::exception& ex) {
    rec.error = ex.what();
  }
  rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rec;
}

RunReport run_sweep(const ExperimentConfig& config) {
  config.validate();
  const MeshPtr coarse = problem_mesh(config.problem, config.mesh_size);
  const std::size_t n_alpha = config.alphas.size(), n_time = config.final_times.size();
  const std::size_t n_rows = n_alpha * n_time, n_eps = config.noise_levels.size();

  std::vector<std::optional<ReferenceSolution>> references(n_rows);
  std::vector<std::string> reference_errors(n_rows);
  parallel_for(n_rows, config.jobs, [&](std::size_t row) {
    try {
      references[row] = solve_reference(config.problem, config.alphas[row / n_time], config.final_times[row % n_time],
                                        config.reference_mesh_size, config.reference_steps);
    } catch (const std::exception& ex) {
      reference_errors[row] = ex.what();
    }
  });

  RunReport report;
  report.records.resize(n_rows * n_eps);
  parallel_for(n_rows * n_eps, config.jobs, [&](std::size_t i) {
    const std::size_t row = i / n_eps, col = i % n_eps;
    if (references[row]) {
      report.records[i] = run_single(config, *references[row], coarse, col);
      return;
    }
    RunRecord& rec = report.records[i];
    rec.alpha = config.alphas[row / n_time];
    rec.final_time = config.final_times[row % n_time];
    rec.eps = config.noise_levels[col];
    rec.gamma = config.gamma_for(col);
    rec.error = "reference solve failed: " + reference_errors[row];
  });

  for (std::size_t row = 0; row < n_rows; ++row) {
    std::vector<std::pair<double, double>> pq, pu;
    for (std::size_t col = 0; col < n_eps; ++col) {
      const auto& rec = report.records[row * n_eps + col];
      if (!rec.error.empty() || !(rec.eps > 0.0) || !(rec.e_q > 0.0) || !(rec.e_u > 0.0)) continue;
      pq.emplace_back(rec.eps, rec.e_q);
      pu.emplace_back(rec.eps, rec.e_u);
    }
    RowRate rate{config.alphas[row / n_time], config.final_times[row % n_time], std::nan(""), std::nan("")};
    if (pq.size() >= 2) {
      try {
        rate.rate_q = compute_rate(pq);
        rate.rate_u = compute_rate(pu);
      } catch (const std::invalid_argument&) {
      }
    }
    report.rates.push_back(rate);
  }
  return report;
}

std::string report_csv(const RunReport& report) {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "alpha,T,eps,gamma,delta,e_q,e_u,iters,converged,seconds\n";
  for (const auto& r : report.records)
    out << r.alpha << ',' << r.final_time << ',' << r.eps << ',' << r.gamma << ',' << r.delta << ',' << r.e_q << ','
        << r.e_u << ',' << r.iterations << ',' << (r.converged ? 1 : 0) << ',' << std::setprecision(6) << r.seconds
        << std::setprecision(17) << '\n';
  return out.str();
}

nlohmann::json config_json(const ExperimentConfig& config) {
  return {{"problem",
           {{"name", config.problem.name},
            {"dim", config.problem.dim},
            {"q", config.problem.q_source},
            {"u0", config.problem.u0_source},
            {"f", config.problem.f_source}}},
          {"alphas", config.alphas},
          {"T", config.final_times},
          {"eps", config.noise_levels},
          {"gammas", config.gammas},
          {"gamma_factor", config.gamma_factor},
          {"mesh_size", config.mesh_size},
          {"steps", config.steps},
          {"reference_mesh_size", config.reference_mesh_size},
          {"reference_steps", config.reference_steps},
          {"seed", config.seed},
          {"bounds", {config.bounds.lower, config.bounds.upper}},
          {"discrepancy_factor", config.discrepancy_factor},
          {"gradient_tolerance", config.gradient_tolerance},
          {"max_iterations", config.max_iterations},
          {"beta_rule", config.beta_rule == BetaRule::fletcher_reeves ? "fletcher-reeves" : "polak-ribiere-plus"}};
}

nlohmann::json report_json(const ExperimentConfig& config, const RunReport& report) {
  nlohmann::json runs = nlohmann::json::array();
  for (const auto& r : report.records) {
    nlohmann::json row = {{"alpha", r.alpha}, {"T", r.final_time}, {"eps", r.eps},
                          {"gamma", r.gamma}, {"delta", r.delta},  {"e_q", r.e_q},
                          {"e_u", r.e_u},     {"iters", r.iterations}, {"converged", r.converged},
                          {"seconds", r.seconds}};
    if (!r.error.empty()) row["error"] = r.error;
    runs.push_back(row);
  }
  nlohmann::json rates = nlohmann::json::array();
  for (const auto& r : report.rates) {
    auto finite_or_null = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
    rates.push_back({{"alpha", r.alpha}, {"T", r.final_time}, {"rate_q", finite_or_null(r.rate_q)},
                     {"rate_u", finite_or_null(r.rate_u)}});
  }
  return {{"config", config_json(config)}, {"runs", runs}, {"rates", rates}};
}

DecayTable verify_decay(const ProblemData& problem, double alpha, double final_time, std::size_t mesh_size,
                        std::size_t steps, double t_min) {
  const MeshPtr mesh = problem_mesh(problem, mesh_size);
  const Field q = interpolate(mesh, Space::full, problem.q_true);
  const TimeGrid grid(final_time, steps);
  const auto traj = solve_forward(mesh, q, problem.u0, problem.f, alpha, grid);
  const auto derivative = discrete_frac_derivative(traj, alpha);
  DecayTable table{{}, {}, 0.0};
  for (std::size_t n = 1; n <= steps; ++n) {
    const double t = grid.t(n);
    if (t < t_min * (1.0 - 1e-12)) continue;
    table.times.push_back(t);
    table.weighted.push_back(std::pow(t, 0.5 * alpha) * seminorm_w1inf(derivative[n - 1]));
  }
  if (table.weighted.empty()) throw std::invalid_argument("no grid times inside [t_min, T]");
  const auto [lo, hi] = std::minmax_element(table.weighted.begin(), table.weighted.end());
  table.ratio = *lo > 0.0 ? *hi / *lo : std::numeric_limits<double>::infinity();
  return table;
}

PositivityResult check_positivity(const ProblemData& problem, double alpha, double final_time,
                                  std::size_t mesh_size, std::size_t steps) {
  const MeshPtr mesh = problem_mesh(problem, mesh_size);
  const Field q = interpolate(mesh, Space::full, problem.q_true);
  const auto traj = solve_forward(mesh, q, problem.u0, problem.f, alpha, TimeGrid(final_time, steps));
  const Vector u = traj.terminal().nodal();
  const Vector du = discrete_frac_derivative(traj, alpha).back().nodal();
  const Vector f = interpolate(mesh, Space::full, problem.f).values();
  const auto grads = cell_gradients(*mesh, u);
  const int nloc = mesh->dim() + 1;

  Vector cells(static_cast<Eigen::Index>(mesh->num_cells()));
  Vector vertex_sum = Vector::Zero(static_cast<Eigen::Index>(mesh->num_vertices()));
  Vector vertex_count = Vector::Zero(static_cast<Eigen::Index>(mesh->num_vertices()));
  for (std::size_t c = 0; c < mesh->num_cells(); ++c) {
    const auto v = mesh->cell(c);
    double q_mean = 0.0, source_term = 0.0;
    for (int k = 0; k < nloc; ++k) {
      q_mean += q.values()[v[k]];
      source_term += (f[v[k]] - du[v[k]]) * u[v[k]];
    }
    q_mean /= nloc;
    source_term /= nloc;
    const double value = q_mean * (grads[c][0] * grads[c][0] + grads[c][1] * grads[c][1]) + source_term;
    cells[static_cast<Eigen::Index>(c)] = value;
    for (int k = 0; k < nloc; ++k) {
      vertex_sum[v[k]] += value;
      vertex_count[v[k]] += 1.0;
    }
  }
  return PositivityResult{.minimum = cells.minCoeff(),
                          .cell_values = cells,
                          .vertex_values = Field(mesh, Space::full, vertex_sum.cwiseQuotient(vertex_count))};
}

std::vector<Field> random_bump_coefficients(const MeshPtr& mesh, const Field& q_true, std::size_t count,
                                            std::uint64_t seed, double amplitude, const Bounds& bounds) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Field> out;
  out.reserve(count);
  while (out.size() < count) {
    Point center{0.0, 0.0};
    if (mesh->dim() == 1) {
      center[0] = 0.1 + 0.8 * unit(rng);
    } else {
      const double r = 0.7 * std::sqrt(unit(rng));
      const double theta = 2.0 * std::numbers::pi * unit(rng);
      center = {r * std::cos(theta), r * std::sin(theta)};
    }
    const double width = 0.05 + 0.15 * unit(rng);
    const double sign = unit(rng) < 0.5 ? -1.0 : 1.0;
    const Field bump = interpolate(mesh, Space::full, [&](const Point& x) {
      const double r2 = (x[0] - center[0]) * (x[0] - center[0]) + (x[1] - center[1]) * (x[1] - center[1]);
      return sign * amplitude * std::exp(-r2 / (2.0 * width * width));
    });
    Field q = project_admissible(q_true + bump, bounds.lower, bounds.upper);
    if ((q.values() - q_true.values()).cwiseAbs().maxCoeff() == 0.0) continue;  // zero perturbation
    out.push_back(std::move(q));
  }
  return out;
}

std::vector<StabilityRow> stability_quotient(const ProblemData& problem, double alpha,
                                             const std::vector<double>& final_times, std::size_t mesh_size,
                                             std::size_t steps, std::size_t perturbations, std::uint64_t seed,
                                             double amplitude, const Bounds& bounds) {
  const MeshPtr mesh = problem_mesh(problem, mesh_size);
  const Field q_true = interpolate(mesh, Space::full, problem.q_true);
  const Field u0 = l2_project(mesh, problem.u0);
  const Vector load = load_vector(*mesh, Space::interior, problem.f);
  const auto samples = random_bump_coefficients(mesh, q_true, perturbations, seed, amplitude, bounds);

  std::vector<StabilityRow> rows;
  for (double final_time : final_times) {
    const TimeGrid grid(final_time, steps);
    const Field u_true = FractionalStepper(q_true, alpha, grid).forward(u0, load).terminal();
    StabilityRow row{final_time, {}, 0.0};
    for (const auto& q : samples) {
      const Field u = FractionalStepper(q, alpha, grid).forward(u0, load).terminal();
      const double state_gap = seminorm_h1(u - u_true);
      const double quotient = norm_l2(q - q_true) / std::sqrt(state_gap);
      row.quotients.push_back(quotient);
      row.max_quotient = std::max(row.max_quotient, quotient);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace subdiff
