#pragma once

#include "subdiff/inverse.hpp"
#include "subdiff/problems.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace subdiff {

/// Parameter grid of a reconstruction study.
///
/// Mesh sizes are cell counts in 1D and ring counts of the disk mesher in 2D.
/// Regularization weights are either listed per noise level or derived as
/// gamma = gamma_factor * eps^2.
struct ExperimentConfig {
  ProblemData problem = example_1d();
  std::vector<double> alphas{0.25, 0.5, 0.75};
  std::vector<double> final_times{1.0};
  std::vector<double> noise_levels{1e-2, 5e-3, 2.5e-3, 1e-3};
  std::vector<double> gammas;  ///< explicit gammas, one per noise level
  double gamma_factor = 4e-4;
  std::size_t mesh_size = 113;
  std::size_t steps = 30;
  std::size_t reference_mesh_size = 1600;
  std::size_t reference_steps = 1280;
  std::uint64_t seed = 1;
  int jobs = 1;
  Bounds bounds;
  double discrepancy_factor = 1.1;
  double gradient_tolerance = 1e-8;
  std::size_t max_iterations = 200;
  BetaRule beta_rule = BetaRule::polak_ribiere_plus;

  double gamma_for(std::size_t noise_index) const;
  /// Throws std::invalid_argument on inconsistent settings.
  void validate() const;
};

/// Fine-grid solve of the true problem at one (alpha, T).
struct ReferenceSolution {
  double alpha = 0.0;
  double final_time = 0.0;
  MeshPtr mesh;
  Field terminal;        ///< u(q_true)(T) on the fine X_h
  double terminal_linf;  ///< ||u(q_true)(T)||_{L^inf}
};

ReferenceSolution solve_reference(const ProblemData& problem, double alpha, double final_time,
                                  std::size_t reference_mesh_size, std::size_t reference_steps);

struct SyntheticData {
  Field z_delta;  ///< noisy observation on the coarse X_h
  double delta;   ///< measured ||u_ref(T) - z_delta||_{L2}
  Field u_ref_T;  ///< fine terminal state interpolated to the coarse X_h
  Field noise;    ///< injected noise field
};

/// z = u_ref(T) + eps ||u_ref(T)||_inf xi with xi standard Gaussian per
/// coarse interior vertex, drawn from a generator seeded with `seed`.
SyntheticData synthesize_data(const ReferenceSolution& reference, const MeshPtr& coarse, double eps,
                              std::uint64_t seed);

struct ErrorPair {
  double e_q;
  double e_u;
};

/// e_q = ||q_true - q_star||_{L2}, e_u = ||u_ref(T) - U^N(q_star)||_{L2} on the coarse mesh.
ErrorPair compute_errors(const Field& q_star, const Field& q_true, const Field& terminal, const Field& u_ref_T);

/// Least-squares slope of log e against log delta.
double compute_rate(const std::vector<std::pair<double, double>>& pairs);

struct RunRecord {
  double alpha = 0.0;
  double final_time = 0.0;
  double eps = 0.0;
  double gamma = 0.0;
  double delta = 0.0;
  double e_q = 0.0;
  double e_u = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  double seconds = 0.0;
  std::string error;  ///< non-empty when the run failed
  std::optional<Field> q_star;
  std::optional<Field> pointwise_error;  ///< q_true - q_star
};

struct RowRate {
  double alpha;
  double final_time;
  double rate_q;
  double rate_u;
};

struct RunReport {
  std::vector<RunRecord> records;  ///< row-major: (alpha, T) rows, noise levels within a row
  std::vector<RowRate> rates;
};

/// Inversion on synthetic data for one noise level; the reference is reused across levels.
RunRecord run_single(const ExperimentConfig& config, const ReferenceSolution& reference, const MeshPtr& coarse,
                     std::size_t noise_index);

/// All (alpha, T, eps) runs of the config; rows run concurrently on `jobs` workers.
RunReport run_sweep(const ExperimentConfig& config);

/// CSV with columns alpha,T,eps,gamma,delta,e_q,e_u,iters,converged,seconds.
std::string report_csv(const RunReport& report);
nlohmann::json report_json(const ExperimentConfig& config, const RunReport& report);
nlohmann::json config_json(const ExperimentConfig& config);

/// t^{alpha/2} |dbar^alpha U^n|_{W^{1,inf}} sampled at grid times in [t_min, T].
struct DecayTable {
  std::vector<double> times;
  std::vector<double> weighted;
  double ratio;  ///< max / min of the weighted values
};

DecayTable verify_decay(const ProblemData& problem, double alpha, double final_time, std::size_t mesh_size,
                        std::size_t steps, double t_min = 1.0);

/// Cellwise q |grad U^N|^2 + (f - dbar^alpha U^N) U^N with the second term
/// averaged over cell vertices.
struct PositivityResult {
  double minimum;
  Vector cell_values;
  Field vertex_values;  ///< cell values averaged onto vertices, for dumping
};

PositivityResult check_positivity(const ProblemData& problem, double alpha, double final_time,
                                  std::size_t mesh_size, std::size_t steps);

/// ||q - q_true||_{L2} / |u(q)(T) - u(q_true)(T)|_{H1}^{1/2} over random admissible bumps.
struct StabilityRow {
  double final_time;
  std::vector<double> quotients;
  double max_quotient;
};

std::vector<StabilityRow> stability_quotient(const ProblemData& problem, double alpha,
                                             const std::vector<double>& final_times, std::size_t mesh_size,
                                             std::size_t steps, std::size_t perturbations, std::uint64_t seed,
                                             double amplitude = 0.1, const Bounds& bounds = {});

/// Random smooth bump perturbations of q_true clamped to the bounds; the
/// same seed yields the same perturbations.
std::vector<Field> random_bump_coefficients(const MeshPtr& mesh, const Field& q_true, std::size_t count,
                                            std::uint64_t seed, double amplitude, const Bounds& bounds);

}  // namespace subdiff
