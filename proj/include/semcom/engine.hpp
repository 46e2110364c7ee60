#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "semcom/rng.hpp"
#include "semcom/schedule.hpp"
#include "semcom/score_field.hpp"

namespace semcom {

/// A set of sampler chains. Rows of `points` are chains; chain c draws its
/// noise from RngStream::for_chain(seed, c, "x").
struct SampleBatch {
    Eigen::MatrixXd points;  // n x D
    int step_index = 0;
    std::uint64_t seed = 0;

    int size() const { return static_cast<int>(points.rows()); }
    int dim() const { return static_cast<int>(points.cols()); }
};

/// Optional per-step state dump; written as CSV with columns
/// (chain, step, coord, value).
struct TrajectoryLog {
    struct Row {
        int chain;
        double step;
        int coord;
        double value;
    };
    std::vector<Row> rows;

    void record(const Eigen::MatrixXd& points, double step);
    void write_csv(const std::string& path) const;
};

enum class OdeMethod { Euler, Rk4, PredictorCorrector };

/// One draw from the closed-form forward kernel at step i >= 1.
Eigen::VectorXd forward_sample(const Eigen::VectorXd& x0, const NoiseSchedule& sched,
                               int i, RngStream& rng);
Eigen::VectorXd forward_sample(const Eigen::VectorXd& x0, const NoiseSchedule& sched,
                               int i, std::uint64_t seed);

/// Unadjusted Langevin iteration x <- x + zeta*s(x) + sqrt(2*zeta)*noise_scale*eps
/// on a fixed target score. noise_scale = 0 turns it into gradient ascent on
/// the log-density.
SampleBatch langevin(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& score,
                     const SampleBatch& init, double zeta, int steps, std::uint64_t seed,
                     double noise_scale = 1.0);

/// Ancestral reverse-diffusion sampling: initializes from the kind-appropriate
/// terminal prior (VP: N(0,I); VE: N(0, sigma_N^2 I)) and iterates the discrete
/// reverse recursion down to i = 1:
///   VP: x_{i-1} = (x_i + beta_i * s(x_i, i)) / sqrt(1 - beta_i) + sqrt(beta_i)*eps
///   VE: x_{i-1} = x_i + (sigma_i^2 - sigma_{i-1}^2) * s(x_i, i)
///                 + sqrt(sigma_i^2 - sigma_{i-1}^2) * eps
SampleBatch reverse_sde(const ScoreField& field, int n, std::uint64_t seed,
                        TrajectoryLog* traj = nullptr);

/// Reverse recursion started from a given state (init.step_index down to 0);
/// used by the adaptive-start decoder.
SampleBatch reverse_sde_from(const ScoreField& field, const SampleBatch& init,
                             TrajectoryLog* traj = nullptr);

/// Deterministic probability-flow integration from t = 1 down to t = 0
/// (Euler / classical RK4 on the continuous embedding), or the
/// predictor-corrector scheme on a sub-grid of schedule indices (reverse-SDE
/// predictor plus one Langevin correction per step, zeta = 0.1 * local
/// noise variance).
SampleBatch pf_ode(const ScoreField& field, OdeMethod method, int steps,
                   const SampleBatch& x_terminal, TrajectoryLog* traj = nullptr);

/// Draws the terminal prior for pf_ode (same as reverse_sde initialisation).
SampleBatch terminal_prior(const NoiseSchedule& sched, int n, int dim, std::uint64_t seed);

/// Posterior-mean (denoised) estimate via Tweedie's formula:
/// VP: (x + sigma_t^2 * s) / alpha_t; VE: x + sigma_i^2 * s.
Eigen::VectorXd tweedie(const Eigen::VectorXd& x_t, int i, const ScoreField& field);

/// d(tweedie)/d(x_t) = (I + sigma_t^2 * J) / alpha_t.
Eigen::MatrixXd tweedie_jacobian(const Eigen::VectorXd& x_t, int i, const ScoreField& field);

/// Posterior covariance Cov(x_0 | x_t) = (sigma_t^2/alpha_t^2)(I + sigma_t^2 J).
Eigen::MatrixXd tweedie_covariance(const Eigen::VectorXd& x_t, int i, const ScoreField& field);

}  // namespace semcom
