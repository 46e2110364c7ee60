#pragma once

#include <Eigen/Dense>

namespace semcom {

enum class ScheduleKind { VP, VE };

/// Discrete noise schedule with a smooth continuous-time embedding.
///
/// Discrete arrays are 1-indexed conceptually (step i in 1..N); index 0 means
/// "clean data". The continuous embedding maps t in [0,1] onto a smooth
/// perturbation path used by the probability-flow ODE solvers:
///   VP: beta_c(t) = N*(beta_min + t*(beta_max - beta_min)),
///       abar_c(t) = exp(-N*(beta_min*t + (beta_max-beta_min)*t^2/2))
///   VE: sigma_c(t) = sigma_min^(1-t) * sigma_max^t
class NoiseSchedule {
public:
    static NoiseSchedule vp_linear(double beta_min, double beta_max, int steps);
    static NoiseSchedule ve_geometric(double sigma_min, double sigma_max, int steps);

    ScheduleKind kind() const { return kind_; }
    int steps() const { return steps_; }

    double beta(int i) const;        // VP only, i in 1..N
    double sigma(int i) const;       // VE only, i in 1..N (sigma(0) = 0)
    double alpha_bar(int i) const;   // VP only; alpha_bar(0) = 1
    const Eigen::VectorXd& betas() const { return betas_; }
    const Eigen::VectorXd& sigmas() const { return sigmas_; }
    const Eigen::VectorXd& alpha_bars() const { return alpha_bar_; }

    /// Forward-kernel parameters at step i: x_i = a*x_0 + sqrt(v)*eps.
    /// VP: (sqrt(abar_i), 1-abar_i); VE: (1, sigma_i^2); i = 0: (1, 0).
    std::pair<double, double> kernel(int i) const;

    /// alpha_t = sqrt(abar_i) (VP) or 1 (VE); sigma_t = sqrt(1-abar_i) or sigma_i.
    double alpha_t(int i) const;
    double sigma_t(int i) const;

    // continuous embedding
    double time_of(int i) const;
    int index_of(double t) const;  // nearest schedule index in 1..N
    double beta_time(double t) const;          // VP rate
    double alpha_bar_time(double t) const;     // VP
    double sigma_time(double t) const;         // VE
    double dsigma2_time(double t) const;       // VE: d(sigma_c^2)/dt
    std::pair<double, double> kernel_time(double t) const;

private:
    NoiseSchedule() = default;

    ScheduleKind kind_ = ScheduleKind::VP;
    int steps_ = 0;
    double lo_ = 0.0, hi_ = 0.0;   // endpoint parameters
    Eigen::VectorXd betas_;
    Eigen::VectorXd sigmas_;
    Eigen::VectorXd alpha_bar_;

    void check_index(int i, int lo) const;
};

}  // namespace semcom
