#pragma once

#include <functional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace semcom {

class ForwardOperator;

struct GaussianPosterior {
    Eigen::VectorXd mean;
    Eigen::MatrixXd covariance;
};

/// Closed-form posterior for y = A x + n, x ~ N(mu, Sigma), n ~ N(0, sigma_n^2 I):
///   Sigma_post = (Sigma^-1 + A^T A / sigma_n^2)^-1
///   mu_post    = Sigma_post (Sigma^-1 mu + A^T y / sigma_n^2)
GaussianPosterior conjugate_posterior(const Eigen::VectorXd& prior_mean,
                                      const Eigen::MatrixXd& prior_cov,
                                      const Eigen::MatrixXd& a, double sigma_n,
                                      const Eigen::VectorXd& y);

/// Brute-force argmax of a log-posterior over a regular grid (dimension 1 or 2,
/// resolution >= 16 per axis). Ties break to the lowest linear index, axis 0
/// fastest.
Eigen::VectorXd grid_map(const std::function<double(const Eigen::VectorXd&)>& log_posterior,
                         const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                         int resolution);

/// Exact 1D Wasserstein-1 between equal-weight empirical measures: mean
/// absolute difference of sorted samples. Unequal sizes are compared through
/// linearly interpolated quantiles.
double w1_1d(std::vector<double> a, std::vector<double> b);

/// Sample mean and unbiased covariance (rows are observations, n >= 2).
std::pair<Eigen::VectorXd, Eigen::MatrixXd> moments(const Eigen::MatrixXd& samples);

/// MSE and PSNR in dB (peak > 0). Zero MSE reports +inf PSNR.
std::pair<double, double> mse_psnr(const Eigen::VectorXd& x, const Eigen::VectorXd& xhat,
                                   double peak);

/// 10*log10(||clean||^2 / ||noisy - clean||^2); +inf when noisy == clean.
double measured_snr(const Eigen::VectorXd& clean, const Eigen::VectorXd& noisy);

struct FeasibleSetQuery {
    double epsilon = 0.0;
};

/// Membership in S(y) = { x : ||y - A(x)||^2 <= eps } with A applied in
/// noiseless mean mode.
bool feasible(const Eigen::VectorXd& y, const ForwardOperator& op,
              const Eigen::VectorXd& x, const FeasibleSetQuery& q);

/// Default feasibility tolerance: expected residual m * sigma_n^2.
double default_feasible_epsilon(const ForwardOperator& op);

// -- supporting statistics ---------------------------------------------------

/// Two-sample Kolmogorov-Smirnov statistic.
double ks_statistic(std::vector<double> a, std::vector<double> b);
/// Critical value c(alpha) * sqrt((n+m)/(n*m)).
double ks_critical(double alpha, size_t n, size_t m);

/// Spearman rank correlation (average ranks on ties).
double spearman(const std::vector<double>& a, const std::vector<double>& b);

/// Standard normal quantile function (Acklam's rational approximation with a
/// Halley refinement; |error| < 1e-12 over (0,1)).
double norminv(double p);

}  // namespace semcom
