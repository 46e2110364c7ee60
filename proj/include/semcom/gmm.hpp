#pragma once

#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "semcom/rng.hpp"

namespace semcom {

/// Gaussian mixture with exact density, score and sampler. Serves as the
/// analytic source distribution: every derived quantity (noisy marginals,
/// classifiers, posteriors) stays closed-form.
///
/// Immutable after construction; all evaluation methods are const and
/// thread-safe.
class GaussianMixture {
public:
    GaussianMixture(Eigen::VectorXd weights,
                    std::vector<Eigen::VectorXd> means,
                    std::vector<Eigen::MatrixXd> covariances,
                    std::optional<std::vector<int>> labels = std::nullopt);

    static GaussianMixture standard_normal(int dim);
    /// Single Gaussian N(mean, cov).
    static GaussianMixture single(Eigen::VectorXd mean, Eigen::MatrixXd cov);

    int dim() const { return static_cast<int>(means_[0].size()); }
    int components() const { return static_cast<int>(means_.size()); }
    const Eigen::VectorXd& weights() const { return weights_; }
    const Eigen::VectorXd& mean(int k) const { return means_[k]; }
    const Eigen::MatrixXd& covariance(int k) const { return covs_[k]; }
    bool labeled() const { return labels_.has_value(); }
    const std::vector<int>& labels() const;
    int num_classes() const;

    double log_density(const Eigen::VectorXd& x) const;
    /// grad_x log p(x), responsibility-weighted in log space.
    Eigen::VectorXd score(const Eigen::VectorXd& x) const;
    /// Hessian of log p(x).
    Eigen::MatrixXd score_jacobian(const Eigen::VectorXd& x) const;
    /// Posterior component probabilities p(k | x).
    Eigen::VectorXd responsibilities(const Eigen::VectorXd& x) const;

    /// n i.i.d. draws (rows) with their component indices. Bit-reproducible
    /// per seed.
    std::pair<Eigen::MatrixXd, std::vector<int>> sample(int n, std::uint64_t seed) const;
    Eigen::VectorXd sample_one(RngStream& rng, int* component = nullptr) const;

    /// Pushes every component through x -> scale*x + noise, noise ~ N(0, add_var*I):
    /// N(mu, S) -> N(scale*mu, scale^2*S + add_var*I). Weights and labels kept.
    GaussianMixture gaussian_push(double scale, double add_var) const;

    /// Mixture mean and covariance.
    std::pair<Eigen::VectorXd, Eigen::MatrixXd> moments() const;

private:
    Eigen::VectorXd weights_;
    std::vector<Eigen::VectorXd> means_;
    std::vector<Eigen::MatrixXd> covs_;
    std::optional<std::vector<int>> labels_;

    // cached per component
    std::vector<Eigen::MatrixXd> chol_;       // lower Cholesky factor of cov
    std::vector<Eigen::MatrixXd> precision_;  // cov^{-1}
    Eigen::VectorXd log_norm_;                // log w_k - 0.5 log((2pi)^D det)
    Eigen::VectorXd weight_cdf_;

    // log of each weighted component density, with the running max
    void component_log_terms(const Eigen::VectorXd& x, Eigen::VectorXd& out) const;
};

class NoiseSchedule;

/// Closed-form noisy marginal after i forward steps: VP components become
/// N(sqrt(abar_i) mu, abar_i S + (1-abar_i) I), VE components N(mu, S + sigma_i^2 I).
/// i = 0 returns the mixture unchanged.
GaussianMixture perturbed_marginal(const GaussianMixture& gmm, const NoiseSchedule& sched, int i);

}  // namespace semcom
