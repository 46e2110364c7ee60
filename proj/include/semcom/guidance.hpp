#pragma once

#include <utility>

#include <Eigen/Dense>

#include "semcom/channel.hpp"
#include "semcom/engine.hpp"
#include "semcom/gmm.hpp"
#include "semcom/score_field.hpp"

namespace semcom {

enum class GammaMode {
    /// Plain measurement guidance s + gamma * grad(-||y - A(xhat)||^2).
    Fixed,
    /// Likelihood gradient with the moment-matched Gaussian surrogate
    /// N(y; A(xhat), sigma_n^2 I + A Cov(x0|x_t) A^T), scaled by gamma.
    /// Exact conditional score for linear A and Gaussian priors at gamma = 1.
    ExactGaussian,
};

struct GuidanceConfig {
    double gamma = 1.0;              // guidance scale, >= 0
    double lambda = 0.0;             // auxiliary-regularizer weight, >= 0
    bool normalize_residual = false; // scale measurement gradient by 1/||residual||
    GammaMode mode = GammaMode::Fixed;

    void validate() const;
};

struct ClassifierResult {
    Eigen::VectorXd probabilities;   // per class, sums to 1
    Eigen::MatrixXd grad_log_prob;   // row y: grad_x log p(y | x_t)
};

/// Analytic time-dependent classifier over a labeled mixture: Bayes
/// responsibilities of the perturbed marginal at step i, grouped by label.
ClassifierResult gmm_classifier(const GaussianMixture& gmm, const Eigen::VectorXd& x_t,
                                int i, const NoiseSchedule& sched);

/// Classifier-guided conditional score s + gamma * grad log p(y|x).
Eigen::VectorXd cg_score(const Eigen::VectorXd& s_uncond,
                         const Eigen::VectorXd& grad_logp_y, double gamma);

/// Classifier-free interpolation (1-gamma) * s_uncond + gamma * s_cond.
Eigen::VectorXd cfg_combine(const Eigen::VectorXd& s_uncond,
                            const Eigen::VectorXd& s_cond, double gamma);

/// Posterior-sampling measurement guidance: the prior score plus the gradient
/// of -||y - A(xhat_{0|t})||^2 through the Tweedie estimate, weighted per
/// GuidanceConfig.
Eigen::VectorXd dps_score(const ScoreField& field, const ForwardOperator& op,
                          const Eigen::VectorXd& y, const Eigen::VectorXd& x_t, int i,
                          const GuidanceConfig& cfg);

/// Operator family with unknown per-coordinate gains: y = diag(h) z + n where
/// z = rho * E(x); a scalar h (gain_dim = 1) broadcasts over all coordinates.
struct GainOperatorFamily {
    Encoder encoder;
    double power_scale = 1.0;
    double sigma_n = 0.0;
    int gain_dim = 1;

    int input_dim() const { return encoder_input_dim(encoder); }
    int output_dim() const { return encoder_output_dim(encoder); }
    Eigen::VectorXd latent(const Eigen::VectorXd& x) const;
    Eigen::VectorXd apply(const Eigen::VectorXd& gains, const Eigen::VectorXd& x) const;
    /// Known-gain forward operator for baseline comparisons.
    ForwardOperator fix_gains(const Eigen::VectorXd& gains) const;
};

/// One step of joint source/operator guidance: both marginal scores augmented
/// by gradients of the shared residual through the denoised surrogates
/// (xhat_{0|t}, hhat_{0|t}). The residual is computed once per call.
std::pair<Eigen::VectorXd, Eigen::VectorXd> blind_dps_step(
    const ScoreField& field_x, const ScoreField& field_h, const GainOperatorFamily& fam,
    const Eigen::VectorXd& y, const Eigen::VectorXd& x_t, const Eigen::VectorXd& h_t,
    int i, const GuidanceConfig& cfg);

/// Gradient of ||E_sem(x) - E_sem(x_ref)||^2 for a linear feature map M:
/// 2 M^T M (x - x_ref).
Eigen::VectorXd semantic_reg_grad(const Eigen::MatrixXd& extractor,
                                  const Eigen::VectorXd& x, const Eigen::VectorXd& x_ref);

}  // namespace semcom
