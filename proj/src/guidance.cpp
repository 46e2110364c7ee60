#include "semcom/guidance.hpp"

#include <cmath>
#include <stdexcept>

namespace semcom {

void GuidanceConfig::validate() const {
    if (!(gamma >= 0.0) || !std::isfinite(gamma))
        throw std::invalid_argument("GuidanceConfig: gamma must be finite and >= 0");
    if (!(lambda >= 0.0) || !std::isfinite(lambda))
        throw std::invalid_argument("GuidanceConfig: lambda must be finite and >= 0");
}

ClassifierResult gmm_classifier(const GaussianMixture& gmm, const Eigen::VectorXd& x_t,
                                int i, const NoiseSchedule& sched) {
    const std::vector<int>& labels = gmm.labels();  // throws if unlabeled
    const GaussianMixture noisy = perturbed_marginal(gmm, sched, i);
    const Eigen::VectorXd resp = noisy.responsibilities(x_t);
    const int classes = gmm.num_classes();
    const int d = gmm.dim();

    ClassifierResult out;
    out.probabilities = Eigen::VectorXd::Zero(classes);
    out.grad_log_prob.resize(classes, d);

    // grad_x log p(y|x) = score of the class-restricted mixture minus the full score
    const Eigen::VectorXd full_score = noisy.score(x_t);
    Eigen::MatrixXd class_num = Eigen::MatrixXd::Zero(classes, d);
    std::vector<double> class_mass(classes, 0.0);
    for (int k = 0; k < noisy.components(); ++k) {
        const int y = labels[k];
        out.probabilities[y] += resp[k];
        class_mass[y] += resp[k];
    }
    for (int y = 0; y < classes; ++y) {
        Eigen::VectorXd sub_score = Eigen::VectorXd::Zero(d);
        if (class_mass[y] > 0.0) {
            for (int k = 0; k < noisy.components(); ++k) {
                if (labels[k] != y) continue;
                // component score weighted by within-class responsibility
                const Eigen::VectorXd dx = x_t - noisy.mean(k);
                Eigen::LLT<Eigen::MatrixXd> llt(noisy.covariance(k));
                sub_score += (resp[k] / class_mass[y]) * (-llt.solve(dx));
            }
        }
        out.grad_log_prob.row(y) = (sub_score - full_score).transpose();
    }
    return out;
}

Eigen::VectorXd cg_score(const Eigen::VectorXd& s_uncond,
                         const Eigen::VectorXd& grad_logp_y, double gamma) {
    return s_uncond + gamma * grad_logp_y;
}

Eigen::VectorXd cfg_combine(const Eigen::VectorXd& s_uncond,
                            const Eigen::VectorXd& s_cond, double gamma) {
    return (1.0 - gamma) * s_uncond + gamma * s_cond;
}

namespace {

// gradient of -||y - F(xhat(x))||^2 given r = y - F(xhat), J = dF/dx at x,
// weighted per config; exact mode uses S = sigma_n^2 I + J_f Cov J_f^T.
Eigen::VectorXd weighted_measurement_grad(const Eigen::VectorXd& residual,
                                          const Eigen::MatrixXd& jac_full,
                                          const Eigen::MatrixXd* cov0_pushed,
                                          double sigma_n, const GuidanceConfig& cfg) {
    if (cfg.mode == GammaMode::ExactGaussian) {
        const int m = static_cast<int>(residual.size());
        Eigen::MatrixXd s = sigma_n * sigma_n * Eigen::MatrixXd::Identity(m, m);
        if (cov0_pushed) s += *cov0_pushed;
        return cfg.gamma * (jac_full.transpose() * s.ldlt().solve(residual));
    }
    Eigen::VectorXd g = 2.0 * (jac_full.transpose() * residual);
    if (cfg.normalize_residual) g /= residual.norm() + 1e-12;
    return cfg.gamma * g;
}

}  // namespace

Eigen::VectorXd dps_score(const ScoreField& field, const ForwardOperator& op,
                          const Eigen::VectorXd& y, const Eigen::VectorXd& x_t, int i,
                          const GuidanceConfig& cfg) {
    cfg.validate();
    if (y.size() != op.output_dim() || x_t.size() != op.input_dim())
        throw std::invalid_argument("dps_score: operator/vector shape mismatch");

    const Eigen::VectorXd prior = field.score(x_t, i);
    const Eigen::VectorXd xhat = tweedie(x_t, i, field);
    const Eigen::VectorXd residual = y - op.mean_apply(xhat);
    if (residual.isZero(0.0) && cfg.mode == GammaMode::Fixed) return prior;

    const Eigen::MatrixXd j_tw = tweedie_jacobian(x_t, i, field);
    const Eigen::MatrixXd j_op = op.mean_jacobian(xhat);
    const Eigen::MatrixXd j_full = j_op * j_tw;

    if (cfg.mode == GammaMode::ExactGaussian) {
        const Eigen::MatrixXd cov0 = tweedie_covariance(x_t, i, field);
        const Eigen::MatrixXd pushed = j_op * cov0 * j_op.transpose();
        return prior + weighted_measurement_grad(residual, j_full, &pushed, op.sigma_n(), cfg);
    }
    return prior + weighted_measurement_grad(residual, j_full, nullptr, op.sigma_n(), cfg);
}

Eigen::VectorXd GainOperatorFamily::latent(const Eigen::VectorXd& x) const {
    return power_scale * encode(encoder, x);
}

Eigen::VectorXd GainOperatorFamily::apply(const Eigen::VectorXd& gains,
                                          const Eigen::VectorXd& x) const {
    const Eigen::VectorXd z = latent(x);
    if (gain_dim == 1) return gains[0] * z;
    if (gains.size() != z.size())
        throw std::invalid_argument("GainOperatorFamily: gain dimension mismatch");
    return gains.cwiseProduct(z);
}

ForwardOperator GainOperatorFamily::fix_gains(const Eigen::VectorXd& gains) const {
    ChannelSpec spec;
    spec.kind = ChannelKind::Fading;
    spec.snr_db = -10.0 * std::log10(sigma_n * sigma_n);
    if (sigma_n == 0.0) spec.snr_db = std::numeric_limits<double>::infinity();
    spec.gains = gain_dim == 1 ? Eigen::VectorXd::Constant(1, gains[0]) : gains;
    return ForwardOperator::compose(encoder, spec, power_scale);
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> blind_dps_step(
    const ScoreField& field_x, const ScoreField& field_h, const GainOperatorFamily& fam,
    const Eigen::VectorXd& y, const Eigen::VectorXd& x_t, const Eigen::VectorXd& h_t,
    int i, const GuidanceConfig& cfg) {
    cfg.validate();
    if (x_t.size() != fam.input_dim())
        throw std::invalid_argument("blind_dps_step: source shape mismatch");
    if (fam.gain_dim != 1 && fam.gain_dim != fam.output_dim())
        throw std::invalid_argument(
            "blind_dps_step: unsupported operator family (scalar/diagonal gains only)");
    if (h_t.size() != fam.gain_dim)
        throw std::invalid_argument("blind_dps_step: gain shape mismatch");

    const Eigen::VectorXd prior_x = field_x.score(x_t, i);
    const Eigen::VectorXd prior_h = field_h.score(h_t, i);

    const Eigen::VectorXd xhat = tweedie(x_t, i, field_x);
    const Eigen::VectorXd hhat = tweedie(h_t, i, field_h);
    const Eigen::VectorXd z = fam.latent(xhat);
    const Eigen::VectorXd hz = fam.gain_dim == 1 ? (hhat[0] * z).eval()
                                                 : hhat.cwiseProduct(z).eval();
    const Eigen::VectorXd residual = y - hz;

    const Eigen::MatrixXd j_tw_x = tweedie_jacobian(x_t, i, field_x);
    const Eigen::MatrixXd j_tw_h = tweedie_jacobian(h_t, i, field_h);
    const Eigen::MatrixXd j_enc = fam.power_scale * encoder_jacobian(fam.encoder, xhat);

    // d(residual)/dx = -diag(hhat) J_enc J_tw_x ; d(residual)/dh = -diag(z) J_tw_h
    const int m = fam.output_dim();
    Eigen::MatrixXd j_x(m, fam.input_dim());
    if (fam.gain_dim == 1)
        j_x = hhat[0] * (j_enc * j_tw_x);
    else
        j_x = hhat.asDiagonal() * (j_enc * j_tw_x);
    Eigen::MatrixXd j_h;
    if (fam.gain_dim == 1)
        j_h = z * j_tw_h;  // m x 1
    else
        j_h = z.asDiagonal() * j_tw_h;

    if (cfg.mode == GammaMode::ExactGaussian) {
        const Eigen::MatrixXd cov_x = tweedie_covariance(x_t, i, field_x);
        const Eigen::MatrixXd cov_h = tweedie_covariance(h_t, i, field_h);
        // moment-matched variance of diag(h) z with independent surrogates:
        //   hhat^2 var_z + z^2 var_h + var_z var_h   (per coordinate)
        const Eigen::MatrixXd var_z_full = j_enc * cov_x * j_enc.transpose();
        Eigen::MatrixXd s = fam.sigma_n * fam.sigma_n *
                            Eigen::MatrixXd::Identity(m, m);
        for (int r = 0; r < m; ++r) {
            const double vh = fam.gain_dim == 1 ? cov_h(0, 0) : cov_h(r, r);
            const double hh = fam.gain_dim == 1 ? hhat[0] : hhat[r];
            s(r, r) += hh * hh * var_z_full(r, r) + z[r] * z[r] * vh +
                       var_z_full(r, r) * vh;
        }
        const Eigen::VectorXd w = s.ldlt().solve(residual);
        return {prior_x + cfg.gamma * (j_x.transpose() * w),
                prior_h + cfg.gamma * (j_h.transpose() * w)};
    }

    Eigen::VectorXd gx = 2.0 * (j_x.transpose() * residual);
    Eigen::VectorXd gh = 2.0 * (j_h.transpose() * residual);
    if (cfg.normalize_residual) {
        const double nrm = residual.norm() + 1e-12;
        gx /= nrm;
        gh /= nrm;
    }
    return {prior_x + cfg.gamma * gx, prior_h + cfg.gamma * gh};
}

Eigen::VectorXd semantic_reg_grad(const Eigen::MatrixXd& extractor,
                                  const Eigen::VectorXd& x, const Eigen::VectorXd& x_ref) {
    if (x.size() != extractor.cols() || x_ref.size() != x.size())
        throw std::invalid_argument("semantic_reg_grad: shape mismatch");
    return 2.0 * (extractor.transpose() * (extractor * (x - x_ref)));
}

}  // namespace semcom
