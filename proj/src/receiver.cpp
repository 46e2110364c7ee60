#include "semcom/receiver.hpp"

#include <cmath>
#include <stdexcept>

#include "semcom/csv.hpp"
#include "semcom/metrics.hpp"

namespace semcom {

namespace {

double affine_decoder_vhat(const ReferenceDecoder& dec, const ForwardOperator& op,
                           const GaussianMixture& source) {
    const auto [mu, cov] = source.moments();
    const auto [a, off] = op.linear_map();
    const int d = source.dim();
    const Eigen::MatrixXd iwa = Eigen::MatrixXd::Identity(d, d) - dec.w * a;
    const Eigen::VectorXd mean_err = iwa * mu - dec.w * off - dec.b;
    const double mse = mean_err.squaredNorm() + (iwa * cov * iwa.transpose()).trace() +
                       op.sigma_n() * op.sigma_n() * (dec.w * dec.w.transpose()).trace();
    return std::max(0.0, mse / cov.trace());
}

double probe_decoder_vhat(const ReferenceDecoder& dec, const ForwardOperator& op,
                          const GaussianMixture& source, std::uint64_t seed) {
    const int n = 2000;
    RngStream noise = RngStream::for_chain(seed, 0, "vhat-noise");
    RngStream src = RngStream::for_chain(seed, 0, "vhat-src");
    double mse = 0.0;
    for (int r = 0; r < n; ++r) {
        const Eigen::VectorXd x = source.sample_one(src);
        const Eigen::VectorXd y = op.apply(x, noise);
        mse += (x - dec.apply(y)).squaredNorm();
    }
    mse /= n;
    const auto [mu, cov] = source.moments();
    return std::max(0.0, mse / cov.trace());
}

}  // namespace

ReferenceDecoder make_reference_decoder(ReferenceKind kind, const ForwardOperator& op,
                                        const GaussianMixture& source,
                                        std::uint64_t seed) {
    ReferenceDecoder dec;
    dec.kind = kind;
    const int d = op.input_dim(), m = op.output_dim();
    switch (kind) {
        case ReferenceKind::PseudoInverse: {
            if (!op.is_linear())
                throw std::invalid_argument("reference_decode: pseudo_inverse needs a linear operator");
            const auto [a, off] = op.linear_map();
            dec.w = a.completeOrthogonalDecomposition().pseudoInverse();
            dec.b = -dec.w * off;
            break;
        }
        case ReferenceKind::ConjugateMean: {
            if (!op.is_linear())
                throw std::invalid_argument("reference_decode: conjugate_mean needs a linear operator");
            const auto [a, off] = op.linear_map();
            const auto [mu, cov] = source.moments();
            const double s2 = op.sigma_n() * op.sigma_n();
            Eigen::MatrixXd gram = a * cov * a.transpose() +
                                   std::max(s2, 1e-12) * Eigen::MatrixXd::Identity(m, m);
            dec.w = cov * a.transpose() * gram.ldlt().solve(Eigen::MatrixXd::Identity(m, m));
            dec.b = mu - dec.w * (a * mu + off);
            break;
        }
        case ReferenceKind::TrainedLinear: {
            const int n = 5000;
            RngStream noise = RngStream::for_chain(seed, 0, "fit-noise");
            RngStream src = RngStream::for_chain(seed, 0, "fit-src");
            Eigen::MatrixXd ys(n, m + 1), xs(n, d);
            for (int r = 0; r < n; ++r) {
                const Eigen::VectorXd x = source.sample_one(src);
                ys.row(r).head(m) = op.apply(x, noise).transpose();
                ys(r, m) = 1.0;
                xs.row(r) = x.transpose();
            }
            const Eigen::MatrixXd gram =
                ys.transpose() * ys + 1e-8 * Eigen::MatrixXd::Identity(m + 1, m + 1);
            const Eigen::MatrixXd coef = gram.ldlt().solve(ys.transpose() * xs);
            dec.w = coef.topRows(m).transpose();
            dec.b = coef.row(m).transpose();
            break;
        }
    }
    dec.vhat = op.is_linear() ? affine_decoder_vhat(dec, op, source)
                              : probe_decoder_vhat(dec, op, source, seed);
    return dec;
}

Eigen::VectorXd reference_decode(const Eigen::VectorXd& y, const ForwardOperator& op,
                                 const ReferenceDecoder& dec) {
    if (y.size() != op.output_dim())
        throw std::invalid_argument("reference_decode: shape mismatch");
    return dec.apply(y);
}

void DecoderConfig::validate() const {
    guidance.validate();
    if (steps < 0) throw std::invalid_argument("DecoderConfig: steps must be >= 0");
    if (chains < 1) throw std::invalid_argument("DecoderConfig: chains must be >= 1");
}

void write_diagnostics_csv(const std::string& path,
                           const std::vector<DiagnosticsRow>& rows) {
    CsvWriter w(path, {"step", "residual_norm", "confirming_norm", "state_norm"});
    for (const auto& r : rows)
        w.row({format_number(r.step), format_number(r.residual_norm),
               format_number(r.confirm_norm), format_number(r.state_norm)});
}

AdaptiveStart adaptive_start(const Eigen::VectorXd& y, const ForwardOperator& op,
                             const NoiseSchedule& sched, const ReferenceDecoder& dec,
                             std::uint64_t seed) {
    if (sched.kind() != ScheduleKind::VP)
        throw std::invalid_argument("adaptive_start: VP schedules only");
    const Eigen::VectorXd x0y = reference_decode(y, op, dec);
    int istar = sched.steps();
    for (int i = 1; i <= sched.steps(); ++i) {
        if (1.0 - sched.alpha_bar(i) >= dec.vhat) {
            istar = i;
            break;
        }
    }
    const auto [a, v] = sched.kernel(istar);
    RngStream rng = RngStream::for_chain(seed, 0, "init");
    AdaptiveStart out;
    out.start_index = istar;
    out.init = a * x0y + std::sqrt(v) * rng.normal_vec(x0y.size());
    return out;
}

namespace {

// Guided score shared by all receiver samplers. (a, v) is the forward-kernel
// pair at the query point; `index` the nearest schedule index (used for the
// score Jacobian).
struct GuidedField {
    const ScoreField& prior;
    const ForwardOperator& op;
    const Eigen::VectorXd& y;
    const GuidanceConfig& cfg;
    const ReferenceDecoder* dec;   // confirming constraint (lambda > 0)
    Eigen::VectorXd x0y;

    DiagnosticsRow last{};

    Eigen::VectorXd operator()(const Eigen::VectorXd& x, int index, double a, double v,
                               bool continuous, double t) {
        const Eigen::VectorXd s =
            continuous ? prior.score_time(x, t) : prior.score(x, index);
        const int d = static_cast<int>(x.size());
        const Eigen::VectorXd xhat = (x + v * s) / a;
        const Eigen::MatrixXd jac = prior.jacobian(x, index);
        const Eigen::MatrixXd j_tw = (Eigen::MatrixXd::Identity(d, d) + v * jac) / a;

        const Eigen::VectorXd residual = y - op.mean_apply(xhat);
        const Eigen::MatrixXd j_op = op.mean_jacobian(xhat);
        Eigen::VectorXd out = s;
        if (cfg.gamma > 0.0) {
            const Eigen::MatrixXd j_full = j_op * j_tw;
            if (cfg.mode == GammaMode::ExactGaussian) {
                const Eigen::MatrixXd cov0 =
                    (v / (a * a)) * (Eigen::MatrixXd::Identity(d, d) + v * jac);
                Eigen::MatrixXd sm = op.sigma_n() * op.sigma_n() *
                                     Eigen::MatrixXd::Identity(residual.size(), residual.size());
                sm += j_op * cov0 * j_op.transpose();
                out += cfg.gamma * (j_full.transpose() * sm.ldlt().solve(residual));
            } else {
                Eigen::VectorXd g = 2.0 * (j_full.transpose() * residual);
                if (cfg.normalize_residual) g /= residual.norm() + 1e-12;
                out += cfg.gamma * g;
            }
        }
        double confirm_norm = 0.0;
        if (cfg.lambda > 0.0) {
            // confirming constraint toward the reference reconstruction
            const Eigen::VectorXd round_trip =
                op.channel_pinv(op.channel_apply(op.latent(xhat)));
            const Eigen::VectorXd xtilde = dec->apply(round_trip);
            const Eigen::VectorXd c = x0y - xtilde;
            confirm_norm = c.norm();
            // d xtilde / dx = W Hpinv H rho J_E J_tw
            const Eigen::MatrixXd j_enc =
                op.power_scale() * encoder_jacobian(op.encoder(), xhat);
            Eigen::MatrixXd j_chain = j_enc * j_tw;
            // apply H then Hpinv column-wise
            for (int cidx = 0; cidx < j_chain.cols(); ++cidx)
                j_chain.col(cidx) = op.channel_pinv(op.channel_apply(j_chain.col(cidx)));
            const Eigen::MatrixXd j_tilde = dec->w * j_chain;
            out += cfg.lambda * 2.0 * (j_tilde.transpose() * c);
        }
        last = DiagnosticsRow{index, residual.norm(), confirm_norm, x.norm()};
        return out;
    }
};

}  // namespace

DecodeResult diffcom_decode(const Eigen::VectorXd& y, const ForwardOperator& op,
                            const ScoreField& prior, const DecoderConfig& cfg,
                            const ReferenceDecoder* dec, std::uint64_t seed,
                            const LogDensityFn& log_prior) {
    cfg.validate();
    if (y.size() != op.output_dim()) throw std::invalid_argument("diffcom_decode: shape mismatch");
    if ((cfg.guidance.lambda > 0.0 || cfg.start == StartMode::Adaptive) && !dec)
        throw std::invalid_argument(
            "diffcom_decode: reference decoder required for lambda > 0 or adaptive start");

    const NoiseSchedule& sched = prior.schedule();
    const int d = op.input_dim();
    const int n = cfg.chains;

    GuidedField guided{prior, op, y, cfg.guidance, dec, Eigen::VectorXd()};
    if (dec) guided.x0y = reference_decode(y, op, *dec);

    int start_index = sched.steps();
    Eigen::VectorXd adaptive_center;
    if (cfg.start == StartMode::Adaptive) {
        // center shared across chains; per-chain noise drawn below
        adaptive_center = reference_decode(y, op, *dec);
        start_index = sched.steps();
        for (int i = 1; i <= sched.steps(); ++i) {
            if (1.0 - sched.alpha_bar(i) >= dec->vhat) {
                start_index = i;
                break;
            }
        }
    }

    DecodeResult res;
    res.start_index = start_index;
    res.ensemble.resize(n, d);

    std::vector<RngStream> streams;
    streams.reserve(n);
    for (int c = 0; c < n; ++c) streams.push_back(RngStream::for_chain(seed, c, "x"));

    Eigen::MatrixXd x(n, d);
    {
        const auto [a0, v0] = sched.kernel(start_index);
        for (int c = 0; c < n; ++c) {
            RngStream init = RngStream::for_chain(seed, c, "init");
            if (cfg.start == StartMode::Adaptive)
                x.row(c) = (a0 * adaptive_center + std::sqrt(v0) * init.normal_vec(d)).transpose();
            else if (sched.kind() == ScheduleKind::VP)
                x.row(c) = init.normal_vec(d).transpose();
            else
                x.row(c) = (sched.sigma(sched.steps()) * init.normal_vec(d)).transpose();
        }
    }

    const bool discrete = cfg.sampler == SamplerKind::ReverseSde ||
                          cfg.sampler == SamplerKind::PfOdePC;
    if (discrete) {
        const bool pc = cfg.sampler == SamplerKind::PfOdePC;
        res.steps_used = start_index;
        for (int i = start_index; i >= 1; --i) {
            const auto [ai, vi] = sched.kernel(i);
            for (int c = 0; c < n; ++c) {
                const Eigen::VectorXd s =
                    guided(x.row(c), i, ai, vi, /*continuous=*/false, sched.time_of(i));
                if (c == 0) res.diagnostics.push_back(guided.last);
                Eigen::VectorXd xc = x.row(c);
                if (sched.kind() == ScheduleKind::VP) {
                    const double b = 1.0 - sched.alpha_bar(i) / sched.alpha_bar(i - 1);
                    xc = (xc + b * s) / std::sqrt(1.0 - b) +
                         std::sqrt(b) * streams[c].normal_vec(d);
                } else {
                    const double si = sched.sigma(i), sj = sched.sigma(i - 1);
                    const double dv = si * si - sj * sj;
                    xc += dv * s + std::sqrt(dv) * streams[c].normal_vec(d);
                }
                if (pc && i > 1) {
                    const auto [aj, vj] = sched.kernel(i - 1);
                    const double zeta = 0.1 * vj;
                    const Eigen::VectorXd sc = guided(xc, i - 1, aj, vj, false,
                                                      sched.time_of(i - 1));
                    xc += zeta * sc + std::sqrt(2.0 * zeta) * streams[c].normal_vec(d);
                }
                if (!xc.allFinite())
                    throw std::runtime_error("diffcom_decode: non-finite state at step " +
                                             std::to_string(i));
                x.row(c) = xc.transpose();
            }
        }
    } else {
        const int steps = cfg.steps > 0 ? cfg.steps : sched.steps();
        res.steps_used = steps;
        const double t0 = sched.time_of(start_index);
        const double dt = -t0 / steps;
        auto drift = [&](const Eigen::VectorXd& xc, double t) {
            const auto [a, v] = sched.kernel_time(t);
            const Eigen::VectorXd s =
                guided(xc, sched.index_of(t), a, v, /*continuous=*/true, t);
            if (sched.kind() == ScheduleKind::VP)
                return (-0.5 * sched.beta_time(t) * (xc + s)).eval();
            return (-0.5 * sched.dsigma2_time(t) * s).eval();
        };
        for (int c = 0; c < n; ++c) {
            Eigen::VectorXd xc = x.row(c);
            double t = t0;
            for (int k = 0; k < steps; ++k) {
                if (cfg.sampler == SamplerKind::PfOdeEuler) {
                    xc += dt * drift(xc, t);
                    if (c == 0) {
                        auto row = guided.last;
                        row.step = k;
                        res.diagnostics.push_back(row);
                    }
                } else {
                    const Eigen::VectorXd k1 = drift(xc, t);
                    if (c == 0) {
                        auto row = guided.last;
                        row.step = k;
                        res.diagnostics.push_back(row);
                    }
                    const Eigen::VectorXd k2 = drift(xc + 0.5 * dt * k1, t + 0.5 * dt);
                    const Eigen::VectorXd k3 = drift(xc + 0.5 * dt * k2, t + 0.5 * dt);
                    const Eigen::VectorXd k4 = drift(xc + dt * k3, t + dt);
                    xc += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
                }
                t += dt;
                if (!xc.allFinite())
                    throw std::runtime_error("diffcom_decode: non-finite state at step " +
                                             std::to_string(k));
            }
            x.row(c) = xc.transpose();
        }
    }

    res.ensemble = x;
    if (log_prior) {
        const double inv2s2 = op.sigma_n() > 0.0
                                  ? 1.0 / (2.0 * op.sigma_n() * op.sigma_n())
                                  : 1e12;
        int best = 0;
        double best_lp = -std::numeric_limits<double>::infinity();
        for (int c = 0; c < n; ++c) {
            const Eigen::VectorXd xc = x.row(c);
            const double lp =
                log_prior(xc) - inv2s2 * (y - op.mean_apply(xc)).squaredNorm();
            if (lp > best_lp) {
                best_lp = lp;
                best = c;
            }
        }
        res.x_hat = x.row(best);
    } else {
        res.x_hat = x.row(0);
    }
    return res;
}

BlindDecodeResult blind_diffcom_decode(const Eigen::VectorXd& y,
                                       const GainOperatorFamily& fam,
                                       const ScoreField& prior_x,
                                       const ScoreField& prior_h,
                                       const DecoderConfig& cfg, std::uint64_t seed,
                                       const LogDensityFn& log_prior_x,
                                       const LogDensityFn& log_prior_h) {
    cfg.validate();
    if (cfg.sampler != SamplerKind::ReverseSde)
        throw std::invalid_argument("blind_diffcom_decode: reverse_sde sampler only");
    const NoiseSchedule& sx = prior_x.schedule();
    const NoiseSchedule& sh = prior_h.schedule();
    if (sx.kind() != ScheduleKind::VP || sh.kind() != ScheduleKind::VP ||
        sx.steps() != sh.steps())
        throw std::invalid_argument(
            "blind_diffcom_decode: schedules must both be VP with equal steps");

    const int d = fam.input_dim();
    const int dh = fam.gain_dim;
    const int n = cfg.chains;

    Eigen::MatrixXd x(n, d), h(n, dh);
    std::vector<RngStream> xs, hs;
    xs.reserve(n);
    hs.reserve(n);
    for (int c = 0; c < n; ++c) {
        RngStream ix = RngStream::for_chain(seed, c, "init");
        RngStream ih = RngStream::for_chain(seed, c, "init-h");
        x.row(c) = ix.normal_vec(d).transpose();
        h.row(c) = ih.normal_vec(dh).transpose();
        xs.push_back(RngStream::for_chain(seed, c, "x"));
        hs.push_back(RngStream::for_chain(seed, c, "h"));
    }

    BlindDecodeResult res;
    for (int i = sx.steps(); i >= 1; --i) {
        const double b = 1.0 - sx.alpha_bar(i) / sx.alpha_bar(i - 1);
        const double bh = 1.0 - sh.alpha_bar(i) / sh.alpha_bar(i - 1);
        for (int c = 0; c < n; ++c) {
            const auto [gx, gh] =
                blind_dps_step(prior_x, prior_h, fam, y, x.row(c), h.row(c), i,
                               cfg.guidance);
            x.row(c) = ((x.row(c).transpose() + b * gx) / std::sqrt(1.0 - b) +
                        std::sqrt(b) * xs[c].normal_vec(d))
                           .transpose();
            h.row(c) = ((h.row(c).transpose() + bh * gh) / std::sqrt(1.0 - bh) +
                        std::sqrt(bh) * hs[c].normal_vec(dh))
                           .transpose();
            if (!x.row(c).allFinite() || !h.row(c).allFinite())
                throw std::runtime_error("blind_diffcom_decode: non-finite state at step " +
                                         std::to_string(i));
            if (c == 0) {
                const Eigen::VectorXd xhat = tweedie(x.row(c), std::max(i - 1, 1), prior_x);
                const Eigen::VectorXd hhat = tweedie(h.row(c), std::max(i - 1, 1), prior_h);
                const Eigen::VectorXd r = y - fam.apply(hhat, xhat);
                res.diagnostics.push_back(
                    DiagnosticsRow{i - 1, r.norm(), 0.0, x.row(c).norm()});
            }
        }
    }

    res.ensemble_x = x;
    res.ensemble_h = h;
    if (log_prior_x && log_prior_h) {
        const double inv2s2 =
            fam.sigma_n > 0.0 ? 1.0 / (2.0 * fam.sigma_n * fam.sigma_n) : 1e12;
        int best = 0;
        double best_lp = -std::numeric_limits<double>::infinity();
        for (int c = 0; c < n; ++c) {
            const Eigen::VectorXd xc = x.row(c), hc = h.row(c);
            const double lp = log_prior_x(xc) + log_prior_h(hc) -
                              inv2s2 * (y - fam.apply(hc, xc)).squaredNorm();
            if (lp > best_lp) {
                best_lp = lp;
                best = c;
            }
        }
        res.x_hat = x.row(best);
        res.h_hat = h.row(best);
    } else {
        res.x_hat = x.row(0);
        res.h_hat = h.row(0);
    }
    return res;
}

}  // namespace semcom
