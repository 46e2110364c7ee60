#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "semcom/channel.hpp"
#include "semcom/engine.hpp"
#include "semcom/guidance.hpp"
#include "semcom/score_field.hpp"

namespace semcom {

enum class ReferenceKind { PseudoInverse, ConjugateMean, TrainedLinear };

/// Deterministic MSE-oriented reference decoder x_{0|y} = W y + b, with its
/// expected normalized reconstruction error (per-coordinate MSE over prior
/// variance) estimated at build time.
struct ReferenceDecoder {
    ReferenceKind kind = ReferenceKind::ConjugateMean;
    Eigen::MatrixXd w;
    Eigen::VectorXd b;
    double vhat = 0.0;

    Eigen::VectorXd apply(const Eigen::VectorXd& y) const { return w * y + b; }
};

/// Builds the reference decoder against a forward operator and source:
///  - pseudo_inverse: Moore-Penrose inverse of the linear map (linear ops only)
///  - conjugate_mean: posterior mean under the moment-matched Gaussian prior
///    (linear ops only)
///  - trained_linear: ridge least squares on seeded simulated pairs
ReferenceDecoder make_reference_decoder(ReferenceKind kind, const ForwardOperator& op,
                                        const GaussianMixture& source,
                                        std::uint64_t seed = 0);

Eigen::VectorXd reference_decode(const Eigen::VectorXd& y, const ForwardOperator& op,
                                 const ReferenceDecoder& dec);

enum class SamplerKind { ReverseSde, PfOdeEuler, PfOdeRk4, PfOdePC };
enum class StartMode { Full, Adaptive };

struct DecoderConfig {
    GuidanceConfig guidance;
    SamplerKind sampler = SamplerKind::ReverseSde;
    StartMode start = StartMode::Full;
    int steps = 0;   // ODE integration steps; 0 means the schedule step count
    int chains = 1;

    void validate() const;
};

struct DiagnosticsRow {
    int step;
    double residual_norm;
    double confirm_norm;
    double state_norm;
};

void write_diagnostics_csv(const std::string& path, const std::vector<DiagnosticsRow>& rows);

using LogDensityFn = std::function<double(const Eigen::VectorXd&)>;

struct DecodeResult {
    Eigen::VectorXd x_hat;       // ensemble maximum-posterior sample when a log
                                 // prior is supplied, otherwise chain 0's final state
    Eigen::MatrixXd ensemble;    // chains x D final states
    std::vector<DiagnosticsRow> diagnostics;  // chain 0
    int start_index = 0;
    int steps_used = 0;
};

struct AdaptiveStart {
    int start_index;
    Eigen::VectorXd init;
};

/// Channel-quality-matched sampling start (VP schedules): the smallest step i
/// with 1 - abar_i >= vhat, initialized at sqrt(abar_i)*x_{0|y} +
/// sqrt(1-abar_i)*eps.
AdaptiveStart adaptive_start(const Eigen::VectorXd& y, const ForwardOperator& op,
                             const NoiseSchedule& sched, const ReferenceDecoder& dec,
                             std::uint64_t seed);

/// Measurement-guided diffusion decoding with the confirming constraint:
/// the sampler runs on
///   s_theta + gamma * grad(-||y - H(E(xhat_{0|t}))||^2)
///           + lambda * grad(-||x_{0|y} - xtilde_{0|t}||^2),
/// where xtilde_{0|t} is the reference decode of the noiseless round-trip
/// H^dagger(H(E(xhat_{0|t}))). The reference decoder may be omitted when
/// lambda = 0 and start mode is Full.
DecodeResult diffcom_decode(const Eigen::VectorXd& y, const ForwardOperator& op,
                            const ScoreField& prior, const DecoderConfig& cfg,
                            const ReferenceDecoder* dec, std::uint64_t seed,
                            const LogDensityFn& log_prior = nullptr);

struct BlindDecodeResult {
    Eigen::VectorXd x_hat;
    Eigen::VectorXd h_hat;
    Eigen::MatrixXd ensemble_x;
    Eigen::MatrixXd ensemble_h;
    std::vector<DiagnosticsRow> diagnostics;
};

/// Joint (x, h) decoding: coupled reverse samplers driven by blind_dps_step.
/// Both schedules must be VP with the same step count. When both log priors
/// are supplied, (x_hat, h_hat) is the joint maximum-posterior sample of the
/// final ensemble.
BlindDecodeResult blind_diffcom_decode(const Eigen::VectorXd& y,
                                       const GainOperatorFamily& fam,
                                       const ScoreField& prior_x,
                                       const ScoreField& prior_h,
                                       const DecoderConfig& cfg, std::uint64_t seed,
                                       const LogDensityFn& log_prior_x = nullptr,
                                       const LogDensityFn& log_prior_h = nullptr);

}  // namespace semcom
