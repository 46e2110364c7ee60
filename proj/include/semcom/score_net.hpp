#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "semcom/gmm.hpp"
#include "semcom/mlp.hpp"
#include "semcom/schedule.hpp"

namespace semcom {

enum class TimeEmbedding { AppendScalar, Sinusoidal4 };

/// Time-conditioned score network s_theta(x, t) over a noise-level coordinate
/// t in [0, 1]. The time coordinate enters through a fixed embedding appended
/// to x; all gradients are hand-written (see Mlp).
class ScoreNetwork {
public:
    ScoreNetwork(int dim, const std::vector<int>& hidden, Activation act,
                 TimeEmbedding emb, std::uint64_t seed);
    /// Default architecture: two tanh hidden layers, four sinusoidal time features.
    static ScoreNetwork make_default(int dim, int width, std::uint64_t seed);

    int dim() const { return dim_; }
    TimeEmbedding embedding() const { return emb_; }
    Mlp& mlp() { return mlp_; }
    const Mlp& mlp() const { return mlp_; }

    Eigen::VectorXd embed_time(double t) const;
    Eigen::VectorXd augment(const Eigen::VectorXd& x, double t) const;

    Eigen::VectorXd eval(const Eigen::VectorXd& x, double t) const;

    /// d(output)/d(x) (through the x slots only).
    Eigen::MatrixXd input_jacobian(const Eigen::VectorXd& x, double t) const;

    void save(const std::string& path) const;
    static ScoreNetwork load(const std::string& path);

private:
    ScoreNetwork() = default;
    int dim_ = 0;
    TimeEmbedding emb_ = TimeEmbedding::Sinusoidal4;
    Mlp mlp_;

    friend class NetScoreField;
};

int embedding_width(TimeEmbedding emb);

/// eps-parameterization conversion: eps = -sigma_t * score (and back).
Eigen::VectorXd score_to_eps(const Eigen::VectorXd& score, double sigma_t);
Eigen::VectorXd eps_to_score(const Eigen::VectorXd& eps, double sigma_t);

/// Compares the analytic parameter gradient of the probe loss 0.5*||s(x,t)||^2
/// against central finite differences over every parameter; returns the
/// maximum relative error.
double grad_check(const ScoreNetwork& net, const Eigen::VectorXd& x, double t, double step);

/// Monte Carlo denoising score matching loss at a single schedule step.
double dsm_loss_at(const ScoreNetwork& net, const GaussianMixture& gmm,
                   const NoiseSchedule& sched, int i, int batch, std::uint64_t seed);
/// DSM loss with the step drawn uniformly over schedule indices.
double dsm_loss(const ScoreNetwork& net, const GaussianMixture& gmm,
                const NoiseSchedule& sched, int batch, std::uint64_t seed);
/// Parameter gradient of dsm_loss_at (same sampling path as the loss).
Eigen::VectorXd dsm_grad_at(const ScoreNetwork& net, const GaussianMixture& gmm,
                            const NoiseSchedule& sched, int i, int batch,
                            std::uint64_t seed);

/// Implicit score matching estimate E[0.5*||s||^2 + tr(d s/d x)] over the given
/// samples (rows), probing the network at time coordinate t. The exact input
/// Jacobian costs one extra forward-mode pass per dimension, so D <= 3.
double ism_loss(const ScoreNetwork& net, const Eigen::MatrixXd& samples, double t);
Eigen::VectorXd ism_grad(const ScoreNetwork& net, const Eigen::MatrixXd& samples, double t);

struct TrainConfig {
    double learning_rate = 1e-3;
    int steps = 1000;
    int batch_size = 128;
    std::uint64_t seed = 0;
    double momentum = 0.0;  // plain gradient descent by default
    int eval_batch = 256;   // fixed held-out batch for the logged loss trace
};

struct TrainResult {
    ScoreNetwork net;
    Eigen::VectorXd eval_trace;  // loss on the fixed eval batch, one entry per step
};

/// Denoising-score-matching training with plain fixed-rate gradient descent.
/// Bit-reproducible per seed; throws on non-finite parameters.
TrainResult train_dsm(const ScoreNetwork& net, const GaussianMixture& gmm,
                      const NoiseSchedule& sched, const TrainConfig& cfg);

}  // namespace semcom
