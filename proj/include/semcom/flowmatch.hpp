#pragma once

#include <functional>
#include <utility>

#include <Eigen/Dense>

#include "semcom/gmm.hpp"
#include "semcom/score_net.hpp"

namespace semcom {

/// Time convention here runs opposite to diffusion: t = 0 is the prior
/// N(0, I), t = 1 the data distribution; transport integrates forward.
using VelocityFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&, double)>;

struct FlowPair {
    Eigen::VectorXd x_t;       // (1-t) x0 + t x1
    Eigen::VectorXd velocity;  // x1 - x0
};

FlowPair fm_pair(const Eigen::VectorXd& x0, const Eigen::VectorXd& x1, double t);

/// Monte Carlo flow-matching loss E ||v(x_t, t) - v_theta(x_t, t)||^2 over
/// t ~ U[0,1], x0 ~ N(0,I), x1 ~ data.
double fm_loss(const VelocityFn& vnet, const GaussianMixture& data, int batch,
               std::uint64_t seed);
double fm_loss(const ScoreNetwork& vnet, const GaussianMixture& data, int batch,
               std::uint64_t seed);

enum class FlowMethod { Euler, Rk4 };

/// Deterministic transport of a batch along dx/dt = v(x, t), t: 0 -> 1.
Eigen::MatrixXd fm_transport(const VelocityFn& vnet, const Eigen::MatrixXd& x0_batch,
                             int steps, FlowMethod method);

/// Consistency-model output head c(x, t) = c_skip(t) x + c_out(t) F(x, t) with
///   c_skip(t) = sd^2 / ((t-xi)^2 + sd^2),
///   c_out(t)  = sd (t-xi) / sqrt((t-xi)^2 + sd^2),
/// so that c_skip(xi) = 1 and c_out(xi) = 0 exactly.
class ConsistencyHead {
public:
    using InnerFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&, double)>;

    ConsistencyHead(double xi, double sigma_data, InnerFn inner);
    ConsistencyHead(double xi, double sigma_data, const ScoreNetwork& inner);

    double xi() const { return xi_; }
    double c_skip(double t) const;
    double c_out(double t) const;
    Eigen::VectorXd apply(const Eigen::VectorXd& x, double t) const;

private:
    double xi_;
    double sigma_data_;
    InnerFn inner_;
};

Eigen::VectorXd consistency_apply(const ConsistencyHead& head, const Eigen::VectorXd& x,
                                  double t);

}  // namespace semcom
