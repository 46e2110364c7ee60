#include "semcom/flowmatch.hpp"

#include <cmath>
#include <stdexcept>

#include "semcom/rng.hpp"

namespace semcom {

FlowPair fm_pair(const Eigen::VectorXd& x0, const Eigen::VectorXd& x1, double t) {
    if (!(t >= 0.0 && t <= 1.0)) throw std::invalid_argument("fm_pair: t must be in [0,1]");
    if (x0.size() != x1.size()) throw std::invalid_argument("fm_pair: shape mismatch");
    return {(1.0 - t) * x0 + t * x1, x1 - x0};
}

double fm_loss(const VelocityFn& vnet, const GaussianMixture& data, int batch,
               std::uint64_t seed) {
    if (batch < 1) throw std::invalid_argument("fm_loss: batch must be >= 1");
    RngStream rng = RngStream::for_chain(seed, 0, "fm");
    const int d = data.dim();
    double acc = 0.0;
    for (int bidx = 0; bidx < batch; ++bidx) {
        const double t = rng.uniform();
        const Eigen::VectorXd x0 = rng.normal_vec(d);
        const Eigen::VectorXd x1 = data.sample_one(rng);
        const FlowPair p = fm_pair(x0, x1, t);
        acc += (p.velocity - vnet(p.x_t, t)).squaredNorm();
    }
    return acc / batch;
}

double fm_loss(const ScoreNetwork& vnet, const GaussianMixture& data, int batch,
               std::uint64_t seed) {
    return fm_loss([&](const Eigen::VectorXd& x, double t) { return vnet.eval(x, t); },
                   data, batch, seed);
}

Eigen::MatrixXd fm_transport(const VelocityFn& vnet, const Eigen::MatrixXd& x0_batch,
                             int steps, FlowMethod method) {
    if (steps < 1) throw std::invalid_argument("fm_transport: steps must be >= 1");
    Eigen::MatrixXd x = x0_batch;
    const double dt = 1.0 / steps;
    Eigen::VectorXd xc, k1, k2, k3, k4;
    for (int r = 0; r < x.rows(); ++r) {
        xc = x.row(r);
        double t = 0.0;
        for (int s = 0; s < steps; ++s) {
            if (method == FlowMethod::Euler) {
                xc += dt * vnet(xc, t);
            } else {
                k1 = vnet(xc, t);
                k2 = vnet(xc + 0.5 * dt * k1, t + 0.5 * dt);
                k3 = vnet(xc + 0.5 * dt * k2, t + 0.5 * dt);
                k4 = vnet(xc + dt * k3, t + dt);
                xc += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            }
            t += dt;
            if (!xc.allFinite())
                throw std::runtime_error("fm_transport: non-finite state at step " +
                                         std::to_string(s));
        }
        x.row(r) = xc.transpose();
    }
    return x;
}

ConsistencyHead::ConsistencyHead(double xi, double sigma_data, InnerFn inner)
    : xi_(xi), sigma_data_(sigma_data), inner_(std::move(inner)) {
    if (!(xi > 0.0)) throw std::invalid_argument("ConsistencyHead: xi must be > 0");
    if (!(sigma_data > 0.0))
        throw std::invalid_argument("ConsistencyHead: sigma_data must be > 0");
    // boundary conditions hold by construction; assert them anyway
    if (c_skip(xi_) != 1.0 || c_out(xi_) != 0.0)
        throw std::logic_error("ConsistencyHead: boundary conditions violated");
}

ConsistencyHead::ConsistencyHead(double xi, double sigma_data, const ScoreNetwork& inner)
    : ConsistencyHead(xi, sigma_data,
                      [net = inner](const Eigen::VectorXd& x, double t) {
                          return net.eval(x, t);
                      }) {}

double ConsistencyHead::c_skip(double t) const {
    const double d = t - xi_;
    return sigma_data_ * sigma_data_ / (d * d + sigma_data_ * sigma_data_);
}

double ConsistencyHead::c_out(double t) const {
    const double d = t - xi_;
    return sigma_data_ * d / std::sqrt(d * d + sigma_data_ * sigma_data_);
}

Eigen::VectorXd ConsistencyHead::apply(const Eigen::VectorXd& x, double t) const {
    if (t < xi_) throw std::invalid_argument("consistency_apply: t < xi");
    if (t == xi_) return x;
    return c_skip(t) * x + c_out(t) * inner_(x, t);
}

Eigen::VectorXd consistency_apply(const ConsistencyHead& head, const Eigen::VectorXd& x,
                                  double t) {
    return head.apply(x, t);
}

}  // namespace semcom
