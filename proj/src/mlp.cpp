#include "semcom/mlp.hpp"

#include <cmath>
#include <stdexcept>

#include "semcom/rng.hpp"

namespace semcom {

void MlpGrads::setZero() {
    for (auto& m : w) m.setZero();
    for (auto& v : b) v.setZero();
}

void MlpGrads::axpy(double alpha, const MlpGrads& other) {
    for (size_t l = 0; l < w.size(); ++l) {
        w[l].noalias() += alpha * other.w[l];
        b[l].noalias() += alpha * other.b[l];
    }
}

void MlpGrads::scale(double alpha) {
    for (auto& m : w) m *= alpha;
    for (auto& v : b) v *= alpha;
}

double MlpGrads::squaredNorm() const {
    double s = 0.0;
    for (const auto& m : w) s += m.squaredNorm();
    for (const auto& v : b) s += v.squaredNorm();
    return s;
}

Mlp::Mlp(std::vector<int> layer_sizes, Activation act, std::uint64_t seed) : act_(act) {
    if (layer_sizes.size() < 2) throw std::invalid_argument("Mlp: need input and output sizes");
    RngStream rng = RngStream::for_chain(seed, 0, "mlp-init");
    for (size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
        const int rows = layer_sizes[l + 1], cols = layer_sizes[l];
        if (rows < 1 || cols < 1) throw std::invalid_argument("Mlp: bad layer size");
        Eigen::MatrixXd m(rows, cols);
        const double s = 1.0 / std::sqrt(double(cols));
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c) m(r, c) = s * rng.normal();
        w_.push_back(std::move(m));
        b_.push_back(Eigen::VectorXd::Zero(rows));
    }
}

int Mlp::parameter_count() const {
    int n = 0;
    for (size_t l = 0; l < w_.size(); ++l)
        n += static_cast<int>(w_[l].size() + b_[l].size());
    return n;
}

Eigen::VectorXd Mlp::parameters() const {
    Eigen::VectorXd theta(parameter_count());
    int pos = 0;
    for (size_t l = 0; l < w_.size(); ++l) {
        for (int c = 0; c < w_[l].cols(); ++c)
            for (int r = 0; r < w_[l].rows(); ++r) theta[pos++] = w_[l](r, c);
        for (int r = 0; r < b_[l].size(); ++r) theta[pos++] = b_[l][r];
    }
    return theta;
}

void Mlp::set_parameters(const Eigen::VectorXd& theta) {
    if (theta.size() != parameter_count())
        throw std::invalid_argument("set_parameters: size mismatch");
    int pos = 0;
    for (size_t l = 0; l < w_.size(); ++l) {
        for (int c = 0; c < w_[l].cols(); ++c)
            for (int r = 0; r < w_[l].rows(); ++r) w_[l](r, c) = theta[pos++];
        for (int r = 0; r < b_[l].size(); ++r) b_[l][r] = theta[pos++];
    }
}

bool Mlp::parameters_finite() const {
    for (const auto& m : w_)
        if (!m.allFinite()) return false;
    for (const auto& v : b_)
        if (!v.allFinite()) return false;
    return true;
}

MlpGrads Mlp::zero_grads() const {
    MlpGrads g;
    for (size_t l = 0; l < w_.size(); ++l) {
        g.w.push_back(Eigen::MatrixXd::Zero(w_[l].rows(), w_[l].cols()));
        g.b.push_back(Eigen::VectorXd::Zero(b_[l].size()));
    }
    return g;
}

Eigen::VectorXd Mlp::forward(const Eigen::VectorXd& in) const {
    Eigen::VectorXd h = in;
    const int L = layer_count();
    for (int l = 0; l < L; ++l) {
        Eigen::VectorXd z = w_[l] * h + b_[l];
        if (l + 1 < L && act_ == Activation::Tanh) z = z.array().tanh();
        h = std::move(z);
    }
    return h;
}

Eigen::VectorXd Mlp::forward(const Eigen::VectorXd& in, MlpTape& tape) const {
    const int L = layer_count();
    tape.input = in;
    tape.z.resize(L);
    tape.h.resize(L);
    const Eigen::VectorXd* prev = &tape.input;
    for (int l = 0; l < L; ++l) {
        tape.z[l].noalias() = w_[l] * (*prev);
        tape.z[l] += b_[l];
        if (l + 1 < L && act_ == Activation::Tanh)
            tape.h[l] = tape.z[l].array().tanh();
        else
            tape.h[l] = tape.z[l];
        prev = &tape.h[l];
    }
    return tape.h.back();
}

void Mlp::backward(const MlpTape& tape, const Eigen::VectorXd& gout, MlpGrads& g) const {
    const int L = layer_count();
    Eigen::VectorXd gz = gout;
    for (int l = L - 1; l >= 0; --l) {
        if (l + 1 < L && act_ == Activation::Tanh)
            gz = gz.cwiseProduct(Eigen::VectorXd::Ones(gz.size()) -
                                 tape.h[l].cwiseProduct(tape.h[l]));
        const Eigen::VectorXd& hin = (l == 0) ? tape.input : tape.h[l - 1];
        g.w[l].noalias() += gz * hin.transpose();
        g.b[l].noalias() += gz;
        if (l > 0) gz = w_[l].transpose() * gz;
    }
}

Eigen::VectorXd Mlp::jvp(MlpTape& tape, const Eigen::VectorXd& din) const {
    const int L = layer_count();
    tape.du = din;
    tape.zeta.resize(L);
    tape.u.resize(L);
    const Eigen::VectorXd* prev = &tape.du;
    for (int l = 0; l < L; ++l) {
        tape.zeta[l].noalias() = w_[l] * (*prev);
        if (l + 1 < L && act_ == Activation::Tanh) {
            // phi'(z) = 1 - h^2
            tape.u[l] = tape.zeta[l].cwiseProduct(
                Eigen::VectorXd::Ones(tape.h[l].size()) -
                tape.h[l].cwiseProduct(tape.h[l]));
        } else {
            tape.u[l] = tape.zeta[l];
        }
        prev = &tape.u[l];
    }
    return tape.u.back();
}

void Mlp::jvp_backward(const MlpTape& tape, const Eigen::VectorXd& gout,
                       const Eigen::VectorXd& gu, MlpGrads& g) const {
    const int L = layer_count();
    Eigen::VectorXd gh = gout;   // adjoint of h_l
    Eigen::VectorXd guv = gu;    // adjoint of u_l
    for (int l = L - 1; l >= 0; --l) {
        Eigen::VectorXd gz, gzeta;
        if (l + 1 < L && act_ == Activation::Tanh) {
            const Eigen::VectorXd phi1 =
                Eigen::VectorXd::Ones(tape.h[l].size()) - tape.h[l].cwiseProduct(tape.h[l]);
            // phi''(z) = -2 h phi'(z)
            const Eigen::VectorXd phi2 = -2.0 * tape.h[l].cwiseProduct(phi1);
            gz = gh.cwiseProduct(phi1) + guv.cwiseProduct(phi2).cwiseProduct(tape.zeta[l]);
            gzeta = guv.cwiseProduct(phi1);
        } else {
            gz = gh;
            gzeta = guv;
        }
        const Eigen::VectorXd& hin = (l == 0) ? tape.input : tape.h[l - 1];
        const Eigen::VectorXd& uin = (l == 0) ? tape.du : tape.u[l - 1];
        g.w[l].noalias() += gz * hin.transpose();
        g.w[l].noalias() += gzeta * uin.transpose();
        g.b[l].noalias() += gz;
        if (l > 0) {
            gh = w_[l].transpose() * gz;
            guv = w_[l].transpose() * gzeta;
        }
    }
}

void Mlp::apply_update(const MlpGrads& g, double step) {
    for (size_t l = 0; l < w_.size(); ++l) {
        w_[l].noalias() += step * g.w[l];
        b_[l].noalias() += step * g.b[l];
    }
}

}  // namespace semcom
