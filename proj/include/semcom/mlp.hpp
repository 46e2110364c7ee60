#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace semcom {

enum class Activation { Tanh, Identity };

struct MlpGrads {
    std::vector<Eigen::MatrixXd> w;
    std::vector<Eigen::VectorXd> b;

    void setZero();
    void axpy(double alpha, const MlpGrads& other);  // this += alpha * other
    void scale(double alpha);
    double squaredNorm() const;
};

/// Forward-pass intermediates (and optional input-tangent intermediates)
/// kept for the hand-written backward passes.
struct MlpTape {
    Eigen::VectorXd input;
    std::vector<Eigen::VectorXd> z;  // pre-activations
    std::vector<Eigen::VectorXd> h;  // post-activations (h.back() = output)
    // tangent line (filled by jvp)
    Eigen::VectorXd du;
    std::vector<Eigen::VectorXd> zeta;  // tangent pre-activations
    std::vector<Eigen::VectorXd> u;     // tangent post-activations
};

/// Plain fully-connected network with explicit gradients. The nonlinearity is
/// applied to every layer except the last.
class Mlp {
public:
    Mlp() = default;
    /// He-style random init scaled by 1/sqrt(fan_in); biases zero.
    Mlp(std::vector<int> layer_sizes, Activation act, std::uint64_t seed);

    int input_dim() const { return w_.empty() ? 0 : static_cast<int>(w_.front().cols()); }
    int output_dim() const { return w_.empty() ? 0 : static_cast<int>(w_.back().rows()); }
    int layer_count() const { return static_cast<int>(w_.size()); }
    Activation activation() const { return act_; }

    const std::vector<Eigen::MatrixXd>& weights() const { return w_; }
    const std::vector<Eigen::VectorXd>& biases() const { return b_; }
    Eigen::MatrixXd& weight(int l) { return w_[l]; }
    Eigen::VectorXd& bias(int l) { return b_[l]; }

    int parameter_count() const;
    Eigen::VectorXd parameters() const;
    void set_parameters(const Eigen::VectorXd& theta);
    bool parameters_finite() const;

    MlpGrads zero_grads() const;

    Eigen::VectorXd forward(const Eigen::VectorXd& in) const;
    Eigen::VectorXd forward(const Eigen::VectorXd& in, MlpTape& tape) const;

    /// Accumulates d(loss)/d(params) into g given d(loss)/d(output).
    void backward(const MlpTape& tape, const Eigen::VectorXd& gout, MlpGrads& g) const;

    /// Directional derivative of the output along input tangent din;
    /// tangent intermediates are stored on the tape for jvp_backward.
    Eigen::VectorXd jvp(MlpTape& tape, const Eigen::VectorXd& din) const;

    /// Reverse pass over (forward + jvp): accumulates into g the parameter
    /// gradient of a scalar G with d(G)/d(output) = gout and
    /// d(G)/d(jvp output) = gu. Requires jvp() to have run on the tape.
    void jvp_backward(const MlpTape& tape, const Eigen::VectorXd& gout,
                      const Eigen::VectorXd& gu, MlpGrads& g) const;

    void apply_update(const MlpGrads& g, double step);  // params += step * g

private:
    std::vector<Eigen::MatrixXd> w_;
    std::vector<Eigen::VectorXd> b_;
    Activation act_ = Activation::Tanh;
};

}  // namespace semcom
