#pragma once

#include <cstdint>
#include <optional>
#include <variant>

#include <Eigen/Dense>

#include "semcom/gmm.hpp"
#include "semcom/mlp.hpp"
#include "semcom/rng.hpp"

namespace semcom {

struct LinearEncoder {
    Eigen::MatrixXd matrix;                 // m x D
    std::optional<Eigen::VectorXd> bias;    // m

    Eigen::VectorXd apply(const Eigen::VectorXd& x) const;
    static LinearEncoder identity(int dim);
};

/// Small fully-connected encoder (the "highly nonlinear" operator option).
struct MlpEncoder {
    Mlp mlp;

    static MlpEncoder random(int in_dim, int out_dim, int width, std::uint64_t seed);
    Eigen::VectorXd apply(const Eigen::VectorXd& x) const;
    Eigen::MatrixXd jacobian(const Eigen::VectorXd& x) const;
};

using Encoder = std::variant<LinearEncoder, MlpEncoder>;

Eigen::VectorXd encode(const Encoder& enc, const Eigen::VectorXd& x);
Eigen::MatrixXd encoder_jacobian(const Encoder& enc, const Eigen::VectorXd& x);
int encoder_input_dim(const Encoder& enc);
int encoder_output_dim(const Encoder& enc);
bool encoder_is_linear(const Encoder& enc);

/// Scales z so the mean squared amplitude over all entries is exactly 1.
Eigen::VectorXd power_normalize(const Eigen::VectorXd& z);
Eigen::MatrixXd power_normalize(const Eigen::MatrixXd& z);

/// Adds white Gaussian noise at the requested SNR (input assumed unit power):
/// sigma_n^2 = 10^(-snr_db/10). An infinite snr_db returns z unchanged.
Eigen::VectorXd awgn(const Eigen::VectorXd& z, double snr_db, std::uint64_t seed);

/// Multipath channel state: real tap gains; per-tap scale sigma_h calibrated
/// so that a Rayleigh draw has E[sum h_l^2] = 1.
struct ChannelState {
    Eigen::VectorXd taps;  // L >= 1
    double sigma_h = 0.0;

    int tap_count() const { return static_cast<int>(taps.size()); }
    static ChannelState fixed(Eigen::VectorXd taps);
    /// |CN(0, 1/L)| per tap: h_l = sqrt(g_re^2 + g_im^2), g ~ N(0, 1/(2L)).
    static ChannelState draw_rayleigh(int taps, std::uint64_t seed);
};

/// L = 1: y = h*z + n. L > 1: circular convolution with the taps, then AWGN.
/// The noise stream matches awgn() under the same seed.
Eigen::VectorXd fading(const Eigen::VectorXd& z, const ChannelState& state, double snr_db,
                       std::uint64_t seed);

enum class ChannelKind { Identity, Awgn, Fading };

struct ChannelSpec {
    ChannelKind kind = ChannelKind::Awgn;
    double snr_db = 10.0;
    int taps = 1;
    std::optional<Eigen::VectorXd> gains;  // fixed taps; otherwise drawn
    std::uint64_t gain_seed = 0;
};

/// Composition A = H o E with explicit power normalization at the channel
/// input: apply(x) = H(rho * E(x)) + n, rho fixed at composition time so the
/// encoded signal has unit average power under the calibration source.
class ForwardOperator {
public:
    static ForwardOperator compose(Encoder enc, const ChannelSpec& chan, double power_scale);
    /// Calibrates the power scale against a source distribution (closed form
    /// for linear encoders, seeded Monte Carlo otherwise).
    static ForwardOperator compose_calibrated(Encoder enc, const ChannelSpec& chan,
                                              const GaussianMixture& source,
                                              std::uint64_t calib_seed = 0);

    int input_dim() const { return encoder_input_dim(enc_); }
    int output_dim() const;
    double cbr() const { return double(output_dim()) / input_dim(); }
    double sigma_n() const { return sigma_n_; }
    double power_scale() const { return power_scale_; }
    const Eigen::VectorXd& gains() const { return state_.taps; }
    void set_gains(Eigen::VectorXd taps);
    const Encoder& encoder() const { return enc_; }
    ChannelKind channel_kind() const { return kind_; }

    /// Stochastic application: H(rho E(x)) + n.
    Eigen::VectorXd apply(const Eigen::VectorXd& x, RngStream& noise) const;
    Eigen::VectorXd apply(const Eigen::VectorXd& x, std::uint64_t seed) const;
    /// Noiseless mean for the fixed channel state.
    Eigen::VectorXd mean_apply(const Eigen::VectorXd& x) const;
    /// rho * E(x) (the channel input).
    Eigen::VectorXd latent(const Eigen::VectorXd& x) const;
    /// H z and its regularized pseudo-inverse (gain g inverts as g/(g^2+1e-8)).
    Eigen::VectorXd channel_apply(const Eigen::VectorXd& z) const;
    Eigen::VectorXd channel_pinv(const Eigen::VectorXd& z) const;

    Eigen::MatrixXd mean_jacobian(const Eigen::VectorXd& x) const;
    bool is_linear() const { return encoder_is_linear(enc_); }
    /// Full matrix/offset of the noiseless map when the encoder is linear.
    std::pair<Eigen::MatrixXd, Eigen::VectorXd> linear_map() const;

private:
    Encoder enc_;
    ChannelKind kind_ = ChannelKind::Awgn;
    ChannelState state_;
    double power_scale_ = 1.0;
    double sigma_n_ = 0.0;

    Eigen::MatrixXd channel_matrix() const;
};

/// kappa(A): ratio of the largest to the smallest nonzero singular value.
double condition_number(const Eigen::MatrixXd& a);

}  // namespace semcom
