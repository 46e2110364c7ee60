#include "semcom/channel.hpp"

#include <cmath>
#include <stdexcept>

namespace semcom {

Eigen::VectorXd LinearEncoder::apply(const Eigen::VectorXd& x) const {
    if (x.size() != matrix.cols()) throw std::invalid_argument("encode: shape mismatch");
    Eigen::VectorXd z = matrix * x;
    if (bias) z += *bias;
    return z;
}

LinearEncoder LinearEncoder::identity(int dim) {
    return LinearEncoder{Eigen::MatrixXd::Identity(dim, dim), std::nullopt};
}

MlpEncoder MlpEncoder::random(int in_dim, int out_dim, int width, std::uint64_t seed) {
    return MlpEncoder{Mlp({in_dim, width, width, out_dim}, Activation::Tanh, seed)};
}

Eigen::VectorXd MlpEncoder::apply(const Eigen::VectorXd& x) const {
    if (x.size() != mlp.input_dim()) throw std::invalid_argument("encode: shape mismatch");
    return mlp.forward(x);
}

Eigen::MatrixXd MlpEncoder::jacobian(const Eigen::VectorXd& x) const {
    MlpTape tape;
    mlp.forward(x, tape);
    Eigen::MatrixXd jac(mlp.output_dim(), mlp.input_dim());
    Eigen::VectorXd din = Eigen::VectorXd::Zero(mlp.input_dim());
    MlpTape t2 = tape;
    for (int j = 0; j < mlp.input_dim(); ++j) {
        din.setZero();
        din[j] = 1.0;
        jac.col(j) = mlp.jvp(t2, din);
    }
    return jac;
}

Eigen::VectorXd encode(const Encoder& enc, const Eigen::VectorXd& x) {
    return std::visit([&](const auto& e) { return e.apply(x); }, enc);
}

Eigen::MatrixXd encoder_jacobian(const Encoder& enc, const Eigen::VectorXd& x) {
    if (const auto* lin = std::get_if<LinearEncoder>(&enc)) return lin->matrix;
    return std::get<MlpEncoder>(enc).jacobian(x);
}

int encoder_input_dim(const Encoder& enc) {
    if (const auto* lin = std::get_if<LinearEncoder>(&enc))
        return static_cast<int>(lin->matrix.cols());
    return std::get<MlpEncoder>(enc).mlp.input_dim();
}

int encoder_output_dim(const Encoder& enc) {
    if (const auto* lin = std::get_if<LinearEncoder>(&enc))
        return static_cast<int>(lin->matrix.rows());
    return std::get<MlpEncoder>(enc).mlp.output_dim();
}

bool encoder_is_linear(const Encoder& enc) {
    return std::holds_alternative<LinearEncoder>(enc);
}

Eigen::VectorXd power_normalize(const Eigen::VectorXd& z) {
    const double p = z.squaredNorm() / z.size();
    if (p == 0.0) throw std::invalid_argument("power_normalize: all-zero input");
    return z / std::sqrt(p);
}

Eigen::MatrixXd power_normalize(const Eigen::MatrixXd& z) {
    const double p = z.squaredNorm() / z.size();
    if (p == 0.0) throw std::invalid_argument("power_normalize: all-zero input");
    return z / std::sqrt(p);
}

namespace {
double snr_to_sigma2(double snr_db) {
    if (std::isinf(snr_db) && snr_db > 0) return 0.0;
    return std::pow(10.0, -snr_db / 10.0);
}
}  // namespace

Eigen::VectorXd awgn(const Eigen::VectorXd& z, double snr_db, std::uint64_t seed) {
    const double s2 = snr_to_sigma2(snr_db);
    if (s2 == 0.0) return z;
    RngStream rng = RngStream::for_chain(seed, 0, "awgn");
    return z + std::sqrt(s2) * rng.normal_vec(z.size());
}

ChannelState ChannelState::fixed(Eigen::VectorXd taps) {
    if (taps.size() < 1) throw std::invalid_argument("ChannelState: need L >= 1 taps");
    ChannelState s;
    s.sigma_h = 1.0 / std::sqrt(2.0 * taps.size());
    s.taps = std::move(taps);
    return s;
}

ChannelState ChannelState::draw_rayleigh(int taps, std::uint64_t seed) {
    if (taps < 1) throw std::invalid_argument("ChannelState: need L >= 1 taps");
    ChannelState s;
    s.sigma_h = 1.0 / std::sqrt(2.0 * taps);  // E[sum |h_l|^2] = 1
    s.taps.resize(taps);
    RngStream rng = RngStream::for_chain(seed, 0, "rayleigh");
    for (int l = 0; l < taps; ++l) {
        const double re = s.sigma_h * rng.normal();
        const double im = s.sigma_h * rng.normal();
        s.taps[l] = std::sqrt(re * re + im * im);
    }
    return s;
}

namespace {
Eigen::VectorXd circular_convolve(const Eigen::VectorXd& z, const Eigen::VectorXd& taps) {
    const int m = static_cast<int>(z.size()), L = static_cast<int>(taps.size());
    Eigen::VectorXd out = Eigen::VectorXd::Zero(m);
    for (int i = 0; i < m; ++i)
        for (int l = 0; l < L; ++l) out[i] += taps[l] * z[((i - l) % m + m) % m];
    return out;
}
}  // namespace

Eigen::VectorXd fading(const Eigen::VectorXd& z, const ChannelState& state, double snr_db,
                       std::uint64_t seed) {
    Eigen::VectorXd y = state.tap_count() == 1 ? (state.taps[0] * z).eval()
                                               : circular_convolve(z, state.taps);
    const double s2 = snr_to_sigma2(snr_db);
    if (s2 == 0.0) return y;
    RngStream rng = RngStream::for_chain(seed, 0, "awgn");
    return y + std::sqrt(s2) * rng.normal_vec(y.size());
}

ForwardOperator ForwardOperator::compose(Encoder enc, const ChannelSpec& chan,
                                         double power_scale) {
    ForwardOperator op;
    op.enc_ = std::move(enc);
    op.kind_ = chan.kind;
    op.power_scale_ = power_scale;
    op.sigma_n_ = chan.kind == ChannelKind::Identity
                      ? 0.0
                      : std::sqrt(snr_to_sigma2(chan.snr_db));
    if (chan.kind == ChannelKind::Fading) {
        op.state_ = chan.gains ? ChannelState::fixed(*chan.gains)
                               : ChannelState::draw_rayleigh(chan.taps, chan.gain_seed);
    } else {
        op.state_ = ChannelState::fixed(Eigen::VectorXd::Ones(1));
    }
    return op;
}

ForwardOperator ForwardOperator::compose_calibrated(Encoder enc, const ChannelSpec& chan,
                                                    const GaussianMixture& source,
                                                    std::uint64_t calib_seed) {
    double p;
    if (encoder_is_linear(enc)) {
        const auto& lin = std::get<LinearEncoder>(enc);
        p = 0.0;
        for (int k = 0; k < source.components(); ++k) {
            Eigen::VectorXd mz = lin.matrix * source.mean(k);
            if (lin.bias) mz += *lin.bias;
            p += source.weights()[k] *
                 (mz.squaredNorm() +
                  (lin.matrix * source.covariance(k) * lin.matrix.transpose()).trace());
        }
        p /= lin.matrix.rows();
    } else {
        const int n = 20000;
        auto [xs, comps] = source.sample(n, splitmix64(calib_seed) ^ 0x70776572ULL);
        p = 0.0;
        for (int r = 0; r < n; ++r)
            p += encode(enc, xs.row(r)).squaredNorm();
        p /= n * encoder_output_dim(enc);
    }
    if (p <= 0.0) throw std::invalid_argument("compose_calibrated: zero encoder power");
    return compose(std::move(enc), chan, 1.0 / std::sqrt(p));
}

int ForwardOperator::output_dim() const { return encoder_output_dim(enc_); }

void ForwardOperator::set_gains(Eigen::VectorXd taps) {
    state_ = ChannelState::fixed(std::move(taps));
}

Eigen::VectorXd ForwardOperator::latent(const Eigen::VectorXd& x) const {
    return power_scale_ * encode(enc_, x);
}

Eigen::VectorXd ForwardOperator::channel_apply(const Eigen::VectorXd& z) const {
    if (kind_ != ChannelKind::Fading) return z;
    if (state_.tap_count() == 1) return state_.taps[0] * z;
    return circular_convolve(z, state_.taps);
}

Eigen::VectorXd ForwardOperator::channel_pinv(const Eigen::VectorXd& z) const {
    if (kind_ != ChannelKind::Fading) return z;
    if (state_.tap_count() == 1) {
        const double g = state_.taps[0];
        return (g / (g * g + 1e-8)) * z;
    }
    const Eigen::MatrixXd h = channel_matrix();
    return h.completeOrthogonalDecomposition().pseudoInverse() * z;
}

Eigen::MatrixXd ForwardOperator::channel_matrix() const {
    const int m = output_dim();
    Eigen::MatrixXd h = Eigen::MatrixXd::Identity(m, m);
    if (kind_ == ChannelKind::Fading) {
        if (state_.tap_count() == 1) {
            h *= state_.taps[0];
        } else {
            h.setZero();
            for (int i = 0; i < m; ++i)
                for (int l = 0; l < state_.tap_count(); ++l)
                    h(i, ((i - l) % m + m) % m) += state_.taps[l];
        }
    }
    return h;
}

Eigen::VectorXd ForwardOperator::mean_apply(const Eigen::VectorXd& x) const {
    return channel_apply(latent(x));
}

Eigen::VectorXd ForwardOperator::apply(const Eigen::VectorXd& x, RngStream& noise) const {
    Eigen::VectorXd y = mean_apply(x);
    if (sigma_n_ > 0.0) y += sigma_n_ * noise.normal_vec(y.size());
    return y;
}

Eigen::VectorXd ForwardOperator::apply(const Eigen::VectorXd& x, std::uint64_t seed) const {
    RngStream rng = RngStream::for_chain(seed, 0, "awgn");
    return apply(x, rng);
}

Eigen::MatrixXd ForwardOperator::mean_jacobian(const Eigen::VectorXd& x) const {
    return channel_matrix() * (power_scale_ * encoder_jacobian(enc_, x));
}

std::pair<Eigen::MatrixXd, Eigen::VectorXd> ForwardOperator::linear_map() const {
    if (!is_linear()) throw std::invalid_argument("linear_map: nonlinear encoder");
    const auto& lin = std::get<LinearEncoder>(enc_);
    const Eigen::MatrixXd a = channel_matrix() * (power_scale_ * lin.matrix);
    Eigen::VectorXd off = Eigen::VectorXd::Zero(output_dim());
    if (lin.bias) off = channel_apply(power_scale_ * *lin.bias);
    return {a, off};
}

double condition_number(const Eigen::MatrixXd& a) {
    if (a.size() == 0 || a.norm() == 0.0)
        throw std::invalid_argument("condition_number: zero matrix");
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
    const Eigen::VectorXd& sv = svd.singularValues();
    const double tol = std::max(a.rows(), a.cols()) * sv[0] *
                       std::numeric_limits<double>::epsilon();
    double smallest = sv[0];
    for (int i = 0; i < sv.size(); ++i)
        if (sv[i] > tol) smallest = sv[i];
    return sv[0] / smallest;
}

}  // namespace semcom
