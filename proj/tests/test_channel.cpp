#include <doctest.h>

#include <cmath>

#include "semcom/channel.hpp"
#include "semcom/metrics.hpp"
#include "semcom/rng.hpp"

using namespace semcom;

TEST_CASE("encode basics and the adjoint test") {
    const auto id = LinearEncoder::identity(3);
    Eigen::VectorXd x(3);
    x << 1, 2, 3;
    CHECK((id.apply(x) - x).norm() == 0.0);

    LinearEncoder row{Eigen::MatrixXd(1, 2), std::nullopt};
    row.matrix << 1, 0;
    Eigen::VectorXd x2(2);
    x2 << 3, 7;
    CHECK(row.apply(x2)[0] == 3.0);

    CHECK_THROWS_AS(row.apply(x), std::invalid_argument);

    RngStream rng(3);
    Eigen::MatrixXd m(4, 6);
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 6; ++c) m(r, c) = rng.normal();
    for (int trial = 0; trial < 50; ++trial) {
        const Eigen::VectorXd v = rng.normal_vec(6);
        const Eigen::VectorXd u = rng.normal_vec(4);
        const double lhs = (m * v).dot(u);
        const double rhs = v.dot(m.transpose() * u);
        CHECK(std::abs(lhs - rhs) <= 1e-10 * std::max(1.0, std::abs(lhs)));
    }
}

TEST_CASE("power_normalize") {
    Eigen::VectorXd z(2);
    z << 2, 0;
    const Eigen::VectorXd n = power_normalize(z);
    CHECK(n[0] == doctest::Approx(std::sqrt(2.0)));
    CHECK(n.squaredNorm() / 2 == doctest::Approx(1.0).epsilon(1e-12));

    Eigen::VectorXd unit(2);
    unit << 1, -1;
    CHECK((power_normalize(unit) - unit).norm() == 0.0);

    RngStream rng(1);
    Eigen::MatrixXd batch(1000, 1000);
    for (int r = 0; r < batch.rows(); ++r)
        for (int c = 0; c < batch.cols(); ++c) batch(r, c) = 1.7 * rng.normal();
    const auto nb = power_normalize(batch);
    CHECK(std::abs(nb.squaredNorm() / nb.size() - 1.0) <= 1e-3);

    const Eigen::VectorXd zero3 = Eigen::VectorXd::Zero(3);
    CHECK_THROWS_AS(power_normalize(zero3), std::invalid_argument);
}

TEST_CASE("awgn hits the requested SNR within 0.1 dB over 1e6 symbols") {
    RngStream rng(2);
    Eigen::VectorXd z(1000000);
    for (int i = 0; i < z.size(); ++i) z[i] = rng.normal();
    const Eigen::VectorXd zn = power_normalize(z);
    const Eigen::VectorXd y = awgn(zn, 10.0, 4);
    CHECK(std::abs(measured_snr(zn, y) - 10.0) <= 0.1);

    const Eigen::VectorXd clean = awgn(zn, std::numeric_limits<double>::infinity(), 4);
    CHECK((clean - zn).norm() == 0.0);
}

TEST_CASE("snr definition: 10 dB means noise variance 0.1") {
    // measured against the known noise draw rather than through the dB readout
    RngStream rng(9);
    Eigen::VectorXd z = Eigen::VectorXd::Zero(1000000);
    const Eigen::VectorXd y = awgn(z, 10.0, 7);
    const double var = y.squaredNorm() / y.size();
    CHECK(std::abs(var - 0.1) <= 3.0 * 0.1 * std::sqrt(2.0 / y.size()));
}

TEST_CASE("fading with unit gain equals awgn under the same seed") {
    RngStream rng(5);
    Eigen::VectorXd z(64);
    for (int i = 0; i < 64; ++i) z[i] = rng.normal();
    const auto state = ChannelState::fixed(Eigen::VectorXd::Ones(1));
    CHECK((fading(z, state, 7.0, 123) - awgn(z, 7.0, 123)).norm() == 0.0);
}

TEST_CASE("single tap equals a padded multi-tap response") {
    RngStream rng(6);
    Eigen::VectorXd z(32);
    for (int i = 0; i < 32; ++i) z[i] = rng.normal();
    Eigen::VectorXd padded = Eigen::VectorXd::Zero(4);
    padded[0] = 0.8;
    const auto one = ChannelState::fixed(Eigen::VectorXd::Constant(1, 0.8));
    const auto four = ChannelState::fixed(padded);
    CHECK((fading(z, one, 12.0, 9) - fading(z, four, 12.0, 9)).norm() == 0.0);
}

TEST_CASE("rayleigh gain power is calibrated to one") {
    for (int taps : {1, 4}) {
        double acc = 0.0;
        const int n = 100000;
        for (int s = 0; s < n; ++s)
            acc += ChannelState::draw_rayleigh(taps, s).taps.squaredNorm();
        CHECK(std::abs(acc / n - 1.0) <= 0.01);
    }
}

TEST_CASE("fading with unit gain is distribution-identical to awgn (KS)") {
    RngStream rng(7);
    Eigen::VectorXd z(100000);
    for (int i = 0; i < z.size(); ++i) z[i] = rng.normal();
    const Eigen::VectorXd zn = power_normalize(z);
    const auto state = ChannelState::fixed(Eigen::VectorXd::Ones(1));
    const Eigen::VectorXd a = awgn(zn, 5.0, 100);
    const Eigen::VectorXd b = fading(zn, state, 5.0, 200);
    std::vector<double> va(a.data(), a.data() + a.size());
    std::vector<double> vb(b.data(), b.data() + b.size());
    CHECK(ks_statistic(va, vb) < ks_critical(0.01, va.size(), vb.size()));
}

TEST_CASE("compose: identity operator, cbr, and the reference operating point") {
    ChannelSpec noiseless;
    noiseless.kind = ChannelKind::Identity;
    const auto op = ForwardOperator::compose(LinearEncoder::identity(3), noiseless, 1.0);
    Eigen::VectorXd x(3);
    x << 1, -2, 0.5;
    CHECK((op.apply(x, std::uint64_t(3)) - x).norm() == 0.0);
    CHECK(op.cbr() == 1.0);

    LinearEncoder half{Eigen::MatrixXd(1, 2), std::nullopt};
    half.matrix << 1, 0;
    const auto op2 = ForwardOperator::compose(half, noiseless, 1.0);
    CHECK(op2.cbr() == 0.5);

    // the evaluation operating point CBR 0.0208 corresponds to m/D = 1/48
    LinearEncoder comp{Eigen::MatrixXd::Ones(1, 48), std::nullopt};
    const auto op3 = ForwardOperator::compose(comp, noiseless, 1.0);
    CHECK(std::abs(op3.cbr() - 0.0208) <= 1e-4);
}

TEST_CASE("cbr ignores power normalization and noise level") {
    LinearEncoder enc{Eigen::MatrixXd::Ones(2, 4), std::nullopt};
    ChannelSpec c1;
    c1.kind = ChannelKind::Awgn;
    c1.snr_db = 0.0;
    ChannelSpec c2;
    c2.kind = ChannelKind::Awgn;
    c2.snr_db = 30.0;
    CHECK(ForwardOperator::compose(enc, c1, 0.1).cbr() ==
          ForwardOperator::compose(enc, c2, 17.0).cbr());
}

TEST_CASE("calibrated composition delivers the requested SNR end to end") {
    Eigen::VectorXd mu(2);
    mu << 1.0, -0.5;
    Eigen::MatrixXd cov(2, 2);
    cov << 1.5, 0.2, 0.2, 0.7;
    const auto source = GaussianMixture::single(mu, cov);
    LinearEncoder enc{Eigen::MatrixXd(2, 2), std::nullopt};
    enc.matrix << 1.2, -0.3, 0.4, 2.0;
    ChannelSpec chan;
    chan.kind = ChannelKind::Awgn;
    chan.snr_db = 10.0;
    const auto op = ForwardOperator::compose_calibrated(enc, chan, source);

    RngStream rng(11);
    RngStream noise = RngStream::for_chain(11, 0, "n");
    double sig = 0.0, err = 0.0;
    for (int k = 0; k < 200000; ++k) {
        const Eigen::VectorXd x = source.sample_one(rng);
        const Eigen::VectorXd clean = op.mean_apply(x);
        const Eigen::VectorXd y = op.apply(x, noise);
        sig += clean.squaredNorm();
        err += (y - clean).squaredNorm();
    }
    CHECK(std::abs(10.0 * std::log10(sig / err) - 10.0) <= 0.1);
}

TEST_CASE("condition_number basics and the power-iteration oracle") {
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(2, 2);
    d(0, 0) = 3.0;
    d(1, 1) = 1.0;
    CHECK(condition_number(d) == doctest::Approx(3.0));
    CHECK(condition_number(Eigen::MatrixXd::Identity(4, 4)) == doctest::Approx(1.0));
    CHECK_THROWS_AS(condition_number(Eigen::MatrixXd::Zero(2, 2)), std::invalid_argument);

    RngStream rng(13);
    Eigen::MatrixXd a(5, 3);
    for (int r = 0; r < 5; ++r)
        for (int c = 0; c < 3; ++c) a(r, c) = rng.normal();

    // oracle: power iteration on A^T A for sigma_max^2, inverse iteration for
    // sigma_min^2
    const Eigen::MatrixXd g = a.transpose() * a;
    Eigen::VectorXd v = Eigen::VectorXd::Ones(3).normalized();
    for (int it = 0; it < 20000; ++it) v = (g * v).normalized();
    const double smax2 = v.dot(g * v);
    const Eigen::MatrixXd ginv = g.inverse();
    Eigen::VectorXd u = Eigen::VectorXd::Ones(3).normalized();
    for (int it = 0; it < 20000; ++it) u = (ginv * u).normalized();
    const double smin2 = u.dot(g * u);
    const double oracle = std::sqrt(smax2 / smin2);

    CHECK(std::abs(condition_number(a) - oracle) / oracle <= 1e-6);
}
