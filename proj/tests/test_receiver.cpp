#include <doctest.h>

#include <cmath>

#include "semcom/metrics.hpp"
#include "semcom/receiver.hpp"

using namespace semcom;

namespace {

Eigen::VectorXd vec1(double v) {
    Eigen::VectorXd x(1);
    x << v;
    return x;
}

ForwardOperator scalar_op(double sigma_n) {
    ChannelSpec chan;
    chan.kind = ChannelKind::Awgn;
    chan.snr_db = -10.0 * std::log10(sigma_n * sigma_n);
    return ForwardOperator::compose(LinearEncoder::identity(1), chan, 1.0);
}

}  // namespace

TEST_CASE("reference_decode basics") {
    ChannelSpec noiseless;
    noiseless.kind = ChannelKind::Identity;
    const auto op = ForwardOperator::compose(LinearEncoder::identity(2), noiseless, 1.0);
    const auto src = GaussianMixture::standard_normal(2);
    const auto dec = make_reference_decoder(ReferenceKind::PseudoInverse, op, src);
    Eigen::VectorXd y(2);
    y << 0.5, -1.0;
    CHECK((reference_decode(y, op, dec) - y).norm() <= 1e-12);
    CHECK(dec.vhat <= 1e-12);

    // conjugate scalar benchmark: prior N(0,1), A = 1, sigma_n = 1, y = 2 -> 1.0
    const auto op1 = scalar_op(1.0);
    const auto dec1 = make_reference_decoder(ReferenceKind::ConjugateMean, op1,
                                             GaussianMixture::standard_normal(1));
    CHECK(reference_decode(vec1(2.0), op1, dec1)[0] == doctest::Approx(1.0));
    CHECK(dec1.vhat == doctest::Approx(0.5));
}

TEST_CASE("pseudo-inverse property A A+ A = A on random operators") {
    RngStream rng(3);
    for (int trial = 0; trial < 5; ++trial) {
        Eigen::MatrixXd m(2, 4);
        for (int r = 0; r < 2; ++r)
            for (int c = 0; c < 4; ++c) m(r, c) = rng.normal();
        ChannelSpec noiseless;
        noiseless.kind = ChannelKind::Identity;
        const auto op = ForwardOperator::compose(LinearEncoder{m, std::nullopt}, noiseless, 1.0);
        const auto dec = make_reference_decoder(ReferenceKind::PseudoInverse, op,
                                                GaussianMixture::standard_normal(4));
        CHECK((m * dec.w * m - m).norm() <= 1e-8);
    }
}

TEST_CASE("trained_linear approaches the conjugate decoder on a linear problem") {
    const auto op = scalar_op(1.0);
    const auto src = GaussianMixture::standard_normal(1);
    const auto fitted = make_reference_decoder(ReferenceKind::TrainedLinear, op, src, 5);
    const auto exact = make_reference_decoder(ReferenceKind::ConjugateMean, op, src);
    CHECK(std::abs(fitted.w(0, 0) - exact.w(0, 0)) <= 0.05);
    CHECK(std::abs(fitted.b[0] - exact.b[0]) <= 0.05);
}

TEST_CASE("adaptive_start floors, ceilings, and schedule scan") {
    const auto sched = NoiseSchedule::vp_linear(1e-4, 0.02, 1000);
    const auto op = scalar_op(1.0);
    const auto src = GaussianMixture::standard_normal(1);
    auto dec = make_reference_decoder(ReferenceKind::ConjugateMean, op, src);

    dec.vhat = 0.0;
    CHECK(adaptive_start(vec1(2.0), op, sched, dec, 1).start_index == 1);

    dec.vhat = 1.0 - sched.alpha_bar(1000) + 0.1;
    CHECK(adaptive_start(vec1(2.0), op, sched, dec, 1).start_index == 1000);

    dec.vhat = 0.5;
    int expect = 1000;
    for (int i = 1; i <= 1000; ++i)
        if (1.0 - sched.alpha_bar(i) >= 0.5) {
            expect = i;
            break;
        }
    const auto st = adaptive_start(vec1(2.0), op, sched, dec, 1);
    CHECK(st.start_index == expect);

    const auto ve = NoiseSchedule::ve_geometric(0.01, 10.0, 100);
    CHECK_THROWS_AS(adaptive_start(vec1(2.0), op, ve, dec, 1), std::invalid_argument);
}

TEST_CASE("noiseless identity decode pins the sample to the measurement") {
    ChannelSpec noiseless;
    noiseless.kind = ChannelKind::Identity;
    const auto op = ForwardOperator::compose(LinearEncoder::identity(1), noiseless, 1.0);
    const auto src = GaussianMixture::standard_normal(1);
    const auto sched = NoiseSchedule::vp_linear(1e-4, 0.02, 1000);
    const GmmScoreField field(src, sched);

    DecoderConfig cfg;
    cfg.sampler = SamplerKind::PfOdeEuler;
    cfg.steps = 1000;
    cfg.guidance.gamma = 10.0;
    cfg.guidance.normalize_residual = true;
    const Eigen::VectorXd y = vec1(1.3);
    for (std::uint64_t seed : {1, 2, 3}) {
        const auto res = diffcom_decode(y, op, field, cfg, nullptr, seed);
        CHECK((res.x_hat - y).norm() <= 1e-3);
    }
}

TEST_CASE("lambda = 0, gamma = 0 reduces to unconditional sampling") {
    const auto op = scalar_op(1.0);
    const auto src = GaussianMixture::standard_normal(1);
    const auto sched = NoiseSchedule::vp_linear(1e-4, 0.02, 500);
    const GmmScoreField field(src, sched);
    DecoderConfig cfg;
    cfg.guidance.gamma = 0.0;
    cfg.chains = 4000;
    const auto res = diffcom_decode(vec1(2.0), op, field, cfg, nullptr, 9);
    const auto [m, c] = moments(res.ensemble);
    CHECK(std::abs(m[0]) <= 4.0 / std::sqrt(4000.0));
    CHECK(std::abs(c(0, 0) - 1.0) <= 4.0 * std::sqrt(2.0 / 4000.0));
}

TEST_CASE("decodes are bit-reproducible per seed") {
    const auto op = scalar_op(1.0);
    const auto src = GaussianMixture::standard_normal(1);
    const auto sched = NoiseSchedule::vp_linear(1e-4, 0.02, 300);
    const GmmScoreField field(src, sched);
    DecoderConfig cfg;
    cfg.guidance.mode = GammaMode::ExactGaussian;
    cfg.chains = 3;
    const auto a = diffcom_decode(vec1(2.0), op, field, cfg, nullptr, 33);
    const auto b = diffcom_decode(vec1(2.0), op, field, cfg, nullptr, 33);
    CHECK(a.ensemble == b.ensemble);
    CHECK(a.x_hat == b.x_hat);
}

TEST_CASE("decoder requires the reference decoder only when it is used") {
    const auto op = scalar_op(1.0);
    const auto src = GaussianMixture::standard_normal(1);
    const auto sched = NoiseSchedule::vp_linear(1e-4, 0.02, 100);
    const GmmScoreField field(src, sched);
    DecoderConfig cfg;
    cfg.guidance.lambda = 0.5;
    CHECK_THROWS_AS(diffcom_decode(vec1(2.0), op, field, cfg, nullptr, 1),
                    std::invalid_argument);
}

TEST_CASE("adaptive start matches full sampling on the conjugate benchmark") {
    const auto op = scalar_op(1.0);
    const auto src = GaussianMixture::standard_normal(1);
    const auto sched = NoiseSchedule::vp_linear(1e-4, 0.02, 1000);
    const GmmScoreField field(src, sched);
    const auto dec = make_reference_decoder(ReferenceKind::ConjugateMean, op, src);

    DecoderConfig cfg;
    cfg.guidance.mode = GammaMode::ExactGaussian;
    cfg.start = StartMode::Adaptive;
    cfg.chains = 4000;
    const auto res = diffcom_decode(vec1(2.0), op, field, cfg, &dec, 41);
    CHECK(res.start_index < 1000);  // fewer steps than full sampling
    const auto [m, c] = moments(res.ensemble);
    CHECK(std::abs(m[0] - 1.0) <= 0.1);  // posterior mean within 10%
}

TEST_CASE("blind decode with a collapsed gain prior pairs with the known-channel decode") {
    const auto sched = NoiseSchedule::vp_linear(1e-4, 0.02, 500);
    const auto prior_x = GaussianMixture::standard_normal(1);
    const double h_true = 1.3;
    const auto prior_h =
        GaussianMixture::single(vec1(h_true), Eigen::MatrixXd::Constant(1, 1, 1e-12));
    const GmmScoreField fx(prior_x, sched), fh(prior_h, sched);
    GainOperatorFamily fam{LinearEncoder::identity(1), 1.0, 0.1, 1};

    DecoderConfig cfg;
    cfg.guidance.mode = GammaMode::ExactGaussian;
    const Eigen::VectorXd y = vec1(0.9);
    const auto blind = blind_diffcom_decode(y, fam, fx, fh, cfg, 55);
    const auto known =
        diffcom_decode(y, fam.fix_gains(vec1(h_true)), fx, cfg, nullptr, 55);
    CHECK((blind.x_hat - known.x_hat).norm() <= 1e-3);
    CHECK(std::abs(blind.h_hat[0] - h_true) <= 1e-3);
}

TEST_CASE("diagnostics CSV columns") {
    const auto op = scalar_op(1.0);
    const auto src = GaussianMixture::standard_normal(1);
    const auto sched = NoiseSchedule::vp_linear(1e-4, 0.02, 50);
    const GmmScoreField field(src, sched);
    DecoderConfig cfg;
    const auto res = diffcom_decode(vec1(2.0), op, field, cfg, nullptr, 1);
    CHECK(res.diagnostics.size() == 50);
    const std::string path = "diag_test.csv";
    write_diagnostics_csv(path, res.diagnostics);
    std::FILE* f = std::fopen(path.c_str(), "rb");
    REQUIRE(f != nullptr);
    char buf[80] = {0};
    REQUIRE(std::fgets(buf, sizeof buf, f) != nullptr);
    CHECK(std::string(buf) == "step,residual_norm,confirming_norm,state_norm\n");
    std::fclose(f);
    std::remove(path.c_str());
}

TEST_CASE("decoding through a nonlinear encoder improves on the unguided prior") {
    // small MLP encoder as the forward map; guidance uses its analytic Jacobian
    const auto src = GaussianMixture::standard_normal(2);
    const auto sched = NoiseSchedule::vp_linear(1e-4, 0.02, 300);
    const GmmScoreField field(src, sched);
    ChannelSpec chan;
    chan.kind = ChannelKind::Awgn;
    chan.snr_db = 15.0;
    const auto op = ForwardOperator::compose_calibrated(
        MlpEncoder::random(2, 2, 8, 3), chan, src);

    RngStream truth(6);
    const Eigen::VectorXd x_true = src.sample_one(truth);
    const Eigen::VectorXd y = op.apply(x_true, truth);

    DecoderConfig guided;
    guided.guidance.mode = GammaMode::ExactGaussian;
    guided.chains = 32;
    DecoderConfig unguided = guided;
    unguided.guidance.gamma = 0.0;

    const LogDensityFn lp = [&](const Eigen::VectorXd& v) { return src.log_density(v); };
    double guided_err = 0.0, unguided_err = 0.0;
    for (std::uint64_t seed : {10, 11, 12, 13, 14}) {
        guided_err += (diffcom_decode(y, op, field, guided, nullptr, seed, lp).x_hat - x_true).norm();
        unguided_err += (diffcom_decode(y, op, field, unguided, nullptr, seed, lp).x_hat - x_true).norm();
    }
    CHECK(guided_err < unguided_err);
}

TEST_CASE("pseudo_inverse reference rejects nonlinear operators") {
    ChannelSpec chan;
    chan.kind = ChannelKind::Awgn;
    chan.snr_db = 10.0;
    const auto src = GaussianMixture::standard_normal(2);
    const auto op =
        ForwardOperator::compose_calibrated(MlpEncoder::random(2, 1, 8, 1), chan, src);
    CHECK_THROWS_AS(make_reference_decoder(ReferenceKind::PseudoInverse, op, src),
                    std::invalid_argument);
    CHECK_THROWS_AS(make_reference_decoder(ReferenceKind::ConjugateMean, op, src),
                    std::invalid_argument);
    // trained_linear handles nonlinear operators
    const auto dec = make_reference_decoder(ReferenceKind::TrainedLinear, op, src, 2);
    CHECK(dec.vhat >= 0.0);
}
