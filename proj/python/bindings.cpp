#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "semcom/engine.hpp"
#include "semcom/flowmatch.hpp"
#include "semcom/guidance.hpp"
#include "semcom/harness.hpp"
#include "semcom/metrics.hpp"
#include "semcom/receiver.hpp"
#include "semcom/score_net.hpp"

namespace py = pybind11;
using namespace semcom;

namespace {

GaussianMixture make_gmm(const Eigen::VectorXd& weights,
                         const std::vector<Eigen::VectorXd>& means,
                         const std::vector<Eigen::MatrixXd>& covs,
                         const std::optional<std::vector<int>>& labels) {
    return GaussianMixture(weights, means, covs, labels);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "diffusion-based semantic communication simulator (C++ core)";

    py::class_<GaussianMixture>(m, "GaussianMixture")
        .def(py::init(&make_gmm), py::arg("weights"), py::arg("means"), py::arg("covs"),
             py::arg("labels") = std::nullopt)
        .def_static("standard_normal", &GaussianMixture::standard_normal)
        .def_property_readonly("dim", &GaussianMixture::dim)
        .def_property_readonly("components", &GaussianMixture::components)
        .def("log_density", &GaussianMixture::log_density)
        .def("score", &GaussianMixture::score)
        .def("score_jacobian", &GaussianMixture::score_jacobian)
        .def("sample",
             [](const GaussianMixture& g, int n, std::uint64_t seed) {
                 auto [pts, comps] = g.sample(n, seed);
                 return py::make_tuple(pts, comps);
             })
        .def("moments", &GaussianMixture::moments);

    py::enum_<ScheduleKind>(m, "ScheduleKind")
        .value("VP", ScheduleKind::VP)
        .value("VE", ScheduleKind::VE);

    py::class_<NoiseSchedule>(m, "NoiseSchedule")
        .def_static("vp_linear", &NoiseSchedule::vp_linear, py::arg("beta_min"),
                    py::arg("beta_max"), py::arg("steps"))
        .def_static("ve_geometric", &NoiseSchedule::ve_geometric, py::arg("sigma_min"),
                    py::arg("sigma_max"), py::arg("steps"))
        .def_property_readonly("kind", &NoiseSchedule::kind)
        .def_property_readonly("steps", &NoiseSchedule::steps)
        .def("alpha_bar", &NoiseSchedule::alpha_bar)
        .def("sigma", &NoiseSchedule::sigma)
        .def("kernel", &NoiseSchedule::kernel);

    m.def("perturbed_marginal", &perturbed_marginal);

    py::class_<ScoreField>(m, "ScoreField")
        .def_property_readonly("dim", &ScoreField::dim)
        .def("score", &ScoreField::score)
        .def("score_time", &ScoreField::score_time)
        .def("jacobian", &ScoreField::jacobian);

    py::class_<GmmScoreField, ScoreField>(m, "GmmScoreField")
        .def(py::init<GaussianMixture, NoiseSchedule>());

    py::class_<NetScoreField, ScoreField>(m, "NetScoreField")
        .def(py::init<ScoreNetwork, NoiseSchedule>());

    py::class_<ScoreNetwork>(m, "ScoreNetwork")
        .def_static("make_default", &ScoreNetwork::make_default, py::arg("dim"),
                    py::arg("width"), py::arg("seed"))
        .def("eval", &ScoreNetwork::eval)
        .def("save", &ScoreNetwork::save)
        .def_static("load", &ScoreNetwork::load);

    py::class_<TrainConfig>(m, "TrainConfig")
        .def(py::init<>())
        .def_readwrite("learning_rate", &TrainConfig::learning_rate)
        .def_readwrite("steps", &TrainConfig::steps)
        .def_readwrite("batch_size", &TrainConfig::batch_size)
        .def_readwrite("seed", &TrainConfig::seed)
        .def_readwrite("momentum", &TrainConfig::momentum)
        .def_readwrite("eval_batch", &TrainConfig::eval_batch);

    m.def("train_dsm",
          [](const ScoreNetwork& net, const GaussianMixture& gmm, const NoiseSchedule& s,
             const TrainConfig& cfg) {
              TrainResult r = train_dsm(net, gmm, s, cfg);
              return py::make_tuple(r.net, r.eval_trace);
          });
    m.def("dsm_loss", &dsm_loss);
    m.def("dsm_loss_at", &dsm_loss_at);
    m.def("ism_loss", &ism_loss);
    m.def("grad_check", &grad_check);

    py::class_<SampleBatch>(m, "SampleBatch")
        .def(py::init<>())
        .def_readwrite("points", &SampleBatch::points)
        .def_readwrite("step_index", &SampleBatch::step_index)
        .def_readwrite("seed", &SampleBatch::seed);

    py::enum_<OdeMethod>(m, "OdeMethod")
        .value("Euler", OdeMethod::Euler)
        .value("Rk4", OdeMethod::Rk4)
        .value("PredictorCorrector", OdeMethod::PredictorCorrector);

    m.def("reverse_sde",
          [](const ScoreField& f, int n, std::uint64_t seed) {
              return reverse_sde(f, n, seed);
          });
    m.def("pf_ode",
          [](const ScoreField& f, OdeMethod m2, int steps, const SampleBatch& init) {
              return pf_ode(f, m2, steps, init);
          });
    m.def("terminal_prior", &terminal_prior);
    m.def("langevin",
          [](const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& score,
             const SampleBatch& init, double zeta, int steps, std::uint64_t seed,
             double noise_scale) {
              return langevin(score, init, zeta, steps, seed, noise_scale);
          },
          py::arg("score"), py::arg("init"), py::arg("zeta"), py::arg("steps"),
          py::arg("seed"), py::arg("noise_scale") = 1.0);
    m.def("tweedie", &tweedie);
    m.def("forward_sample",
          [](const Eigen::VectorXd& x0, const NoiseSchedule& s, int i, std::uint64_t seed) {
              return forward_sample(x0, s, i, seed);
          });

    py::enum_<GammaMode>(m, "GammaMode")
        .value("Fixed", GammaMode::Fixed)
        .value("ExactGaussian", GammaMode::ExactGaussian);

    py::class_<GuidanceConfig>(m, "GuidanceConfig")
        .def(py::init<>())
        .def_readwrite("gamma", &GuidanceConfig::gamma)
        .def_readwrite("lambda_", &GuidanceConfig::lambda)
        .def_readwrite("normalize_residual", &GuidanceConfig::normalize_residual)
        .def_readwrite("mode", &GuidanceConfig::mode);

    m.def("cg_score", &cg_score);
    m.def("cfg_combine", &cfg_combine);
    m.def("score_to_eps", &score_to_eps);
    m.def("eps_to_score", &eps_to_score);
    m.def("dps_score", &dps_score);
    m.def("semantic_reg_grad", &semantic_reg_grad);
    m.def("gmm_classifier", [](const GaussianMixture& g, const Eigen::VectorXd& x, int i,
                               const NoiseSchedule& s) {
        ClassifierResult r = gmm_classifier(g, x, i, s);
        return py::make_tuple(r.probabilities, r.grad_log_prob);
    });

    py::class_<LinearEncoder>(m, "LinearEncoder")
        .def(py::init([](const Eigen::MatrixXd& mat) {
            return LinearEncoder{mat, std::nullopt};
        }))
        .def_static("identity", &LinearEncoder::identity);

    py::enum_<ChannelKind>(m, "ChannelKind")
        .value("Identity", ChannelKind::Identity)
        .value("Awgn", ChannelKind::Awgn)
        .value("Fading", ChannelKind::Fading);

    py::class_<ChannelSpec>(m, "ChannelSpec")
        .def(py::init<>())
        .def_readwrite("kind", &ChannelSpec::kind)
        .def_readwrite("snr_db", &ChannelSpec::snr_db)
        .def_readwrite("taps", &ChannelSpec::taps)
        .def_readwrite("gains", &ChannelSpec::gains)
        .def_readwrite("gain_seed", &ChannelSpec::gain_seed);

    py::class_<ForwardOperator>(m, "ForwardOperator")
        .def_static("compose",
                    [](const LinearEncoder& enc, const ChannelSpec& spec, double scale) {
                        return ForwardOperator::compose(enc, spec, scale);
                    })
        .def_static("compose_calibrated",
                    [](const LinearEncoder& enc, const ChannelSpec& spec,
                       const GaussianMixture& src) {
                        return ForwardOperator::compose_calibrated(enc, spec, src);
                    })
        .def("apply", [](const ForwardOperator& op, const Eigen::VectorXd& x,
                         std::uint64_t seed) { return op.apply(x, seed); })
        .def("mean_apply", &ForwardOperator::mean_apply)
        .def("cbr", &ForwardOperator::cbr)
        .def_property_readonly("sigma_n", &ForwardOperator::sigma_n)
        .def_property_readonly("input_dim", &ForwardOperator::input_dim)
        .def_property_readonly("output_dim", &ForwardOperator::output_dim);

    m.def("power_normalize",
          [](const Eigen::VectorXd& z) { return power_normalize(z); });
    m.def("awgn", &awgn);
    m.def("condition_number", &condition_number);
    m.def("measured_snr", &measured_snr);
    m.def("mse_psnr", &mse_psnr);
    m.def("w1_1d", &w1_1d);
    m.def("norminv", &norminv);
    m.def("conjugate_posterior",
          [](const Eigen::VectorXd& mu, const Eigen::MatrixXd& cov, const Eigen::MatrixXd& a,
             double sigma_n, const Eigen::VectorXd& y) {
              GaussianPosterior p = conjugate_posterior(mu, cov, a, sigma_n, y);
              return py::make_tuple(p.mean, p.covariance);
          });
    m.def("grid_map", &grid_map);

    py::enum_<SamplerKind>(m, "SamplerKind")
        .value("ReverseSde", SamplerKind::ReverseSde)
        .value("PfOdeEuler", SamplerKind::PfOdeEuler)
        .value("PfOdeRk4", SamplerKind::PfOdeRk4)
        .value("PfOdePC", SamplerKind::PfOdePC);

    py::enum_<StartMode>(m, "StartMode")
        .value("Full", StartMode::Full)
        .value("Adaptive", StartMode::Adaptive);

    py::enum_<ReferenceKind>(m, "ReferenceKind")
        .value("PseudoInverse", ReferenceKind::PseudoInverse)
        .value("ConjugateMean", ReferenceKind::ConjugateMean)
        .value("TrainedLinear", ReferenceKind::TrainedLinear);

    py::class_<ReferenceDecoder>(m, "ReferenceDecoder")
        .def_readonly("vhat", &ReferenceDecoder::vhat)
        .def("apply", &ReferenceDecoder::apply);
    m.def("make_reference_decoder", &make_reference_decoder, py::arg("kind"), py::arg("op"),
          py::arg("source"), py::arg("seed") = 0);
    m.def("reference_decode", &reference_decode);

    py::class_<DecoderConfig>(m, "DecoderConfig")
        .def(py::init<>())
        .def_readwrite("guidance", &DecoderConfig::guidance)
        .def_readwrite("sampler", &DecoderConfig::sampler)
        .def_readwrite("start", &DecoderConfig::start)
        .def_readwrite("steps", &DecoderConfig::steps)
        .def_readwrite("chains", &DecoderConfig::chains);

    py::class_<DecodeResult>(m, "DecodeResult")
        .def_readonly("x_hat", &DecodeResult::x_hat)
        .def_readonly("ensemble", &DecodeResult::ensemble)
        .def_readonly("start_index", &DecodeResult::start_index)
        .def_readonly("steps_used", &DecodeResult::steps_used);

    m.def("diffcom_decode",
          [](const Eigen::VectorXd& y, const ForwardOperator& op, const ScoreField& prior,
             const DecoderConfig& cfg, const ReferenceDecoder* dec, std::uint64_t seed,
             const LogDensityFn& log_prior) {
              return diffcom_decode(y, op, prior, cfg, dec, seed, log_prior);
          },
          py::arg("y"), py::arg("op"), py::arg("prior"), py::arg("cfg"),
          py::arg("dec") = nullptr, py::arg("seed") = 0,
          py::arg("log_prior") = nullptr);

    py::class_<GainOperatorFamily>(m, "GainOperatorFamily")
        .def(py::init([](const LinearEncoder& enc, double scale, double sigma_n,
                         int gain_dim) {
                 return GainOperatorFamily{enc, scale, sigma_n, gain_dim};
             }),
             py::arg("encoder"), py::arg("power_scale") = 1.0, py::arg("sigma_n") = 0.0,
             py::arg("gain_dim") = 1)
        .def("fix_gains", &GainOperatorFamily::fix_gains);

    py::class_<BlindDecodeResult>(m, "BlindDecodeResult")
        .def_readonly("x_hat", &BlindDecodeResult::x_hat)
        .def_readonly("h_hat", &BlindDecodeResult::h_hat)
        .def_readonly("ensemble_x", &BlindDecodeResult::ensemble_x)
        .def_readonly("ensemble_h", &BlindDecodeResult::ensemble_h);

    m.def("blind_diffcom_decode",
          [](const Eigen::VectorXd& y, const GainOperatorFamily& fam,
             const ScoreField& px, const ScoreField& ph, const DecoderConfig& cfg,
             std::uint64_t seed, const LogDensityFn& lx, const LogDensityFn& lh) {
              return blind_diffcom_decode(y, fam, px, ph, cfg, seed, lx, lh);
          },
          py::arg("y"), py::arg("family"), py::arg("prior_x"), py::arg("prior_h"),
          py::arg("cfg"), py::arg("seed") = 0, py::arg("log_prior_x") = nullptr,
          py::arg("log_prior_h") = nullptr);

    py::enum_<FlowMethod>(m, "FlowMethod")
        .value("Euler", FlowMethod::Euler)
        .value("Rk4", FlowMethod::Rk4);

    m.def("fm_pair", [](const Eigen::VectorXd& x0, const Eigen::VectorXd& x1, double t) {
        FlowPair p = fm_pair(x0, x1, t);
        return py::make_tuple(p.x_t, p.velocity);
    });
    m.def("fm_loss",
          [](const VelocityFn& v, const GaussianMixture& data, int batch,
             std::uint64_t seed) { return fm_loss(v, data, batch, seed); });
    m.def("fm_transport", &fm_transport);

    py::class_<ConsistencyHead>(m, "ConsistencyHead")
        .def(py::init<double, double, ConsistencyHead::InnerFn>(), py::arg("xi"),
             py::arg("sigma_data"), py::arg("inner"))
        .def("c_skip", &ConsistencyHead::c_skip)
        .def("c_out", &ConsistencyHead::c_out)
        .def("apply", &ConsistencyHead::apply);

    // harness entry points
    py::class_<ExperimentConfig>(m, "ExperimentConfig")
        .def_static("from_text", &ExperimentConfig::from_text)
        .def_static("from_file", &ExperimentConfig::from_file)
        .def("canonical_text", &ExperimentConfig::canonical_text)
        .def_readwrite("seeds", &ExperimentConfig::seeds)
        .def_readwrite("out", &ExperimentConfig::out);

    m.def("run_experiment", [](const ExperimentConfig& cfg) {
        RunOutput out = run_experiment(cfg);
        return py::make_tuple(out.data.header, out.data.rows);
    });
    m.def("experiment_names", []() { return kExperimentNames; });
}
