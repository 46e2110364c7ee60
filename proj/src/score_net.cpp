#include "semcom/score_net.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "semcom/rng.hpp"

namespace semcom {

int embedding_width(TimeEmbedding emb) {
    return emb == TimeEmbedding::AppendScalar ? 1 : 4;
}

ScoreNetwork::ScoreNetwork(int dim, const std::vector<int>& hidden, Activation act,
                           TimeEmbedding emb, std::uint64_t seed)
    : dim_(dim), emb_(emb) {
    if (dim < 1) throw std::invalid_argument("ScoreNetwork: dim must be >= 1");
    std::vector<int> sizes;
    sizes.push_back(dim + embedding_width(emb));
    for (int h : hidden) sizes.push_back(h);
    sizes.push_back(dim);
    mlp_ = Mlp(sizes, act, seed);
}

ScoreNetwork ScoreNetwork::make_default(int dim, int width, std::uint64_t seed) {
    return ScoreNetwork(dim, {width, width}, Activation::Tanh,
                        TimeEmbedding::Sinusoidal4, seed);
}

Eigen::VectorXd ScoreNetwork::embed_time(double t) const {
    if (emb_ == TimeEmbedding::AppendScalar) {
        Eigen::VectorXd e(1);
        e << t;
        return e;
    }
    Eigen::VectorXd e(4);
    e << std::sin(M_PI * t), std::cos(M_PI * t), std::sin(2.0 * M_PI * t),
        std::cos(2.0 * M_PI * t);
    return e;
}

Eigen::VectorXd ScoreNetwork::augment(const Eigen::VectorXd& x, double t) const {
    if (x.size() != dim_) throw std::invalid_argument("ScoreNetwork: shape mismatch");
    Eigen::VectorXd in(dim_ + embedding_width(emb_));
    in.head(dim_) = x;
    in.tail(embedding_width(emb_)) = embed_time(t);
    return in;
}

Eigen::VectorXd ScoreNetwork::eval(const Eigen::VectorXd& x, double t) const {
    return mlp_.forward(augment(x, t));
}

Eigen::MatrixXd ScoreNetwork::input_jacobian(const Eigen::VectorXd& x, double t) const {
    MlpTape tape;
    mlp_.forward(augment(x, t), tape);
    Eigen::MatrixXd jac(dim_, dim_);
    Eigen::VectorXd din = Eigen::VectorXd::Zero(dim_ + embedding_width(emb_));
    for (int j = 0; j < dim_; ++j) {
        din.setZero();
        din[j] = 1.0;
        jac.col(j) = mlp_.jvp(tape, din);
    }
    return jac;
}

Eigen::VectorXd score_to_eps(const Eigen::VectorXd& score, double sigma_t) {
    return -sigma_t * score;
}

Eigen::VectorXd eps_to_score(const Eigen::VectorXd& eps, double sigma_t) {
    return -eps / sigma_t;
}

double grad_check(const ScoreNetwork& net, const Eigen::VectorXd& x, double t,
                  double step) {
    if (!(step >= 1e-7 && step <= 1e-3))
        throw std::invalid_argument("grad_check: step must be in [1e-7, 1e-3]");
    Mlp mlp = net.mlp();
    const Eigen::VectorXd in = net.augment(x, t);

    MlpTape tape;
    Eigen::VectorXd out = mlp.forward(in, tape);
    MlpGrads g = mlp.zero_grads();
    mlp.backward(tape, out, g);  // probe loss 0.5*||out||^2 -> gout = out

    Eigen::VectorXd analytic(mlp.parameter_count());
    {
        int pos = 0;
        for (size_t l = 0; l < g.w.size(); ++l) {
            for (int c = 0; c < g.w[l].cols(); ++c)
                for (int r = 0; r < g.w[l].rows(); ++r) analytic[pos++] = g.w[l](r, c);
            for (int r = 0; r < g.b[l].size(); ++r) analytic[pos++] = g.b[l][r];
        }
    }

    Eigen::VectorXd theta = mlp.parameters();
    double max_rel = 0.0;
    for (int p = 0; p < theta.size(); ++p) {
        const double orig = theta[p];
        theta[p] = orig + step;
        mlp.set_parameters(theta);
        const double fp = 0.5 * mlp.forward(in).squaredNorm();
        theta[p] = orig - step;
        mlp.set_parameters(theta);
        const double fm = 0.5 * mlp.forward(in).squaredNorm();
        theta[p] = orig;
        const double fd = (fp - fm) / (2.0 * step);
        const double denom = std::max({std::abs(analytic[p]), std::abs(fd), 1e-10});
        max_rel = std::max(max_rel, std::abs(analytic[p] - fd) / denom);
    }
    return max_rel;
}

namespace {

struct DsmSample {
    Eigen::VectorXd x_tilde;
    Eigen::VectorXd target;  // kernel score grad log q(x_tilde | x0)
    double t;
};

DsmSample draw_dsm_sample(const GaussianMixture& gmm, const NoiseSchedule& sched, int i,
                          RngStream& rng) {
    const auto [a, v] = sched.kernel(i);
    const Eigen::VectorXd x0 = gmm.sample_one(rng);
    const Eigen::VectorXd eps = rng.normal_vec(x0.size());
    DsmSample s;
    s.x_tilde = a * x0 + std::sqrt(v) * eps;
    s.target = -eps / std::sqrt(v);
    s.t = sched.time_of(i);
    return s;
}

}  // namespace

double dsm_loss_at(const ScoreNetwork& net, const GaussianMixture& gmm,
                   const NoiseSchedule& sched, int i, int batch, std::uint64_t seed) {
    if (batch < 1) throw std::invalid_argument("dsm_loss_at: batch must be >= 1");
    RngStream rng = RngStream::for_chain(seed, 0, "dsm");
    double acc = 0.0;
    for (int b = 0; b < batch; ++b) {
        const DsmSample s = draw_dsm_sample(gmm, sched, i, rng);
        acc += 0.5 * (s.target - net.eval(s.x_tilde, s.t)).squaredNorm();
    }
    return acc / batch;
}

double dsm_loss(const ScoreNetwork& net, const GaussianMixture& gmm,
                const NoiseSchedule& sched, int batch, std::uint64_t seed) {
    if (batch < 1) throw std::invalid_argument("dsm_loss: batch must be >= 1");
    RngStream rng = RngStream::for_chain(seed, 0, "dsm");
    double acc = 0.0;
    for (int b = 0; b < batch; ++b) {
        const int i = 1 + static_cast<int>(rng.uniform_int(sched.steps()));
        const DsmSample s = draw_dsm_sample(gmm, sched, i, rng);
        acc += 0.5 * (s.target - net.eval(s.x_tilde, s.t)).squaredNorm();
    }
    return acc / batch;
}

Eigen::VectorXd dsm_grad_at(const ScoreNetwork& net, const GaussianMixture& gmm,
                            const NoiseSchedule& sched, int i, int batch,
                            std::uint64_t seed) {
    RngStream rng = RngStream::for_chain(seed, 0, "dsm");
    const Mlp& mlp = net.mlp();
    MlpGrads g = mlp.zero_grads();
    MlpTape tape;
    for (int b = 0; b < batch; ++b) {
        const DsmSample s = draw_dsm_sample(gmm, sched, i, rng);
        const Eigen::VectorXd out = mlp.forward(net.augment(s.x_tilde, s.t), tape);
        mlp.backward(tape, (out - s.target) / batch, g);
    }
    Eigen::VectorXd flat(mlp.parameter_count());
    int pos = 0;
    for (size_t l = 0; l < g.w.size(); ++l) {
        for (int c = 0; c < g.w[l].cols(); ++c)
            for (int r = 0; r < g.w[l].rows(); ++r) flat[pos++] = g.w[l](r, c);
        for (int r = 0; r < g.b[l].size(); ++r) flat[pos++] = g.b[l][r];
    }
    return flat;
}

double ism_loss(const ScoreNetwork& net, const Eigen::MatrixXd& samples, double t) {
    const int d = net.dim();
    if (d > 3) throw std::invalid_argument("ism_loss: D > 3 not supported");
    if (samples.cols() != d) throw std::invalid_argument("ism_loss: sample dim mismatch");
    const Mlp& mlp = net.mlp();
    MlpTape tape;
    const int aug = d + embedding_width(net.embedding());
    Eigen::VectorXd din = Eigen::VectorXd::Zero(aug);
    double acc = 0.0;
    for (int r = 0; r < samples.rows(); ++r) {
        const Eigen::VectorXd out = mlp.forward(net.augment(samples.row(r), t), tape);
        acc += 0.5 * out.squaredNorm();
        for (int j = 0; j < d; ++j) {
            din.setZero();
            din[j] = 1.0;
            acc += mlp.jvp(tape, din)[j];
        }
    }
    return acc / samples.rows();
}

Eigen::VectorXd ism_grad(const ScoreNetwork& net, const Eigen::MatrixXd& samples,
                         double t) {
    const int d = net.dim();
    if (d > 3) throw std::invalid_argument("ism_grad: D > 3 not supported");
    const Mlp& mlp = net.mlp();
    MlpGrads g = mlp.zero_grads();
    MlpTape tape;
    const int aug = d + embedding_width(net.embedding());
    Eigen::VectorXd din = Eigen::VectorXd::Zero(aug);
    const double inv_n = 1.0 / samples.rows();
    for (int r = 0; r < samples.rows(); ++r) {
        const Eigen::VectorXd out = mlp.forward(net.augment(samples.row(r), t), tape);
        mlp.backward(tape, inv_n * out, g);  // 0.5*||s||^2 term
        for (int j = 0; j < d; ++j) {
            din.setZero();
            din[j] = 1.0;
            mlp.jvp(tape, din);
            Eigen::VectorXd gu = Eigen::VectorXd::Zero(d);
            gu[j] = inv_n;  // d/dtheta of (J s)_jj
            mlp.jvp_backward(tape, Eigen::VectorXd::Zero(d), gu, g);
        }
    }
    Eigen::VectorXd flat(mlp.parameter_count());
    int pos = 0;
    for (size_t l = 0; l < g.w.size(); ++l) {
        for (int c = 0; c < g.w[l].cols(); ++c)
            for (int r2 = 0; r2 < g.w[l].rows(); ++r2) flat[pos++] = g.w[l](r2, c);
        for (int r2 = 0; r2 < g.b[l].size(); ++r2) flat[pos++] = g.b[l][r2];
    }
    return flat;
}

TrainResult train_dsm(const ScoreNetwork& net, const GaussianMixture& gmm,
                      const NoiseSchedule& sched, const TrainConfig& cfg) {
    if (cfg.learning_rate <= 0.0) throw std::invalid_argument("train_dsm: learning_rate must be > 0");
    if (cfg.steps < 1 || cfg.batch_size < 1)
        throw std::invalid_argument("train_dsm: steps and batch_size must be >= 1");

    TrainResult res{net, Eigen::VectorXd::Zero(cfg.steps)};
    Mlp& mlp = res.net.mlp();

    // fixed held-out batch for the logged loss trace
    RngStream eval_rng = RngStream::for_chain(cfg.seed, 0, "dsm-eval");
    std::vector<DsmSample> eval_set;
    eval_set.reserve(cfg.eval_batch);
    for (int b = 0; b < cfg.eval_batch; ++b) {
        const int i = 1 + static_cast<int>(eval_rng.uniform_int(sched.steps()));
        eval_set.push_back(draw_dsm_sample(gmm, sched, i, eval_rng));
    }

    RngStream rng = RngStream::for_chain(cfg.seed, 0, "dsm-train");
    MlpGrads g = mlp.zero_grads();
    MlpGrads vel = mlp.zero_grads();
    MlpTape tape;
    const bool use_momentum = cfg.momentum != 0.0;

    for (int step = 0; step < cfg.steps; ++step) {
        // log the held-out loss before the update so the trace starts at the
        // untrained network
        double ev = 0.0;
        for (const DsmSample& s : eval_set)
            ev += 0.5 * (s.target - mlp.forward(res.net.augment(s.x_tilde, s.t))).squaredNorm();
        res.eval_trace[step] = ev / cfg.eval_batch;

        g.setZero();
        for (int b = 0; b < cfg.batch_size; ++b) {
            const int i = 1 + static_cast<int>(rng.uniform_int(sched.steps()));
            const DsmSample s = draw_dsm_sample(gmm, sched, i, rng);
            const Eigen::VectorXd out = mlp.forward(res.net.augment(s.x_tilde, s.t), tape);
            mlp.backward(tape, (out - s.target) / cfg.batch_size, g);
        }
        if (use_momentum) {
            vel.scale(cfg.momentum);
            vel.axpy(1.0, g);
            mlp.apply_update(vel, -cfg.learning_rate);
        } else {
            mlp.apply_update(g, -cfg.learning_rate);
        }

        if (!std::isfinite(res.eval_trace[step]) ||
            (step % 200 == 0 && !mlp.parameters_finite()))
            throw std::runtime_error("train_dsm: diverged (non-finite parameters) at step " +
                                     std::to_string(step));
    }
    if (!mlp.parameters_finite())
        throw std::runtime_error("train_dsm: diverged (non-finite parameters) at end");
    return res;
}

// ---------------------------------------------------------------------------
// serialization: all integers little-endian int32, doubles little-endian f64.
// layout: magic "SCNETv1\0" | dim | emb | act | n_layers |
//         per layer: rows, cols, W row-major, b
// ---------------------------------------------------------------------------

namespace {

void write_i32(std::ostream& os, std::int32_t v) {
    unsigned char buf[4];
    for (int i = 0; i < 4; ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<char*>(buf), 4);
}

std::int32_t read_i32(std::istream& is) {
    unsigned char buf[4];
    is.read(reinterpret_cast<char*>(buf), 4);
    std::int32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::int32_t>(buf[i]) << (8 * i);
    return v;
}

void write_f64(std::ostream& os, double d) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, 8);
    unsigned char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<char*>(buf), 8);
}

double read_f64(std::istream& is) {
    unsigned char buf[8];
    is.read(reinterpret_cast<char*>(buf), 8);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    double d;
    std::memcpy(&d, &bits, 8);
    return d;
}

constexpr char kMagic[8] = {'S', 'C', 'N', 'E', 'T', 'v', '1', '\0'};

}  // namespace

void ScoreNetwork::save(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("ScoreNetwork::save: cannot open " + path);
    os.write(kMagic, 8);
    write_i32(os, dim_);
    write_i32(os, static_cast<std::int32_t>(emb_));
    write_i32(os, static_cast<std::int32_t>(mlp_.activation()));
    write_i32(os, mlp_.layer_count());
    for (int l = 0; l < mlp_.layer_count(); ++l) {
        const Eigen::MatrixXd& w = mlp_.weights()[l];
        write_i32(os, static_cast<std::int32_t>(w.rows()));
        write_i32(os, static_cast<std::int32_t>(w.cols()));
        for (int r = 0; r < w.rows(); ++r)
            for (int c = 0; c < w.cols(); ++c) write_f64(os, w(r, c));
        for (int r = 0; r < w.rows(); ++r) write_f64(os, mlp_.biases()[l][r]);
    }
    if (!os) throw std::runtime_error("ScoreNetwork::save: write failed");
}

ScoreNetwork ScoreNetwork::load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("ScoreNetwork::load: cannot open " + path);
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kMagic, 8) != 0)
        throw std::runtime_error("ScoreNetwork::load: bad magic");
    const int dim = read_i32(is);
    const auto emb = static_cast<TimeEmbedding>(read_i32(is));
    const auto act = static_cast<Activation>(read_i32(is));
    const int layers = read_i32(is);

    std::vector<int> sizes;
    std::vector<Eigen::MatrixXd> ws(layers);
    std::vector<Eigen::VectorXd> bs(layers);
    for (int l = 0; l < layers; ++l) {
        const int rows = read_i32(is), cols = read_i32(is);
        ws[l].resize(rows, cols);
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c) ws[l](r, c) = read_f64(is);
        bs[l].resize(rows);
        for (int r = 0; r < rows; ++r) bs[l][r] = read_f64(is);
        if (l == 0) sizes.push_back(cols);
        sizes.push_back(rows);
    }
    if (!is) throw std::runtime_error("ScoreNetwork::load: truncated file");

    std::vector<int> hidden(sizes.begin() + 1, sizes.end() - 1);
    ScoreNetwork net(dim, hidden, act, emb, 0);
    for (int l = 0; l < layers; ++l) {
        net.mlp_.weight(l) = ws[l];
        net.mlp_.bias(l) = bs[l];
    }
    return net;
}

}  // namespace semcom
