#include "semcom/engine.hpp"

#include <cmath>
#include <stdexcept>

#include "semcom/csv.hpp"

namespace semcom {

void TrajectoryLog::record(const Eigen::MatrixXd& points, double step) {
    for (int c = 0; c < points.rows(); ++c)
        for (int j = 0; j < points.cols(); ++j)
            rows.push_back({c, step, j, points(c, j)});
}

void TrajectoryLog::write_csv(const std::string& path) const {
    CsvWriter w(path, {"chain", "step", "coord", "value"});
    for (const Row& r : rows)
        w.row({format_number(r.chain), format_number(r.step), format_number(r.coord),
               format_number(r.value)});
}

Eigen::VectorXd forward_sample(const Eigen::VectorXd& x0, const NoiseSchedule& sched,
                               int i, RngStream& rng) {
    if (i < 1) throw std::invalid_argument("forward_sample: i must be >= 1");
    const auto [a, v] = sched.kernel(i);
    return a * x0 + std::sqrt(v) * rng.normal_vec(x0.size());
}

Eigen::VectorXd forward_sample(const Eigen::VectorXd& x0, const NoiseSchedule& sched,
                               int i, std::uint64_t seed) {
    RngStream rng = RngStream::for_chain(seed, 0, "fwd");
    return forward_sample(x0, sched, i, rng);
}

SampleBatch langevin(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& score,
                     const SampleBatch& init, double zeta, int steps, std::uint64_t seed,
                     double noise_scale) {
    if (!(zeta > 0.0)) throw std::invalid_argument("langevin: zeta must be > 0");
    if (steps < 0) throw std::invalid_argument("langevin: steps must be >= 0");
    SampleBatch out = init;
    out.seed = seed;
    const int n = out.size(), d = out.dim();
    const double noise_coef = std::sqrt(2.0 * zeta) * noise_scale;

    std::vector<RngStream> streams;
    streams.reserve(n);
    for (int c = 0; c < n; ++c) streams.push_back(RngStream::for_chain(seed, c, "x"));

    Eigen::VectorXd x(d);
    for (int s = 0; s < steps; ++s) {
        for (int c = 0; c < n; ++c) {
            x = out.points.row(c);
            x += zeta * score(x);
            if (noise_coef != 0.0) x += noise_coef * streams[c].normal_vec(d);
            if (!x.allFinite())
                throw std::runtime_error("langevin: non-finite state at step " +
                                         std::to_string(s));
            out.points.row(c) = x;
        }
    }
    return out;
}

SampleBatch terminal_prior(const NoiseSchedule& sched, int n, int dim,
                           std::uint64_t seed) {
    SampleBatch b;
    b.points.resize(n, dim);
    b.step_index = sched.steps();
    b.seed = seed;
    const double scale =
        sched.kind() == ScheduleKind::VP ? 1.0 : sched.sigma(sched.steps());
    for (int c = 0; c < n; ++c) {
        RngStream rng = RngStream::for_chain(seed, c, "init");
        b.points.row(c) = scale * rng.normal_vec(dim).transpose();
    }
    return b;
}

namespace {

// One discrete reverse step from index i to index j < i (the Table recursion
// for j = i-1; schedule-skipping uses the same kernels with effective
// coefficients).
void reverse_step(const NoiseSchedule& sched, int i, int j, const Eigen::MatrixXd& score,
                  Eigen::MatrixXd& x, std::vector<RngStream>& streams) {
    const int n = static_cast<int>(x.rows()), d = static_cast<int>(x.cols());
    if (sched.kind() == ScheduleKind::VP) {
        const double b_eff = 1.0 - sched.alpha_bar(i) / sched.alpha_bar(j);
        const double inv = 1.0 / std::sqrt(1.0 - b_eff);
        const double noise = std::sqrt(b_eff);
        for (int c = 0; c < n; ++c)
            x.row(c) = inv * (x.row(c) + b_eff * score.row(c)) +
                       noise * streams[c].normal_vec(d).transpose();
    } else {
        const double si = sched.sigma(i), sj = sched.sigma(j);
        const double dv = si * si - sj * sj;
        const double noise = std::sqrt(dv);
        for (int c = 0; c < n; ++c)
            x.row(c) += dv * score.row(c) + noise * streams[c].normal_vec(d).transpose();
    }
    if (!x.allFinite())
        throw std::runtime_error("reverse step: non-finite state at index " +
                                 std::to_string(j));
}

}  // namespace

SampleBatch reverse_sde(const ScoreField& field, int n, std::uint64_t seed,
                        TrajectoryLog* traj) {
    SampleBatch b = terminal_prior(field.schedule(), n, field.dim(), seed);
    return reverse_sde_from(field, b, traj);
}

SampleBatch reverse_sde_from(const ScoreField& field, const SampleBatch& init,
                             TrajectoryLog* traj) {
    const NoiseSchedule& sched = field.schedule();
    SampleBatch out = init;
    const int n = out.size();
    std::vector<RngStream> streams;
    streams.reserve(n);
    for (int c = 0; c < n; ++c) streams.push_back(RngStream::for_chain(out.seed, c, "x"));

    Eigen::MatrixXd score;
    if (traj) traj->record(out.points, out.step_index);
    for (int i = out.step_index; i >= 1; --i) {
        field.score_batch(out.points, i, score);
        reverse_step(sched, i, i - 1, score, out.points, streams);
        if (traj) traj->record(out.points, i - 1);
    }
    out.step_index = 0;
    return out;
}

SampleBatch pf_ode(const ScoreField& field, OdeMethod method, int steps,
                   const SampleBatch& x_terminal, TrajectoryLog* traj) {
    if (steps < 1) throw std::invalid_argument("pf_ode: steps must be >= 1");
    if (!x_terminal.points.allFinite())
        throw std::invalid_argument("pf_ode: non-finite terminal state");
    const NoiseSchedule& sched = field.schedule();
    SampleBatch out = x_terminal;
    const int n = out.size(), d = out.dim();

    if (method == OdeMethod::PredictorCorrector) {
        // predictor: reverse-SDE step on a subgrid of schedule indices;
        // corrector: one Langevin step with zeta = 0.1 * local noise variance.
        const int nsteps = std::min(steps, sched.steps());
        std::vector<int> grid(nsteps + 1);
        for (int k = 0; k <= nsteps; ++k)
            grid[k] = static_cast<int>(std::lround(
                sched.steps() * (1.0 - double(k) / nsteps)));
        grid[0] = sched.steps();
        grid[nsteps] = 0;

        std::vector<RngStream> streams;
        streams.reserve(n);
        for (int c = 0; c < n; ++c)
            streams.push_back(RngStream::for_chain(out.seed, c, "x"));

        Eigen::MatrixXd score;
        if (traj) traj->record(out.points, grid[0]);
        for (int k = 0; k < nsteps; ++k) {
            const int i = grid[k], j = grid[k + 1];
            if (j >= i) continue;
            field.score_batch(out.points, i, score);
            reverse_step(sched, i, j, score, out.points, streams);
            if (j >= 1) {
                const auto [aj, vj] = sched.kernel(j);
                const double zeta = 0.1 * vj;
                field.score_batch(out.points, j, score);
                const double noise = std::sqrt(2.0 * zeta);
                for (int c = 0; c < n; ++c)
                    out.points.row(c) += zeta * score.row(c) +
                                         noise * streams[c].normal_vec(d).transpose();
            }
            if (!out.points.allFinite())
                throw std::runtime_error("pf_ode(PC): non-finite state at index " +
                                         std::to_string(j));
            if (traj) traj->record(out.points, j);
        }
        out.step_index = 0;
        return out;
    }

    // continuous-time drift, integrated from t = 1 to t = 0
    Eigen::MatrixXd score;
    auto drift = [&](const Eigen::MatrixXd& x, double t, Eigen::MatrixXd& dx) {
        field.score_time_batch(x, t, score);
        if (sched.kind() == ScheduleKind::VP) {
            dx = -0.5 * sched.beta_time(t) * (x + score);
        } else {
            dx = -0.5 * sched.dsigma2_time(t) * score;
        }
    };

    const double dt = -1.0 / steps;
    double t = 1.0;
    Eigen::MatrixXd k1, k2, k3, k4, tmp;
    if (traj) traj->record(out.points, t * sched.steps());
    for (int s = 0; s < steps; ++s) {
        if (method == OdeMethod::Euler) {
            drift(out.points, t, k1);
            out.points += dt * k1;
        } else {
            drift(out.points, t, k1);
            tmp = out.points + 0.5 * dt * k1;
            drift(tmp, t + 0.5 * dt, k2);
            tmp = out.points + 0.5 * dt * k2;
            drift(tmp, t + 0.5 * dt, k3);
            tmp = out.points + dt * k3;
            drift(tmp, t + dt, k4);
            out.points += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        t += dt;
        if (!out.points.allFinite())
            throw std::runtime_error("pf_ode: non-finite state at t = " + std::to_string(t));
        if (traj) traj->record(out.points, t * sched.steps());
    }
    out.step_index = 0;
    return out;
}

Eigen::VectorXd tweedie(const Eigen::VectorXd& x_t, int i, const ScoreField& field) {
    if (i < 1) throw std::invalid_argument("tweedie: i must be >= 1");
    const NoiseSchedule& sched = field.schedule();
    const auto [a, v] = sched.kernel(i);
    return (x_t + v * field.score(x_t, i)) / a;
}

Eigen::MatrixXd tweedie_jacobian(const Eigen::VectorXd& x_t, int i,
                                 const ScoreField& field) {
    if (i < 1) throw std::invalid_argument("tweedie_jacobian: i must be >= 1");
    const auto [a, v] = field.schedule().kernel(i);
    const int d = static_cast<int>(x_t.size());
    return (Eigen::MatrixXd::Identity(d, d) + v * field.jacobian(x_t, i)) / a;
}

Eigen::MatrixXd tweedie_covariance(const Eigen::VectorXd& x_t, int i,
                                   const ScoreField& field) {
    if (i < 1) throw std::invalid_argument("tweedie_covariance: i must be >= 1");
    const auto [a, v] = field.schedule().kernel(i);
    const int d = static_cast<int>(x_t.size());
    return (v / (a * a)) *
           (Eigen::MatrixXd::Identity(d, d) + v * field.jacobian(x_t, i));
}

}  // namespace semcom
