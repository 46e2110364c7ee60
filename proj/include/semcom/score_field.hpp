#pragma once

#include <functional>
#include <memory>
#include <vector>

#include <Eigen/Dense>

#include "semcom/gmm.hpp"
#include "semcom/schedule.hpp"
#include "semcom/score_net.hpp"

namespace semcom {

/// Score of the noisy marginals p_i(x), queried either at a discrete schedule
/// step i in 1..N or at a continuous time t in [0,1] (used by the ODE
/// solvers). Implementations must be pure and thread-safe.
class ScoreField {
public:
    virtual ~ScoreField() = default;

    virtual const NoiseSchedule& schedule() const = 0;
    virtual int dim() const = 0;

    virtual Eigen::VectorXd score(const Eigen::VectorXd& x, int i) const = 0;

    /// d(score)/dx at step i; default central finite differences (step 1e-5).
    virtual Eigen::MatrixXd jacobian(const Eigen::VectorXd& x, int i) const;

    /// Continuous-time query; default maps t to the nearest schedule index.
    virtual Eigen::VectorXd score_time(const Eigen::VectorXd& x, double t) const;

    // batch fast paths (rows of X are points); defaults loop.
    virtual void score_batch(const Eigen::MatrixXd& x, int i, Eigen::MatrixXd& out) const;
    virtual void score_time_batch(const Eigen::MatrixXd& x, double t,
                                  Eigen::MatrixXd& out) const;
};

/// Exact score of the noise-perturbed Gaussian mixture; per-step component
/// parameters are precomputed once at construction.
class GmmScoreField final : public ScoreField {
public:
    GmmScoreField(GaussianMixture source, NoiseSchedule sched);

    const NoiseSchedule& schedule() const override { return sched_; }
    int dim() const override { return source_.dim(); }
    const GaussianMixture& source() const { return source_; }

    Eigen::VectorXd score(const Eigen::VectorXd& x, int i) const override;
    Eigen::MatrixXd jacobian(const Eigen::VectorXd& x, int i) const override;
    Eigen::VectorXd score_time(const Eigen::VectorXd& x, double t) const override;
    void score_batch(const Eigen::MatrixXd& x, int i, Eigen::MatrixXd& out) const override;
    void score_time_batch(const Eigen::MatrixXd& x, double t,
                          Eigen::MatrixXd& out) const override;

private:
    GaussianMixture source_;
    NoiseSchedule sched_;
    // perturbed mixtures for every step (index i-1), built eagerly
    std::vector<GaussianMixture> per_step_;

    GaussianMixture at_time(double t) const;
};

/// Trained network as a score field; continuous t is the network's native
/// coordinate, discrete steps map through the schedule's time_of().
class NetScoreField final : public ScoreField {
public:
    NetScoreField(ScoreNetwork net, NoiseSchedule sched);

    const NoiseSchedule& schedule() const override { return sched_; }
    int dim() const override { return net_.dim(); }
    const ScoreNetwork& net() const { return net_; }

    Eigen::VectorXd score(const Eigen::VectorXd& x, int i) const override;
    Eigen::MatrixXd jacobian(const Eigen::VectorXd& x, int i) const override;
    Eigen::VectorXd score_time(const Eigen::VectorXd& x, double t) const override;

private:
    ScoreNetwork net_;
    NoiseSchedule sched_;
};

/// Arbitrary callable as a score field (tests, analytic special cases).
class FnScoreField final : public ScoreField {
public:
    using Fn = std::function<Eigen::VectorXd(const Eigen::VectorXd&, int)>;
    using TimeFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&, double)>;

    FnScoreField(NoiseSchedule sched, int dim, Fn fn, TimeFn time_fn = nullptr)
        : sched_(std::move(sched)), dim_(dim), fn_(std::move(fn)),
          time_fn_(std::move(time_fn)) {}

    const NoiseSchedule& schedule() const override { return sched_; }
    int dim() const override { return dim_; }
    Eigen::VectorXd score(const Eigen::VectorXd& x, int i) const override { return fn_(x, i); }
    Eigen::VectorXd score_time(const Eigen::VectorXd& x, double t) const override {
        return time_fn_ ? time_fn_(x, t) : ScoreField::score_time(x, t);
    }

private:
    NoiseSchedule sched_;
    int dim_;
    Fn fn_;
    TimeFn time_fn_;
};

}  // namespace semcom
