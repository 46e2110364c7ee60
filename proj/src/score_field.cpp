#include "semcom/score_field.hpp"

#include <stdexcept>

namespace semcom {

Eigen::MatrixXd ScoreField::jacobian(const Eigen::VectorXd& x, int i) const {
    const double h = 1e-5;
    const int d = static_cast<int>(x.size());
    Eigen::MatrixXd jac(d, d);
    Eigen::VectorXd xp = x, xm = x;
    for (int j = 0; j < d; ++j) {
        xp[j] = x[j] + h;
        xm[j] = x[j] - h;
        jac.col(j) = (score(xp, i) - score(xm, i)) / (2.0 * h);
        xp[j] = x[j];
        xm[j] = x[j];
    }
    return jac;
}

Eigen::VectorXd ScoreField::score_time(const Eigen::VectorXd& x, double t) const {
    return score(x, schedule().index_of(t));
}

void ScoreField::score_batch(const Eigen::MatrixXd& x, int i, Eigen::MatrixXd& out) const {
    out.resize(x.rows(), x.cols());
    for (int r = 0; r < x.rows(); ++r) out.row(r) = score(x.row(r), i).transpose();
}

void ScoreField::score_time_batch(const Eigen::MatrixXd& x, double t,
                                  Eigen::MatrixXd& out) const {
    out.resize(x.rows(), x.cols());
    for (int r = 0; r < x.rows(); ++r) out.row(r) = score_time(x.row(r), t).transpose();
}

GmmScoreField::GmmScoreField(GaussianMixture source, NoiseSchedule sched)
    : source_(std::move(source)), sched_(std::move(sched)) {
    per_step_.reserve(sched_.steps());
    for (int i = 1; i <= sched_.steps(); ++i)
        per_step_.push_back(perturbed_marginal(source_, sched_, i));
}

Eigen::VectorXd GmmScoreField::score(const Eigen::VectorXd& x, int i) const {
    if (i < 1 || i > sched_.steps()) throw std::out_of_range("GmmScoreField: bad step");
    return per_step_[i - 1].score(x);
}

Eigen::MatrixXd GmmScoreField::jacobian(const Eigen::VectorXd& x, int i) const {
    if (i < 1 || i > sched_.steps()) throw std::out_of_range("GmmScoreField: bad step");
    return per_step_[i - 1].score_jacobian(x);
}

GaussianMixture GmmScoreField::at_time(double t) const {
    const auto [a, v] = sched_.kernel_time(t);
    return source_.gaussian_push(a, v);
}

Eigen::VectorXd GmmScoreField::score_time(const Eigen::VectorXd& x, double t) const {
    return at_time(t).score(x);
}

void GmmScoreField::score_batch(const Eigen::MatrixXd& x, int i,
                                Eigen::MatrixXd& out) const {
    if (i < 1 || i > sched_.steps()) throw std::out_of_range("GmmScoreField: bad step");
    const GaussianMixture& g = per_step_[i - 1];
    out.resize(x.rows(), x.cols());
    for (int r = 0; r < x.rows(); ++r) out.row(r) = g.score(x.row(r)).transpose();
}

void GmmScoreField::score_time_batch(const Eigen::MatrixXd& x, double t,
                                     Eigen::MatrixXd& out) const {
    const GaussianMixture g = at_time(t);
    out.resize(x.rows(), x.cols());
    for (int r = 0; r < x.rows(); ++r) out.row(r) = g.score(x.row(r)).transpose();
}

NetScoreField::NetScoreField(ScoreNetwork net, NoiseSchedule sched)
    : net_(std::move(net)), sched_(std::move(sched)) {}

Eigen::VectorXd NetScoreField::score(const Eigen::VectorXd& x, int i) const {
    return net_.eval(x, sched_.time_of(i));
}

Eigen::MatrixXd NetScoreField::jacobian(const Eigen::VectorXd& x, int i) const {
    return net_.input_jacobian(x, sched_.time_of(i));
}

Eigen::VectorXd NetScoreField::score_time(const Eigen::VectorXd& x, double t) const {
    return net_.eval(x, t);
}

}  // namespace semcom
