#include "semcom/gmm.hpp"

#include <cmath>
#include <stdexcept>

#include "semcom/schedule.hpp"

namespace semcom {

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;
}

GaussianMixture::GaussianMixture(Eigen::VectorXd weights,
                                 std::vector<Eigen::VectorXd> means,
                                 std::vector<Eigen::MatrixXd> covariances,
                                 std::optional<std::vector<int>> labels)
    : weights_(std::move(weights)),
      means_(std::move(means)),
      covs_(std::move(covariances)),
      labels_(std::move(labels)) {
    const int k = static_cast<int>(means_.size());
    if (k < 1) throw std::invalid_argument("GaussianMixture: need at least one component");
    if (weights_.size() != k || static_cast<int>(covs_.size()) != k)
        throw std::invalid_argument("GaussianMixture: weights/means/covariances size mismatch");
    const int d = static_cast<int>(means_[0].size());
    if (d < 1) throw std::invalid_argument("GaussianMixture: dimension must be >= 1");
    if (weights_.minCoeff() < 0.0)
        throw std::invalid_argument("GaussianMixture: negative weight");
    if (std::abs(weights_.sum() - 1.0) > 1e-12)
        throw std::invalid_argument("GaussianMixture: weights must sum to 1 within 1e-12");
    if (labels_ && static_cast<int>(labels_->size()) != k)
        throw std::invalid_argument("GaussianMixture: label count mismatch");

    chol_.resize(k);
    precision_.resize(k);
    log_norm_.resize(k);
    weight_cdf_.resize(k);
    double cdf = 0.0;
    for (int j = 0; j < k; ++j) {
        if (means_[j].size() != d || covs_[j].rows() != d || covs_[j].cols() != d)
            throw std::invalid_argument("GaussianMixture: inconsistent component shapes");
        if (!covs_[j].isApprox(covs_[j].transpose(), 1e-12))
            throw std::invalid_argument("GaussianMixture: covariance not symmetric");
        Eigen::LLT<Eigen::MatrixXd> llt(covs_[j]);
        if (llt.info() != Eigen::Success)
            throw std::invalid_argument("GaussianMixture: covariance not positive definite");
        chol_[j] = llt.matrixL();
        precision_[j] = llt.solve(Eigen::MatrixXd::Identity(d, d));
        double log_det = 0.0;
        for (int r = 0; r < d; ++r) log_det += 2.0 * std::log(chol_[j](r, r));
        log_norm_[j] = (weights_[j] > 0.0 ? std::log(weights_[j])
                                          : -std::numeric_limits<double>::infinity()) -
                       0.5 * (d * kLog2Pi + log_det);
        cdf += weights_[j];
        weight_cdf_[j] = cdf;
    }
    weight_cdf_[k - 1] = 1.0;
}

GaussianMixture GaussianMixture::standard_normal(int dim) {
    Eigen::VectorXd w(1);
    w << 1.0;
    return GaussianMixture(w, {Eigen::VectorXd::Zero(dim)},
                           {Eigen::MatrixXd::Identity(dim, dim)});
}

GaussianMixture GaussianMixture::single(Eigen::VectorXd mean, Eigen::MatrixXd cov) {
    Eigen::VectorXd w(1);
    w << 1.0;
    return GaussianMixture(w, {std::move(mean)}, {std::move(cov)});
}

const std::vector<int>& GaussianMixture::labels() const {
    if (!labels_) throw std::invalid_argument("GaussianMixture: unlabeled mixture");
    return *labels_;
}

int GaussianMixture::num_classes() const {
    int m = 0;
    for (int l : labels()) m = std::max(m, l + 1);
    return m;
}

void GaussianMixture::component_log_terms(const Eigen::VectorXd& x,
                                          Eigen::VectorXd& out) const {
    const int k = components();
    out.resize(k);
    for (int j = 0; j < k; ++j) {
        const Eigen::VectorXd dx = x - means_[j];
        out[j] = log_norm_[j] - 0.5 * dx.dot(precision_[j] * dx);
    }
}

double GaussianMixture::log_density(const Eigen::VectorXd& x) const {
    if (x.size() != dim()) throw std::invalid_argument("log_density: dimension mismatch");
    Eigen::VectorXd lt;
    component_log_terms(x, lt);
    const double m = lt.maxCoeff();
    return m + std::log((lt.array() - m).exp().sum());
}

Eigen::VectorXd GaussianMixture::responsibilities(const Eigen::VectorXd& x) const {
    if (x.size() != dim()) throw std::invalid_argument("responsibilities: dimension mismatch");
    Eigen::VectorXd lt;
    component_log_terms(x, lt);
    const double m = lt.maxCoeff();
    Eigen::VectorXd r = (lt.array() - m).exp();
    return r / r.sum();
}

Eigen::VectorXd GaussianMixture::score(const Eigen::VectorXd& x) const {
    if (x.size() != dim()) throw std::invalid_argument("score: dimension mismatch");
    const Eigen::VectorXd r = responsibilities(x);
    Eigen::VectorXd s = Eigen::VectorXd::Zero(dim());
    for (int j = 0; j < components(); ++j)
        s.noalias() -= r[j] * (precision_[j] * (x - means_[j]));
    return s;
}

Eigen::MatrixXd GaussianMixture::score_jacobian(const Eigen::VectorXd& x) const {
    if (x.size() != dim()) throw std::invalid_argument("score_jacobian: dimension mismatch");
    const int d = dim();
    const Eigen::VectorXd r = responsibilities(x);
    // hessian of log p: sum_k r_k (H_k + s_k s_k^T) - s s^T
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(d, d);
    Eigen::VectorXd s = Eigen::VectorXd::Zero(d);
    for (int j = 0; j < components(); ++j) {
        const Eigen::VectorXd sj = -(precision_[j] * (x - means_[j]));
        jac.noalias() += r[j] * (sj * sj.transpose() - precision_[j]);
        s.noalias() += r[j] * sj;
    }
    jac.noalias() -= s * s.transpose();
    return jac;
}

Eigen::VectorXd GaussianMixture::sample_one(RngStream& rng, int* component) const {
    const double u = rng.uniform();
    int j = 0;
    while (j + 1 < components() && u > weight_cdf_[j]) ++j;
    if (component) *component = j;
    return means_[j] + chol_[j] * rng.normal_vec(dim());
}

std::pair<Eigen::MatrixXd, std::vector<int>> GaussianMixture::sample(
    int n, std::uint64_t seed) const {
    if (n < 1) throw std::invalid_argument("sample: n must be >= 1");
    RngStream rng(seed);
    Eigen::MatrixXd out(n, dim());
    std::vector<int> comps(n);
    for (int i = 0; i < n; ++i) out.row(i) = sample_one(rng, &comps[i]).transpose();
    return {out, comps};
}

GaussianMixture GaussianMixture::gaussian_push(double scale, double add_var) const {
    std::vector<Eigen::VectorXd> means;
    std::vector<Eigen::MatrixXd> covs;
    means.reserve(components());
    covs.reserve(components());
    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(dim(), dim());
    for (int j = 0; j < components(); ++j) {
        means.push_back(scale * means_[j]);
        covs.push_back(scale * scale * covs_[j] + add_var * eye);
    }
    return GaussianMixture(weights_, std::move(means), std::move(covs), labels_);
}

std::pair<Eigen::VectorXd, Eigen::MatrixXd> GaussianMixture::moments() const {
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(dim());
    for (int j = 0; j < components(); ++j) mu += weights_[j] * means_[j];
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(dim(), dim());
    for (int j = 0; j < components(); ++j) {
        const Eigen::VectorXd dm = means_[j] - mu;
        cov += weights_[j] * (covs_[j] + dm * dm.transpose());
    }
    return {mu, cov};
}

GaussianMixture perturbed_marginal(const GaussianMixture& gmm, const NoiseSchedule& sched,
                                   int i) {
    if (i == 0) return gmm;
    const auto [a, v] = sched.kernel(i);
    return gmm.gaussian_push(a, v);
}

}  // namespace semcom
