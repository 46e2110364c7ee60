#include "semcom/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "semcom/channel.hpp"

namespace semcom {

GaussianPosterior conjugate_posterior(const Eigen::VectorXd& prior_mean,
                                      const Eigen::MatrixXd& prior_cov,
                                      const Eigen::MatrixXd& a, double sigma_n,
                                      const Eigen::VectorXd& y) {
    if (!(sigma_n > 0.0)) throw std::invalid_argument("conjugate_posterior: sigma_n must be > 0");
    const int d = static_cast<int>(prior_mean.size());
    if (prior_cov.rows() != d || prior_cov.cols() != d || a.cols() != d ||
        a.rows() != y.size())
        throw std::invalid_argument("conjugate_posterior: shape mismatch");
    Eigen::LLT<Eigen::MatrixXd> llt(prior_cov);
    if (llt.info() != Eigen::Success)
        throw std::invalid_argument("conjugate_posterior: singular prior covariance");
    const Eigen::MatrixXd prior_prec = llt.solve(Eigen::MatrixXd::Identity(d, d));
    const double inv_n = 1.0 / (sigma_n * sigma_n);
    const Eigen::MatrixXd post_prec = prior_prec + inv_n * a.transpose() * a;
    Eigen::LLT<Eigen::MatrixXd> post_llt(post_prec);
    GaussianPosterior p;
    p.covariance = post_llt.solve(Eigen::MatrixXd::Identity(d, d));
    p.mean = post_llt.solve(prior_prec * prior_mean + inv_n * a.transpose() * y);
    return p;
}

Eigen::VectorXd grid_map(const std::function<double(const Eigen::VectorXd&)>& log_posterior,
                         const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                         int resolution) {
    const int d = static_cast<int>(lo.size());
    if (d < 1 || d > 2) throw std::invalid_argument("grid_map: dimension must be 1 or 2");
    if (hi.size() != d) throw std::invalid_argument("grid_map: bounds mismatch");
    if (resolution < 16) throw std::invalid_argument("grid_map: resolution must be >= 16");

    auto axis = [&](int j, int k) {
        return lo[j] + (hi[j] - lo[j]) * k / double(resolution - 1);
    };
    double best = -std::numeric_limits<double>::infinity();
    Eigen::VectorXd arg = lo, x(d);
    const int total = d == 1 ? resolution : resolution * resolution;
    for (int idx = 0; idx < total; ++idx) {
        x[0] = axis(0, idx % resolution);
        if (d == 2) x[1] = axis(1, idx / resolution);
        const double v = log_posterior(x);
        if (!std::isfinite(v) && !(v == -std::numeric_limits<double>::infinity()))
            throw std::invalid_argument("grid_map: non-finite log-posterior on grid");
        if (v > best) {  // strict: ties keep the lowest index
            best = v;
            arg = x;
        }
    }
    if (best == -std::numeric_limits<double>::infinity())
        throw std::invalid_argument("grid_map: log-posterior is -inf everywhere");
    return arg;
}

namespace {
std::vector<double> sorted_quantiles(std::vector<double> v, size_t n) {
    std::sort(v.begin(), v.end());
    if (v.size() == n) return v;
    std::vector<double> q(n);
    for (size_t i = 0; i < n; ++i) {
        const double pos = (i + 0.5) / n * v.size() - 0.5;
        const double lo = std::floor(pos);
        const size_t j = static_cast<size_t>(std::max(0.0, lo));
        const size_t k = std::min(v.size() - 1, j + 1);
        const double w = pos - lo;
        q[i] = (1.0 - w) * v[std::min(j, v.size() - 1)] + w * v[k];
    }
    return q;
}
}  // namespace

double w1_1d(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("w1_1d: empty input");
    const size_t n = std::max(a.size(), b.size());
    const std::vector<double> qa = sorted_quantiles(std::move(a), n);
    const std::vector<double> qb = sorted_quantiles(std::move(b), n);
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) acc += std::abs(qa[i] - qb[i]);
    return acc / n;
}

std::pair<Eigen::VectorXd, Eigen::MatrixXd> moments(const Eigen::MatrixXd& samples) {
    const int n = static_cast<int>(samples.rows());
    if (n < 2) throw std::invalid_argument("moments: need at least 2 samples");
    const Eigen::VectorXd mean = samples.colwise().mean();
    const Eigen::MatrixXd centered = samples.rowwise() - mean.transpose();
    const Eigen::MatrixXd cov = centered.transpose() * centered / double(n - 1);
    return {mean, cov};
}

std::pair<double, double> mse_psnr(const Eigen::VectorXd& x, const Eigen::VectorXd& xhat,
                                   double peak) {
    if (x.size() != xhat.size()) throw std::invalid_argument("mse_psnr: shape mismatch");
    if (!(peak > 0.0)) throw std::invalid_argument("mse_psnr: peak must be > 0");
    const double mse = (x - xhat).squaredNorm() / x.size();
    if (mse == 0.0) return {0.0, std::numeric_limits<double>::infinity()};
    return {mse, 10.0 * std::log10(peak * peak / mse)};
}

double measured_snr(const Eigen::VectorXd& clean, const Eigen::VectorXd& noisy) {
    if (clean.size() != noisy.size()) throw std::invalid_argument("measured_snr: shape mismatch");
    const double sig = clean.squaredNorm();
    if (sig == 0.0) throw std::invalid_argument("measured_snr: zero clean signal");
    const double noise = (noisy - clean).squaredNorm();
    if (noise == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(sig / noise);
}

bool feasible(const Eigen::VectorXd& y, const ForwardOperator& op,
              const Eigen::VectorXd& x, const FeasibleSetQuery& q) {
    if (!std::isfinite(q.epsilon) || q.epsilon < 0.0)
        throw std::invalid_argument("feasible: epsilon must be finite and >= 0");
    return (y - op.mean_apply(x)).squaredNorm() <= q.epsilon;
}

double default_feasible_epsilon(const ForwardOperator& op) {
    return op.output_dim() * op.sigma_n() * op.sigma_n();
}

double ks_statistic(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("ks_statistic: empty input");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        if (a[i] <= b[j])
            ++i;
        else
            ++j;
        d = std::max(d, std::abs(double(i) / a.size() - double(j) / b.size()));
    }
    return d;
}

double ks_critical(double alpha, size_t n, size_t m) {
    const double c = std::sqrt(-0.5 * std::log(alpha / 2.0));
    return c * std::sqrt(double(n + m) / (double(n) * double(m)));
}

namespace {
std::vector<double> ranks(const std::vector<double>& v) {
    const size_t n = v.size();
    std::vector<size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return v[a] < v[b]; });
    std::vector<double> r(n);
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
        const double avg = 0.5 * (i + j) + 1.0;
        for (size_t k = i; k <= j; ++k) r[idx[k]] = avg;
        i = j + 1;
    }
    return r;
}
}  // namespace

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size() || a.size() < 2)
        throw std::invalid_argument("spearman: need equal-length inputs, n >= 2");
    const std::vector<double> ra = ranks(a), rb = ranks(b);
    const size_t n = a.size();
    double ma = 0, mb = 0;
    for (size_t i = 0; i < n; ++i) {
        ma += ra[i];
        mb += rb[i];
    }
    ma /= n;
    mb /= n;
    double num = 0, va = 0, vb = 0;
    for (size_t i = 0; i < n; ++i) {
        num += (ra[i] - ma) * (rb[i] - mb);
        va += (ra[i] - ma) * (ra[i] - ma);
        vb += (rb[i] - mb) * (rb[i] - mb);
    }
    return num / std::sqrt(va * vb);
}

double norminv(double p) {
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("norminv: p must be in (0,1)");
    // Acklam's rational approximation
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double dd[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                2.445134137142996e+00, 3.754408661907416e+00};
    const double plow = 0.02425, phigh = 1 - plow;
    double x;
    if (p < plow) {
        const double q = std::sqrt(-2 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((dd[0] * q + dd[1]) * q + dd[2]) * q + dd[3]) * q + 1);
    } else if (p <= phigh) {
        const double q = p - 0.5, r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
    } else {
        const double q = std::sqrt(-2 * std::log(1 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((dd[0] * q + dd[1]) * q + dd[2]) * q + dd[3]) * q + 1);
    }
    // one Halley refinement against erfc
    const double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
    const double u = e * std::sqrt(2.0 * M_PI) * std::exp(x * x / 2.0);
    x = x - u / (1.0 + x * u / 2.0);
    return x;
}

}  // namespace semcom
