#include "semcom/schedule.hpp"

#include <cmath>
#include <stdexcept>

namespace semcom {

NoiseSchedule NoiseSchedule::vp_linear(double beta_min, double beta_max, int steps) {
    if (steps < 1) throw std::invalid_argument("vp_linear: steps must be >= 1");
    if (!(beta_min > 0.0 && beta_max < 1.0 && beta_min <= beta_max))
        throw std::invalid_argument("vp_linear: need 0 < beta_min <= beta_max < 1");
    NoiseSchedule s;
    s.kind_ = ScheduleKind::VP;
    s.steps_ = steps;
    s.lo_ = beta_min;
    s.hi_ = beta_max;
    s.betas_.resize(steps);
    s.alpha_bar_.resize(steps);
    double prod = 1.0;
    for (int i = 0; i < steps; ++i) {
        const double b = steps == 1
                             ? beta_min
                             : beta_min + (beta_max - beta_min) * i / double(steps - 1);
        s.betas_[i] = b;
        prod *= 1.0 - b;
        s.alpha_bar_[i] = prod;
        if (!(prod > 0.0 && prod < 1.0))
            throw std::invalid_argument("vp_linear: alpha_bar left (0,1)");
    }
    return s;
}

NoiseSchedule NoiseSchedule::ve_geometric(double sigma_min, double sigma_max, int steps) {
    if (steps < 1) throw std::invalid_argument("ve_geometric: steps must be >= 1");
    if (!(sigma_min > 0.0 && sigma_min < sigma_max))
        throw std::invalid_argument("ve_geometric: need 0 < sigma_min < sigma_max");
    NoiseSchedule s;
    s.kind_ = ScheduleKind::VE;
    s.steps_ = steps;
    s.lo_ = sigma_min;
    s.hi_ = sigma_max;
    s.sigmas_.resize(steps);
    const double ratio = sigma_max / sigma_min;
    for (int i = 0; i < steps; ++i)
        s.sigmas_[i] =
            steps == 1 ? sigma_min : sigma_min * std::pow(ratio, i / double(steps - 1));
    return s;
}

void NoiseSchedule::check_index(int i, int lo) const {
    if (i < lo || i > steps_)
        throw std::out_of_range("NoiseSchedule: step index out of range");
}

double NoiseSchedule::beta(int i) const {
    if (kind_ != ScheduleKind::VP) throw std::invalid_argument("beta: VP only");
    check_index(i, 1);
    return betas_[i - 1];
}

double NoiseSchedule::sigma(int i) const {
    if (kind_ != ScheduleKind::VE) throw std::invalid_argument("sigma: VE only");
    check_index(i, 0);
    return i == 0 ? 0.0 : sigmas_[i - 1];
}

double NoiseSchedule::alpha_bar(int i) const {
    if (kind_ != ScheduleKind::VP) throw std::invalid_argument("alpha_bar: VP only");
    check_index(i, 0);
    return i == 0 ? 1.0 : alpha_bar_[i - 1];
}

std::pair<double, double> NoiseSchedule::kernel(int i) const {
    check_index(i, 0);
    if (i == 0) return {1.0, 0.0};
    if (kind_ == ScheduleKind::VP) {
        const double ab = alpha_bar_[i - 1];
        return {std::sqrt(ab), 1.0 - ab};
    }
    const double sg = sigmas_[i - 1];
    return {1.0, sg * sg};
}

double NoiseSchedule::alpha_t(int i) const { return kernel(i).first; }

double NoiseSchedule::sigma_t(int i) const { return std::sqrt(kernel(i).second); }

double NoiseSchedule::time_of(int i) const {
    check_index(i, 0);
    if (kind_ == ScheduleKind::VP) return double(i) / steps_;
    if (i == 0) return 0.0;
    return steps_ == 1 ? 1.0 : double(i - 1) / (steps_ - 1);
}

int NoiseSchedule::index_of(double t) const {
    int i;
    if (kind_ == ScheduleKind::VP) {
        i = static_cast<int>(std::lround(t * steps_));
    } else {
        i = 1 + static_cast<int>(std::lround(t * (steps_ - 1)));
    }
    return std::min(std::max(i, 1), steps_);
}

double NoiseSchedule::beta_time(double t) const {
    if (kind_ != ScheduleKind::VP) throw std::invalid_argument("beta_time: VP only");
    return steps_ * (lo_ + t * (hi_ - lo_));
}

double NoiseSchedule::alpha_bar_time(double t) const {
    if (kind_ != ScheduleKind::VP) throw std::invalid_argument("alpha_bar_time: VP only");
    return std::exp(-steps_ * (lo_ * t + 0.5 * (hi_ - lo_) * t * t));
}

double NoiseSchedule::sigma_time(double t) const {
    if (kind_ != ScheduleKind::VE) throw std::invalid_argument("sigma_time: VE only");
    return lo_ * std::pow(hi_ / lo_, t);
}

double NoiseSchedule::dsigma2_time(double t) const {
    const double s = sigma_time(t);
    return 2.0 * s * s * std::log(hi_ / lo_);
}

std::pair<double, double> NoiseSchedule::kernel_time(double t) const {
    if (kind_ == ScheduleKind::VP) {
        const double ab = alpha_bar_time(t);
        return {std::sqrt(ab), 1.0 - ab};
    }
    const double s = sigma_time(t);
    return {1.0, s * s};
}

}  // namespace semcom
