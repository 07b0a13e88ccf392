// Online statistics (Welford mean/M2 with parallel merge) and the log-log
// least-squares fit used by the order-of-convergence experiments.
#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

namespace pdmps {

class OnlineStat {
public:
    void add(double x) {
        ++n_;
        double d = x - mean_;
        mean_ += d / static_cast<double>(n_);
        m2_ += d * (x - mean_);
    }

    // Chan et al. pairwise combination; order-independent up to rounding.
    void merge(const OnlineStat& other) {
        if (other.n_ == 0) return;
        if (n_ == 0) { *this = other; return; }
        double na = static_cast<double>(n_), nb = static_cast<double>(other.n_);
        double d = other.mean_ - mean_;
        double n = na + nb;
        mean_ += d * nb / n;
        m2_ += other.m2_ + d * d * na * nb / n;
        n_ += other.n_;
    }

    std::size_t count() const { return n_; }
    double mean() const { return mean_; }
    double m2() const { return m2_; }
    double sample_variance() const {
        if (n_ < 2) return std::numeric_limits<double>::quiet_NaN();
        return m2_ / static_cast<double>(n_ - 1);
    }
    double stddev() const { return std::sqrt(sample_variance()); }
    // Standard error of the mean.
    double se() const {
        if (n_ < 2) return std::numeric_limits<double>::quiet_NaN();
        return std::sqrt(sample_variance() / static_cast<double>(n_));
    }

private:
    std::size_t n_ = 0;
    double mean_ = 0.0;
    double m2_ = 0.0;
};

struct LogLogFit {
    double slope = std::numeric_limits<double>::quiet_NaN();
    double intercept = std::numeric_limits<double>::quiet_NaN();
    std::size_t used = 0;      // points that entered the fit
    std::size_t rejected = 0;  // nonpositive ordinates/abscissae dropped
};

// Ordinary least squares on (log x, log y). Points with a nonpositive
// coordinate cannot be mapped to log space and are counted as rejected.
inline LogLogFit fit_loglog(const std::vector<std::pair<double, double>>& pts) {
    std::vector<double> lx, ly;
    LogLogFit fit;
    for (const auto& [x, y] : pts) {
        if (x <= 0.0 || y <= 0.0) {
            ++fit.rejected;
            continue;
        }
        lx.push_back(std::log(x));
        ly.push_back(std::log(y));
    }
    fit.used = lx.size();
    if (fit.used < 2) return fit;
    double n = static_cast<double>(fit.used);
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sx += lx[i]; sy += ly[i];
        sxx += lx[i] * lx[i]; sxy += lx[i] * ly[i];
    }
    double denom = n * sxx - sx * sx;
    if (denom == 0.0) throw std::invalid_argument("fit_loglog: degenerate abscissae");
    fit.slope = (n * sxy - sx * sy) / denom;
    fit.intercept = (sy - fit.slope * sx) / n;
    return fit;
}

}  // namespace pdmps
