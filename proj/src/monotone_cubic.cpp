#include "ocs/monotone_cubic.hpp"

#include <algorithm>
#include <cmath>

#include "ocs/errors.hpp"

namespace ocs {

namespace {

int sign_of(double v) { return (v > 0.0) - (v < 0.0); }

}  // namespace

MonotoneCubic::MonotoneCubic(std::vector<double> x, std::vector<double> y)
    : x_(std::move(x)), y_(std::move(y)) {
    const std::size_t n = x_.size();
    if (n < 2 || y_.size() != n) throw DomainError("MonotoneCubic needs >= 2 matching knots");
    d_.assign(n, 0.0);
    std::vector<double> secant(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        secant[i] = (y_[i + 1] - y_[i]) / (x_[i + 1] - x_[i]);
    }
    if (n == 2) {
        d_[0] = d_[1] = secant[0];
    } else {
        for (std::size_t i = 1; i + 1 < n; ++i) {
            const double h0 = x_[i] - x_[i - 1];
            const double h1 = x_[i + 1] - x_[i];
            d_[i] = (h1 * secant[i - 1] + h0 * secant[i]) / (h0 + h1);
        }
        const double h0 = x_[1] - x_[0];
        const double h1 = x_[2] - x_[1];
        d_[0] = ((2.0 * h0 + h1) * secant[0] - h0 * secant[1]) / (h0 + h1);
        const double g0 = x_[n - 1] - x_[n - 2];
        const double g1 = x_[n - 2] - x_[n - 3];
        d_[n - 1] = ((2.0 * g0 + g1) * secant[n - 2] - g0 * secant[n - 3]) / (g0 + g1);
    }
    validate_and_limit();
}

MonotoneCubic::MonotoneCubic(std::vector<double> x, std::vector<double> y,
                             std::vector<double> dydx)
    : x_(std::move(x)), y_(std::move(y)), d_(std::move(dydx)) {
    if (x_.size() < 2 || y_.size() != x_.size() || d_.size() != x_.size()) {
        throw DomainError("MonotoneCubic needs >= 2 matching knots and slopes");
    }
    validate_and_limit();
}

void MonotoneCubic::validate_and_limit() {
    const std::size_t n = x_.size();
    for (std::size_t i = 0; i + 1 < n; ++i) {
        if (!(x_[i + 1] > x_[i])) throw DomainError("MonotoneCubic knots must be strictly increasing");
    }
    // Fritsch-Carlson: zero slopes against the secant sign, then clamp to
    // the radius-3 circle on each interval.
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const double s = (y_[i + 1] - y_[i]) / (x_[i + 1] - x_[i]);
        if (s == 0.0) {
            d_[i] = 0.0;
            d_[i + 1] = 0.0;
            continue;
        }
        if (sign_of(d_[i]) != sign_of(s)) d_[i] = 0.0;
        if (sign_of(d_[i + 1]) != sign_of(s)) d_[i + 1] = 0.0;
        const double a = d_[i] / s;
        const double b = d_[i + 1] / s;
        const double r2 = a * a + b * b;
        if (r2 > 9.0) {
            const double tau = 3.0 / std::sqrt(r2);
            d_[i] = tau * a * s;
            d_[i + 1] = tau * b * s;
        }
    }
}

std::size_t MonotoneCubic::interval(double xv) const {
    if (xv <= x_.front()) return 0;
    if (xv >= x_.back()) return x_.size() - 2;
    auto it = std::upper_bound(x_.begin(), x_.end(), xv);
    return static_cast<std::size_t>(it - x_.begin()) - 1;
}

double MonotoneCubic::value(double xv) const {
    const std::size_t i = interval(xv);
    const double h = x_[i + 1] - x_[i];
    const double t = (xv - x_[i]) / h;
    const double t2 = t * t;
    const double t3 = t2 * t;
    const double h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
    const double h10 = t3 - 2.0 * t2 + t;
    const double h01 = -2.0 * t3 + 3.0 * t2;
    const double h11 = t3 - t2;
    return h00 * y_[i] + h10 * h * d_[i] + h01 * y_[i + 1] + h11 * h * d_[i + 1];
}

double MonotoneCubic::derivative(double xv) const {
    const std::size_t i = interval(xv);
    const double h = x_[i + 1] - x_[i];
    const double t = (xv - x_[i]) / h;
    const double t2 = t * t;
    const double d00 = (6.0 * t2 - 6.0 * t) / h;
    const double d10 = 3.0 * t2 - 4.0 * t + 1.0;
    const double d01 = (-6.0 * t2 + 6.0 * t) / h;
    const double d11 = 3.0 * t2 - 2.0 * t;
    return d00 * y_[i] + d10 * d_[i] + d01 * y_[i + 1] + d11 * d_[i + 1];
}

UniformTable::UniformTable(double lo, double hi, std::vector<double> values)
    : lo_(lo), hi_(hi), v_(std::move(values)) {
    if (v_.size() < 2 || !(hi > lo)) throw DomainError("UniformTable needs hi > lo and >= 2 values");
    last_ = static_cast<double>(v_.size() - 1);
    inv_step_ = last_ / (hi_ - lo_);
}

}  // namespace ocs
