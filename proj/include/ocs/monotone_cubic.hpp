#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace ocs {

/// Shape-preserving piecewise cubic Hermite interpolant.
///
/// Knots must be strictly increasing in x and the data monotone in y.
/// Slopes are either supplied (e.g. exact derivatives from an ODE) or
/// estimated with the three-point formula; both are passed through the
/// Fritsch-Carlson limiter so the interpolant is monotone on every interval.
class MonotoneCubic {
public:
    MonotoneCubic() = default;
    MonotoneCubic(std::vector<double> x, std::vector<double> y);
    MonotoneCubic(std::vector<double> x, std::vector<double> y, std::vector<double> dydx);

    double operator()(double xv) const { return value(xv); }
    double value(double xv) const;
    double derivative(double xv) const;

    double x_min() const { return x_.front(); }
    double x_max() const { return x_.back(); }
    std::size_t size() const { return x_.size(); }
    bool empty() const { return x_.empty(); }

    std::span<const double> knots() const { return x_; }
    std::span<const double> values() const { return y_; }
    std::span<const double> slopes() const { return d_; }

private:
    void validate_and_limit();
    std::size_t interval(double xv) const;

    std::vector<double> x_;
    std::vector<double> y_;
    std::vector<double> d_;
};

/// Uniform-grid lookup table with linear interpolation, used in the
/// Monte Carlo inner loop. Outside [lo, hi] the end values are held.
class UniformTable {
public:
    UniformTable() = default;
    UniformTable(double lo, double hi, std::vector<double> values);

    double operator()(double xv) const noexcept {
        double s = (xv - lo_) * inv_step_;
        if (s <= 0.0) return v_.front();
        if (s >= last_) return v_.back();
        const auto i = static_cast<std::size_t>(s);
        const double f = s - static_cast<double>(i);
        return v_[i] + f * (v_[i + 1] - v_[i]);
    }

    double lo() const noexcept { return lo_; }
    double hi() const noexcept { return hi_; }
    std::size_t size() const noexcept { return v_.size(); }

private:
    double lo_ = 0.0;
    double hi_ = 1.0;
    double inv_step_ = 1.0;
    double last_ = 0.0;
    std::vector<double> v_;
};

}  // namespace ocs
