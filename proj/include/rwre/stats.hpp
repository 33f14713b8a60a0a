#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include "rwre/lattice.hpp"

namespace rwre {

/// Point estimate with a normal-approximation standard error.
/// T is double, RealVec or SymMat; std_error matches the shape of value.
template <class T>
struct EstimateWithError {
    T value{};
    T std_error{};
    std::int64_t replicas = 0;
};

/// Streaming mean / standard error (Welford).
class Accumulator {
  public:
    void add(double x) {
        ++n_;
        const double d = x - mean_;
        mean_ += d / static_cast<double>(n_);
        m2_ += d * (x - mean_);
    }
    std::int64_t count() const { return n_; }
    double mean() const { return mean_; }
    double variance() const { return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0; }
    double sd() const { return std::sqrt(variance()); }
    double se() const { return n_ > 0 ? sd() / std::sqrt(static_cast<double>(n_)) : 0.0; }
    EstimateWithError<double> estimate() const { return {mean(), se(), n_}; }

  private:
    std::int64_t n_ = 0;
    double mean_ = 0.0;
    double m2_ = 0.0;
};

class VecAccumulator {
  public:
    explicit VecAccumulator(int dim) : acc_(static_cast<std::size_t>(dim)) {}
    void add(const RealVec& v) {
        for (int i = 0; i < static_cast<int>(acc_.size()); ++i) acc_[i].add(v[i]);
    }
    std::int64_t count() const { return acc_.empty() ? 0 : acc_[0].count(); }
    RealVec mean() const {
        RealVec m(static_cast<int>(acc_.size()));
        for (int i = 0; i < m.dim(); ++i) m[i] = acc_[i].mean();
        return m;
    }
    RealVec se() const {
        RealVec s(static_cast<int>(acc_.size()));
        for (int i = 0; i < s.dim(); ++i) s[i] = acc_[i].se();
        return s;
    }
    EstimateWithError<RealVec> estimate() const { return {mean(), se(), count()}; }

  private:
    std::vector<Accumulator> acc_;
};

/// Dense symmetric d x d matrix, d <= LatticePoint::kMaxDim.
class SymMat {
  public:
    SymMat() : dim_(0) { a_.fill(0.0); }
    explicit SymMat(int dim) : dim_(dim) { a_.fill(0.0); }

    int dim() const { return dim_; }
    // Only the lower triangle is stored; reads canonicalize the index pair.
    double operator()(int i, int j) const { return a_[idx(std::max(i, j), std::min(i, j))]; }
    double& at(int i, int j) { return a_[idx(std::max(i, j), std::min(i, j))]; }

    static SymMat outer(const RealVec& v) {
        SymMat m(v.dim());
        for (int i = 0; i < v.dim(); ++i)
            for (int j = 0; j <= i; ++j) m.at(i, j) = v[i] * v[j];
        return m;
    }

    friend SymMat operator+(const SymMat& x, const SymMat& y) {
        SymMat r(x.dim_);
        for (std::size_t k = 0; k < r.a_.size(); ++k) r.a_[k] = x.a_[k] + y.a_[k];
        return r;
    }
    friend SymMat operator-(const SymMat& x, const SymMat& y) {
        SymMat r(x.dim_);
        for (std::size_t k = 0; k < r.a_.size(); ++k) r.a_[k] = x.a_[k] - y.a_[k];
        return r;
    }
    friend SymMat operator*(double c, const SymMat& x) {
        SymMat r(x.dim_);
        for (std::size_t k = 0; k < r.a_.size(); ++k) r.a_[k] = c * x.a_[k];
        return r;
    }
    SymMat& operator+=(const SymMat& y) {
        for (std::size_t k = 0; k < a_.size(); ++k) a_[k] += y.a_[k];
        return *this;
    }

    double quadratic_form(const RealVec& v) const {
        double s = 0.0;
        for (int i = 0; i < dim_; ++i)
            for (int j = 0; j < dim_; ++j) s += v[i] * (*this)(i, j) * v[j];
        return s;
    }

    double frobenius() const {
        double s = 0.0;
        for (int i = 0; i < dim_; ++i)
            for (int j = 0; j < dim_; ++j) s += (*this)(i, j) * (*this)(i, j);
        return std::sqrt(s);
    }

    double max_abs() const {
        double m = 0.0;
        for (int i = 0; i < dim_; ++i)
            for (int j = 0; j <= i; ++j) m = std::max(m, std::abs((*this)(i, j)));
        return m;
    }

    /// Eigenvalues by cyclic Jacobi rotations (symmetric, small d).
    std::vector<double> eigenvalues() const {
        const int d = std::min(dim_, static_cast<int>(LatticePoint::kMaxDim));
        std::array<std::array<double, LatticePoint::kMaxDim>, LatticePoint::kMaxDim> m{};
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) m[i][j] = (*this)(i, j);
        for (int sweep = 0; sweep < 64; ++sweep) {
            double off = 0.0;
            for (int p = 0; p < d; ++p)
                for (int q = p + 1; q < d; ++q) off += m[p][q] * m[p][q];
            if (off < 1e-26) break;
            for (int p = 0; p < d; ++p) {
                for (int q = p + 1; q < d; ++q) {
                    if (m[p][q] == 0.0) continue;
                    const double theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                    const double t = (theta >= 0 ? 1.0 : -1.0) /
                                     (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                    const double c = 1.0 / std::sqrt(t * t + 1.0);
                    const double s = t * c;
                    for (int k = 0; k < d; ++k) {
                        const double mkp = m[k][p], mkq = m[k][q];
                        m[k][p] = c * mkp - s * mkq;
                        m[k][q] = s * mkp + c * mkq;
                    }
                    for (int k = 0; k < d; ++k) {
                        const double mpk = m[p][k], mqk = m[q][k];
                        m[p][k] = c * mpk - s * mqk;
                        m[q][k] = s * mpk + c * mqk;
                    }
                }
            }
        }
        std::vector<double> ev(d);
        for (int i = 0; i < d; ++i) ev[i] = m[i][i];
        std::sort(ev.begin(), ev.end());
        return ev;
    }

  private:
    int idx(int i, int j) const { return i * LatticePoint::kMaxDim + j; }
    int dim_;
    std::array<double, LatticePoint::kMaxDim * LatticePoint::kMaxDim> a_;

    friend class MatAccumulator;
};

class MatAccumulator {
  public:
    explicit MatAccumulator(int dim) : dim_(dim), acc_(LatticePoint::kMaxDim * LatticePoint::kMaxDim) {}
    void add(const SymMat& m) {
        for (std::size_t k = 0; k < acc_.size(); ++k) acc_[k].add(m.a_[k]);
    }
    std::int64_t count() const { return acc_.empty() ? 0 : acc_[0].count(); }
    SymMat mean() const {
        SymMat m(dim_);
        for (std::size_t k = 0; k < acc_.size(); ++k) m.a_[k] = acc_[k].mean();
        return m;
    }
    SymMat se() const {
        SymMat m(dim_);
        for (std::size_t k = 0; k < acc_.size(); ++k) m.a_[k] = acc_[k].se();
        return m;
    }

  private:
    int dim_;
    std::vector<Accumulator> acc_;
};

// ---------------------------------------------------------------------------
// Regression utilities.
// ---------------------------------------------------------------------------

struct ScanPoint {
    std::int64_t n = 0;
    double value = 0.0;
    double se = 0.0;
};

/// Scan over horizons with a fitted growth exponent (log-log WLS slope).
/// exponent_defined is false for degenerate scans (fewer than 3 positive
/// points, e.g. a deterministic environment).
struct ScanResult {
    std::vector<ScanPoint> points;
    double fitted_exponent = std::numeric_limits<double>::quiet_NaN();
    double exponent_se = std::numeric_limits<double>::quiet_NaN();
    bool exponent_defined = false;
};

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double slope_se = 0.0;
};

/// Weighted least squares y ~ a + b x. Weights w_i > 0; slope SE scaled by
/// the weighted residual variance (m - 2 dof).
inline LinearFit weighted_linear_fit(const std::vector<double>& xs, const std::vector<double>& ys,
                                     const std::vector<double>& ws) {
    const std::size_t m = xs.size();
    if (m < 3) throw std::invalid_argument("weighted_linear_fit: need at least 3 points");
    double sw = 0, swx = 0, swy = 0;
    for (std::size_t i = 0; i < m; ++i) {
        sw += ws[i];
        swx += ws[i] * xs[i];
        swy += ws[i] * ys[i];
    }
    const double xbar = swx / sw, ybar = swy / sw;
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < m; ++i) {
        sxx += ws[i] * (xs[i] - xbar) * (xs[i] - xbar);
        sxy += ws[i] * (xs[i] - xbar) * (ys[i] - ybar);
    }
    if (sxx <= 0.0) throw std::invalid_argument("weighted_linear_fit: degenerate abscissae");
    LinearFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = ybar - fit.slope * xbar;
    double ssr = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        const double r = ys[i] - fit.intercept - fit.slope * xs[i];
        ssr += ws[i] * r * r;
    }
    fit.slope_se = std::sqrt(std::max(ssr / static_cast<double>(m - 2), 0.0) / sxx);
    return fit;
}

/// Growth exponent of value ~ c n^b: WLS slope of log(value) against log(n),
/// weighted by the delta-method variances (se/value)^2. Points must have
/// strictly increasing n and positive values.
inline std::pair<double, double> fit_exponent(const std::vector<ScanPoint>& points) {
    if (points.size() < 3) throw std::invalid_argument("fit_exponent: need at least 3 points");
    std::vector<double> xs, ys, ws;
    std::int64_t prev_n = -1;
    bool any_se = false;
    for (const auto& p : points) {
        if (p.n <= prev_n) throw std::invalid_argument("fit_exponent: n must be strictly increasing");
        prev_n = p.n;
        if (!(p.value > 0.0)) throw std::invalid_argument("fit_exponent: nonpositive value");
        xs.push_back(std::log(static_cast<double>(p.n)));
        ys.push_back(std::log(p.value));
        if (p.se > 0.0) any_se = true;
    }
    for (const auto& p : points) {
        const double rel = p.se / p.value;
        ws.push_back(any_se ? 1.0 / std::max(rel * rel, 1e-30) : 1.0);
    }
    const LinearFit fit = weighted_linear_fit(xs, ys, ws);
    return {fit.slope, fit.slope_se};
}

/// Geometric-rate fit: slope of log(value) against n (not log n).
inline LinearFit fit_log_linear(const std::vector<ScanPoint>& points) {
    if (points.size() < 3) throw std::invalid_argument("fit_log_linear: need at least 3 points");
    std::vector<double> xs, ys, ws;
    bool any_se = false;
    for (const auto& p : points)
        if (p.se > 0.0) any_se = true;
    for (const auto& p : points) {
        if (!(p.value > 0.0)) throw std::invalid_argument("fit_log_linear: nonpositive value");
        xs.push_back(static_cast<double>(p.n));
        ys.push_back(std::log(p.value));
        const double rel = p.se / p.value;
        ws.push_back(any_se ? 1.0 / std::max(rel * rel, 1e-30) : 1.0);
    }
    return weighted_linear_fit(xs, ys, ws);
}

// ---------------------------------------------------------------------------
// Distribution tests.
// ---------------------------------------------------------------------------

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

/// Two-sided Kolmogorov-Smirnov distance of samples against N(mu, sigma^2).
inline double ks_statistic_normal(std::vector<double> samples, double mu, double sigma) {
    if (samples.empty() || sigma <= 0.0)
        throw std::invalid_argument("ks_statistic_normal: empty sample or nonpositive sigma");
    std::sort(samples.begin(), samples.end());
    const double n = static_cast<double>(samples.size());
    double d = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double f = normal_cdf((samples[i] - mu) / sigma);
        d = std::max(d, std::abs(f - static_cast<double>(i) / n));
        d = std::max(d, std::abs(f - static_cast<double>(i + 1) / n));
    }
    return d;
}

}  // namespace rwre
