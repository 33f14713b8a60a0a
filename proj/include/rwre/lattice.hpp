#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <ostream>
#include <stdexcept>
#include <string>

#include "rwre/prng.hpp"

namespace rwre {

/// A point of Z^d with a small fixed coordinate capacity. Value type,
/// exact integer arithmetic throughout. d is a runtime property; all
/// binary operations require matching dimensions.
class LatticePoint {
  public:
    static constexpr int kMaxDim = 6;

    LatticePoint() : dim_(0) { coords_.fill(0); }

    explicit LatticePoint(int dim) : dim_(dim) {
        check_dim(dim);
        coords_.fill(0);
    }

    LatticePoint(std::initializer_list<std::int64_t> cs) : dim_(static_cast<int>(cs.size())) {
        check_dim(dim_);
        coords_.fill(0);
        int i = 0;
        for (std::int64_t c : cs) coords_[i++] = c;
    }

    int dim() const noexcept { return dim_; }

    std::int64_t operator[](int i) const noexcept { return coords_[i]; }
    std::int64_t& operator[](int i) noexcept { return coords_[i]; }

    friend LatticePoint operator+(const LatticePoint& a, const LatticePoint& b) {
        LatticePoint r(a.dim_);
        for (int i = 0; i < a.dim_; ++i) r.coords_[i] = a.coords_[i] + b.coords_[i];
        return r;
    }

    friend LatticePoint operator-(const LatticePoint& a, const LatticePoint& b) {
        LatticePoint r(a.dim_);
        for (int i = 0; i < a.dim_; ++i) r.coords_[i] = a.coords_[i] - b.coords_[i];
        return r;
    }

    LatticePoint& operator+=(const LatticePoint& b) {
        for (int i = 0; i < dim_; ++i) coords_[i] += b.coords_[i];
        return *this;
    }

    friend bool operator==(const LatticePoint& a, const LatticePoint& b) {
        if (a.dim_ != b.dim_) return false;
        for (int i = 0; i < a.dim_; ++i)
            if (a.coords_[i] != b.coords_[i]) return false;
        return true;
    }

    friend bool operator!=(const LatticePoint& a, const LatticePoint& b) { return !(a == b); }

    /// Lexicographic order; used as the canonical site order for
    /// reproducible float accumulation.
    friend bool operator<(const LatticePoint& a, const LatticePoint& b) {
        for (int i = 0; i < a.dim_; ++i) {
            if (a.coords_[i] != b.coords_[i]) return a.coords_[i] < b.coords_[i];
        }
        return false;
    }

    bool is_zero() const noexcept {
        for (int i = 0; i < dim_; ++i)
            if (coords_[i] != 0) return false;
        return true;
    }

    std::uint64_t hash() const noexcept {
        std::uint64_t h = 0x4C41545449434531ull;
        h = prf::absorb(h, static_cast<std::uint64_t>(dim_));
        for (int i = 0; i < dim_; ++i)
            h = prf::absorb(h, static_cast<std::uint64_t>(coords_[i]));
        return h;
    }

    std::string to_string() const {
        std::string s = "(";
        for (int i = 0; i < dim_; ++i) {
            if (i) s += ",";
            s += std::to_string(coords_[i]);
        }
        return s + ")";
    }

    friend std::ostream& operator<<(std::ostream& os, const LatticePoint& p) {
        return os << p.to_string();
    }

  private:
    static void check_dim(int d) {
        if (d < 0 || d > kMaxDim)
            throw std::invalid_argument("LatticePoint: dimension out of range [0," +
                                        std::to_string(kMaxDim) + "]: " + std::to_string(d));
    }

    std::array<std::int64_t, kMaxDim> coords_;
    int dim_;
};

/// Exact integer dot product.
inline std::int64_t dot(const LatticePoint& a, const LatticePoint& b) {
    if (a.dim() != b.dim()) throw std::invalid_argument("dot: dimension mismatch");
    std::int64_t s = 0;
    for (int i = 0; i < a.dim(); ++i) s += a[i] * b[i];
    return s;
}

/// Small real vector companion to LatticePoint (drifts, velocities, means).
class RealVec {
  public:
    RealVec() : dim_(0) { v_.fill(0.0); }
    explicit RealVec(int dim) : dim_(dim) { v_.fill(0.0); }
    RealVec(std::initializer_list<double> cs) : dim_(static_cast<int>(cs.size())) {
        v_.fill(0.0);
        int i = 0;
        for (double c : cs) v_[i++] = c;
    }
    explicit RealVec(const LatticePoint& p) : dim_(p.dim()) {
        v_.fill(0.0);
        for (int i = 0; i < dim_; ++i) v_[i] = static_cast<double>(p[i]);
    }

    int dim() const noexcept { return dim_; }
    double operator[](int i) const noexcept { return v_[i]; }
    double& operator[](int i) noexcept { return v_[i]; }

    friend RealVec operator+(const RealVec& a, const RealVec& b) {
        RealVec r(a.dim_);
        for (int i = 0; i < a.dim_; ++i) r.v_[i] = a.v_[i] + b.v_[i];
        return r;
    }
    friend RealVec operator-(const RealVec& a, const RealVec& b) {
        RealVec r(a.dim_);
        for (int i = 0; i < a.dim_; ++i) r.v_[i] = a.v_[i] - b.v_[i];
        return r;
    }
    friend RealVec operator*(double c, const RealVec& a) {
        RealVec r(a.dim_);
        for (int i = 0; i < a.dim_; ++i) r.v_[i] = c * a.v_[i];
        return r;
    }
    RealVec& operator+=(const RealVec& b) {
        for (int i = 0; i < dim_; ++i) v_[i] += b.v_[i];
        return *this;
    }

    double norm2() const noexcept {
        double s = 0;
        for (int i = 0; i < dim_; ++i) s += v_[i] * v_[i];
        return s;
    }

  private:
    std::array<double, LatticePoint::kMaxDim> v_;
    int dim_;
};

inline double dot(const RealVec& a, const RealVec& b) {
    double s = 0;
    for (int i = 0; i < a.dim(); ++i) s += a[i] * b[i];
    return s;
}

inline double dot(const RealVec& a, const LatticePoint& b) {
    double s = 0;
    for (int i = 0; i < a.dim(); ++i) s += a[i] * static_cast<double>(b[i]);
    return s;
}

inline double euclidean_norm(const RealVec& a) {
    double s = a.norm2();
    return s > 0 ? std::sqrt(s) : 0.0;
}

inline double euclidean_norm(const LatticePoint& p) {
    double s = 0;
    for (int i = 0; i < p.dim(); ++i) s += static_cast<double>(p[i]) * static_cast<double>(p[i]);
    return std::sqrt(s);
}

}  // namespace rwre

template <>
struct std::hash<rwre::LatticePoint> {
    std::size_t operator()(const rwre::LatticePoint& p) const noexcept {
        return static_cast<std::size_t>(p.hash());
    }
};
