#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <gmpxx.h>
#include <json.hpp>

#include "rwre/lattice.hpp"

namespace rwre {

using Rational = mpq_class;
using RationalVector = std::vector<Rational>;

/// Inconsistent or ambiguous direction input (a declared sign pattern the
/// exact arithmetic cannot realize or distinguish at the given precision).
class DirectionError : public std::runtime_error {
  public:
    explicit DirectionError(const std::string& what) : std::runtime_error(what) {}
};

inline Rational rational_dot(const RationalVector& a, const LatticePoint& x) {
    if (static_cast<int>(a.size()) != x.dim())
        throw std::invalid_argument("rational_dot: dimension mismatch");
    Rational s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * Rational(x[static_cast<int>(i)]);
    return s;
}

inline Rational rational_dot(const RationalVector& a, const RationalVector& b) {
    if (a.size() != b.size()) throw std::invalid_argument("rational_dot: dimension mismatch");
    Rational s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

/// Exact determinant by Gaussian elimination over Q. Destroys its argument.
inline Rational rational_det(std::vector<RationalVector> m) {
    const std::size_t n = m.size();
    for (const auto& row : m)
        if (row.size() != n) throw std::invalid_argument("rational_det: matrix must be square");
    Rational det = 1;
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        while (pivot < n && m[pivot][col] == 0) ++pivot;
        if (pivot == n) return Rational(0);
        if (pivot != col) {
            std::swap(m[pivot], m[col]);
            det = -det;
        }
        det *= m[col][col];
        for (std::size_t row = col + 1; row < n; ++row) {
            if (m[row][col] == 0) continue;
            const Rational factor = m[row][col] / m[col][col];
            for (std::size_t k = col; k < n; ++k) m[row][k] -= factor * m[col][k];
        }
    }
    return det;
}

/// Generalized vector product F(h_1, ..., h_{d-1}): the unique z with
/// det[h_1, ..., h_{d-1}, x] = x . z for all x. Component i is the signed
/// cofactor of the column matrix with row i removed. Exact; rational inputs
/// give rational output, integer inputs give integer output.
inline RationalVector vector_product(const std::vector<RationalVector>& h) {
    if (h.empty()) throw std::invalid_argument("vector_product: needs d-1 >= 1 vectors");
    const std::size_t d = h.size() + 1;
    for (const auto& v : h)
        if (v.size() != d)
            throw std::invalid_argument("vector_product: expected d-1 vectors of dimension d");

    RationalVector z(d);
    std::vector<RationalVector> minor(d - 1, RationalVector(d - 1));
    for (std::size_t i = 0; i < d; ++i) {
        std::size_t r = 0;
        for (std::size_t row = 0; row < d; ++row) {
            if (row == i) continue;
            for (std::size_t col = 0; col < d - 1; ++col) minor[r][col] = h[col][row];
            ++r;
        }
        const Rational det = rational_det(minor);
        // (-1)^{(i+1) + d} with 1-based row index i+1.
        z[i] = ((i + 1 + d) % 2 == 0) ? det : -det;
    }
    return z;
}

enum class SignClass { kZero, kPositive };

struct DirectionResult {
    LatticePoint u_hat;
    std::vector<SignClass> certificate;  // classification of each point of A
};

/// Real direction given as doubles plus an explicit zero classification:
/// indices of A whose dot with v is declared exactly zero, and a precision
/// below which an undeclared dot product is considered ambiguous.
struct RealDirection {
    std::vector<double> values;
    std::vector<std::size_t> zero_indices;
    double precision = 0.0;
};

namespace detail_direction {

/// Gram-Schmidt over Q: orthogonal (not normalized) basis of the span.
inline std::vector<RationalVector> orthogonalize(const std::vector<RationalVector>& basis) {
    std::vector<RationalVector> ortho;
    for (const auto& v : basis) {
        RationalVector w = v;
        for (const auto& o : ortho) {
            const Rational coef = rational_dot(w, o) / rational_dot(o, o);
            for (std::size_t i = 0; i < w.size(); ++i) w[i] -= coef * o[i];
        }
        bool nonzero = false;
        for (const auto& c : w)
            if (c != 0) nonzero = true;
        if (nonzero) ortho.push_back(std::move(w));
    }
    return ortho;
}

inline RationalVector project_off(const RationalVector& v,
                                  const std::vector<RationalVector>& ortho) {
    RationalVector w = v;
    for (const auto& o : ortho) {
        const Rational coef = rational_dot(w, o) / rational_dot(o, o);
        for (std::size_t i = 0; i < w.size(); ++i) w[i] -= coef * o[i];
    }
    return w;
}

/// Shared construction: exact projection of v off the span of the declared
/// zero set, optional denominator-limited rounding (float inputs), integer
/// scaling, and an exact certificate check.
inline DirectionResult rationalize_core(const std::vector<LatticePoint>& A,
                                        const RationalVector& v_rat,
                                        const std::vector<bool>& is_zero, bool round) {
    const std::size_t d = v_rat.size();

    // Orthogonal basis of the span of the declared-zero points. Every zero
    // point lies in this span, so orthogonality to the basis settles them all.
    std::vector<RationalVector> zero_vectors;
    for (std::size_t idx = 0; idx < A.size(); ++idx) {
        if (!is_zero[idx]) continue;
        RationalVector x(d);
        for (std::size_t i = 0; i < d; ++i) x[i] = Rational(A[idx][static_cast<int>(i)]);
        zero_vectors.push_back(std::move(x));
    }
    const std::vector<RationalVector> ortho = orthogonalize(zero_vectors);

    RationalVector w = project_off(v_rat, ortho);
    bool w_zero = true;
    for (const auto& c : w)
        if (c != 0) w_zero = false;
    if (w_zero)
        throw DirectionError("rationalize_direction: direction lies in the span of the "
                             "declared zero set; sign pattern unrealizable");

    const auto positives_hold = [&](const RationalVector& cand) {
        for (std::size_t idx = 0; idx < A.size(); ++idx)
            if (!is_zero[idx] && rational_dot(cand, A[idx]) <= 0) return false;
        return true;
    };
    if (!positives_hold(w))
        throw DirectionError("rationalize_direction: declared-positive point lost positivity "
                             "after projecting onto the zero set's complement; classification "
                             "is ambiguous at the given precision");

    if (round) {
        // Replace w by the projection of a denominator-Q rounding of it,
        // with Q a power of two large enough that every positive dot
        // survives: ||error||_2 ||x||_2 < delta. Doubling Q is a safety net.
        Rational delta;
        bool have_delta = false;
        mpz_class max_norm2 = 0;
        for (std::size_t idx = 0; idx < A.size(); ++idx) {
            if (is_zero[idx]) continue;
            const Rational s = rational_dot(w, A[idx]);
            if (!have_delta || s < delta) delta = s;
            have_delta = true;
            mpz_class n2 = 0;
            for (std::size_t i = 0; i < d; ++i) {
                const mpz_class c(A[idx][static_cast<int>(i)]);
                n2 += c * c;
            }
            if (n2 > max_norm2) max_norm2 = n2;
        }
        if (have_delta) {
            // Smallest power of two Q with 4 Q^2 delta^2 > d * max_norm2.
            mpz_class q = 1;
            const Rational target = Rational(static_cast<long>(d)) * Rational(max_norm2) /
                                    (4 * delta * delta);
            while (Rational(q) * Rational(q) <= target) q *= 2;
            for (int attempt = 0; attempt < 64; ++attempt) {
                RationalVector rounded(d);
                for (std::size_t i = 0; i < d; ++i) {
                    // Nearest multiple of 1/q, ties toward zero.
                    const Rational scaled = w[i] * Rational(q);
                    mpz_class num = scaled.get_num(), den = scaled.get_den();
                    mpz_class quot, rem;
                    mpz_fdiv_qr(quot.get_mpz_t(), rem.get_mpz_t(), num.get_mpz_t(),
                                den.get_mpz_t());
                    if (2 * rem > den) quot += 1;
                    rounded[i] = Rational(quot) / Rational(q);
                }
                RationalVector candidate = project_off(rounded, ortho);
                bool nonzero = false;
                for (const auto& c : candidate)
                    if (c != 0) nonzero = true;
                if (nonzero && positives_hold(candidate)) {
                    w = std::move(candidate);
                    break;
                }
                q *= 2;
            }
        }
    }

    // Integer scaling: clear denominators, then divide by the content.
    mpz_class lcm = 1;
    for (const auto& c : w) mpz_lcm(lcm.get_mpz_t(), lcm.get_mpz_t(), c.get_den().get_mpz_t());
    std::vector<mpz_class> u(d);
    mpz_class content = 0;
    for (std::size_t i = 0; i < d; ++i) {
        u[i] = w[i].get_num() * (lcm / w[i].get_den());
        mpz_class a = abs(u[i]);
        mpz_gcd(content.get_mpz_t(), content.get_mpz_t(), a.get_mpz_t());
    }
    for (auto& c : u) c /= content;

    // Exact certificate check against the declared classification.
    DirectionResult result;
    result.u_hat = LatticePoint(static_cast<int>(d));
    for (std::size_t i = 0; i < d; ++i) {
        if (!u[i].fits_slong_p())
            throw DirectionError("rationalize_direction: integer direction exceeds 64-bit range");
        result.u_hat[static_cast<int>(i)] = u[i].get_si();
    }
    for (std::size_t idx = 0; idx < A.size(); ++idx) {
        mpz_class s = 0;
        for (std::size_t i = 0; i < d; ++i)
            s += u[i] * mpz_class(A[idx][static_cast<int>(i)]);
        if (is_zero[idx]) {
            if (s != 0)
                throw DirectionError("rationalize_direction: certificate violated at zero point " +
                                     A[idx].to_string());
            result.certificate.push_back(SignClass::kZero);
        } else {
            if (s <= 0)
                throw DirectionError(
                    "rationalize_direction: certificate violated at positive point " +
                    A[idx].to_string());
            result.certificate.push_back(SignClass::kPositive);
        }
    }
    return result;
}

}  // namespace detail_direction

/// Rational direction: the sign classification is computed exactly.
/// Precondition: v.x >= 0 for every x in A.
inline DirectionResult rationalize_direction(const std::vector<LatticePoint>& A,
                                             const RationalVector& v_hat) {
    const std::size_t d = v_hat.size();
    if (d == 0) throw std::invalid_argument("rationalize_direction: empty direction");
    bool v_nonzero = false;
    for (const auto& c : v_hat)
        if (c != 0) v_nonzero = true;
    if (!v_nonzero) throw std::invalid_argument("rationalize_direction: zero direction");
    for (const auto& x : A)
        if (x.dim() != static_cast<int>(d))
            throw std::invalid_argument("rationalize_direction: point dimension mismatch");

    std::vector<bool> is_zero(A.size(), false);
    for (std::size_t idx = 0; idx < A.size(); ++idx) {
        const Rational s = rational_dot(v_hat, A[idx]);
        if (s < 0)
            throw DirectionError("rationalize_direction: precondition v.x >= 0 violated at " +
                                 A[idx].to_string());
        is_zero[idx] = (s == 0);
    }
    return detail_direction::rationalize_core(A, v_hat, is_zero, /*round=*/false);
}

/// Real direction with declared zero classification. Doubles are converted
/// to exact rationals; no zeroness is ever inferred from floats.
inline DirectionResult rationalize_direction(const std::vector<LatticePoint>& A,
                                             const RealDirection& dir) {
    const std::size_t d = dir.values.size();
    if (d == 0) throw std::invalid_argument("rationalize_direction: empty direction");
    if (!(dir.precision > 0.0))
        throw std::invalid_argument("rationalize_direction: real input needs a positive precision");
    for (const auto& x : A)
        if (x.dim() != static_cast<int>(d))
            throw std::invalid_argument("rationalize_direction: point dimension mismatch");

    RationalVector v_rat(d);
    for (std::size_t i = 0; i < d; ++i) v_rat[i] = Rational(dir.values[i]);  // exact

    std::vector<bool> is_zero(A.size(), false);
    for (const std::size_t idx : dir.zero_indices) {
        if (idx >= A.size())
            throw std::invalid_argument("rationalize_direction: zero index out of range");
        is_zero[idx] = true;
    }
    const Rational prec(dir.precision);
    for (std::size_t idx = 0; idx < A.size(); ++idx) {
        if (is_zero[idx]) continue;
        const Rational s = rational_dot(v_rat, A[idx]);
        if (s < -prec)
            throw DirectionError("rationalize_direction: precondition v.x >= 0 violated at " +
                                 A[idx].to_string());
        if (s <= prec)
            throw DirectionError(
                "rationalize_direction: |v.x| below declared precision at point " +
                A[idx].to_string() + " classified positive; classification ambiguous");
    }
    return detail_direction::rationalize_core(A, v_rat, is_zero, /*round=*/true);
}

// ---------------------------------------------------------------------------
// JSON interface: {A: [[ints]], v_hat: [[num,den], ...]} or
// {A: [[ints]], v_hat: {values: [floats], zeros: [indices], precision: p}}
// -> {u_hat: [ints], certificate: ["positive"|"zero", ...]}.
// ---------------------------------------------------------------------------

inline DirectionResult rationalize_from_json(const nlohmann::json& j) {
    std::vector<LatticePoint> A;
    for (const auto& row : j.at("A")) {
        LatticePoint p(static_cast<int>(row.size()));
        for (int i = 0; i < p.dim(); ++i) p[i] = row.at(static_cast<std::size_t>(i)).get<std::int64_t>();
        A.push_back(p);
    }
    const auto& v = j.at("v_hat");
    if (v.is_array()) {
        RationalVector vr;
        for (const auto& pair : v) {
            const auto num = pair.at(0).get<long>();
            const auto den = pair.at(1).get<long>();
            if (den == 0) throw std::invalid_argument("v_hat: zero denominator");
            Rational q(num, den);
            q.canonicalize();
            vr.push_back(q);
        }
        return rationalize_direction(A, vr);
    }
    RealDirection dir;
    dir.values = v.at("values").get<std::vector<double>>();
    if (v.contains("zeros")) dir.zero_indices = v.at("zeros").get<std::vector<std::size_t>>();
    dir.precision = v.at("precision").get<double>();
    return rationalize_direction(A, dir);
}

inline nlohmann::json direction_result_to_json(const DirectionResult& r) {
    nlohmann::json j;
    j["u_hat"] = nlohmann::json::array();
    for (int i = 0; i < r.u_hat.dim(); ++i) j["u_hat"].push_back(r.u_hat[i]);
    j["certificate"] = nlohmann::json::array();
    for (const SignClass s : r.certificate)
        j["certificate"].push_back(s == SignClass::kZero ? "zero" : "positive");
    return j;
}

}  // namespace rwre
