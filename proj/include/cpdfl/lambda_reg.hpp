#pragma once

// Solvers for the feature-weight subproblem
//
//     min_lambda  1/2 ||y - F lambda||^2 + beta * Reg(lambda)
//
// with Reg one of
//   L1         ||lambda||_1                  proximal gradient (soft threshold)
//   L2         1/2 ||lambda||_2^2            ridge normal equations
//   FixedNorm  indicator of ||lambda||_2 <= 1  SVD + secular equation in mu
// and optional non-negativity of lambda.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "cpdfl/tncore.hpp"

namespace cpdfl {

enum class RegKind { L1, L2, FixedNorm };

inline std::string to_string(RegKind kind) {
    switch (kind) {
        case RegKind::L1: return "l1";
        case RegKind::L2: return "l2";
        case RegKind::FixedNorm: return "fn";
    }
    return "?";
}

inline RegKind parse_reg_kind(const std::string& s) {
    if (s == "l1" || s == "L1") return RegKind::L1;
    if (s == "l2" || s == "L2") return RegKind::L2;
    if (s == "fn" || s == "FN" || s == "fixed-norm" || s == "fixed_norm") return RegKind::FixedNorm;
    throw std::invalid_argument("unknown regularizer '" + s + "' (expected l1, l2 or fn)");
}

struct LambdaProblem {
    rmat F;
    rvec y;
    double beta = 0.0;
    bool nonneg = false;
    int inner_steps = 50;     // S, proximal iterations for L1
    double inner_tol = 1e-8;  // stop once ||lambda_{s+1} - lambda_s||_inf drops below
};

/// Reg(lambda) as it enters the objective. The L2 term is 1/2 ||lambda||^2,
/// the function the ridge solution minimizes; FixedNorm contributes 0 on its
/// feasible set.
inline double reg_value(RegKind kind, const rvec& lambda) {
    switch (kind) {
        case RegKind::L1: return lambda.lpNorm<1>();
        case RegKind::L2: return 0.5 * lambda.squaredNorm();
        case RegKind::FixedNorm: return 0.0;
    }
    return 0.0;
}

inline double lambda_objective(const LambdaProblem& problem, RegKind kind, const rvec& lambda) {
    return 0.5 * (problem.y - problem.F * lambda).squaredNorm() + problem.beta * reg_value(kind, lambda);
}

/// ||G||_2 of a symmetric PSD matrix by power iteration on Rayleigh quotients.
inline double spectral_norm_psd(const rmat& G, int max_iters = 50, double tol = 1e-10) {
    if (G.size() == 0) {
        return 0.0;
    }
    Index start = 0;
    const double best = G.colwise().norm().maxCoeff(&start);
    if (best == 0.0) {
        return 0.0;
    }
    // A nonzero column of a PSD matrix lies in its range, so G*v != 0.
    rvec v = G.col(start) / best;
    double estimate = v.dot(G * v);
    for (int it = 0; it < max_iters; ++it) {
        const rvec w = G * v;
        const double wn = w.norm();
        if (wn == 0.0) {
            break;
        }
        v = w / wn;
        const double next = v.dot(G * v);
        const bool done = std::abs(next - estimate) <= tol * std::abs(next);
        estimate = std::max(estimate, next);
        if (done) {
            break;
        }
    }
    return estimate;
}

namespace detail {

inline void check_problem(const LambdaProblem& problem, const char* who) {
    if (problem.F.rows() != problem.y.size()) {
        throw std::invalid_argument(std::string(who) + ": F has " + std::to_string(problem.F.rows()) +
                                    " rows but y has " + std::to_string(problem.y.size()) + " entries");
    }
    if (!(problem.beta >= 0.0)) {
        throw std::invalid_argument(std::string(who) + ": beta must be non-negative");
    }
    if (!problem.F.allFinite() || !problem.y.allFinite()) {
        throw std::invalid_argument(std::string(who) + ": non-finite entries in F or y");
    }
}

inline rvec clamp_nonneg(rvec lambda) { return lambda.cwiseMax(0.0); }

}  // namespace detail

/// Observer for each proximal iterate (s is 1-based).
using LambdaStepObserver = std::function<void(int s, const rvec& lambda)>;

/// S proximal-gradient steps from `start`, step t = 0.99 / ||F^T F||_2.
inline rvec solve_l1(const LambdaProblem& problem, const rvec& start, const LambdaStepObserver& observer = {}) {
    detail::check_problem(problem, "solve_l1");
    if (problem.inner_steps < 1) {
        throw std::invalid_argument("solve_l1: inner_steps must be >= 1");
    }
    const Index P = problem.F.cols();
    if (start.size() != P) {
        throw std::invalid_argument("solve_l1: start has the wrong length");
    }
    const rmat gram = problem.F.transpose() * problem.F;
    const double lip = spectral_norm_psd(gram);
    if (lip == 0.0) {
        // Only the penalty is left; its minimizer is the origin.
        return rvec::Zero(P);
    }
    const double t = 0.99 / lip;
    const double cut = problem.beta * t;
    const rvec fty = problem.F.transpose() * problem.y;

    rvec lambda = start;
    for (int s = 1; s <= problem.inner_steps; ++s) {
        const rvec grad_point = lambda - t * (gram * lambda - fty);
        rvec next(P);
        for (Index i = 0; i < P; ++i) {
            const double p = grad_point(i);
            if (problem.nonneg) {
                next(i) = p > cut ? p - cut : 0.0;
            } else {
                const double mag = std::abs(p) - cut;
                next(i) = mag > 0.0 ? std::copysign(mag, p) : 0.0;
            }
        }
        const double change = (next - lambda).lpNorm<Eigen::Infinity>();
        lambda = std::move(next);
        if (observer) {
            observer(s, lambda);
        }
        if (change < problem.inner_tol) {
            break;
        }
    }
    return lambda;
}

/// (F^T F + beta I)^{-1} F^T y; negatives clamped to zero when nonneg.
inline rvec solve_l2(const LambdaProblem& problem) {
    detail::check_problem(problem, "solve_l2");
    const Index P = problem.F.cols();
    rmat M = problem.F.transpose() * problem.F;
    M.diagonal().array() += problem.beta;
    const rvec rhs = problem.F.transpose() * problem.y;
    Eigen::LDLT<rmat> ldlt(M);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
        ldlt.rcond() < 64.0 * std::numeric_limits<double>::epsilon()) {
        throw std::runtime_error("solve_l2: F^T F + beta I is singular; use beta > 0");
    }
    rvec lambda = P == 0 ? rvec() : rvec(ldlt.solve(rhs));
    return problem.nonneg ? detail::clamp_nonneg(std::move(lambda)) : lambda;
}

/// Thin SVD of F with the pieces the fixed-norm solution is built from.
struct SecularSystem {
    rmat V;
    rvec sigma;
    rvec c;  // U^T y

    explicit SecularSystem(const LambdaProblem& problem) {
        Eigen::JacobiSVD<rmat> svd(problem.F, Eigen::ComputeThinU | Eigen::ComputeThinV);
        V = svd.matrixV();
        sigma = svd.singularValues();
        c = svd.matrixU().transpose() * problem.y;
    }

    double rank_cutoff(const rmat& F) const {
        if (sigma.size() == 0) {
            return 0.0;
        }
        return sigma(0) * static_cast<double>(std::max(F.rows(), F.cols())) *
               std::numeric_limits<double>::epsilon();
    }

    /// V (Sigma^T Sigma + mu I)^{-1} Sigma^T c, dropping null directions at mu = 0.
    rvec lambda_at(double mu, double cutoff) const {
        rvec coef = rvec::Zero(sigma.size());
        for (Index i = 0; i < sigma.size(); ++i) {
            const double s = sigma(i);
            if (s > cutoff) {
                coef(i) = s * c(i) / (s * s + mu);
            }
        }
        return V * coef;
    }
};

/// argmin 1/2||y - F lambda||^2 subject to ||lambda||_2 <= 1.
inline rvec solve_fixed_norm(const LambdaProblem& problem) {
    detail::check_problem(problem, "solve_fixed_norm");
    const Index P = problem.F.cols();
    if (problem.F.isZero(0.0)) {
        return rvec::Zero(P);
    }
    const SecularSystem sys(problem);
    const double cutoff = sys.rank_cutoff(problem.F);
    rvec lambda = sys.lambda_at(0.0, cutoff);
    if (lambda.norm() > 1.0) {
        // ||lambda(mu)|| decreases in mu and is <= 1 at sigma_1 ||c||.
        double lo = 0.0;
        double hi = sys.sigma(0) * sys.c.norm();
        rvec at_hi = sys.lambda_at(hi, cutoff);
        for (int it = 0; it < 400; ++it) {
            const double gap = at_hi.norm() - 1.0;
            if (std::abs(gap) <= 1e-10) {
                break;
            }
            const double mid = 0.5 * (lo + hi);
            if (mid <= lo || mid >= hi) {
                break;
            }
            const rvec at_mid = sys.lambda_at(mid, cutoff);
            if (at_mid.norm() > 1.0) {
                lo = mid;
            } else {
                hi = mid;
                at_hi = at_mid;
            }
        }
        lambda = at_hi;
    }
    if (problem.nonneg) {
        lambda = detail::clamp_nonneg(std::move(lambda));
        const double n = lambda.norm();
        if (n > 1.0) {
            lambda /= n;
        }
    }
    return lambda;
}

/// Dispatch on the regularizer; `start` seeds the iterative L1 solver.
inline rvec solve_lambda(RegKind kind, const LambdaProblem& problem, const rvec& start,
                         const LambdaStepObserver& observer = {}) {
    switch (kind) {
        case RegKind::L1: return solve_l1(problem, start, observer);
        case RegKind::L2: return solve_l2(problem);
        case RegKind::FixedNorm: return solve_fixed_norm(problem);
    }
    throw std::logic_error("solve_lambda: unhandled regularizer");
}

}  // namespace cpdfl
