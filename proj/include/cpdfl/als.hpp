#pragma once

// Alternating least squares for the Feature Learning model
//
//     f(x) = Re( [ sum_p lambda_p phi_{theta_p}(x) ]^H w ),   w a rank-R CPD,
//
// minimizing
//
//     1/2 ||y - sum_p lambda_p Phi_p w||^2 + alpha/2 ||w||^2 + beta Reg(lambda).
//
// One epoch updates every core by an exact regularized least-squares solve and
// then lambda. The workspace keeps, per feature map p, the running Hadamard
// product Z_p = *_c (Psi_cp W_c) and the Gram product H = *_c (W_c^H W_c), so a
// core update only divides its own factor out and multiplies the new one in.
// Any divisor entry below kDivisionGuard triggers a rebuild from the definition.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "cpdfl/features.hpp"
#include "cpdfl/lambda_reg.hpp"
#include "cpdfl/model.hpp"
#include "cpdfl/tncore.hpp"

namespace cpdfl {

/// How the lambda subproblem sees the complex responses G = [Phi_1 w ... Phi_P w].
enum class LambdaDesign {
    Stacked,   // F = [Re G; Im G], y = [y; 0]: the exact block minimizer of the objective
    RealPart,  // F = Re G
};

/// Whether the per-(core, map) design factors are kept in memory.
enum class FeatureCache { Auto, On, Off };

struct TrainConfig {
    double alpha = 0.01;
    double beta = 0.1;
    Index rank = 6;
    int epochs = 10;
    RegKind reg = RegKind::L1;
    bool nonneg = false;
    int inner_steps = 50;
    std::uint64_t seed = 0;
    int restarts = 10;
    bool freeze_lambda = false;  // lambda stays at its initial value (all ones)
    double tol = 0.0;            // relative per-epoch objective change to stop at; 0 = run all epochs
    LambdaDesign lambda_design = LambdaDesign::Stacked;
    FeatureCache feature_cache = FeatureCache::Auto;
    bool track_objective = true;

    void validate() const {
        if (rank < 1) throw std::invalid_argument("TrainConfig: rank must be >= 1");
        if (epochs < 1) throw std::invalid_argument("TrainConfig: epochs must be >= 1");
        if (inner_steps < 1) throw std::invalid_argument("TrainConfig: inner_steps must be >= 1");
        if (!(alpha >= 0.0)) throw std::invalid_argument("TrainConfig: alpha must be >= 0");
        if (!(beta >= 0.0)) throw std::invalid_argument("TrainConfig: beta must be >= 0");
        if (restarts < 1) throw std::invalid_argument("TrainConfig: restarts must be >= 1");
    }
};

inline constexpr int kLambdaBlock = -1;
inline constexpr int kInitBlock = -2;

/// One objective record. block >= 0 is a core index; inner counts proximal
/// iterations inside an L1 lambda step (0 for the step's final record).
struct TraceStep {
    int epoch = 0;
    int block = kInitBlock;
    int inner = 0;
    double objective = 0.0;
    double wall_ms = 0.0;
};

inline std::string block_name(int block) {
    if (block == kLambdaBlock) return "lambda";
    if (block == kInitBlock) return "init";
    return "core" + std::to_string(block);
}

/// Random start: cores with i.i.d. standard normal real and imaginary parts,
/// every column scaled to unit norm; lambda ~ U(0, 1).
inline std::pair<CpdWeights, rvec> init(const TrainConfig& config, const FeatureFamily& family) {
    std::mt19937_64 rng(config.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    CpdWeights weights;
    for (const auto& slot : family.slots()) {
        cmat core(slot.size, config.rank);
        for (Index r = 0; r < config.rank; ++r) {
            for (Index i = 0; i < slot.size; ++i) {
                const double re = normal(rng);
                const double im = normal(rng);
                core(i, r) = cplx(re, im);
            }
            core.col(r).normalize();
        }
        weights.cores.push_back(std::move(core));
    }
    rvec lambdas(family.num_maps());
    for (Index p = 0; p < lambdas.size(); ++p) {
        lambdas(p) = uniform(rng);
    }
    if (config.freeze_lambda) {
        lambdas.setOnes();
    } else if (config.reg == RegKind::FixedNorm && lambdas.norm() > 1.0) {
        lambdas.normalize();
    }
    return {std::move(weights), std::move(lambdas)};
}

/// ||w||^2 = 1^T ( *_c W_c^H W_c ) 1, without materializing w.
inline double weight_norm_sq(const CpdWeights& weights) {
    cmat h = cmat::Ones(weights.rank(), weights.rank());
    for (const auto& core : weights.cores) {
        h = h.cwiseProduct(core.adjoint() * core);
    }
    return h.sum().real();
}

/// Linear system for one core: vec(W_k) minimizes 1/2||y - A v||^2 + alpha/2 v^H (H_k (x) I) v.
struct CoreSystem {
    cmat A;   // N x (I_k R), column r*I_k + i
    cmat Hk;  // R x R
};

/// Solves (A^H A + alpha (H_k (x) I)) v = A^H y. Cholesky with one refinement
/// step; a semidefinite system (possible when R exceeds the span of the other
/// cores) falls back to the minimum-norm solution from an eigendecomposition.
inline cvec solve_core(const cmat& A, const cmat& Hk, const rvec& y, double alpha) {
    if (A.rows() != y.size()) {
        throw std::invalid_argument("solve_core: A has " + std::to_string(A.rows()) + " rows, y has " +
                                    std::to_string(y.size()));
    }
    const Index R = Hk.rows();
    if (R == 0 || A.cols() % R != 0) {
        throw std::invalid_argument("solve_core: A column count is not a multiple of the rank");
    }
    const Index I = A.cols() / R;
    const Index n = A.cols();
    cmat M = cmat::Zero(n, n);
    M.selfadjointView<Eigen::Lower>().rankUpdate(A.adjoint());
    M.triangularView<Eigen::StrictlyUpper>() = M.adjoint();
    if (alpha != 0.0) {
        for (Index r = 0; r < R; ++r) {
            for (Index s = 0; s < R; ++s) {
                M.block(r * I, s * I, I, I).diagonal().array() += alpha * Hk(r, s);
            }
        }
    }
    const cvec rhs = A.adjoint() * y.cast<cplx>();
    const double rhs_norm = rhs.norm();
    if (rhs_norm == 0.0) {
        return cvec::Zero(n);
    }
    auto acceptable = [&](const cvec& v) { return v.allFinite() && (M * v - rhs).norm() <= 1e-8 * rhs_norm; };
    Eigen::LLT<cmat> llt(M);
    if (llt.info() == Eigen::Success) {
        cvec v = llt.solve(rhs);
        if (acceptable(v)) {
            return v;
        }
        v += llt.solve(cvec(rhs - M * v));
        if (acceptable(v)) {
            return v;
        }
    }
    Eigen::SelfAdjointEigenSolver<cmat> eig(M);
    const rvec& ev = eig.eigenvalues();
    const double top = std::max(ev.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
    const double cutoff = top * static_cast<double>(n) * std::numeric_limits<double>::epsilon();
    const bool singular = ev.minCoeff() <= cutoff;
    if (eig.info() == Eigen::Success && !(singular && alpha == 0.0)) {
        const cmat& V = eig.eigenvectors();
        cvec coef = V.adjoint() * rhs;
        for (Index i = 0; i < n; ++i) {
            coef(i) = ev(i) > cutoff ? coef(i) / ev(i) : cplx(0.0, 0.0);
        }
        const cvec v = V * coef;
        // a consistent semidefinite system is solved to backward-error accuracy
        if (acceptable(v) || (v.allFinite() && (M * v - rhs).norm() <= 1e-10 * top * v.norm())) {
            return v;
        }
    }
    std::ostringstream msg;
    msg << "solve_core: normal equations are singular";
    if (alpha == 0.0) {
        msg << "; set alpha > 0";
    }
    throw std::runtime_error(msg.str());
}

/// Cached matrices of the ALS sweep for one training set.
class AlsWorkspace {
public:
    AlsWorkspace(rmat X, rvec y, FeatureFamily family, Index rank, FeatureCache cache = FeatureCache::Auto)
        : X_(std::move(X)), y_(std::move(y)), family_(std::move(family)), slots_(family_.slots()), rank_(rank) {
        if (X_.rows() != y_.size()) {
            throw std::invalid_argument("AlsWorkspace: X has " + std::to_string(X_.rows()) + " rows, y has " +
                                        std::to_string(y_.size()));
        }
        if (X_.cols() != family_.dims()) {
            throw std::invalid_argument("AlsWorkspace: X has " + std::to_string(X_.cols()) +
                                        " columns, feature family expects " + std::to_string(family_.dims()));
        }
        for (Index d = 0; d < X_.cols(); ++d) {
            detail::require_unit_interval(X_.col(d), "AlsWorkspace");
        }
        cached_ = decide_cache(cache);
        if (cached_) {
            design_.resize(slots_.size() * static_cast<std::size_t>(num_maps()));
            for (std::size_t c = 0; c < slots_.size(); ++c) {
                for (Index p = 0; p < num_maps(); ++p) {
                    design_[index(static_cast<Index>(c), p)] = make_design(static_cast<Index>(c), p);
                }
            }
        }
    }

    Index samples() const noexcept { return X_.rows(); }
    Index num_maps() const noexcept { return family_.num_maps(); }
    Index num_cores() const noexcept { return static_cast<Index>(slots_.size()); }
    Index rank() const noexcept { return rank_; }
    const rvec& targets() const noexcept { return y_; }
    const FeatureFamily& family() const noexcept { return family_; }
    const std::vector<CoreSlot>& slots() const noexcept { return slots_; }
    bool features_cached() const noexcept { return cached_; }
    Index guard_trips() const noexcept { return guard_trips_; }

    /// Psi_{c,p}: rows are the conjugated slot factors of every sample.
    cmat design(Index c, Index p) const { return cached_ ? design_[index(c, p)] : make_design(c, p); }

    /// Psi_{c,p} W_c (N x R).
    cmat slot_product(Index c, Index p, const cmat& core) const {
        if (cached_) {
            return design_[index(c, p)] * core;
        }
        return make_design(c, p) * core;
    }

    /// Z_p and H from their definitions for the given weights.
    void rebuild(const CpdWeights& weights) {
        check_weights(weights);
        Z_.assign(static_cast<std::size_t>(num_maps()), cmat());
        for (Index p = 0; p < num_maps(); ++p) {
            Z_[static_cast<std::size_t>(p)] = product_excluding(weights, p, -1);
        }
        H_ = gram_excluding(weights, -1);
        Hk_.resize(0, 0);
        open_ = -1;
    }

    /// Divide core k out of every Z_p and of H (rebuilding on guard trips).
    void downdate(Index k, const CpdWeights& weights) {
        require_closed("downdate");
        for (Index p = 0; p < num_maps(); ++p) {
            cmat& Z = Z_[static_cast<std::size_t>(p)];
            const cmat factor = slot_product(k, p, weights.cores[static_cast<std::size_t>(k)]);
            if (safe_divisor(factor)) {
                Z.array() /= factor.array();
            } else {
                ++guard_trips_;
                Z = product_excluding(weights, p, k);
            }
        }
        const cmat& core = weights.cores[static_cast<std::size_t>(k)];
        const cmat gram = core.adjoint() * core;
        if (auto quotient = hadamard_div(H_, gram)) {
            Hk_ = std::move(*quotient);
        } else {
            ++guard_trips_;
            Hk_ = gram_excluding(weights, k);
        }
        open_ = k;
    }

    /// A_k = sum_p lambda_p (Z^{(k,p)} kr Psi_{k,p}); maps with lambda_p = 0 are skipped.
    CoreSystem build_core_system(Index k, const rvec& lambdas) const {
        if (open_ != k) {
            throw std::logic_error("build_core_system: core " + std::to_string(k) + " is not downdated");
        }
        if (lambdas.size() != num_maps()) {
            throw std::invalid_argument("build_core_system: wrong lambda count");
        }
        const Index I = slots_[static_cast<std::size_t>(k)].size;
        CoreSystem sys{cmat::Zero(samples(), I * rank_), Hk_};
        for (Index p = 0; p < num_maps(); ++p) {
            const double lam = lambdas(p);
            if (lam == 0.0) {
                continue;
            }
            const cmat psi = design(k, p);
            const cmat& Z = Z_[static_cast<std::size_t>(p)];
            for (Index r = 0; r < rank_; ++r) {
                for (Index i = 0; i < I; ++i) {
                    sys.A.col(r * I + i).array() += lam * Z.col(r).array() * psi.col(i).array();
                }
            }
        }
        return sys;
    }

    /// Multiply the (new) core k back into every Z_p and into H.
    void update(Index k, const CpdWeights& weights) {
        if (open_ != k) {
            throw std::logic_error("update: core " + std::to_string(k) + " is not downdated");
        }
        const cmat& core = weights.cores[static_cast<std::size_t>(k)];
        for (Index p = 0; p < num_maps(); ++p) {
            Z_[static_cast<std::size_t>(p)].array() *= slot_product(k, p, core).array();
        }
        H_ = Hk_.cwiseProduct(core.adjoint() * core);
        Hk_.resize(0, 0);
        open_ = -1;
    }

    /// G = [Phi_1 w ... Phi_P w] (complex, N x P).
    cmat responses() const {
        require_closed("responses");
        cmat G(samples(), num_maps());
        for (Index p = 0; p < num_maps(); ++p) {
            G.col(p) = Z_[static_cast<std::size_t>(p)].rowwise().sum();
        }
        return G;
    }

    /// F = Re(G), the real N x P matrix of per-map responses.
    rmat build_F() const { return responses().real(); }

    /// Lambda subproblem for the current weights.
    LambdaProblem lambda_problem(const TrainConfig& config) const {
        LambdaProblem problem;
        const cmat G = responses();
        if (config.lambda_design == LambdaDesign::Stacked) {
            problem.F.resize(2 * samples(), num_maps());
            problem.F.topRows(samples()) = G.real();
            problem.F.bottomRows(samples()) = G.imag();
            problem.y = rvec::Zero(2 * samples());
            problem.y.head(samples()) = y_;
        } else {
            problem.F = G.real();
            problem.y = y_;
        }
        problem.beta = config.beta;
        problem.nonneg = config.nonneg;
        problem.inner_steps = config.inner_steps;
        return problem;
    }

    /// ||w||^2 from the maintained Gram product.
    double weight_norm_sq() const {
        require_closed("weight_norm_sq");
        return H_.sum().real();
    }

    /// 1/2 ||y - G lambda||^2 + alpha/2 ||w||^2 + beta Reg(lambda).
    double objective(const rvec& lambdas, const TrainConfig& config) const {
        const cvec residual = y_.cast<cplx>() - responses() * lambdas.cast<cplx>();
        return 0.5 * residual.squaredNorm() + 0.5 * config.alpha * weight_norm_sq() +
               config.beta * reg_value(config.reg, lambdas);
    }

    const cmat& running_product(Index p) const { return Z_.at(static_cast<std::size_t>(p)); }
    const cmat& gram_product() const noexcept { return H_; }

    /// *_{c != skip} Psi_{c,p} W_c  (skip = -1 keeps every core).
    cmat product_excluding(const CpdWeights& weights, Index p, Index skip) const {
        cmat Z = cmat::Ones(samples(), rank_);
        for (Index c = 0; c < num_cores(); ++c) {
            if (c != skip) {
                Z.array() *= slot_product(c, p, weights.cores[static_cast<std::size_t>(c)]).array();
            }
        }
        return Z;
    }

    cmat gram_excluding(const CpdWeights& weights, Index skip) const {
        cmat H = cmat::Ones(rank_, rank_);
        for (Index c = 0; c < num_cores(); ++c) {
            if (c != skip) {
                const cmat& W = weights.cores[static_cast<std::size_t>(c)];
                H.array() *= (W.adjoint() * W).array();
            }
        }
        return H;
    }

private:
    std::size_t index(Index c, Index p) const {
        return static_cast<std::size_t>(c) * static_cast<std::size_t>(num_maps()) + static_cast<std::size_t>(p);
    }

    cmat make_design(Index c, Index p) const {
        return slot_feature_matrix(X_, family_.thetas[static_cast<std::size_t>(p)],
                                   slots_[static_cast<std::size_t>(c)], family_, true);
    }

    bool decide_cache(FeatureCache cache) const {
        if (cache != FeatureCache::Auto) {
            return cache == FeatureCache::On;
        }
        // Keep the factors when they are no bigger than the Z_p themselves or small outright.
        Index width = 0;
        for (const auto& s : slots_) {
            width += s.size;
        }
        const double design_bytes = 16.0 * static_cast<double>(samples() * width * num_maps());
        const double z_bytes = 16.0 * static_cast<double>(samples() * rank_ * num_maps());
        return design_bytes <= z_bytes || design_bytes <= 32.0 * 1024 * 1024;
    }

    void check_weights(const CpdWeights& weights) const {
        if (weights.num_cores() != num_cores() || weights.rank() != rank_) {
            throw std::invalid_argument("AlsWorkspace: weights do not match the workspace layout");
        }
    }

    void require_closed(const char* who) const {
        if (open_ >= 0) {
            throw std::logic_error(std::string(who) + ": core " + std::to_string(open_) + " is still downdated");
        }
    }

    rmat X_;
    rvec y_;
    FeatureFamily family_;
    std::vector<CoreSlot> slots_;
    Index rank_ = 0;
    bool cached_ = false;
    std::vector<cmat> design_;
    std::vector<cmat> Z_;
    cmat H_;
    cmat Hk_;
    Index open_ = -1;
    Index guard_trips_ = 0;
};

/// Writes v = vec(W) back into an I x R core.
inline cmat core_from_vec(const cvec& v, Index rows, Index rank) {
    return Eigen::Map<const cmat>(v.data(), rows, rank);
}

struct FitResult {
    FlModel model;
    std::vector<TraceStep> trace;
    double train_seconds = 0.0;
    Index guard_trips = 0;
    int epochs_run = 0;
};

namespace detail {

inline void require_finite_objective(double value, int epoch, int block) {
    if (!std::isfinite(value)) {
        std::ostringstream msg;
        msg << "fit: objective became " << value << " at epoch " << epoch << ", block " << block_name(block)
            << "; try a larger alpha";
        throw std::runtime_error(msg.str());
    }
}

}  // namespace detail

/// Full training run. X must lie in the unit hypercube; y is usually standardized.
inline FitResult fit(const rmat& X, const rvec& y, const TrainConfig& config, const FeatureFamily& family) {
    using Clock = std::chrono::steady_clock;
    const auto start = Clock::now();
    auto elapsed_ms = [&] { return std::chrono::duration<double, std::milli>(Clock::now() - start).count(); };

    config.validate();
    family.validate();
    auto [weights, lambdas] = init(config, family);
    AlsWorkspace ws(X, y, family, config.rank, config.feature_cache);
    ws.rebuild(weights);

    FitResult result;
    auto record = [&](int epoch, int block, int inner, double value) {
        detail::require_finite_objective(value, epoch, block);
        result.trace.push_back(TraceStep{epoch, block, inner, value, elapsed_ms()});
    };
    double previous = std::numeric_limits<double>::quiet_NaN();
    if (config.track_objective || config.tol > 0.0) {
        previous = ws.objective(lambdas, config);
        record(0, kInitBlock, 0, previous);
    }

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        for (Index k = 0; k < ws.num_cores(); ++k) {
            ws.downdate(k, weights);
            const CoreSystem sys = ws.build_core_system(k, lambdas);
            const cvec v = solve_core(sys.A, sys.Hk, ws.targets(), config.alpha);
            auto& core = weights.cores[static_cast<std::size_t>(k)];
            core = core_from_vec(v, core.rows(), config.rank);
            ws.update(k, weights);
            if (config.track_objective) {
                record(epoch, static_cast<int>(k), 0, ws.objective(lambdas, config));
            }
        }
        if (!config.freeze_lambda) {
            const LambdaProblem problem = ws.lambda_problem(config);
            LambdaStepObserver observer;
            double w_term = 0.0;
            if (config.track_objective && config.reg == RegKind::L1) {
                w_term = 0.5 * config.alpha * ws.weight_norm_sq();
                observer = [&](int s, const rvec& iterate) {
                    record(epoch, kLambdaBlock, s, lambda_objective(problem, config.reg, iterate) + w_term);
                };
            }
            lambdas = solve_lambda(config.reg, problem, lambdas, observer);
            if (!lambdas.allFinite()) {
                throw std::runtime_error("fit: lambda solve produced non-finite values at epoch " +
                                         std::to_string(epoch));
            }
        }
        result.epochs_run = epoch;
        if (config.track_objective || config.tol > 0.0) {
            const double current = ws.objective(lambdas, config);
            if (config.track_objective) {
                record(epoch, kLambdaBlock, 0, current);
            }
            detail::require_finite_objective(current, epoch, kLambdaBlock);
            if (config.tol > 0.0 && std::abs(previous - current) <= config.tol * std::abs(previous)) {
                break;
            }
            previous = current;
        }
    }

    result.guard_trips = ws.guard_trips();
    result.model = FlModel{std::move(weights), std::move(lambdas), family};
    result.train_seconds = elapsed_ms() / 1000.0;
    return result;
}

}  // namespace cpdfl
