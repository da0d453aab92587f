#pragma once

// CPD kernel machine and Feature Learning model evaluation.
//
// The weight tensor is held as a rank-R CPD, one I_c x R core per core slot.
// A prediction never forms the prod(I) feature or weight vector: per slot it
// contracts the conjugated factor with the core (a length-R row), multiplies
// the rows across slots and sums over r. The real part is taken once, at the end.

#include <stdexcept>
#include <string>
#include <vector>

#include "cpdfl/features.hpp"
#include "cpdfl/tncore.hpp"

namespace cpdfl {

struct CpdWeights {
    std::vector<cmat> cores;

    Index rank() const noexcept { return cores.empty() ? 0 : cores.front().cols(); }
    Index num_cores() const noexcept { return static_cast<Index>(cores.size()); }

    void validate() const {
        if (cores.empty()) {
            throw std::invalid_argument("CpdWeights: no cores");
        }
        for (std::size_t c = 0; c < cores.size(); ++c) {
            if (cores[c].cols() != rank()) {
                throw std::invalid_argument("CpdWeights: core " + std::to_string(c) + " has " +
                                            std::to_string(cores[c].cols()) + " columns, expected " +
                                            std::to_string(rank()));
            }
            if (!cores[c].allFinite()) {
                throw std::invalid_argument("CpdWeights: core " + std::to_string(c) + " has non-finite entries");
            }
        }
    }

    /// Sizes must line up with the family's core slots.
    void check_layout(const FeatureFamily& family) const {
        const auto slots = family.slots();
        if (slots.size() != cores.size()) {
            throw std::invalid_argument("CpdWeights: " + std::to_string(cores.size()) + " cores but the feature " +
                                        "layout has " + std::to_string(slots.size()) + " slots");
        }
        for (std::size_t c = 0; c < slots.size(); ++c) {
            if (cores[c].rows() != slots[c].size) {
                throw std::invalid_argument("CpdWeights: core " + std::to_string(c) + " has " +
                                            std::to_string(cores[c].rows()) + " rows, expected " +
                                            std::to_string(slots[c].size));
            }
        }
    }
};

struct FlModel {
    CpdWeights weights;
    rvec lambdas;
    FeatureFamily family;

    void validate() const {
        family.validate();
        weights.validate();
        weights.check_layout(family);
        if (lambdas.size() != family.num_maps()) {
            throw std::invalid_argument("FlModel: " + std::to_string(lambdas.size()) + " lambdas for " +
                                        std::to_string(family.num_maps()) + " feature maps");
        }
        if (!lambdas.allFinite()) {
            throw std::invalid_argument("FlModel: non-finite lambda");
        }
    }
};

namespace detail {

inline void require_dims(const rvec& x, const FeatureFamily& family) {
    if (x.size() != family.dims()) {
        throw std::invalid_argument("predict: input has " + std::to_string(x.size()) + " dimensions, model expects " +
                                    std::to_string(family.dims()));
    }
}

}  // namespace detail

/// Re( sum_r prod_c <psi_c(x), w_r^(c)> ) for a single periodicity.
inline double predict_cpd(const rvec& x, const CpdWeights& weights, const FeatureFamily& family, double theta) {
    detail::require_dims(x, family);
    const auto slots = family.slots();
    if (slots.size() != weights.cores.size()) {
        throw std::invalid_argument("predict_cpd: core count does not match the feature layout");
    }
    Eigen::RowVectorXcd acc = Eigen::RowVectorXcd::Ones(weights.rank());
    for (std::size_t c = 0; c < slots.size(); ++c) {
        const cvec psi = slot_factor(x(slots[c].dim), theta, slots[c], family);
        if (psi.size() != weights.cores[c].rows()) {
            throw std::invalid_argument("predict_cpd: core " + std::to_string(c) + " size mismatch");
        }
        acc = acc.cwiseProduct(psi.adjoint() * weights.cores[c]);
    }
    return acc.sum().real();
}

inline double predict_fl(const rvec& x, const FlModel& model) {
    if (model.lambdas.size() != model.family.num_maps()) {
        throw std::invalid_argument("predict_fl: lambda count does not match the number of feature maps");
    }
    double out = 0.0;
    for (Index p = 0; p < model.family.num_maps(); ++p) {
        const double lam = model.lambdas(p);
        if (lam == 0.0) {
            continue;
        }
        out += lam * predict_cpd(x, model.weights, model.family, model.family.thetas[static_cast<std::size_t>(p)]);
    }
    return out;
}

inline rvec predict_batch(const rmat& X, const FlModel& model) {
    rvec out(X.rows());
    for (Index n = 0; n < X.rows(); ++n) {
        out(n) = predict_fl(X.row(n).transpose(), model);
    }
    return out;
}

/// Largest tensor materialize_weights agrees to build.
inline constexpr Index kMaterializeLimit = Index{1} << 16;

/// sum_r w_r^(C) (x) ... (x) w_r^(1). Reference path for tests and small models.
inline cvec materialize_weights(const CpdWeights& weights) {
    Index total = 1;
    for (const auto& core : weights.cores) {
        total *= core.rows();
        if (total > kMaterializeLimit) {
            throw std::length_error("materialize_weights: tensor exceeds " + std::to_string(kMaterializeLimit) +
                                    " entries");
        }
    }
    cvec out = cvec::Zero(total);
    for (Index r = 0; r < weights.rank(); ++r) {
        cvec term = cvec::Ones(1);
        for (const auto& core : weights.cores) {
            term = kron(cvec(core.col(r)), term);
        }
        out += term;
    }
    return out;
}

}  // namespace cpdfl
