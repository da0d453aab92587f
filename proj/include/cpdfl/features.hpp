#pragma once

// (Quantized) Fourier tensor-product features.
//
// For one input coordinate x and periodicity theta the factor of length I is
//   psi_k(x) = c(x) * exp(-2*pi*j*x*k/theta),  k = 0..I-1,
//   c(x)     = exp(2*pi*j*x*(2 + I)/(2*theta)).
// When I = 2^K the factor splits into K length-2 factors
//   gamma_b(x) = [1, exp(-2*pi*j*x*2^b/theta)],  b = 0..K-1,
// with c(x) folded into gamma_0, and psi = gamma_{K-1} (x) ... (x) gamma_0.

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "cpdfl/tncore.hpp"

namespace cpdfl {

struct FourierSpec {
    Index num_freq = 2;
    double theta = 1.0;
    bool quantized = false;

    /// K = log2(num_freq); only meaningful when quantized.
    int bits() const {
        int k = 0;
        while ((Index{1} << k) < num_freq) {
            ++k;
        }
        return k;
    }

    bool power_of_two() const { return num_freq >= 2 && (num_freq & (num_freq - 1)) == 0; }

    void validate() const {
        if (num_freq < 2) {
            throw std::invalid_argument("FourierSpec: num_freq must be >= 2, got " + std::to_string(num_freq));
        }
        if (!(theta > 0.0) || !std::isfinite(theta)) {
            throw std::invalid_argument("FourierSpec: theta must be positive and finite");
        }
        if (quantized && !power_of_two()) {
            throw std::invalid_argument("FourierSpec: quantized features need a power-of-two num_freq, got " +
                                        std::to_string(num_freq));
        }
    }
};

namespace detail {

inline cplx unit_phase(double angle) { return std::polar(1.0, angle); }

inline double centring_angle(double x, const FourierSpec& spec) {
    return 2.0 * std::numbers::pi * x * (2.0 + static_cast<double>(spec.num_freq)) / (2.0 * spec.theta);
}

inline void require_finite(double x, const char* who) {
    if (!std::isfinite(x)) {
        throw std::invalid_argument(std::string(who) + ": non-finite input");
    }
}

}  // namespace detail

inline cvec fourier_factor(double x, const FourierSpec& spec) {
    detail::require_finite(x, "fourier_factor");
    spec.validate();
    const double c = detail::centring_angle(x, spec);
    cvec out(spec.num_freq);
    for (Index k = 0; k < spec.num_freq; ++k) {
        out(k) = detail::unit_phase(c - 2.0 * std::numbers::pi * x * static_cast<double>(k) / spec.theta);
    }
    return out;
}

/// Length-2 factor for bit b of a quantized Fourier factor.
inline cvec quantized_bit_factor(double x, int bit, const FourierSpec& spec) {
    const double weight = std::ldexp(1.0, bit);
    cvec g(2);
    g(0) = cplx(1.0, 0.0);
    g(1) = detail::unit_phase(-2.0 * std::numbers::pi * x * weight / spec.theta);
    if (bit == 0) {
        g *= detail::unit_phase(detail::centring_angle(x, spec));
    }
    return g;
}

/// Returns gamma_0 ... gamma_{K-1}; the reconstruction is kron(gamma_{K-1}, ..., gamma_0).
inline std::vector<cvec> quantize_factor(double x, const FourierSpec& spec) {
    detail::require_finite(x, "quantize_factor");
    if (!spec.power_of_two()) {
        throw std::invalid_argument("quantize_factor: num_freq must be a power of two, got " +
                                    std::to_string(spec.num_freq));
    }
    spec.validate();
    std::vector<cvec> factors;
    const int k = spec.bits();
    factors.reserve(static_cast<std::size_t>(k));
    for (int b = 0; b < k; ++b) {
        factors.push_back(quantized_bit_factor(x, b, spec));
    }
    return factors;
}

namespace detail {

inline void require_unit_interval(const rvec& column, const char* who) {
    for (Index n = 0; n < column.size(); ++n) {
        const double v = column(n);
        if (!(v >= 0.0 && v <= 1.0)) {
            throw std::invalid_argument(std::string(who) + ": input " + std::to_string(n) + " = " +
                                        std::to_string(v) + " lies outside [0, 1]");
        }
    }
}

}  // namespace detail

/// Row n is fourier_factor(column(n)) at the given theta.
inline cmat feature_matrix(const rvec& column, double theta, FourierSpec spec) {
    detail::require_unit_interval(column, "feature_matrix");
    spec.theta = theta;
    spec.validate();
    cmat out(column.size(), spec.num_freq);
    for (Index n = 0; n < column.size(); ++n) {
        out.row(n) = fourier_factor(column(n), spec).transpose();
    }
    return out;
}

/// One CPD core position: a whole input dimension, or one bit of it when quantized.
struct CoreSlot {
    Index dim = 0;
    int bit = -1;  // -1 when unquantized
    Index size = 0;

    bool operator==(const CoreSlot&) const = default;
};

/// The P candidate periodicities plus the per-dimension feature layout.
struct FeatureFamily {
    std::vector<double> thetas;
    std::vector<Index> num_freq;  // I_d per input dimension
    bool quantized = true;

    static FeatureFamily uniform(Index dims, Index num_freq, std::vector<double> thetas, bool quantized = true) {
        return FeatureFamily{std::move(thetas), std::vector<Index>(static_cast<std::size_t>(dims), num_freq),
                             quantized};
    }

    Index dims() const noexcept { return static_cast<Index>(num_freq.size()); }
    Index num_maps() const noexcept { return static_cast<Index>(thetas.size()); }

    FourierSpec spec(Index d, Index p) const {
        return FourierSpec{num_freq.at(static_cast<std::size_t>(d)), thetas.at(static_cast<std::size_t>(p)),
                           quantized};
    }

    /// Core positions in update order: dimension-major, bit-minor.
    std::vector<CoreSlot> slots() const {
        std::vector<CoreSlot> out;
        for (Index d = 0; d < dims(); ++d) {
            const FourierSpec s{num_freq[static_cast<std::size_t>(d)], 1.0, quantized};
            if (quantized) {
                for (int b = 0; b < s.bits(); ++b) {
                    out.push_back(CoreSlot{d, b, 2});
                }
            } else {
                out.push_back(CoreSlot{d, -1, s.num_freq});
            }
        }
        return out;
    }

    /// A family holding only thetas[p]; the layout is unchanged.
    FeatureFamily single(Index p) const {
        return FeatureFamily{{thetas.at(static_cast<std::size_t>(p))}, num_freq, quantized};
    }

    void validate() const {
        if (thetas.empty()) {
            throw std::invalid_argument("FeatureFamily: at least one theta is required");
        }
        if (num_freq.empty()) {
            throw std::invalid_argument("FeatureFamily: at least one input dimension is required");
        }
        for (std::size_t i = 0; i < thetas.size(); ++i) {
            for (std::size_t j = i + 1; j < thetas.size(); ++j) {
                if (thetas[i] == thetas[j]) {
                    throw std::invalid_argument("FeatureFamily: thetas must be distinct, " +
                                                std::to_string(thetas[i]) + " repeats");
                }
            }
        }
        for (Index d = 0; d < dims(); ++d) {
            for (Index p = 0; p < num_maps(); ++p) {
                spec(d, p).validate();
            }
        }
    }
};

/// Factor of one core slot at coordinate x for periodicity theta.
inline cvec slot_factor(double x, double theta, const CoreSlot& slot, const FeatureFamily& family) {
    FourierSpec s = family.spec(slot.dim, 0);
    s.theta = theta;
    if (slot.bit < 0) {
        return fourier_factor(x, s);
    }
    return quantized_bit_factor(x, slot.bit, s);
}

/// N x slot.size matrix of slot factors for every row of X. With `conjugate`
/// the rows are the conjugated factors, i.e. the rows of the design matrix.
inline cmat slot_feature_matrix(const rmat& X, double theta, const CoreSlot& slot, const FeatureFamily& family,
                                bool conjugate) {
    FourierSpec s = family.spec(slot.dim, 0);
    s.theta = theta;
    cmat out(X.rows(), slot.size);
    const double sign = conjugate ? -1.0 : 1.0;
    if (slot.bit < 0) {
        for (Index n = 0; n < X.rows(); ++n) {
            const double x = X(n, slot.dim);
            const double c = detail::centring_angle(x, s);
            for (Index k = 0; k < slot.size; ++k) {
                out(n, k) = detail::unit_phase(
                    sign * (c - 2.0 * std::numbers::pi * x * static_cast<double>(k) / s.theta));
            }
        }
        return out;
    }
    const double weight = std::ldexp(1.0, slot.bit);
    for (Index n = 0; n < X.rows(); ++n) {
        const double x = X(n, slot.dim);
        const double tail = -2.0 * std::numbers::pi * x * weight / s.theta;
        const double head = slot.bit == 0 ? detail::centring_angle(x, s) : 0.0;
        out(n, 0) = detail::unit_phase(sign * head);
        out(n, 1) = detail::unit_phase(sign * (head + tail));
    }
    return out;
}

}  // namespace cpdfl
