#ifndef OVERREC_KERNEL_MATH_HPP
#define OVERREC_KERNEL_MATH_HPP

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace overrec {

/// Activations with a closed-form arc-cosine expectation. Only ReLU exists today.
enum class Activation { ReLU };

/// The 2x2 covariance block [[k1, k3], [k3, k2]] at one (layer, time) cell of a
/// kernel recursion. A padded side annihilates every expectation taken over it.
template <typename Scalar>
struct CovBlock {
    Scalar k1{0};  // Sigma(x, x)
    Scalar k2{0};  // Sigma(x', x')
    Scalar k3{0};  // Sigma(x, x')
    bool pad_x{false};
    bool pad_y{false};

    [[nodiscard]] bool padded() const noexcept { return pad_x || pad_y; }
    [[nodiscard]] bool degenerate() const noexcept { return k1 <= Scalar(0) || k2 <= Scalar(0); }
};

class DegenerateBlockError : public std::domain_error {
  public:
    using std::domain_error::domain_error;
};

namespace detail {

template <typename Scalar>
void require_finite(const CovBlock<Scalar>& b) {
    using std::isfinite;
    if (!isfinite(b.k1) || !isfinite(b.k2) || !isfinite(b.k3)) {
        throw std::invalid_argument("covariance block has non-finite entries");
    }
}

}  // namespace detail

/// c = k3 / sqrt(k1 k2), clamped into [-1, 1].
template <typename Scalar>
Scalar correlation(const CovBlock<Scalar>& b) {
    using std::sqrt;
    if (b.padded()) {
        throw DegenerateBlockError("correlation of a padded covariance block");
    }
    if (b.degenerate()) {
        throw DegenerateBlockError("correlation of a block with zero self-covariance");
    }
    const Scalar c = b.k3 / sqrt(b.k1 * b.k2);
    return std::clamp(c, Scalar(-1), Scalar(1));
}

/// E[relu(g) relu(g')] for (g, g') ~ N(0, K):
///   (1 / 2pi) (c (pi - arccos c) + sqrt(1 - c^2)) sqrt(k1 k2).
/// Padded and degenerate blocks give exactly zero.
template <typename Scalar>
Scalar v_relu(const CovBlock<Scalar>& b) {
    using std::acos;
    using std::sqrt;
    detail::require_finite(b);
    if (b.padded() || b.degenerate()) {
        return Scalar(0);
    }
    const Scalar pi = std::numbers::pi_v<Scalar>;
    const Scalar c = correlation(b);
    const Scalar shape = c * (pi - acos(c)) + sqrt(std::max(Scalar(0), Scalar(1) - c * c));
    return shape * sqrt(b.k1 * b.k2) / (Scalar(2) * pi);
}

/// E[relu'(g) relu'(g')] = (pi - arccos c) / 2pi, i.e. the orthant probability.
template <typename Scalar>
Scalar v_relu_prime(const CovBlock<Scalar>& b) {
    using std::acos;
    detail::require_finite(b);
    if (b.padded() || b.degenerate()) {
        return Scalar(0);
    }
    const Scalar pi = std::numbers::pi_v<Scalar>;
    return (pi - acos(correlation(b))) / (Scalar(2) * pi);
}

template <typename Scalar>
Scalar v_phi(Activation act, const CovBlock<Scalar>& b) {
    switch (act) {
        case Activation::ReLU: return v_relu(b);
    }
    throw std::invalid_argument("unknown activation");
}

template <typename Scalar>
Scalar v_phi_prime(Activation act, const CovBlock<Scalar>& b) {
    switch (act) {
        case Activation::ReLU: return v_relu_prime(b);
    }
    throw std::invalid_argument("unknown activation");
}

}  // namespace overrec

#endif  // OVERREC_KERNEL_MATH_HPP
