#ifndef OVERREC_RNTK_ENGINE_HPP
#define OVERREC_RNTK_ENGINE_HPP

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "overrec/kernel_math.hpp"
#include "overrec/types.hpp"

// Analytic NNGP and RNTK of an infinite-width ReLU RNN over one-hot item
// sequences. Unequal lengths are handled by left-padding the shorter sequence so
// that both sequences end on the same aligned cell; every covariance block that
// touches a padded position is annihilated.

namespace overrec {

/// Which variance multiplies the output-layer derivative term of the NTK.
enum class FinalLayerScale {
    OutputVariance,  // sigma_v^2, the gradient of the readout flows through V
    InputVariance,   // sigma_u^2, the constant as printed in the published recursion
};

/// Settled by the finite-width oracle (see tests/test_oracle.cpp, adjudication case).
inline constexpr FinalLayerScale kFinalLayerScale = FinalLayerScale::OutputVariance;

struct AlignedPair {
    std::vector<ItemId> x;
    std::vector<ItemId> y;
    std::vector<std::uint8_t> pad_x;
    std::vector<std::uint8_t> pad_y;

    [[nodiscard]] std::size_t length() const noexcept { return x.size(); }
};

/// Left-pads the shorter sequence to the longer length, then prepends
/// `extra_pad` shared padding slots to both.
inline AlignedPair align_pair(const ItemSequence& x, const ItemSequence& y, std::size_t extra_pad = 0) {
    if (x.empty() || y.empty()) {
        throw std::invalid_argument("cannot align an empty sequence");
    }
    const std::size_t len = std::max(x.length(), y.length()) + extra_pad;
    AlignedPair out;
    const auto fill = [len](const std::vector<ItemId>& src, std::vector<ItemId>& items, std::vector<std::uint8_t>& mask) {
        const std::size_t pads = len - src.size();
        items.assign(pads, kPadItem);
        mask.assign(pads, 1);
        items.insert(items.end(), src.begin(), src.end());
        mask.resize(len, 0);
    };
    fill(x.items, out.x, out.pad_x);
    fill(y.items, out.y, out.pad_y);
    return out;
}

/// Sigma^(l,t)(x, x) for one sequence; rows are layers, columns time steps.
template <typename Scalar>
struct SelfTrace {
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> sigma;

    [[nodiscard]] Eigen::Index layers() const noexcept { return sigma.rows(); }
    [[nodiscard]] Eigen::Index steps() const noexcept { return sigma.cols(); }
};

template <typename Scalar>
struct KernelValues {
    Scalar ntk{0};
    Scalar nngp{0};
};

/// Full per-cell state of one pair evaluation over the aligned time axis.
template <typename Scalar>
struct KernelTrace {
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> sigma;  // Sigma^(l,t)(x, x')
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> psi;    // NTK accumulation term
    std::vector<std::uint8_t> pad_x;
    std::vector<std::uint8_t> pad_y;
    KernelValues<Scalar> values;
};

namespace detail {

template <typename Scalar>
void check_alignment(const KernelHyperParams<Scalar>& p, const AlignedPair& a, std::size_t tx, std::size_t ty) {
    p.validate();
    const bool padded = a.length() != tx || a.length() != ty;
    if (padded && p.sigma_b != Scalar(0)) {
        throw std::invalid_argument("padded kernel evaluation requires sigma_b = 0");
    }
}

// Shared recursion. `self_x`/`self_y` give Sigma(x,x) and Sigma(x',x') at the
// original (unpadded) time index; a null pointer means "the cross value itself"
// which turns the recursion into the self-trace.
template <typename Scalar>
KernelTrace<Scalar> run_recursion(const AlignedPair& a, const SelfTrace<Scalar>* self_x,
                                  const SelfTrace<Scalar>* self_y, const KernelHyperParams<Scalar>& p,
                                  FinalLayerScale scale) {
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    const auto layers = static_cast<Eigen::Index>(p.layers);
    const auto steps = static_cast<Eigen::Index>(a.length());
    const Eigen::Index off_x = steps - (self_x ? self_x->steps() : steps);
    const Eigen::Index off_y = steps - (self_y ? self_y->steps() : steps);

    const Scalar w2 = p.sigma_w * p.sigma_w;
    const Scalar u2 = p.sigma_u * p.sigma_u;
    const Scalar b2 = p.sigma_b * p.sigma_b;

    KernelTrace<Scalar> tr;
    tr.sigma = Matrix::Zero(layers, steps);
    tr.psi = Matrix::Zero(layers, steps);
    tr.pad_x = a.pad_x;
    tr.pad_y = a.pad_y;

    // Blocks are rebuilt on demand from the traces; padded or out-of-range cells
    // come back flagged so both operators return exact zeros.
    const auto block = [&](Eigen::Index l, Eigen::Index s) {
        CovBlock<Scalar> b;
        if (s < 0) {
            b.pad_x = b.pad_y = true;
            return b;
        }
        const auto us = static_cast<std::size_t>(s);
        b.pad_x = a.pad_x[us] != 0;
        b.pad_y = a.pad_y[us] != 0;
        b.k3 = tr.sigma(l, s);
        b.k1 = b.pad_x ? Scalar(0) : (self_x ? self_x->sigma(l, s - off_x) : b.k3);
        b.k2 = b.pad_y ? Scalar(0) : (self_y ? self_y->sigma(l, s - off_y) : b.k3);
        return b;
    };

    for (Eigen::Index s = 0; s < steps; ++s) {
        const auto us = static_cast<std::size_t>(s);
        const bool both_real = a.pad_x[us] == 0 && a.pad_y[us] == 0;
        const Scalar same_item = (both_real && a.x[us] == a.y[us]) ? Scalar(1) : Scalar(0);
        for (Eigen::Index l = 0; l < layers; ++l) {
            const CovBlock<Scalar> prev_t = block(l, s - 1);
            const Scalar input = l == 0 ? u2 * same_item : u2 * v_phi(p.activation, block(l - 1, s));
            tr.sigma(l, s) = input + w2 * v_phi(p.activation, prev_t) + b2;

            Scalar psi = tr.sigma(l, s);
            if (s > 0) {
                psi += w2 * tr.psi(l, s - 1) * v_phi_prime(p.activation, prev_t);
            }
            if (l > 0) {
                psi += u2 * tr.psi(l - 1, s) * v_phi_prime(p.activation, block(l - 1, s));
            }
            tr.psi(l, s) = psi;
        }
    }

    const CovBlock<Scalar> last = block(layers - 1, steps - 1);
    const Scalar out_scale = scale == FinalLayerScale::OutputVariance ? p.sigma_v : p.sigma_u;
    tr.values.nngp = p.sigma_v * p.sigma_v * v_phi(p.activation, last);
    tr.values.ntk = tr.values.nngp + out_scale * out_scale * tr.psi(layers - 1, steps - 1) * v_phi_prime(p.activation, last);
    return tr;
}

inline bool canonical_before(const ItemSequence& a, const ItemSequence& b) {
    if (a.length() != b.length()) {
        return a.length() < b.length();
    }
    return a.items <= b.items;
}

}  // namespace detail

/// Sigma^(l,t)(x, x) for every layer and step of x.
template <typename Scalar>
SelfTrace<Scalar> self_trace(const ItemSequence& x, const KernelHyperParams<Scalar>& p) {
    const AlignedPair a = align_pair(x, x);
    detail::check_alignment(p, a, x.length(), x.length());
    return SelfTrace<Scalar>{detail::run_recursion<Scalar>(a, nullptr, nullptr, p, kFinalLayerScale).sigma};
}

/// Pair evaluation against precomputed self-traces. Arguments are put into a
/// canonical order first so that swapping x and x' is bit-identical.
template <typename Scalar>
KernelTrace<Scalar> pair_trace(const ItemSequence& x, const SelfTrace<Scalar>& sx, const ItemSequence& y,
                               const SelfTrace<Scalar>& sy, const KernelHyperParams<Scalar>& p,
                               std::size_t extra_pad = 0, FinalLayerScale scale = kFinalLayerScale) {
    if (sx.steps() != static_cast<Eigen::Index>(x.length()) || sy.steps() != static_cast<Eigen::Index>(y.length()) ||
        sx.layers() != p.layers || sy.layers() != p.layers) {
        throw std::invalid_argument("self-trace does not match its sequence or layer count");
    }
    if (!detail::canonical_before(x, y)) {
        KernelTrace<Scalar> tr = pair_trace(y, sy, x, sx, p, extra_pad, scale);
        std::swap(tr.pad_x, tr.pad_y);
        return tr;
    }
    const AlignedPair a = align_pair(x, y, extra_pad);
    detail::check_alignment(p, a, x.length(), y.length());
    return detail::run_recursion(a, &sx, &sy, p, scale);
}

template <typename Scalar>
KernelTrace<Scalar> pair_trace(const ItemSequence& x, const ItemSequence& y, const KernelHyperParams<Scalar>& p,
                               std::size_t extra_pad = 0, FinalLayerScale scale = kFinalLayerScale) {
    return pair_trace(x, self_trace(x, p), y, self_trace(y, p), p, extra_pad, scale);
}

/// NNGP-RNN kernel K^(T)(x, x').
template <typename Scalar>
Scalar nngp(const ItemSequence& x, const ItemSequence& y, const KernelHyperParams<Scalar>& p) {
    return pair_trace(x, y, p).values.nngp;
}

/// RNTK Theta^(T)(x, x') together with the NNGP computed in the same pass.
template <typename Scalar>
KernelValues<Scalar> rntk(const ItemSequence& x, const ItemSequence& y, const KernelHyperParams<Scalar>& p,
                          FinalLayerScale scale = kFinalLayerScale) {
    return pair_trace(x, y, p, 0, scale).values;
}

template <typename Scalar>
KernelValues<Scalar> rntk(const ItemSequence& x, const SelfTrace<Scalar>& sx, const ItemSequence& y,
                          const SelfTrace<Scalar>& sy, const KernelHyperParams<Scalar>& p,
                          FinalLayerScale scale = kFinalLayerScale) {
    return pair_trace(x, sx, y, sy, p, 0, scale).values;
}

}  // namespace overrec

#endif  // OVERREC_RNTK_ENGINE_HPP
