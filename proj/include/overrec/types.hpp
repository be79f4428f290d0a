#ifndef OVERREC_TYPES_HPP
#define OVERREC_TYPES_HPP

#include <cmath>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "overrec/kernel_math.hpp"

namespace overrec {

using ItemId = std::uint32_t;

inline constexpr ItemId kPadItem = std::numeric_limits<ItemId>::max();
inline constexpr std::size_t kDefaultMaxLength = 50;

/// One user's interaction history, oldest first.
struct ItemSequence {
    std::string user;
    std::vector<ItemId> items;

    ItemSequence() = default;
    ItemSequence(std::vector<ItemId> it) : items(std::move(it)) {}  // NOLINT(google-explicit-constructor)
    ItemSequence(std::string u, std::vector<ItemId> it) : user(std::move(u)), items(std::move(it)) {}

    [[nodiscard]] std::size_t length() const noexcept { return items.size(); }
    [[nodiscard]] bool empty() const noexcept { return items.empty(); }
};

/// Throws std::invalid_argument unless 1 <= length <= max_length and every item < item_count.
inline void validate(const ItemSequence& s, std::size_t max_length, std::size_t item_count) {
    if (s.empty()) {
        throw std::invalid_argument("sequence for user '" + s.user + "' is empty");
    }
    if (s.length() > max_length) {
        throw std::invalid_argument("sequence for user '" + s.user + "' exceeds maximum length " + std::to_string(max_length));
    }
    for (const ItemId item : s.items) {
        if (item >= item_count) {
            throw std::invalid_argument("item id " + std::to_string(item) + " outside item set of size " + std::to_string(item_count));
        }
    }
}

/// Variances of the NTK-initialised recurrent network the kernels describe.
template <typename Scalar = double>
struct KernelHyperParams {
    Scalar sigma_w{1};
    Scalar sigma_u{1};
    Scalar sigma_b{0};
    Scalar sigma_v{1};
    int layers{1};
    Activation activation{Activation::ReLU};

    /// Finite, non-negative variances and at least one layer. sigma_v = 0 is
    /// accepted here because the oracle uses it as a degenerate control.
    void validate() const {
        using std::isfinite;
        const auto ok = [](Scalar s) { return isfinite(s) && s >= Scalar(0); };
        if (!ok(sigma_w) || !ok(sigma_u) || !ok(sigma_b) || !ok(sigma_v)) {
            throw std::invalid_argument("kernel variances must be finite and non-negative");
        }
        if (layers < 1) {
            throw std::invalid_argument("kernel needs at least one layer");
        }
    }

    friend bool operator==(const KernelHyperParams&, const KernelHyperParams&) = default;
};

using HyperParams = KernelHyperParams<double>;

}  // namespace overrec

#endif  // OVERREC_TYPES_HPP
