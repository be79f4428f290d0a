#ifndef OVERREC_KNN_HPP
#define OVERREC_KNN_HPP

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "overrec/types.hpp"

namespace overrec {

/// A corpus sequence together with the item its user interacted with next.
struct CorpusEntry {
    ItemSequence sequence;
    ItemId target{0};
};

/// Sparse next-item scores; items that are absent score 0.
using ScoreMap = std::map<ItemId, double>;

struct Neighbor {
    std::size_t index{0};
    double value{0};

    friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

/// The k largest entries of a Gram row, ties broken towards the smaller corpus
/// index. Entries flagged in `excluded` (same length as the row, or empty) are
/// never selected.
std::vector<Neighbor> top_k_neighbors(std::span<const double> gram_row, std::size_t k,
                                      std::span<const std::uint8_t> excluded = {});

/// Kernel-weighted vote over neighbour targets, normalised to sum to one.
/// An all-zero neighbourhood falls back to uniform mass per neighbour.
ScoreMap predict_weighted_y(std::span<const Neighbor> neighbors, std::span<const CorpusEntry> corpus);

/// SkNN scoring: each neighbour credits every item of its sequence (and its
/// target unless `include_target` is false) with its similarity, once per item.
ScoreMap predict_equal_item(std::span<const Neighbor> neighbors, std::span<const CorpusEntry> corpus,
                            bool include_target = true);

/// Cosine similarity of the binary item-set vectors.
double sknn_similarity(const ItemSequence& x, const ItemSequence& y);

}  // namespace overrec

#endif  // OVERREC_KNN_HPP
