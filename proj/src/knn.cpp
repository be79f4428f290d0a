#include "overrec/knn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

namespace overrec {

std::vector<Neighbor> top_k_neighbors(std::span<const double> gram_row, std::size_t k,
                                      std::span<const std::uint8_t> excluded) {
    if (k == 0) {
        throw std::invalid_argument("k must be at least 1");
    }
    if (gram_row.empty()) {
        throw std::invalid_argument("empty Gram row");
    }
    if (!excluded.empty() && excluded.size() != gram_row.size()) {
        throw std::invalid_argument("exclusion mask does not match Gram row length");
    }
    std::vector<std::size_t> idx;
    idx.reserve(gram_row.size());
    for (std::size_t i = 0; i < gram_row.size(); ++i) {
        if (excluded.empty() || excluded[i] == 0) {
            idx.push_back(i);
        }
    }
    const auto better = [&](std::size_t a, std::size_t b) {
        if (gram_row[a] != gram_row[b]) {
            return gram_row[a] > gram_row[b];
        }
        return a < b;
    };
    const std::size_t take = std::min(k, idx.size());
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(take), idx.end(), better);

    std::vector<Neighbor> out;
    out.reserve(take);
    for (std::size_t i = 0; i < take; ++i) {
        out.push_back({idx[i], gram_row[idx[i]]});
    }
    return out;
}

ScoreMap predict_weighted_y(std::span<const Neighbor> neighbors, std::span<const CorpusEntry> corpus) {
    if (neighbors.empty()) {
        throw std::invalid_argument("weighted-Y prediction needs at least one neighbour");
    }
    double total = 0.0;
    for (const Neighbor& n : neighbors) {
        if (n.index >= corpus.size()) {
            throw std::out_of_range("neighbour index outside corpus");
        }
        if (!(n.value >= 0.0) || !std::isfinite(n.value)) {
            throw std::invalid_argument("weighted-Y prediction needs finite non-negative kernel values");
        }
        total += n.value;
    }
    ScoreMap scores;
    if (total > 0.0) {
        for (const Neighbor& n : neighbors) {
            if (n.value > 0.0) {
                scores[corpus[n.index].target] += n.value;
            }
        }
        for (auto& [item, s] : scores) {
            s /= total;
        }
    } else {
        const double share = 1.0 / static_cast<double>(neighbors.size());
        for (const Neighbor& n : neighbors) {
            scores[corpus[n.index].target] += share;
        }
    }
    return scores;
}

ScoreMap predict_equal_item(std::span<const Neighbor> neighbors, std::span<const CorpusEntry> corpus,
                            bool include_target) {
    ScoreMap scores;
    for (const Neighbor& n : neighbors) {
        if (n.index >= corpus.size()) {
            throw std::out_of_range("neighbour index outside corpus");
        }
        if (n.value == 0.0) {
            continue;
        }
        const CorpusEntry& e = corpus[n.index];
        std::set<ItemId> items(e.sequence.items.begin(), e.sequence.items.end());
        if (include_target) {
            items.insert(e.target);
        }
        for (const ItemId item : items) {
            scores[item] += n.value;
        }
    }
    return scores;
}

double sknn_similarity(const ItemSequence& x, const ItemSequence& y) {
    if (x.empty() || y.empty()) {
        throw std::invalid_argument("cosine similarity of an empty sequence");
    }
    std::vector<ItemId> a(x.items);
    std::vector<ItemId> b(y.items);
    std::sort(a.begin(), a.end());
    a.erase(std::unique(a.begin(), a.end()), a.end());
    std::sort(b.begin(), b.end());
    b.erase(std::unique(b.begin(), b.end()), b.end());

    std::size_t common = 0;
    auto ia = a.begin();
    auto ib = b.begin();
    while (ia != a.end() && ib != b.end()) {
        if (*ia < *ib) {
            ++ia;
        } else if (*ib < *ia) {
            ++ib;
        } else {
            ++common;
            ++ia;
            ++ib;
        }
    }
    return static_cast<double>(common) / std::sqrt(static_cast<double>(a.size()) * static_cast<double>(b.size()));
}

}  // namespace overrec
