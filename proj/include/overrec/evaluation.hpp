#ifndef OVERREC_EVALUATION_HPP
#define OVERREC_EVALUATION_HPP

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "overrec/knn.hpp"

namespace overrec {

/// Full-item-set rank of `target`. Ties go to the smaller item id, and every
/// unscored item counts as score 0, so an unscored target ranks behind all
/// positively scored items.
std::size_t rank_of_target(const ScoreMap& scores, ItemId target, std::size_t item_count);

struct EvalReport {
    std::map<int, double> mrr_at;
    std::map<int, double> ndcg_at;
    std::size_t n_queries{0};
};

/// MRR@c and single-relevant-item NDCG@c averaged over queries.
EvalReport metrics(std::span<const std::size_t> ranks, std::span<const int> cutoffs);

std::string format_table(const EvalReport& report);

/// `key=value` lines; `meta` entries are written first in the given order.
std::string format_key_value(const EvalReport& report, const std::vector<std::pair<std::string, std::string>>& meta = {});

}  // namespace overrec

#endif  // OVERREC_EVALUATION_HPP
