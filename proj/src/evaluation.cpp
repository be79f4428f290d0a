#include "overrec/evaluation.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace overrec {

std::size_t rank_of_target(const ScoreMap& scores, ItemId target, std::size_t item_count) {
    if (target >= item_count) {
        throw std::out_of_range("target item outside the item set");
    }
    if (scores.size() > item_count) {
        throw std::invalid_argument("score map larger than the item set");
    }
    const auto it = scores.find(target);
    const double ts = it == scores.end() ? 0.0 : it->second;

    std::size_t ahead = 0;
    std::size_t stored_below = 0;  // stored items with id < target
    for (const auto& [item, s] : scores) {
        if (item >= item_count) {
            throw std::out_of_range("scored item outside the item set");
        }
        if (item < target) ++stored_below;
        if (s > ts || (s == ts && item < target)) ++ahead;
    }
    // Unscored items sit at 0.
    const std::size_t unscored = item_count - scores.size();
    if (0.0 > ts) {
        ahead += unscored;
    } else if (0.0 == ts) {
        ahead += static_cast<std::size_t>(target) - stored_below;
    }
    return ahead + 1;
}

EvalReport metrics(std::span<const std::size_t> ranks, std::span<const int> cutoffs) {
    if (ranks.empty()) {
        throw std::invalid_argument("no ranks to evaluate");
    }
    EvalReport r;
    r.n_queries = ranks.size();
    for (const int c : cutoffs) {
        if (c < 1) {
            throw std::invalid_argument("metric cutoff must be at least 1");
        }
        double mrr = 0.0;
        double ndcg = 0.0;
        for (const std::size_t rank : ranks) {
            if (rank < 1) {
                throw std::invalid_argument("ranks start at 1");
            }
            if (rank <= static_cast<std::size_t>(c)) {
                mrr += 1.0 / static_cast<double>(rank);
                ndcg += 1.0 / std::log2(static_cast<double>(rank) + 1.0);
            }
        }
        r.mrr_at[c] = mrr / static_cast<double>(ranks.size());
        r.ndcg_at[c] = ndcg / static_cast<double>(ranks.size());
    }
    return r;
}

std::string format_table(const EvalReport& report) {
    std::ostringstream os;
    char line[96];
    os << "cutoff        MRR       NDCG\n";
    for (const auto& [c, mrr] : report.mrr_at) {
        std::snprintf(line, sizeof line, "%6d  %9.6f  %9.6f\n", c, mrr, report.ndcg_at.at(c));
        os << line;
    }
    os << "queries: " << report.n_queries << '\n';
    return os.str();
}

std::string format_key_value(const EvalReport& report, const std::vector<std::pair<std::string, std::string>>& meta) {
    std::ostringstream os;
    char buf[64];
    for (const auto& [k, v] : meta) {
        os << k << '=' << v << '\n';
    }
    os << "n_queries=" << report.n_queries << '\n';
    for (const auto& [c, mrr] : report.mrr_at) {
        std::snprintf(buf, sizeof buf, "%.17g", mrr);
        os << "mrr@" << c << '=' << buf << '\n';
    }
    for (const auto& [c, ndcg] : report.ndcg_at) {
        std::snprintf(buf, sizeof buf, "%.17g", ndcg);
        os << "ndcg@" << c << '=' << buf << '\n';
    }
    return os.str();
}

}  // namespace overrec
