#ifndef OVERREC_VERIFICATION_HPP
#define OVERREC_VERIFICATION_HPP

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "overrec/types.hpp"

// Check suites shared by `overrec verify`, `overrec selftest` and the acceptance
// binary. Each suite returns one line per check with its measured quantities.

namespace overrec::verify {

struct CheckLine {
    std::string name;
    bool passed{false};
    bool informational{false};  // reported, never fails the suite
    std::string detail;
};

struct SuiteReport {
    std::string title;
    std::vector<CheckLine> lines;
    std::vector<std::string> table;  // optional per-item measurements, printed after the lines

    [[nodiscard]] bool passed() const;
    [[nodiscard]] std::string format() const;
    void add(std::string name, bool ok, std::string detail, bool informational = false);
};

/// Pool of `count` random sequences over `vocab` items with lengths in [min_len, max_len].
std::vector<ItemSequence> random_pool(std::uint64_t seed, std::size_t count, ItemId vocab, std::size_t min_len, std::size_t max_len);

/// Closed-form V_ReLU / V_ReLU' against bivariate-Gaussian sampling and the exact anchor values.
SuiteReport closed_form_operators(std::uint64_t seed, int blocks = 20, std::size_t samples = 1'000'000);

/// Hand-traced NNGP / RNTK values for one- and two-step sequences.
SuiteReport hand_traces();

struct OracleRun {
    std::uint64_t seed{20230401};
    int width{1024};
    int trials{200};
    unsigned threads{1};
    std::vector<int> layers{1, 2};
    std::vector<int> widths{64, 256, 1024};
};

/// Analytic kernels inside 3 standard errors of the finite-width estimates for
/// all pairs of a 10-sequence pool; at least 52 of 55 pairs per depth.
SuiteReport oracle_equivalence(const OracleRun& run);

/// log-error slope <= -0.3 over the sweep widths for at least 8 of 10 pairs.
SuiteReport convergence(const OracleRun& run);

/// Tied and untied empirical NTK agree within the sum of their 3-sigma bounds
/// for at least 9 of 10 pairs at depth 2.
SuiteReport tied_untied(const OracleRun& run);

/// Decides between sigma_v^2 and sigma_u^2 as the readout factor of the NTK
/// recursion with sigma_u != sigma_v, and checks the library constant agrees.
SuiteReport final_scale_adjudication(const OracleRun& run);

/// Manual backprop against central finite differences on random small networks.
SuiteReport gradient_check(std::uint64_t seed, int instances = 20);

/// Exact padding invariance and self-padding consistency on random pairs.
SuiteReport padding_invariance(std::uint64_t seed, int pairs = 50);

/// Symmetry and item-relabeling invariance of the analytic kernels.
SuiteReport symmetry_and_relabeling(std::uint64_t seed, int pairs = 50);

/// Smallest eigenvalue of self-Grams >= -1e-8 x largest, NNGP and RNTK.
SuiteReport psd_self_gram(std::uint64_t seed, std::size_t n = 200, unsigned threads = 1);

/// Ranks {1, 3, 7} give MRR@5 {1, 1/3, 0} and NDCG@5 {1, 0.5, 0}.
SuiteReport metric_units();

}  // namespace overrec::verify

#endif  // OVERREC_VERIFICATION_HPP
