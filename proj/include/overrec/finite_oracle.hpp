#ifndef OVERREC_FINITE_ORACLE_HPP
#define OVERREC_FINITE_ORACLE_HPP

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "overrec/types.hpp"

// Finite-width ReLU RNN under NTK initialisation, used to check the analytic
// kernels by Monte-Carlo. Raw parameters are i.i.d. N(0, 1); the scalings
// sigma_W/sqrt(n), sigma_U/sqrt(n) (layers >= 2), sigma_b and sigma_V/sqrt(n)
// are applied where the weights are used. The first-layer input term is
// sigma_U * U[:, item] without a 1/sqrt(m) factor, matching the analytic
// recursion, which uses sigma_U^2 [x_t == x'_t] directly.

namespace overrec::oracle {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct FiniteRnnWeights {
    struct Layer {
        MatrixXd w;  // n x n recurrent
        MatrixXd u;  // n x m at layer 1, n x n above
        VectorXd b;  // n
    };

    std::vector<Layer> layers;
    MatrixXd v;  // d x n readout; unused when tied
    int width{0};
    int input_width{0};
    int output_width{0};
    bool tied{false};

    /// Raw readout row for output coordinate i (column i of U^(1) when tied).
    [[nodiscard]] VectorXd output_row(int i) const;

    [[nodiscard]] std::size_t parameter_count() const;
    /// Raw parameters in the order W, U, b per layer, then V (untied only).
    [[nodiscard]] VectorXd flatten() const;
    void assign(const VectorXd& flat);
};

/// Samples raw weights. When tied, the readout is U^(1) transposed and the
/// output width is forced to the input width.
FiniteRnnWeights sample_weights(int width, int input_width, int output_width, int layers, bool tied, std::mt19937_64& rng);

/// Per-cell pre-activations and hidden states, indexed [layer][step].
struct ForwardState {
    std::vector<std::vector<VectorXd>> g;
    std::vector<std::vector<VectorXd>> h;
    VectorXd output;
};

ForwardState forward_state(const FiniteRnnWeights& w, const ItemSequence& x, const HyperParams& p);
VectorXd forward(const FiniteRnnWeights& w, const ItemSequence& x, const HyperParams& p);

/// d f_i / d g^(l,t) for one output coordinate, indexed [layer][step].
struct BackwardState {
    int coord{0};
    std::vector<std::vector<VectorXd>> a;
};

BackwardState backward(const FiniteRnnWeights& w, const ForwardState& fs, const HyperParams& p, int out_coord);

/// Gradient of output coordinate `out_coord` w.r.t. every raw parameter, laid
/// out like FiniteRnnWeights::flatten().
VectorXd gradient(const FiniteRnnWeights& w, const ItemSequence& x, const HyperParams& p, int out_coord);

/// Inner product of the two parameter gradients, computed from the factored
/// outer-product structure of each weight gradient instead of materialising them.
double gradient_inner_product(const FiniteRnnWeights& w, const HyperParams& p, const ItemSequence& x, const ForwardState& fx,
                              const BackwardState& bx, const ItemSequence& y, const ForwardState& fy, const BackwardState& by);

struct KernelEstimate {
    double mean{0};
    double std_error{0};
    int trials{0};
    int width{0};
};

/// Mean and standard error of per-trial values.
KernelEstimate summarize(std::span<const double> samples, int width);

struct OracleSettings {
    int width{1024};
    int trials{200};
    std::uint64_t seed{20230401};
    unsigned threads{1};
    bool tied{false};
    /// Readout rows averaged for the NNGP estimate; 0 means `width`. Ignored when tied.
    int nngp_outputs{0};
    /// One-hot input width; 0 means one past the largest item in the pool.
    int input_width{0};
};

/// Per-trial kernel values for every pair (i <= j) of a pool. Each trial samples
/// one network and evaluates all pool sequences through it.
struct PoolSamples {
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    std::vector<std::vector<double>> nngp;  // [pair][trial]
    std::vector<std::vector<double>> ntk;   // [pair][trial]
    int width{0};

    [[nodiscard]] std::size_t pair_index(std::size_t i, std::size_t j) const;
    [[nodiscard]] KernelEstimate nngp_estimate(std::size_t pair) const { return summarize(nngp[pair], width); }
    [[nodiscard]] KernelEstimate ntk_estimate(std::size_t pair) const { return summarize(ntk[pair], width); }
};

PoolSamples sample_pool(std::span<const ItemSequence> pool, const HyperParams& p, const OracleSettings& s);

/// mean over trials and readout coordinates of f_i(x) f_i(x').
KernelEstimate empirical_nngp(const ItemSequence& x, const ItemSequence& y, const HyperParams& p, const OracleSettings& s);

/// mean over trials (and coordinates when tied) of <grad f_i(x), grad f_i(x')>.
KernelEstimate empirical_ntk(const ItemSequence& x, const ItemSequence& y, const HyperParams& p, const OracleSettings& s);

struct SweepPoint {
    int width{0};
    double nngp_abs_error{0};  // |mean estimate - analytic|
    double ntk_abs_error{0};
    double nngp_rms_error{0};  // root-mean-square single-network deviation from the analytic value
    double ntk_rms_error{0};
};

/// Error of the finite-width kernels against the analytic ones per width.
/// Widths must be strictly ascending.
std::vector<SweepPoint> convergence_sweep(const ItemSequence& x, const ItemSequence& y, const HyperParams& p,
                                          std::span<const int> widths, const OracleSettings& s);

/// Least-squares slope of log(error) against log(width). Empty when fewer than
/// two points are given or any error is zero.
std::optional<double> log_log_slope(std::span<const int> widths, std::span<const double> errors);

}  // namespace overrec::oracle

#endif  // OVERREC_FINITE_ORACLE_HPP
