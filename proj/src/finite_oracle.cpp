#include "overrec/finite_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "overrec/parallel.hpp"
#include "overrec/rntk_engine.hpp"

namespace overrec::oracle {

namespace {

void fill_normal(MatrixXd& m, Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
    std::normal_distribution<double> nd(0.0, 1.0);
    m.resize(rows, cols);
    double* d = m.data();
    for (Eigen::Index i = 0; i < m.size(); ++i) d[i] = nd(rng);
}

void fill_normal(VectorXd& v, Eigen::Index n, std::mt19937_64& rng) {
    std::normal_distribution<double> nd(0.0, 1.0);
    v.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = nd(rng);
}

VectorXd relu(const VectorXd& g) { return g.cwiseMax(0.0); }

VectorXd relu_mask(const VectorXd& g) { return (g.array() > 0.0).cast<double>().matrix(); }

void check_input(const FiniteRnnWeights& w, const ItemSequence& x, const HyperParams& p) {
    if (static_cast<int>(w.layers.size()) != p.layers) {
        throw std::invalid_argument("network depth does not match hyper-parameters");
    }
    if (x.empty()) {
        throw std::invalid_argument("empty input sequence");
    }
    for (const ItemId item : x.items) {
        if (item >= static_cast<ItemId>(w.input_width)) {
            throw std::invalid_argument("item " + std::to_string(item) + " exceeds network input width " +
                                        std::to_string(w.input_width));
        }
    }
}

}  // namespace

VectorXd FiniteRnnWeights::output_row(int i) const {
    if (i < 0 || i >= output_width) {
        throw std::out_of_range("output coordinate out of range");
    }
    return tied ? VectorXd(layers.front().u.col(i)) : VectorXd(v.row(i).transpose());
}

std::size_t FiniteRnnWeights::parameter_count() const {
    std::size_t n = 0;
    for (const Layer& l : layers) n += static_cast<std::size_t>(l.w.size() + l.u.size() + l.b.size());
    return n + (tied ? 0 : static_cast<std::size_t>(v.size()));
}

VectorXd FiniteRnnWeights::flatten() const {
    VectorXd flat(static_cast<Eigen::Index>(parameter_count()));
    Eigen::Index at = 0;
    const auto put = [&](const auto& m) {
        flat.segment(at, m.size()) = m.reshaped();
        at += m.size();
    };
    for (const Layer& l : layers) {
        put(l.w);
        put(l.u);
        put(l.b);
    }
    if (!tied) put(v);
    return flat;
}

void FiniteRnnWeights::assign(const VectorXd& flat) {
    if (flat.size() != static_cast<Eigen::Index>(parameter_count())) {
        throw std::invalid_argument("flat parameter vector has the wrong size");
    }
    Eigen::Index at = 0;
    const auto take = [&](auto& m) {
        m.reshaped() = flat.segment(at, m.size());
        at += m.size();
    };
    for (Layer& l : layers) {
        take(l.w);
        take(l.u);
        take(l.b);
    }
    if (!tied) take(v);
}

FiniteRnnWeights sample_weights(int width, int input_width, int output_width, int layers, bool tied, std::mt19937_64& rng) {
    if (width < 1 || input_width < 1 || layers < 1 || (!tied && output_width < 1)) {
        throw std::invalid_argument("network dimensions must be positive");
    }
    FiniteRnnWeights w;
    w.width = width;
    w.input_width = input_width;
    w.output_width = tied ? input_width : output_width;
    w.tied = tied;
    w.layers.resize(static_cast<std::size_t>(layers));
    for (std::size_t l = 0; l < w.layers.size(); ++l) {
        auto& L = w.layers[l];
        fill_normal(L.w, width, width, rng);
        fill_normal(L.u, width, l == 0 ? input_width : width, rng);
        fill_normal(L.b, width, rng);
    }
    if (!tied) fill_normal(w.v, output_width, width, rng);
    return w;
}

ForwardState forward_state(const FiniteRnnWeights& w, const ItemSequence& x, const HyperParams& p) {
    check_input(w, x, p);
    const auto n = static_cast<double>(w.width);
    const double sw = p.sigma_w / std::sqrt(n);
    const double su_hidden = p.sigma_u / std::sqrt(n);
    const std::size_t L = w.layers.size();
    const std::size_t T = x.length();

    ForwardState fs;
    fs.g.assign(L, std::vector<VectorXd>(T));
    fs.h.assign(L, std::vector<VectorXd>(T));
    for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t l = 0; l < L; ++l) {
            const auto& layer = w.layers[l];
            VectorXd g = l == 0 ? VectorXd(p.sigma_u * layer.u.col(x.items[t])) : VectorXd(su_hidden * (layer.u * fs.h[l - 1][t]));
            if (t > 0) g.noalias() += sw * (layer.w * fs.h[l][t - 1]);
            g += p.sigma_b * layer.b;
            fs.h[l][t] = relu(g);
            fs.g[l][t] = std::move(g);
        }
    }
    const VectorXd& top = fs.h[L - 1][T - 1];
    const double sv = p.sigma_v / std::sqrt(n);
    if (w.tied) {
        fs.output = sv * (w.layers.front().u.transpose() * top);
    } else {
        fs.output = sv * (w.v * top);
    }
    return fs;
}

VectorXd forward(const FiniteRnnWeights& w, const ItemSequence& x, const HyperParams& p) {
    return forward_state(w, x, p).output;
}

BackwardState backward(const FiniteRnnWeights& w, const ForwardState& fs, const HyperParams& p, int out_coord) {
    const auto n = static_cast<double>(w.width);
    const double sw = p.sigma_w / std::sqrt(n);
    const double su_hidden = p.sigma_u / std::sqrt(n);
    const std::size_t L = fs.g.size();
    const std::size_t T = fs.g.front().size();

    // e[l][t] = df/dh^(l,t), accumulated from the cell above and the next step.
    std::vector<std::vector<VectorXd>> e(L, std::vector<VectorXd>(T, VectorXd::Zero(w.width)));
    e[L - 1][T - 1] = (p.sigma_v / std::sqrt(n)) * w.output_row(out_coord);

    BackwardState bs;
    bs.coord = out_coord;
    bs.a.assign(L, std::vector<VectorXd>(T));
    for (std::size_t t = T; t-- > 0;) {
        for (std::size_t l = L; l-- > 0;) {
            VectorXd a = relu_mask(fs.g[l][t]).cwiseProduct(e[l][t]);
            if (t > 0) e[l][t - 1].noalias() += sw * (w.layers[l].w.transpose() * a);
            if (l > 0) e[l - 1][t].noalias() += su_hidden * (w.layers[l].u.transpose() * a);
            bs.a[l][t] = std::move(a);
        }
    }
    return bs;
}

VectorXd gradient(const FiniteRnnWeights& w, const ItemSequence& x, const HyperParams& p, int out_coord) {
    const ForwardState fs = forward_state(w, x, p);
    const BackwardState bs = backward(w, fs, p, out_coord);
    const auto n = static_cast<double>(w.width);
    const double sw = p.sigma_w / std::sqrt(n);
    const double su_hidden = p.sigma_u / std::sqrt(n);
    const double sv = p.sigma_v / std::sqrt(n);
    const std::size_t L = fs.g.size();
    const std::size_t T = x.length();

    FiniteRnnWeights grad = w;  // same shapes, overwritten below
    for (std::size_t l = 0; l < L; ++l) {
        auto& G = grad.layers[l];
        G.w.setZero();
        G.u.setZero();
        G.b.setZero();
        for (std::size_t t = 0; t < T; ++t) {
            const VectorXd& a = bs.a[l][t];
            if (t > 0) G.w.noalias() += sw * a * fs.h[l][t - 1].transpose();
            if (l == 0) {
                G.u.col(x.items[t]) += p.sigma_u * a;
            } else {
                G.u.noalias() += su_hidden * a * fs.h[l - 1][t].transpose();
            }
            G.b += p.sigma_b * a;
        }
    }
    const VectorXd& top = fs.h[L - 1][T - 1];
    if (w.tied) {
        grad.layers.front().u.col(out_coord) += sv * top;
    } else {
        grad.v.setZero();
        grad.v.row(out_coord) = sv * top.transpose();
    }
    return grad.flatten();
}

double gradient_inner_product(const FiniteRnnWeights& w, const HyperParams& p, const ItemSequence& x, const ForwardState& fx,
                              const BackwardState& bx, const ItemSequence& y, const ForwardState& fy, const BackwardState& by) {
    if (bx.coord != by.coord) {
        throw std::invalid_argument("gradient inner product across different output coordinates");
    }
    const auto n = static_cast<double>(w.width);
    const double w2 = p.sigma_w * p.sigma_w / n;
    const double u2_in = p.sigma_u * p.sigma_u;
    const double u2_hidden = p.sigma_u * p.sigma_u / n;
    const double b2 = p.sigma_b * p.sigma_b;
    const std::size_t L = fx.g.size();
    const std::size_t tx = x.length();
    const std::size_t ty = y.length();
    const VectorXd& top_x = fx.h[L - 1][tx - 1];
    const VectorXd& top_y = fy.h[L - 1][ty - 1];

    // Each weight gradient is a sum over steps of outer products a_t h_t^T, so
    // <G(x), G(y)> = sum_{t,t'} (a_t . a'_t') (h_t . h'_t').
    double total = 0.0;
    for (std::size_t l = 0; l < L; ++l) {
        for (std::size_t t = 0; t < tx; ++t) {
            for (std::size_t s = 0; s < ty; ++s) {
                const double aa = bx.a[l][t].dot(by.a[l][s]);
                if (aa == 0.0) continue;
                double hh = b2;
                if (t > 0 && s > 0) hh += w2 * fx.h[l][t - 1].dot(fy.h[l][s - 1]);
                if (l == 0) {
                    hh += x.items[t] == y.items[s] ? u2_in : 0.0;
                } else {
                    hh += u2_hidden * fx.h[l - 1][t].dot(fy.h[l - 1][s]);
                }
                total += aa * hh;
            }
        }
    }
    total += p.sigma_v * p.sigma_v / n * top_x.dot(top_y);

    if (w.tied) {
        // Cross terms between the input-side and readout-side uses of U^(1).
        const auto c = static_cast<ItemId>(bx.coord);
        const double uv = p.sigma_u * p.sigma_v / std::sqrt(n);
        for (std::size_t t = 0; t < tx; ++t) {
            if (x.items[t] == c) total += uv * bx.a[0][t].dot(top_y);
        }
        for (std::size_t s = 0; s < ty; ++s) {
            if (y.items[s] == c) total += uv * by.a[0][s].dot(top_x);
        }
    }
    return total;
}

KernelEstimate summarize(std::span<const double> samples, int width) {
    if (samples.size() < 2) {
        throw std::invalid_argument("a kernel estimate needs at least two trials");
    }
    const auto k = static_cast<double>(samples.size());
    double mean = 0.0;
    for (const double v : samples) mean += v;
    mean /= k;
    double ss = 0.0;
    for (const double v : samples) ss += (v - mean) * (v - mean);
    const double var = ss / (k - 1.0);
    return {mean, std::sqrt(var / k), static_cast<int>(samples.size()), width};
}

std::size_t PoolSamples::pair_index(std::size_t i, std::size_t j) const {
    if (i > j) std::swap(i, j);
    for (std::size_t k = 0; k < pairs.size(); ++k) {
        if (pairs[k] == std::pair{i, j}) return k;
    }
    throw std::out_of_range("pair not in pool");
}

PoolSamples sample_pool(std::span<const ItemSequence> pool, const HyperParams& p, const OracleSettings& s) {
    p.validate();
    if (pool.empty()) throw std::invalid_argument("empty oracle pool");
    if (s.trials < 2) throw std::invalid_argument("oracle needs at least two trials");

    int input_width = s.input_width;
    if (input_width == 0) {
        for (const auto& seq : pool) {
            for (const ItemId item : seq.items) input_width = std::max(input_width, static_cast<int>(item) + 1);
        }
    }
    const int nngp_outputs = s.nngp_outputs > 0 ? s.nngp_outputs : s.width;

    PoolSamples out;
    out.width = s.width;
    for (std::size_t i = 0; i < pool.size(); ++i) {
        for (std::size_t j = i; j < pool.size(); ++j) out.pairs.emplace_back(i, j);
    }
    const auto trials = static_cast<std::size_t>(s.trials);
    out.nngp.assign(out.pairs.size(), std::vector<double>(trials));
    out.ntk.assign(out.pairs.size(), std::vector<double>(trials));

    parallel_for(trials, s.threads, [&](std::size_t trial) {
        std::seed_seq seq{static_cast<std::uint32_t>(s.seed), static_cast<std::uint32_t>(s.seed >> 32U),
                          static_cast<std::uint32_t>(trial), static_cast<std::uint32_t>(s.tied)};
        std::mt19937_64 rng(seq);
        const FiniteRnnWeights w = sample_weights(s.width, input_width, nngp_outputs, p.layers, s.tied, rng);
        const int ntk_coords = s.tied ? w.output_width : 1;

        std::vector<ForwardState> fs;
        fs.reserve(pool.size());
        for (const auto& x : pool) fs.push_back(forward_state(w, x, p));
        std::vector<std::vector<BackwardState>> bs(pool.size());
        for (std::size_t i = 0; i < pool.size(); ++i) {
            for (int c = 0; c < ntk_coords; ++c) bs[i].push_back(backward(w, fs[i], p, c));
        }

        for (std::size_t k = 0; k < out.pairs.size(); ++k) {
            auto [i, j] = out.pairs[k];
            // A fixed operand order makes every pair estimate argument-order independent.
            if (!detail::canonical_before(pool[i], pool[j])) std::swap(i, j);
            out.nngp[k][trial] = fs[i].output.dot(fs[j].output) / static_cast<double>(fs[i].output.size());
            double ntk = 0.0;
            for (int c = 0; c < ntk_coords; ++c) {
                ntk += gradient_inner_product(w, p, pool[i], fs[i], bs[i][static_cast<std::size_t>(c)], pool[j], fs[j],
                                              bs[j][static_cast<std::size_t>(c)]);
            }
            out.ntk[k][trial] = ntk / ntk_coords;
        }
    });
    return out;
}

KernelEstimate empirical_nngp(const ItemSequence& x, const ItemSequence& y, const HyperParams& p, const OracleSettings& s) {
    const std::vector<ItemSequence> pool{x, y};
    const PoolSamples ps = sample_pool(pool, p, s);
    return ps.nngp_estimate(ps.pair_index(0, 1));
}

KernelEstimate empirical_ntk(const ItemSequence& x, const ItemSequence& y, const HyperParams& p, const OracleSettings& s) {
    const std::vector<ItemSequence> pool{x, y};
    const PoolSamples ps = sample_pool(pool, p, s);
    return ps.ntk_estimate(ps.pair_index(0, 1));
}

std::vector<SweepPoint> convergence_sweep(const ItemSequence& x, const ItemSequence& y, const HyperParams& p,
                                          std::span<const int> widths, const OracleSettings& s) {
    if (widths.empty()) throw std::invalid_argument("convergence sweep needs at least one width");
    if (!std::is_sorted(widths.begin(), widths.end(), std::less_equal<>())) {
        throw std::invalid_argument("convergence sweep widths must be strictly ascending");
    }
    const KernelValues<double> exact = rntk(x, y, p);
    const std::vector<ItemSequence> pool{x, y};
    std::vector<SweepPoint> out;
    for (const int width : widths) {
        OracleSettings at = s;
        at.width = width;
        const PoolSamples ps = sample_pool(pool, p, at);
        const std::size_t k = ps.pair_index(0, 1);
        const auto rms = [](const std::vector<double>& v, double target) {
            double ss = 0.0;
            for (const double e : v) ss += (e - target) * (e - target);
            return std::sqrt(ss / static_cast<double>(v.size()));
        };
        out.push_back({width, std::abs(ps.nngp_estimate(k).mean - exact.nngp), std::abs(ps.ntk_estimate(k).mean - exact.ntk),
                       rms(ps.nngp[k], exact.nngp), rms(ps.ntk[k], exact.ntk)});
    }
    return out;
}

std::optional<double> log_log_slope(std::span<const int> widths, std::span<const double> errors) {
    if (widths.size() != errors.size()) throw std::invalid_argument("widths and errors differ in length");
    if (widths.size() < 2) return std::nullopt;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < widths.size(); ++i) {
        if (!(errors[i] > 0.0)) return std::nullopt;
        const double lx = std::log(static_cast<double>(widths[i]));
        const double ly = std::log(errors[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    const auto k = static_cast<double>(widths.size());
    const double denom = k * sxx - sx * sx;
    if (denom == 0.0) return std::nullopt;
    return (k * sxy - sx * sy) / denom;
}

}  // namespace overrec::oracle
