#include "overrec/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>

#include <CLI11.hpp>

#include "overrec/dataset.hpp"
#include "overrec/evaluation.hpp"
#include "overrec/gram.hpp"
#include "overrec/knn.hpp"
#include "overrec/parallel.hpp"
#include "overrec/verification.hpp"

namespace overrec {

namespace {

/// Split and Gram disagree about which sequences they describe.
class ConsistencyError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// A verification suite reported a failed check.
class VerificationFailure : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct KernelFlags {
    std::string mode{"rntk"};
    double sigma_w{1.0};
    double sigma_u{1.0};
    double sigma_b{0.0};
    double sigma_v{1.0};
    int layers{1};

    CLI::Option* mode_opt{nullptr};

    void attach(CLI::App& app) {
        mode_opt = app.add_option("--mode", mode, "kernel: rntk, nngp or sknn")
                       ->check(CLI::IsMember({"rntk", "nngp", "sknn"}))
                       ->capture_default_str();
        app.add_option("--sigma-w", sigma_w, "recurrent weight scale")->capture_default_str();
        app.add_option("--sigma-u", sigma_u, "input weight scale")->capture_default_str();
        app.add_option("--sigma-b", sigma_b, "bias scale (must be 0 for rntk/nngp)")->capture_default_str();
        app.add_option("--sigma-v", sigma_v, "readout scale (> 0)")->capture_default_str();
        app.add_option("--layers", layers, "recurrent depth L")->capture_default_str();
    }

    [[nodiscard]] KernelMode kernel_mode() const { return parse_kernel_mode(mode); }

    [[nodiscard]] HyperParams params() const {
        HyperParams p;
        p.sigma_w = sigma_w;
        p.sigma_u = sigma_u;
        p.sigma_b = sigma_b;
        p.sigma_v = sigma_v;
        p.layers = layers;
        p.validate();
        if (!(sigma_v > 0.0)) throw std::invalid_argument("--sigma-v must be positive");
        if (kernel_mode() != KernelMode::SKNN && sigma_b != 0.0) {
            throw std::invalid_argument("--sigma-b must be 0 for rntk and nngp because unequal lengths are zero-padded");
        }
        return p;
    }
};

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    out << text;
    if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

// ---- preprocess -----------------------------------------------------------

struct PreprocessConfig {
    std::string in;
    std::string format{"movielens_dat"};
    std::string out;
    std::size_t max_len{kDefaultMaxLength};
    std::string five_core{"fixedpoint"};
    bool no_five_core{false};
};

int cmd_preprocess(const PreprocessConfig& c, std::ostream& out) {
    const EventFormat fmt = parse_event_format(c.format);
    const FiveCoreMode mode = parse_five_core_mode(c.five_core);
    std::ifstream in(c.in, std::ios::binary);
    if (!in) throw DatasetError("cannot open input file '" + c.in + "'");
    std::vector<InteractionEvent> events = parse_events(in, fmt);
    const std::size_t raw = events.size();
    if (!c.no_five_core) events = five_core_filter(std::move(events), mode);
    const SplitDataset split = build_split(events, c.max_len);

    std::ostringstream extra;
    extra << "source_format=" << c.format << '\n'
          << "raw_actions=" << raw << '\n'
          << "five_core=" << (c.no_five_core ? "off" : std::string(to_string(mode))) << '\n';
    write_split(split, c.out, extra.str());
    out << "users=" << split.user_count << " items=" << split.item_count << " actions=" << split.action_count
        << " queries=" << split.queries.size() << " corpus=" << split.corpus.size() << '\n';
    return kExitOk;
}

// ---- gram -----------------------------------------------------------------

struct GramConfig {
    std::string in;
    std::string out;
    KernelFlags kernel;
    unsigned threads{1};
    std::uint64_t max_cells{std::uint64_t{1} << 31};
};

int cmd_gram(const GramConfig& c, std::ostream& out, std::ostream& err) {
    const KernelMode mode = c.kernel.kernel_mode();
    const HyperParams p = c.kernel.params();
    const SplitDataset split = read_split(c.in);
    const std::vector<ItemSequence> queries = split.query_inputs();
    const std::vector<ItemSequence> corpus = split.corpus_inputs();

    GramOptions opts;
    opts.threads = c.threads;
    opts.max_cells = c.max_cells;
    GramStats stats;
    const auto start = std::chrono::steady_clock::now();
    const GramMatrix g = compute_gram(queries, corpus, p, mode, opts, &stats);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    save_gram(g, c.out);

    // Timing goes to stderr so stdout stays reproducible.
    char buf[160];
    std::snprintf(buf, sizeof buf, "%zu pairs in %.3f s (%.0f pairs/s), %zu self-traces\n", stats.pairs, secs,
                  secs > 0 ? static_cast<double>(stats.pairs) / secs : 0.0, stats.self_traces_computed);
    err << buf;
    out << "wrote " << g.n_query() << " x " << g.n_corpus() << ' ' << to_string(mode) << " gram, digest "
        << to_hex(g.params_digest) << '\n';
    return kExitOk;
}

// ---- evaluate -------------------------------------------------------------

struct EvaluateConfig {
    std::string in;
    std::string gram;
    std::string out;
    std::optional<std::size_t> k;
    std::string prediction{"weighted-y"};
    std::vector<int> cutoffs{5, 10};
    bool exclude_self_user{false};
    bool exclude_target_in_equal_item{false};
    unsigned threads{1};
    KernelFlags kernel;
};

std::vector<std::size_t> query_ranks(const GramMatrix& g, const SplitDataset& split, std::size_t k, bool equal_item,
                                     bool include_target, const std::vector<std::vector<std::uint8_t>>& masks,
                                     unsigned threads) {
    std::vector<std::size_t> ranks(split.queries.size());
    parallel_for(split.queries.size(), threads, [&](std::size_t i) {
        const auto mask = masks.empty() ? std::span<const std::uint8_t>{} : std::span<const std::uint8_t>(masks[i]);
        const std::vector<Neighbor> nb = top_k_neighbors(g.row(i), k, mask);
        const ScoreMap scores =
            equal_item ? predict_equal_item(nb, split.corpus, include_target) : predict_weighted_y(nb, split.corpus);
        ranks[i] = rank_of_target(scores, split.queries[i].target, split.item_count);
    });
    return ranks;
}

int cmd_evaluate(const EvaluateConfig& c, std::ostream& out) {
    if (c.cutoffs.empty()) throw std::invalid_argument("--cutoffs must not be empty");
    for (const int cut : c.cutoffs) {
        if (cut < 1) throw std::invalid_argument("cutoffs must be >= 1");
    }
    if (c.k && *c.k < 1) throw std::invalid_argument("--k must be >= 1");
    const bool equal_item = c.prediction == "equal-item";

    const SplitDataset split = read_split(c.in);
    std::optional<ParamsDigest> expected;
    if (c.kernel.mode_opt != nullptr && c.kernel.mode_opt->count() > 0) {
        expected = params_digest(c.kernel.params(), c.kernel.kernel_mode());
    }
    const GramMatrix g = load_gram(c.gram, expected);

    if (g.n_query() != split.queries.size() || g.n_corpus() != split.corpus.size()) {
        throw ConsistencyError("gram is " + std::to_string(g.n_query()) + " x " + std::to_string(g.n_corpus()) +
                               " but the split has " + std::to_string(split.queries.size()) + " queries and " +
                               std::to_string(split.corpus.size()) + " corpus entries");
    }
    for (std::size_t i = 0; i < split.queries.size(); ++i) {
        if (g.query_ids[i] != split.queries[i].input.user) throw ConsistencyError("query id mismatch at row " + std::to_string(i));
    }
    for (std::size_t j = 0; j < split.corpus.size(); ++j) {
        if (g.corpus_ids[j] != split.corpus[j].sequence.user) throw ConsistencyError("corpus id mismatch at column " + std::to_string(j));
    }

    std::vector<std::vector<std::uint8_t>> masks;
    if (c.exclude_self_user) {
        masks.assign(split.queries.size(), std::vector<std::uint8_t>(split.corpus.size(), 0));
        for (std::size_t i = 0; i < split.queries.size(); ++i) {
            for (std::size_t j = 0; j < split.corpus.size(); ++j) {
                masks[i][j] = split.corpus[j].sequence.user == split.queries[i].input.user ? 1 : 0;
            }
        }
    }

    EvalReport report;
    const bool include_target = !c.exclude_target_in_equal_item;
    if (c.k) {
        const std::vector<std::size_t> ranks = query_ranks(g, split, *c.k, equal_item, include_target, masks, c.threads);
        report = metrics(ranks, c.cutoffs);
    } else {
        // Without --k the neighbourhood size follows each metric cutoff.
        report.n_queries = split.queries.size();
        for (const int cut : c.cutoffs) {
            const std::vector<std::size_t> ranks =
                query_ranks(g, split, static_cast<std::size_t>(cut), equal_item, include_target, masks, c.threads);
            const std::array<int, 1> one{cut};
            const EvalReport r = metrics(ranks, one);
            report.mrr_at[cut] = r.mrr_at.at(cut);
            report.ndcg_at[cut] = r.ndcg_at.at(cut);
        }
    }

    const std::vector<std::pair<std::string, std::string>> meta{
        {"gram_mode", std::string(to_string(g.mode))},
        {"params_digest", to_hex(g.params_digest)},
        {"prediction", c.prediction},
        {"k", c.k ? std::to_string(*c.k) : std::string("cutoff")},
        {"exclude_self_user", c.exclude_self_user ? "true" : "false"},
        {"equal_item_target", include_target ? "included" : "excluded"},
        {"tie_break", "smaller-item-id-first"},
    };
    const std::string kv = format_key_value(report, meta);
    if (!c.out.empty()) write_text(c.out, kv);
    out << format_table(report);
    return kExitOk;
}

// ---- verify / selftest ----------------------------------------------------

int finish_suites(const std::vector<verify::SuiteReport>& suites, const std::string& report_path, std::ostream& out) {
    std::string text;
    bool ok = true;
    for (const auto& s : suites) {
        text += s.format();
        ok = ok && s.passed();
    }
    text += ok ? "RESULT: PASS\n" : "RESULT: FAIL\n";
    out << text;
    if (!report_path.empty()) write_text(report_path, text);
    if (!ok) throw VerificationFailure("one or more checks failed");
    return kExitOk;
}

struct VerifyConfig {
    verify::OracleRun run;
    std::string out;
};

int cmd_verify(const VerifyConfig& c, std::ostream& out) {
    if (c.run.trials < 2) throw std::invalid_argument("--trials must be >= 2");
    if (c.run.width < 1) throw std::invalid_argument("--width must be >= 1");
    if (c.run.widths.empty()) throw std::invalid_argument("--widths must not be empty");
    if (!std::is_sorted(c.run.widths.begin(), c.run.widths.end()) ||
        std::adjacent_find(c.run.widths.begin(), c.run.widths.end()) != c.run.widths.end()) {
        throw std::invalid_argument("--widths must be strictly ascending");
    }
    for (const int l : c.run.layers) {
        if (l < 1) throw std::invalid_argument("--layers entries must be >= 1");
    }
    std::vector<verify::SuiteReport> suites;
    suites.push_back(verify::oracle_equivalence(c.run));
    suites.push_back(verify::convergence(c.run));
    suites.push_back(verify::tied_untied(c.run));
    suites.push_back(verify::final_scale_adjudication(c.run));
    return finish_suites(suites, c.out, out);
}

struct SelftestConfig {
    std::uint64_t seed{20230401};
    std::size_t samples{1'000'000};
    unsigned threads{1};
    std::string out;
};

int cmd_selftest(const SelftestConfig& c, std::ostream& out) {
    std::vector<verify::SuiteReport> suites;
    suites.push_back(verify::closed_form_operators(c.seed, 20, c.samples));
    suites.push_back(verify::hand_traces());
    suites.push_back(verify::gradient_check(c.seed));
    suites.push_back(verify::padding_invariance(c.seed));
    suites.push_back(verify::symmetry_and_relabeling(c.seed));
    suites.push_back(verify::psd_self_gram(c.seed, 200, c.threads));
    suites.push_back(verify::metric_units());
    return finish_suites(suites, c.out, out);
}

int exit_for(const GramFormatError& e) {
    return e.kind() == GramFormatError::Kind::DigestMismatch ? kExitConsistency : kExitInput;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Training-free sequential recommendation with recurrent NTK / NNGP kernels", "overrec"};
    app.require_subcommand(1);
    app.set_config("--config", "", "key=value configuration file; command-line flags take precedence");

    PreprocessConfig pre;
    auto* sp = app.add_subcommand("preprocess", "filter a raw interaction log and write the leave-one-out split");
    sp->add_option("--in", pre.in, "raw interaction file")->required();
    sp->add_option("--format", pre.format, "amazon_csv or movielens_dat")
        ->check(CLI::IsMember({"amazon_csv", "movielens_dat"}))
        ->capture_default_str();
    sp->add_option("--out", pre.out, "output split directory")->required();
    sp->add_option("--max-len", pre.max_len, "keep the most recent N inputs per sequence")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    sp->add_option("--five-core", pre.five_core, "fixedpoint or singlepass")
        ->check(CLI::IsMember({"fixedpoint", "singlepass"}))
        ->capture_default_str();
    sp->add_flag("--no-five-core", pre.no_five_core, "skip occurrence filtering");

    GramConfig gram;
    auto* sg = app.add_subcommand("gram", "compute the query x corpus kernel matrix");
    sg->add_option("--in", gram.in, "split directory")->required();
    sg->add_option("--out", gram.out, "output OVRGRAM1 file")->required();
    gram.kernel.attach(*sg);
    sg->add_option("--threads", gram.threads, "worker threads")->check(CLI::PositiveNumber)->capture_default_str();
    sg->add_option("--max-cells", gram.max_cells, "refuse matrices with more cells")->capture_default_str();

    EvaluateConfig ev;
    auto* se = app.add_subcommand("evaluate", "kNN prediction and full-item-set MRR / NDCG");
    se->add_option("--in", ev.in, "split directory")->required();
    se->add_option("--gram", ev.gram, "OVRGRAM1 file produced by `gram`")->required();
    se->add_option("--out", ev.out, "write the key=value report here");
    se->add_option("--k", ev.k, "neighbours per query (default: each metric cutoff)");
    se->add_option("--prediction", ev.prediction, "weighted-y or equal-item")
        ->check(CLI::IsMember({"weighted-y", "equal-item"}))
        ->capture_default_str();
    se->add_option("--cutoffs", ev.cutoffs, "metric cutoffs")->delimiter(',')->capture_default_str();
    se->add_flag("--exclude-self-user", ev.exclude_self_user, "never use the query user's own corpus entry");
    se->add_flag("--exclude-target-in-equal-item", ev.exclude_target_in_equal_item,
                 "equal-item credits only the neighbour's inputs");
    se->add_option("--threads", ev.threads, "worker threads")->check(CLI::PositiveNumber)->capture_default_str();
    ev.kernel.attach(*se);
    se->footer("Passing --mode (with the kernel flags) checks the Gram's parameter digest; a mismatch exits 4.");

    VerifyConfig vc;
    auto* sv = app.add_subcommand("verify", "finite-width Monte-Carlo checks of the analytic kernels");
    sv->add_option("--seed", vc.run.seed)->capture_default_str();
    sv->add_option("--trials", vc.run.trials)->capture_default_str();
    sv->add_option("--width", vc.run.width)->capture_default_str();
    sv->add_option("--widths", vc.run.widths, "convergence sweep widths")->delimiter(',')->capture_default_str();
    sv->add_option("--layers", vc.run.layers, "depths for the equivalence check")->delimiter(',')->capture_default_str();
    sv->add_option("--threads", vc.run.threads)->check(CLI::PositiveNumber)->capture_default_str();
    sv->add_option("--out", vc.out, "also write the report here");

    SelftestConfig st;
    auto* ss = app.add_subcommand("selftest", "closed-form, gradient, padding, symmetry, PSD and metric checks");
    ss->add_option("--seed", st.seed)->capture_default_str();
    ss->add_option("--samples", st.samples, "Monte-Carlo samples per covariance block")->capture_default_str();
    ss->add_option("--threads", st.threads)->check(CLI::PositiveNumber)->capture_default_str();
    ss->add_option("--out", st.out, "also write the report here");

    std::vector<std::string> rev(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
    try {
        app.parse(rev);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        if (e.get_exit_code() != 0) err << "run with --help for usage\n";
        return e.get_exit_code() == 0 ? kExitOk : kExitInput;
    }

    try {
        if (sp->parsed()) return cmd_preprocess(pre, out);
        if (sg->parsed()) return cmd_gram(gram, out, err);
        if (se->parsed()) return cmd_evaluate(ev, out);
        if (sv->parsed()) return cmd_verify(vc, out);
        if (ss->parsed()) return cmd_selftest(st, out);
    } catch (const CapacityError& e) {
        err << "error: " << e.what() << '\n';
        return kExitCapacity;
    } catch (const ConsistencyError& e) {
        err << "error: " << e.what() << '\n';
        return kExitConsistency;
    } catch (const GramFormatError& e) {
        err << "error: " << e.what() << '\n';
        return exit_for(e);
    } catch (const VerificationFailure& e) {
        err << "error: " << e.what() << '\n';
        return kExitVerification;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitInput;
    }
    return kExitInput;
}

int run_cli(int argc, char** argv) {
    return run_cli(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}

}  // namespace overrec
