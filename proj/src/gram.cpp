#include "overrec/gram.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <unordered_map>

#include <sodium.h>

#include "overrec/knn.hpp"
#include "overrec/parallel.hpp"
#include "overrec/rntk_engine.hpp"

namespace overrec {

std::string_view to_string(KernelMode mode) {
    switch (mode) {
        case KernelMode::RNTK: return "rntk";
        case KernelMode::NNGP: return "nngp";
        case KernelMode::SKNN: return "sknn";
    }
    return "unknown";
}

KernelMode parse_kernel_mode(std::string_view name) {
    if (name == "rntk") return KernelMode::RNTK;
    if (name == "nngp") return KernelMode::NNGP;
    if (name == "sknn") return KernelMode::SKNN;
    throw std::invalid_argument("unknown kernel mode '" + std::string(name) + "'");
}

namespace {

class ByteWriter {
  public:
    void bytes(const void* p, std::size_t n) {
        const auto* b = static_cast<const std::uint8_t*>(p);
        out_.insert(out_.end(), b, b + n);
    }
    template <typename T>
    void le(T v) {
        using U = std::make_unsigned_t<T>;
        auto u = static_cast<U>(v);
        for (std::size_t i = 0; i < sizeof(T); ++i) {
            out_.push_back(static_cast<std::uint8_t>(u & 0xFFU));
            u = static_cast<U>(u >> 8U);
        }
    }
    void f64(double v) { le(std::bit_cast<std::uint64_t>(v)); }

    std::vector<std::uint8_t> take() { return std::move(out_); }

  private:
    std::vector<std::uint8_t> out_;
};

class ByteReader {
  public:
    explicit ByteReader(std::span<const std::uint8_t> in) : in_(in) {}

    [[nodiscard]] std::uint64_t offset() const noexcept { return pos_; }
    [[nodiscard]] std::uint64_t remaining() const noexcept { return in_.size() - pos_; }

    void need(std::uint64_t n, const char* what) const {
        if (remaining() < n) {
            throw GramFormatError(GramFormatError::Kind::TruncatedPayload, pos_,
                                  std::string("file ends inside ") + what);
        }
    }
    void bytes(void* dst, std::size_t n, const char* what) {
        need(n, what);
        std::memcpy(dst, in_.data() + pos_, n);
        pos_ += n;
    }
    template <typename T>
    T le(const char* what) {
        need(sizeof(T), what);
        std::make_unsigned_t<T> u = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i) {
            u |= static_cast<std::make_unsigned_t<T>>(static_cast<std::make_unsigned_t<T>>(in_[pos_ + i]) << (8U * i));
        }
        pos_ += sizeof(T);
        return static_cast<T>(u);
    }

  private:
    std::span<const std::uint8_t> in_;
    std::uint64_t pos_{0};
};

struct SequenceHash {
    std::size_t operator()(const std::vector<ItemId>& items) const noexcept {
        std::uint64_t h = 1469598103934665603ULL;
        for (const ItemId v : items) {
            h ^= v;
            h *= 1099511628211ULL;
        }
        return static_cast<std::size_t>(h ^ items.size());
    }
};

}  // namespace

ParamsDigest params_digest(const HyperParams& p, KernelMode mode) {
    static const int sodium_ready = sodium_init();
    if (sodium_ready < 0) {
        throw std::runtime_error("libsodium failed to initialise");
    }
    ByteWriter w;
    w.bytes("overrec.params", 14);
    w.le(static_cast<std::uint8_t>(mode));
    w.f64(p.sigma_w);
    w.f64(p.sigma_u);
    w.f64(p.sigma_b);
    w.f64(p.sigma_v);
    w.le(static_cast<std::int32_t>(p.layers));
    w.le(static_cast<std::uint8_t>(p.activation));
    w.le(static_cast<std::uint8_t>(kFinalLayerScale));
    const std::vector<std::uint8_t> msg = w.take();

    ParamsDigest d{};
    crypto_generichash(d.data(), d.size(), msg.data(), msg.size(), nullptr, 0);
    return d;
}

std::string to_hex(const ParamsDigest& d) {
    static constexpr char kHex[] = "0123456789abcdef";
    std::string s;
    s.reserve(2 * d.size());
    for (const std::uint8_t b : d) {
        s.push_back(kHex[b >> 4U]);
        s.push_back(kHex[b & 0xFU]);
    }
    return s;
}

bool GramMatrix::identical(const GramMatrix& other) const {
    if (mode != other.mode || params_digest != other.params_digest || query_ids != other.query_ids ||
        corpus_ids != other.corpus_ids || values.rows() != other.values.rows() || values.cols() != other.values.cols()) {
        return false;
    }
    return std::memcmp(values.data(), other.values.data(), sizeof(double) * static_cast<std::size_t>(values.size())) == 0;
}

GramMatrix compute_gram(std::span<const ItemSequence> queries, std::span<const ItemSequence> corpus, const HyperParams& p,
                        KernelMode mode, const GramOptions& options, GramStats* stats) {
    if (queries.empty() || corpus.empty()) {
        throw std::invalid_argument("Gram computation needs non-empty query and corpus sets");
    }
    const std::uint64_t cells = static_cast<std::uint64_t>(queries.size()) * corpus.size();
    if (cells > options.max_cells) {
        throw CapacityError("Gram matrix of " + std::to_string(queries.size()) + " x " + std::to_string(corpus.size()) +
                            " cells exceeds the budget of " + std::to_string(options.max_cells));
    }
    if (mode != KernelMode::SKNN) {
        p.validate();
        if (p.sigma_b != 0.0) {
            throw std::invalid_argument("RNTK/NNGP Gram computation pads sequences and requires sigma_b = 0");
        }
    }

    GramMatrix g;
    g.mode = mode;
    g.params_digest = params_digest(p, mode);
    g.query_ids.reserve(queries.size());
    for (const auto& q : queries) g.query_ids.push_back(q.user);
    g.corpus_ids.reserve(corpus.size());
    for (const auto& c : corpus) g.corpus_ids.push_back(c.user);
    g.values.resize(static_cast<Eigen::Index>(queries.size()), static_cast<Eigen::Index>(corpus.size()));

    GramStats local;
    local.pairs = static_cast<std::size_t>(cells);

    if (mode == KernelMode::SKNN) {
        parallel_for(queries.size(), options.threads, [&](std::size_t i) {
            for (std::size_t j = 0; j < corpus.size(); ++j) {
                g.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = sknn_similarity(queries[i], corpus[j]);
            }
        });
    } else {
        // Distinct sequences across both sides share one self-trace.
        std::unordered_map<std::vector<ItemId>, std::size_t, SequenceHash> index;
        std::vector<const ItemSequence*> distinct;
        const auto intern = [&](const ItemSequence& s) {
            if (s.empty()) {
                throw std::invalid_argument("empty sequence for user '" + s.user + "'");
            }
            const auto [it, inserted] = index.try_emplace(s.items, distinct.size());
            if (inserted) distinct.push_back(&s);
            return it->second;
        };
        std::vector<std::size_t> q_slot(queries.size());
        std::vector<std::size_t> c_slot(corpus.size());
        for (std::size_t i = 0; i < queries.size(); ++i) q_slot[i] = intern(queries[i]);
        for (std::size_t j = 0; j < corpus.size(); ++j) c_slot[j] = intern(corpus[j]);

        std::vector<SelfTrace<double>> traces(distinct.size());
        parallel_for(distinct.size(), options.threads, [&](std::size_t k) { traces[k] = self_trace(*distinct[k], p); });
        local.self_traces_computed = distinct.size();

        const bool want_ntk = mode == KernelMode::RNTK;
        parallel_for(queries.size(), options.threads, [&](std::size_t i) {
            const SelfTrace<double>& tq = traces[q_slot[i]];
            for (std::size_t j = 0; j < corpus.size(); ++j) {
                const KernelValues<double> kv = rntk(queries[i], tq, corpus[j], traces[c_slot[j]], p);
                g.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = want_ntk ? kv.ntk : kv.nngp;
            }
        });
    }
    if (stats) *stats = local;
    return g;
}

GramFormatError::GramFormatError(Kind kind, std::uint64_t offset, const std::string& what)
    : std::runtime_error(what + " (byte offset " + std::to_string(offset) + ")"), kind_(kind), offset_(offset) {}

std::vector<std::uint8_t> encode_gram(const GramMatrix& g) {
    if (g.query_ids.size() != g.n_query() || g.corpus_ids.size() != g.n_corpus()) {
        throw std::invalid_argument("Gram id lists do not match matrix shape");
    }
    ByteWriter w;
    w.bytes(kGramMagic.data(), kGramMagic.size());
    w.le(kGramVersion);
    w.le(static_cast<std::uint8_t>(g.mode));
    w.le(static_cast<std::uint64_t>(g.n_query()));
    w.le(static_cast<std::uint64_t>(g.n_corpus()));
    w.bytes(g.params_digest.data(), g.params_digest.size());
    for (const auto* ids : {&g.query_ids, &g.corpus_ids}) {
        for (const std::string& id : *ids) {
            w.le(static_cast<std::uint32_t>(id.size()));
            w.bytes(id.data(), id.size());
        }
    }
    const double* v = g.values.data();
    for (Eigen::Index i = 0; i < g.values.size(); ++i) {
        w.f64(v[i]);
    }
    return w.take();
}

void save_gram(const GramMatrix& g, const std::filesystem::path& path) {
    const std::vector<std::uint8_t> bytes = encode_gram(g);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw std::runtime_error("failed writing '" + path.string() + "'");
    }
}

GramMatrix decode_gram(std::span<const std::uint8_t> bytes, const std::optional<ParamsDigest>& expected) {
    using Kind = GramFormatError::Kind;
    ByteReader r(bytes);
    std::array<char, 8> magic{};
    if (r.remaining() < magic.size()) {
        throw GramFormatError(Kind::CorruptHeader, 0, "file too short for OVRGRAM1 magic");
    }
    r.bytes(magic.data(), magic.size(), "magic");
    if (magic != kGramMagic) {
        throw GramFormatError(Kind::CorruptHeader, 0, "bad magic, not an OVRGRAM1 file");
    }
    const std::uint64_t version_at = r.offset();
    if (const auto version = r.le<std::uint32_t>("header"); version != kGramVersion) {
        throw GramFormatError(Kind::CorruptHeader, version_at, "unsupported version " + std::to_string(version));
    }
    const std::uint64_t mode_at = r.offset();
    const auto mode_raw = r.le<std::uint8_t>("header");
    if (mode_raw > static_cast<std::uint8_t>(KernelMode::SKNN)) {
        throw GramFormatError(Kind::CorruptHeader, mode_at, "unknown kernel mode " + std::to_string(mode_raw));
    }
    GramMatrix g;
    g.mode = static_cast<KernelMode>(mode_raw);
    const auto n_query = r.le<std::uint64_t>("header");
    const auto n_corpus = r.le<std::uint64_t>("header");
    const std::uint64_t digest_at = r.offset();
    r.bytes(g.params_digest.data(), g.params_digest.size(), "header");
    if (expected && *expected != g.params_digest) {
        throw GramFormatError(Kind::DigestMismatch, digest_at,
                              "parameter digest " + to_hex(g.params_digest) + " does not match expected " + to_hex(*expected));
    }
    // Every id costs at least its 4-byte length prefix, which bounds the counts
    // before anything is allocated.
    if (n_query > r.remaining() / 4 || n_corpus > r.remaining() / 4 || n_query + n_corpus > r.remaining() / 4) {
        throw GramFormatError(Kind::TruncatedPayload, r.offset(), "id table larger than the file");
    }
    const auto read_ids = [&](std::uint64_t n, std::vector<std::string>& ids) {
        ids.resize(n);
        for (auto& id : ids) {
            const auto len = r.le<std::uint32_t>("id table");
            id.resize(len);
            r.bytes(id.data(), len, "id table");
        }
    };
    read_ids(n_query, g.query_ids);
    read_ids(n_corpus, g.corpus_ids);

    const std::uint64_t cells = n_query * n_corpus;
    if (n_corpus != 0 && cells / n_corpus != n_query) {
        throw GramFormatError(Kind::CorruptHeader, 17, "matrix dimensions overflow");
    }
    if (cells > r.remaining() / 8) {
        throw GramFormatError(Kind::TruncatedPayload, r.offset() + (r.remaining() / 8) * 8,
                              "value payload holds " + std::to_string(r.remaining() / 8) + " of " +
                                  std::to_string(cells) + " values");
    }
    g.values.resize(static_cast<Eigen::Index>(n_query), static_cast<Eigen::Index>(n_corpus));
    double* v = g.values.data();
    for (std::uint64_t i = 0; i < cells; ++i) {
        v[i] = std::bit_cast<double>(r.le<std::uint64_t>("values"));
    }
    if (r.remaining() != 0) {
        throw GramFormatError(Kind::TrailingData, r.offset(), std::to_string(r.remaining()) + " unexpected trailing bytes");
    }
    return g;
}

GramMatrix load_gram(const std::filesystem::path& path, const std::optional<ParamsDigest>& expected) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open Gram file '" + path.string() + "'");
    }
    const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_gram(bytes, expected);
}

}  // namespace overrec
