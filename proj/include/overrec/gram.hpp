#ifndef OVERREC_GRAM_HPP
#define OVERREC_GRAM_HPP

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "overrec/types.hpp"

namespace overrec {

enum class KernelMode : std::uint8_t { RNTK = 0, NNGP = 1, SKNN = 2 };

std::string_view to_string(KernelMode mode);
KernelMode parse_kernel_mode(std::string_view name);

using ParamsDigest = std::array<std::uint8_t, 16>;

/// 128-bit BLAKE2b digest over the mode and every kernel hyper-parameter.
ParamsDigest params_digest(const HyperParams& p, KernelMode mode);
std::string to_hex(const ParamsDigest& d);

using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Query-major kernel matrix: row i holds kernel(queries[i], corpus[j]) for all j.
struct GramMatrix {
    KernelMode mode{KernelMode::RNTK};
    ParamsDigest params_digest{};
    std::vector<std::string> query_ids;
    std::vector<std::string> corpus_ids;
    RowMajorMatrix values;

    [[nodiscard]] std::size_t n_query() const noexcept { return static_cast<std::size_t>(values.rows()); }
    [[nodiscard]] std::size_t n_corpus() const noexcept { return static_cast<std::size_t>(values.cols()); }
    [[nodiscard]] std::span<const double> row(std::size_t i) const {
        return {values.data() + i * n_corpus(), n_corpus()};
    }

    /// Bitwise equality, including the representation of every value.
    [[nodiscard]] bool identical(const GramMatrix& other) const;
};

struct GramOptions {
    unsigned threads{1};
    std::uint64_t max_cells{std::uint64_t{1} << 31};
};

struct GramStats {
    std::size_t self_traces_computed{0};
    std::size_t pairs{0};
};

class CapacityError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Evaluates every (query, corpus) cell in the selected mode. Self-traces are
/// computed once per distinct sequence; rows are distributed across threads.
/// RNTK and NNGP require sigma_b = 0 because unequal lengths are padded.
GramMatrix compute_gram(std::span<const ItemSequence> queries, std::span<const ItemSequence> corpus, const HyperParams& p,
                        KernelMode mode, const GramOptions& options = {}, GramStats* stats = nullptr);

class GramFormatError : public std::runtime_error {
  public:
    enum class Kind { CorruptHeader, DigestMismatch, TruncatedPayload, TrailingData };

    GramFormatError(Kind kind, std::uint64_t offset, const std::string& what);

    [[nodiscard]] Kind kind() const noexcept { return kind_; }
    [[nodiscard]] std::uint64_t offset() const noexcept { return offset_; }

  private:
    Kind kind_;
    std::uint64_t offset_;
};

inline constexpr std::array<char, 8> kGramMagic{'O', 'V', 'R', 'G', 'R', 'A', 'M', '1'};
inline constexpr std::uint32_t kGramVersion = 1;

/// Little-endian OVRGRAM1 layout:
///   magic[8] version:u32 mode:u8 n_query:u64 n_corpus:u64 digest[16]
///   (len:u32 bytes)[n_query + n_corpus] f64[n_query * n_corpus]
void save_gram(const GramMatrix& g, const std::filesystem::path& path);
std::vector<std::uint8_t> encode_gram(const GramMatrix& g);

/// When `expected` is given, a header digest that differs raises DigestMismatch.
GramMatrix load_gram(const std::filesystem::path& path, const std::optional<ParamsDigest>& expected = std::nullopt);
GramMatrix decode_gram(std::span<const std::uint8_t> bytes, const std::optional<ParamsDigest>& expected = std::nullopt);

}  // namespace overrec

#endif  // OVERREC_GRAM_HPP
