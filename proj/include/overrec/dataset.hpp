#ifndef OVERREC_DATASET_HPP
#define OVERREC_DATASET_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "overrec/knn.hpp"
#include "overrec/types.hpp"

namespace overrec {

struct InteractionEvent {
    std::string user;
    std::string item;
    std::int64_t timestamp{0};

    friend bool operator==(const InteractionEvent&, const InteractionEvent&) = default;
};

enum class EventFormat { AmazonCsv, MovielensDat };
EventFormat parse_event_format(std::string_view name);

enum class FiveCoreMode { FixedPoint, SinglePass };
FiveCoreMode parse_five_core_mode(std::string_view name);
std::string_view to_string(FiveCoreMode mode);

class DatasetError : public std::runtime_error {
  public:
    DatasetError(const std::string& what, std::size_t line = 0);
    /// 1-based input line, 0 when the error is not tied to a line.
    [[nodiscard]] std::size_t line() const noexcept { return line_; }

  private:
    std::size_t line_;
};

/// `user,item,rating,timestamp` or `user::item::rating::timestamp`, one event per
/// line. Ratings are parsed for well-formedness and then dropped.
std::vector<InteractionEvent> parse_events(std::istream& in, EventFormat format);

/// Drops users and items with fewer than `threshold` events. FixedPoint repeats
/// until nothing changes; SinglePass filters once against the input counts.
std::vector<InteractionEvent> five_core_filter(std::vector<InteractionEvent> events,
                                               FiveCoreMode mode = FiveCoreMode::FixedPoint, std::size_t threshold = 5);

struct QueryEntry {
    ItemSequence input;
    ItemId target{0};
};

/// Leave-one-out split with densely re-indexed items.
struct SplitDataset {
    std::vector<CorpusEntry> corpus;
    std::vector<QueryEntry> queries;
    std::size_t item_count{0};
    std::size_t user_count{0};
    std::size_t action_count{0};
    std::size_t max_len{kDefaultMaxLength};
    std::vector<std::string> item_names;  // dense id -> raw item identifier

    [[nodiscard]] std::vector<ItemSequence> query_inputs() const;
    [[nodiscard]] std::vector<ItemSequence> corpus_inputs() const;
};

/// Per user (in order of first appearance): events sorted by timestamp, ties by
/// input order, give s[1..T]. The query is the last `max_len` of s[1..T-1] with
/// target s[T]; the corpus entry is the last `max_len` of s[1..T-2] with target
/// s[T-1]. Users with T = 2 only contribute a corpus entry; shorter users nothing.
SplitDataset build_split(const std::vector<InteractionEvent>& events, std::size_t max_len = kDefaultMaxLength);

struct SplitFiles {
    std::filesystem::path queries;
    std::filesystem::path corpus;
    std::filesystem::path items;
    std::filesystem::path manifest;

    explicit SplitFiles(const std::filesystem::path& dir);
};

/// queries.tsv / corpus.tsv hold `user<TAB>items<TAB>target`; items.tsv maps
/// dense ids to raw identifiers; manifest.txt holds counts as key=value.
void write_split(const SplitDataset& split, const std::filesystem::path& dir, std::string_view extra_manifest = {});
SplitDataset read_split(const std::filesystem::path& dir);

}  // namespace overrec

#endif  // OVERREC_DATASET_HPP
