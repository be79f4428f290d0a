#include "overrec/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <map>
#include <sstream>
#include <unordered_map>

namespace overrec {

DatasetError::DatasetError(const std::string& what, std::size_t line)
    : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

EventFormat parse_event_format(std::string_view name) {
    if (name == "amazon_csv") return EventFormat::AmazonCsv;
    if (name == "movielens_dat") return EventFormat::MovielensDat;
    throw std::invalid_argument("unknown input format '" + std::string(name) + "' (expected amazon_csv or movielens_dat)");
}

FiveCoreMode parse_five_core_mode(std::string_view name) {
    if (name == "fixedpoint") return FiveCoreMode::FixedPoint;
    if (name == "singlepass") return FiveCoreMode::SinglePass;
    throw std::invalid_argument("unknown five-core mode '" + std::string(name) + "' (expected fixedpoint or singlepass)");
}

std::string_view to_string(FiveCoreMode mode) {
    return mode == FiveCoreMode::FixedPoint ? "fixedpoint" : "singlepass";
}

namespace {

std::vector<std::string_view> split_fields(std::string_view line, std::string_view delim) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(delim, start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + delim.size();
    }
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
    const char* end = s.data() + s.size();
    const auto [ptr, ec] = std::from_chars(s.data(), end, out);
    return ec == std::errc() && ptr == end;
}

}  // namespace

std::vector<InteractionEvent> parse_events(std::istream& in, EventFormat format) {
    const std::string_view delim = format == EventFormat::AmazonCsv ? "," : "::";
    std::vector<InteractionEvent> events;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = split_fields(line, delim);
        if (fields.size() != 4) {
            throw DatasetError("malformed line, expected 4 fields but found " + std::to_string(fields.size()), line_no);
        }
        if (fields[0].empty() || fields[1].empty()) {
            throw DatasetError("malformed line, empty user or item", line_no);
        }
        double rating = 0;
        if (!parse_number(fields[2], rating)) {
            throw DatasetError("malformed rating '" + std::string(fields[2]) + "'", line_no);
        }
        std::int64_t ts = 0;
        if (!parse_number(fields[3], ts) || ts < 0) {
            throw DatasetError("malformed timestamp '" + std::string(fields[3]) + "'", line_no);
        }
        events.push_back({std::string(fields[0]), std::string(fields[1]), ts});
    }
    if (events.empty()) {
        throw DatasetError("input contains no interactions");
    }
    return events;
}

std::vector<InteractionEvent> five_core_filter(std::vector<InteractionEvent> events, FiveCoreMode mode, std::size_t threshold) {
    while (true) {
        std::unordered_map<std::string, std::size_t> users;
        std::unordered_map<std::string, std::size_t> items;
        for (const auto& e : events) {
            ++users[e.user];
            ++items[e.item];
        }
        const auto before = events.size();
        std::erase_if(events, [&](const InteractionEvent& e) { return users[e.user] < threshold || items[e.item] < threshold; });
        if (events.empty()) {
            throw DatasetError("no interactions survive " + std::to_string(threshold) + "-core filtering");
        }
        if (mode == FiveCoreMode::SinglePass || events.size() == before) {
            return events;
        }
    }
}

std::vector<ItemSequence> SplitDataset::query_inputs() const {
    std::vector<ItemSequence> out;
    out.reserve(queries.size());
    for (const auto& q : queries) out.push_back(q.input);
    return out;
}

std::vector<ItemSequence> SplitDataset::corpus_inputs() const {
    std::vector<ItemSequence> out;
    out.reserve(corpus.size());
    for (const auto& c : corpus) out.push_back(c.sequence);
    return out;
}

SplitDataset build_split(const std::vector<InteractionEvent>& events, std::size_t max_len) {
    if (max_len < 1) {
        throw std::invalid_argument("maximum sequence length must be at least 1");
    }
    std::vector<std::string> user_order;
    std::unordered_map<std::string, std::vector<std::size_t>> by_user;
    for (std::size_t i = 0; i < events.size(); ++i) {
        auto [it, inserted] = by_user.try_emplace(events[i].user);
        if (inserted) user_order.push_back(events[i].user);
        it->second.push_back(i);
    }

    SplitDataset split;
    split.max_len = max_len;
    split.action_count = events.size();
    split.user_count = user_order.size();

    std::unordered_map<std::string, ItemId> item_index;
    const auto dense = [&](const std::string& raw) {
        const auto [it, inserted] = item_index.try_emplace(raw, static_cast<ItemId>(split.item_names.size()));
        if (inserted) split.item_names.push_back(raw);
        return it->second;
    };
    const auto tail = [max_len](const std::vector<ItemId>& s, std::size_t end) {
        const std::size_t begin = end > max_len ? end - max_len : 0;
        return std::vector<ItemId>(s.begin() + static_cast<std::ptrdiff_t>(begin), s.begin() + static_cast<std::ptrdiff_t>(end));
    };

    for (const std::string& user : user_order) {
        std::vector<std::size_t>& idx = by_user[user];
        std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return events[a].timestamp < events[b].timestamp; });
        std::vector<ItemId> s;
        s.reserve(idx.size());
        for (const std::size_t i : idx) s.push_back(dense(events[i].item));

        const std::size_t t = s.size();
        if (t == 2) {
            // Too short for a query; the whole history becomes a corpus entry.
            split.corpus.push_back({ItemSequence(user, {s[0]}), s[1]});
        } else if (t >= 3) {
            split.corpus.push_back({ItemSequence(user, tail(s, t - 2)), s[t - 2]});
            split.queries.push_back({ItemSequence(user, tail(s, t - 1)), s[t - 1]});
        }
    }
    split.item_count = split.item_names.size();
    if (split.queries.empty()) {
        throw DatasetError("no user has enough interactions to form a test query");
    }
    return split;
}

SplitFiles::SplitFiles(const std::filesystem::path& dir)
    : queries(dir / "queries.tsv"), corpus(dir / "corpus.tsv"), items(dir / "items.tsv"), manifest(dir / "manifest.txt") {}

namespace {

void check_field(const std::string& s, const char* what) {
    if (s.find_first_of("\t\n\r") != std::string::npos) {
        throw std::invalid_argument(std::string(what) + " '" + s + "' contains a tab or newline");
    }
}

void write_sequence_line(std::ostream& os, const ItemSequence& seq, ItemId target) {
    check_field(seq.user, "user id");
    os << seq.user << '\t';
    for (std::size_t i = 0; i < seq.items.size(); ++i) {
        if (i) os << ' ';
        os << seq.items[i];
    }
    os << '\t' << target << '\n';
}

std::ofstream open_out(const std::filesystem::path& p) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + p.string() + "' for writing");
    return out;
}

std::ifstream open_in(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw DatasetError("cannot open '" + p.string() + "'");
    return in;
}

std::vector<std::pair<ItemSequence, ItemId>> read_sequence_file(const std::filesystem::path& p) {
    std::ifstream in = open_in(p);
    std::vector<std::pair<ItemSequence, ItemId>> out;
    std::string line;
    std::size_t no = 0;
    while (std::getline(in, line)) {
        ++no;
        if (line.empty()) continue;
        const auto f = split_fields(line, "\t");
        if (f.size() != 3) {
            throw DatasetError(p.filename().string() + ": expected user<TAB>items<TAB>target", no);
        }
        ItemSequence seq;
        seq.user = std::string(f[0]);
        for (const auto tok : split_fields(f[1], " ")) {
            ItemId v = 0;
            if (!parse_number(tok, v)) throw DatasetError(p.filename().string() + ": bad item id '" + std::string(tok) + "'", no);
            seq.items.push_back(v);
        }
        ItemId target = 0;
        if (!parse_number(f[2], target)) throw DatasetError(p.filename().string() + ": bad target", no);
        out.emplace_back(std::move(seq), target);
    }
    return out;
}

}  // namespace

void write_split(const SplitDataset& split, const std::filesystem::path& dir, std::string_view extra_manifest) {
    std::filesystem::create_directories(dir);
    const SplitFiles files(dir);
    {
        std::ofstream q = open_out(files.queries);
        for (const auto& e : split.queries) write_sequence_line(q, e.input, e.target);
    }
    {
        std::ofstream c = open_out(files.corpus);
        for (const auto& e : split.corpus) write_sequence_line(c, e.sequence, e.target);
    }
    {
        std::ofstream it = open_out(files.items);
        for (std::size_t i = 0; i < split.item_names.size(); ++i) {
            check_field(split.item_names[i], "item id");
            it << i << '\t' << split.item_names[i] << '\n';
        }
    }
    std::ofstream m = open_out(files.manifest);
    m << "format=overrec-split-1\n"
      << "users=" << split.user_count << '\n'
      << "items=" << split.item_count << '\n'
      << "actions=" << split.action_count << '\n'
      << "queries=" << split.queries.size() << '\n'
      << "corpus=" << split.corpus.size() << '\n'
      << "max_len=" << split.max_len << '\n'
      << "item_index=items.tsv\n"
      << extra_manifest;
}

SplitDataset read_split(const std::filesystem::path& dir) {
    const SplitFiles files(dir);
    std::map<std::string, std::string> manifest;
    {
        std::ifstream in = open_in(files.manifest);
        std::string line;
        while (std::getline(in, line)) {
            const auto eq = line.find('=');
            if (eq != std::string::npos) manifest[line.substr(0, eq)] = line.substr(eq + 1);
        }
    }
    const auto count = [&](const std::string& key) {
        const auto it = manifest.find(key);
        std::size_t v = 0;
        if (it == manifest.end() || !parse_number(std::string_view(it->second), v)) {
            throw DatasetError("manifest is missing a numeric '" + key + "' entry");
        }
        return v;
    };
    SplitDataset split;
    split.user_count = count("users");
    split.item_count = count("items");
    split.action_count = count("actions");
    split.max_len = count("max_len");
    for (auto& [seq, target] : read_sequence_file(files.queries)) split.queries.push_back({std::move(seq), target});
    for (auto& [seq, target] : read_sequence_file(files.corpus)) split.corpus.push_back({std::move(seq), target});
    {
        std::ifstream in = open_in(files.items);
        std::string line;
        while (std::getline(in, line)) {
            const auto tab = line.find('\t');
            if (tab != std::string::npos) split.item_names.push_back(line.substr(tab + 1));
        }
    }
    if (split.queries.size() != count("queries") || split.corpus.size() != count("corpus")) {
        throw DatasetError("split files disagree with manifest counts");
    }
    for (const auto& q : split.queries) {
        validate(q.input, split.max_len, split.item_count);
        if (q.target >= split.item_count) throw DatasetError("query target outside item set");
    }
    for (const auto& c : split.corpus) {
        validate(c.sequence, split.max_len, split.item_count);
        if (c.target >= split.item_count) throw DatasetError("corpus target outside item set");
    }
    return split;
}

}  // namespace overrec
