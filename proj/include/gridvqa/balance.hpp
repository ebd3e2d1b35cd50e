#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "gridvqa/questions.hpp"

namespace gridvqa {

struct BalanceOptions {
    std::uint64_t seed = 0;
    /// Pool comparison answers per subtype instead of across all three.
    bool per_subtype_comparison = false;
};

/// Balancing bucket and label of one record. Presence labels are keyed by
/// class ("<class>/yes"); landcover records share the single label "*".
struct BalanceGroup {
    std::string bucket;
    std::string label;

    friend auto operator<=>(const BalanceGroup&, const BalanceGroup&) = default;
};

BalanceGroup balance_group(const QaRecord& r, const BalanceOptions& options = {});

/// Deterministic subsampling rank of a record.
std::uint64_t balance_rank(std::uint64_t seed, std::string_view question_id);

/// Per-bucket label counts. Merging is associative and commutative.
struct AnswerHistogram {
    std::map<std::string, std::map<std::string, std::uint64_t>> counts;

    void add(const BalanceGroup& g, std::uint64_t n = 1) { counts[g.bucket][g.label] += n; }
    void merge(const AnswerHistogram& other);
    std::uint64_t count(const std::string& bucket, const std::string& label) const;
    std::uint64_t bucket_total(const std::string& bucket) const;

    friend bool operator==(const AnswerHistogram&, const AnswerHistogram&) = default;
};

AnswerHistogram answer_histogram(std::span<const QaRecord> records, const BalanceOptions& options = {});

/// Element at index floor((n-1)/2) of the sorted non-zero counts; 0 when
/// there are none.
std::uint64_t lower_median(std::vector<std::uint64_t> counts);

inline constexpr std::uint64_t kUncapped = std::numeric_limits<std::uint64_t>::max();

/// Maximum kept count per (bucket, label); absent entries are uncapped.
struct BalanceCaps {
    std::map<std::string, std::map<std::string, std::uint64_t>> caps;

    std::uint64_t cap(const std::string& bucket, const std::string& label) const;
};

/// Equal yes/no per class: both capped at min(yes, no).
void presence_caps(const AnswerHistogram& hist, BalanceCaps& out);
/// True for the two singleton area labels: "0m²" and the full-image area.
bool is_area_endpoint(std::string_view label);
/// The two area endpoints capped at the lower median of the other non-zero
/// area label counts.
void area_caps(const AnswerHistogram& hist, BalanceCaps& out);
/// Every comparison answer capped at the lower median over all of them.
void comparison_caps(const AnswerHistogram& hist, BalanceCaps& out);

BalanceCaps balance_caps(const AnswerHistogram& hist);

/// Compact per-record view used by the selection pass.
struct BalanceEntry {
    std::uint32_t group = 0;
    std::uint64_t rank = 0;
};

/// Interns (bucket, label) pairs to dense ids.
class GroupTable {
public:
    std::uint32_t intern(const BalanceGroup& g);
    const BalanceGroup& group(std::uint32_t id) const { return groups_[id]; }
    std::size_t size() const { return groups_.size(); }

private:
    std::vector<BalanceGroup> groups_;
    std::unordered_map<std::string, std::uint32_t> index_;
};

/// Keeps, within every capped group, the `cap` entries of smallest
/// (rank, position). Returns one flag per entry.
std::vector<bool> select_kept(std::span<const BalanceEntry> entries, const GroupTable& groups,
                              const BalanceCaps& caps);

struct BalanceAudit {
    struct Counts {
        std::uint64_t before = 0;
        std::uint64_t after = 0;
    };
    std::map<std::string, std::map<std::string, Counts>> buckets;

    nlohmann::json to_json() const;
};

struct BalanceResult {
    std::vector<QaRecord> kept;
    BalanceAudit audit;
};

/// Applies one rule to the records of its bucket and returns the kept ones.
std::vector<QaRecord> balance_presence(std::span<const QaRecord> records, const AnswerHistogram& hist,
                                       std::uint64_t seed);
std::vector<QaRecord> balance_area(std::span<const QaRecord> records, const AnswerHistogram& hist,
                                   std::uint64_t seed);
std::vector<QaRecord> balance_comparison(std::span<const QaRecord> records, const AnswerHistogram& hist,
                                         std::uint64_t seed);

/// All rules; landcover records pass through. Output keeps input order.
BalanceResult balance_dataset(std::span<const QaRecord> records, const BalanceOptions& options = {},
                              int workers = 1);

/// Two-pass streaming version over QA JSONL files. Kept lines are copied
/// byte for byte.
BalanceAudit balance_file(const std::filesystem::path& in, const std::filesystem::path& out,
                          const BalanceOptions& options = {}, int workers = 1);

} // namespace gridvqa
