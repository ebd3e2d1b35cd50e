#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "gridvqa/questions.hpp"

namespace gridvqa {

/// 1 / a_unique.
double uniform_score(std::uint64_t a_unique);
/// a_common / n.
double prior_score(std::uint64_t a_common, std::uint64_t n);
/// (prior - uniform) / (1 - uniform), 0 when only one answer exists.
double lb_score(double prior, double uniform);

struct BiasRow {
    std::string row;
    // Count columns are empty for the derived Average/Overall rows.
    std::optional<std::uint64_t> n;
    std::optional<std::uint64_t> a_unique;
    std::optional<std::uint64_t> a_common;
    std::optional<std::string> most_common;
    double prior = 0;
    double uniform = 0;
    double lb = 0;
};

/// Row from a label histogram. The most common label is the
/// lexicographically smallest among those with the highest count.
BiasRow bias_row(std::string name, const std::map<std::string, std::uint64_t>& counts);

/// Streaming accumulator of answer-label and cell occurrences.
struct BiasCounts {
    std::map<std::string, std::map<std::string, std::uint64_t>> answers;  // family -> label -> n
    std::map<std::string, std::uint64_t> cells;
    std::uint64_t records = 0;

    void add(const QaRecord& r);
    void merge(const BiasCounts& other);
};

struct BiasOptions {
    /// Average row lb recomputed from the averaged prior and uniform instead
    /// of averaging the per-type lb values.
    bool recompute_average_lb = false;
};

/// Rows: one per question family, "All Answers", "All Cells", "Average"
/// (unweighted mean over families), "Overall" (sample-weighted prior and
/// uniform, lb recomputed) and "Overall (weighted lb)".
struct BiasReport {
    std::vector<BiasRow> rows;

    const BiasRow& row(std::string_view name) const;
    std::string to_tsv() const;
    nlohmann::ordered_json to_json() const;
};

BiasReport bias_report(const BiasCounts& counts, const BiasOptions& options = {});
BiasReport bias_report(std::span<const QaRecord> records, const BiasOptions& options = {});

} // namespace gridvqa
