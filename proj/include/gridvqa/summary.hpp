#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gridvqa/questions.hpp"
#include "gridvqa/raster.hpp"

namespace gridvqa {

/// Structured content of a summary: (cell, class) pairs in cell-major
/// canonical order, then (class, area bin) pairs by class id.
struct SummaryView {
    std::vector<std::pair<CellId, Category>> table;
    std::vector<std::pair<Category, int>> area;

    friend bool operator==(const SummaryView&, const SummaryView&) = default;
};

struct SummaryText {
    std::string text;
    SummaryView view;
};

/// Thresholded view of the statistics; Unlabeled and classes below the
/// image threshold are omitted.
SummaryView summary_view(const ClassStats& stats, const Nomenclature& nomenclature,
                         const Thresholds& thresholds = {}, const AreaScale& scale = {});

/// "Table: (a1, name), (b1, name); Area: name: 45001-50000m²; other: ..."
SummaryText render_summary(const ClassStats& stats, const LabelSpace& labels, const Thresholds& thresholds = {});
std::string render_summary_text(const SummaryView& view, const LabelSpace& labels);

/// Inverse of render_summary_text. Throws on malformed text, unknown cells
/// or unknown class names.
SummaryView parse_summary(std::string_view text, const LabelSpace& labels);

/// "Based on a1, b2, the answer is yes." with "all cells" for a full grid
/// and "the absence of a relevant area" for an empty set.
std::string render_explanation(CellSet cells, std::vector<AnswerLabel> answers, const LabelSpace& labels);

} // namespace gridvqa
