#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "gridvqa/questions.hpp"
#include "gridvqa/raster.hpp"

namespace gridvqa {

/// One model output. Answers and cells are rendered labels as in QA JSONL.
struct PredictionRecord {
    std::string question_id;
    std::vector<std::string> answers;
    std::vector<std::string> cells;
};

// ---------------------------------------------------------------------------
// Segmentation

/// K x K pixel counts, ground truth rows by predicted columns.
class ConfusionMatrix {
public:
    explicit ConfusionMatrix(int classes = ClassStats::kCategories);

    int classes() const { return k_; }
    std::uint64_t at(int gt, int pred) const { return m_[static_cast<std::size_t>(gt) * k_ + pred]; }
    void add(int gt, int pred, std::uint64_t n = 1);
    std::uint64_t total() const { return total_; }
    std::uint64_t trace() const;
    std::uint64_t row_sum(int c) const;
    std::uint64_t col_sum(int c) const;

    ConfusionMatrix& operator+=(const ConfusionMatrix& o);

private:
    int k_;
    std::vector<std::uint64_t> m_;
    std::uint64_t total_ = 0;
};

/// Adds one pixel per (gt, pred) pair; throws on a shape mismatch.
void confusion_accumulate(ConfusionMatrix& cm, const SegmentationMap& gt, const SegmentationMap& pred);

struct SegOptions {
    /// Average per-class values over every class instead of only classes
    /// present in the ground truth; absent classes then count as 0.
    bool include_absent_classes = false;
};

struct SegMetrics {
    // Pooled counts behind the micro scores.
    std::uint64_t tp = 0, fp = 0, fn = 0, total = 0;
    double micro_precision = 0, micro_recall = 0, micro_f1 = 0;
    double macro_precision = 0, macro_recall = 0, macro_f1 = 0;
    double pa = 0, mpa = 0, miou = 0, fwiou = 0;
    std::vector<double> class_iou;  // per class, NaN when undefined
};

SegMetrics seg_metrics(const ConfusionMatrix& cm, const SegOptions& options = {});

// ---------------------------------------------------------------------------
// Answers and cells

struct Tally {
    std::uint64_t correct = 0;
    std::uint64_t total = 0;

    double rate() const { return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total); }
};

struct VqaReport {
    /// Keyed by question family: presence, comparison, landcover, area.
    std::map<std::string, Tally> per_family;
    /// Keyed by comparison subtype.
    std::map<std::string, Tally> per_subtype;
    Tally overall;
    double average_accuracy = 0;
    std::uint64_t lc_tp = 0, lc_fp = 0, lc_fn = 0;
    double lc_micro_f1 = 0;
};

struct CellReport {
    std::uint64_t tp = 0, fp = 0, fn = 0;
    double precision = 0, recall = 0, f1 = 0;
    double correlation = 0;
};

/// Unweighted mean of per-family accuracies; families without samples are
/// skipped.
double average_accuracy(std::span<const double> per_family);

/// Micro precision / recall / F1 from pooled counts; 0 when undefined.
double safe_ratio(std::uint64_t num, std::uint64_t den);
double micro_f1(std::uint64_t tp, std::uint64_t fp, std::uint64_t fn);

/// Ground truth questions with no prediction are scored as empty predictions.
/// Throws on unknown or duplicate question ids.
VqaReport vqa_metrics(const std::vector<PredictionRecord>& predictions,
                      const std::vector<QaRecord>& ground_truth);

CellReport cell_metrics(const std::vector<PredictionRecord>& predictions,
                        const std::vector<QaRecord>& ground_truth, const GridGeometry& geom = {});

/// Mean Pearson correlation over all pairs of cell-indicator columns of the
/// predicted cell sets. A pair with a constant column scores 1 when both
/// columns are identical and 0 otherwise.
double cell_correlation(std::span<const CellSet> predictions, int cell_count = 16);
double cell_correlation(const std::vector<PredictionRecord>& predictions, const GridGeometry& geom = {});

// ---------------------------------------------------------------------------
// Report rendering

nlohmann::json to_json(const VqaReport& r);
nlohmann::json to_json(const CellReport& r);
nlohmann::json to_json(const SegMetrics& m);
std::string vqa_tsv(const VqaReport& r);
std::string cell_tsv(const CellReport& r);
std::string seg_tsv(const SegMetrics& m);

} // namespace gridvqa
