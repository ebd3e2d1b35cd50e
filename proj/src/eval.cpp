#include "gridvqa/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>
#include <unordered_map>

namespace gridvqa {

// ---------------------------------------------------------------------------
// Confusion matrix

ConfusionMatrix::ConfusionMatrix(int classes) : k_(classes), m_(static_cast<std::size_t>(classes) * classes, 0)
{
    if (classes < 1)
        throw Error("confusion matrix needs at least one class");
}

void ConfusionMatrix::add(int gt, int pred, std::uint64_t n)
{
    if (gt < 0 || gt >= k_ || pred < 0 || pred >= k_)
        throw Error("confusion matrix index out of range");
    m_[static_cast<std::size_t>(gt) * k_ + pred] += n;
    total_ += n;
}

std::uint64_t ConfusionMatrix::trace() const
{
    std::uint64_t t = 0;
    for (int c = 0; c < k_; ++c)
        t += at(c, c);
    return t;
}

std::uint64_t ConfusionMatrix::row_sum(int c) const
{
    std::uint64_t s = 0;
    for (int p = 0; p < k_; ++p)
        s += at(c, p);
    return s;
}

std::uint64_t ConfusionMatrix::col_sum(int c) const
{
    std::uint64_t s = 0;
    for (int g = 0; g < k_; ++g)
        s += at(g, c);
    return s;
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& o)
{
    if (o.k_ != k_)
        throw Error("confusion matrix size mismatch");
    for (std::size_t i = 0; i < m_.size(); ++i)
        m_[i] += o.m_[i];
    total_ += o.total_;
    return *this;
}

void confusion_accumulate(ConfusionMatrix& cm, const SegmentationMap& gt, const SegmentationMap& pred)
{
    if (gt.width != pred.width || gt.height != pred.height || gt.data.size() != pred.data.size())
        throw Error("shape mismatch between ground truth \"" + gt.image_id + "\" (" +
                    std::to_string(gt.width) + "x" + std::to_string(gt.height) + ") and prediction (" +
                    std::to_string(pred.width) + "x" + std::to_string(pred.height) + ")");
    for (std::size_t i = 0; i < gt.data.size(); ++i)
        cm.add(gt.data[i], pred.data[i]);
}

double safe_ratio(std::uint64_t num, std::uint64_t den)
{
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

double micro_f1(std::uint64_t tp, std::uint64_t fp, std::uint64_t fn)
{
    return safe_ratio(2 * tp, 2 * tp + fp + fn);
}

SegMetrics seg_metrics(const ConfusionMatrix& cm, const SegOptions& options)
{
    if (cm.total() == 0)
        throw Error("segmentation metrics of an empty confusion matrix");
    const int k = cm.classes();
    SegMetrics m;
    m.total = cm.total();
    m.tp = cm.trace();
    // Every misclassified pixel is one false positive (for the predicted
    // class) and one false negative (for the true class).
    m.fp = m.total - m.tp;
    m.fn = m.total - m.tp;
    m.micro_precision = safe_ratio(m.tp, m.tp + m.fp);
    m.micro_recall = safe_ratio(m.tp, m.tp + m.fn);
    m.micro_f1 = micro_f1(m.tp, m.fp, m.fn);
    m.pa = safe_ratio(m.tp, m.total);

    m.class_iou.assign(static_cast<std::size_t>(k), std::numeric_limits<double>::quiet_NaN());
    double sum_p = 0, sum_r = 0, sum_f1 = 0, sum_iou = 0;
    int counted = 0;
    for (int c = 0; c < k; ++c) {
        const auto d = cm.at(c, c);
        const auto r = cm.row_sum(c);
        const auto col = cm.col_sum(c);
        if (r + col > 0)
            m.class_iou[static_cast<std::size_t>(c)] = safe_ratio(d, r + col - d);
        if (r == 0 && !options.include_absent_classes)
            continue;
        ++counted;
        sum_p += safe_ratio(d, col);
        sum_r += safe_ratio(d, r);
        sum_f1 += safe_ratio(2 * d, r + col);
        sum_iou += safe_ratio(d, r + col - d);
        m.fwiou += safe_ratio(r, m.total) * safe_ratio(d, r + col - d);
    }
    m.macro_precision = sum_p / counted;
    m.macro_recall = sum_r / counted;
    m.macro_f1 = sum_f1 / counted;
    m.mpa = m.macro_recall;
    m.miou = sum_iou / counted;
    return m;
}

// ---------------------------------------------------------------------------
// VQA answers

namespace {

const char* const kFamilies[] = {"presence", "comparison", "landcover", "area"};

std::vector<std::string> canonical_set(std::vector<std::string> v)
{
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
}

/// Ground-truth-aligned predictions: index i holds the prediction for
/// ground_truth[i], or nullptr when none was given.
std::vector<const PredictionRecord*> align(const std::vector<PredictionRecord>& predictions,
                                           const std::vector<QaRecord>& ground_truth)
{
    std::unordered_map<std::string_view, std::size_t> index;
    index.reserve(ground_truth.size());
    for (std::size_t i = 0; i < ground_truth.size(); ++i)
        if (!index.emplace(ground_truth[i].question_id, i).second)
            throw Error("duplicate ground-truth question_id " + ground_truth[i].question_id);
    std::vector<const PredictionRecord*> out(ground_truth.size(), nullptr);
    for (const auto& p : predictions) {
        auto it = index.find(p.question_id);
        if (it == index.end())
            throw Error("unknown question_id " + p.question_id);
        if (out[it->second] != nullptr)
            throw Error("duplicate prediction for question_id " + p.question_id);
        out[it->second] = &p;
    }
    return out;
}

} // namespace

double average_accuracy(std::span<const double> per_family)
{
    if (per_family.empty())
        return 0.0;
    double s = 0;
    for (double v : per_family)
        s += v;
    return s / static_cast<double>(per_family.size());
}

VqaReport vqa_metrics(const std::vector<PredictionRecord>& predictions,
                      const std::vector<QaRecord>& ground_truth)
{
    const auto aligned = align(predictions, ground_truth);
    VqaReport r;
    for (std::size_t i = 0; i < ground_truth.size(); ++i) {
        const auto& gt = ground_truth[i];
        const auto gt_set = canonical_set(gt.answers);
        const auto pred_set = aligned[i] ? canonical_set(aligned[i]->answers) : std::vector<std::string>{};

        bool correct = false;
        if (gt.qtype == "landcover") {
            correct = pred_set == gt_set;
            std::vector<std::string> both;
            std::set_intersection(pred_set.begin(), pred_set.end(), gt_set.begin(), gt_set.end(),
                                  std::back_inserter(both));
            r.lc_tp += both.size();
            r.lc_fp += pred_set.size() - both.size();
            r.lc_fn += gt_set.size() - both.size();
        } else {
            correct = pred_set.size() == 1 && gt_set.size() == 1 && pred_set.front() == gt_set.front();
        }

        auto bump = [correct](Tally& t) {
            ++t.total;
            t.correct += correct ? 1 : 0;
        };
        bump(r.per_family[gt.qtype]);
        if (!gt.subtype.empty())
            bump(r.per_subtype[gt.subtype]);
        bump(r.overall);
    }

    std::vector<double> rates;
    for (const char* f : kFamilies)
        if (auto it = r.per_family.find(f); it != r.per_family.end() && it->second.total > 0)
            rates.push_back(it->second.rate());
    r.average_accuracy = average_accuracy(rates);
    r.lc_micro_f1 = micro_f1(r.lc_tp, r.lc_fp, r.lc_fn);
    return r;
}

// ---------------------------------------------------------------------------
// Cells

CellReport cell_metrics(const std::vector<PredictionRecord>& predictions,
                        const std::vector<QaRecord>& ground_truth, const GridGeometry& geom)
{
    const auto aligned = align(predictions, ground_truth);
    CellReport r;
    for (std::size_t i = 0; i < ground_truth.size(); ++i) {
        const CellSet gt = CellSet::from_labels(ground_truth[i].cells, geom);
        const CellSet pred = aligned[i] ? CellSet::from_labels(aligned[i]->cells, geom) : CellSet{};
        const CellSet both = gt & pred;
        r.tp += static_cast<std::uint64_t>(both.size());
        r.fp += static_cast<std::uint64_t>(pred.size() - both.size());
        r.fn += static_cast<std::uint64_t>(gt.size() - both.size());
    }
    r.precision = safe_ratio(r.tp, r.tp + r.fp);
    r.recall = safe_ratio(r.tp, r.tp + r.fn);
    r.f1 = micro_f1(r.tp, r.fp, r.fn);
    return r;
}

double cell_correlation(std::span<const CellSet> predictions, int cell_count)
{
    if (predictions.size() < 2)
        throw Error("cell correlation needs at least 2 predictions");
    if (cell_count < 2 || cell_count > 64)
        throw Error("cell correlation needs 2..64 cells");
    const auto n = static_cast<double>(predictions.size());
    std::vector<std::uint64_t> ones(static_cast<std::size_t>(cell_count), 0);
    std::vector<std::uint64_t> both(static_cast<std::size_t>(cell_count) * cell_count, 0);
    for (const CellSet& s : predictions) {
        const auto cells = s.cells();
        for (CellId a : cells) {
            if (a.index >= cell_count)
                throw Error("predicted cell outside the grid");
            ++ones[a.index];
            for (CellId b : cells)
                ++both[static_cast<std::size_t>(a.index) * cell_count + b.index];
        }
    }

    double sum = 0;
    int pairs = 0;
    for (int i = 0; i < cell_count; ++i) {
        for (int j = i + 1; j < cell_count; ++j) {
            ++pairs;
            const double si = static_cast<double>(ones[i]);
            const double sj = static_cast<double>(ones[j]);
            const double sij = static_cast<double>(both[static_cast<std::size_t>(i) * cell_count + j]);
            // n^2 times the population variances and covariance.
            const double var_i = n * si - si * si;
            const double var_j = n * sj - sj * sj;
            if (var_i == 0 || var_j == 0) {
                // Constant column: identical iff both columns agree on every row.
                const bool identical = ones[i] == ones[j] && (ones[i] == 0 || ones[i] == predictions.size());
                sum += identical ? 1.0 : 0.0;
                continue;
            }
            const double cov = n * sij - si * sj;
            sum += cov / std::sqrt(var_i * var_j);
        }
    }
    return sum / pairs;
}

double cell_correlation(const std::vector<PredictionRecord>& predictions, const GridGeometry& geom)
{
    std::vector<CellSet> sets;
    sets.reserve(predictions.size());
    for (const auto& p : predictions)
        sets.push_back(CellSet::from_labels(p.cells, geom));
    return cell_correlation(sets, geom.cell_count());
}

// ---------------------------------------------------------------------------
// Rendering

namespace {

std::string fmt(double v)
{
    std::ostringstream ss;
    ss.setf(std::ios::fixed);
    ss.precision(5);
    ss << v;
    return ss.str();
}

double family_rate(const VqaReport& r, const char* f)
{
    auto it = r.per_family.find(f);
    return it == r.per_family.end() ? 0.0 : it->second.rate();
}

} // namespace

nlohmann::json to_json(const VqaReport& r)
{
    nlohmann::json j;
    for (const auto& [k, t] : r.per_family)
        j["accuracy"][k] = {{"correct", t.correct}, {"total", t.total}, {"accuracy", t.rate()}};
    for (const auto& [k, t] : r.per_subtype)
        j["comparison_subtypes"][k] = {{"correct", t.correct}, {"total", t.total}, {"accuracy", t.rate()}};
    j["overall_accuracy"] = r.overall.rate();
    j["average_accuracy"] = r.average_accuracy;
    j["samples"] = r.overall.total;
    j["landcover_micro_f1"] = r.lc_micro_f1;
    j["landcover_counts"] = {{"tp", r.lc_tp}, {"fp", r.lc_fp}, {"fn", r.lc_fn}};
    return j;
}

nlohmann::json to_json(const CellReport& r)
{
    return {{"micro_f1", r.f1},       {"precision", r.precision}, {"recall", r.recall},
            {"correlation", r.correlation},
            {"counts", {{"tp", r.tp}, {"fp", r.fp}, {"fn", r.fn}}}};
}

nlohmann::json to_json(const SegMetrics& m)
{
    return {{"micro_precision", m.micro_precision}, {"micro_recall", m.micro_recall},
            {"micro_f1", m.micro_f1},               {"macro_precision", m.macro_precision},
            {"macro_recall", m.macro_recall},       {"macro_f1", m.macro_f1},
            {"pa", m.pa},                           {"mpa", m.mpa},
            {"miou", m.miou},                       {"fwiou", m.fwiou},
            {"pixels", m.total}};
}

std::string vqa_tsv(const VqaReport& r)
{
    return "acc_presence\tacc_comparison\tacc_lc\tmicro_f1_lc\tacc_area\toverall_acc\taverage_acc\n" +
           fmt(family_rate(r, "presence")) + "\t" + fmt(family_rate(r, "comparison")) + "\t" +
           fmt(family_rate(r, "landcover")) + "\t" + fmt(r.lc_micro_f1) + "\t" +
           fmt(family_rate(r, "area")) + "\t" + fmt(r.overall.rate()) + "\t" +
           fmt(r.average_accuracy) + "\n";
}

std::string cell_tsv(const CellReport& r)
{
    return "micro_f1\tprecision\trecall\tcorrelation\n" + fmt(r.f1) + "\t" + fmt(r.precision) + "\t" +
           fmt(r.recall) + "\t" + fmt(r.correlation) + "\n";
}

std::string seg_tsv(const SegMetrics& m)
{
    return "micro_p\tmicro_r\tmicro_f1\tmacro_p\tmacro_r\tmacro_f1\tpa\tmpa\tmiou\tfwiou\n" +
           fmt(m.micro_precision) + "\t" + fmt(m.micro_recall) + "\t" + fmt(m.micro_f1) + "\t" +
           fmt(m.macro_precision) + "\t" + fmt(m.macro_recall) + "\t" + fmt(m.macro_f1) + "\t" +
           fmt(m.pa) + "\t" + fmt(m.mpa) + "\t" + fmt(m.miou) + "\t" + fmt(m.fwiou) + "\n";
}

} // namespace gridvqa
