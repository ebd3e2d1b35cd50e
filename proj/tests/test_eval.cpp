#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "gridvqa/eval.hpp"
#include "synthetic.hpp"

using namespace gridvqa;
using testing::make_record;

namespace {

ConfusionMatrix random_matrix(std::mt19937_64& rng, int k)
{
    ConfusionMatrix cm(k);
    for (int g = 0; g < k; ++g)
        for (int p = 0; p < k; ++p)
            if (rng() % 3 != 0)
                cm.add(g, p, rng() % (g == p ? 1000 : 200));
    if (cm.total() == 0)
        cm.add(0, 0);
    return cm;
}

PredictionRecord pred(std::string id, std::vector<std::string> answers, std::vector<std::string> cells = {})
{
    return {std::move(id), std::move(answers), std::move(cells)};
}

} // namespace

TEST_CASE("two-class fixture")
{
    ConfusionMatrix cm(2);
    cm.add(0, 0, 3);
    cm.add(0, 1, 1);
    cm.add(1, 0, 1);
    cm.add(1, 1, 3);
    const auto m = seg_metrics(cm);
    CHECK(m.pa == 0.75);
    CHECK(m.miou == 0.6);
    CHECK(m.fwiou == 0.6);
    CHECK(m.class_iou[0] == 0.6);
    CHECK(m.mpa == 0.75);
    CHECK(m.macro_precision == 0.75);
    CHECK(m.macro_f1 == 0.75);
    CHECK(m.micro_f1 == 0.75);
}

TEST_CASE("perfect segmentation scores 1 everywhere")
{
    SegmentationMap a{"a", 120, 120, std::vector<Category>(14400, 3)};
    for (int i = 0; i < 5000; ++i)
        a.data[i] = 9;
    ConfusionMatrix cm;
    confusion_accumulate(cm, a, a);
    CHECK(cm.trace() == cm.total());
    const auto m = seg_metrics(cm);
    for (double v : {m.pa, m.mpa, m.miou, m.fwiou, m.micro_precision, m.micro_recall, m.micro_f1,
                     m.macro_precision, m.macro_recall, m.macro_f1})
        CHECK(v == 1.0);
}

TEST_CASE("disjoint constant maps land in a single off-diagonal cell")
{
    SegmentationMap a{"a", 4, 4, std::vector<Category>(16, 1)};
    SegmentationMap b{"a", 4, 4, std::vector<Category>(16, 2)};
    ConfusionMatrix cm;
    confusion_accumulate(cm, a, b);
    CHECK(cm.at(1, 2) == 16);
    CHECK(cm.total() == 16);
    CHECK(seg_metrics(cm).pa == 0.0);
    SegmentationMap c{"c", 8, 4, std::vector<Category>(32, 1)};
    CHECK_THROWS_AS(confusion_accumulate(cm, a, c), Error);
    CHECK_THROWS_AS(seg_metrics(ConfusionMatrix(3)), Error);
}

TEST_CASE("accumulation is additive")
{
    const auto a = testing::random_map(1, "a"), b = testing::random_map(2, "b");
    const auto pa = testing::random_map(3, "a"), pb = testing::random_map(4, "b");
    ConfusionMatrix split_a, split_b, joint;
    confusion_accumulate(split_a, a, pa);
    confusion_accumulate(split_b, b, pb);
    SegmentationMap ja{"j", 120, 240, a.data}, jp{"j", 120, 240, pa.data};
    ja.data.insert(ja.data.end(), b.data.begin(), b.data.end());
    jp.data.insert(jp.data.end(), pb.data.begin(), pb.data.end());
    confusion_accumulate(joint, ja, jp);
    split_a += split_b;
    for (int g = 0; g < 44; ++g)
        for (int p = 0; p < 44; ++p)
            CHECK(split_a.at(g, p) == joint.at(g, p));
}

TEST_CASE("random matrices: identities and bounds")
{
    std::mt19937_64 rng(77);
    for (int t = 0; t < 300; ++t) {
        const int k = 2 + static_cast<int>(rng() % 8);
        const auto cm = random_matrix(rng, k);
        const auto m = seg_metrics(cm);
        CHECK(m.tp == cm.trace());
        CHECK(m.fp == cm.total() - cm.trace());
        CHECK(m.fn == m.fp);
        CHECK(m.micro_precision == m.pa);
        CHECK(m.micro_recall == m.pa);
        CHECK(m.micro_f1 == m.pa);
        CHECK(m.fwiou <= m.pa + 1e-12);

        double lo = 1, hi = 0, iou_sum = 0, rec_sum = 0, fw = 0;
        int n = 0;
        for (int c = 0; c < k; ++c) {
            const auto row = cm.row_sum(c), col = cm.col_sum(c), d = cm.at(c, c);
            if (row == 0)
                continue;
            const double iou = static_cast<double>(d) / static_cast<double>(row + col - d);
            lo = std::min(lo, iou);
            hi = std::max(hi, iou);
            iou_sum += iou;
            rec_sum += static_cast<double>(d) / static_cast<double>(row);
            fw += static_cast<double>(row) / static_cast<double>(cm.total()) * iou;
            ++n;
        }
        CHECK(m.miou == doctest::Approx(iou_sum / n));
        CHECK(m.mpa == doctest::Approx(rec_sum / n));
        CHECK(m.fwiou == doctest::Approx(fw));
        CHECK(m.miou >= lo - 1e-12);
        CHECK(m.miou <= hi + 1e-12);
    }
}

TEST_CASE("absent classes are excluded unless requested")
{
    ConfusionMatrix cm(3);
    cm.add(0, 0, 4);
    cm.add(1, 1, 2);
    cm.add(1, 2, 2);  // class 2 never occurs in the ground truth
    const auto m = seg_metrics(cm);
    CHECK(m.mpa == doctest::Approx((1.0 + 0.5) / 2));
    CHECK(m.miou == doctest::Approx((1.0 + 0.5) / 2));
    CHECK(std::isnan(m.class_iou[2]) == false);
    SegOptions all;
    all.include_absent_classes = true;
    const auto a = seg_metrics(cm, all);
    CHECK(a.mpa == doctest::Approx((1.0 + 0.5 + 0.0) / 3));
    CHECK(a.miou == doctest::Approx((1.0 + 0.5 + 0.0) / 3));
}

TEST_CASE("average accuracy anchor")
{
    const double acc[] = {0.999, 0.944, 0.999, 0.831};
    CHECK(std::abs(average_accuracy(acc) - 0.943) <= 5e-4);
}

TEST_CASE("vqa metrics on a constructed fixture")
{
    std::vector<QaRecord> gt;
    std::vector<PredictionRecord> preds;
    auto add = [&](const std::string& id, const std::string& qtype, const std::string& sub,
                   std::vector<std::string> answers, std::vector<std::string> predicted) {
        auto r = make_record(id, qtype, answers.front(), sub);
        r.answers = std::move(answers);
        gt.push_back(r);
        preds.push_back(pred(id, std::move(predicted)));
    };
    add("p1", "presence", "", {"yes"}, {"yes"});
    add("p2", "presence", "", {"no"}, {"yes"});
    add("p3", "presence", "", {"no"}, {"no"});
    add("a1", "area", "", {"0m²"}, {"0m²"});
    add("c1", "comparison", "absolute", {"pastures"}, {"pastures"});
    add("c2", "comparison", "relative_yesno", {"yes"}, {"no"});
    add("c3", "comparison", "relative_class", {"salines"}, {"salines", "pastures"});
    add("l1", "landcover", "", {"pastures", "salines"}, {"pastures"});
    add("l2", "landcover", "", {"pastures"}, {"pastures"});

    const auto r = vqa_metrics(preds, gt);
    CHECK(r.per_family.at("presence").correct == 2);
    CHECK(r.per_family.at("presence").total == 3);
    CHECK(r.per_family.at("comparison").correct == 1);
    CHECK(r.per_family.at("landcover").correct == 1);
    CHECK(r.per_family.at("area").rate() == 1.0);
    CHECK(r.per_subtype.at("absolute").rate() == 1.0);
    CHECK(r.overall.correct == 5);
    CHECK(r.overall.total == 9);

    // Overall equals the count-weighted mean of the family accuracies.
    double weighted = 0;
    for (const auto& [f, t] : r.per_family)
        weighted += t.rate() * static_cast<double>(t.total);
    CHECK(weighted / 9.0 == doctest::Approx(r.overall.rate()));
    CHECK(r.average_accuracy == doctest::Approx((2.0 / 3 + 1.0 / 3 + 0.5 + 1.0) / 4));

    CHECK(r.lc_tp == 2);
    CHECK(r.lc_fp == 0);
    CHECK(r.lc_fn == 1);
    CHECK(r.lc_micro_f1 == doctest::Approx(4.0 / 5.0));

    // Sample order does not matter.
    std::reverse(preds.begin(), preds.end());
    const auto again = vqa_metrics(preds, gt);
    CHECK(again.overall.correct == r.overall.correct);
    CHECK(again.lc_micro_f1 == r.lc_micro_f1);

    CHECK(vqa_tsv(r).rfind("acc_presence\tacc_comparison\tacc_lc\tmicro_f1_lc\tacc_area\toverall_acc\taverage_acc\n", 0) ==
          0);
}

TEST_CASE("missing predictions count as empty, bad ids are errors")
{
    std::vector<QaRecord> gt{make_record("q1", "presence", "yes"), make_record("q2", "presence", "no")};
    const auto r = vqa_metrics({pred("q1", {"yes"})}, gt);
    CHECK(r.overall.correct == 1);
    CHECK(r.overall.total == 2);
    CHECK_THROWS_AS(vqa_metrics({pred("q9", {"yes"})}, gt), Error);
    CHECK_THROWS_AS(vqa_metrics({pred("q1", {"yes"}), pred("q1", {"no"})}, gt), Error);
}

TEST_CASE("cell metrics")
{
    std::vector<QaRecord> gt;
    std::vector<PredictionRecord> preds;
    for (int i = 0; i < 4; ++i) {
        auto r = make_record("q" + std::to_string(i), "presence", "yes");
        r.cells = i % 2 == 0 ? std::vector<std::string>{"a1", "b1"} : std::vector<std::string>{"c3"};
        gt.push_back(r);
        preds.push_back(pred(r.question_id, {"yes"}, r.cells));
    }
    const auto exact = cell_metrics(preds, gt);
    CHECK(exact.precision == 1.0);
    CHECK(exact.recall == 1.0);
    CHECK(exact.f1 == 1.0);

    // Predicting every cell: precision = density of GT cells, recall = 1.
    const GridGeometry g;
    const auto all_cells = CellSet::all(16).labels(g);
    for (auto& p : preds)
        p.cells = all_cells;
    const auto full = cell_metrics(preds, gt);
    CHECK(full.recall == 1.0);
    CHECK(full.precision == doctest::Approx(6.0 / 64.0));
    CHECK(full.f1 == doctest::Approx(2 * full.precision * full.recall / (full.precision + full.recall)));

    for (auto& p : preds)
        p.cells.clear();
    const auto none = cell_metrics(preds, gt);
    CHECK(none.precision == 0.0);
    CHECK(none.recall == 0.0);
    CHECK(none.f1 == 0.0);
}

TEST_CASE("cell correlation")
{
    std::vector<CellSet> same;
    for (int i = 0; i < 50; ++i)
        same.push_back(i % 4 == 0 ? CellSet::all(16) : CellSet{});
    CHECK(cell_correlation(same) == 1.0);

    // Constant columns: 7 ones and 9 zeros give 21 + 36 identical pairs.
    std::vector<CellSet> fixed(50, CellSet(0b1010'0000'1111'0001));
    CHECK(cell_correlation(fixed) == doctest::Approx(57.0 / 120.0));

    std::vector<CellSet> ones(10, CellSet::all(16));
    CHECK(cell_correlation(ones) == 1.0);

    std::mt19937_64 rng(2024);
    std::vector<CellSet> coins;
    for (int i = 0; i < 10000; ++i)
        coins.emplace_back(rng() & 0xffff);
    CHECK(std::abs(cell_correlation(coins)) < 0.05);

    // Two perfectly anti-correlated columns and all others constant zero.
    std::vector<CellSet> anti;
    for (int i = 0; i < 20; ++i)
        anti.emplace_back(i % 2 == 0 ? 0b01 : 0b10);
    // Pair (0,1) scores -1; pairs of two zero columns score 1; mixed pairs 0.
    const double expected = (-1.0 + 91.0) / 120.0;
    CHECK(cell_correlation(anti) == doctest::Approx(expected));

    CHECK_THROWS_AS(cell_correlation(std::vector<CellSet>{CellSet{}}), Error);
}
