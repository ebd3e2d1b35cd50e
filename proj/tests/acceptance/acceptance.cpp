#include <sys/resource.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>

#include "gridvqa/balance.hpp"
#include "gridvqa/bias.hpp"
#include "gridvqa/eval.hpp"
#include "gridvqa/io.hpp"
#include "gridvqa/pipeline.hpp"
#include "gridvqa/summary.hpp"
#include "synthetic.hpp"

using namespace gridvqa;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
    bool ok = true;
    std::string detail;

    void expect(bool cond, const std::string& what)
    {
        if (!cond) {
            if (ok)
                detail = what;
            ok = false;
        }
    }
};

double seconds_since(Clock::time_point t0)
{
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

bool near(double a, double b, double tol) { return std::abs(a - b) <= tol; }

fs::path scratch_dir()
{
    static const fs::path dir = [] {
        auto d = fs::temp_directory_path() / ("gridvqa_acceptance_" + std::to_string(::getpid()));
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

std::map<std::string, std::uint64_t> spread(std::uint64_t n, const std::string& top, std::uint64_t common,
                                            const std::vector<std::string>& others)
{
    std::map<std::string, std::uint64_t> h{{top, common}};
    const auto rest = n - common;
    for (std::size_t i = 0; i < others.size(); ++i)
        h[others[i]] = rest / others.size() + (i < rest % others.size() ? 1 : 0);
    return h;
}

Outcome bias_anchors()
{
    Outcome o;
    const auto t0 = Clock::now();
    std::vector<std::string> labels;
    for (int i = 0; i < 333; ++i)
        labels.push_back("label" + std::to_string(i));
    const auto all = bias_row("All Answers", spread(1031798, "no", 65775, labels));
    o.expect(near(all.prior, 0.06375, 5e-5), "All Answers prior " + std::to_string(all.prior));
    o.expect(near(all.uniform, 0.00299, 5e-5), "All Answers uniform " + std::to_string(all.uniform));
    o.expect(near(all.lb, 0.06094, 5e-5), "All Answers lb " + std::to_string(all.lb));

    const GridGeometry g;
    std::vector<std::string> cells;
    for (std::uint8_t i = 0; i < 16; ++i)
        if (g.label(CellId{i}) != "b1")
            cells.push_back(g.label(CellId{i}));
    const auto c = bias_row("All Cells", spread(7108905, "b1", 445357, cells));
    o.expect(near(c.lb, 0.00016, 5e-5), "All Cells lb " + std::to_string(c.lb));
    const auto t = seconds_since(t0);
    o.expect(t < 1.0, "runtime " + std::to_string(t) + " s");
    return o;
}

Outcome area_binning()
{
    Outcome o;
    const auto t0 = Clock::now();
    std::set<std::string> distinct;
    int last = -1;
    for (std::uint64_t px = 0; px <= 14400; ++px) {
        const auto l = area_label(px);
        distinct.insert(l.text);
        o.expect(l.index >= last, "non-monotone at " + std::to_string(px));
        last = l.index;
    }
    o.expect(distinct.size() == 290, "distinct labels " + std::to_string(distinct.size()));
    o.expect(area_label(458).text == "45001-50000m²", "458 px -> " + area_label(458).text);
    o.expect(area_label(13501).text == "1350001-1355000m²", "13501 px -> " + area_label(13501).text);
    const auto t = seconds_since(t0);
    o.expect(t < 1.0, "runtime " + std::to_string(t) + " s");
    return o;
}

Outcome oracle_brute_force()
{
    Outcome o;
    const auto t0 = Clock::now();
    const auto nom = Nomenclature::clc_level3();
    const LabelSpace labels(nom);
    const auto reg = load_registry(GRIDVQA_DATA_DIR "/templates.jsonl");
    GenerationConfig cfg;
    cfg.seed = 11;
    std::size_t questions = 0;
    for (std::uint64_t seed = 0; seed < 1000 && o.ok; ++seed) {
        const auto map = testing::random_map(seed, "img" + std::to_string(seed));
        const testing::ReferenceOracle ref(map, nom);
        for (const auto& qa : enumerate_candidates(class_stats(map), reg, labels, cfg, "train")) {
            const auto rec = to_record(qa, labels);
            const auto want = ref.answer(rec);
            const bool same = testing::sorted(rec.answers) == want.answers && testing::sorted(rec.cells) == want.cells;
            o.expect(same, "mismatch on " + rec.image_id + ": " + rec.question);
            ++questions;
        }
    }
    o.expect(questions > 1000 * 87, "too few questions: " + std::to_string(questions));
    const auto t = seconds_since(t0);
    o.expect(t < 120.0, "runtime " + std::to_string(t) + " s");
    if (o.ok)
        o.detail = std::to_string(questions) + " questions";
    return o;
}

std::map<std::string, std::uint64_t> answer_counts(const std::vector<QaRecord>& rs, const std::string& family)
{
    std::map<std::string, std::uint64_t> h;
    for (const auto& r : rs)
        if (r.qtype == family)
            ++h[family == "presence" ? *r.class_a + "/" + r.answers.at(0) : r.answers.at(0)];
    return h;
}

std::uint64_t reference_lower_median(std::vector<std::uint64_t> v)
{
    std::erase(v, 0);
    if (v.empty())
        return 0;
    std::sort(v.begin(), v.end());
    return v[(v.size() - 1) / 2];
}

Outcome balance_invariants()
{
    Outcome o;
    const auto t0 = Clock::now();
    const auto in = testing::synthetic_candidates(100000, 2024);
    const auto out = balance_dataset(in, BalanceOptions{9}).kept;

    const auto in_p = answer_counts(in, "presence");
    const auto out_p = answer_counts(out, "presence");
    std::set<std::string> classes;
    for (const auto& [k, n] : in_p)
        classes.insert(k.substr(0, k.rfind('/')));
    auto get = [](const auto& m, const std::string& k) -> std::uint64_t { return m.contains(k) ? m.at(k) : 0; };
    for (const auto& c : classes)
        o.expect(get(out_p, c + "/yes") == get(out_p, c + "/no"), "presence yes != no for " + c);

    const auto in_a = answer_counts(in, "area");
    std::vector<std::uint64_t> middle;
    for (const auto& [label, n] : in_a)
        if (label != "0m²" && label != "1440000m²")
            middle.push_back(n);
    const auto m = reference_lower_median(middle);
    const auto out_a = answer_counts(out, "area");
    o.expect(get(out_a, "0m²") <= m, "0m² above median");
    o.expect(get(out_a, "1440000m²") <= m, "full-image area above median");

    const auto in_c = answer_counts(in, "comparison");
    std::vector<std::uint64_t> all;
    for (const auto& [label, n] : in_c)
        all.push_back(n);
    const auto mc = reference_lower_median(all);
    for (const auto& [label, n] : answer_counts(out, "comparison"))
        o.expect(n <= mc, "comparison answer above median: " + label);

    o.expect(answer_counts(out, "landcover") == answer_counts(in, "landcover"), "landcover changed");

    std::map<std::string, const QaRecord*> by_id;
    for (const auto& r : in)
        by_id[r.question_id] = &r;
    for (const auto& r : out)
        o.expect(by_id.contains(r.question_id) && *by_id.at(r.question_id) == r, "record not in input");

    const auto dir = scratch_dir();
    write_qa_jsonl(dir / "cand.jsonl", in);
    balance_file(dir / "cand.jsonl", dir / "bal1.jsonl", BalanceOptions{9}, 1);
    balance_file(dir / "cand.jsonl", dir / "bal8.jsonl", BalanceOptions{9}, 8);
    const auto b1 = read_text_file(dir / "bal1.jsonl");
    o.expect(b1 == read_text_file(dir / "bal8.jsonl"), "1 vs 8 workers differ");
    std::string expect_bytes;
    for (const auto& r : out)
        expect_bytes += to_line(r) + "\n";
    o.expect(b1 == expect_bytes, "streaming output differs from in-memory balancer");

    const auto t = seconds_since(t0);
    o.expect(t < 60.0, "runtime " + std::to_string(t) + " s");
    if (o.ok)
        o.detail = std::to_string(in.size()) + " -> " + std::to_string(out.size());
    return o;
}

Outcome seg_identity()
{
    Outcome o;
    std::mt19937_64 rng(5);
    for (int t = 0; t < 1000; ++t) {
        const int k = 2 + static_cast<int>(rng() % 43);
        ConfusionMatrix cm(k);
        const int entries = 1 + static_cast<int>(rng() % 200);
        for (int e = 0; e < entries; ++e)
            cm.add(static_cast<int>(rng() % k), static_cast<int>(rng() % k), 1 + rng() % 1000);
        const auto s = seg_metrics(cm);
        // Rational check: tp = trace, tp + fp = tp + fn = total.
        o.expect(s.tp == cm.trace() && s.tp + s.fp == cm.total() && s.tp + s.fn == cm.total(), "pooled counts");
        o.expect(s.micro_precision == s.micro_recall && s.micro_recall == s.micro_f1 && s.micro_f1 == s.pa,
                 "micro P/R/F1/PA differ");
    }
    ConfusionMatrix cm(2);
    cm.add(0, 0, 3);
    cm.add(0, 1, 1);
    cm.add(1, 0, 1);
    cm.add(1, 1, 3);
    const auto s = seg_metrics(cm);
    o.expect(s.pa == 0.75, "PA " + std::to_string(s.pa));
    o.expect(s.miou == 0.6, "mIoU " + std::to_string(s.miou));
    o.expect(s.fwiou == 0.6, "FWIoU " + std::to_string(s.fwiou));
    return o;
}

Outcome vqa_averaging()
{
    Outcome o;
    const double acc[] = {0.999, 0.944, 0.999, 0.831};
    const auto avg = average_accuracy(acc);
    o.expect(near(avg, 0.943, 5e-4), "average " + std::to_string(avg));

    // Families with 7, 3, 5 and 11 samples and 6, 1, 5 and 4 correct.
    std::vector<QaRecord> gt;
    std::vector<PredictionRecord> pred;
    const std::pair<const char*, int> fam[] = {{"presence", 7}, {"landcover", 3}, {"area", 5}, {"comparison", 11}};
    const int correct[] = {6, 1, 5, 4};
    for (int f = 0; f < 4; ++f)
        for (int i = 0; i < fam[f].second; ++i) {
            const std::string id = std::string(fam[f].first) + std::to_string(i);
            const std::string sub = f == 3 ? "absolute" : "";
            const std::string answer = f == 0 ? "yes" : f == 2 ? "0m²" : "pastures";
            gt.push_back(testing::make_record(id, fam[f].first, answer, sub,
                                              f == 0 || f == 2 ? std::optional<std::string>("pastures")
                                                               : std::nullopt));
            const std::string wrong = f == 0 ? "no" : f == 2 ? "1-5000m²" : "salines";
            pred.push_back({id, {i < correct[f] ? answer : wrong}, {}});
        }
    const auto r = vqa_metrics(pred, gt);
    const double weighted = (6.0 + 1 + 5 + 4) / (7 + 3 + 5 + 11);
    o.expect(r.overall.rate() == weighted, "overall " + std::to_string(r.overall.rate()));
    double expect_avg = (6.0 / 7 + 1.0 / 3 + 5.0 / 5 + 4.0 / 11) / 4;
    o.expect(near(r.average_accuracy, expect_avg, 1e-15), "fixture average");
    return o;
}

Outcome text_codecs()
{
    Outcome o;
    const LabelSpace toy(Nomenclature::parse("unlabeled=0\n0\tunlabeled\n1\tclass_A\n2\tclass_B\n"));
    SegmentationMap m{"x", 120, 120, std::vector<Category>(14400, 0)};
    for (int i = 0; i < 458; ++i)
        m.data[(i / 30) * 120 + i % 30] = 1;
    const auto s = render_summary(class_stats(m), toy);
    o.expect(s.text == "Table: (a1, class_A); Area: class_A: 45001-50000m²", "example: " + s.text);

    const LabelSpace clc(Nomenclature::clc_level3());
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
        const auto map = testing::random_map(seed + 50000, "s");
        const auto r = render_summary(class_stats(map), clc);
        o.expect(parse_summary(r.text, clc) == r.view, "round trip failed for seed " + std::to_string(seed));
    }

    const GridGeometry g;
    const std::vector<std::string> some{"b2", "a1"};
    o.expect(render_explanation(CellSet::from_labels(some, g), {AnswerLabel::yes()}, clc) ==
                 "Based on a1, b2, the answer is yes.",
             "some-cells explanation");
    o.expect(render_explanation(CellSet::all(16), {AnswerLabel::of_class(18)}, clc) ==
                 "Based on all cells, the answer is pastures.",
             "all-cells explanation");
    o.expect(render_explanation(CellSet{}, {AnswerLabel::no()}, clc) ==
                 "Based on the absence of a relevant area, the answer is no.",
             "no-cells explanation");
    return o;
}

Outcome template_round_trip()
{
    Outcome o;
    const auto nom = Nomenclature::clc_level3();
    const auto reg = load_registry(GRIDVQA_DATA_DIR "/templates.jsonl");
    const auto& classes = nom.answerable();
    std::size_t checked = 0;
    auto check = [&](const Template& t, const Binding& b, const std::string& text) {
        const auto matches = match_question(reg, text, nom);
        const TemplateMatch want{t.id, b};
        o.expect(std::find(matches.begin(), matches.end(), want) != matches.end(), "not recovered: " + text);
        ++checked;
    };
    for (const auto& t : reg.templates()) {
        const int slots = placeholder_count(t.qtype);
        const std::uint64_t bindings =
            slots == 0 ? 1 : slots == 1 ? classes.size() : classes.size() * (classes.size() - 1);
        const std::uint64_t total = bindings * variant_count(t);
        auto binding_of = [&](std::uint64_t i) {
            Binding b;
            b.direction = t.direction;
            if (slots >= 1)
                b.a = nom.name(classes[slots == 1 ? i : i / (classes.size() - 1)]);
            if (slots == 2) {
                auto j = i % (classes.size() - 1);
                if (j >= i / (classes.size() - 1))
                    ++j;
                b.b = nom.name(classes[j]);
            }
            return b;
        };
        if (total <= 10000) {
            for (std::uint64_t i = 0; i < bindings; ++i)
                for (std::uint64_t v = 0; v < variant_count(t); ++v) {
                    const auto b = binding_of(i);
                    check(t, b, expand_variant(t, b, v));
                }
        } else {
            Rng rng(derive_seed(77, t.id));
            for (int n = 0; n < 10000; ++n) {
                const auto b = binding_of(rng.index(bindings));
                check(t, b, expand_variant(t, b, rng.index(variant_count(t))));
            }
        }
    }
    if (o.ok)
        o.detail = std::to_string(checked) + " expansions";
    return o;
}

Outcome cell_correlation_checks()
{
    Outcome o;
    std::vector<CellSet> same;
    for (int i = 0; i < 200; ++i)
        same.push_back(i % 3 == 0 ? CellSet::all(16) : CellSet{});
    o.expect(cell_correlation(same) == 1.0, "identical predictions " + std::to_string(cell_correlation(same)));

    Rng rng(31);
    std::vector<CellSet> coins;
    for (int i = 0; i < 10000; ++i)
        coins.push_back(CellSet(rng.next() & 0xffff));
    const auto c = cell_correlation(coins);
    o.expect(std::abs(c) < 0.05, "coin flips " + std::to_string(c));
    return o;
}

long peak_rss_kb()
{
    rusage u{};
    getrusage(RUSAGE_SELF, &u);
    return u.ru_maxrss;
}

Outcome throughput()
{
    Outcome o;
    const auto dir = scratch_dir() / "throughput";
    fs::create_directories(dir / "rasters");
    nlohmann::json manifest = nlohmann::json::array();
    for (int i = 0; i < 10000; ++i) {
        const std::string id = "p" + std::to_string(i);
        const auto bytes = encode_pgm(testing::random_map(900000 + i, id));
        std::ofstream(dir / "rasters" / (id + ".pgm"), std::ios::binary)
            .write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        manifest.push_back({{"image_id", id}, {"path", "rasters/" + id + ".pgm"}, {"split", "train"}});
    }
    write_text_file(dir / "manifest.json", manifest.dump());

    const auto t0 = Clock::now();
    RunConfig cfg;
    cfg.templates = fs::path(GRIDVQA_DATA_DIR) / "templates.jsonl";
    cfg.seed = 1;
    const Toolkit kit(cfg);
    const int workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    std::uint64_t candidates = 0;
    {
        std::ofstream out(dir / "candidates.jsonl", std::ios::binary);
        generate_dataset(load_manifest(dir / "manifest.json"), kit, workers, [&](const QaRecord& r) {
            out << to_line(r) << '\n';
            ++candidates;
        });
    }
    const auto audit = balance_file(dir / "candidates.jsonl", dir / "balanced.jsonl", BalanceOptions{1}, workers);
    std::uint64_t kept = 0;
    for (const auto& [bucket, labels] : audit.buckets)
        for (const auto& [label, c] : labels)
            kept += c.after;
    const auto t = seconds_since(t0);
    const double gb = static_cast<double>(peak_rss_kb()) / (1024.0 * 1024.0);
    o.expect(t < 300.0, "runtime " + std::to_string(t) + " s");
    o.expect(gb < 2.0, "peak memory " + std::to_string(gb) + " GB");
    std::ostringstream d;
    d.precision(3);
    d << candidates << " candidates, " << kept << " kept, " << t << " s, peak " << gb << " GB, " << workers
      << " workers";
    if (o.ok)
        o.detail = d.str();
    else
        o.detail += " (" + d.str() + ")";
    fs::remove_all(dir);
    return o;
}

} // namespace

int main()
{
    const std::pair<const char*, std::function<Outcome()>> criteria[] = {
        {"bias anchors", bias_anchors},
        {"area binning", area_binning},
        {"oracle matches brute force", oracle_brute_force},
        {"balance invariants", balance_invariants},
        {"segmentation metric identity", seg_identity},
        {"vqa averaging anchor", vqa_averaging},
        {"text codecs", text_codecs},
        {"template round trip", template_round_trip},
        {"cell correlation", cell_correlation_checks},
        {"throughput", throughput},
    };
    int failures = 0;
    int n = 0;
    for (const auto& [name, fn] : criteria) {
        ++n;
        Outcome o;
        const auto t0 = Clock::now();
        try {
            o = fn();
        } catch (const std::exception& e) {
            o.ok = false;
            o.detail = std::string("exception: ") + e.what();
        }
        std::ostringstream line;
        line.precision(3);
        line << (o.ok ? "PASS" : "FAIL") << " " << n << " " << name << " [" << seconds_since(t0) << " s]";
        if (!o.detail.empty())
            line << ": " << o.detail;
        std::cout << line.str() << std::endl;
        failures += o.ok ? 0 : 1;
    }
    fs::remove_all(scratch_dir());
    return failures == 0 ? 0 : 1;
}
