#include "gridvqa/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include "gridvqa/balance.hpp"
#include "gridvqa/bias.hpp"
#include "gridvqa/eval.hpp"
#include "gridvqa/io.hpp"
#include "gridvqa/pipeline.hpp"
#include "gridvqa/summary.hpp"

namespace gridvqa {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;
namespace fs = std::filesystem;

RunConfig config_or_default(const std::string& path)
{
    return path.empty() ? RunConfig{} : load_config(path);
}

void emit(const std::string& path, const std::string& text, std::ostream& out)
{
    if (path.empty())
        out << text;
    else
        write_text_file(path, text);
}

std::string image_id_for(const std::string& given, const fs::path& raster)
{
    return given.empty() ? raster.stem().string() : given;
}

ordered_json answer_json(const StructuredQuestion& sq, const OracleAnswer& a, const LabelSpace& labels)
{
    const auto& nom = labels.nomenclature();
    ordered_json j;
    j["template_id"] = sq.template_id.empty() ? json(nullptr) : json(sq.template_id);
    j["qtype"] = family_name(sq.qtype);
    j["subtype"] = subtype_name(sq.qtype).empty() ? json(nullptr) : json(subtype_name(sq.qtype));
    j["class_a"] = sq.class_a ? json(nom.name(*sq.class_a)) : json(nullptr);
    j["class_b"] = sq.class_b ? json(nom.name(*sq.class_b)) : json(nullptr);
    j["direction"] = sq.direction == Direction::none ? json(nullptr) : json(to_string(sq.direction));
    j["answers"] = json::array();
    for (const auto& l : a.answers)
        j["answers"].push_back(labels.render(l));
    j["cells"] = a.cells.labels(labels.geometry());
    j["explanation"] = a.answers.empty() ? json(nullptr) : json(render_explanation(a.cells, a.answers, labels));
    return j;
}

ordered_json binding_json(const TemplateMatch& m)
{
    ordered_json j;
    j["template_id"] = m.template_id;
    j["class_a"] = m.binding.a ? json(*m.binding.a) : json(nullptr);
    j["class_b"] = m.binding.b ? json(*m.binding.b) : json(nullptr);
    j["direction"] = m.binding.direction == Direction::none ? json(nullptr) : json(to_string(m.binding.direction));
    return j;
}

// ---------------------------------------------------------------------------

struct GenerateArgs {
    std::string manifest, config, out;
    int workers = 0;
    std::optional<std::uint64_t> seed;
};

void cmd_generate(const GenerateArgs& a)
{
    auto config = load_config(a.config);
    if (a.seed)
        config.seed = *a.seed;
    const Toolkit toolkit(config);
    const auto manifest = load_manifest(a.manifest);
    AtomicWriter writer(a.out);
    generate_dataset(manifest, toolkit, a.workers > 0 ? a.workers : config.workers,
                     [&](const QaRecord& r) { writer.write_line(to_line(r)); });
    writer.commit();
}

struct BalanceArgs {
    std::string in, out, audit;
    std::uint64_t seed = 0;
    int workers = 1;
    bool per_subtype = false;
};

void cmd_balance(const BalanceArgs& a)
{
    BalanceOptions options;
    options.seed = a.seed;
    options.per_subtype_comparison = a.per_subtype;
    const auto audit = balance_file(a.in, a.out, options, a.workers);
    if (!a.audit.empty())
        write_text_file(a.audit, audit.to_json().dump(2) + "\n");
}

struct BiasArgs {
    std::string in, out, json_out;
    bool recompute_average = false;
};

void cmd_bias(const BiasArgs& a, std::ostream& out)
{
    BiasCounts counts;
    read_qa_jsonl(a.in, [&](QaRecord&& r) { counts.add(r); });
    BiasOptions options;
    options.recompute_average_lb = a.recompute_average;
    const auto report = bias_report(counts, options);
    emit(a.out, report.to_tsv(), out);
    if (!a.json_out.empty())
        write_text_file(a.json_out, report.to_json().dump(2) + "\n");
}

struct RasterArgs {
    std::string raster, config, image_id, out;
};

void cmd_summarize(const RasterArgs& a, std::ostream& out)
{
    const Toolkit toolkit(config_or_default(a.config));
    const auto map = toolkit.load_raster(a.raster, image_id_for(a.image_id, a.raster));
    const auto stats = class_stats(map, toolkit.config().geometry.grid);
    emit(a.out, render_summary(stats, toolkit.labels(), toolkit.config().thresholds).text + "\n", out);
}

struct OracleArgs {
    RasterArgs raster;
    std::string question, structured;
};

void cmd_oracle(const OracleArgs& a, std::ostream& out)
{
    if (a.question.empty() && a.structured.empty())
        throw Error("oracle: one of --question or --structured is required");
    const Toolkit toolkit(config_or_default(a.raster.config));
    const auto& labels = toolkit.labels();
    const auto& cfg = toolkit.config();
    const auto map = toolkit.load_raster(a.raster.raster, image_id_for(a.raster.image_id, a.raster.raster));
    const auto stats = class_stats(map, cfg.geometry.grid);

    std::vector<StructuredQuestion> questions;
    if (!a.structured.empty()) {
        json j;
        try {
            j = json::parse(a.structured);
        } catch (const json::exception& e) {
            throw Error(std::string("structured question: ") + e.what());
        }
        QaRecord rec;
        auto opt = [&](const char* key) -> std::optional<std::string> {
            if (!j.contains(key) || j.at(key).is_null())
                return std::nullopt;
            return j.at(key).get<std::string>();
        };
        rec.qtype = j.at("qtype").get<std::string>();
        rec.subtype = opt("subtype").value_or("");
        rec.class_a = opt("class_a");
        rec.class_b = opt("class_b");
        rec.direction = opt("direction");
        questions.push_back(from_record(rec, labels).question);
    } else {
        const auto& registry = toolkit.registry();
        const auto matches = match_question(registry, a.question, labels.nomenclature());
        if (matches.empty())
            throw Error("question matches no template: \"" + a.question + "\"");
        for (const auto& m : matches)
            questions.push_back(question_from_match(m, registry, labels.nomenclature(), a.question));
    }

    ordered_json result = json::array();
    for (const auto& sq : questions)
        result.push_back(answer_json(sq, oracle_answer(stats, sq, labels.nomenclature(), cfg.thresholds,
                                                       labels.area_scale()),
                                     labels));
    emit(a.raster.out, result.dump(2) + "\n", out);
}

struct EvaluateArgs {
    std::string gt, pred, config, seg, out, tsv;
    bool include_absent = false;
};

void cmd_evaluate(const EvaluateArgs& a, std::ostream& out)
{
    const Toolkit toolkit(config_or_default(a.config));
    ordered_json report;
    std::string tsv;
    if (!a.gt.empty()) {
        if (a.pred.empty())
            throw Error("--gt requires --pred");
        const auto gt = read_qa_jsonl(a.gt);
        const auto pred = read_predictions_jsonl(a.pred);
        const auto vqa = vqa_metrics(pred, gt);
        const auto cells = cell_metrics(pred, gt, toolkit.config().geometry);
        report["vqa"] = to_json(vqa);
        report["cells"] = to_json(cells);
        tsv += vqa_tsv(vqa) + "\n" + cell_tsv(cells);
    }
    if (!a.seg.empty()) {
        // Pairs manifest: [{image_id, gt, pred}] with paths relative to it.
        const fs::path base = fs::path(a.seg).parent_path();
        const json pairs = json::parse(read_text_file(a.seg));
        ConfusionMatrix cm;
        for (const auto& p : pairs) {
            const auto id = p.at("image_id").get<std::string>();
            auto path = [&](const char* key) {
                fs::path f(p.at(key).get<std::string>());
                return f.is_absolute() ? f : base / f;
            };
            confusion_accumulate(cm, toolkit.load_raster(path("gt"), id), toolkit.load_raster(path("pred"), id));
        }
        SegOptions options;
        options.include_absent_classes = a.include_absent;
        const auto seg = seg_metrics(cm, options);
        report["segmentation"] = to_json(seg);
        if (!tsv.empty())
            tsv += "\n";
        tsv += seg_tsv(seg);
    }
    if (report.empty())
        throw Error("evaluate needs --gt/--pred or --seg");
    emit(a.out, report.dump(2) + "\n", out);
    if (!a.tsv.empty())
        write_text_file(a.tsv, tsv);
}

struct ParseArgs {
    std::string config, question, out;
};

void cmd_parse_question(const ParseArgs& a, std::ostream& out)
{
    const Toolkit toolkit(load_config(a.config));
    const auto matches = match_question(toolkit.registry(), a.question, toolkit.nomenclature());
    if (matches.empty())
        throw Error("question matches no template: \"" + a.question + "\"");
    ordered_json result = json::array();
    for (const auto& m : matches)
        result.push_back(binding_json(m));
    emit(a.out, result.dump(2) + "\n", out);
}

} // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Grid-grounded remote-sensing VQA dataset toolkit"};
    app.require_subcommand(1);

    GenerateArgs gen;
    auto* generate = app.add_subcommand("generate", "Generate candidate QA instances");
    generate->add_option("--manifest", gen.manifest, "Dataset manifest JSON")->required();
    generate->add_option("--config", gen.config, "Run configuration JSON")->required();
    generate->add_option("--out", gen.out, "Output QA JSONL")->required();
    generate->add_option("--workers", gen.workers, "Worker threads (default from config)");
    generate->add_option("--seed", gen.seed, "Override the configured seed");

    BalanceArgs bal;
    auto* balance = app.add_subcommand("balance", "Balance a candidate QA JSONL file");
    balance->add_option("--in", bal.in, "Input QA JSONL")->required();
    balance->add_option("--out", bal.out, "Balanced QA JSONL")->required();
    balance->add_option("--seed", bal.seed, "Subsampling seed");
    balance->add_option("--audit", bal.audit, "Audit JSON with before/after counts");
    balance->add_option("--workers", bal.workers, "Worker threads")->check(CLI::PositiveNumber);
    balance->add_flag("--per-subtype", bal.per_subtype, "Balance comparison answers per subtype");

    BiasArgs bias;
    auto* bias_cmd = app.add_subcommand("bias", "Answer-distribution bias report");
    bias_cmd->add_option("--in", bias.in, "QA JSONL")->required();
    bias_cmd->add_option("--out", bias.out, "TSV report (stdout when omitted)");
    bias_cmd->add_option("--json", bias.json_out, "JSON report");
    bias_cmd->add_flag("--recompute-average-lb", bias.recompute_average,
                       "Average row lb from averaged prior and uniform");

    RasterArgs sum;
    auto* summarize = app.add_subcommand("summarize", "Render the summary text of a raster");
    summarize->add_option("--raster", sum.raster, "Segmentation map (binary PGM)")->required();
    summarize->add_option("--config", sum.config, "Run configuration JSON");
    summarize->add_option("--image-id", sum.image_id, "Image id (default: file stem)");
    summarize->add_option("--out", sum.out, "Output file (stdout when omitted)");

    OracleArgs orc;
    auto* oracle = app.add_subcommand("oracle", "Answer a question from a segmentation map");
    oracle->add_option("--raster", orc.raster.raster, "Segmentation map (binary PGM)")->required();
    oracle->add_option("--config", orc.raster.config, "Run configuration JSON");
    oracle->add_option("--image-id", orc.raster.image_id, "Image id (default: file stem)");
    oracle->add_option("--out", orc.raster.out, "Output JSON (stdout when omitted)");
    auto* qopt = oracle->add_option("--question", orc.question, "Question text");
    auto* sopt = oracle->add_option("--structured", orc.structured,
                                    "Structured question JSON {qtype, subtype, class_a, class_b, direction}");
    qopt->excludes(sopt);

    EvaluateArgs ev;
    auto* evaluate = app.add_subcommand("evaluate", "Score predictions against ground truth");
    evaluate->add_option("--gt", ev.gt, "Ground-truth QA JSONL");
    evaluate->add_option("--pred", ev.pred, "Prediction JSONL");
    evaluate->add_option("--seg", ev.seg, "Segmentation pairs JSON [{image_id, gt, pred}]");
    evaluate->add_option("--config", ev.config, "Run configuration JSON");
    evaluate->add_option("--out", ev.out, "JSON report (stdout when omitted)");
    evaluate->add_option("--tsv", ev.tsv, "TSV report");
    evaluate->add_flag("--include-absent-classes", ev.include_absent,
                       "Average segmentation scores over every class");

    ParseArgs par;
    auto* parse = app.add_subcommand("parse-question", "Recover template and binding from question text");
    parse->add_option("--config", par.config, "Run configuration JSON")->required();
    parse->add_option("--question", par.question, "Question text")->required();
    parse->add_option("--out", par.out, "Output JSON (stdout when omitted)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err);
    }

    try {
        if (*generate)
            cmd_generate(gen);
        else if (*balance)
            cmd_balance(bal);
        else if (*bias_cmd)
            cmd_bias(bias, out);
        else if (*summarize)
            cmd_summarize(sum, out);
        else if (*oracle)
            cmd_oracle(orc, out);
        else if (*evaluate)
            cmd_evaluate(ev, out);
        else if (*parse)
            cmd_parse_question(par, out);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

} // namespace gridvqa
