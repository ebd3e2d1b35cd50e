#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "gridvqa/balance.hpp"
#include "gridvqa/bias.hpp"
#include "gridvqa/cli.hpp"
#include "gridvqa/eval.hpp"
#include "gridvqa/io.hpp"
#include "gridvqa/pipeline.hpp"
#include "gridvqa/summary.hpp"

namespace py = pybind11;
using namespace gridvqa;

namespace {

std::vector<QaRecord> parse_records(const std::vector<std::string>& lines)
{
    std::vector<QaRecord> out;
    out.reserve(lines.size());
    for (const auto& line : lines)
        out.push_back(qa_record_from_json(nlohmann::json::parse(line)));
    return out;
}

std::vector<std::string> to_lines(const std::vector<QaRecord>& records)
{
    std::vector<std::string> out;
    out.reserve(records.size());
    for (const auto& r : records)
        out.push_back(to_line(r));
    return out;
}

RunConfig config_from(const std::optional<std::string>& path)
{
    return path ? load_config(*path) : RunConfig{};
}

std::tuple<int, std::string, std::string> cli(std::vector<std::string> args)
{
    args.insert(args.begin(), "gridvqa");
    std::vector<const char*> argv;
    for (const auto& a : args)
        argv.push_back(a.c_str());
    std::ostringstream out, err;
    int status = 0;
    {
        py::gil_scoped_release release;
        status = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    }
    return {status, out.str(), err.str()};
}

} // namespace

PYBIND11_MODULE(_gridvqa, m)
{
    m.doc() = "Grid-grounded VQA dataset toolkit";

    py::register_exception<Error>(m, "GridVqaError", PyExc_ValueError);

    m.def("run_cli", &cli, py::arg("args"), "Runs a CLI subcommand; returns (status, stdout, stderr).");

    m.def(
        "area_label",
        [](std::uint64_t pixels, std::uint64_t m2_per_pixel) {
            const auto l = area_label(pixels, AreaScale{m2_per_pixel});
            return std::make_pair(l.index, l.text);
        },
        py::arg("pixel_count"), py::arg("m2_per_pixel") = 100);

    m.def("area_labels", [] {
        const AreaScale scale;
        std::vector<std::string> out;
        for (int i = 0; i < scale.label_count(); ++i)
            out.push_back(area_label_text(i, scale));
        return out;
    });

    m.def("default_nomenclature", [] {
        const auto nom = Nomenclature::clc_level3();
        std::vector<std::pair<int, std::string>> out;
        for (Category c : nom.ids())
            out.emplace_back(c, nom.name(c));
        return out;
    });

    m.def(
        "summarize",
        [](const std::string& raster, const std::optional<std::string>& config) {
            const Toolkit kit(config_from(config));
            const auto map = kit.load_raster(raster, "image");
            return render_summary(class_stats(map, kit.config().geometry.grid), kit.labels(),
                                  kit.config().thresholds)
                .text;
        },
        py::arg("raster"), py::arg("config") = py::none());

    m.def(
        "generate",
        [](const std::string& manifest, const std::string& config, int workers) {
            std::vector<std::string> out;
            py::gil_scoped_release release;
            const Toolkit kit(load_config(config));
            generate_dataset(load_manifest(manifest), kit, workers,
                             [&](const QaRecord& r) { out.push_back(to_line(r)); });
            return out;
        },
        py::arg("manifest"), py::arg("config"), py::arg("workers") = 1,
        "Candidate QA records as JSON lines.");

    m.def(
        "balance",
        [](const std::vector<std::string>& lines, std::uint64_t seed, bool per_subtype, int workers) {
            const auto records = parse_records(lines);
            BalanceOptions options;
            options.seed = seed;
            options.per_subtype_comparison = per_subtype;
            BalanceResult result;
            {
                py::gil_scoped_release release;
                result = balance_dataset(records, options, workers);
            }
            return std::make_pair(to_lines(result.kept), result.audit.to_json().dump());
        },
        py::arg("records"), py::arg("seed") = 0, py::arg("per_subtype") = false, py::arg("workers") = 1,
        "Balanced JSON lines and the audit as a JSON string.");

    m.def(
        "bias_report",
        [](const std::vector<std::string>& lines, bool recompute_average_lb) {
            BiasOptions options;
            options.recompute_average_lb = recompute_average_lb;
            return bias_report(parse_records(lines), options).to_json().dump();
        },
        py::arg("records"), py::arg("recompute_average_lb") = false);

    m.def(
        "bias_row",
        [](const std::map<std::string, std::uint64_t>& counts) {
            const auto r = bias_row("row", counts);
            return py::make_tuple(r.prior, r.uniform, r.lb);
        },
        py::arg("counts"), "(prior, uniform, lb) of an answer histogram.");

    m.def(
        "seg_metrics",
        [](const std::vector<std::vector<std::uint64_t>>& matrix, bool include_absent) {
            const int k = static_cast<int>(matrix.size());
            ConfusionMatrix cm(k);
            for (int g = 0; g < k; ++g) {
                if (static_cast<int>(matrix[g].size()) != k)
                    throw Error("confusion matrix must be square");
                for (int p = 0; p < k; ++p)
                    cm.add(g, p, matrix[g][p]);
            }
            SegOptions options;
            options.include_absent_classes = include_absent;
            return to_json(seg_metrics(cm, options)).dump();
        },
        py::arg("confusion"), py::arg("include_absent_classes") = false);

    m.def(
        "average_accuracy", [](const std::vector<double>& acc) { return average_accuracy(acc); },
        py::arg("per_family"));

    m.def(
        "cell_correlation",
        [](const std::vector<std::vector<std::string>>& cells) {
            const GridGeometry g;
            std::vector<CellSet> sets;
            for (const auto& c : cells)
                sets.push_back(CellSet::from_labels(c, g));
            return cell_correlation(sets, g.cell_count());
        },
        py::arg("cells"));
}
