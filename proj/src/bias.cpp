#include "gridvqa/bias.hpp"

#include <algorithm>
#include <sstream>

namespace gridvqa {

double uniform_score(std::uint64_t a_unique)
{
    if (a_unique == 0)
        throw Error("uniform score needs at least one distinct answer");
    return 1.0 / static_cast<double>(a_unique);
}

double prior_score(std::uint64_t a_common, std::uint64_t n)
{
    if (n == 0)
        throw Error("prior score of an empty sample");
    if (a_common > n)
        throw Error("most common count exceeds sample count");
    return static_cast<double>(a_common) / static_cast<double>(n);
}

double lb_score(double prior, double uniform)
{
    if (!(uniform > 0.0 && uniform <= 1.0))
        throw Error("uniform score must be in (0, 1]");
    if (!(prior >= 0.0 && prior <= 1.0))
        throw Error("prior score must be in [0, 1]");
    if (uniform == 1.0)
        return 0.0;  // a single possible answer carries no bias
    return std::clamp((prior - uniform) / (1.0 - uniform), 0.0, 1.0);
}

BiasRow bias_row(std::string name, const std::map<std::string, std::uint64_t>& counts)
{
    BiasRow r;
    r.row = std::move(name);
    std::uint64_t n = 0;
    std::uint64_t unique = 0;
    std::uint64_t common = 0;
    const std::string* most = nullptr;
    for (const auto& [label, c] : counts) {
        if (c == 0)
            continue;
        n += c;
        ++unique;
        if (c > common) {  // map order makes the first maximum the smallest label
            common = c;
            most = &label;
        }
    }
    if (n == 0)
        throw Error("bias row \"" + r.row + "\" has no samples");
    r.n = n;
    r.a_unique = unique;
    r.a_common = common;
    r.most_common = *most;
    r.prior = prior_score(common, n);
    r.uniform = uniform_score(unique);
    r.lb = lb_score(r.prior, r.uniform);
    return r;
}

void BiasCounts::add(const QaRecord& r)
{
    auto& family = answers[r.qtype];
    for (const auto& a : r.answers)
        ++family[a];
    for (const auto& c : r.cells)
        ++cells[c];
    ++records;
}

void BiasCounts::merge(const BiasCounts& other)
{
    for (const auto& [family, labels] : other.answers)
        for (const auto& [label, n] : labels)
            answers[family][label] += n;
    for (const auto& [cell, n] : other.cells)
        cells[cell] += n;
    records += other.records;
}

BiasReport bias_report(const BiasCounts& counts, const BiasOptions& options)
{
    if (counts.records == 0)
        throw Error("bias report of an empty dataset");
    BiasReport report;

    static const char* const kFamilies[] = {"presence", "landcover", "area", "comparison"};
    std::vector<BiasRow> families;
    std::map<std::string, std::uint64_t> pooled;
    for (const char* f : kFamilies) {
        auto it = counts.answers.find(f);
        if (it == counts.answers.end())
            continue;
        std::uint64_t total = 0;
        for (const auto& [label, n] : it->second) {
            pooled[label] += n;
            total += n;
        }
        if (total > 0)
            families.push_back(bias_row(f, it->second));
    }
    for (const auto& [family, labels] : counts.answers)
        if (std::find(std::begin(kFamilies), std::end(kFamilies), family) == std::end(kFamilies))
            throw Error("unknown question family \"" + family + "\"");

    report.rows = families;
    report.rows.push_back(bias_row("All Answers", pooled));
    if (!counts.cells.empty())
        report.rows.push_back(bias_row("All Cells", counts.cells));

    BiasRow average;
    average.row = "Average";
    BiasRow overall;
    overall.row = "Overall";
    BiasRow overall_lb;
    overall_lb.row = "Overall (weighted lb)";
    double weight = 0;
    for (const auto& f : families) {
        const double nf = static_cast<double>(*f.n);
        average.prior += f.prior;
        average.uniform += f.uniform;
        average.lb += f.lb;
        overall.prior += static_cast<double>(*f.a_common);
        overall.uniform += nf * f.uniform;
        overall_lb.lb += nf * f.lb;
        weight += nf;
    }
    const double k = static_cast<double>(families.size());
    average.prior /= k;
    average.uniform /= k;
    average.lb = options.recompute_average_lb ? lb_score(average.prior, average.uniform) : average.lb / k;
    overall.prior /= weight;
    overall.uniform /= weight;
    overall.lb = lb_score(overall.prior, overall.uniform);
    overall_lb.prior = overall.prior;
    overall_lb.uniform = overall.uniform;
    overall_lb.lb /= weight;
    report.rows.push_back(average);
    report.rows.push_back(overall);
    report.rows.push_back(overall_lb);
    return report;
}

BiasReport bias_report(std::span<const QaRecord> records, const BiasOptions& options)
{
    BiasCounts counts;
    for (const auto& r : records)
        counts.add(r);
    return bias_report(counts, options);
}

const BiasRow& BiasReport::row(std::string_view name) const
{
    for (const auto& r : rows)
        if (r.row == name)
            return r;
    throw Error("bias report has no row \"" + std::string(name) + "\"");
}

namespace {

std::string fixed5(double v)
{
    std::ostringstream ss;
    ss.setf(std::ios::fixed);
    ss.precision(5);
    ss << v;
    return ss.str();
}

template <typename T>
std::string opt(const std::optional<T>& v)
{
    if (!v)
        return "";
    if constexpr (std::is_same_v<T, std::string>)
        return *v;
    else
        return std::to_string(*v);
}

} // namespace

std::string BiasReport::to_tsv() const
{
    std::string out = "row\tN\tA_unique\tA_common\tmost_common\tprior\tuniform\tlb_score\n";
    for (const auto& r : rows)
        out += r.row + "\t" + opt(r.n) + "\t" + opt(r.a_unique) + "\t" + opt(r.a_common) + "\t" +
               opt(r.most_common) + "\t" + fixed5(r.prior) + "\t" + fixed5(r.uniform) + "\t" +
               fixed5(r.lb) + "\n";
    return out;
}

nlohmann::ordered_json BiasReport::to_json() const
{
    auto j = nlohmann::ordered_json::array();
    for (const auto& r : rows) {
        auto o = nlohmann::ordered_json::object();
        o["row"] = r.row;
        o["N"] = r.n ? nlohmann::ordered_json(*r.n) : nlohmann::ordered_json(nullptr);
        o["A_unique"] = r.a_unique ? nlohmann::ordered_json(*r.a_unique) : nlohmann::ordered_json(nullptr);
        o["A_common"] = r.a_common ? nlohmann::ordered_json(*r.a_common) : nlohmann::ordered_json(nullptr);
        o["most_common"] = r.most_common ? nlohmann::ordered_json(*r.most_common) : nlohmann::ordered_json(nullptr);
        o["prior"] = r.prior;
        o["uniform"] = r.uniform;
        o["lb_score"] = r.lb;
        j.push_back(std::move(o));
    }
    return j;
}

} // namespace gridvqa
