#include "gridvqa/summary.hpp"

#include <algorithm>

namespace gridvqa {

namespace {

constexpr std::string_view kTable = "Table: ";
constexpr std::string_view kArea = "; Area: ";

} // namespace

SummaryView summary_view(const ClassStats& stats, const Nomenclature& nomenclature,
                         const Thresholds& thresholds, const AreaScale& scale)
{
    SummaryView view;
    const auto present = present_classes(stats, nomenclature, thresholds.image_px);
    const int cells = stats.geometry().cell_count();
    for (int i = 0; i < cells; ++i) {
        const CellId cell{static_cast<std::uint8_t>(i)};
        for (Category c : present) {
            const auto n = stats.cell_count(c, cell);
            if (n > 0 && n >= thresholds.cell_px)
                view.table.emplace_back(cell, c);
        }
    }
    for (Category c : present)
        view.area.emplace_back(c, area_label(stats.total(c), scale).index);
    return view;
}

std::string render_summary_text(const SummaryView& view, const LabelSpace& labels)
{
    const auto& nom = labels.nomenclature();
    std::string out(kTable);
    for (std::size_t i = 0; i < view.table.size(); ++i) {
        if (i > 0)
            out += ", ";
        out += '(';
        out += labels.geometry().label(view.table[i].first);
        out += ", ";
        out += nom.name(view.table[i].second);
        out += ')';
    }
    out += kArea;
    for (std::size_t i = 0; i < view.area.size(); ++i) {
        if (i > 0)
            out += "; ";
        out += nom.name(view.area[i].first);
        out += ": ";
        out += area_label_text(view.area[i].second, labels.area_scale());
    }
    return out;
}

SummaryText render_summary(const ClassStats& stats, const LabelSpace& labels, const Thresholds& thresholds)
{
    SummaryText s;
    s.view = summary_view(stats, labels.nomenclature(), thresholds, labels.area_scale());
    s.text = render_summary_text(s.view, labels);
    return s;
}

// ---------------------------------------------------------------------------

namespace {

class SummaryParser {
public:
    SummaryParser(std::string_view text, const LabelSpace& labels) : text_(text), labels_(labels) {}

    SummaryView run()
    {
        SummaryView view;
        expect(kTable, "missing \"Table: \" header");
        bool first = true;
        while (!at(kArea)) {
            if (!first)
                expect(", ", "expected \", \" or \"; Area: \"");
            first = false;
            expect("(", "expected \"(\"");
            const auto comma = text_.find(", ", pos_);
            if (comma == std::string_view::npos)
                fail("unterminated table entry");
            const CellId cell = labels_.geometry().parse_label(text_.substr(pos_, comma - pos_));
            pos_ = comma + 2;
            const Category c = class_name(")");
            expect(")", "expected \")\"");
            view.table.emplace_back(cell, c);
        }
        expect(kArea, "missing \"; Area: \" separator");
        first = true;
        while (pos_ < text_.size()) {
            if (!first)
                expect("; ", "expected \"; \" between area entries");
            first = false;
            const Category c = class_name(": ");
            expect(": ", "expected \": \" after class name");
            auto end = text_.find("; ", pos_);
            if (end == std::string_view::npos)
                end = text_.size();
            const auto label = text_.substr(pos_, end - pos_);
            const auto bin = parse_area_label(label, labels_.area_scale());
            if (!bin)
                fail("unknown area label \"" + std::string(label) + "\"");
            view.area.emplace_back(c, *bin);
            pos_ = end;
        }
        std::sort(view.table.begin(), view.table.end());
        std::sort(view.area.begin(), view.area.end());
        return view;
    }

private:
    bool at(std::string_view s) const { return text_.compare(pos_, s.size(), s) == 0; }

    void expect(std::string_view s, const char* message)
    {
        if (!at(s))
            fail(message);
        pos_ += s.size();
    }

    [[noreturn]] void fail(const std::string& message) const
    {
        throw Error("malformed summary at offset " + std::to_string(pos_) + ": " + message);
    }

    // Longest class name at pos_ that is followed by `terminator`.
    Category class_name(std::string_view terminator)
    {
        const auto& nom = labels_.nomenclature();
        for (Category c : nom.longest_first()) {
            const auto& name = nom.name(c);
            if (at(name) && text_.compare(pos_ + name.size(), terminator.size(), terminator) == 0) {
                pos_ += name.size();
                return c;
            }
        }
        const auto end = text_.find(terminator, pos_);
        throw Error("unknown class name \"" +
                    std::string(text_.substr(pos_, end == std::string_view::npos ? std::string_view::npos : end - pos_)) +
                    "\" in summary");
    }

    std::string_view text_;
    const LabelSpace& labels_;
    std::size_t pos_ = 0;
};

} // namespace

SummaryView parse_summary(std::string_view text, const LabelSpace& labels)
{
    return SummaryParser(text, labels).run();
}

// ---------------------------------------------------------------------------

std::string render_explanation(CellSet cells, std::vector<AnswerLabel> answers, const LabelSpace& labels)
{
    if (answers.empty())
        throw Error("explanation needs at least one answer");
    std::sort(answers.begin(), answers.end());
    answers.erase(std::unique(answers.begin(), answers.end()), answers.end());

    const auto& geom = labels.geometry();
    std::string out = "Based on ";
    if (cells.size() == geom.cell_count()) {
        out += "all cells";
    } else if (cells.empty()) {
        out += "the absence of a relevant area";
    } else {
        bool first = true;
        for (CellId c : cells.cells()) {
            if (!first)
                out += ", ";
            first = false;
            out += geom.label(c);
        }
    }
    out += ", the answer is ";
    for (std::size_t i = 0; i < answers.size(); ++i) {
        if (i > 0)
            out += ", ";
        out += labels.render(answers[i]);
    }
    out += '.';
    return out;
}

} // namespace gridvqa
