#include "gridvqa/templates.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace gridvqa {

namespace {

struct QTypeName {
    QType q;
    std::string_view name;
};

constexpr QTypeName kQTypeNames[] = {
    {QType::presence, "presence"},
    {QType::landcover, "landcover"},
    {QType::area, "area"},
    {QType::comp_absolute, "comp_absolute"},
    {QType::comp_relative_class, "comp_relative_class"},
    {QType::comp_relative_yesno, "comp_relative_yesno"},
};

struct DirectionName {
    Direction d;
    std::string_view name;
};

constexpr DirectionName kDirectionNames[] = {
    {Direction::none, "none"},         {Direction::larger, "larger"},
    {Direction::smaller, "smaller"},   {Direction::more, "more"},
    {Direction::less, "less"},         {Direction::dominant, "dominant"},
    {Direction::minimal, "minimal"},
};

} // namespace

std::string_view to_string(QType q)
{
    for (const auto& e : kQTypeNames)
        if (e.q == q)
            return e.name;
    return "?";
}

QType parse_qtype(std::string_view s)
{
    for (const auto& e : kQTypeNames)
        if (e.name == s)
            return e.q;
    throw Error("unknown question type \"" + std::string(s) + "\"");
}

bool is_comparison(QType q)
{
    return q == QType::comp_absolute || q == QType::comp_relative_class ||
           q == QType::comp_relative_yesno;
}

int placeholder_count(QType q)
{
    switch (q) {
    case QType::presence:
    case QType::area:
        return 1;
    case QType::comp_relative_class:
    case QType::comp_relative_yesno:
        return 2;
    case QType::landcover:
    case QType::comp_absolute:
        return 0;
    }
    return 0;
}

std::string_view to_string(Direction d)
{
    for (const auto& e : kDirectionNames)
        if (e.d == d)
            return e.name;
    return "?";
}

Direction parse_direction(std::string_view s)
{
    for (const auto& e : kDirectionNames)
        if (e.name == s)
            return e.d;
    throw Error("unknown direction \"" + std::string(s) + "\"");
}

std::vector<Direction> directions_for(QType q)
{
    switch (q) {
    case QType::comp_absolute:
        return {Direction::dominant, Direction::minimal};
    case QType::comp_relative_class:
        return {Direction::larger, Direction::smaller};
    case QType::comp_relative_yesno:
        return {Direction::more, Direction::less};
    default:
        return {};
    }
}

Direction mirror(Direction d)
{
    switch (d) {
    case Direction::larger: return Direction::smaller;
    case Direction::smaller: return Direction::larger;
    case Direction::more: return Direction::less;
    case Direction::less: return Direction::more;
    case Direction::dominant: return Direction::minimal;
    case Direction::minimal: return Direction::dominant;
    case Direction::none: return Direction::none;
    }
    return d;
}

// ---------------------------------------------------------------------------

void validate_template(const Template& t)
{
    const std::string where = "template \"" + t.id + "\": ";
    if (t.id.empty())
        throw Error("template with empty id");
    if (t.components.empty())
        throw Error(where + "no components");
    if (t.components.size() > Template::kMaxComponents)
        throw Error(where + "component limit exceeded (" + std::to_string(t.components.size()) +
                    " > " + std::to_string(Template::kMaxComponents) + ")");

    int slots_a = 0;
    int slots_b = 0;
    for (const auto& c : t.components) {
        if (c.is_slot()) {
            (*c.slot == Slot::A ? slots_a : slots_b) += 1;
            continue;
        }
        if (c.options.empty())
            throw Error(where + "empty option set");
        for (const auto& o : c.options) {
            if (o.empty() || o.front() == ' ' || o.back() == ' ' ||
                o.find("  ") != std::string::npos)
                throw Error(where + "option \"" + o + "\" is empty or has stray spaces");
        }
    }

    const int expected = placeholder_count(t.qtype);
    const bool ok = expected == 0   ? (slots_a == 0 && slots_b == 0)
                    : expected == 1 ? (slots_a == 1 && slots_b == 0)
                                    : (slots_a == 1 && slots_b == 1);
    if (!ok)
        throw Error(where + "placeholder-count mismatch for " + std::string(to_string(t.qtype)));

    const auto dirs = directions_for(t.qtype);
    if (dirs.empty() ? t.direction != Direction::none
                     : std::find(dirs.begin(), dirs.end(), t.direction) == dirs.end())
        throw Error(where + "direction \"" + std::string(to_string(t.direction)) +
                    "\" invalid for " + std::string(to_string(t.qtype)));
}

TemplateRegistry::TemplateRegistry(std::vector<Template> templates) : templates_(std::move(templates))
{
    for (const auto& t : templates_)
        validate_template(t);
    std::sort(templates_.begin(), templates_.end(),
              [](const Template& a, const Template& b) { return a.id < b.id; });
    for (std::size_t i = 1; i < templates_.size(); ++i)
        if (templates_[i].id == templates_[i - 1].id)
            throw Error("duplicate id \"" + templates_[i].id + "\"");
}

const Template* TemplateRegistry::find(std::string_view id) const
{
    auto it = std::lower_bound(templates_.begin(), templates_.end(), id,
                               [](const Template& t, std::string_view v) { return t.id < v; });
    if (it == templates_.end() || it->id != id)
        return nullptr;
    return &*it;
}

std::vector<const Template*> TemplateRegistry::select(QType q, Direction d) const
{
    std::vector<const Template*> out;
    for (const auto& t : templates_)
        if (t.qtype == q && t.direction == d)
            out.push_back(&t);
    return out;
}

TemplateRegistry parse_registry(std::string_view text)
{
    using nlohmann::json;
    std::vector<Template> templates;
    std::size_t pos = 0;
    int line_no = 0;
    while (pos < text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string_view::npos)
            eol = text.size();
        const std::string_view line = text.substr(pos, eol - pos);
        pos = eol + 1;
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string_view::npos)
            continue;

        const std::string where = "template registry line " + std::to_string(line_no) + ": ";
        try {
            const json j = json::parse(line);
            Template t;
            t.id = j.at("id").get<std::string>();
            t.qtype = parse_qtype(j.at("qtype").get<std::string>());
            if (j.contains("direction") && !j.at("direction").is_null())
                t.direction = parse_direction(j.at("direction").get<std::string>());
            for (const auto& cj : j.at("components")) {
                Component c;
                if (cj.contains("slot")) {
                    const auto s = cj.at("slot").get<std::string>();
                    if (s != "A" && s != "B")
                        throw Error("slot must be \"A\" or \"B\"");
                    c.slot = s == "A" ? Slot::A : Slot::B;
                } else {
                    c.options = cj.at("options").get<std::vector<std::string>>();
                }
                t.components.push_back(std::move(c));
            }
            validate_template(t);
            templates.push_back(std::move(t));
        } catch (const json::exception& e) {
            throw Error(where + e.what());
        } catch (const Error& e) {
            throw Error(where + e.what());
        }
    }
    return TemplateRegistry(std::move(templates));
}

TemplateRegistry load_registry(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error("cannot open template registry " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_registry(ss.str());
}

// ---------------------------------------------------------------------------

namespace {

const std::string& bound_name(const Template& t, const Binding& b, Slot s)
{
    const auto& v = s == Slot::A ? b.a : b.b;
    if (!v)
        throw Error("template \"" + t.id + "\": missing binding for slot " + (s == Slot::A ? "A" : "B"));
    return *v;
}

void check_binding(const Template& t, const Binding& b)
{
    const int n = placeholder_count(t.qtype);
    if (n < 1 && b.a)
        throw Error("template \"" + t.id + "\": unexpected binding for slot A");
    if (n < 2 && b.b)
        throw Error("template \"" + t.id + "\": unexpected binding for slot B");
}

} // namespace

std::string expand(const Template& t, const Binding& binding, Rng& rng)
{
    check_binding(t, binding);
    std::string out;
    for (const auto& c : t.components) {
        if (!out.empty())
            out += ' ';
        if (c.is_slot())
            out += bound_name(t, binding, *c.slot);
        else if (c.options.size() == 1)
            out += c.options.front();
        else
            out += c.options[rng.index(c.options.size())];
    }
    return out;
}

std::string expand_variant(const Template& t, const Binding& binding, std::uint64_t variant)
{
    check_binding(t, binding);
    const std::uint64_t total = variant_count(t);
    if (variant >= total)
        throw Error("template \"" + t.id + "\": variant " + std::to_string(variant) + " out of range");
    // Decode the mixed-radix digits from least significant (last component).
    std::vector<std::size_t> choice(t.components.size(), 0);
    for (std::size_t i = t.components.size(); i-- > 0;) {
        const auto& c = t.components[i];
        if (c.is_slot())
            continue;
        choice[i] = static_cast<std::size_t>(variant % c.options.size());
        variant /= c.options.size();
    }
    std::string out;
    for (std::size_t i = 0; i < t.components.size(); ++i) {
        const auto& c = t.components[i];
        if (!out.empty())
            out += ' ';
        out += c.is_slot() ? bound_name(t, binding, *c.slot) : c.options[choice[i]];
    }
    return out;
}

std::uint64_t variant_count(const Template& t)
{
    std::uint64_t n = 1;
    for (const auto& c : t.components) {
        if (c.is_slot())
            continue;
        if (n > UINT64_MAX / c.options.size())
            throw Error("template \"" + t.id + "\": variant count overflows");
        n *= c.options.size();
    }
    return n;
}

std::uint64_t variant_count(const TemplateRegistry& registry)
{
    std::uint64_t n = 0;
    for (const auto& t : registry.templates())
        n += variant_count(t);
    return n;
}

// ---------------------------------------------------------------------------

namespace {

class Matcher {
public:
    Matcher(const Template& t, std::string_view text, const Nomenclature& nom,
            std::vector<TemplateMatch>& out)
        : t_(t), text_(text), nom_(nom), out_(out)
    {
    }

    void run()
    {
        current_ = Binding{};
        current_.direction = t_.direction;
        step(0, 0);
    }

private:
    // Tries `piece` at `pos` for component `i`; on success continues with i+1.
    bool accept(std::size_t i, std::size_t pos, std::string_view piece) const
    {
        if (text_.compare(pos, piece.size(), piece) != 0)
            return false;
        const std::size_t next = pos + piece.size();
        if (i + 1 == t_.components.size())
            return next == text_.size();
        return next < text_.size() && text_[next] == ' ';
    }

    void step(std::size_t i, std::size_t pos)
    {
        if (i == t_.components.size()) {
            // accept() already pinned the last piece to the end of the text.
            record();
            return;
        }
        const auto& c = t_.components[i];
        if (!c.is_slot()) {
            for (const auto& o : c.options)
                if (accept(i, pos, o))
                    step(i + 1, pos + o.size() + 1);
            return;
        }
        auto& slot = *c.slot == Slot::A ? current_.a : current_.b;
        for (Category id : nom_.longest_first()) {
            const auto& name = nom_.name(id);
            if (!accept(i, pos, name))
                continue;
            slot = name;
            step(i + 1, pos + name.size() + 1);
            slot.reset();
        }
    }

    void record()
    {
        if (current_.a && current_.b && *current_.a == *current_.b)
            return;
        TemplateMatch m{t_.id, current_};
        if (std::find(out_.begin(), out_.end(), m) == out_.end())
            out_.push_back(std::move(m));
    }

    const Template& t_;
    std::string_view text_;
    const Nomenclature& nom_;
    std::vector<TemplateMatch>& out_;
    Binding current_;
};

} // namespace

std::vector<TemplateMatch> match_question(const TemplateRegistry& registry, std::string_view text,
                                          const Nomenclature& nomenclature)
{
    std::vector<TemplateMatch> out;
    for (const auto& t : registry.templates())
        Matcher(t, text, nomenclature, out).run();
    std::sort(out.begin(), out.end());
    return out;
}

} // namespace gridvqa
