#include "gridvqa/questions.hpp"

#include <algorithm>

namespace gridvqa {

// ---------------------------------------------------------------------------
// Label space

LabelSpace::LabelSpace(Nomenclature nomenclature, GridGeometry geometry, std::uint64_t m2_per_pixel)
    : nomenclature_(std::move(nomenclature)),
      geometry_(geometry),
      area_(AreaScale::for_geometry(geometry, m2_per_pixel))
{
    geometry_.validate();
}

std::string LabelSpace::render(const AnswerLabel& label) const
{
    switch (label.kind) {
    case AnswerLabel::Kind::yes: return "yes";
    case AnswerLabel::Kind::no: return "no";
    case AnswerLabel::Kind::cls: return nomenclature_.name(static_cast<Category>(label.value));
    case AnswerLabel::Kind::area: return area_label_text(label.value, area_);
    }
    return {};
}

AnswerLabel LabelSpace::parse(std::string_view text) const
{
    if (text == "yes")
        return AnswerLabel::yes();
    if (text == "no")
        return AnswerLabel::no();
    if (auto id = nomenclature_.find(text); id && *id != nomenclature_.unlabeled())
        return AnswerLabel::of_class(*id);
    if (auto bin = parse_area_label(text, area_))
        return AnswerLabel::of_area(*bin);
    throw Error("unknown answer label \"" + std::string(text) + "\"");
}

bool LabelSpace::contains(const AnswerLabel& label) const
{
    switch (label.kind) {
    case AnswerLabel::Kind::yes:
    case AnswerLabel::Kind::no:
        return label.value == 0;
    case AnswerLabel::Kind::cls:
        return nomenclature_.contains(label.value) && label.value != nomenclature_.unlabeled();
    case AnswerLabel::Kind::area:
        return label.value >= 0 && label.value < area_.label_count();
    }
    return false;
}

std::size_t LabelSpace::size() const
{
    return 2 + nomenclature_.answerable().size() + static_cast<std::size_t>(area_.label_count());
}

std::vector<AnswerLabel> LabelSpace::all() const
{
    std::vector<AnswerLabel> out{AnswerLabel::yes(), AnswerLabel::no()};
    for (Category c : nomenclature_.answerable())
        out.push_back(AnswerLabel::of_class(c));
    for (int i = 0; i < area_.label_count(); ++i)
        out.push_back(AnswerLabel::of_area(i));
    return out;
}

// ---------------------------------------------------------------------------
// Structured questions

void validate_question(const StructuredQuestion& sq)
{
    const int n = placeholder_count(sq.qtype);
    const bool has_a = sq.class_a.has_value();
    const bool has_b = sq.class_b.has_value();
    if (has_a != (n >= 1) || has_b != (n >= 2))
        throw Error("question of type " + std::string(to_string(sq.qtype)) + " has wrong class fields");
    if (n == 2 && *sq.class_a == *sq.class_b)
        throw Error("relative comparison between a class and itself");
    const auto dirs = directions_for(sq.qtype);
    if (dirs.empty() ? sq.direction != Direction::none
                     : std::find(dirs.begin(), dirs.end(), sq.direction) == dirs.end())
        throw Error("direction \"" + std::string(to_string(sq.direction)) + "\" invalid for " +
                    std::string(to_string(sq.qtype)));
}

std::string question_key(const StructuredQuestion& sq)
{
    validate_question(sq);
    std::string key(to_string(sq.qtype));
    switch (sq.qtype) {
    case QType::presence:
    case QType::area:
        key += ':' + std::to_string(*sq.class_a);
        break;
    case QType::landcover:
        break;
    case QType::comp_absolute:
        key += ':';
        key += to_string(sq.direction);
        break;
    case QType::comp_relative_class:
    case QType::comp_relative_yesno: {
        Category lo = *sq.class_a;
        Category hi = *sq.class_b;
        Direction d = sq.direction;
        if (lo > hi) {
            std::swap(lo, hi);
            if (sq.qtype == QType::comp_relative_yesno)
                d = mirror(d);
        }
        key += ':' + std::to_string(lo) + ':' + std::to_string(hi) + ':';
        key += to_string(d);
        break;
    }
    }
    return key;
}

std::string question_id(std::string_view image_id, std::string_view key)
{
    return hex64(derive_seed(0x51d0c4a7e3b2f019ULL, image_id, key));
}

// ---------------------------------------------------------------------------
// Oracle

namespace {

void require_class(const Nomenclature& nom, Category c)
{
    if (!nom.contains(c) || c == nom.unlabeled())
        throw Error("class " + std::to_string(c) + " is not an answerable class of the nomenclature");
}

} // namespace

OracleAnswer oracle_answer(const ClassStats& stats, const StructuredQuestion& sq,
                           const Nomenclature& nomenclature, const Thresholds& thresholds,
                           const AreaScale& scale)
{
    validate_question(sq);
    if (sq.class_a)
        require_class(nomenclature, *sq.class_a);
    if (sq.class_b)
        require_class(nomenclature, *sq.class_b);

    const auto present = present_classes(stats, nomenclature, thresholds.image_px);
    auto is_present = [&](Category c) {
        return std::binary_search(present.begin(), present.end(), c);
    };
    auto cells = [&](Category c) { return cells_of_class(stats, c, thresholds.cell_px); };

    OracleAnswer out;
    switch (sq.qtype) {
    case QType::presence:
        if (is_present(*sq.class_a)) {
            out.answers = {AnswerLabel::yes()};
            out.cells = cells(*sq.class_a);
        } else {
            out.answers = {AnswerLabel::no()};
        }
        break;

    case QType::landcover:
        for (Category c : present) {
            out.answers.push_back(AnswerLabel::of_class(c));
            out.cells |= cells(c);
        }
        break;

    case QType::area:
        // A class below the image threshold is treated as absent.
        if (is_present(*sq.class_a)) {
            out.answers = {AnswerLabel::of_area(area_label(stats.total(*sq.class_a), scale).index)};
            out.cells = cells(*sq.class_a);
        } else {
            out.answers = {AnswerLabel::of_area(0)};
        }
        break;

    case QType::comp_absolute: {
        if (present.empty())
            throw Error("absolute comparison on image \"" + stats.image_id() + "\" with no present class");
        // present is ascending by id, so strict comparison keeps the smallest id on ties.
        Category best = present.front();
        for (Category c : present) {
            const bool better = sq.direction == Direction::dominant ? stats.total(c) > stats.total(best)
                                                                    : stats.total(c) < stats.total(best);
            if (better)
                best = c;
        }
        out.answers = {AnswerLabel::of_class(best)};
        out.cells = cells(best);
        break;
    }

    case QType::comp_relative_class: {
        const Category a = *sq.class_a;
        const Category b = *sq.class_b;
        const auto ta = stats.total(a);
        const auto tb = stats.total(b);
        Category pick = std::min(a, b);
        if (ta != tb) {
            const bool a_larger = ta > tb;
            pick = (sq.direction == Direction::larger) == a_larger ? a : b;
        }
        out.answers = {AnswerLabel::of_class(pick)};
        out.cells = cells(a) | cells(b);
        break;
    }

    case QType::comp_relative_yesno: {
        const auto ta = stats.total(*sq.class_a);
        const auto tb = stats.total(*sq.class_b);
        const bool yes = sq.direction == Direction::more ? ta > tb : ta < tb;
        out.answers = {yes ? AnswerLabel::yes() : AnswerLabel::no()};
        out.cells = cells(*sq.class_a) | cells(*sq.class_b);
        break;
    }
    }
    return out;
}

StructuredQuestion question_from_match(const TemplateMatch& match, const TemplateRegistry& registry,
                                       const Nomenclature& nomenclature, std::string text)
{
    const Template* t = registry.find(match.template_id);
    if (!t)
        throw Error("unknown template \"" + match.template_id + "\"");
    auto lookup = [&](const std::optional<std::string>& name) -> std::optional<Category> {
        if (!name)
            return std::nullopt;
        auto id = nomenclature.find(*name);
        if (!id)
            throw Error("unknown class \"" + *name + "\"");
        return id;
    };
    StructuredQuestion sq;
    sq.qtype = t->qtype;
    sq.class_a = lookup(match.binding.a);
    sq.class_b = lookup(match.binding.b);
    sq.direction = t->direction;
    sq.template_id = t->id;
    sq.text = std::move(text);
    validate_question(sq);
    return sq;
}

// ---------------------------------------------------------------------------
// Candidate enumeration

void check_registry_covers(const TemplateRegistry& registry, const GenerationConfig& config)
{
    for (QType q : config.qtypes) {
        auto dirs = directions_for(q);
        if (dirs.empty())
            dirs.push_back(Direction::none);
        for (Direction d : dirs)
            if (registry.select(q, d).empty())
                throw Error("empty registry for question type " + std::string(to_string(q)) +
                            (d == Direction::none ? std::string() : " (" + std::string(to_string(d)) + ")"));
    }
}

namespace {

bool enabled(const GenerationConfig& config, QType q)
{
    return std::find(config.qtypes.begin(), config.qtypes.end(), q) != config.qtypes.end();
}

} // namespace

std::vector<QAInstance> enumerate_candidates(const ClassStats& stats, const TemplateRegistry& registry,
                                             const LabelSpace& labels, const GenerationConfig& config,
                                             std::string_view split)
{
    check_registry_covers(registry, config);
    const auto& nom = labels.nomenclature();
    const auto present = present_classes(stats, nom, config.thresholds.image_px);

    std::vector<StructuredQuestion> questions;
    auto add = [&](QType q, std::optional<Category> a, std::optional<Category> b, Direction d) {
        if (!enabled(config, q))
            return;
        StructuredQuestion sq;
        sq.qtype = q;
        sq.class_a = a;
        sq.class_b = b;
        sq.direction = d;
        questions.push_back(std::move(sq));
    };

    for (Category c : nom.answerable()) {
        add(QType::presence, c, std::nullopt, Direction::none);
        add(QType::area, c, std::nullopt, Direction::none);
    }
    add(QType::landcover, std::nullopt, std::nullopt, Direction::none);
    if (!present.empty()) {
        add(QType::comp_absolute, std::nullopt, std::nullopt, Direction::dominant);
        add(QType::comp_absolute, std::nullopt, std::nullopt, Direction::minimal);
    }
    for (std::size_t i = 0; i < present.size(); ++i) {
        for (std::size_t j = i + 1; j < present.size(); ++j) {
            const Category lo = present[i];
            const Category hi = present[j];
            if (stats.total(lo) == stats.total(hi))
                continue;
            add(QType::comp_relative_class, lo, hi, Direction::larger);
            add(QType::comp_relative_class, lo, hi, Direction::smaller);
            add(QType::comp_relative_yesno, lo, hi, Direction::more);
            add(QType::comp_relative_yesno, lo, hi, Direction::less);
        }
    }

    std::vector<QAInstance> out;
    out.reserve(questions.size());
    for (auto& sq : questions) {
        const std::string key = question_key(sq);
        Rng rng(derive_seed(config.seed, stats.image_id(), key));

        // Slot order of the two compared classes is drawn per question.
        if (sq.class_b && rng.coin()) {
            std::swap(sq.class_a, sq.class_b);
            if (sq.qtype == QType::comp_relative_yesno)
                sq.direction = mirror(sq.direction);
        }

        const auto candidates = registry.select(sq.qtype, sq.direction);
        const Template& t = *candidates[rng.index(candidates.size())];
        Binding binding;
        if (sq.class_a)
            binding.a = nom.name(*sq.class_a);
        if (sq.class_b)
            binding.b = nom.name(*sq.class_b);
        binding.direction = sq.direction;
        sq.template_id = t.id;
        sq.text = expand(t, binding, rng);

        auto answer = oracle_answer(stats, sq, nom, config.thresholds, labels.area_scale());
        QAInstance qa;
        qa.question_id = question_id(stats.image_id(), key);
        qa.image_id = stats.image_id();
        qa.split = std::string(split);
        qa.question = std::move(sq);
        qa.answers = std::move(answer.answers);
        qa.cells = answer.cells;
        out.push_back(std::move(qa));
    }

    std::vector<std::pair<std::string, std::size_t>> order;
    order.reserve(out.size());
    for (std::size_t i = 0; i < out.size(); ++i)
        order.emplace_back(question_key(out[i].question), i);
    std::sort(order.begin(), order.end());
    std::vector<QAInstance> sorted;
    sorted.reserve(out.size());
    for (const auto& [key, i] : order)
        sorted.push_back(std::move(out[i]));
    return sorted;
}

// ---------------------------------------------------------------------------
// Wire form

std::string_view family_name(QType q)
{
    switch (q) {
    case QType::presence: return "presence";
    case QType::landcover: return "landcover";
    case QType::area: return "area";
    default: return "comparison";
    }
}

std::string_view subtype_name(QType q)
{
    switch (q) {
    case QType::comp_absolute: return "absolute";
    case QType::comp_relative_class: return "relative_class";
    case QType::comp_relative_yesno: return "relative_yesno";
    default: return "";
    }
}

QType qtype_from_wire(std::string_view family, std::string_view subtype)
{
    for (QType q : kAllQTypes)
        if (family_name(q) == family && subtype_name(q) == subtype)
            return q;
    throw Error("unknown question type \"" + std::string(family) +
                (subtype.empty() ? std::string() : "/" + std::string(subtype)) + "\"");
}

QaRecord to_record(const QAInstance& qa, const LabelSpace& labels)
{
    const auto& nom = labels.nomenclature();
    QaRecord r;
    r.question_id = qa.question_id;
    r.image_id = qa.image_id;
    r.split = qa.split;
    r.qtype = family_name(qa.question.qtype);
    r.subtype = subtype_name(qa.question.qtype);
    r.template_id = qa.question.template_id;
    r.question = qa.question.text;
    if (qa.question.class_a)
        r.class_a = nom.name(*qa.question.class_a);
    if (qa.question.class_b)
        r.class_b = nom.name(*qa.question.class_b);
    if (qa.question.direction != Direction::none)
        r.direction = std::string(to_string(qa.question.direction));
    for (const auto& a : qa.answers)
        r.answers.push_back(labels.render(a));
    r.cells = qa.cells.labels(labels.geometry());
    return r;
}

QAInstance from_record(const QaRecord& rec, const LabelSpace& labels)
{
    const auto& nom = labels.nomenclature();
    auto lookup = [&](const std::optional<std::string>& name) -> std::optional<Category> {
        if (!name)
            return std::nullopt;
        auto id = nom.find(*name);
        if (!id)
            throw Error("unknown class \"" + *name + "\"");
        return id;
    };
    QAInstance qa;
    qa.question_id = rec.question_id;
    qa.image_id = rec.image_id;
    qa.split = rec.split;
    qa.question.qtype = qtype_from_wire(rec.qtype, rec.subtype);
    qa.question.class_a = lookup(rec.class_a);
    qa.question.class_b = lookup(rec.class_b);
    qa.question.direction = rec.direction ? parse_direction(*rec.direction) : Direction::none;
    qa.question.template_id = rec.template_id;
    qa.question.text = rec.question;
    validate_question(qa.question);
    for (const auto& a : rec.answers)
        qa.answers.push_back(labels.parse(a));
    std::sort(qa.answers.begin(), qa.answers.end());
    qa.cells = CellSet::from_labels(rec.cells, labels.geometry());
    return qa;
}

} // namespace gridvqa
