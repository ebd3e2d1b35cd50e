#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gridvqa/raster.hpp"
#include "gridvqa/templates.hpp"

namespace gridvqa {

/// One member of the answer space: yes, no, a class, or an area bin.
struct AnswerLabel {
    enum class Kind : std::uint8_t { yes, no, cls, area };

    Kind kind = Kind::yes;
    int value = 0;  // category id for cls, bin index for area

    static constexpr AnswerLabel yes() { return {Kind::yes, 0}; }
    static constexpr AnswerLabel no() { return {Kind::no, 0}; }
    static constexpr AnswerLabel of_class(Category c) { return {Kind::cls, c}; }
    static constexpr AnswerLabel of_area(int bin) { return {Kind::area, bin}; }

    /// Canonical label order: yes, no, classes by id, area bins by index.
    friend constexpr auto operator<=>(const AnswerLabel&, const AnswerLabel&) = default;
};

/// Everything needed to render and parse answers and cells as text.
class LabelSpace {
public:
    LabelSpace(Nomenclature nomenclature, GridGeometry geometry = {}, std::uint64_t m2_per_pixel = 100);

    const Nomenclature& nomenclature() const { return nomenclature_; }
    const GridGeometry& geometry() const { return geometry_; }
    const AreaScale& area_scale() const { return area_; }

    std::string render(const AnswerLabel& label) const;
    /// Throws on text that is not a member of the answer space.
    AnswerLabel parse(std::string_view text) const;
    bool contains(const AnswerLabel& label) const;

    /// 2 + answerable classes + area bins; 335 with the defaults.
    std::size_t size() const;
    std::vector<AnswerLabel> all() const;

private:
    Nomenclature nomenclature_;
    GridGeometry geometry_;
    AreaScale area_;
};

struct StructuredQuestion {
    QType qtype = QType::presence;
    std::optional<Category> class_a;
    std::optional<Category> class_b;
    Direction direction = Direction::none;
    std::string template_id;
    std::string text;
};

/// Throws when field presence does not match the question type.
void validate_question(const StructuredQuestion& sq);

/// Canonical key, injective over (qtype, classes, direction). Relative
/// yes/no questions are normalized to ascending class order, mirroring the
/// direction when the classes are swapped; relative class questions are
/// symmetric in their two classes.
std::string question_key(const StructuredQuestion& sq);

/// Stable 16-hex-digit id for (image_id, question key).
std::string question_id(std::string_view image_id, std::string_view key);

struct OracleAnswer {
    std::vector<AnswerLabel> answers;  // canonical order
    CellSet cells;

    friend bool operator==(const OracleAnswer&, const OracleAnswer&) = default;
};

/// Ground-truth answer and grounding cells by pixel counting.
OracleAnswer oracle_answer(const ClassStats& stats, const StructuredQuestion& sq,
                           const Nomenclature& nomenclature, const Thresholds& thresholds = {},
                           const AreaScale& scale = {});

/// Structured question recovered from a template match.
StructuredQuestion question_from_match(const TemplateMatch& match, const TemplateRegistry& registry,
                                       const Nomenclature& nomenclature, std::string text);

struct QAInstance {
    std::string question_id;
    std::string image_id;
    std::string split;
    StructuredQuestion question;
    std::vector<AnswerLabel> answers;
    CellSet cells;
};

struct GenerationConfig {
    std::uint64_t seed = 0;
    Thresholds thresholds;
    std::vector<QType> qtypes{std::begin(kAllQTypes), std::end(kAllQTypes)};
};

/// Throws when an enabled question type has no template for some direction.
void check_registry_covers(const TemplateRegistry& registry, const GenerationConfig& config);

/// All candidate questions for one image, ordered by question key.
std::vector<QAInstance> enumerate_candidates(const ClassStats& stats, const TemplateRegistry& registry,
                                             const LabelSpace& labels, const GenerationConfig& config,
                                             std::string_view split = "");

// ---------------------------------------------------------------------------
// Wire form shared by the balancer, bias metrics and evaluation.

/// Top-level question family: presence, landcover, area, comparison.
std::string_view family_name(QType q);
/// "absolute", "relative_class", "relative_yesno"; empty otherwise.
std::string_view subtype_name(QType q);
QType qtype_from_wire(std::string_view family, std::string_view subtype);

struct QaRecord {
    std::string question_id;
    std::string image_id;
    std::string split;
    std::string qtype;    // family
    std::string subtype;  // empty for non-comparison
    std::string template_id;
    std::string question;
    std::optional<std::string> class_a;
    std::optional<std::string> class_b;
    std::optional<std::string> direction;
    std::vector<std::string> answers;
    std::vector<std::string> cells;

    friend bool operator==(const QaRecord&, const QaRecord&) = default;
};

QaRecord to_record(const QAInstance& qa, const LabelSpace& labels);
QAInstance from_record(const QaRecord& rec, const LabelSpace& labels);

} // namespace gridvqa
