#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gridvqa/common.hpp"
#include "gridvqa/raster.hpp"

namespace gridvqa {

enum class QType : std::uint8_t {
    presence,
    landcover,
    area,
    comp_absolute,
    comp_relative_class,
    comp_relative_yesno,
};

inline constexpr QType kAllQTypes[] = {QType::presence,      QType::landcover,
                                       QType::area,          QType::comp_absolute,
                                       QType::comp_relative_class, QType::comp_relative_yesno};

std::string_view to_string(QType q);
QType parse_qtype(std::string_view s);
bool is_comparison(QType q);
/// Number of class placeholders a template of this type must declare.
int placeholder_count(QType q);

/// Direction token carried by comparison questions.
enum class Direction : std::uint8_t { none, larger, smaller, more, less, dominant, minimal };

std::string_view to_string(Direction d);
Direction parse_direction(std::string_view s);
/// The two legal directions for a comparison type; empty for the others.
std::vector<Direction> directions_for(QType q);
/// larger<->smaller, more<->less, dominant<->minimal.
Direction mirror(Direction d);

enum class Slot : std::uint8_t { A, B };

/// One template component: a word-option set or a class placeholder.
struct Component {
    std::vector<std::string> options;
    std::optional<Slot> slot;

    bool is_slot() const { return slot.has_value(); }
};

struct Template {
    static constexpr std::size_t kMaxComponents = 7;

    std::string id;
    QType qtype = QType::presence;
    Direction direction = Direction::none;
    std::vector<Component> components;
};

/// Class names bound to the placeholders of one template, plus the
/// template's direction token.
struct Binding {
    std::optional<std::string> a;
    std::optional<std::string> b;
    Direction direction = Direction::none;

    friend auto operator<=>(const Binding&, const Binding&) = default;
};

struct TemplateMatch {
    std::string template_id;
    Binding binding;

    friend auto operator<=>(const TemplateMatch&, const TemplateMatch&) = default;
};

/// Immutable collection of templates, ordered by id.
class TemplateRegistry {
public:
    TemplateRegistry() = default;
    explicit TemplateRegistry(std::vector<Template> templates);

    const std::vector<Template>& templates() const { return templates_; }
    const Template* find(std::string_view id) const;
    /// Templates of one type and direction, in id order.
    std::vector<const Template*> select(QType q, Direction d = Direction::none) const;
    bool empty() const { return templates_.empty(); }
    std::size_t size() const { return templates_.size(); }

private:
    std::vector<Template> templates_;
};

/// Validates one template; throws Error naming the broken invariant.
void validate_template(const Template& t);

/// Parses the JSON-lines template DSL, one template per non-blank line:
/// {"id": ..., "qtype": ..., "direction": ..., "components": [{"options": [...]} | {"slot": "A"|"B"}]}
TemplateRegistry parse_registry(std::string_view text);
TemplateRegistry load_registry(const std::filesystem::path& path);

/// Draws one option per option component, substitutes bound class names,
/// and joins components with single spaces.
std::string expand(const Template& t, const Binding& binding, Rng& rng);

/// Expansion number `variant` in mixed-radix order (first component most
/// significant); 0 <= variant < variant_count(t).
std::string expand_variant(const Template& t, const Binding& binding, std::uint64_t variant);

std::uint64_t variant_count(const Template& t);
std::uint64_t variant_count(const TemplateRegistry& registry);

/// Every (template, binding) whose expansion set contains `text`, ordered by
/// template id then binding.
std::vector<TemplateMatch> match_question(const TemplateRegistry& registry, std::string_view text,
                                          const Nomenclature& nomenclature);

} // namespace gridvqa
