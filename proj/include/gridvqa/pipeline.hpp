#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "gridvqa/questions.hpp"
#include "gridvqa/templates.hpp"

namespace gridvqa {

struct ManifestEntry {
    std::string image_id;
    std::filesystem::path raster;
    std::string split;
};

/// JSON array of {image_id, path, split}; relative paths resolve against
/// the manifest's directory. Image ids must be unique and splits one of
/// train, validation, test.
std::vector<ManifestEntry> load_manifest(const std::filesystem::path& path);
std::vector<ManifestEntry> parse_manifest(std::string_view json_text, const std::filesystem::path& base_dir);

/// Run configuration (UTF-8 JSON). Every field is optional; the defaults
/// reproduce the reference construction: 120x120 rasters, a 4x4 grid, 30 px
/// presence thresholds, 100 m² per pixel, all question types.
struct RunConfig {
    std::optional<std::filesystem::path> nomenclature;  // built-in CLC list when absent
    std::optional<std::filesystem::path> templates;
    std::uint64_t seed = 0;
    GridGeometry geometry;
    Thresholds thresholds;
    std::uint64_t m2_per_pixel = 100;
    std::vector<QType> qtypes{std::begin(kAllQTypes), std::end(kAllQTypes)};
    int workers = 1;
};

RunConfig load_config(const std::filesystem::path& path);
RunConfig parse_config(std::string_view json_text, const std::filesystem::path& base_dir);

/// Loaded resources shared by the pipeline stages. Immutable once built.
class Toolkit {
public:
    explicit Toolkit(const RunConfig& config);

    const RunConfig& config() const { return config_; }
    const LabelSpace& labels() const { return labels_; }
    const Nomenclature& nomenclature() const { return labels_.nomenclature(); }
    /// Throws when the configuration names no template registry.
    const TemplateRegistry& registry() const;
    GenerationConfig generation() const;

    SegmentationMap load_raster(const std::filesystem::path& path, std::string image_id) const;

private:
    RunConfig config_;
    LabelSpace labels_;
    std::optional<TemplateRegistry> registry_;
};

/// Generates candidates for every manifest image, ordered by image id then
/// question key, and hands each record to `sink` on the calling thread.
/// Output is identical for every worker count.
void generate_dataset(const std::vector<ManifestEntry>& manifest, const Toolkit& toolkit, int workers,
                      const std::function<void(const QaRecord&)>& sink);

} // namespace gridvqa
