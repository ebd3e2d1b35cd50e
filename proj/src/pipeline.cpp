#include "gridvqa/pipeline.hpp"

#include <algorithm>
#include <set>

#include <json.hpp>

#include "gridvqa/io.hpp"
#include "gridvqa/parallel.hpp"

namespace gridvqa {

using nlohmann::json;

namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p)
{
    std::filesystem::path path(p);
    return path.is_absolute() ? path : base / path;
}

} // namespace

std::vector<ManifestEntry> parse_manifest(std::string_view json_text, const std::filesystem::path& base_dir)
{
    std::vector<ManifestEntry> out;
    try {
        json j = json::parse(json_text);
        if (j.is_object() && j.contains("images"))
            j = j.at("images");
        if (!j.is_array())
            throw Error("manifest must be a JSON array of images");
        std::set<std::string> seen;
        for (const auto& e : j) {
            ManifestEntry m;
            m.image_id = e.at("image_id").get<std::string>();
            m.raster = resolve(base_dir, e.at("path").get<std::string>());
            m.split = e.value("split", std::string("test"));
            if (m.split != "train" && m.split != "validation" && m.split != "test")
                throw Error("image \"" + m.image_id + "\": split must be train, validation or test");
            if (!seen.insert(m.image_id).second)
                throw Error("duplicate image_id \"" + m.image_id + "\" in manifest");
            out.push_back(std::move(m));
        }
    } catch (const json::exception& e) {
        throw Error(std::string("manifest: ") + e.what());
    }
    return out;
}

std::vector<ManifestEntry> load_manifest(const std::filesystem::path& path)
{
    try {
        return parse_manifest(read_text_file(path), path.parent_path());
    } catch (const Error& e) {
        throw Error(path.string() + ": " + e.what());
    }
}

RunConfig parse_config(std::string_view json_text, const std::filesystem::path& base_dir)
{
    RunConfig c;
    try {
        const json j = json::parse(json_text);
        if (!j.is_object())
            throw Error("config must be a JSON object");
        static const std::set<std::string> known = {
            "nomenclature", "templates", "seed",     "grid_size", "width",  "height",
            "image_threshold", "cell_threshold", "m2_per_pixel", "qtypes", "workers"};
        for (const auto& [key, value] : j.items())
            if (!known.contains(key))
                throw Error("unknown config key \"" + key + "\"");
        if (j.contains("nomenclature"))
            c.nomenclature = resolve(base_dir, j.at("nomenclature").get<std::string>());
        if (j.contains("templates"))
            c.templates = resolve(base_dir, j.at("templates").get<std::string>());
        c.seed = j.value("seed", c.seed);
        c.geometry.grid = j.value("grid_size", c.geometry.grid);
        c.geometry.width = j.value("width", c.geometry.width);
        c.geometry.height = j.value("height", c.geometry.height);
        c.thresholds.image_px = j.value("image_threshold", c.thresholds.image_px);
        c.thresholds.cell_px = j.value("cell_threshold", c.thresholds.cell_px);
        c.m2_per_pixel = j.value("m2_per_pixel", c.m2_per_pixel);
        c.workers = j.value("workers", c.workers);
        if (j.contains("qtypes")) {
            c.qtypes.clear();
            for (const auto& q : j.at("qtypes"))
                c.qtypes.push_back(parse_qtype(q.get<std::string>()));
        }
    } catch (const json::exception& e) {
        throw Error(std::string("config: ") + e.what());
    }
    c.geometry.validate();
    if (c.workers < 1)
        throw Error("config: workers must be >= 1");
    if (c.m2_per_pixel == 0)
        throw Error("config: m2_per_pixel must be positive");
    return c;
}

RunConfig load_config(const std::filesystem::path& path)
{
    try {
        return parse_config(read_text_file(path), path.parent_path());
    } catch (const Error& e) {
        throw Error(path.string() + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------

Toolkit::Toolkit(const RunConfig& config)
    : config_(config),
      labels_(config.nomenclature ? Nomenclature::load(*config.nomenclature) : Nomenclature::clc_level3(),
              config.geometry, config.m2_per_pixel)
{
    if (config.templates)
        registry_ = load_registry(*config.templates);
}

const TemplateRegistry& Toolkit::registry() const
{
    if (!registry_)
        throw Error("configuration names no template registry (\"templates\")");
    return *registry_;
}

GenerationConfig Toolkit::generation() const
{
    GenerationConfig g;
    g.seed = config_.seed;
    g.thresholds = config_.thresholds;
    g.qtypes = config_.qtypes;
    return g;
}

SegmentationMap Toolkit::load_raster(const std::filesystem::path& path, std::string image_id) const
{
    auto map = load_map(path, std::move(image_id), nomenclature(), config_.geometry.grid);
    if (map.width != config_.geometry.width || map.height != config_.geometry.height)
        throw Error(path.string() + ": raster is " + std::to_string(map.width) + "x" +
                    std::to_string(map.height) + ", configuration expects " +
                    std::to_string(config_.geometry.width) + "x" + std::to_string(config_.geometry.height));
    return map;
}

void generate_dataset(const std::vector<ManifestEntry>& manifest, const Toolkit& toolkit, int workers,
                      const std::function<void(const QaRecord&)>& sink)
{
    const auto& registry = toolkit.registry();
    const auto generation = toolkit.generation();
    check_registry_covers(registry, generation);

    std::vector<const ManifestEntry*> order;
    for (const auto& m : manifest)
        order.push_back(&m);
    std::sort(order.begin(), order.end(),
              [](const ManifestEntry* a, const ManifestEntry* b) { return a->image_id < b->image_id; });

    // Images are processed in fixed-size batches so memory stays bounded by
    // the batch, and each batch is flushed in canonical order.
    const std::size_t batch = static_cast<std::size_t>(std::max(workers, 1)) * 16;
    std::vector<std::vector<QaRecord>> results;
    for (std::size_t start = 0; start < order.size(); start += batch) {
        const std::size_t n = std::min(batch, order.size() - start);
        results.assign(n, {});
        parallel_for(n, workers, [&](std::size_t begin, std::size_t end) {
            for (std::size_t i = begin; i < end; ++i) {
                const ManifestEntry& m = *order[start + i];
                const auto map = toolkit.load_raster(m.raster, m.image_id);
                const auto stats = class_stats(map, toolkit.config().geometry.grid);
                auto instances = enumerate_candidates(stats, registry, toolkit.labels(), generation, m.split);
                results[i].reserve(instances.size());
                for (const auto& qa : instances)
                    results[i].push_back(to_record(qa, toolkit.labels()));
            }
        });
        for (const auto& records : results)
            for (const auto& r : records)
                sink(r);
    }
}

} // namespace gridvqa
