#pragma once

#include <bit>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gridvqa/common.hpp"

namespace gridvqa {

using Category = std::uint8_t;

/// Index of one grid cell, row-major: index = row * grid + column.
struct CellId {
    std::uint8_t index = 0;

    friend constexpr auto operator<=>(CellId, CellId) = default;
};

/// Raster size and the square grid laid over it. Cell a1 is the top-left
/// cell: columns a.. run left to right, rows 1.. run top to bottom.
struct GridGeometry {
    int width = 120;
    int height = 120;
    int grid = 4;

    /// Throws when dimensions are not positive or not divisible by grid.
    void validate() const;

    int cell_width() const { return width / grid; }
    int cell_height() const { return height / grid; }
    int cell_count() const { return grid * grid; }
    std::int64_t pixel_count() const { return std::int64_t{width} * height; }

    /// Throws on out-of-bounds coordinates.
    CellId cell_of(int x, int y) const;

    std::string label(CellId c) const;
    /// Parses "a1".."d4" (for grid 4). Throws "unknown cell" otherwise.
    CellId parse_label(std::string_view text) const;

    friend bool operator==(const GridGeometry&, const GridGeometry&) = default;
};

/// Set of cells as a bitmask; grids up to 8x8. Iteration is in index order,
/// which is the canonical a1, b1, c1, d1, a2, ... order.
class CellSet {
public:
    constexpr CellSet() = default;
    constexpr explicit CellSet(std::uint64_t bits) : bits_(bits) {}

    static constexpr CellSet all(int cell_count)
    {
        return CellSet(cell_count >= 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << cell_count) - 1);
    }

    constexpr void insert(CellId c) { bits_ |= std::uint64_t{1} << c.index; }
    constexpr bool contains(CellId c) const { return (bits_ >> c.index) & 1U; }
    constexpr int size() const { return std::popcount(bits_); }
    constexpr bool empty() const { return bits_ == 0; }
    constexpr std::uint64_t bits() const { return bits_; }

    constexpr CellSet operator|(CellSet o) const { return CellSet(bits_ | o.bits_); }
    constexpr CellSet operator&(CellSet o) const { return CellSet(bits_ & o.bits_); }
    constexpr CellSet& operator|=(CellSet o)
    {
        bits_ |= o.bits_;
        return *this;
    }
    constexpr bool is_subset_of(CellSet o) const { return (bits_ & ~o.bits_) == 0; }

    std::vector<CellId> cells() const;
    std::vector<std::string> labels(const GridGeometry& geom) const;
    static CellSet from_labels(std::span<const std::string> labels, const GridGeometry& geom);

    friend constexpr auto operator<=>(CellSet, CellSet) = default;

private:
    std::uint64_t bits_ = 0;
};

/// Mapping from category identifier to class name, with one identifier
/// reserved for "Unlabeled".
class Nomenclature {
public:
    Nomenclature() = default;
    Nomenclature(std::vector<std::pair<Category, std::string>> entries, Category unlabeled);

    /// The 43 CORINE level-3 classes used by BigEarthNet, ids 1..43, with
    /// id 0 as Unlabeled.
    static Nomenclature clc_level3();

    /// "unlabeled=<id>" header line, then "id<TAB>name" lines.
    static Nomenclature parse(std::string_view text);
    static Nomenclature load(const std::filesystem::path& path);
    std::string serialize() const;

    bool contains(int id) const;
    const std::string& name(Category id) const;
    std::optional<Category> find(std::string_view name) const;
    Category unlabeled() const { return unlabeled_; }

    /// Every category id except Unlabeled, ascending.
    const std::vector<Category>& answerable() const { return answerable_; }
    /// Every category id including Unlabeled, ascending.
    const std::vector<Category>& ids() const { return ids_; }
    /// Answerable ids ordered by descending name length, then id.
    const std::vector<Category>& longest_first() const { return longest_first_; }

private:
    std::vector<std::string> names_;  // indexed by id; empty means absent
    std::vector<Category> ids_;
    std::vector<Category> answerable_;
    std::vector<Category> longest_first_;
    Category unlabeled_ = 0;
};

struct SegmentationMap {
    std::string image_id;
    int width = 0;
    int height = 0;
    std::vector<Category> data;  // row-major

    Category at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
};

/// Decodes a binary PGM (P5, maxval <= 255) and validates it against the
/// grid and nomenclature.
SegmentationMap load_map(std::span<const std::uint8_t> bytes, std::string image_id,
                         const Nomenclature& nomenclature, int grid = 4);
SegmentationMap load_map(const std::filesystem::path& path, std::string image_id,
                         const Nomenclature& nomenclature, int grid = 4);

std::vector<std::uint8_t> encode_pgm(const SegmentationMap& map);

/// Pixel-presence thresholds; a class counts as present in the image (or a
/// cell) when it covers at least this many pixels there.
struct Thresholds {
    std::uint32_t image_px = 30;
    std::uint32_t cell_px = 30;
};

class ClassStats {
public:
    static constexpr int kCategories = 256;

    ClassStats() = default;
    ClassStats(std::string image_id, GridGeometry geom);

    const std::string& image_id() const { return image_id_; }
    const GridGeometry& geometry() const { return geom_; }

    std::uint32_t total(Category c) const { return totals_[c]; }
    std::uint32_t cell_count(Category c, CellId cell) const
    {
        return cells_[static_cast<std::size_t>(c) * geom_.cell_count() + cell.index];
    }

    void add(Category c, CellId cell, std::uint32_t n = 1);

private:
    std::string image_id_;
    GridGeometry geom_;
    std::vector<std::uint32_t> totals_;
    std::vector<std::uint32_t> cells_;
};

CellId cell_id(int x, int y, const GridGeometry& geom = {});

ClassStats class_stats(const SegmentationMap& map, int grid = 4);

/// Categories with image total >= threshold, ascending; Unlabeled never.
std::vector<Category> present_classes(const ClassStats& stats, const Nomenclature& nomenclature,
                                      std::uint32_t threshold = 30);

CellSet cells_of_class(const ClassStats& stats, Category category, std::uint32_t threshold = 30);

/// Area binning. Defaults: 10 m pixels, 5,000 m^2 ranges, 120x120 image.
/// Index 0 is "0m²", the last index is the full-image singleton, and index
/// k in between covers (bin_width*(k-1), bin_width*k].
struct AreaScale {
    std::uint64_t m2_per_pixel = 100;
    std::uint64_t bin_width_m2 = 5000;
    std::uint64_t image_pixels = 14400;

    std::uint64_t full_area() const { return m2_per_pixel * image_pixels; }
    int range_bins() const
    {
        return static_cast<int>((full_area() + bin_width_m2 - 1) / bin_width_m2);
    }
    int label_count() const { return range_bins() + 2; }
    int full_index() const { return range_bins() + 1; }

    static AreaScale for_geometry(const GridGeometry& geom, std::uint64_t m2_per_pixel = 100);
};

struct AreaLabel {
    int index = 0;
    std::string text;

    friend bool operator==(const AreaLabel&, const AreaLabel&) = default;
};

AreaLabel area_label(std::uint64_t pixel_count, const AreaScale& scale = {});
std::string area_label_text(int index, const AreaScale& scale = {});
/// Inverse of area_label_text; nullopt if text is not one of the labels.
std::optional<int> parse_area_label(std::string_view text, const AreaScale& scale = {});

} // namespace gridvqa
