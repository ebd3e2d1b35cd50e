#include "gridvqa/raster.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iterator>
#include <sstream>

namespace gridvqa {

// ---------------------------------------------------------------------------
// Grid geometry and cells

void GridGeometry::validate() const
{
    if (grid < 1 || grid > 8)
        throw Error("grid size must be in 1..8, got " + std::to_string(grid));
    if (width <= 0 || height <= 0)
        throw Error("raster dimensions must be positive");
    if (width % grid != 0 || height % grid != 0)
        throw Error("dimensions not divisible by grid size: " + std::to_string(width) + "x" +
                    std::to_string(height) + " with grid " + std::to_string(grid));
}

CellId GridGeometry::cell_of(int x, int y) const
{
    if (x < 0 || y < 0 || x >= width || y >= height)
        throw Error("pixel (" + std::to_string(x) + "," + std::to_string(y) + ") out of bounds");
    const int col = x / cell_width();
    const int row = y / cell_height();
    return CellId{static_cast<std::uint8_t>(row * grid + col)};
}

std::string GridGeometry::label(CellId c) const
{
    const int col = c.index % grid;
    const int row = c.index / grid;
    std::string out(1, static_cast<char>('a' + col));
    out += std::to_string(row + 1);
    return out;
}

CellId GridGeometry::parse_label(std::string_view text) const
{
    auto fail = [&]() -> CellId { throw Error("unknown cell \"" + std::string(text) + "\""); };
    if (text.size() < 2)
        return fail();
    const int col = text[0] - 'a';
    int row = 0;
    const char* first = text.data() + 1;
    const char* last = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(first, last, row);
    if (ec != std::errc{} || ptr != last || text[1] == '0' || text[1] == '+')
        return fail();
    if (col < 0 || col >= grid || row < 1 || row > grid)
        return fail();
    return CellId{static_cast<std::uint8_t>((row - 1) * grid + col)};
}

CellId cell_id(int x, int y, const GridGeometry& geom) { return geom.cell_of(x, y); }

std::vector<CellId> CellSet::cells() const
{
    std::vector<CellId> out;
    out.reserve(static_cast<std::size_t>(size()));
    for (std::uint64_t b = bits_; b != 0; b &= b - 1)
        out.push_back(CellId{static_cast<std::uint8_t>(std::countr_zero(b))});
    return out;
}

std::vector<std::string> CellSet::labels(const GridGeometry& geom) const
{
    std::vector<std::string> out;
    for (CellId c : cells())
        out.push_back(geom.label(c));
    return out;
}

CellSet CellSet::from_labels(std::span<const std::string> labels, const GridGeometry& geom)
{
    CellSet s;
    for (const auto& l : labels)
        s.insert(geom.parse_label(l));
    return s;
}

// ---------------------------------------------------------------------------
// Nomenclature

Nomenclature::Nomenclature(std::vector<std::pair<Category, std::string>> entries, Category unlabeled)
    : names_(ClassStats::kCategories), unlabeled_(unlabeled)
{
    for (auto& [id, name] : entries) {
        if (name.empty())
            throw Error("nomenclature: empty class name for id " + std::to_string(id));
        if (!names_[id].empty())
            throw Error("nomenclature: duplicate id " + std::to_string(id));
        names_[id] = std::move(name);
        ids_.push_back(id);
    }
    std::sort(ids_.begin(), ids_.end());
    if (names_[unlabeled_].empty())
        throw Error("nomenclature: unlabeled id " + std::to_string(unlabeled_) + " has no entry");

    for (std::size_t i = 0; i < ids_.size(); ++i)
        for (std::size_t j = i + 1; j < ids_.size(); ++j)
            if (names_[ids_[i]] == names_[ids_[j]])
                throw Error("nomenclature: duplicate class name \"" + names_[ids_[i]] + "\"");

    for (Category id : ids_)
        if (id != unlabeled_)
            answerable_.push_back(id);
    longest_first_ = answerable_;
    std::stable_sort(longest_first_.begin(), longest_first_.end(), [this](Category a, Category b) {
        return names_[a].size() > names_[b].size();
    });
}

Nomenclature Nomenclature::clc_level3()
{
    static const char* const names[] = {
        "continuous urban fabric",
        "discontinuous urban fabric",
        "industrial or commercial units",
        "road and rail networks and associated land",
        "port areas",
        "airports",
        "mineral extraction sites",
        "dump sites",
        "construction sites",
        "green urban areas",
        "sport and leisure facilities",
        "non-irrigated arable land",
        "permanently irrigated land",
        "rice fields",
        "vineyards",
        "fruit trees and berry plantations",
        "olive groves",
        "pastures",
        "annual crops associated with permanent crops",
        "complex cultivation patterns",
        "land principally occupied by agriculture, with significant areas of natural vegetation",
        "agro-forestry areas",
        "broad-leaved forest",
        "coniferous forest",
        "mixed forest",
        "natural grassland",
        "moors and heathland",
        "sclerophyllous vegetation",
        "transitional woodland/shrub",
        "beaches, dunes, sands",
        "bare rock",
        "sparsely vegetated areas",
        "burnt areas",
        "inland marshes",
        "peatbogs",
        "salt marshes",
        "salines",
        "intertidal flats",
        "water courses",
        "water bodies",
        "coastal lagoons",
        "estuaries",
        "sea and ocean",
    };
    std::vector<std::pair<Category, std::string>> entries;
    entries.emplace_back(0, "unlabeled");
    Category id = 1;
    for (const char* n : names)
        entries.emplace_back(id++, n);
    return Nomenclature(std::move(entries), 0);
}

Nomenclature Nomenclature::parse(std::string_view text)
{
    std::vector<std::pair<Category, std::string>> entries;
    std::optional<int> unlabeled;
    int line_no = 0;
    std::size_t pos = 0;
    auto parse_id = [&](std::string_view s) {
        int v = -1;
        auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc{} || ptr != s.data() + s.size() || v < 0 || v > 255)
            throw Error("nomenclature line " + std::to_string(line_no) + ": bad id \"" +
                        std::string(s) + "\"");
        return v;
    };
    while (pos < text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string_view::npos)
            eol = text.size();
        std::string_view line = text.substr(pos, eol - pos);
        pos = eol + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r')
            line.remove_suffix(1);
        if (line.empty())
            continue;
        if (!unlabeled) {
            constexpr std::string_view key = "unlabeled=";
            if (!line.starts_with(key))
                throw Error("nomenclature: first line must be \"unlabeled=<id>\"");
            unlabeled = parse_id(line.substr(key.size()));
            continue;
        }
        const auto tab = line.find('\t');
        if (tab == std::string_view::npos)
            throw Error("nomenclature line " + std::to_string(line_no) + ": expected id<TAB>name");
        entries.emplace_back(static_cast<Category>(parse_id(line.substr(0, tab))),
                             std::string(line.substr(tab + 1)));
    }
    if (!unlabeled)
        throw Error("nomenclature: missing \"unlabeled=<id>\" header");
    return Nomenclature(std::move(entries), static_cast<Category>(*unlabeled));
}

Nomenclature Nomenclature::load(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error("cannot open nomenclature file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

std::string Nomenclature::serialize() const
{
    std::string out = "unlabeled=" + std::to_string(unlabeled_) + "\n";
    for (Category id : ids_)
        out += std::to_string(id) + "\t" + names_[id] + "\n";
    return out;
}

bool Nomenclature::contains(int id) const
{
    return id >= 0 && id < static_cast<int>(names_.size()) && !names_[static_cast<std::size_t>(id)].empty();
}

const std::string& Nomenclature::name(Category id) const
{
    if (!contains(id))
        throw Error("category " + std::to_string(id) + " not in nomenclature");
    return names_[id];
}

std::optional<Category> Nomenclature::find(std::string_view name) const
{
    for (Category id : ids_)
        if (names_[id] == name)
            return id;
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// PGM

namespace {

class PgmCursor {
public:
    explicit PgmCursor(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    void skip_space_and_comments()
    {
        while (pos_ < bytes_.size()) {
            const auto c = bytes_[pos_];
            if (c == '#') {
                while (pos_ < bytes_.size() && bytes_[pos_] != '\n')
                    ++pos_;
            } else if (is_space(c)) {
                ++pos_;
            } else {
                break;
            }
        }
    }

    int read_uint(const char* what)
    {
        skip_space_and_comments();
        if (pos_ >= bytes_.size())
            throw Error("malformed PGM: unexpected end of data in header");
        long value = 0;
        std::size_t start = pos_;
        while (pos_ < bytes_.size() && bytes_[pos_] >= '0' && bytes_[pos_] <= '9') {
            value = value * 10 + (bytes_[pos_] - '0');
            if (value > 1'000'000)
                throw Error(std::string("malformed PGM: ") + what + " too large");
            ++pos_;
        }
        if (pos_ == start)
            throw Error(std::string("malformed PGM: expected ") + what);
        return static_cast<int>(value);
    }

    std::size_t pos() const { return pos_; }
    void advance() { ++pos_; }
    bool at_end() const { return pos_ >= bytes_.size(); }
    std::uint8_t peek() const { return bytes_[pos_]; }

    static bool is_space(std::uint8_t c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f'; }

private:
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

} // namespace

SegmentationMap load_map(std::span<const std::uint8_t> bytes, std::string image_id,
                         const Nomenclature& nomenclature, int grid)
{
    if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5')
        throw Error("malformed PGM: missing P5 magic");
    PgmCursor cur(bytes.subspan(2));
    if (cur.at_end() || !PgmCursor::is_space(cur.peek()))
        throw Error("malformed PGM: missing P5 magic");
    const int width = cur.read_uint("width");
    const int height = cur.read_uint("height");
    const int maxval = cur.read_uint("maxval");
    if (width == 0 || height == 0)
        throw Error("malformed PGM: zero dimension");
    if (maxval < 1 || maxval > 255)
        throw Error("malformed PGM: maxval must be in 1..255 for single-byte samples");
    if (cur.at_end() || !PgmCursor::is_space(cur.peek()))
        throw Error("malformed PGM: unexpected end of data after header");
    cur.advance();

    GridGeometry{width, height, grid}.validate();

    const std::size_t header = 2 + cur.pos();
    const std::size_t count = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    if (bytes.size() - header < count)
        throw Error("malformed PGM: unexpected end of data (expected " + std::to_string(count) +
                    " pixels, got " + std::to_string(bytes.size() - header) + ")");

    SegmentationMap map;
    map.image_id = std::move(image_id);
    map.width = width;
    map.height = height;
    map.data.assign(bytes.begin() + static_cast<std::ptrdiff_t>(header),
                    bytes.begin() + static_cast<std::ptrdiff_t>(header + count));
    for (Category c : map.data)
        if (!nomenclature.contains(c))
            throw Error("category identifier " + std::to_string(c) + " outside nomenclature");
    return map;
}

SegmentationMap load_map(const std::filesystem::path& path, std::string image_id,
                         const Nomenclature& nomenclature, int grid)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error("cannot open raster " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
        return load_map(bytes, std::move(image_id), nomenclature, grid);
    } catch (const Error& e) {
        throw Error(path.string() + ": " + e.what());
    }
}

std::vector<std::uint8_t> encode_pgm(const SegmentationMap& map)
{
    const std::string header =
        "P5\n" + std::to_string(map.width) + " " + std::to_string(map.height) + "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.insert(out.end(), map.data.begin(), map.data.end());
    return out;
}

// ---------------------------------------------------------------------------
// Statistics

ClassStats::ClassStats(std::string image_id, GridGeometry geom)
    : image_id_(std::move(image_id)),
      geom_(geom),
      totals_(kCategories, 0),
      cells_(static_cast<std::size_t>(kCategories) * geom.cell_count(), 0)
{
}

void ClassStats::add(Category c, CellId cell, std::uint32_t n)
{
    totals_[c] += n;
    cells_[static_cast<std::size_t>(c) * geom_.cell_count() + cell.index] += n;
}

ClassStats class_stats(const SegmentationMap& map, int grid)
{
    const GridGeometry geom{map.width, map.height, grid};
    geom.validate();
    ClassStats stats(map.image_id, geom);
    const int cw = geom.cell_width();
    const int ch = geom.cell_height();
    for (int y = 0; y < map.height; ++y) {
        const int row = y / ch;
        const Category* line = map.data.data() + static_cast<std::size_t>(y) * map.width;
        for (int col = 0; col < grid; ++col) {
            const CellId cell{static_cast<std::uint8_t>(row * grid + col)};
            for (int x = col * cw; x < (col + 1) * cw; ++x)
                stats.add(line[x], cell);
        }
    }
    return stats;
}

std::vector<Category> present_classes(const ClassStats& stats, const Nomenclature& nomenclature,
                                      std::uint32_t threshold)
{
    std::vector<Category> out;
    for (Category c : nomenclature.answerable())
        if (stats.total(c) >= threshold && stats.total(c) > 0)
            out.push_back(c);
    return out;
}

CellSet cells_of_class(const ClassStats& stats, Category category, std::uint32_t threshold)
{
    CellSet out;
    const int n = stats.geometry().cell_count();
    for (int i = 0; i < n; ++i) {
        const CellId cell{static_cast<std::uint8_t>(i)};
        const auto count = stats.cell_count(category, cell);
        if (count > 0 && count >= threshold)
            out.insert(cell);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Area bins

AreaScale AreaScale::for_geometry(const GridGeometry& geom, std::uint64_t m2_per_pixel)
{
    AreaScale s;
    s.m2_per_pixel = m2_per_pixel;
    s.image_pixels = static_cast<std::uint64_t>(geom.pixel_count());
    return s;
}

std::string area_label_text(int index, const AreaScale& scale)
{
    if (index < 0 || index > scale.full_index())
        throw Error("area bin index " + std::to_string(index) + " out of range");
    if (index == 0)
        return "0m²";
    if (index == scale.full_index())
        return std::to_string(scale.full_area()) + "m²";
    const std::uint64_t k = static_cast<std::uint64_t>(index);
    return std::to_string(scale.bin_width_m2 * (k - 1) + 1) + "-" +
           std::to_string(scale.bin_width_m2 * k) + "m²";
}

AreaLabel area_label(std::uint64_t pixel_count, const AreaScale& scale)
{
    if (pixel_count > scale.image_pixels)
        throw Error("pixel count " + std::to_string(pixel_count) + " exceeds image size " +
                    std::to_string(scale.image_pixels));
    int index = 0;
    if (pixel_count == scale.image_pixels) {
        index = scale.full_index();
    } else if (pixel_count > 0) {
        const std::uint64_t area = pixel_count * scale.m2_per_pixel;
        index = static_cast<int>((area + scale.bin_width_m2 - 1) / scale.bin_width_m2);
    }
    return AreaLabel{index, area_label_text(index, scale)};
}

std::optional<int> parse_area_label(std::string_view text, const AreaScale& scale)
{
    constexpr std::string_view unit = "m²";
    if (!text.ends_with(unit))
        return std::nullopt;
    const std::string_view body = text.substr(0, text.size() - unit.size());
    auto read = [](std::string_view s) -> std::optional<std::uint64_t> {
        std::uint64_t v = 0;
        if (s.empty() || (s.size() > 1 && s[0] == '0'))
            return std::nullopt;
        auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc{} || ptr != s.data() + s.size())
            return std::nullopt;
        return v;
    };
    const auto dash = body.find('-');
    if (dash == std::string_view::npos) {
        const auto v = read(body);
        if (!v)
            return std::nullopt;
        if (*v == 0)
            return 0;
        if (*v == scale.full_area())
            return scale.full_index();
        return std::nullopt;
    }
    const auto lo = read(body.substr(0, dash));
    const auto hi = read(body.substr(dash + 1));
    if (!lo || !hi || *hi % scale.bin_width_m2 != 0)
        return std::nullopt;
    const std::uint64_t k = *hi / scale.bin_width_m2;
    if (k < 1 || k > static_cast<std::uint64_t>(scale.range_bins()) ||
        *lo != scale.bin_width_m2 * (k - 1) + 1)
        return std::nullopt;
    return static_cast<int>(k);
}

} // namespace gridvqa
