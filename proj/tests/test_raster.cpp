#include <doctest.h>

#include <set>

#include "gridvqa/raster.hpp"
#include "synthetic.hpp"

using namespace gridvqa;

namespace {

std::vector<std::uint8_t> pgm(int w, int h, const std::vector<std::uint8_t>& data, int maxval = 255)
{
    const std::string header = "P5\n" + std::to_string(w) + " " + std::to_string(h) + "\n" + std::to_string(maxval) + "\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.insert(out.end(), data.begin(), data.end());
    return out;
}

// Category 7 fills a1, category 3 everything else.
SegmentationMap corner_map()
{
    SegmentationMap m{"img", 120, 120, std::vector<Category>(14400, 3)};
    for (int y = 0; y < 30; ++y)
        for (int x = 0; x < 30; ++x)
            m.data[y * 120 + x] = 7;
    return m;
}

} // namespace

TEST_CASE("cell labels run a1 top-left, columns then rows")
{
    GridGeometry g;
    CHECK(g.label(CellId{0}) == "a1");
    CHECK(g.label(CellId{1}) == "b1");
    CHECK(g.label(CellId{4}) == "a2");
    CHECK(g.label(CellId{15}) == "d4");
    CHECK(g.cell_of(0, 0).index == 0);
    CHECK(g.cell_of(119, 0).index == 3);
    CHECK(g.cell_of(0, 119).index == 12);
    CHECK(g.cell_of(30, 30).index == 5);
    for (std::uint8_t i = 0; i < 16; ++i)
        CHECK(g.parse_label(g.label(CellId{i})).index == i);
    CHECK_THROWS_WITH_AS(g.parse_label("e5"), doctest::Contains("unknown cell"), Error);
    CHECK_THROWS_AS(g.parse_label("a0"), Error);
    CHECK_THROWS_AS(g.parse_label(""), Error);
}

TEST_CASE("geometry validation")
{
    CHECK_NOTHROW(GridGeometry{}.validate());
    CHECK_THROWS_AS((GridGeometry{121, 120, 4}.validate()), Error);
    CHECK_THROWS_AS((GridGeometry{0, 120, 4}.validate()), Error);
}

TEST_CASE("CellSet set algebra")
{
    GridGeometry g;
    const std::vector<std::string> labels{"d4", "a1", "b2"};
    const auto s = CellSet::from_labels(labels, g);
    CHECK(s.size() == 3);
    CHECK(s.labels(g) == std::vector<std::string>{"a1", "b2", "d4"});
    CHECK(CellSet::all(16).size() == 16);
    CHECK(s.is_subset_of(CellSet::all(16)));
    CHECK((s & CellSet{}).empty());
}

TEST_CASE("default nomenclature")
{
    const auto nom = Nomenclature::clc_level3();
    CHECK(nom.ids().size() == 44);
    CHECK(nom.answerable().size() == 43);
    CHECK(nom.unlabeled() == 0);
    CHECK(nom.name(39) == "water courses");
    CHECK(nom.find("beaches, dunes, sands").has_value());
    CHECK_FALSE(nom.find("Water courses").has_value());
    const auto round = Nomenclature::parse(nom.serialize());
    for (Category c : nom.ids())
        CHECK(round.name(c) == nom.name(c));
    const auto shipped = Nomenclature::load(GRIDVQA_DATA_DIR "/nomenclature.tsv");
    CHECK(shipped.serialize() == nom.serialize());
}

TEST_CASE("nomenclature parse errors")
{
    CHECK_THROWS_AS(Nomenclature::parse("0\tunlabeled\n"), Error);
    CHECK_THROWS_AS(Nomenclature::parse("unlabeled=0\n0 unlabeled\n"), Error);
    CHECK_THROWS_AS(Nomenclature::parse("unlabeled=0\nx\tname\n"), Error);
}

TEST_CASE("load_map decodes binary PGM")
{
    const auto nom = Nomenclature::clc_level3();
    std::vector<std::uint8_t> data(16, 5);
    data[3] = 43;
    const auto bytes = pgm(4, 4, data);
    const auto m = load_map(bytes, "x", nom, 4);
    CHECK(m.width == 4);
    CHECK(m.height == 4);
    CHECK(m.at(3, 0) == 43);
    CHECK(encode_pgm(m) == bytes);

    SUBCASE("header comments and arbitrary whitespace")
    {
        std::string h = "P5 # comment\n4\t4\n# more\n255\n";
        std::vector<std::uint8_t> b(h.begin(), h.end());
        b.insert(b.end(), data.begin(), data.end());
        CHECK(load_map(b, "x", nom, 4).data == m.data);
    }
}

TEST_CASE("load_map errors")
{
    const auto nom = Nomenclature::clc_level3();
    std::vector<std::uint8_t> data(16, 1);
    auto bad_magic = pgm(4, 4, data);
    bad_magic[1] = '2';
    CHECK_THROWS_WITH_AS(load_map(bad_magic, "x", nom, 4), doctest::Contains("malformed PGM"), Error);

    auto truncated = pgm(4, 4, data);
    truncated.pop_back();
    CHECK_THROWS_WITH_AS(load_map(truncated, "x", nom, 4), doctest::Contains("unexpected end of data"), Error);

    CHECK_THROWS_WITH_AS(load_map(pgm(10, 10, std::vector<std::uint8_t>(100, 1)), "x", nom, 4),
                         doctest::Contains("dimensions not divisible by grid size"), Error);

    data[5] = 200;
    CHECK_THROWS_WITH_AS(load_map(pgm(4, 4, data), "x", nom, 4),
                         doctest::Contains("category identifier 200 outside nomenclature"), Error);
}

TEST_CASE("class_stats on the corner fixture")
{
    const auto nom = Nomenclature::clc_level3();
    const auto stats = class_stats(corner_map());
    CHECK(stats.total(7) == 900);
    CHECK(stats.total(3) == 13500);
    CHECK(present_classes(stats, nom) == std::vector<Category>{3, 7});
    CHECK(cells_of_class(stats, 7).labels(GridGeometry{}) == std::vector<std::string>{"a1"});
    CHECK(cells_of_class(stats, 3).size() == 15);
}

TEST_CASE("thresholds are inclusive at 30 pixels")
{
    const auto nom = Nomenclature::clc_level3();
    SegmentationMap m{"t", 120, 120, std::vector<Category>(14400, 1)};
    for (int i = 0; i < 29; ++i)
        m.data[i] = 2;
    for (int i = 0; i < 30; ++i)
        m.data[120 * 60 + i] = 4;
    const auto stats = class_stats(m);
    const auto present = present_classes(stats, nom);
    CHECK(present == std::vector<Category>{1, 4});
    CHECK(cells_of_class(stats, 4).labels(GridGeometry{}) == std::vector<std::string>{"a3"});
}

TEST_CASE("unlabeled pixels are never present")
{
    const auto nom = Nomenclature::clc_level3();
    SegmentationMap m{"u", 120, 120, std::vector<Category>(14400, 0)};
    CHECK(present_classes(class_stats(m), nom).empty());
}

TEST_CASE("class_stats conserves pixels on random rasters")
{
    GridGeometry g;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const auto m = testing::random_map(seed, "r");
        const auto stats = class_stats(m);
        std::uint64_t total = 0;
        for (int c = 0; c < 256; ++c) {
            std::uint64_t cell_sum = 0;
            for (std::uint8_t i = 0; i < 16; ++i)
                cell_sum += stats.cell_count(static_cast<Category>(c), CellId{i});
            CHECK(cell_sum == stats.total(static_cast<Category>(c)));
            total += stats.total(static_cast<Category>(c));
        }
        CHECK(total == 14400);
        (void)g;
    }
}

TEST_CASE("area labels")
{
    CHECK(area_label(0).text == "0m²");
    CHECK(area_label(1).text == "1-5000m²");
    CHECK(area_label(50).text == "1-5000m²");
    CHECK(area_label(51).text == "5001-10000m²");
    CHECK(area_label(458).text == "45001-50000m²");
    CHECK(area_label(13501).text == "1350001-1355000m²");
    CHECK(area_label(14400).text == "1440000m²");
    CHECK(area_label(14399).text == "1435001-1440000m²");
    CHECK_THROWS_AS(area_label(14401), Error);
}

TEST_CASE("area sweep: 290 labels, monotone, invertible, matches reference arithmetic")
{
    const AreaScale scale;
    const auto nom = Nomenclature::clc_level3();
    SegmentationMap dummy{"d", 120, 120, {}};
    const testing::ReferenceOracle ref(dummy, nom);
    std::set<std::string> seen;
    int last = -1;
    for (std::uint64_t px = 0; px <= 14400; ++px) {
        const auto l = area_label(px, scale);
        CHECK(l.index >= last);
        last = l.index;
        seen.insert(l.text);
        REQUIRE(l.text == ref.area_text(static_cast<std::int64_t>(px)));
        REQUIRE(parse_area_label(l.text, scale) == l.index);
    }
    CHECK(seen.size() == 290);
    CHECK(scale.label_count() == 290);
    CHECK_FALSE(parse_area_label("1-4999m²", scale).has_value());
    CHECK_FALSE(parse_area_label("5000m²", scale).has_value());
}
