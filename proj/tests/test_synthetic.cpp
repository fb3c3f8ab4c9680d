#include <array>
#include <cmath>
#include <set>

#include "doctest.h"
#include "segdesic/errors.hpp"
#include "segdesic/rng.hpp"
#include "segdesic/synthetic.hpp"
#include "support/temp_dir.hpp"

using namespace segdesic;

namespace {

WorldConfig small_world(double shift = 0.5) {
    WorldConfig cfg;
    cfg.patch_size = 48;
    cfg.num_source = 6;
    cfg.num_source_val = 2;
    cfg.num_target = 4;
    cfg.num_target_test = 3;
    cfg.shift_strength = shift;
    return cfg;
}

// Mean color per (class, channel); conditioning on the class isolates the
// appearance law from the per-corpus class mix.
std::vector<std::array<double, 3>> per_class_mean_color(const std::vector<GeoSample>& samples,
                                                        DomainTag tag, int num_classes) {
    std::vector<std::array<double, 3>> sum(static_cast<std::size_t>(num_classes),
                                           {0.0, 0.0, 0.0});
    std::vector<std::size_t> count(static_cast<std::size_t>(num_classes), 0);
    for (const auto& s : samples) {
        if (s.domain != tag) continue;
        for (int y = 0; y < s.image.height; ++y)
            for (int x = 0; x < s.image.width; ++x) {
                int cls = s.labels->at(y, x);
                for (int c = 0; c < 3; ++c)
                    sum[static_cast<std::size_t>(cls)][static_cast<std::size_t>(c)] +=
                        s.image.at(y, x, c);
                ++count[static_cast<std::size_t>(cls)];
            }
    }
    for (int k = 0; k < num_classes; ++k)
        if (count[static_cast<std::size_t>(k)] > 0)
            for (auto& v : sum[static_cast<std::size_t>(k)])
                v /= static_cast<double>(count[static_cast<std::size_t>(k)]);
    return sum;
}

double domain_appearance_gap(const std::vector<GeoSample>& samples, int num_classes) {
    auto src = per_class_mean_color(samples, DomainTag::Source, num_classes);
    auto tgt = per_class_mean_color(samples, DomainTag::Target, num_classes);
    double gap = 0.0;
    for (int k = 0; k < num_classes; ++k)
        for (int c = 0; c < 3; ++c)
            gap += std::fabs(src[static_cast<std::size_t>(k)][static_cast<std::size_t>(c)] -
                             tgt[static_cast<std::size_t>(k)][static_cast<std::size_t>(c)]);
    return gap / num_classes;
}

} // namespace

TEST_SUITE("synthetic") {

TEST_CASE("world validation") {
    WorldConfig cfg = small_world();
    CHECK_NOTHROW(cfg.validate());
    WorldConfig overlap = cfg;
    overlap.target_box = overlap.source_box;
    CHECK_THROWS_AS(overlap.validate(), ConfigError);
    WorldConfig bad_shift = cfg;
    bad_shift.shift_strength = 1.5;
    CHECK_THROWS_AS(bad_shift.validate(), ConfigError);
    WorldConfig bad_k = cfg;
    bad_k.num_classes = 40;
    CHECK_THROWS_AS(bad_k.validate(), ConfigError);
}

TEST_CASE("generation is deterministic") {
    WorldConfig cfg = small_world();
    auto a = generate_world(cfg);
    auto b = generate_world(cfg);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].patch_id == b[i].patch_id);
        CHECK(a[i].coord.easting == b[i].coord.easting);
        CHECK(a[i].coord.northing == b[i].coord.northing);
        CHECK(a[i].image.pixels == b[i].image.pixels);
        CHECK(a[i].labels->pixels == b[i].labels->pixels);
    }
}

TEST_CASE("coordinates live in their domain box and the sets are disjoint") {
    WorldConfig cfg = small_world();
    auto samples = generate_world(cfg);
    std::set<std::pair<double, double>> source_coords;
    for (const auto& s : samples) {
        const Box2154& box = s.domain == DomainTag::Source ? cfg.source_box : cfg.target_box;
        CHECK(box.contains(s.coord));
        if (s.domain == DomainTag::Source) source_coords.insert({s.coord.easting, s.coord.northing});
    }
    for (const auto& s : samples)
        if (s.domain == DomainTag::Target)
            CHECK(source_coords.count({s.coord.easting, s.coord.northing}) == 0);
}

TEST_CASE("every class appears in the corpus") {
    WorldConfig cfg = small_world();
    auto samples = generate_world(cfg);
    std::vector<bool> seen(static_cast<std::size_t>(cfg.num_classes), false);
    for (const auto& s : samples) {
        REQUIRE(s.labels.has_value());
        for (std::uint8_t v : s.labels->pixels) {
            REQUIRE(v < cfg.num_classes);
            seen[v] = true;
        }
    }
    for (bool b : seen) CHECK(b);
}

TEST_CASE("shift strength only re-styles the target domain") {
    auto plain = generate_world(small_world(0.0));
    auto shifted = generate_world(small_world(0.9));
    REQUIRE(plain.size() == shifted.size());
    for (std::size_t i = 0; i < plain.size(); ++i) {
        if (plain[i].domain == DomainTag::Source) {
            CHECK(plain[i].image.pixels == shifted[i].image.pixels);
        } else {
            CHECK(plain[i].image.pixels != shifted[i].image.pixels);
        }
        CHECK(plain[i].labels->pixels == shifted[i].labels->pixels);
    }
}

TEST_CASE("domain color gap grows with shift strength") {
    WorldConfig base = small_world();
    base.num_source = 12;
    base.num_target = 12;
    double gaps[3];
    int idx = 0;
    for (double shift : {0.0, 0.5, 1.0}) {
        WorldConfig cfg = base;
        cfg.shift_strength = shift;
        auto samples = generate_world(cfg);
        gaps[idx++] = domain_appearance_gap(samples, cfg.num_classes);
    }
    CHECK(gaps[0] < gaps[1]);
    CHECK(gaps[1] < gaps[2]);
}

TEST_CASE("random crop basics") {
    WorldConfig cfg = small_world();
    auto samples = generate_world(cfg);
    const GeoSample& patch = samples.front();

    Rng rng(5);
    GeoSample full = random_crop(patch, cfg.patch_size, rng);
    CHECK(full.image.pixels == patch.image.pixels); // identity crop

    Rng rng_a(6), rng_b(6);
    GeoSample a = random_crop(patch, 16, rng_a);
    GeoSample b = random_crop(patch, 16, rng_b);
    CHECK(a.image.pixels == b.image.pixels); // seed reproducibility
    CHECK(a.coord.easting == patch.coord.easting);
    CHECK(a.patch_id == patch.patch_id);

    // crop is a contiguous sub-rectangle: locate it by scanning offsets
    bool found = false;
    for (int oy = 0; oy + 16 <= cfg.patch_size && !found; ++oy)
        for (int ox = 0; ox + 16 <= cfg.patch_size && !found; ++ox) {
            bool match = true;
            for (int y = 0; y < 16 && match; ++y)
                for (int x = 0; x < 16 && match; ++x)
                    for (int c = 0; c < 3; ++c)
                        if (a.image.at(y, x, c) != patch.image.at(oy + y, ox + x, c)) {
                            match = false;
                            break;
                        }
            if (match) found = true;
        }
    CHECK(found);

    Rng rng_c(7);
    CHECK_THROWS_AS(random_crop(patch, cfg.patch_size + 1, rng_c), ConfigError);
}

TEST_CASE("tiling round trips bit-exactly") {
    WorldConfig cfg = small_world();
    auto samples = generate_world(cfg);
    const GeoSample& patch = samples.front();

    auto tiles = tile_rgb(patch.image, 24);
    CHECK(tiles.size() == 4);
    RgbImage merged = merge_rgb(tiles, patch.image.height, patch.image.width);
    CHECK(merged.pixels == patch.image.pixels);

    auto gtiles = tile_gray(*patch.labels, 16);
    CHECK(gtiles.size() == 9);
    GrayImage gmerged = merge_gray(gtiles, patch.labels->height, patch.labels->width);
    CHECK(gmerged.pixels == patch.labels->pixels);

    CHECK_THROWS_AS(tile_rgb(patch.image, 20), ShapeError);
}

TEST_CASE("corpus writes and loads losslessly") {
    testing::TempDir tmp("corpus");
    WorldConfig cfg = small_world();
    auto samples = generate_world(cfg);
    write_corpus(tmp.path(), cfg, samples);

    CHECK(std::filesystem::exists(tmp.path() / "manifest.json"));
    CHECK(std::filesystem::exists(tmp.path() / "src_train_0000.ppm"));
    CHECK(std::filesystem::exists(tmp.path() / "src_train_0000_mask.pgm"));
    CHECK(std::filesystem::exists(tmp.path() / "src_train_0000.json"));

    Corpus corpus = load_corpus(tmp.path());
    CHECK(corpus.config.patch_size == cfg.patch_size);
    CHECK(corpus.config.num_classes == cfg.num_classes);
    REQUIRE(corpus.samples.size() == samples.size());
    for (const auto& orig : samples) {
        bool matched = false;
        for (const auto& loaded : corpus.samples) {
            if (loaded.patch_id != orig.patch_id) continue;
            matched = true;
            CHECK(loaded.image.pixels == orig.image.pixels);
            CHECK(loaded.labels->pixels == orig.labels->pixels);
            CHECK(loaded.coord.easting == orig.coord.easting);
            CHECK(loaded.coord.northing == orig.coord.northing);
            CHECK(loaded.domain == orig.domain);
            CHECK(loaded.split == orig.split);
        }
        CHECK(matched);
    }

    CHECK(corpus.split(SplitTag::SourceTrain).size() == 6);
    CHECK(corpus.split(SplitTag::SourceVal).size() == 2);
    CHECK(corpus.split(SplitTag::TargetTrain).size() == 4);
    CHECK(corpus.split(SplitTag::TargetTest).size() == 3);

    CHECK_THROWS_AS(load_corpus(tmp.path() / "nope"), IoError);
}

} // TEST_SUITE
