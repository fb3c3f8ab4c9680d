#include "segdesic/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <map>

#include "config_json.hpp"
#include "json.hpp"
#include "segdesic/errors.hpp"

namespace segdesic {

namespace {

constexpr double kTwoPi = 6.28318530717958647692;

// Fixed world palette; indices beyond num_classes stay unused. All classes
// share the same channel sum, so class identity lives purely in chroma and
// the luminance axis stays free to carry per-patch conditions. Pairs
// (2, 3) and (4, 5) sit close on purpose: with location-dependent drift
// their appearances overlap across the map, so context matters.
constexpr std::array<std::array<double, 3>, 12> kPalette{{
    {77.0, 121.0, 191.0},
    {212.0, 100.0, 77.0},
    {107.0, 179.0, 103.0},
    {132.0, 169.0, 88.0},
    {178.0, 145.0, 66.0},
    {155.0, 165.0, 69.0},
    {130.0, 130.0, 129.0},
    {145.0, 131.0, 113.0},
    {96.0, 126.0, 167.0},
    {166.0, 76.0, 147.0},
    {220.0, 140.0, 29.0},
    {73.0, 163.0, 153.0},
}};

constexpr double kDriftAmp = 26.0;
// kTextureAmp replaced by a per-patch amplitude drawn in make_patch
constexpr double kNoiseAmp = 5.0;
constexpr double kTintAmp = 45.0;

// Deterministic per-(channel, component) phase in [0, 2pi).
double drift_phase(int channel, int component) {
    std::uint64_t h = mix64(0x5eedf00dULL + static_cast<std::uint64_t>(channel) * 17 +
                            static_cast<std::uint64_t>(component));
    return kTwoPi * (static_cast<double>(h >> 11) * 0x1.0p-53);
}

// Smooth location-dependent appearance law shared by both domains: every
// class shifts jointly per location (a regional cast), so two classes with
// nearby palettes can trade appearances across the map. The wavelengths sit
// well below the box extents, so box-averaged drift is near zero for any
// domain, while staying far above the patch footprint.
double class_color(int cls, int channel, double easting, double northing) {
    double s1 = std::sin(kTwoPi * easting / 37000.0 + drift_phase(channel, 1));
    double s2 = std::sin(kTwoPi * northing / 29000.0 + drift_phase(channel, 2));
    double s3 = std::sin(kTwoPi * (easting + northing) / 53000.0 + drift_phase(channel, 3));
    return kPalette[static_cast<std::size_t>(cls)][static_cast<std::size_t>(channel)] +
           kDriftAmp * (0.5 * s1 + 0.35 * s2 + 0.15 * s3);
}

// Global color affine applied to target-domain pixels; identity at shift 0.
void apply_target_affine(double shift, double& r, double& g, double& b) {
    double r0 = r, g0 = g, b0 = b;
    r = (1.0 - 0.30 * shift) * r0 + 0.22 * shift * g0 + 28.0 * shift;
    g = 0.12 * shift * r0 + (1.0 - 0.26 * shift) * g0 + 0.10 * shift * b0 - 12.0 * shift;
    b = 0.18 * shift * g0 + (1.0 - 0.22 * shift) * b0 + 10.0 * shift;
}

std::uint8_t quantize(double v) {
    long q = std::lround(v);
    if (q < 0) q = 0;
    if (q > 255) q = 255;
    return static_cast<std::uint8_t>(q);
}

struct VoronoiSite {
    double x, y;
    int cls;
};

GeoSample make_patch(const WorldConfig& cfg, const std::string& patch_id, DomainTag domain,
                     SplitTag split, std::uint64_t layout_salt) {
    const Box2154& box = domain == DomainTag::Source ? cfg.source_box : cfg.target_box;
    const int p = cfg.patch_size;

    Rng rng_coord(hash_combine(hash_combine(cfg.texture_seed, hash_str(patch_id)),
                               hash_str("coord")));
    Epsg2154Coord coord{rng_coord.uniform(box.min_easting, box.max_easting),
                        rng_coord.uniform(box.min_northing, box.max_northing)};

    Rng rng_layout(hash_combine(
        hash_combine(hash_combine(cfg.texture_seed, layout_salt), hash_str(patch_id)),
        hash_str("layout")));
    int num_sites = (3 * cfg.voronoi_sites) / 4 + rng_layout.uniform_int(0, cfg.voronoi_sites / 2);
    std::vector<VoronoiSite> sites;
    sites.reserve(static_cast<std::size_t>(num_sites));
    for (int i = 0; i < num_sites; ++i) {
        VoronoiSite s;
        s.x = rng_layout.uniform(0.0, static_cast<double>(p));
        s.y = rng_layout.uniform(0.0, static_cast<double>(p));
        s.cls = rng_layout.uniform_int(0, cfg.num_classes - 1);
        sites.push_back(s);
    }

    // Per-acquisition texture character: stripe density, orientation and
    // contrast vary per patch, giving every patch a crop-stable signature.
    Rng rng_tex(hash_combine(hash_combine(cfg.texture_seed, hash_str(patch_id)),
                             hash_str("texture")));
    double tex_phase = rng_tex.uniform(0.0, kTwoPi);
    double tex_freq_mult = rng_tex.uniform(0.6, 1.8);
    double tex_angle_off = rng_tex.uniform(0.0, kTwoPi);
    double tex_amp = rng_tex.uniform(7.0, 16.0);
    Rng rng_noise(hash_combine(hash_combine(cfg.texture_seed, hash_str(patch_id)),
                               hash_str("noise")));
    // per-acquisition brightness tint, constant across the patch; luminance
    // only, so within-patch class chroma stays untouched
    Rng rng_tint(hash_combine(hash_combine(cfg.texture_seed, hash_str(patch_id)),
                              hash_str("tint")));
    double tint = rng_tint.uniform(-kTintAmp, kTintAmp);

    double shift = domain == DomainTag::Target ? cfg.shift_strength : 0.0;
    double freq_scale = 1.0 + 0.6 * shift;

    GeoSample sample;
    sample.image = make_rgb(p, p);
    sample.labels = make_gray(p, p);
    sample.coord = coord;
    sample.domain = domain;
    sample.split = split;
    sample.patch_id = patch_id;

    for (int y = 0; y < p; ++y) {
        for (int x = 0; x < p; ++x) {
            int best = 0;
            double best_d = 1e300;
            for (int i = 0; i < num_sites; ++i) {
                double dx = sites[static_cast<std::size_t>(i)].x - x;
                double dy = sites[static_cast<std::size_t>(i)].y - y;
                double d = dx * dx + dy * dy;
                if (d < best_d) {
                    best_d = d;
                    best = i;
                }
            }
            int cls = sites[static_cast<std::size_t>(best)].cls;
            sample.labels->at(y, x) = static_cast<std::uint8_t>(cls);

            double angle = 0.61803398875 * kTwoPi * cls + tex_angle_off;
            double freq = (3.0 + 2.0 * cls) * freq_scale * tex_freq_mult;
            double tex = tex_amp *
                         std::sin(kTwoPi * freq *
                                      (std::cos(angle) * x + std::sin(angle) * y) / p +
                                  tex_phase);

            double r = class_color(cls, 0, coord.easting, coord.northing) + tex + tint;
            double g = class_color(cls, 1, coord.easting, coord.northing) + tex + tint;
            double b = class_color(cls, 2, coord.easting, coord.northing) + tex + tint;
            if (domain == DomainTag::Target) apply_target_affine(shift, r, g, b);
            r += rng_noise.uniform(-kNoiseAmp, kNoiseAmp);
            g += rng_noise.uniform(-kNoiseAmp, kNoiseAmp);
            b += rng_noise.uniform(-kNoiseAmp, kNoiseAmp);
            sample.image.at(y, x, 0) = quantize(r);
            sample.image.at(y, x, 1) = quantize(g);
            sample.image.at(y, x, 2) = quantize(b);
        }
    }
    return sample;
}

std::string padded_id(const char* prefix, int i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s_%04d", prefix, i);
    return buf;
}

} // namespace

bool Box2154::contains(const Epsg2154Coord& c) const {
    return c.easting >= min_easting && c.easting <= max_easting &&
           c.northing >= min_northing && c.northing <= max_northing;
}

bool Box2154::intersects(const Box2154& o) const {
    return !(max_easting < o.min_easting || o.max_easting < min_easting ||
             max_northing < o.min_northing || o.max_northing < min_northing);
}

void Box2154::validate() const {
    if (!(min_easting < max_easting) || !(min_northing < max_northing))
        throw ConfigError("box: inverted or empty extent");
}

std::string to_string(DomainTag tag) {
    return tag == DomainTag::Source ? "source" : "target";
}

std::string to_string(SplitTag tag) {
    switch (tag) {
        case SplitTag::SourceTrain: return "source-train";
        case SplitTag::SourceVal: return "source-val";
        case SplitTag::TargetTrain: return "target-train";
        default: return "target-test";
    }
}

DomainTag domain_from_string(const std::string& s) {
    if (s == "source") return DomainTag::Source;
    if (s == "target") return DomainTag::Target;
    throw ConfigError("unknown domain tag '" + s + "'");
}

SplitTag split_from_string(const std::string& s) {
    if (s == "source-train") return SplitTag::SourceTrain;
    if (s == "source-val") return SplitTag::SourceVal;
    if (s == "target-train") return SplitTag::TargetTrain;
    if (s == "target-test") return SplitTag::TargetTest;
    throw ConfigError("unknown split tag '" + s + "'");
}

void WorldConfig::validate() const {
    if (num_classes < 2 || num_classes > static_cast<int>(kPalette.size()))
        throw ConfigError("world: num_classes must be in [2, " +
                          std::to_string(kPalette.size()) + "]");
    if (patch_size < 8) throw ConfigError("world: patch_size too small");
    source_box.validate();
    target_box.validate();
    if (source_box.intersects(target_box))
        throw ConfigError("world: source and target boxes must be disjoint");
    if (shift_strength < 0.0 || shift_strength > 1.0)
        throw ConfigError("world: shift_strength must be in [0, 1]");
    if (num_source < 1 || num_source_val < 1 || num_target < 0 || num_target_test < 0)
        throw ConfigError("world: patch counts must be positive");
    if (voronoi_sites < 2)
        throw ConfigError("world: voronoi_sites must be at least 2");
}

std::vector<GeoSample> generate_world(const WorldConfig& cfg) {
    cfg.validate();

    for (std::uint64_t salt = 0; salt < 16; ++salt) {
        std::vector<GeoSample> samples;
        samples.reserve(static_cast<std::size_t>(cfg.num_source + cfg.num_source_val +
                                                 cfg.num_target + cfg.num_target_test));
        for (int i = 0; i < cfg.num_source; ++i)
            samples.push_back(make_patch(cfg, padded_id("src_train", i), DomainTag::Source,
                                         SplitTag::SourceTrain, salt));
        for (int i = 0; i < cfg.num_source_val; ++i)
            samples.push_back(make_patch(cfg, padded_id("src_val", i), DomainTag::Source,
                                         SplitTag::SourceVal, salt));
        for (int i = 0; i < cfg.num_target; ++i)
            samples.push_back(make_patch(cfg, padded_id("tgt_train", i), DomainTag::Target,
                                         SplitTag::TargetTrain, salt));
        for (int i = 0; i < cfg.num_target_test; ++i)
            samples.push_back(make_patch(cfg, padded_id("tgt_test", i), DomainTag::Target,
                                         SplitTag::TargetTest, salt));

        // Every class must appear somewhere in the corpus; otherwise retry
        // with the next layout salt.
        std::vector<bool> seen(static_cast<std::size_t>(cfg.num_classes), false);
        for (const auto& s : samples)
            for (std::uint8_t v : s.labels->pixels) seen[v] = true;
        if (std::all_of(seen.begin(), seen.end(), [](bool b) { return b; })) return samples;
    }
    throw ConfigError("generate_world: could not cover every class; corpus too small");
}

GeoSample random_crop(const GeoSample& sample, int size, Rng& rng) {
    int h = sample.image.height, w = sample.image.width;
    if (size < 1 || size > h || size > w)
        throw ConfigError("random_crop: size " + std::to_string(size) +
                          " exceeds patch " + std::to_string(w) + "x" + std::to_string(h));
    int oy = size == h ? 0 : rng.uniform_int(0, h - size);
    int ox = size == w ? 0 : rng.uniform_int(0, w - size);

    GeoSample out;
    out.image = make_rgb(size, size);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x)
            for (int c = 0; c < 3; ++c)
                out.image.at(y, x, c) = sample.image.at(oy + y, ox + x, c);
    if (sample.labels.has_value()) {
        out.labels = make_gray(size, size);
        for (int y = 0; y < size; ++y)
            for (int x = 0; x < size; ++x)
                out.labels->at(y, x) = sample.labels->at(oy + y, ox + x);
    }
    out.coord = sample.coord;
    out.domain = sample.domain;
    out.split = sample.split;
    out.patch_id = sample.patch_id;
    return out;
}

namespace {

void check_tileable(int h, int w, int tile, const char* what) {
    if (tile < 1 || h % tile != 0 || w % tile != 0)
        throw ShapeError(std::string(what) + ": " + std::to_string(w) + "x" +
                         std::to_string(h) + " not divisible by tile " + std::to_string(tile));
}

} // namespace

std::vector<RgbImage> tile_rgb(const RgbImage& img, int tile) {
    check_tileable(img.height, img.width, tile, "tile_rgb");
    std::vector<RgbImage> tiles;
    for (int ty = 0; ty < img.height; ty += tile) {
        for (int tx = 0; tx < img.width; tx += tile) {
            RgbImage t = make_rgb(tile, tile);
            for (int y = 0; y < tile; ++y)
                for (int x = 0; x < tile; ++x)
                    for (int c = 0; c < 3; ++c) t.at(y, x, c) = img.at(ty + y, tx + x, c);
            tiles.push_back(std::move(t));
        }
    }
    return tiles;
}

RgbImage merge_rgb(const std::vector<RgbImage>& tiles, int height, int width) {
    if (tiles.empty()) throw ShapeError("merge_rgb: no tiles");
    int tile = tiles.front().width;
    check_tileable(height, width, tile, "merge_rgb");
    if (tiles.size() != static_cast<std::size_t>((height / tile) * (width / tile)))
        throw ShapeError("merge_rgb: tile count mismatch");
    RgbImage out = make_rgb(width, height);
    int cols = width / tile;
    for (std::size_t i = 0; i < tiles.size(); ++i) {
        int ty = static_cast<int>(i) / cols * tile;
        int tx = static_cast<int>(i) % cols * tile;
        for (int y = 0; y < tile; ++y)
            for (int x = 0; x < tile; ++x)
                for (int c = 0; c < 3; ++c) out.at(ty + y, tx + x, c) = tiles[i].at(y, x, c);
    }
    return out;
}

std::vector<GrayImage> tile_gray(const GrayImage& img, int tile) {
    check_tileable(img.height, img.width, tile, "tile_gray");
    std::vector<GrayImage> tiles;
    for (int ty = 0; ty < img.height; ty += tile) {
        for (int tx = 0; tx < img.width; tx += tile) {
            GrayImage t = make_gray(tile, tile);
            for (int y = 0; y < tile; ++y)
                for (int x = 0; x < tile; ++x) t.at(y, x) = img.at(ty + y, tx + x);
            tiles.push_back(std::move(t));
        }
    }
    return tiles;
}

GrayImage merge_gray(const std::vector<GrayImage>& tiles, int height, int width) {
    if (tiles.empty()) throw ShapeError("merge_gray: no tiles");
    int tile = tiles.front().width;
    check_tileable(height, width, tile, "merge_gray");
    if (tiles.size() != static_cast<std::size_t>((height / tile) * (width / tile)))
        throw ShapeError("merge_gray: tile count mismatch");
    GrayImage out = make_gray(width, height);
    int cols = width / tile;
    for (std::size_t i = 0; i < tiles.size(); ++i) {
        int ty = static_cast<int>(i) / cols * tile;
        int tx = static_cast<int>(i) % cols * tile;
        for (int y = 0; y < tile; ++y)
            for (int x = 0; x < tile; ++x) out.at(ty + y, tx + x) = tiles[i].at(y, x);
    }
    return out;
}

// ---- corpus I/O ---------------------------------------------------------------

namespace {
using nlohmann::json;
}

void write_corpus(const std::filesystem::path& dir, const WorldConfig& cfg,
                  const std::vector<GeoSample>& samples) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("write_corpus: cannot create '" + dir.string() + "'");

    json splits;
    splits["source-train"] = json::array();
    splits["source-val"] = json::array();
    splits["target-train"] = json::array();
    splits["target-test"] = json::array();
    json files = json::array();

    for (const auto& s : samples) {
        write_ppm(dir / (s.patch_id + ".ppm"), s.image);
        if (s.labels.has_value()) write_pgm(dir / (s.patch_id + "_mask.pgm"), *s.labels);

        json meta;
        meta["patch_id"] = s.patch_id;
        meta["epsg"] = 2154;
        meta["c_lon"] = s.coord.easting;
        meta["c_lat"] = s.coord.northing;
        meta["domain"] = to_string(s.domain);
        std::ofstream mf(dir / (s.patch_id + ".json"));
        if (!mf) throw IoError("write_corpus: cannot write metadata for " + s.patch_id);
        mf << meta.dump(2) << "\n";

        splits[to_string(s.split)].push_back(s.patch_id);
        files.push_back(s.patch_id + ".ppm");
        if (s.labels.has_value()) files.push_back(s.patch_id + "_mask.pgm");
        files.push_back(s.patch_id + ".json");
    }

    json manifest;
    manifest["config"] = cfgjson::world_to_json(cfg);
    manifest["seeds"] = {{"texture_seed", cfg.texture_seed}};
    manifest["splits"] = splits;
    manifest["files"] = files;
    std::ofstream out(dir / "manifest.json");
    if (!out) throw IoError("write_corpus: cannot write manifest");
    out << manifest.dump(2) << "\n";
}

std::vector<const GeoSample*> Corpus::split(SplitTag tag) const {
    std::vector<const GeoSample*> out;
    for (const auto& s : samples)
        if (s.split == tag) out.push_back(&s);
    return out;
}

Corpus load_corpus(const std::filesystem::path& dir) {
    std::ifstream in(dir / "manifest.json");
    if (!in) throw IoError("load_corpus: missing manifest in '" + dir.string() + "'");
    json manifest;
    try {
        in >> manifest;
    } catch (const json::exception& e) {
        throw IoError("load_corpus: bad manifest: " + std::string(e.what()));
    }

    Corpus corpus;
    corpus.config = cfgjson::world_from_json(manifest.at("config"));

    const json& splits = manifest.at("splits");
    const char* order[4] = {"source-train", "source-val", "target-train", "target-test"};
    for (const char* split_name : order) {
        SplitTag tag = split_from_string(split_name);
        for (const auto& idj : splits.at(split_name)) {
            std::string id = idj.get<std::string>();
            GeoSample s;
            s.patch_id = id;
            s.split = tag;
            s.image = read_ppm(dir / (id + ".ppm"));
            auto mask_path = dir / (id + "_mask.pgm");
            if (std::filesystem::exists(mask_path)) s.labels = read_pgm(mask_path);

            std::ifstream mf(dir / (id + ".json"));
            if (!mf) throw IoError("load_corpus: missing metadata for " + id);
            json meta;
            try {
                mf >> meta;
            } catch (const json::exception& e) {
                throw IoError("load_corpus: bad metadata for " + id + ": " + e.what());
            }
            s.coord.easting = meta.at("c_lon").get<double>();
            s.coord.northing = meta.at("c_lat").get<double>();
            s.domain = domain_from_string(meta.at("domain").get<std::string>());
            corpus.samples.push_back(std::move(s));
        }
    }
    return corpus;
}

} // namespace segdesic
