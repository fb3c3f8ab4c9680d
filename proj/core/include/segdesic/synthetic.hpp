#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "segdesic/geodesy.hpp"
#include "segdesic/image_io.hpp"
#include "segdesic/rng.hpp"

namespace segdesic {

/// Axis-aligned planar bounding box, meters.
struct Box2154 {
    double min_easting = 0.0;
    double min_northing = 0.0;
    double max_easting = 0.0;
    double max_northing = 0.0;

    bool contains(const Epsg2154Coord& c) const;
    bool intersects(const Box2154& other) const;
    void validate() const; // throws ConfigError on an empty box
};

enum class DomainTag { Source, Target };
enum class SplitTag { SourceTrain, SourceVal, TargetTrain, TargetTest };

std::string to_string(DomainTag tag);
std::string to_string(SplitTag tag);
DomainTag domain_from_string(const std::string& s);
SplitTag split_from_string(const std::string& s);

/// One georeferenced patch: raster, optional mask, planar center coordinate.
struct GeoSample {
    RgbImage image;
    std::optional<GrayImage> labels;
    Epsg2154Coord coord;
    DomainTag domain = DomainTag::Source;
    SplitTag split = SplitTag::SourceTrain;
    std::string patch_id;
};

/// Two-domain benchmark layout. Source patches split into train/val;
/// target training patches are unlabeled from the trainer's point of view,
/// target test patches keep labels for scoring.
struct WorldConfig {
    int num_classes = 6;
    int patch_size = 512;
    Box2154 source_box{389353.59, 6487552.20, 589353.59, 6687552.20};
    Box2154 target_box{639353.59, 6487552.20, 839353.59, 6687552.20};
    double shift_strength = 0.5; // [0, 1]
    std::uint64_t texture_seed = 18;
    int voronoi_sites = 16; // mean class-layout sites per patch
    int num_source = 20;
    int num_source_val = 4;
    int num_target = 10;
    int num_target_test = 6;

    void validate() const; // throws ConfigError
};

/// Deterministic corpus: Voronoi class layouts, per-class colors and
/// sinusoidal textures, appearance drifting smoothly with location, and a
/// global color affine plus texture-frequency scaling on the target domain
/// parameterized by shift_strength. Every patch derives its own seeds from
/// (texture_seed, patch_id), so generation order cannot change content.
std::vector<GeoSample> generate_world(const WorldConfig& cfg);

/// Aligned crop of image and labels; coordinate and ids are patch-level
/// metadata and stay unchanged. Throws ConfigError when size exceeds the
/// patch.
GeoSample random_crop(const GeoSample& sample, int size, Rng& rng);

// Non-overlapping tiling (row-major tile order) and its exact inverse.
// Dimensions must be divisible by the tile size (ShapeError otherwise).
std::vector<RgbImage> tile_rgb(const RgbImage& img, int tile);
RgbImage merge_rgb(const std::vector<RgbImage>& tiles, int height, int width);
std::vector<GrayImage> tile_gray(const GrayImage& img, int tile);
GrayImage merge_gray(const std::vector<GrayImage>& tiles, int height, int width);

/// Writes <id>.ppm, <id>_mask.pgm, <id>.json per patch plus manifest.json.
void write_corpus(const std::filesystem::path& dir, const WorldConfig& cfg,
                  const std::vector<GeoSample>& samples);

struct Corpus {
    WorldConfig config;
    std::vector<GeoSample> samples;

    std::vector<const GeoSample*> split(SplitTag tag) const;
};

Corpus load_corpus(const std::filesystem::path& dir);

} // namespace segdesic
