#include "segdesic/image_io.hpp"

#include <fstream>
#include <string>

#include "segdesic/errors.hpp"

namespace segdesic {

namespace {

void check_dims(int width, int height, const char* what) {
    if (width <= 0 || height <= 0)
        throw ShapeError(std::string(what) + ": non-positive raster dimensions");
}

// Reads one whitespace-delimited token, skipping '#' comments.
std::string next_token(std::istream& in) {
    std::string tok;
    int c;
    while ((c = in.get()) != std::char_traits<char>::eof()) {
        if (c == '#') {
            while ((c = in.get()) != std::char_traits<char>::eof() && c != '\n') {
            }
            continue;
        }
        if (std::isspace(c)) {
            if (!tok.empty()) return tok;
            continue;
        }
        tok.push_back(static_cast<char>(c));
    }
    return tok;
}

struct PnmHeader {
    int width;
    int height;
};

PnmHeader read_header(std::istream& in, const char* magic, const std::filesystem::path& path) {
    std::string m = next_token(in);
    if (m != magic)
        throw IoError(std::string("pnm: '") + path.string() + "' is not a " + magic + " file");
    std::string ws = next_token(in), hs = next_token(in), maxs = next_token(in);
    if (ws.empty() || hs.empty() || maxs.empty())
        throw IoError("pnm: truncated header in '" + path.string() + "'");
    int w = std::stoi(ws), h = std::stoi(hs), maxval = std::stoi(maxs);
    if (w <= 0 || h <= 0) throw IoError("pnm: bad dimensions in '" + path.string() + "'");
    if (maxval != 255) throw IoError("pnm: only maxval 255 supported in '" + path.string() + "'");
    return PnmHeader{w, h};
}

} // namespace

RgbImage make_rgb(int width, int height) {
    check_dims(width, height, "make_rgb");
    RgbImage img;
    img.width = width;
    img.height = height;
    img.pixels.assign(static_cast<std::size_t>(width) * height * 3, 0);
    return img;
}

GrayImage make_gray(int width, int height) {
    check_dims(width, height, "make_gray");
    GrayImage img;
    img.width = width;
    img.height = height;
    img.pixels.assign(static_cast<std::size_t>(width) * height, 0);
    return img;
}

void write_ppm(const std::filesystem::path& path, const RgbImage& img) {
    check_dims(img.width, img.height, "write_ppm");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("write_ppm: cannot open '" + path.string() + "'");
    out << "P6\n" << img.width << " " << img.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.pixels.data()),
              static_cast<std::streamsize>(img.pixels.size()));
    if (!out) throw IoError("write_ppm: write failed for '" + path.string() + "'");
}

RgbImage read_ppm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("read_ppm: cannot open '" + path.string() + "'");
    PnmHeader h = read_header(in, "P6", path);
    RgbImage img = make_rgb(h.width, h.height);
    in.read(reinterpret_cast<char*>(img.pixels.data()),
            static_cast<std::streamsize>(img.pixels.size()));
    if (in.gcount() != static_cast<std::streamsize>(img.pixels.size()))
        throw IoError("read_ppm: truncated pixel data in '" + path.string() + "'");
    return img;
}

void write_pgm(const std::filesystem::path& path, const GrayImage& img) {
    check_dims(img.width, img.height, "write_pgm");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("write_pgm: cannot open '" + path.string() + "'");
    out << "P5\n" << img.width << " " << img.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.pixels.data()),
              static_cast<std::streamsize>(img.pixels.size()));
    if (!out) throw IoError("write_pgm: write failed for '" + path.string() + "'");
}

GrayImage read_pgm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("read_pgm: cannot open '" + path.string() + "'");
    PnmHeader h = read_header(in, "P5", path);
    GrayImage img = make_gray(h.width, h.height);
    in.read(reinterpret_cast<char*>(img.pixels.data()),
            static_cast<std::streamsize>(img.pixels.size()));
    if (in.gcount() != static_cast<std::streamsize>(img.pixels.size()))
        throw IoError("read_pgm: truncated pixel data in '" + path.string() + "'");
    return img;
}

} // namespace segdesic
