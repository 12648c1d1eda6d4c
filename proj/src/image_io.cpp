#include "groupseg/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>

#include "groupseg/errors.hpp"

namespace groupseg {

namespace {

// Reads one whitespace-delimited header token, skipping '#' comment lines.
std::string read_header_token(std::istream& is) {
    std::string tok;
    int c;
    while ((c = is.get()) != EOF) {
        if (c == '#') {
            while ((c = is.get()) != EOF && c != '\n') {
            }
            continue;
        }
        if (std::isspace(c)) {
            if (!tok.empty()) return tok;
            continue;
        }
        tok.push_back(static_cast<char>(c));
    }
    if (tok.empty()) throw data_error("truncated image header");
    return tok;
}

std::int64_t header_int(std::istream& is, const std::string& what) {
    std::string tok = read_header_token(is);
    try {
        return std::stoll(tok);
    } catch (const std::exception&) {
        throw data_error("bad " + what + " in image header: '" + tok + "'");
    }
}

std::uint8_t to_byte(double v) {
    double s = std::round(std::clamp(v, 0.0, 1.0) * 255.0);
    return static_cast<std::uint8_t>(s);
}

}  // namespace

void write_ppm(const std::string& path, const RgbImage& img) {
    if (img.pixels.size() != static_cast<std::size_t>(img.width * img.height * 3))
        throw dim_error("image buffer does not match " + std::to_string(img.width) + "x" +
                        std::to_string(img.height) + "x3");
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw data_error("cannot open '" + path + "' for writing");
    os << "P6\n" << img.width << ' ' << img.height << "\n255\n";
    std::vector<std::uint8_t> bytes(img.pixels.size());
    for (std::size_t i = 0; i < bytes.size(); ++i) bytes[i] = to_byte(img.pixels[i]);
    os.write(reinterpret_cast<const char*>(bytes.data()),
             static_cast<std::streamsize>(bytes.size()));
    if (!os) throw data_error("write to '" + path + "' failed");
}

RgbImage read_ppm(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw data_error("cannot open image '" + path + "'");
    if (read_header_token(is) != "P6")
        throw data_error("'" + path + "' is not a binary P6 pixmap");
    RgbImage img;
    img.width = header_int(is, "width");
    img.height = header_int(is, "height");
    std::int64_t maxval = header_int(is, "maxval");
    if (img.width <= 0 || img.height <= 0 || maxval != 255)
        throw data_error("unsupported pixmap geometry in '" + path + "'");
    std::vector<std::uint8_t> bytes(static_cast<std::size_t>(img.width * img.height * 3));
    is.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!is) throw data_error("pixel data truncated in '" + path + "'");
    img.pixels.resize(bytes.size());
    for (std::size_t i = 0; i < bytes.size(); ++i) img.pixels[i] = bytes[i] / 255.0;
    return img;
}

void write_pgm(const std::string& path, const GrayImage& img) {
    if (img.pixels.size() != static_cast<std::size_t>(img.width * img.height))
        throw dim_error("mask buffer does not match " + std::to_string(img.width) + "x" +
                        std::to_string(img.height));
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw data_error("cannot open '" + path + "' for writing");
    os << "P5\n" << img.width << ' ' << img.height << "\n255\n";
    os.write(reinterpret_cast<const char*>(img.pixels.data()),
             static_cast<std::streamsize>(img.pixels.size()));
    if (!os) throw data_error("write to '" + path + "' failed");
}

GrayImage read_pgm(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw data_error("cannot open mask '" + path + "'");
    if (read_header_token(is) != "P5")
        throw data_error("'" + path + "' is not a binary P5 graymap");
    GrayImage img;
    img.width = header_int(is, "width");
    img.height = header_int(is, "height");
    std::int64_t maxval = header_int(is, "maxval");
    if (img.width <= 0 || img.height <= 0 || maxval != 255)
        throw data_error("unsupported graymap geometry in '" + path + "'");
    img.pixels.resize(static_cast<std::size_t>(img.width * img.height));
    is.read(reinterpret_cast<char*>(img.pixels.data()),
            static_cast<std::streamsize>(img.pixels.size()));
    if (!is) throw data_error("pixel data truncated in '" + path + "'");
    return img;
}

}  // namespace groupseg
