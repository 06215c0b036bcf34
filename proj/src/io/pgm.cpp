#include "latpoison/io/pgm.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <string>

#include <fmt/format.h>

namespace latpoison::io {

GrayImage tile_grid(const std::vector<std::vector<double>>& images, std::size_t image_width,
                    std::size_t image_height, std::size_t columns) {
    if (images.empty()) {
        throw PgmError("render_grid: no images");
    }
    if (columns == 0) {
        throw PgmError("render_grid: columns must be positive");
    }
    const std::size_t dim = image_width * image_height;
    for (std::size_t i = 0; i < images.size(); ++i) {
        if (images[i].size() != dim) {
            throw PgmError(fmt::format("render_grid: image {} has {} pixels, expected {}x{}", i,
                                       images[i].size(), image_width, image_height));
        }
    }
    const std::size_t cols = std::min(columns, images.size());
    const std::size_t rows = (images.size() + cols - 1) / cols;

    GrayImage grid;
    grid.width = cols * image_width + cols + 1;
    grid.height = rows * image_height + rows + 1;
    grid.pixels.assign(grid.width * grid.height, 0);
    for (std::size_t i = 0; i < images.size(); ++i) {
        const std::size_t x0 = (i % cols) * (image_width + 1) + 1;
        const std::size_t y0 = (i / cols) * (image_height + 1) + 1;
        for (std::size_t r = 0; r < image_height; ++r) {
            for (std::size_t c = 0; c < image_width; ++c) {
                const double v = std::clamp(images[i][r * image_width + c], 0.0, 1.0);
                grid.pixels[(y0 + r) * grid.width + x0 + c] =
                    static_cast<unsigned char>(std::lround(255.0 * v));
            }
        }
    }
    return grid;
}

std::vector<unsigned char> encode_pgm(const GrayImage& image) {
    if (image.pixels.size() != image.width * image.height) {
        throw PgmError("encode_pgm: pixel count does not match dimensions");
    }
    const std::string header = fmt::format("P5\n{} {}\n255\n", image.width, image.height);
    std::vector<unsigned char> out(header.begin(), header.end());
    out.insert(out.end(), image.pixels.begin(), image.pixels.end());
    return out;
}

GrayImage decode_pgm(const std::vector<unsigned char>& bytes) {
    std::size_t pos = 0;
    auto token = [&]() {
        while (pos < bytes.size() && std::isspace(bytes[pos])) {
            ++pos;
        }
        std::string t;
        while (pos < bytes.size() && !std::isspace(bytes[pos])) {
            t.push_back(static_cast<char>(bytes[pos++]));
        }
        return t;
    };
    if (token() != "P5") {
        throw PgmError("decode_pgm: not a binary PGM (P5)");
    }
    GrayImage image;
    try {
        image.width = std::stoul(token());
        image.height = std::stoul(token());
        if (std::stoul(token()) != 255) {
            throw PgmError("decode_pgm: only maxval 255 is supported");
        }
    } catch (const std::logic_error&) {
        throw PgmError("decode_pgm: malformed header");
    }
    ++pos;  // single whitespace before raster
    if (bytes.size() < pos || bytes.size() - pos != image.width * image.height) {
        throw PgmError("decode_pgm: raster size does not match header");
    }
    image.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos), bytes.end());
    return image;
}

void write_pgm(const GrayImage& image, const std::filesystem::path& path) {
    const auto bytes = encode_pgm(image);
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw PgmError("cannot write '" + path.string() + "'");
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw PgmError("write failed for '" + path.string() + "'");
    }
}

GrayImage read_pgm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw PgmError("cannot read '" + path.string() + "'");
    }
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    return decode_pgm(bytes);
}

void render_grid(const std::vector<std::vector<double>>& images, std::size_t image_width,
                 std::size_t image_height, std::size_t columns, const std::filesystem::path& path) {
    write_pgm(tile_grid(images, image_width, image_height, columns), path);
}

}  // namespace latpoison::io
