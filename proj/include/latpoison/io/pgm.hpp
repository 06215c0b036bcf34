#pragma once

#include <cstddef>
#include <filesystem>
#include <stdexcept>
#include <vector>

namespace latpoison::io {

class PgmError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct GrayImage {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<unsigned char> pixels;  // row-major
};

// Tiles equally sized images row-major, separated and surrounded by 1-pixel
// black lines: width = columns * w + columns + 1, height = rows * h + rows + 1.
// Pixel values are clamped to [0, 1] and quantized to round(255 * v).
GrayImage tile_grid(const std::vector<std::vector<double>>& images, std::size_t image_width,
                    std::size_t image_height, std::size_t columns);

std::vector<unsigned char> encode_pgm(const GrayImage& image);
GrayImage decode_pgm(const std::vector<unsigned char>& bytes);

void write_pgm(const GrayImage& image, const std::filesystem::path& path);
GrayImage read_pgm(const std::filesystem::path& path);

// tile_grid + write_pgm.
void render_grid(const std::vector<std::vector<double>>& images, std::size_t image_width,
                 std::size_t image_height, std::size_t columns, const std::filesystem::path& path);

}  // namespace latpoison::io
