#include <array>
#include <cmath>
#include <fstream>
#include <iterator>

#include "latpoison/data/dataset.hpp"

namespace latpoison::data {

namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::vector<unsigned char> read_all(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IdxError(IdxErrorKind::io, "idx: cannot open '" + path.string() + "'");
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<unsigned char>& bytes, std::size_t offset,
                        const std::filesystem::path& path) {
    if (bytes.size() < offset + 4) {
        throw IdxError(IdxErrorKind::truncated, "idx: '" + path.string() + "' truncated in header");
    }
    return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
           (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void write_be32(std::ofstream& out, std::uint32_t v) {
    const std::array<char, 4> b{static_cast<char>(v >> 24), static_cast<char>(v >> 16),
                                static_cast<char>(v >> 8), static_cast<char>(v)};
    out.write(b.data(), b.size());
}

}  // namespace

Dataset load_idx(const std::filesystem::path& image_path, const std::filesystem::path& label_path,
                 const std::set<int>& positive_labels) {
    const auto image_bytes = read_all(image_path);
    const auto label_bytes = read_all(label_path);

    const auto image_magic = read_be32(image_bytes, 0, image_path);
    if (image_magic != kImageMagic) {
        throw IdxError(IdxErrorKind::bad_magic, "idx: '" + image_path.string() +
                                                    "' has bad image magic number");
    }
    const auto label_magic = read_be32(label_bytes, 0, label_path);
    if (label_magic != kLabelMagic) {
        throw IdxError(IdxErrorKind::bad_magic, "idx: '" + label_path.string() +
                                                    "' has bad label magic number");
    }
    const std::size_t count = read_be32(image_bytes, 4, image_path);
    const std::size_t rows = read_be32(image_bytes, 8, image_path);
    const std::size_t cols = read_be32(image_bytes, 12, image_path);
    const std::size_t label_count = read_be32(label_bytes, 4, label_path);
    if (count != label_count) {
        throw IdxError(IdxErrorKind::count_mismatch,
                       "idx: " + std::to_string(count) + " images but " +
                           std::to_string(label_count) + " labels");
    }
    constexpr std::size_t kImageHeader = 16;
    constexpr std::size_t kLabelHeader = 8;
    const std::size_t pixels = rows * cols;
    if (image_bytes.size() < kImageHeader + count * pixels) {
        throw IdxError(IdxErrorKind::truncated, "idx: '" + image_path.string() +
                                                    "' truncated: expected " +
                                                    std::to_string(count * pixels) + " pixel bytes");
    }
    if (label_bytes.size() < kLabelHeader + count) {
        throw IdxError(IdxErrorKind::truncated, "idx: '" + label_path.string() +
                                                    "' truncated: expected " +
                                                    std::to_string(count) + " labels");
    }

    Dataset ds;
    ds.width = cols;
    ds.height = rows;
    ds.source_descriptor = "idx images=" + image_path.filename().string() +
                           " labels=" + label_path.filename().string();
    ds.images.reserve(count);
    ds.labels.reserve(count);
    for (std::size_t s = 0; s < count; ++s) {
        std::vector<double> img(pixels);
        const auto* src = image_bytes.data() + kImageHeader + s * pixels;
        for (std::size_t p = 0; p < pixels; ++p) {
            img[p] = static_cast<double>(src[p]) / 255.0;
        }
        ds.images.push_back(std::move(img));
        const int raw = label_bytes[kLabelHeader + s];
        ds.labels.push_back(positive_labels.contains(raw) ? 1 : 0);
    }
    return ds;
}

void save_idx(const Dataset& dataset, const std::filesystem::path& image_path,
              const std::filesystem::path& label_path) {
    dataset.validate();
    std::ofstream images(image_path, std::ios::binary);
    std::ofstream labels(label_path, std::ios::binary);
    if (!images || !labels) {
        throw IdxError(IdxErrorKind::io, "idx: cannot write '" + image_path.string() + "' / '" +
                                             label_path.string() + "'");
    }
    const auto n = static_cast<std::uint32_t>(dataset.size());
    write_be32(images, kImageMagic);
    write_be32(images, n);
    write_be32(images, static_cast<std::uint32_t>(dataset.height));
    write_be32(images, static_cast<std::uint32_t>(dataset.width));
    for (const auto& img : dataset.images) {
        for (double v : img) {
            images.put(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0))));
        }
    }
    write_be32(labels, kLabelMagic);
    write_be32(labels, n);
    for (int l : dataset.labels) {
        labels.put(static_cast<char>(l));
    }
}

}  // namespace latpoison::data
