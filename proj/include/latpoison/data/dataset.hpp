#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "latpoison/autodiff/tensor.hpp"

namespace latpoison::data {

struct Dataset {
    std::vector<std::vector<double>> images;  // each width * height, row-major, in [0, 1]
    std::vector<int> labels;                  // 0 or 1
    std::size_t width = 0;
    std::size_t height = 0;
    std::string source_descriptor;

    std::size_t size() const { return images.size(); }
    std::size_t image_dim() const { return width * height; }
    std::size_t count(int label) const;

    // Throws unless sizes agree, pixels lie in [0, 1] and labels are binary.
    void validate() const;
    // validate() plus both classes present.
    void require_both_classes(const std::string& context) const;

    Dataset subset(std::span<const std::size_t> indices) const;
    // All samples with the given label, original order preserved.
    Dataset with_label(int label) const;

    // [n x image_dim] constant tensor of the selected samples.
    ad::Tensor image_batch(std::span<const std::size_t> indices) const;
    ad::Tensor image_batch() const;
    // [n x 1] constant tensor of labels as reals.
    ad::Tensor label_batch(std::span<const std::size_t> indices) const;
};

// Synthetic two-class "face with/without smile bar" images.
Dataset generate_synthetic(std::size_t n, std::size_t width, std::size_t height,
                           std::uint64_t seed);

// Row/column bounds (inclusive) of the class-1 bar for a given image size.
struct FeatureBox {
    std::size_t top = 0;
    std::size_t bottom = 0;
    std::size_t left = 0;
    std::size_t right = 0;

    bool contains(std::size_t row, std::size_t col) const {
        return row >= top && row <= bottom && col >= left && col <= right;
    }
};

FeatureBox bar_box(std::size_t width, std::size_t height);

// Per-pixel mask recovered from a synthetic dataset's source descriptor; empty
// when the descriptor does not carry one (e.g. loaded IDX data).
std::vector<bool> feature_mask(const Dataset& dataset);

enum class IdxErrorKind { io, bad_magic, truncated, count_mismatch };

class IdxError : public std::runtime_error {
  public:
    IdxError(IdxErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}
    IdxErrorKind kind() const { return kind_; }

  private:
    IdxErrorKind kind_;
};

// Labels whose raw value is in positive_labels map to 1, all others to 0.
Dataset load_idx(const std::filesystem::path& image_path, const std::filesystem::path& label_path,
                 const std::set<int>& positive_labels);

// Pixels are quantized to round(255 * v).
void save_idx(const Dataset& dataset, const std::filesystem::path& image_path,
              const std::filesystem::path& label_path);

class SplitError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Seeded stratified split; both sides keep both classes.
std::pair<Dataset, Dataset> split(const Dataset& dataset, std::size_t test_count,
                                  std::uint64_t seed);

// Index form of split(): (train indices, test indices) into the original.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(
    const Dataset& dataset, std::size_t test_count, std::uint64_t seed);

}  // namespace latpoison::data
