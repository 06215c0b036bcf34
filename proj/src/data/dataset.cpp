#include "latpoison/data/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <regex>

#include "latpoison/rng.hpp"

namespace latpoison::data {

std::size_t Dataset::count(int label) const {
    return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), label));
}

void Dataset::validate() const {
    if (images.size() != labels.size()) {
        throw std::invalid_argument("dataset: " + std::to_string(images.size()) + " images but " +
                                    std::to_string(labels.size()) + " labels");
    }
    for (std::size_t i = 0; i < images.size(); ++i) {
        if (images[i].size() != image_dim()) {
            throw std::invalid_argument("dataset: sample " + std::to_string(i) + " has " +
                                        std::to_string(images[i].size()) + " pixels, expected " +
                                        std::to_string(image_dim()));
        }
        for (double v : images[i]) {
            if (!(v >= 0.0 && v <= 1.0)) {
                throw std::invalid_argument("dataset: pixel outside [0, 1] in sample " +
                                            std::to_string(i));
            }
        }
        if (labels[i] != 0 && labels[i] != 1) {
            throw std::invalid_argument("dataset: non-binary label in sample " + std::to_string(i));
        }
    }
}

void Dataset::require_both_classes(const std::string& context) const {
    validate();
    if (count(0) == 0 || count(1) == 0) {
        throw std::invalid_argument(context + ": dataset must contain both classes (class 0: " +
                                    std::to_string(count(0)) +
                                    ", class 1: " + std::to_string(count(1)) + ")");
    }
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
    Dataset out;
    out.width = width;
    out.height = height;
    out.source_descriptor = source_descriptor;
    out.images.reserve(indices.size());
    out.labels.reserve(indices.size());
    for (auto i : indices) {
        out.images.push_back(images.at(i));
        out.labels.push_back(labels.at(i));
    }
    return out;
}

Dataset Dataset::with_label(int label) const {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == label) {
            idx.push_back(i);
        }
    }
    return subset(idx);
}

ad::Tensor Dataset::image_batch(std::span<const std::size_t> indices) const {
    std::vector<double> flat;
    flat.reserve(indices.size() * image_dim());
    for (auto i : indices) {
        const auto& img = images.at(i);
        flat.insert(flat.end(), img.begin(), img.end());
    }
    return ad::Tensor::from({indices.size(), image_dim()}, std::move(flat));
}

ad::Tensor Dataset::image_batch() const {
    std::vector<std::size_t> all(size());
    for (std::size_t i = 0; i < all.size(); ++i) {
        all[i] = i;
    }
    return image_batch(all);
}

ad::Tensor Dataset::label_batch(std::span<const std::size_t> indices) const {
    std::vector<double> flat;
    flat.reserve(indices.size());
    for (auto i : indices) {
        flat.push_back(static_cast<double>(labels.at(i)));
    }
    return ad::Tensor::from({indices.size(), 1}, std::move(flat));
}

FeatureBox bar_box(std::size_t width, std::size_t height) {
    const std::size_t rows = std::max<std::size_t>(2, height / 4);
    const std::size_t gap = std::max<std::size_t>(1, height / 16);
    const std::size_t margin = std::max<std::size_t>(1, width / 8);
    FeatureBox box;
    box.bottom = height - 1 - gap;
    box.top = box.bottom + 1 - rows;
    box.left = margin;
    box.right = width - 1 - margin;
    return box;
}

Dataset generate_synthetic(std::size_t n, std::size_t width, std::size_t height,
                           std::uint64_t seed) {
    if (n % 2 != 0) {
        throw std::invalid_argument("generate_synthetic: sample count must be even, got " +
                                    std::to_string(n));
    }
    if (width < 8 || height < 8) {
        throw std::invalid_argument("generate_synthetic: width and height must be at least 8");
    }
    constexpr double kNoiseSd = 0.05;
    constexpr double kBarIntensity = 1.0;
    const auto box = bar_box(width, height);
    const double w = static_cast<double>(width);
    const double h = static_cast<double>(height);

    Rng rng(seed);
    Dataset ds;
    ds.width = width;
    ds.height = height;
    ds.source_descriptor = "synthetic n=" + std::to_string(n) + " width=" + std::to_string(width) +
                           " height=" + std::to_string(height) + " seed=" + std::to_string(seed) +
                           " bar=" + std::to_string(box.top) + ":" + std::to_string(box.bottom) +
                           "," + std::to_string(box.left) + ":" + std::to_string(box.right);
    ds.images.reserve(n);
    ds.labels.reserve(n);
    for (std::size_t s = 0; s < n; ++s) {
        const int label = static_cast<int>(s % 2);
        // Blurred blob "face" with jittered centre, spread and brightness.
        const double cx = 0.5 * w + rng.uniform(-0.1, 0.1) * w;
        const double cy = 0.4 * h + rng.uniform(-0.06, 0.06) * h;
        const double spread = rng.uniform(0.12, 0.18) * w;
        const double amplitude = rng.uniform(0.9, 1.3);
        std::vector<double> img(width * height);
        for (std::size_t r = 0; r < height; ++r) {
            for (std::size_t c = 0; c < width; ++c) {
                const double dx = static_cast<double>(c) - cx;
                const double dy = static_cast<double>(r) - cy;
                double v = amplitude * std::exp(-(dx * dx + dy * dy) / (2.0 * spread * spread));
                if (label == 1 && box.contains(r, c)) {
                    v += kBarIntensity;
                }
                v += rng.normal(0.0, kNoiseSd);
                img[r * width + c] = std::clamp(v, 0.0, 1.0);
            }
        }
        ds.images.push_back(std::move(img));
        ds.labels.push_back(label);
    }
    return ds;
}

std::vector<bool> feature_mask(const Dataset& dataset) {
    static const std::regex pattern(R"(bar=(\d+):(\d+),(\d+):(\d+))");
    std::smatch m;
    if (!std::regex_search(dataset.source_descriptor, m, pattern)) {
        return {};
    }
    FeatureBox box{std::stoull(m[1]), std::stoull(m[2]), std::stoull(m[3]), std::stoull(m[4])};
    std::vector<bool> mask(dataset.image_dim(), false);
    for (std::size_t r = 0; r < dataset.height; ++r) {
        for (std::size_t c = 0; c < dataset.width; ++c) {
            mask[r * dataset.width + c] = box.contains(r, c);
        }
    }
    return mask;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(
    const Dataset& dataset, std::size_t test_count, std::uint64_t seed) {
    const std::size_t n = dataset.size();
    if (test_count == 0 || test_count >= n) {
        throw SplitError("split: test count " + std::to_string(test_count) +
                         " must lie strictly between 0 and " + std::to_string(n));
    }
    std::vector<std::size_t> by_class[2];
    for (std::size_t i = 0; i < n; ++i) {
        by_class[dataset.labels[i] == 1 ? 1 : 0].push_back(i);
    }
    const std::size_t n1 = by_class[1].size();
    const std::size_t n0 = by_class[0].size();
    if (n0 < 2 || n1 < 2 || test_count < 2 || n - test_count < 2) {
        throw SplitError("split: cannot keep both classes on both sides (class 0: " +
                         std::to_string(n0) + ", class 1: " + std::to_string(n1) +
                         ", test count: " + std::to_string(test_count) + ")");
    }
    auto test1 = static_cast<std::size_t>(
        std::llround(static_cast<double>(test_count) * static_cast<double>(n1) / static_cast<double>(n)));
    test1 = std::clamp<std::size_t>(test1, 1, std::min(n1 - 1, test_count - 1));
    std::size_t test0 = test_count - test1;
    if (test0 < 1 || test0 > n0 - 1) {
        throw SplitError("split: stratification impossible for test count " +
                         std::to_string(test_count));
    }
    Rng rng(seed);
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
    const std::size_t take[2] = {test0, test1};
    for (int cls = 0; cls < 2; ++cls) {
        auto& idx = by_class[cls];
        rng.shuffle(std::span<std::size_t>(idx));
        test.insert(test.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(take[cls]));
        train.insert(train.end(), idx.begin() + static_cast<std::ptrdiff_t>(take[cls]), idx.end());
    }
    std::sort(train.begin(), train.end());
    std::sort(test.begin(), test.end());
    return {std::move(train), std::move(test)};
}

std::pair<Dataset, Dataset> split(const Dataset& dataset, std::size_t test_count,
                                  std::uint64_t seed) {
    const auto [train, test] = split_indices(dataset, test_count, seed);
    return {dataset.subset(train), dataset.subset(test)};
}

}  // namespace latpoison::data
