#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

namespace crg::grid {

// Dense H x W x C grid of doubles, row-major and channel-last:
// index = (r * width + c) * channels + ch.
class Raster {
public:
    Raster() = default;
    Raster(int height, int width, int channels);
    Raster(int height, int width, int channels, std::vector<double> data);

    int height() const { return height_; }
    int width() const { return width_; }
    int channels() const { return channels_; }
    std::size_t pixel_count() const { return static_cast<std::size_t>(height_) * width_; }

    double& at(int r, int c, int ch) { return data_[index(r, c, ch)]; }
    double at(int r, int c, int ch) const { return data_[index(r, c, ch)]; }

    std::span<double> pixel(int r, int c) { return {data_.data() + index(r, c, 0), static_cast<std::size_t>(channels_)}; }
    std::span<const double> pixel(int r, int c) const {
        return {data_.data() + index(r, c, 0), static_cast<std::size_t>(channels_)};
    }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    bool same_geometry(const Raster& other) const {
        return height_ == other.height_ && width_ == other.width_;
    }

    bool operator==(const Raster&) const = default;

private:
    std::size_t index(int r, int c, int ch) const {
        return (static_cast<std::size_t>(r) * width_ + c) * channels_ + ch;
    }

    int height_ = 0;
    int width_ = 0;
    int channels_ = 0;
    std::vector<double> data_;
};

// H x W integer labels in [0, k]; 0 marks an unlabeled (ignored) pixel.
class LabelMatrix {
public:
    LabelMatrix() = default;
    LabelMatrix(int height, int width);
    LabelMatrix(int height, int width, std::vector<int> labels);

    int height() const { return height_; }
    int width() const { return width_; }
    std::size_t size() const { return labels_.size(); }

    int& at(int r, int c) { return labels_[static_cast<std::size_t>(r) * width_ + c]; }
    int at(int r, int c) const { return labels_[static_cast<std::size_t>(r) * width_ + c]; }

    std::vector<int>& labels() { return labels_; }
    const std::vector<int>& labels() const { return labels_; }

    std::size_t labeled_count() const;
    int max_label() const;

    template <typename Grid>
    bool same_geometry(const Grid& other) const {
        return height_ == other.height() && width_ == other.width();
    }

    bool operator==(const LabelMatrix&) const = default;

private:
    int height_ = 0;
    int width_ = 0;
    std::vector<int> labels_;
};

// Square window with its top-left corner at (row, col).
struct PatchSpec {
    int row = 0;
    int col = 0;
    int size = 0;

    bool operator==(const PatchSpec&) const = default;
};

Raster one_hot(const LabelMatrix& labels, int k);

Raster crop(const Raster& raster, const PatchSpec& spec);
LabelMatrix crop(const LabelMatrix& labels, const PatchSpec& spec);

// Sliding-window origins covering an h x w image. The last row/column of
// tiles is clamped so its far edge lands exactly on the image border.
std::vector<PatchSpec> tile_positions(int h, int w, int patch, int stride);

// Averages overlapping k-channel probability tiles and renormalizes each
// pixel. Throws CoverageError if any pixel is left uncovered.
Raster stitch(std::span<const std::pair<PatchSpec, Raster>> tiles, int h, int w, int k);

bool is_probability_map(const Raster& raster, double tolerance = 1e-5);

// Per-pixel argmax as 1-based class labels; ties go to the lowest class.
LabelMatrix argmax_labels(const Raster& probabilities);

int argmax_channel(std::span<const double> values);

}  // namespace crg::grid
