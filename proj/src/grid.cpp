#include "crg/grid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "crg/errors.hpp"

namespace crg::grid {

namespace {

void check_dims(int height, int width, int channels) {
    if (height < 0 || width < 0 || channels < 0) {
        throw ShapeError("negative raster dimension");
    }
}

void check_inside(int height, int width, const PatchSpec& spec) {
    if (spec.size <= 0 || spec.row < 0 || spec.col < 0 || spec.row + spec.size > height ||
        spec.col + spec.size > width) {
        throw GeometryError("patch (" + std::to_string(spec.row) + "," + std::to_string(spec.col) + "," +
                            std::to_string(spec.size) + ") does not fit inside " + std::to_string(height) +
                            "x" + std::to_string(width));
    }
}

}  // namespace

Raster::Raster(int height, int width, int channels)
    : height_(height), width_(width), channels_(channels) {
    check_dims(height, width, channels);
    data_.assign(static_cast<std::size_t>(height) * width * channels, 0.0);
}

Raster::Raster(int height, int width, int channels, std::vector<double> data)
    : height_(height), width_(width), channels_(channels), data_(std::move(data)) {
    check_dims(height, width, channels);
    if (data_.size() != static_cast<std::size_t>(height) * width * channels) {
        throw ShapeError("raster data length " + std::to_string(data_.size()) + " does not match " +
                         std::to_string(height) + "x" + std::to_string(width) + "x" + std::to_string(channels));
    }
}

LabelMatrix::LabelMatrix(int height, int width) : height_(height), width_(width) {
    check_dims(height, width, 1);
    labels_.assign(static_cast<std::size_t>(height) * width, 0);
}

LabelMatrix::LabelMatrix(int height, int width, std::vector<int> labels)
    : height_(height), width_(width), labels_(std::move(labels)) {
    check_dims(height, width, 1);
    if (labels_.size() != static_cast<std::size_t>(height) * width) {
        throw ShapeError("label count does not match matrix geometry");
    }
}

std::size_t LabelMatrix::labeled_count() const {
    return static_cast<std::size_t>(std::count_if(labels_.begin(), labels_.end(), [](int v) { return v > 0; }));
}

int LabelMatrix::max_label() const {
    return labels_.empty() ? 0 : *std::max_element(labels_.begin(), labels_.end());
}

Raster one_hot(const LabelMatrix& labels, int k) {
    Raster out(labels.height(), labels.width(), k);
    for (int r = 0; r < labels.height(); ++r) {
        for (int c = 0; c < labels.width(); ++c) {
            const int v = labels.at(r, c);
            if (v < 0 || v > k) {
                throw DomainError("label " + std::to_string(v) + " outside [0, " + std::to_string(k) + "]");
            }
            if (v > 0) {
                out.at(r, c, v - 1) = 1.0;
            }
        }
    }
    return out;
}

Raster crop(const Raster& raster, const PatchSpec& spec) {
    check_inside(raster.height(), raster.width(), spec);
    Raster out(spec.size, spec.size, raster.channels());
    const auto row_len = static_cast<std::size_t>(spec.size) * raster.channels();
    for (int r = 0; r < spec.size; ++r) {
        auto src = raster.pixel(spec.row + r, spec.col);
        std::copy_n(src.data(), row_len, out.pixel(r, 0).data());
    }
    return out;
}

LabelMatrix crop(const LabelMatrix& labels, const PatchSpec& spec) {
    check_inside(labels.height(), labels.width(), spec);
    LabelMatrix out(spec.size, spec.size);
    for (int r = 0; r < spec.size; ++r) {
        for (int c = 0; c < spec.size; ++c) {
            out.at(r, c) = labels.at(spec.row + r, spec.col + c);
        }
    }
    return out;
}

namespace {

// A stride wider than the patch would leave gaps, so the step is capped at
// the patch size.
std::vector<int> axis_origins(int extent, int patch, int stride) {
    const int step = std::min(stride, patch);
    std::vector<int> origins;
    for (int pos = 0;; pos += step) {
        if (pos + patch >= extent) {
            origins.push_back(extent - patch);
            break;
        }
        origins.push_back(pos);
    }
    return origins;
}

}  // namespace

std::vector<PatchSpec> tile_positions(int h, int w, int patch, int stride) {
    if (patch <= 0 || patch > h || patch > w) {
        throw GeometryError("patch " + std::to_string(patch) + " does not fit a " + std::to_string(h) + "x" +
                            std::to_string(w) + " image");
    }
    if (stride < 1) {
        throw GeometryError("stride must be >= 1");
    }
    std::vector<PatchSpec> tiles;
    for (int row : axis_origins(h, patch, stride)) {
        for (int col : axis_origins(w, patch, stride)) {
            tiles.push_back({row, col, patch});
        }
    }
    return tiles;
}

Raster stitch(std::span<const std::pair<PatchSpec, Raster>> tiles, int h, int w, int k) {
    Raster sum(h, w, k);
    std::vector<int> hits(static_cast<std::size_t>(h) * w, 0);
    for (const auto& [spec, tile] : tiles) {
        check_inside(h, w, spec);
        if (tile.height() != spec.size || tile.width() != spec.size || tile.channels() != k) {
            throw ShapeError("tile raster does not match its patch spec");
        }
        for (int r = 0; r < spec.size; ++r) {
            for (int c = 0; c < spec.size; ++c) {
                auto dst = sum.pixel(spec.row + r, spec.col + c);
                auto src = tile.pixel(r, c);
                for (int ch = 0; ch < k; ++ch) {
                    dst[ch] += src[ch];
                }
                ++hits[static_cast<std::size_t>(spec.row + r) * w + spec.col + c];
            }
        }
    }
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            const int n = hits[static_cast<std::size_t>(r) * w + c];
            if (n == 0) {
                throw CoverageError("pixel (" + std::to_string(r) + "," + std::to_string(c) + ") not covered by any tile");
            }
            auto px = sum.pixel(r, c);
            double total = 0.0;
            for (double& v : px) {
                v /= n;
                total += v;
            }
            for (double& v : px) {
                v /= total;
            }
        }
    }
    return sum;
}

bool is_probability_map(const Raster& raster, double tolerance) {
    for (int r = 0; r < raster.height(); ++r) {
        for (int c = 0; c < raster.width(); ++c) {
            double total = 0.0;
            for (double v : raster.pixel(r, c)) {
                if (!(v >= 0.0 && v <= 1.0)) {
                    return false;
                }
                total += v;
            }
            if (std::abs(total - 1.0) > tolerance) {
                return false;
            }
        }
    }
    return true;
}

int argmax_channel(std::span<const double> values) {
    int best = 0;
    for (int ch = 1; ch < static_cast<int>(values.size()); ++ch) {
        if (values[ch] > values[best]) {
            best = ch;
        }
    }
    return best;
}

LabelMatrix argmax_labels(const Raster& probabilities) {
    LabelMatrix out(probabilities.height(), probabilities.width());
    for (int r = 0; r < probabilities.height(); ++r) {
        for (int c = 0; c < probabilities.width(); ++c) {
            out.at(r, c) = argmax_channel(probabilities.pixel(r, c)) + 1;
        }
    }
    return out;
}

}  // namespace crg::grid
