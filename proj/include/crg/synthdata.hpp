#pragma once

#include <array>
#include <cstdint>

#include "crg/grid.hpp"

namespace crg::synthdata {

struct SceneSpec {
    int height = 64;
    int width = 64;
    int k = 4;
    int n_regions = 8;
    double noise_sigma = 0.1;
    std::uint64_t seed = 0;
    // Mark the background class as 0 (ignored) instead of class 1.
    bool background_ignore = false;

    void validate() const;
};

struct Scene {
    grid::Raster image;      // 3 channels in [0, 1]
    grid::LabelMatrix gt;    // dense labels
};

// Mean RGB of class c (1-based) for a k-class palette.
std::array<double, 3> class_color(int c, int k);

// Background class 1 overlaid with axis-aligned rectangles and convex
// polygons of random classes, later shapes occluding earlier ones. Every
// class covers at least one pixel; pixel values are the class color plus
// Gaussian noise, clamped to [0, 1].
Scene gen_scene(const SceneSpec& spec);

// Up to `points_per_class` pixels per class present in `dense_gt`, drawn
// uniformly without replacement. All other pixels are 0.
grid::LabelMatrix sample_points(const grid::LabelMatrix& dense_gt, int points_per_class, std::uint64_t seed);

}  // namespace crg::synthdata
