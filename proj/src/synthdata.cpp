#include "crg/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "crg/errors.hpp"

namespace crg::synthdata {

void SceneSpec::validate() const {
    if (height < 8 || width < 8) {
        throw ConfigError("scene must be at least 8x8");
    }
    if (k < 2 || k > 255) {
        throw ConfigError("scene k must lie in [2, 255], got " + std::to_string(k));
    }
    if (n_regions < k) {
        throw ConfigError("n_regions (" + std::to_string(n_regions) + ") must be >= k (" + std::to_string(k) + ")");
    }
    if (!(noise_sigma >= 0.0)) {
        throw ConfigError("noise_sigma must be nonnegative");
    }
}

std::array<double, 3> class_color(int c, int k) {
    // Evenly spaced hues on a circle around mid-grey.
    const double angle = 2.0 * std::numbers::pi * (c - 1) / k;
    std::array<double, 3> rgb{};
    for (int ch = 0; ch < 3; ++ch) {
        rgb[ch] = 0.5 + 0.3 * std::cos(angle + 2.0 * std::numbers::pi * ch / 3.0);
    }
    return rgb;
}

namespace {

struct Point {
    double r;
    double c;
};

// Convex polygon from sorted random angles around a centre.
std::vector<Point> random_convex(std::mt19937_64& rng, double cr, double cc, double radius) {
    std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
    std::uniform_real_distribution<double> stretch(0.7, 1.0);
    std::uniform_int_distribution<int> vertices(5, 9);
    std::vector<double> angles(static_cast<std::size_t>(vertices(rng)));
    for (double& a : angles) {
        a = angle(rng);
    }
    std::sort(angles.begin(), angles.end());
    const double rad = radius * stretch(rng);
    std::vector<Point> poly;
    for (double a : angles) {
        poly.push_back({cr + rad * std::sin(a), cc + rad * std::cos(a)});
    }
    return poly;
}

bool inside_convex(const std::vector<Point>& poly, double r, double c) {
    // Vertices are counter-clockwise in (c, r) space; a point is inside when
    // it sits on the same side of every edge.
    bool pos = false;
    bool neg = false;
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const auto& a = poly[i];
        const auto& b = poly[(i + 1) % poly.size()];
        const double cross = (b.c - a.c) * (r - a.r) - (b.r - a.r) * (c - a.c);
        pos = pos || cross > 0.0;
        neg = neg || cross < 0.0;
    }
    return !(pos && neg);
}

grid::LabelMatrix place_shapes(const SceneSpec& spec, std::mt19937_64& rng) {
    grid::LabelMatrix gt(spec.height, spec.width);
    std::fill(gt.labels().begin(), gt.labels().end(), 1);
    const int shortest = std::min(spec.height, spec.width);
    std::uniform_int_distribution<int> any_class(1, spec.k);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int i = 0; i < spec.n_regions; ++i) {
        const int cls = i < spec.k - 1 ? i + 2 : any_class(rng);
        if (unit(rng) < 0.5) {
            std::uniform_int_distribution<int> extent(std::max(2, shortest / 8), std::max(3, shortest / 2));
            const int rh = extent(rng);
            const int rw = extent(rng);
            std::uniform_int_distribution<int> top(0, spec.height - rh);
            std::uniform_int_distribution<int> left(0, spec.width - rw);
            const int r0 = top(rng);
            const int c0 = left(rng);
            for (int r = r0; r < r0 + rh; ++r) {
                for (int c = c0; c < c0 + rw; ++c) {
                    gt.at(r, c) = cls;
                }
            }
        } else {
            const double radius = shortest * (0.1 + 0.15 * unit(rng));
            const double cr = spec.height * unit(rng);
            const double cc = spec.width * unit(rng);
            const auto poly = random_convex(rng, cr, cc, radius);
            for (int r = 0; r < spec.height; ++r) {
                for (int c = 0; c < spec.width; ++c) {
                    if (inside_convex(poly, r + 0.5, c + 0.5)) {
                        gt.at(r, c) = cls;
                    }
                }
            }
        }
    }
    return gt;
}

bool all_classes_present(const grid::LabelMatrix& gt, int k) {
    std::vector<bool> seen(static_cast<std::size_t>(k) + 1, false);
    for (int v : gt.labels()) {
        seen[v] = true;
    }
    return std::all_of(seen.begin() + 1, seen.end(), [](bool b) { return b; });
}

}  // namespace

Scene gen_scene(const SceneSpec& spec) {
    spec.validate();
    std::mt19937_64 rng(spec.seed);
    constexpr int kMaxAttempts = 100;
    grid::LabelMatrix gt;
    bool ok = false;
    for (int attempt = 0; attempt < kMaxAttempts && !ok; ++attempt) {
        gt = place_shapes(spec, rng);
        ok = all_classes_present(gt, spec.k);
    }
    if (!ok) {
        throw GenerationError("could not place every class after " + std::to_string(kMaxAttempts) + " attempts");
    }

    grid::Raster image(spec.height, spec.width, 3);
    std::normal_distribution<double> noise(0.0, 1.0);
    for (int r = 0; r < spec.height; ++r) {
        for (int c = 0; c < spec.width; ++c) {
            const auto color = class_color(gt.at(r, c), spec.k);
            for (int ch = 0; ch < 3; ++ch) {
                const double v = color[ch] + spec.noise_sigma * noise(rng);
                image.at(r, c, ch) = std::clamp(v, 0.0, 1.0);
            }
        }
    }
    if (spec.background_ignore) {
        for (int& v : gt.labels()) {
            v = v == 1 ? 0 : v;
        }
    }
    return {std::move(image), std::move(gt)};
}

grid::LabelMatrix sample_points(const grid::LabelMatrix& dense_gt, int points_per_class, std::uint64_t seed) {
    if (points_per_class < 1) {
        throw ConfigError("points_per_class must be >= 1");
    }
    std::mt19937_64 rng(seed);
    grid::LabelMatrix points(dense_gt.height(), dense_gt.width());
    const int k = dense_gt.max_label();
    for (int cls = 1; cls <= k; ++cls) {
        std::vector<std::size_t> support;
        for (std::size_t i = 0; i < dense_gt.size(); ++i) {
            if (dense_gt.labels()[i] == cls) {
                support.push_back(i);
            }
        }
        std::vector<std::size_t> picked;
        std::sample(support.begin(), support.end(), std::back_inserter(picked),
                    static_cast<std::size_t>(points_per_class), rng);
        for (auto i : picked) {
            points.labels()[i] = cls;
        }
    }
    return points;
}

}  // namespace crg::synthdata
