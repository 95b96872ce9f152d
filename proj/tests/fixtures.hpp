#pragma once

// Random instance generators shared by the unit and acceptance tests.

#include <algorithm>
#include <random>

#include "crg/grid.hpp"
#include "crg/regiongrow.hpp"

namespace crg::testing {

// Probability map with a blocky dominant-class field, varied confidence,
// and occasional exact ties.
inline grid::Raster random_prob_map(int h, int w, int k, std::mt19937_64& rng) {
    std::uniform_int_distribution<int> block_dist(1, 8);
    std::uniform_int_distribution<int> class_dist(0, k - 1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const int block = block_dist(rng);
    const int brows = (h + block - 1) / block;
    const int bcols = (w + block - 1) / block;
    std::vector<int> field(static_cast<std::size_t>(brows) * bcols);
    for (int& c : field) c = class_dist(rng);

    grid::Raster p(h, w, k);
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            auto px = p.pixel(r, c);
            const double kind = u(rng);
            if (kind < 0.04) {
                std::fill(px.begin(), px.end(), 1.0 / k);
                continue;
            }
            if (kind < 0.08) {
                const int a = class_dist(rng);
                int b = class_dist(rng);
                if (b == a) b = (a + 1) % k;
                std::fill(px.begin(), px.end(), 0.0);
                px[a] = 0.5;
                px[b] = 0.5;
                continue;
            }
            const int dominant = u(rng) < 0.85 ? field[static_cast<std::size_t>(r / block) * bcols + c / block]
                                               : class_dist(rng);
            const double conf = u(rng) < 0.6 ? 0.9 + 0.1 * u(rng) : u(rng);
            double rest = 0.0;
            for (int ch = 0; ch < k; ++ch) {
                px[ch] = ch == dominant ? 0.0 : u(rng);
                rest += px[ch];
            }
            for (int ch = 0; ch < k; ++ch) {
                px[ch] = ch == dominant ? conf : (1.0 - conf) * px[ch] / rest;
            }
        }
    }
    return p;
}

// Sparse seeds, sometimes disagreeing with the probability map.
inline grid::LabelMatrix random_seeds(int h, int w, int k, std::mt19937_64& rng) {
    grid::LabelMatrix y(h, w);
    const int n = std::uniform_int_distribution<int>(0, std::max(1, h * w / 20))(rng);
    std::uniform_int_distribution<int> rd(0, h - 1), cd(0, w - 1), ld(1, k);
    for (int i = 0; i < n; ++i) {
        y.at(rd(rng), cd(rng)) = ld(rng);
    }
    return y;
}

struct GrowInstance {
    grid::LabelMatrix seeds;
    grid::Raster probs;
    regiongrow::GrowParams params;
};

inline GrowInstance random_grow_instance(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> dim(1, 32), kd(2, 6), td(0, 2);
    const int h = dim(rng), w = dim(rng), k = kd(rng);
    const double taus[] = {0.5, 0.8, 0.95};
    GrowInstance inst;
    inst.probs = random_prob_map(h, w, k, rng);
    inst.seeds = random_seeds(h, w, k, rng);
    inst.params.tau = taus[td(rng)];
    return inst;
}

}  // namespace crg::testing
