#pragma once

#include "crg/grid.hpp"

namespace crg::regiongrow {

struct GrowParams {
    double tau = 0.95;  // confidence threshold in (0, 1]
};

// E initialised from the sparse annotation matrix.
grid::LabelMatrix init_expanded(const grid::LabelMatrix& points);

// Seeded region growing to a fixed point. An unlabeled pixel u takes label c
// when argmax p_b(u) == c (lowest index on ties), p_b(u, c) >= tau, and u is
// 8-connected to a pixel already holding c. Labeled pixels never change,
// including seeds whose label disagrees with p_b.
grid::LabelMatrix grow(const grid::LabelMatrix& expanded, const grid::Raster& base_probs, GrowParams params);

// Independent reference for grow(): one breadth-first flood per class over
// that class's admissible pixels, unioned with the seeds.
grid::LabelMatrix grow_oracle(const grid::LabelMatrix& points, const grid::Raster& base_probs, GrowParams params);

}  // namespace crg::regiongrow
