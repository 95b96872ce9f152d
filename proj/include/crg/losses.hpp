#pragma once

#include <vector>

#include "crg/autodiff.hpp"
#include "crg/grid.hpp"

namespace crg::losses {

inline constexpr double kProbabilityFloor = 1e-12;

struct LossWeights {
    double lambda_con = 1.0;
};

// Mean negative log-likelihood of the annotated class over the labeled pixels
// of `points`. `probs` is an [H, W, k] probability tensor.
ad::Var seg_loss(ad::Var probs, const grid::LabelMatrix& points);

// |{pred = c} n {target = c}| / |{pred = c} u {target = c}|, or 1 when the
// class is absent from both.
double jaccard_index(const grid::LabelMatrix& pred, const grid::LabelMatrix& target, int c);

// Prediction errors over the labeled pixels of `expanded`, flattened
// row-major as [n_labeled, k]: 1 - p for the labeled class, p otherwise.
ad::Var error_tensor(ad::Var probs, const grid::LabelMatrix& expanded);

// Lovász extension gradient of the Jaccard loss for a ground-truth
// indicator already ordered by descending error.
std::vector<double> lovasz_gradient(const std::vector<bool>& sorted_foreground);

// Lovász-Softmax over labeled pixels, averaged over the classes present in
// `expanded`. The sort permutation is frozen for the backward pass.
ad::Var lovasz_softmax(ad::Var probs, const grid::LabelMatrix& expanded);

// (1/n) sum_i sum_c (p_b(i,c) - p_e(i,c))^2 over all n pixels.
ad::Var consistency_loss(ad::Var base_probs, ad::Var expanded_probs);

// Mean per-pixel KL(soften(p_b, T) || soften(p_e, T)) with
// soften(p, T) = softmax(log(p) / T).
ad::Var kl_consistency_loss(ad::Var base_probs, ad::Var expanded_probs, double temperature);

ad::Var full_loss(ad::Var seg, ad::Var exp, ad::Var con, LossWeights weights);

}  // namespace crg::losses
