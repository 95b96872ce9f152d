#pragma once

#include <cstdint>
#include <vector>

#include "crg/grid.hpp"

namespace crg::metrics {

// k x k pixel counts; rows are ground truth, columns are predictions.
// Pixels whose ground truth is 0 are not counted.
class ConfusionMatrix {
public:
    explicit ConfusionMatrix(int k);
    ConfusionMatrix(int k, std::vector<std::uint64_t> counts);

    int classes() const { return k_; }
    std::uint64_t& at(int truth, int pred) { return counts_[static_cast<std::size_t>(truth - 1) * k_ + pred - 1]; }
    std::uint64_t at(int truth, int pred) const {
        return counts_[static_cast<std::size_t>(truth - 1) * k_ + pred - 1];
    }
    std::uint64_t total() const;

    ConfusionMatrix& operator+=(const ConfusionMatrix& other);

private:
    int k_;
    std::vector<std::uint64_t> counts_;
};

ConfusionMatrix confusion(const grid::LabelMatrix& pred, const grid::LabelMatrix& gt, int k);

struct Scores {
    std::vector<double> f1;   // per class, index c - 1
    std::vector<double> iou;  // per class
    std::vector<bool> present;  // false when TP + FP + FN == 0
    double mean_f1 = 0.0;
    double mean_iou = 0.0;
    double overall_accuracy = 0.0;
};

// F1, IoU, their means over present classes, and overall accuracy.
Scores scores(const ConfusionMatrix& cm);

}  // namespace crg::metrics
