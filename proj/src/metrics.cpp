#include "crg/metrics.hpp"

#include <numeric>
#include <string>

#include "crg/errors.hpp"

namespace crg::metrics {

ConfusionMatrix::ConfusionMatrix(int k) : k_(k), counts_(static_cast<std::size_t>(k) * k, 0) {
    if (k < 1) {
        throw DomainError("confusion matrix needs k >= 1");
    }
}

ConfusionMatrix::ConfusionMatrix(int k, std::vector<std::uint64_t> counts) : k_(k), counts_(std::move(counts)) {
    if (k < 1 || counts_.size() != static_cast<std::size_t>(k) * k) {
        throw ShapeError("confusion counts do not form a k x k matrix");
    }
}

std::uint64_t ConfusionMatrix::total() const {
    return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0});
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
    if (other.k_ != k_) {
        throw ShapeError("cannot merge confusion matrices of different size");
    }
    for (std::size_t i = 0; i < counts_.size(); ++i) {
        counts_[i] += other.counts_[i];
    }
    return *this;
}

ConfusionMatrix confusion(const grid::LabelMatrix& pred, const grid::LabelMatrix& gt, int k) {
    if (!pred.same_geometry(gt)) {
        throw ShapeError("prediction " + std::to_string(pred.height()) + "x" + std::to_string(pred.width()) +
                         " does not match ground truth " + std::to_string(gt.height()) + "x" +
                         std::to_string(gt.width()));
    }
    ConfusionMatrix cm(k);
    for (std::size_t i = 0; i < gt.size(); ++i) {
        const int t = gt.labels()[i];
        if (t == 0) {
            continue;
        }
        const int p = pred.labels()[i];
        if (t < 0 || t > k || p < 1 || p > k) {
            throw DomainError("label outside [1, " + std::to_string(k) + "] at pixel " + std::to_string(i));
        }
        ++cm.at(t, p);
    }
    return cm;
}

Scores scores(const ConfusionMatrix& cm) {
    const auto total = cm.total();
    if (total == 0) {
        throw DomainError("cannot score an empty confusion matrix");
    }
    const int k = cm.classes();
    Scores s;
    s.f1.assign(k, 0.0);
    s.iou.assign(k, 0.0);
    s.present.assign(k, false);
    std::uint64_t trace = 0;
    int present = 0;
    for (int c = 1; c <= k; ++c) {
        std::uint64_t fp = 0;
        std::uint64_t fn = 0;
        for (int j = 1; j <= k; ++j) {
            if (j != c) {
                fp += cm.at(j, c);
                fn += cm.at(c, j);
            }
        }
        const auto tp = cm.at(c, c);
        trace += tp;
        if (tp + fp + fn == 0) {
            continue;
        }
        const auto tpd = static_cast<double>(tp);
        const auto err = static_cast<double>(fp + fn);
        s.present[c - 1] = true;
        s.f1[c - 1] = 2.0 * tpd / (2.0 * tpd + err);
        s.iou[c - 1] = tpd / (tpd + err);
        s.mean_f1 += s.f1[c - 1];
        s.mean_iou += s.iou[c - 1];
        ++present;
    }
    s.mean_f1 /= present;
    s.mean_iou /= present;
    s.overall_accuracy = static_cast<double>(trace) / static_cast<double>(total);
    return s;
}

}  // namespace crg::metrics
