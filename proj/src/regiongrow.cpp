#include "crg/regiongrow.hpp"

#include <deque>
#include <string>
#include <vector>

#include "crg/errors.hpp"

namespace crg::regiongrow {

namespace {

void validate(const grid::LabelMatrix& labels, const grid::Raster& probs, GrowParams params) {
    if (!labels.same_geometry(probs)) {
        throw ShapeError("label matrix " + std::to_string(labels.height()) + "x" + std::to_string(labels.width()) +
                         " does not match probability map " + std::to_string(probs.height()) + "x" +
                         std::to_string(probs.width()));
    }
    if (!(params.tau > 0.0 && params.tau <= 1.0)) {
        throw DomainError("tau must lie in (0, 1]");
    }
    if (labels.max_label() > probs.channels()) {
        throw DomainError("label exceeds the number of probability channels");
    }
}

// Class (1-based) a pixel may be grown into, or 0 if none.
std::vector<int> admissible_classes(const grid::Raster& probs, double tau) {
    std::vector<int> out(probs.pixel_count(), 0);
    for (int r = 0; r < probs.height(); ++r) {
        for (int c = 0; c < probs.width(); ++c) {
            auto px = probs.pixel(r, c);
            const int best = grid::argmax_channel(px);
            if (px[best] >= tau) {
                out[static_cast<std::size_t>(r) * probs.width() + c] = best + 1;
            }
        }
    }
    return out;
}

constexpr int kNeighbours[8][2] = {{-1, -1}, {-1, 0}, {-1, 1}, {0, -1}, {0, 1}, {1, -1}, {1, 0}, {1, 1}};

}  // namespace

grid::LabelMatrix init_expanded(const grid::LabelMatrix& points) { return points; }

grid::LabelMatrix grow(const grid::LabelMatrix& expanded, const grid::Raster& base_probs, GrowParams params) {
    validate(expanded, base_probs, params);
    const int h = expanded.height();
    const int w = expanded.width();
    const auto admissible = admissible_classes(base_probs, params.tau);

    grid::LabelMatrix out = expanded;
    auto& labels = out.labels();
    std::vector<std::size_t> frontier;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] > 0) {
            frontier.push_back(i);
        }
    }
    while (!frontier.empty()) {
        const std::size_t l = frontier.back();
        frontier.pop_back();
        const int r = static_cast<int>(l / w);
        const int c = static_cast<int>(l % w);
        for (const auto& d : kNeighbours) {
            const int rr = r + d[0];
            const int cc = c + d[1];
            if (rr < 0 || rr >= h || cc < 0 || cc >= w) {
                continue;
            }
            const std::size_t u = static_cast<std::size_t>(rr) * w + cc;
            if (labels[u] == 0 && admissible[u] == labels[l]) {
                labels[u] = labels[l];
                frontier.push_back(u);
            }
        }
    }
    return out;
}

grid::LabelMatrix grow_oracle(const grid::LabelMatrix& points, const grid::Raster& base_probs, GrowParams params) {
    validate(points, base_probs, params);
    const int h = points.height();
    const int w = points.width();
    const int k = base_probs.channels();
    grid::LabelMatrix out = points;

    for (int cls = 1; cls <= k; ++cls) {
        // Pixels that pass both confidence criteria for this class.
        std::vector<char> region(points.size(), 0);
        for (int r = 0; r < h; ++r) {
            for (int c = 0; c < w; ++c) {
                auto px = base_probs.pixel(r, c);
                bool is_max = true;
                for (int j = 0; j < k; ++j) {
                    // strict > before cls, >= after: lowest index wins ties
                    if ((j < cls - 1 && px[j] >= px[cls - 1]) || (j > cls - 1 && px[j] > px[cls - 1])) {
                        is_max = false;
                    }
                }
                region[static_cast<std::size_t>(r) * w + c] = is_max && px[cls - 1] >= params.tau;
            }
        }
        std::vector<char> visited(points.size(), 0);
        std::deque<std::pair<int, int>> queue;
        for (int r = 0; r < h; ++r) {
            for (int c = 0; c < w; ++c) {
                if (points.at(r, c) == cls) {
                    visited[static_cast<std::size_t>(r) * w + c] = 1;
                    queue.emplace_back(r, c);
                }
            }
        }
        while (!queue.empty()) {
            auto [r, c] = queue.front();
            queue.pop_front();
            for (int dr = -1; dr <= 1; ++dr) {
                for (int dc = -1; dc <= 1; ++dc) {
                    const int rr = r + dr;
                    const int cc = c + dc;
                    if ((dr == 0 && dc == 0) || rr < 0 || rr >= h || cc < 0 || cc >= w) {
                        continue;
                    }
                    const std::size_t u = static_cast<std::size_t>(rr) * w + cc;
                    if (visited[u] || !region[u] || points.at(rr, cc) != 0) {
                        continue;
                    }
                    visited[u] = 1;
                    out.at(rr, cc) = cls;
                    queue.emplace_back(rr, cc);
                }
            }
        }
    }
    return out;
}

}  // namespace crg::regiongrow
