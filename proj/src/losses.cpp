#include "crg/losses.hpp"

#include <optional>
#include <set>
#include <string>

#include "crg/errors.hpp"

namespace crg::losses {

namespace {

std::size_t channels_of(ad::Var probs, const grid::LabelMatrix& labels) {
    const auto& s = probs.shape();
    if (s.size() != 3 || s[0] != static_cast<std::size_t>(labels.height()) ||
        s[1] != static_cast<std::size_t>(labels.width())) {
        throw ShapeError("probability tensor " + ad::shape_string(s) + " does not match a " +
                         std::to_string(labels.height()) + "x" + std::to_string(labels.width()) + " label matrix");
    }
    const std::size_t k = s[2];
    if (labels.max_label() > static_cast<int>(k)) {
        throw DomainError("label exceeds class count " + std::to_string(k));
    }
    return k;
}

}  // namespace

ad::Var seg_loss(ad::Var probs, const grid::LabelMatrix& points) {
    const std::size_t k = channels_of(probs, points);
    std::vector<std::size_t> picks;
    const auto& labels = points.labels();
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] > 0) {
            picks.push_back(i * k + static_cast<std::size_t>(labels[i] - 1));
        }
    }
    if (picks.empty()) {
        throw EmptySupervisionError("segmentation loss needs at least one labeled pixel");
    }
    return ad::scale(ad::mean(ad::log(ad::gather(probs, std::move(picks)), kProbabilityFloor)), -1.0);
}

double jaccard_index(const grid::LabelMatrix& pred, const grid::LabelMatrix& target, int c) {
    if (!pred.same_geometry(target)) {
        throw ShapeError("jaccard_index: geometry mismatch");
    }
    std::size_t inter = 0;
    std::size_t uni = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const bool a = pred.labels()[i] == c;
        const bool b = target.labels()[i] == c;
        inter += a && b;
        uni += a || b;
    }
    return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

ad::Var error_tensor(ad::Var probs, const grid::LabelMatrix& expanded) {
    const std::size_t k = channels_of(probs, expanded);
    std::vector<std::size_t> picks;
    std::vector<double> sign;
    std::vector<double> offset;
    const auto& labels = expanded.labels();
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == 0) {
            continue;
        }
        for (std::size_t c = 0; c < k; ++c) {
            const bool is_target = static_cast<int>(c) + 1 == labels[i];
            picks.push_back(i * k + c);
            sign.push_back(is_target ? -1.0 : 1.0);
            offset.push_back(is_target ? 1.0 : 0.0);
        }
    }
    const ad::Shape shape{picks.size()};
    ad::Tape& tape = *probs.tape;
    auto picked = ad::gather(probs, std::move(picks));
    return ad::add(ad::mul(picked, tape.constant(ad::Tensor(shape, std::move(sign)))),
                   tape.constant(ad::Tensor(shape, std::move(offset))));
}

std::vector<double> lovasz_gradient(const std::vector<bool>& sorted_foreground) {
    const std::size_t n = sorted_foreground.size();
    double fg_total = 0.0;
    for (bool f : sorted_foreground) {
        fg_total += f;
    }
    std::vector<double> grad(n);
    double fg_seen = 0.0;
    double bg_seen = 0.0;
    double prev = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        (sorted_foreground[j] ? fg_seen : bg_seen) += 1.0;
        const double inter = fg_total - fg_seen;
        const double uni = fg_total + bg_seen;
        const double jaccard_loss = 1.0 - inter / uni;
        grad[j] = jaccard_loss - prev;
        prev = jaccard_loss;
    }
    return grad;
}

ad::Var lovasz_softmax(ad::Var probs, const grid::LabelMatrix& expanded) {
    const std::size_t k = channels_of(probs, expanded);
    std::vector<int> targets;
    for (int v : expanded.labels()) {
        if (v > 0) {
            targets.push_back(v);
        }
    }
    if (targets.empty()) {
        throw EmptySupervisionError("expansion loss needs at least one labeled pixel");
    }
    const std::set<int> present(targets.begin(), targets.end());
    ad::Tape& tape = *probs.tape;
    auto errors = error_tensor(probs, expanded);

    std::optional<ad::Var> total;
    for (int cls : present) {
        std::vector<std::size_t> column(targets.size());
        for (std::size_t j = 0; j < targets.size(); ++j) {
            column[j] = j * k + static_cast<std::size_t>(cls - 1);
        }
        auto sorted = ad::sort_descending(ad::gather(errors, std::move(column)));
        std::vector<bool> fg(targets.size());
        for (std::size_t j = 0; j < targets.size(); ++j) {
            fg[j] = targets[sorted.permutation[j]] == cls;
        }
        auto weights = tape.constant(ad::Tensor({targets.size()}, lovasz_gradient(fg)));
        auto term = ad::sum(ad::mul(sorted.values, weights));
        total = total ? ad::add(*total, term) : term;
    }
    return ad::scale(*total, 1.0 / static_cast<double>(present.size()));
}

ad::Var consistency_loss(ad::Var base_probs, ad::Var expanded_probs) {
    const auto& s = base_probs.shape();
    if (s != expanded_probs.shape() || s.size() != 3) {
        throw ShapeError("consistency_loss: shape mismatch " + ad::shape_string(s) + " vs " +
                         ad::shape_string(expanded_probs.shape()));
    }
    const double pixels = static_cast<double>(s[0] * s[1]);
    return ad::scale(ad::sum(ad::square(ad::sub(base_probs, expanded_probs))), 1.0 / pixels);
}

ad::Var kl_consistency_loss(ad::Var base_probs, ad::Var expanded_probs, double temperature) {
    if (!(temperature > 0.0)) {
        throw DomainError("temperature must be positive");
    }
    const auto& s = base_probs.shape();
    if (s != expanded_probs.shape() || s.size() != 3) {
        throw ShapeError("kl_consistency_loss: shape mismatch " + ad::shape_string(s) + " vs " +
                         ad::shape_string(expanded_probs.shape()));
    }
    auto soften = [temperature](ad::Var p) {
        return ad::softmax(ad::scale(ad::log(p, kProbabilityFloor), 1.0 / temperature));
    };
    constexpr double kTiny = 1e-300;
    auto target = soften(base_probs);
    auto approx = soften(expanded_probs);
    auto kl = ad::sum(ad::mul(target, ad::sub(ad::log(target, kTiny), ad::log(approx, kTiny))));
    return ad::scale(kl, 1.0 / static_cast<double>(s[0] * s[1]));
}

ad::Var full_loss(ad::Var seg, ad::Var exp, ad::Var con, LossWeights weights) {
    if (weights.lambda_con < 0.0) {
        throw DomainError("lambda_con must be nonnegative");
    }
    return ad::add(ad::add(seg, exp), ad::scale(con, weights.lambda_con));
}

}  // namespace crg::losses
