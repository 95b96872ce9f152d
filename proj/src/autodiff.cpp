#include "crg/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "crg/errors.hpp"

namespace crg::ad {

std::size_t shape_size(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        s += (i ? "," : "") + std::to_string(shape[i]);
    }
    return s + "]";
}

Tensor::Tensor(Shape s) : shape(std::move(s)), values(shape_size(shape), 0.0) {}

Tensor::Tensor(Shape s, std::vector<double> v) : shape(std::move(s)), values(std::move(v)) {
    if (values.size() != shape_size(shape)) {
        throw ShapeError("tensor of shape " + shape_string(shape) + " given " + std::to_string(values.size()) +
                         " values");
    }
}

Tensor Tensor::filled(Shape s, double v) {
    Tensor t(std::move(s));
    std::fill(t.values.begin(), t.values.end(), v);
    return t;
}

double Tensor::item() const {
    if (!is_scalar()) {
        throw ContractError("item() on tensor of shape " + shape_string(shape));
    }
    return values[0];
}

const Tensor& Var::value() const { return tape->value(id); }

Var Tape::constant(Tensor value) {
    nodes_.push_back({std::move(value), {}, {}, false, false});
    return {this, nodes_.size() - 1};
}

Var Tape::parameter(Tensor value) {
    nodes_.push_back({std::move(value), {}, {}, true, true});
    parameters_.push_back(nodes_.size() - 1);
    return {this, nodes_.size() - 1};
}

Var Tape::record(Tensor value, std::vector<std::size_t> inputs, Adjoint adjoint) {
    bool needs = false;
    for (auto in : inputs) {
        needs = needs || nodes_[in].needs_grad;
    }
    nodes_.push_back({std::move(value), std::move(inputs), std::move(adjoint), false, needs});
    return {this, nodes_.size() - 1};
}

std::vector<Tensor> Tape::backward(Var loss) const {
    if (loss.tape != this) {
        throw ContractError("loss node belongs to a different tape");
    }
    if (!nodes_[loss.id].value.is_scalar()) {
        throw ContractError("backward needs a scalar loss, got shape " + shape_string(nodes_[loss.id].value.shape));
    }
    std::vector<Tensor> grads(loss.id + 1);
    std::vector<bool> reached(loss.id + 1, false);
    for (std::size_t i = 0; i <= loss.id; ++i) {
        if (nodes_[i].needs_grad) {
            grads[i] = Tensor(nodes_[i].value.shape);
        }
    }
    if (nodes_[loss.id].needs_grad) {
        grads[loss.id].values[0] = 1.0;
        reached[loss.id] = true;
    }
    for (std::size_t i = loss.id + 1; i-- > 0;) {
        const Node& node = nodes_[i];
        if (!reached[i] || !node.adjoint) {
            continue;
        }
        node.adjoint(grads[i], grads);
        for (auto in : node.inputs) {
            reached[in] = reached[in] || nodes_[in].needs_grad;
        }
    }
    std::vector<Tensor> out;
    out.reserve(parameters_.size());
    for (auto p : parameters_) {
        out.push_back(p <= loss.id ? std::move(grads[p]) : Tensor(nodes_[p].value.shape));
    }
    return out;
}

namespace {

void require_same_tape(Var a, Var b) {
    if (a.tape != b.tape) {
        throw ContractError("operands recorded on different tapes");
    }
}

void require_same_shape(Var a, Var b, const char* op) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
    }
}

bool wants(const std::vector<Tensor>& grads, std::size_t id) { return !grads[id].values.empty(); }

}  // namespace

Var add(Var a, Var b) {
    require_same_tape(a, b);
    require_same_shape(a, b, "add");
    Tensor out = a.value();
    const auto& bv = b.value().values;
    for (std::size_t i = 0; i < out.size(); ++i) {
        out.values[i] += bv[i];
    }
    return a.tape->record(std::move(out), {a.id, b.id}, [ia = a.id, ib = b.id](const Tensor& g, std::vector<Tensor>& grads) {
        for (auto id : {ia, ib}) {
            if (wants(grads, id)) {
                auto& dst = grads[id].values;
                for (std::size_t i = 0; i < dst.size(); ++i) {
                    dst[i] += g.values[i];
                }
            }
        }
    });
}

Var sub(Var a, Var b) {
    require_same_tape(a, b);
    require_same_shape(a, b, "sub");
    Tensor out = a.value();
    const auto& bv = b.value().values;
    for (std::size_t i = 0; i < out.size(); ++i) {
        out.values[i] -= bv[i];
    }
    return a.tape->record(std::move(out), {a.id, b.id}, [ia = a.id, ib = b.id](const Tensor& g, std::vector<Tensor>& grads) {
        if (wants(grads, ia)) {
            auto& dst = grads[ia].values;
            for (std::size_t i = 0; i < dst.size(); ++i) {
                dst[i] += g.values[i];
            }
        }
        if (wants(grads, ib)) {
            auto& dst = grads[ib].values;
            for (std::size_t i = 0; i < dst.size(); ++i) {
                dst[i] -= g.values[i];
            }
        }
    });
}

Var mul(Var a, Var b) {
    require_same_tape(a, b);
    require_same_shape(a, b, "mul");
    Tensor out = a.value();
    const auto& bv = b.value().values;
    for (std::size_t i = 0; i < out.size(); ++i) {
        out.values[i] *= bv[i];
    }
    Tape* tape = a.tape;
    return tape->record(std::move(out), {a.id, b.id},
                        [tape, ia = a.id, ib = b.id](const Tensor& g, std::vector<Tensor>& grads) {
                            const auto& av = tape->value(ia).values;
                            const auto& bv = tape->value(ib).values;
                            if (wants(grads, ia)) {
                                auto& dst = grads[ia].values;
                                for (std::size_t i = 0; i < dst.size(); ++i) {
                                    dst[i] += g.values[i] * bv[i];
                                }
                            }
                            if (wants(grads, ib)) {
                                auto& dst = grads[ib].values;
                                for (std::size_t i = 0; i < dst.size(); ++i) {
                                    dst[i] += g.values[i] * av[i];
                                }
                            }
                        });
}

Var scale(Var a, double s) {
    Tensor out = a.value();
    for (double& v : out.values) {
        v *= s;
    }
    return a.tape->record(std::move(out), {a.id}, [ia = a.id, s](const Tensor& g, std::vector<Tensor>& grads) {
        auto& dst = grads[ia].values;
        for (std::size_t i = 0; i < dst.size(); ++i) {
            dst[i] += s * g.values[i];
        }
    });
}

Var relu(Var a) {
    Tensor out = a.value();
    for (double& v : out.values) {
        v = v > 0.0 ? v : 0.0;
    }
    Tape* tape = a.tape;
    return tape->record(std::move(out), {a.id}, [tape, ia = a.id](const Tensor& g, std::vector<Tensor>& grads) {
        const auto& av = tape->value(ia).values;
        auto& dst = grads[ia].values;
        for (std::size_t i = 0; i < dst.size(); ++i) {
            if (av[i] > 0.0) {
                dst[i] += g.values[i];
            }
        }
    });
}

Var square(Var a) {
    Tensor out = a.value();
    for (double& v : out.values) {
        v *= v;
    }
    Tape* tape = a.tape;
    return tape->record(std::move(out), {a.id}, [tape, ia = a.id](const Tensor& g, std::vector<Tensor>& grads) {
        const auto& av = tape->value(ia).values;
        auto& dst = grads[ia].values;
        for (std::size_t i = 0; i < dst.size(); ++i) {
            dst[i] += 2.0 * av[i] * g.values[i];
        }
    });
}

Var log(Var a, double floor) {
    Tensor out = a.value();
    for (double& v : out.values) {
        v = std::log(std::max(v, floor));
    }
    Tape* tape = a.tape;
    return tape->record(std::move(out), {a.id}, [tape, ia = a.id, floor](const Tensor& g, std::vector<Tensor>& grads) {
        const auto& av = tape->value(ia).values;
        auto& dst = grads[ia].values;
        for (std::size_t i = 0; i < dst.size(); ++i) {
            if (av[i] > floor) {
                dst[i] += g.values[i] / av[i];
            }
        }
    });
}

Var matmul(Var a, Var b) {
    require_same_tape(a, b);
    const auto& as = a.shape();
    const auto& bs = b.shape();
    if (as.size() != 2 || bs.size() != 2 || as[1] != bs[0]) {
        throw ShapeError("matmul: incompatible shapes " + shape_string(as) + " x " + shape_string(bs));
    }
    const std::size_t m = as[0], n = as[1], p = bs[1];
    Tensor out({m, p});
    const auto& av = a.value().values;
    const auto& bv = b.value().values;
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const double x = av[i * n + j];
            for (std::size_t q = 0; q < p; ++q) {
                out.values[i * p + q] += x * bv[j * p + q];
            }
        }
    }
    Tape* tape = a.tape;
    return tape->record(std::move(out), {a.id, b.id},
                        [tape, ia = a.id, ib = b.id, m, n, p](const Tensor& g, std::vector<Tensor>& grads) {
                            const auto& av = tape->value(ia).values;
                            const auto& bv = tape->value(ib).values;
                            const bool want_a = wants(grads, ia);
                            const bool want_b = wants(grads, ib);
                            for (std::size_t i = 0; i < m; ++i) {
                                for (std::size_t j = 0; j < n; ++j) {
                                    double acc = 0.0;
                                    for (std::size_t q = 0; q < p; ++q) {
                                        const double gq = g.values[i * p + q];
                                        acc += gq * bv[j * p + q];
                                        if (want_b) {
                                            grads[ib].values[j * p + q] += av[i * n + j] * gq;
                                        }
                                    }
                                    if (want_a) {
                                        grads[ia].values[i * n + j] += acc;
                                    }
                                }
                            }
                        });
}

Var conv2d(Var input, Var weight, Var bias) {
    require_same_tape(input, weight);
    require_same_tape(input, bias);
    const auto& xs = input.shape();
    const auto& ws = weight.shape();
    const auto& bs = bias.shape();
    if (xs.size() != 3 || ws.size() != 4 || bs.size() != 1 || ws[0] != ws[1] || ws[0] % 2 == 0 ||
        ws[2] != xs[2] || bs[0] != ws[3]) {
        throw ShapeError("conv2d: incompatible shapes input " + shape_string(xs) + ", weight " + shape_string(ws) +
                         ", bias " + shape_string(bs));
    }
    const long h = static_cast<long>(xs[0]);
    const long w = static_cast<long>(xs[1]);
    const std::size_t cin = xs[2];
    const long ks = static_cast<long>(ws[0]);
    const std::size_t cout = ws[3];
    const long pad = ks / 2;

    Tensor out({xs[0], xs[1], cout});
    const auto& xv = input.value().values;
    const auto& wv = weight.value().values;
    const auto& bv = bias.value().values;
    for (long r = 0; r < h; ++r) {
        for (long c = 0; c < w; ++c) {
            double* o = out.values.data() + (r * w + c) * cout;
            std::copy(bv.begin(), bv.end(), o);
            for (long dy = 0; dy < ks; ++dy) {
                const long rr = r + dy - pad;
                if (rr < 0 || rr >= h) {
                    continue;
                }
                for (long dx = 0; dx < ks; ++dx) {
                    const long cc = c + dx - pad;
                    if (cc < 0 || cc >= w) {
                        continue;
                    }
                    const double* x = xv.data() + (rr * w + cc) * cin;
                    const double* wk = wv.data() + (dy * ks + dx) * cin * cout;
                    for (std::size_t i = 0; i < cin; ++i) {
                        const double xi = x[i];
                        const double* wrow = wk + i * cout;
                        for (std::size_t q = 0; q < cout; ++q) {
                            o[q] += xi * wrow[q];
                        }
                    }
                }
            }
        }
    }

    Tape* tape = input.tape;
    return tape->record(
        std::move(out), {input.id, weight.id, bias.id},
        [tape, ix = input.id, iw = weight.id, ib = bias.id, h, w, cin, ks, cout, pad](const Tensor& g,
                                                                                      std::vector<Tensor>& grads) {
            const auto& xv = tape->value(ix).values;
            const auto& wv = tape->value(iw).values;
            const bool want_x = wants(grads, ix);
            const bool want_w = wants(grads, iw);
            if (wants(grads, ib)) {
                auto& gb = grads[ib].values;
                for (long p = 0; p < h * w; ++p) {
                    for (std::size_t q = 0; q < cout; ++q) {
                        gb[q] += g.values[p * cout + q];
                    }
                }
            }
            if (!want_x && !want_w) {
                return;
            }
            for (long r = 0; r < h; ++r) {
                for (long c = 0; c < w; ++c) {
                    const double* go = g.values.data() + (r * w + c) * cout;
                    for (long dy = 0; dy < ks; ++dy) {
                        const long rr = r + dy - pad;
                        if (rr < 0 || rr >= h) {
                            continue;
                        }
                        for (long dx = 0; dx < ks; ++dx) {
                            const long cc = c + dx - pad;
                            if (cc < 0 || cc >= w) {
                                continue;
                            }
                            const std::size_t xoff = (rr * w + cc) * cin;
                            const std::size_t woff = (dy * ks + dx) * cin * cout;
                            for (std::size_t i = 0; i < cin; ++i) {
                                const double* wrow = wv.data() + woff + i * cout;
                                if (want_x) {
                                    double acc = 0.0;
                                    for (std::size_t q = 0; q < cout; ++q) {
                                        acc += go[q] * wrow[q];
                                    }
                                    grads[ix].values[xoff + i] += acc;
                                }
                                if (want_w) {
                                    const double xi = xv[xoff + i];
                                    double* gw = grads[iw].values.data() + woff + i * cout;
                                    for (std::size_t q = 0; q < cout; ++q) {
                                        gw[q] += xi * go[q];
                                    }
                                }
                            }
                        }
                    }
                }
            }
        });
}

Var softmax(Var a) {
    const auto& s = a.shape();
    if (s.empty() || s.back() == 0) {
        throw ShapeError("softmax needs a nonempty last dimension");
    }
    const std::size_t k = s.back();
    const std::size_t rows = a.value().size() / k;
    Tensor out = a.value();
    for (std::size_t r = 0; r < rows; ++r) {
        double* v = out.values.data() + r * k;
        const double mx = *std::max_element(v, v + k);
        double total = 0.0;
        for (std::size_t c = 0; c < k; ++c) {
            v[c] = std::exp(v[c] - mx);
            total += v[c];
        }
        for (std::size_t c = 0; c < k; ++c) {
            v[c] /= total;
        }
    }
    Tape* tape = a.tape;
    const std::size_t self = tape->size();
    return tape->record(std::move(out), {a.id}, [tape, ia = a.id, self, k, rows](const Tensor& g, std::vector<Tensor>& grads) {
        const auto& y = tape->value(self).values;
        auto& dst = grads[ia].values;
        for (std::size_t r = 0; r < rows; ++r) {
            const std::size_t off = r * k;
            double dot = 0.0;
            for (std::size_t c = 0; c < k; ++c) {
                dot += g.values[off + c] * y[off + c];
            }
            for (std::size_t c = 0; c < k; ++c) {
                dst[off + c] += y[off + c] * (g.values[off + c] - dot);
            }
        }
    });
}

Var sum(Var a) {
    double total = 0.0;
    for (double v : a.value().values) {
        total += v;
    }
    return a.tape->record(Tensor::scalar(total), {a.id}, [ia = a.id](const Tensor& g, std::vector<Tensor>& grads) {
        for (double& d : grads[ia].values) {
            d += g.values[0];
        }
    });
}

Var mean(Var a) {
    const std::size_t n = a.value().size();
    if (n == 0) {
        throw ShapeError("mean of an empty tensor");
    }
    return scale(sum(a), 1.0 / static_cast<double>(n));
}

Var gather(Var a, std::vector<std::size_t> indices) {
    const auto& av = a.value().values;
    Tensor out({indices.size()});
    for (std::size_t j = 0; j < indices.size(); ++j) {
        if (indices[j] >= av.size()) {
            throw ShapeError("gather index " + std::to_string(indices[j]) + " out of range " +
                             std::to_string(av.size()));
        }
        out.values[j] = av[indices[j]];
    }
    return a.tape->record(std::move(out), {a.id},
                          [ia = a.id, idx = std::move(indices)](const Tensor& g, std::vector<Tensor>& grads) {
                              auto& dst = grads[ia].values;
                              for (std::size_t j = 0; j < idx.size(); ++j) {
                                  dst[idx[j]] += g.values[j];
                              }
                          });
}

Sorted sort_descending(Var a) {
    if (a.shape().size() != 1) {
        throw ShapeError("sort_descending expects a 1-D tensor, got " + shape_string(a.shape()));
    }
    const auto& av = a.value().values;
    std::vector<std::size_t> perm(av.size());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::stable_sort(perm.begin(), perm.end(), [&av](std::size_t i, std::size_t j) { return av[i] > av[j]; });
    Tensor out({av.size()});
    for (std::size_t j = 0; j < perm.size(); ++j) {
        out.values[j] = av[perm[j]];
    }
    Var sorted = a.tape->record(std::move(out), {a.id}, [ia = a.id, perm](const Tensor& g, std::vector<Tensor>& grads) {
        auto& dst = grads[ia].values;
        for (std::size_t j = 0; j < perm.size(); ++j) {
            dst[perm[j]] += g.values[j];
        }
    });
    return {sorted, std::move(perm)};
}

Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f, const Tensor& x, double eps) {
    Tensor grad(x.shape);
    Tensor probe = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double orig = probe.values[i];
        probe.values[i] = orig + eps;
        const double up = f(probe);
        probe.values[i] = orig - eps;
        const double down = f(probe);
        probe.values[i] = orig;
        grad.values[i] = (up - down) / (2.0 * eps);
    }
    return grad;
}

double max_relative_error(const Tensor& a, const Tensor& b, double floor) {
    if (a.shape != b.shape) {
        throw ShapeError("max_relative_error: shape mismatch");
    }
    double diff = 0.0;
    double scale = floor;
    for (std::size_t i = 0; i < a.size(); ++i) {
        diff = std::max(diff, std::abs(a.values[i] - b.values[i]));
        scale = std::max({scale, std::abs(a.values[i]), std::abs(b.values[i])});
    }
    return diff / scale;
}

}  // namespace crg::ad
