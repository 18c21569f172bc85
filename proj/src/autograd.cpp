#include "mvmt/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_set>

#include "mvmt/errors.hpp"

namespace mvmt::ag {

namespace {

void check_rank(const Var& v, std::size_t rank, const char* what) {
    if (v->value.rank() != rank) {
        raise(ErrorKind::Dimension,
              std::string(what) + ": expected rank " + std::to_string(rank) + " tensor, got " +
                  v->value.shape_str());
    }
}

Var make_node(Tensor value, std::vector<Var> parents, std::function<void(Node&)> back) {
    auto node = std::make_shared<Node>();
    node->value = std::move(value);
    node->parents = std::move(parents);
    for (const auto& p : node->parents) {
        if (p->requires_grad) {
            node->requires_grad = true;
            break;
        }
    }
    if (node->requires_grad) node->backward = std::move(back);
    return node;
}

} // namespace

void Node::accumulate(const Tensor& g) {
    if (!requires_grad) return;
    if (grad.empty()) grad = Tensor::zeros(value.shape());
    grad += g;
}

Var constant(Tensor value) {
    auto node = std::make_shared<Node>();
    node->value = std::move(value);
    return node;
}

Var leaf(Tensor value) {
    auto node = std::make_shared<Node>();
    node->value = std::move(value);
    node->requires_grad = true;
    return node;
}

void backward(const Var& root) {
    if (!root) raise(ErrorKind::State, "backward on null node");
    if (root->value.size() != 1) {
        raise(ErrorKind::Dimension, "backward root must be scalar, got " + root->value.shape_str());
    }
    // Post-order DFS, iterative: graphs can reach ~1e5 nodes per batch.
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(root.get(), 0);
    visited.insert(root.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node* parent = node->parents[next++].get();
            if (parent->requires_grad && visited.insert(parent).second) {
                stack.emplace_back(parent, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    root->grad = Tensor({1}, {1.0});
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* node = *it;
        if (node->backward && !node->grad.empty()) node->backward(*node);
    }
}

// --- linear maps -----------------------------------------------------------

Var affine(const Var& input, const Var& weight, const Var& bias) {
    check_rank(input, 1, "affine input");
    check_rank(weight, 2, "affine weight");
    check_rank(bias, 1, "affine bias");
    const std::size_t m = weight->value.extent(0);
    const std::size_t n = weight->value.extent(1);
    if (input->value.size() != n || bias->value.size() != m) {
        raise(ErrorKind::Dimension, "affine: weight " + weight->value.shape_str() + " incompatible with input " +
                                        input->value.shape_str() + " / bias " + bias->value.shape_str());
    }
    Tensor out({m});
    for (std::size_t i = 0; i < m; ++i) {
        double acc = bias->value[i];
        for (std::size_t j = 0; j < n; ++j) acc += weight->value.at(i, j) * input->value[j];
        out[i] = acc;
    }
    return make_node(std::move(out), {input, weight, bias}, [m, n](Node& self) {
        const Tensor& g = self.grad;
        Node& x = *self.parents[0];
        Node& w = *self.parents[1];
        Node& b = *self.parents[2];
        if (x.requires_grad) {
            Tensor gx({n});
            for (std::size_t j = 0; j < n; ++j) {
                double acc = 0.0;
                for (std::size_t i = 0; i < m; ++i) acc += w.value.at(i, j) * g[i];
                gx[j] = acc;
            }
            x.accumulate(gx);
        }
        if (w.requires_grad) {
            Tensor gw({m, n});
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) gw.at(i, j) = g[i] * x.value[j];
            w.accumulate(gw);
        }
        if (b.requires_grad) b.accumulate(g);
    });
}

Var matvec(const Var& weight, const Var& input) {
    check_rank(input, 1, "matvec input");
    check_rank(weight, 2, "matvec weight");
    const std::size_t m = weight->value.extent(0);
    const std::size_t n = weight->value.extent(1);
    if (input->value.size() != n) {
        raise(ErrorKind::Dimension, "matvec: weight " + weight->value.shape_str() + " incompatible with input " +
                                        input->value.shape_str());
    }
    Tensor out({m});
    for (std::size_t i = 0; i < m; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) acc += weight->value.at(i, j) * input->value[j];
        out[i] = acc;
    }
    return make_node(std::move(out), {weight, input}, [m, n](Node& self) {
        const Tensor& g = self.grad;
        Node& w = *self.parents[0];
        Node& x = *self.parents[1];
        if (w.requires_grad) {
            Tensor gw({m, n});
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) gw.at(i, j) = g[i] * x.value[j];
            w.accumulate(gw);
        }
        if (x.requires_grad) {
            Tensor gx({n});
            for (std::size_t j = 0; j < n; ++j) {
                double acc = 0.0;
                for (std::size_t i = 0; i < m; ++i) acc += w.value.at(i, j) * g[i];
                gx[j] = acc;
            }
            x.accumulate(gx);
        }
    });
}

Var linear_rows(const Var& rows, const Var& weight, const Var& bias) {
    check_rank(rows, 2, "linear_rows input");
    check_rank(weight, 2, "linear_rows weight");
    check_rank(bias, 1, "linear_rows bias");
    const std::size_t r = rows->value.extent(0);
    const std::size_t n = rows->value.extent(1);
    const std::size_t m = weight->value.extent(0);
    if (weight->value.extent(1) != n || bias->value.size() != m) {
        raise(ErrorKind::Dimension, "linear_rows: weight " + weight->value.shape_str() +
                                        " incompatible with rows " + rows->value.shape_str());
    }
    Tensor out({r, m});
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t k = 0; k < m; ++k) {
            double acc = bias->value[k];
            for (std::size_t j = 0; j < n; ++j) acc += rows->value.at(i, j) * weight->value.at(k, j);
            out.at(i, k) = acc;
        }
    }
    return make_node(std::move(out), {rows, weight, bias}, [r, n, m](Node& self) {
        const Tensor& g = self.grad;
        Node& x = *self.parents[0];
        Node& w = *self.parents[1];
        Node& b = *self.parents[2];
        if (x.requires_grad) {
            Tensor gx({r, n});
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < n; ++j) {
                    double acc = 0.0;
                    for (std::size_t k = 0; k < m; ++k) acc += g.at(i, k) * w.value.at(k, j);
                    gx.at(i, j) = acc;
                }
            x.accumulate(gx);
        }
        if (w.requires_grad) {
            Tensor gw({m, n});
            for (std::size_t k = 0; k < m; ++k)
                for (std::size_t j = 0; j < n; ++j) {
                    double acc = 0.0;
                    for (std::size_t i = 0; i < r; ++i) acc += g.at(i, k) * x.value.at(i, j);
                    gw.at(k, j) = acc;
                }
            w.accumulate(gw);
        }
        if (b.requires_grad) {
            Tensor gb({m});
            for (std::size_t k = 0; k < m; ++k) {
                double acc = 0.0;
                for (std::size_t i = 0; i < r; ++i) acc += g.at(i, k);
                gb[k] = acc;
            }
            b.accumulate(gb);
        }
    });
}

// --- elementwise -----------------------------------------------------------

Var activation(const Var& input, Activation kind) {
    Tensor out = input->value;
    for (double& v : out.data()) {
        switch (kind) {
            case Activation::Relu: v = v > 0.0 ? v : 0.0; break;
            case Activation::Tanh: v = std::tanh(v); break;
            case Activation::Sigmoid: v = 1.0 / (1.0 + std::exp(-v)); break;
        }
    }
    Tensor saved = out;
    Tensor in = input->value;
    return make_node(std::move(out), {input}, [kind, saved, in](Node& self) {
        Tensor g = self.grad;
        for (std::size_t i = 0; i < g.size(); ++i) {
            switch (kind) {
                case Activation::Relu: g[i] *= in[i] > 0.0 ? 1.0 : 0.0; break;
                case Activation::Tanh: g[i] *= 1.0 - saved[i] * saved[i]; break;
                case Activation::Sigmoid: g[i] *= saved[i] * (1.0 - saved[i]); break;
            }
        }
        self.parents[0]->accumulate(g);
    });
}

Var relu(const Var& v) { return activation(v, Activation::Relu); }
Var tanh_op(const Var& v) { return activation(v, Activation::Tanh); }
Var sigmoid(const Var& v) { return activation(v, Activation::Sigmoid); }

Var softmax(const Var& scores) {
    check_rank(scores, 1, "softmax");
    const std::size_t n = scores->value.size();
    if (n == 0) raise(ErrorKind::Domain, "softmax of empty vector");
    double top = scores->value[0];
    for (std::size_t i = 1; i < n; ++i) top = std::max(top, scores->value[i]);
    Tensor out({n});
    double denom = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = std::exp(scores->value[i] - top);
        denom += out[i];
    }
    for (std::size_t i = 0; i < n; ++i) out[i] /= denom;
    Tensor saved = out;
    return make_node(std::move(out), {scores}, [saved](Node& self) {
        const Tensor& g = self.grad;
        double inner = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) inner += g[i] * saved[i];
        Tensor gx(saved.shape());
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] = saved[i] * (g[i] - inner);
        self.parents[0]->accumulate(gx);
    });
}

// --- convolution / pooling -------------------------------------------------

Var conv1d_single_channel(const Var& sequence, const Var& kernels, const Var& bias) {
    check_rank(sequence, 1, "conv1d sequence");
    check_rank(kernels, 2, "conv1d kernels");
    check_rank(bias, 1, "conv1d bias");
    const std::size_t t_len = sequence->value.size();
    const std::size_t filters = kernels->value.extent(0);
    const std::size_t width = kernels->value.extent(1);
    if (bias->value.size() != filters) {
        raise(ErrorKind::Dimension, "conv1d: bias " + bias->value.shape_str() + " does not match filter count " +
                                        std::to_string(filters));
    }
    if (width % 2 == 0) raise(ErrorKind::Domain, "conv1d requires odd kernel width for same padding");
    const std::size_t pad = (width - 1) / 2;
    if (width > t_len + 2 * pad) {
        raise(ErrorKind::Domain, "conv1d kernel width " + std::to_string(width) +
                                     " exceeds padded length " + std::to_string(t_len + 2 * pad));
    }
    Tensor out({filters, t_len});
    for (std::size_t f = 0; f < filters; ++f) {
        for (std::size_t t = 0; t < t_len; ++t) {
            double acc = bias->value[f];
            for (std::size_t k = 0; k < width; ++k) {
                const long src = static_cast<long>(t + k) - static_cast<long>(pad);
                if (src >= 0 && src < static_cast<long>(t_len)) {
                    acc += kernels->value.at(f, k) * sequence->value[static_cast<std::size_t>(src)];
                }
            }
            out.at(f, t) = acc;
        }
    }
    return make_node(std::move(out), {sequence, kernels, bias}, [t_len, filters, width, pad](Node& self) {
        const Tensor& g = self.grad;
        Node& seq = *self.parents[0];
        Node& ker = *self.parents[1];
        Node& b = *self.parents[2];
        if (seq.requires_grad) {
            Tensor gs({t_len});
            for (std::size_t f = 0; f < filters; ++f)
                for (std::size_t t = 0; t < t_len; ++t)
                    for (std::size_t k = 0; k < width; ++k) {
                        const long src = static_cast<long>(t + k) - static_cast<long>(pad);
                        if (src >= 0 && src < static_cast<long>(t_len)) {
                            gs[static_cast<std::size_t>(src)] += g.at(f, t) * ker.value.at(f, k);
                        }
                    }
            seq.accumulate(gs);
        }
        if (ker.requires_grad) {
            Tensor gk({filters, width});
            for (std::size_t f = 0; f < filters; ++f)
                for (std::size_t t = 0; t < t_len; ++t)
                    for (std::size_t k = 0; k < width; ++k) {
                        const long src = static_cast<long>(t + k) - static_cast<long>(pad);
                        if (src >= 0 && src < static_cast<long>(t_len)) {
                            gk.at(f, k) += g.at(f, t) * seq.value[static_cast<std::size_t>(src)];
                        }
                    }
            ker.accumulate(gk);
        }
        if (b.requires_grad) {
            Tensor gb({filters});
            for (std::size_t f = 0; f < filters; ++f) {
                double acc = 0.0;
                for (std::size_t t = 0; t < t_len; ++t) acc += g.at(f, t);
                gb[f] = acc;
            }
            b.accumulate(gb);
        }
    });
}

Var maxpool_over_time(const Var& feature_map) {
    check_rank(feature_map, 2, "maxpool input");
    const std::size_t filters = feature_map->value.extent(0);
    const std::size_t t_len = feature_map->value.extent(1);
    if (t_len == 0) raise(ErrorKind::Domain, "maxpool over empty time axis");
    Tensor out({filters});
    std::vector<std::size_t> argmax(filters, 0);
    for (std::size_t f = 0; f < filters; ++f) {
        double best = feature_map->value.at(f, 0);
        std::size_t best_t = 0;
        for (std::size_t t = 1; t < t_len; ++t) {
            const double v = feature_map->value.at(f, t);
            if (v > best) { // strict: ties keep the first index
                best = v;
                best_t = t;
            }
        }
        out[f] = best;
        argmax[f] = best_t;
    }
    return make_node(std::move(out), {feature_map}, [filters, t_len, argmax](Node& self) {
        Tensor gm({filters, t_len});
        for (std::size_t f = 0; f < filters; ++f) gm.at(f, argmax[f]) = self.grad[f];
        self.parents[0]->accumulate(gm);
    });
}

// --- arithmetic ------------------------------------------------------------

Var add(const Var& a, const Var& b) {
    if (!a->value.same_shape(b->value)) {
        raise(ErrorKind::Dimension, "add: shape mismatch " + a->value.shape_str() + " vs " + b->value.shape_str());
    }
    Tensor out = a->value;
    out += b->value;
    return make_node(std::move(out), {a, b}, [](Node& self) {
        self.parents[0]->accumulate(self.grad);
        self.parents[1]->accumulate(self.grad);
    });
}

Var sub(const Var& a, const Var& b) {
    if (!a->value.same_shape(b->value)) {
        raise(ErrorKind::Dimension, "sub: shape mismatch " + a->value.shape_str() + " vs " + b->value.shape_str());
    }
    Tensor out = a->value;
    out -= b->value;
    return make_node(std::move(out), {a, b}, [](Node& self) {
        self.parents[0]->accumulate(self.grad);
        Tensor neg = self.grad;
        for (double& v : neg.data()) v = -v;
        self.parents[1]->accumulate(neg);
    });
}

Var mul(const Var& a, const Var& b) {
    if (!a->value.same_shape(b->value)) {
        raise(ErrorKind::Dimension, "mul: shape mismatch " + a->value.shape_str() + " vs " + b->value.shape_str());
    }
    Tensor out = a->value;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b->value[i];
    return make_node(std::move(out), {a, b}, [](Node& self) {
        Node& a_node = *self.parents[0];
        Node& b_node = *self.parents[1];
        if (a_node.requires_grad) {
            Tensor ga = self.grad;
            for (std::size_t i = 0; i < ga.size(); ++i) ga[i] *= b_node.value[i];
            a_node.accumulate(ga);
        }
        if (b_node.requires_grad) {
            Tensor gb = self.grad;
            for (std::size_t i = 0; i < gb.size(); ++i) gb[i] *= a_node.value[i];
            b_node.accumulate(gb);
        }
    });
}

Var scale(const Var& v, double factor) {
    Tensor out = v->value;
    for (double& x : out.data()) x *= factor;
    return make_node(std::move(out), {v}, [factor](Node& self) {
        Tensor g = self.grad;
        for (double& x : g.data()) x *= factor;
        self.parents[0]->accumulate(g);
    });
}

Var concat(const std::vector<Var>& parts) {
    if (parts.empty()) raise(ErrorKind::Domain, "concat of zero vectors");
    std::size_t total = 0;
    for (const auto& p : parts) {
        check_rank(p, 1, "concat part");
        total += p->value.size();
    }
    Tensor out({total});
    std::size_t offset = 0;
    for (const auto& p : parts) {
        for (std::size_t i = 0; i < p->value.size(); ++i) out[offset + i] = p->value[i];
        offset += p->value.size();
    }
    return make_node(std::move(out), parts, [](Node& self) {
        std::size_t offset = 0;
        for (auto& p : self.parents) {
            if (p->requires_grad) {
                Tensor gp(p->value.shape());
                for (std::size_t i = 0; i < gp.size(); ++i) gp[i] = self.grad[offset + i];
                p->accumulate(gp);
            }
            offset += p->value.size();
        }
    });
}

Var dot(const Var& a, const Var& b) {
    check_rank(a, 1, "dot lhs");
    check_rank(b, 1, "dot rhs");
    if (a->value.size() != b->value.size()) {
        raise(ErrorKind::Dimension, "dot: length mismatch " + a->value.shape_str() + " vs " + b->value.shape_str());
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < a->value.size(); ++i) acc += a->value[i] * b->value[i];
    return make_node(Tensor::scalar(acc), {a, b}, [](Node& self) {
        const double g = self.grad[0];
        Node& a_node = *self.parents[0];
        Node& b_node = *self.parents[1];
        if (a_node.requires_grad) {
            Tensor ga = b_node.value;
            for (double& x : ga.data()) x *= g;
            a_node.accumulate(ga);
        }
        if (b_node.requires_grad) {
            Tensor gb = a_node.value;
            for (double& x : gb.data()) x *= g;
            b_node.accumulate(gb);
        }
    });
}

Var sum(const Var& v) {
    double acc = 0.0;
    for (double x : v->value.data()) acc += x;
    return make_node(Tensor::scalar(acc), {v}, [](Node& self) {
        Tensor g(self.parents[0]->value.shape());
        g.fill(self.grad[0]);
        self.parents[0]->accumulate(g);
    });
}

Var mean(const Var& v) {
    return scale(sum(v), 1.0 / static_cast<double>(v->value.size()));
}

Var log_op(const Var& v) {
    Tensor out = v->value;
    for (double& x : out.data()) {
        if (x <= 0.0) raise(ErrorKind::Domain, "log of non-positive value");
        x = std::log(x);
    }
    return make_node(std::move(out), {v}, [](Node& self) {
        Tensor g = self.grad;
        for (std::size_t i = 0; i < g.size(); ++i) g[i] /= self.parents[0]->value[i];
        self.parents[0]->accumulate(g);
    });
}

Var clamp(const Var& v, double lo, double hi) {
    Tensor out = v->value;
    for (double& x : out.data()) x = std::min(std::max(x, lo), hi);
    Tensor in = v->value;
    return make_node(std::move(out), {v}, [lo, hi, in](Node& self) {
        Tensor g = self.grad;
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (in[i] < lo || in[i] > hi) g[i] = 0.0;
        }
        self.parents[0]->accumulate(g);
    });
}

Var weighted_sum_rows(const Var& weights, const Var& rows) {
    check_rank(weights, 1, "weighted_sum weights");
    check_rank(rows, 2, "weighted_sum rows");
    const std::size_t r = rows->value.extent(0);
    const std::size_t c = rows->value.extent(1);
    if (weights->value.size() != r) {
        raise(ErrorKind::Dimension, "weighted_sum: " + std::to_string(r) + " rows vs " +
                                        std::to_string(weights->value.size()) + " weights");
    }
    Tensor out({c});
    for (std::size_t i = 0; i < r; ++i) {
        const double w = weights->value[i];
        for (std::size_t j = 0; j < c; ++j) out[j] += w * rows->value.at(i, j);
    }
    return make_node(std::move(out), {weights, rows}, [r, c](Node& self) {
        const Tensor& g = self.grad;
        Node& w = *self.parents[0];
        Node& m = *self.parents[1];
        if (w.requires_grad) {
            Tensor gw({r});
            for (std::size_t i = 0; i < r; ++i) {
                double acc = 0.0;
                for (std::size_t j = 0; j < c; ++j) acc += g[j] * m.value.at(i, j);
                gw[i] = acc;
            }
            w.accumulate(gw);
        }
        if (m.requires_grad) {
            Tensor gm({r, c});
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < c; ++j) gm.at(i, j) = w.value[i] * g[j];
            m.accumulate(gm);
        }
    });
}

Var stack_rows(const std::vector<Var>& rows) {
    if (rows.empty()) raise(ErrorKind::Domain, "stack_rows of zero rows");
    const std::size_t c = rows[0]->value.size();
    for (const auto& r : rows) {
        check_rank(r, 1, "stack_rows row");
        if (r->value.size() != c) raise(ErrorKind::Dimension, "stack_rows: inconsistent row lengths");
    }
    Tensor out({rows.size(), c});
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < c; ++j) out.at(i, j) = rows[i]->value[j];
    return make_node(std::move(out), rows, [c](Node& self) {
        for (std::size_t i = 0; i < self.parents.size(); ++i) {
            auto& p = self.parents[i];
            if (!p->requires_grad) continue;
            Tensor gp({c});
            for (std::size_t j = 0; j < c; ++j) gp[j] = self.grad.at(i, j);
            p->accumulate(gp);
        }
    });
}

Var row(const Var& matrix, std::size_t index) {
    check_rank(matrix, 2, "row");
    const std::size_t r = matrix->value.extent(0);
    const std::size_t c = matrix->value.extent(1);
    if (index >= r) raise(ErrorKind::Dimension, "row index out of range");
    Tensor out({c});
    for (std::size_t j = 0; j < c; ++j) out[j] = matrix->value.at(index, j);
    return make_node(std::move(out), {matrix}, [index, r, c](Node& self) {
        Tensor gm({r, c});
        for (std::size_t j = 0; j < c; ++j) gm.at(index, j) = self.grad[j];
        self.parents[0]->accumulate(gm);
    });
}

Var flatten(const Var& v) {
    Tensor out({v->value.size()}, v->value.data());
    return make_node(std::move(out), {v}, [](Node& self) {
        Tensor g(self.parents[0]->value.shape(), self.grad.data());
        self.parents[0]->accumulate(g);
    });
}

Var gather_columns(const Var& matrix, const std::vector<std::size_t>& indices) {
    check_rank(matrix, 2, "gather_columns");
    const std::size_t d = matrix->value.extent(0);
    const std::size_t n = matrix->value.extent(1);
    if (indices.empty()) raise(ErrorKind::Domain, "gather_columns with no indices");
    for (std::size_t idx : indices) {
        if (idx >= n) raise(ErrorKind::Vocabulary, "column index " + std::to_string(idx) + " out of range");
    }
    Tensor out({indices.size(), d});
    for (std::size_t i = 0; i < indices.size(); ++i)
        for (std::size_t j = 0; j < d; ++j) out.at(i, j) = matrix->value.at(j, indices[i]);
    return make_node(std::move(out), {matrix}, [indices, d, n](Node& self) {
        Tensor gm({d, n});
        for (std::size_t i = 0; i < indices.size(); ++i)
            for (std::size_t j = 0; j < d; ++j) gm.at(j, indices[i]) += self.grad.at(i, j);
        self.parents[0]->accumulate(gm);
    });
}

Var slice_block(const Var& tensor3, std::size_t index) {
    check_rank(tensor3, 3, "slice_block");
    const std::size_t a = tensor3->value.extent(0);
    const std::size_t b = tensor3->value.extent(1);
    const std::size_t c = tensor3->value.extent(2);
    if (index >= a) raise(ErrorKind::Dimension, "slice_block index out of range");
    Tensor out({b, c});
    for (std::size_t i = 0; i < b; ++i)
        for (std::size_t j = 0; j < c; ++j) out.at(i, j) = tensor3->value.at3(index, i, j);
    return make_node(std::move(out), {tensor3}, [index, a, b, c](Node& self) {
        Tensor g({a, b, c});
        for (std::size_t i = 0; i < b; ++i)
            for (std::size_t j = 0; j < c; ++j) g.at3(index, i, j) = self.grad.at(i, j);
        self.parents[0]->accumulate(g);
    });
}

Var feature_view_fused(const Tensor& visit_matrix, const Var& kernels, const Var& bias) {
    if (visit_matrix.rank() != 2) raise(ErrorKind::Dimension, "feature_view input must be T x |C|");
    check_rank(kernels, 3, "feature_view kernels");
    check_rank(bias, 2, "feature_view bias");
    const std::size_t t_len = visit_matrix.extent(0);
    const std::size_t codes = visit_matrix.extent(1);
    const std::size_t filters = kernels->value.extent(1);
    const std::size_t width = kernels->value.extent(2);
    if (kernels->value.extent(0) != codes || bias->value.extent(0) != codes ||
        bias->value.extent(1) != filters) {
        raise(ErrorKind::Dimension, "feature_view: kernels " + kernels->value.shape_str() + " / bias " +
                                        bias->value.shape_str() + " do not match " + std::to_string(codes) +
                                        " codes");
    }
    if (width % 2 == 0) raise(ErrorKind::Domain, "feature_view requires odd kernel width");
    const long pad = static_cast<long>((width - 1) / 2);

    Tensor out({codes, filters});
    std::vector<std::size_t> argmax(codes * filters, 0);
    for (std::size_t i = 0; i < codes; ++i) {
        for (std::size_t f = 0; f < filters; ++f) {
            double best = -std::numeric_limits<double>::infinity();
            std::size_t best_t = 0;
            for (std::size_t t = 0; t < t_len; ++t) {
                double acc = bias->value.at(i, f);
                for (std::size_t k = 0; k < width; ++k) {
                    const long src = static_cast<long>(t + k) - pad;
                    if (src >= 0 && src < static_cast<long>(t_len)) {
                        acc += kernels->value.at3(i, f, k) *
                               visit_matrix.at(static_cast<std::size_t>(src), i);
                    }
                }
                if (acc > best) {
                    best = acc;
                    best_t = t;
                }
            }
            out.at(i, f) = best;
            argmax[i * filters + f] = best_t;
        }
    }
    Tensor input = visit_matrix;
    return make_node(std::move(out), {kernels, bias},
                     [t_len, codes, filters, width, pad, argmax, input](Node& self) {
                         Node& ker = *self.parents[0];
                         Node& b = *self.parents[1];
                         Tensor gk({codes, filters, width});
                         Tensor gb({codes, filters});
                         for (std::size_t i = 0; i < codes; ++i) {
                             for (std::size_t f = 0; f < filters; ++f) {
                                 const double g = self.grad.at(i, f);
                                 if (g == 0.0) continue;
                                 const std::size_t t_star = argmax[i * filters + f];
                                 gb.at(i, f) += g;
                                 for (std::size_t k = 0; k < width; ++k) {
                                     const long src = static_cast<long>(t_star + k) - pad;
                                     if (src >= 0 && src < static_cast<long>(t_len)) {
                                         gk.at3(i, f, k) +=
                                             g * input.at(static_cast<std::size_t>(src), i);
                                     }
                                 }
                             }
                         }
                         if (ker.requires_grad) ker.accumulate(gk);
                         if (b.requires_grad) b.accumulate(gb);
                     });
}

Var add_row_broadcast(const Var& matrix, const Var& vec) {
    check_rank(matrix, 2, "add_row_broadcast matrix");
    check_rank(vec, 1, "add_row_broadcast vector");
    const std::size_t r = matrix->value.extent(0);
    const std::size_t c = matrix->value.extent(1);
    if (vec->value.size() != c) {
        raise(ErrorKind::Dimension, "add_row_broadcast: vector length " + std::to_string(vec->value.size()) +
                                        " vs row length " + std::to_string(c));
    }
    Tensor out = matrix->value;
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out.at(i, j) += vec->value[j];
    return make_node(std::move(out), {matrix, vec}, [r, c](Node& self) {
        Node& m = *self.parents[0];
        Node& v = *self.parents[1];
        if (m.requires_grad) m.accumulate(self.grad);
        if (v.requires_grad) {
            Tensor gv({c});
            for (std::size_t j = 0; j < c; ++j) {
                double acc = 0.0;
                for (std::size_t i = 0; i < r; ++i) acc += self.grad.at(i, j);
                gv[j] = acc;
            }
            v.accumulate(gv);
        }
    });
}

Var normalize_to_unit_sphere(const Var& v, double norm_floor) {
    check_rank(v, 1, "normalize");
    const double norm = v->value.norm2();
    if (norm < norm_floor) {
        raise(ErrorKind::DegenerateVector,
              "cannot normalize vector with norm " + std::to_string(norm));
    }
    Tensor out = v->value;
    for (double& x : out.data()) x /= norm;
    Tensor unit = out;
    return make_node(std::move(out), {v}, [norm, unit](Node& self) {
        const Tensor& g = self.grad;
        double inner = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) inner += g[i] * unit[i];
        Tensor gx(unit.shape());
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] = (g[i] - inner * unit[i]) / norm;
        self.parents[0]->accumulate(gx);
    });
}

// --- GRU cell ---------------------------------------------------------------

Var gru_cell(const Var& input, const Var& hidden_prev, const GruParams& p) {
    check_rank(input, 1, "gru input");
    check_rank(hidden_prev, 1, "gru hidden");
    const std::size_t in_dim = input->value.size();
    const std::size_t d = hidden_prev->value.size();
    auto check_gate = [&](const Var& w, const Var& u, const Var& b, const char* name) {
        if (w->value.rank() != 2 || w->value.extent(0) != d || w->value.extent(1) != in_dim ||
            u->value.rank() != 2 || u->value.extent(0) != d || u->value.extent(1) != d ||
            b->value.size() != d) {
            raise(ErrorKind::Dimension, std::string("gru_cell ") + name + " parameter shapes do not match state size " +
                                            std::to_string(d));
        }
    };
    check_gate(p.w_update, p.u_update, p.b_update, "update");
    check_gate(p.w_reset, p.u_reset, p.b_reset, "reset");
    check_gate(p.w_cand, p.u_cand, p.b_cand, "candidate");

    const auto& x = input->value;
    const auto& h = hidden_prev->value;
    auto gate_pre = [&](const Tensor& w, const Tensor& u, const Tensor& b, const Tensor& hvec) {
        Tensor out({d});
        for (std::size_t i = 0; i < d; ++i) {
            double acc = b[i];
            for (std::size_t j = 0; j < in_dim; ++j) acc += w.at(i, j) * x[j];
            for (std::size_t j = 0; j < d; ++j) acc += u.at(i, j) * hvec[j];
            out[i] = acc;
        }
        return out;
    };

    Tensor z = gate_pre(p.w_update->value, p.u_update->value, p.b_update->value, h);
    Tensor r = gate_pre(p.w_reset->value, p.u_reset->value, p.b_reset->value, h);
    for (std::size_t i = 0; i < d; ++i) {
        z[i] = 1.0 / (1.0 + std::exp(-z[i]));
        r[i] = 1.0 / (1.0 + std::exp(-r[i]));
    }
    Tensor rh({d});
    for (std::size_t i = 0; i < d; ++i) rh[i] = r[i] * h[i];
    Tensor c = gate_pre(p.w_cand->value, p.u_cand->value, p.b_cand->value, rh);
    for (std::size_t i = 0; i < d; ++i) c[i] = std::tanh(c[i]);
    Tensor out({d});
    for (std::size_t i = 0; i < d; ++i) out[i] = (1.0 - z[i]) * h[i] + z[i] * c[i];

    std::vector<Var> parents = {input,      hidden_prev, p.w_update, p.u_update, p.b_update, p.w_reset,
                                p.u_reset,  p.b_reset,   p.w_cand,   p.u_cand,   p.b_cand};
    return make_node(std::move(out), std::move(parents), [in_dim, d, z, r, c, rh](Node& self) {
        const Tensor& g = self.grad;
        Node& x_n = *self.parents[0];
        Node& h_n = *self.parents[1];
        const Tensor& x = x_n.value;
        const Tensor& h = h_n.value;

        // local derivatives of the gate pre-activations
        Tensor d_c({d}), d_z({d}), dh({d});
        for (std::size_t i = 0; i < d; ++i) {
            d_c[i] = g[i] * z[i] * (1.0 - c[i] * c[i]);
            d_z[i] = g[i] * (c[i] - h[i]) * z[i] * (1.0 - z[i]);
            dh[i] = g[i] * (1.0 - z[i]);
        }
        // candidate path: W_h x + U_h (r*h) + b_h
        Tensor d_rh({d});
        const Tensor& u_cand = self.parents[9]->value;
        for (std::size_t j = 0; j < d; ++j) {
            double acc = 0.0;
            for (std::size_t i = 0; i < d; ++i) acc += u_cand.at(i, j) * d_c[i];
            d_rh[j] = acc;
        }
        Tensor d_r({d});
        for (std::size_t i = 0; i < d; ++i) {
            d_r[i] = d_rh[i] * h[i] * r[i] * (1.0 - r[i]);
            dh[i] += d_rh[i] * r[i];
        }
        const Tensor& u_update = self.parents[3]->value;
        const Tensor& u_reset = self.parents[6]->value;
        for (std::size_t j = 0; j < d; ++j) {
            double acc = 0.0;
            for (std::size_t i = 0; i < d; ++i) {
                acc += u_update.at(i, j) * d_z[i] + u_reset.at(i, j) * d_r[i];
            }
            dh[j] += acc;
        }
        auto add_gate_grads = [&](std::size_t w_idx, const Tensor& pre, const Tensor& hvec) {
            Node& w = *self.parents[w_idx];
            Node& u = *self.parents[w_idx + 1];
            Node& b = *self.parents[w_idx + 2];
            if (w.requires_grad) {
                Tensor gw({d, in_dim});
                for (std::size_t i = 0; i < d; ++i)
                    for (std::size_t j = 0; j < in_dim; ++j) gw.at(i, j) = pre[i] * x[j];
                w.accumulate(gw);
            }
            if (u.requires_grad) {
                Tensor gu({d, d});
                for (std::size_t i = 0; i < d; ++i)
                    for (std::size_t j = 0; j < d; ++j) gu.at(i, j) = pre[i] * hvec[j];
                u.accumulate(gu);
            }
            if (b.requires_grad) b.accumulate(pre);
        };
        add_gate_grads(2, d_z, h);
        add_gate_grads(5, d_r, h);
        add_gate_grads(8, d_c, rh);

        if (x_n.requires_grad) {
            Tensor gx({in_dim});
            const Tensor& w_update = self.parents[2]->value;
            const Tensor& w_reset = self.parents[5]->value;
            const Tensor& w_cand = self.parents[8]->value;
            for (std::size_t j = 0; j < in_dim; ++j) {
                double acc = 0.0;
                for (std::size_t i = 0; i < d; ++i) {
                    acc += w_update.at(i, j) * d_z[i] + w_reset.at(i, j) * d_r[i] + w_cand.at(i, j) * d_c[i];
                }
                gx[j] = acc;
            }
            x_n.accumulate(gx);
        }
        if (h_n.requires_grad) h_n.accumulate(dh);
    });
}

// --- losses -----------------------------------------------------------------

Var bce_loss(const std::vector<Var>& predictions, const std::vector<int>& labels) {
    if (predictions.empty()) raise(ErrorKind::Domain, "bce_loss on empty batch");
    if (predictions.size() != labels.size()) {
        raise(ErrorKind::Dimension, "bce_loss: " + std::to_string(predictions.size()) + " predictions vs " +
                                        std::to_string(labels.size()) + " labels");
    }
    constexpr double kEps = 1e-7;
    Var one = constant(Tensor::scalar(1.0));
    std::vector<Var> terms;
    terms.reserve(predictions.size());
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        if (labels[i] != 0 && labels[i] != 1) raise(ErrorKind::Domain, "bce_loss labels must be 0 or 1");
        check_rank(predictions[i], 1, "bce prediction");
        if (predictions[i]->value.size() != 1) raise(ErrorKind::Dimension, "bce predictions must be scalars");
        Var p = clamp(predictions[i], kEps, 1.0 - kEps);
        terms.push_back(labels[i] == 1 ? log_op(p) : log_op(sub(one, p)));
    }
    return scale(sum(concat(terms)), -1.0 / static_cast<double>(predictions.size()));
}

namespace {

/// Shared forward/backward math for the contrastive loss over flat vectors.
struct ContrastiveWork {
    std::size_t count = 0; // 2B
    double loss = 0.0;
    std::vector<std::vector<double>> coeff; // d loss / d s(a,b)
};

ContrastiveWork contrastive_core(const std::vector<const std::vector<double>*>& vecs,
                                 double temperature, bool want_coeff) {
    const std::size_t count = vecs.size();
    const std::size_t dim = vecs[0]->size();
    auto partner = [](std::size_t a) { return a ^ 1ULL; };
    std::vector<std::vector<double>> sim(count, std::vector<double>(count, 0.0));
    for (std::size_t a = 0; a < count; ++a) {
        for (std::size_t b = a + 1; b < count; ++b) {
            double s = 0.0;
            for (std::size_t k = 0; k < dim; ++k) s += (*vecs[a])[k] * (*vecs[b])[k];
            s /= temperature;
            sim[a][b] = s;
            sim[b][a] = s;
        }
    }
    ContrastiveWork work;
    work.count = count;
    if (want_coeff) work.coeff.assign(count, std::vector<double>(count, 0.0));
    for (std::size_t a = 0; a < count; ++a) {
        double top = -std::numeric_limits<double>::infinity();
        for (std::size_t b = 0; b < count; ++b) {
            if (b != a) top = std::max(top, sim[a][b]);
        }
        double denom = 0.0;
        for (std::size_t b = 0; b < count; ++b) {
            if (b != a) denom += std::exp(sim[a][b] - top);
        }
        work.loss += -sim[a][partner(a)] + top + std::log(denom);
        if (want_coeff) {
            for (std::size_t b = 0; b < count; ++b) {
                if (b == a) continue;
                work.coeff[a][b] = std::exp(sim[a][b] - top) / denom;
            }
            work.coeff[a][partner(a)] -= 1.0;
        }
    }
    return work;
}

} // namespace

Var contrastive_loss(const std::vector<std::pair<Var, Var>>& projections, double temperature) {
    if (projections.empty()) raise(ErrorKind::Domain, "contrastive_loss on empty batch");
    if (temperature <= 0.0) raise(ErrorKind::Domain, "contrastive temperature must be positive");
    std::vector<Var> parents;
    parents.reserve(projections.size() * 2);
    const std::size_t dim = projections.front().first->value.size();
    for (const auto& [zf, zv] : projections) {
        check_rank(zf, 1, "contrastive projection");
        check_rank(zv, 1, "contrastive projection");
        if (zf->value.size() != dim || zv->value.size() != dim) {
            raise(ErrorKind::Dimension, "contrastive_loss: mismatched projection dimensions");
        }
        parents.push_back(zf);
        parents.push_back(zv);
    }
    std::vector<const std::vector<double>*> vecs;
    vecs.reserve(parents.size());
    for (const auto& p : parents) vecs.push_back(&p->value.data());
    ContrastiveWork fwd = contrastive_core(vecs, temperature, false);
    return make_node(Tensor::scalar(fwd.loss), std::move(parents), [temperature, dim](Node& self) {
        std::vector<const std::vector<double>*> vecs;
        vecs.reserve(self.parents.size());
        for (const auto& p : self.parents) vecs.push_back(&p->value.data());
        ContrastiveWork work = contrastive_core(vecs, temperature, true);
        const double g = self.grad[0];
        for (std::size_t c = 0; c < work.count; ++c) {
            Node& target = *self.parents[c];
            if (!target.requires_grad) continue;
            Tensor gc({dim});
            for (std::size_t b = 0; b < work.count; ++b) {
                if (b == c) continue;
                const double w = (work.coeff[c][b] + work.coeff[b][c]) / temperature;
                if (w == 0.0) continue;
                const auto& other = *vecs[b];
                for (std::size_t k = 0; k < dim; ++k) gc[k] += w * other[k];
            }
            for (double& x : gc.data()) x *= g;
            target.accumulate(gc);
        }
    });
}

double contrastive_loss_reference(
    const std::vector<std::pair<std::vector<double>, std::vector<double>>>& projections,
    double temperature) {
    // Direct enumeration of Z, anchors, and denominator sets; no shared code
    // with the graph path beyond std::exp.
    std::vector<std::vector<double>> z;
    for (const auto& [f, v] : projections) {
        z.push_back(f);
        z.push_back(v);
    }
    const std::size_t count = z.size();
    double loss = 0.0;
    for (std::size_t a = 0; a < count; ++a) {
        const std::size_t mate = (a % 2 == 0) ? a + 1 : a - 1;
        double numer_dot = 0.0;
        for (std::size_t k = 0; k < z[a].size(); ++k) numer_dot += z[a][k] * z[mate][k];
        double denom = 0.0;
        for (std::size_t b = 0; b < count; ++b) {
            if (b == a) continue;
            double s = 0.0;
            for (std::size_t k = 0; k < z[a].size(); ++k) s += z[a][k] * z[b][k];
            denom += std::exp(s / temperature);
        }
        loss += -std::log(std::exp(numer_dot / temperature) / denom);
    }
    return loss;
}

} // namespace mvmt::ag
