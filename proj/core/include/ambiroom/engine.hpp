#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "ambiroom/error.hpp"
#include "ambiroom/gemm.hpp"
#include "ambiroom/rng.hpp"

namespace ambiroom::engine {

using Shape = std::vector<int>;

inline std::size_t numel(const Shape& s) {
    std::size_t n = 1;
    for (int d : s) n *= static_cast<std::size_t>(d);
    return n;
}

// One node of the reverse-mode graph: values, accumulated gradient, and
// the closure that pushes this node's gradient into its parents.
template <typename T>
struct Node {
    Shape shape;
    std::vector<T> val;
    std::vector<T> grad;
    bool requires_grad = false;
    std::string op;
    std::vector<std::shared_ptr<Node<T>>> parents;
    std::function<void(Node<T>&)> backward_fn;

    void ensure_grad() {
        if (grad.size() != val.size()) grad.assign(val.size(), T(0));
    }
};

template <typename T>
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::shared_ptr<Node<T>> n) : node_(std::move(n)) {}

    static Tensor leaf(Shape shape, std::vector<T> data, bool requires_grad,
                       std::string name = "leaf") {
        if (numel(shape) != data.size()) fail_usage("tensor: shape does not match data size");
        auto n = std::make_shared<Node<T>>();
        n->shape = std::move(shape);
        n->val = std::move(data);
        n->requires_grad = requires_grad;
        n->op = std::move(name);
        if (requires_grad) n->ensure_grad();
        return Tensor(n);
    }

    static Tensor zeros(Shape shape, bool requires_grad, std::string name = "zeros") {
        std::vector<T> data(numel(shape), T(0));
        return leaf(std::move(shape), std::move(data), requires_grad, std::move(name));
    }

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    std::size_t size() const { return node_->val.size(); }
    std::vector<T>& values() { return node_->val; }
    const std::vector<T>& values() const { return node_->val; }
    std::vector<T>& grad() {
        node_->ensure_grad();
        return node_->grad;
    }
    bool requires_grad() const { return node_->requires_grad; }
    const std::shared_ptr<Node<T>>& node() const { return node_; }

    void zero_grad() { node_->grad.assign(node_->val.size(), T(0)); }

    // Reverse pass from a scalar result.
    void backward() const {
        if (size() != 1) fail_usage("backward: result must be scalar");
        std::vector<Node<T>*> topo;
        std::unordered_set<Node<T>*> seen;
        std::vector<std::pair<Node<T>*, std::size_t>> stack{{node_.get(), 0}};
        while (!stack.empty()) {
            auto& [n, idx] = stack.back();
            if (idx == 0 && !seen.insert(n).second) {
                stack.pop_back();
                continue;
            }
            if (idx < n->parents.size()) {
                Node<T>* p = n->parents[idx++].get();
                if (!seen.contains(p)) stack.push_back({p, 0});
            } else {
                topo.push_back(n);
                stack.pop_back();
            }
        }
        node_->ensure_grad();
        node_->grad[0] += T(1);
        for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
            Node<T>* n = *it;
            if (n->backward_fn && n->requires_grad) n->backward_fn(*n);
        }
    }

private:
    std::shared_ptr<Node<T>> node_;
};

namespace detail {

template <typename T>
std::shared_ptr<Node<T>> make_node(Shape shape, std::string op,
                                   std::vector<std::shared_ptr<Node<T>>> parents) {
    auto n = std::make_shared<Node<T>>();
    n->shape = std::move(shape);
    n->val.resize(numel(n->shape));
    n->op = std::move(op);
    n->parents = std::move(parents);
    for (const auto& p : n->parents) n->requires_grad |= p->requires_grad;
    return n;
}

// x: [Cin, D, T, B] -> cols [Cin*9, D*T*B] for a 1x3x3 kernel with same
// padding on T and B.
template <typename T>
void im2col_133(const T* x, int cin, int d, int t, int b, T* cols) {
    const std::size_t plane = static_cast<std::size_t>(t) * b;
    const std::size_t n = static_cast<std::size_t>(d) * plane;
#pragma omp parallel for schedule(static)
    for (int ci = 0; ci < cin; ++ci) {
        const T* xc = x + static_cast<std::size_t>(ci) * n;
        for (int dt = -1; dt <= 1; ++dt) {
            for (int db = -1; db <= 1; ++db) {
                T* row = cols + (static_cast<std::size_t>(ci) * 9 +
                                 static_cast<std::size_t>(dt + 1) * 3 + (db + 1)) *
                                    n;
                for (int dd = 0; dd < d; ++dd) {
                    const T* xplane = xc + static_cast<std::size_t>(dd) * plane;
                    T* rplane = row + static_cast<std::size_t>(dd) * plane;
                    for (int tt = 0; tt < t; ++tt) {
                        const int ts = tt + dt;
                        T* dst = rplane + static_cast<std::size_t>(tt) * b;
                        if (ts < 0 || ts >= t) {
                            std::fill(dst, dst + b, T(0));
                            continue;
                        }
                        const T* src = xplane + static_cast<std::size_t>(ts) * b;
                        const int lo = std::max(0, -db);
                        const int hi = std::min(b, b - db);
                        if (lo > 0) std::fill(dst, dst + lo, T(0));
                        for (int bb = lo; bb < hi; ++bb) dst[bb] = src[bb + db];
                        if (hi < b) std::fill(dst + hi, dst + b, T(0));
                    }
                }
            }
        }
    }
}

// Scatter-add of column gradients back onto the input layout.
template <typename T>
void col2im_133(const T* cols, int cin, int d, int t, int b, T* gx) {
    const std::size_t plane = static_cast<std::size_t>(t) * b;
    const std::size_t n = static_cast<std::size_t>(d) * plane;
#pragma omp parallel for schedule(static)
    for (int ci = 0; ci < cin; ++ci) {
        T* gc = gx + static_cast<std::size_t>(ci) * n;
        for (int dt = -1; dt <= 1; ++dt) {
            for (int db = -1; db <= 1; ++db) {
                const T* row = cols + (static_cast<std::size_t>(ci) * 9 +
                                       static_cast<std::size_t>(dt + 1) * 3 + (db + 1)) *
                                          n;
                for (int dd = 0; dd < d; ++dd) {
                    const T* rplane = row + static_cast<std::size_t>(dd) * plane;
                    T* gplane = gc + static_cast<std::size_t>(dd) * plane;
                    for (int tt = 0; tt < t; ++tt) {
                        const int ts = tt + dt;
                        if (ts < 0 || ts >= t) continue;
                        const T* src = rplane + static_cast<std::size_t>(tt) * b;
                        T* dst = gplane + static_cast<std::size_t>(ts) * b;
                        const int lo = std::max(0, -db);
                        const int hi = std::min(b, b - db);
                        for (int bb = lo; bb < hi; ++bb) dst[bb + db] += src[bb];
                    }
                }
            }
        }
    }
}

}  // namespace detail

// 3D convolution with a 1x3x3 kernel, stride 1, same padding on the two
// trailing axes. x: [Cin, D, T, B], w: [Cout, Cin, 1, 3, 3], bias: [Cout].
template <typename T>
Tensor<T> conv3d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias) {
    const Shape& xs = x.shape();
    const Shape& ws = w.shape();
    if (xs.size() != 4 || ws.size() != 5 || ws[2] != 1 || ws[3] != 3 || ws[4] != 3) {
        fail_usage("conv3d: expected x [C,D,T,B] and w [Cout,Cin,1,3,3]");
    }
    if (ws[1] != xs[0]) fail_usage("conv3d: channel mismatch");
    if (bias.shape() != Shape{ws[0]}) fail_usage("conv3d: bias shape mismatch");

    const int cin = xs[0], d = xs[1], t = xs[2], b = xs[3];
    const int cout = ws[0];
    const int k = cin * 9;
    const std::size_t n = static_cast<std::size_t>(d) * t * b;

    auto out = detail::make_node<T>({cout, d, t, b}, "conv3d",
                                    {x.node(), w.node(), bias.node()});

    {
        std::vector<T> cols(static_cast<std::size_t>(k) * n);
        detail::im2col_133(x.values().data(), cin, d, t, b, cols.data());
        gemm_nn(cout, static_cast<int>(n), k, w.values().data(), cols.data(), out->val.data(),
                false);
        for (int co = 0; co < cout; ++co) {
            const T bv = bias.values()[co];
            T* row = out->val.data() + static_cast<std::size_t>(co) * n;
            for (std::size_t i = 0; i < n; ++i) row[i] += bv;
        }
    }

    out->backward_fn = [cin, d, t, b, cout, k, n](Node<T>& self) {
        auto& xp = *self.parents[0];
        auto& wp = *self.parents[1];
        auto& bp = *self.parents[2];
        const T* g = self.grad.data();

        if (bp.requires_grad) {
            bp.ensure_grad();
            for (int co = 0; co < cout; ++co) {
                T acc = T(0);
                const T* row = g + static_cast<std::size_t>(co) * n;
#pragma omp simd reduction(+ : acc)
                for (std::size_t i = 0; i < n; ++i) acc += row[i];
                bp.grad[co] += acc;
            }
        }
        if (wp.requires_grad) {
            wp.ensure_grad();
            std::vector<T> cols(static_cast<std::size_t>(k) * n);
            detail::im2col_133(xp.val.data(), cin, d, t, b, cols.data());
            gemm_nt(cout, k, static_cast<int>(n), g, cols.data(), wp.grad.data(), true);
        }
        if (xp.requires_grad) {
            xp.ensure_grad();
            std::vector<T> gcols(static_cast<std::size_t>(k) * n);
            gemm_tn(k, static_cast<int>(n), cout, wp.val.data(), g, gcols.data(), false);
            detail::col2im_133(gcols.data(), cin, d, t, b, xp.grad.data());
        }
    };
    return Tensor<T>(out);
}

// Max pooling with a (1,2,2) window: [C,D,T,B] -> [C,D,T/2,B/2] (floor).
// Gradient routes to the first maximal element in scan order.
template <typename T>
Tensor<T> maxpool3d_122(const Tensor<T>& x) {
    const Shape& xs = x.shape();
    if (xs.size() != 4) fail_usage("maxpool3d: expected [C,D,T,B]");
    const int c = xs[0], d = xs[1], t = xs[2], b = xs[3];
    const int to = t / 2, bo = b / 2;
    if (to == 0 || bo == 0) fail_usage("maxpool3d: input too small to pool");

    auto out = detail::make_node<T>({c, d, to, bo}, "maxpool3d", {x.node()});
    auto argmax = std::make_shared<std::vector<std::int32_t>>(out->val.size());

    const T* xv = x.values().data();
    const std::size_t in_plane = static_cast<std::size_t>(t) * b;
    const std::size_t out_plane = static_cast<std::size_t>(to) * bo;
    for (int cd = 0; cd < c * d; ++cd) {
        const T* src = xv + static_cast<std::size_t>(cd) * in_plane;
        T* dst = out->val.data() + static_cast<std::size_t>(cd) * out_plane;
        std::int32_t* am = argmax->data() + static_cast<std::size_t>(cd) * out_plane;
        for (int tt = 0; tt < to; ++tt) {
            for (int bb = 0; bb < bo; ++bb) {
                const std::size_t base = static_cast<std::size_t>(2 * tt) * b + 2 * bb;
                std::size_t best = base;
                T best_v = src[base];
                for (const std::size_t idx :
                     {base + 1, base + static_cast<std::size_t>(b), base + b + 1}) {
                    if (src[idx] > best_v) {
                        best_v = src[idx];
                        best = idx;
                    }
                }
                dst[static_cast<std::size_t>(tt) * bo + bb] = best_v;
                am[static_cast<std::size_t>(tt) * bo + bb] =
                    static_cast<std::int32_t>(best);
            }
        }
    }

    out->backward_fn = [c, d, in_plane, out_plane, argmax](Node<T>& self) {
        auto& xp = *self.parents[0];
        if (!xp.requires_grad) return;
        xp.ensure_grad();
        for (int cd = 0; cd < c * d; ++cd) {
            const T* g = self.grad.data() + static_cast<std::size_t>(cd) * out_plane;
            const std::int32_t* am = argmax->data() + static_cast<std::size_t>(cd) * out_plane;
            T* gx = xp.grad.data() + static_cast<std::size_t>(cd) * in_plane;
            for (std::size_t i = 0; i < out_plane; ++i) gx[am[i]] += g[i];
        }
    };
    return Tensor<T>(out);
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
    auto out = detail::make_node<T>(x.shape(), "relu", {x.node()});
    const auto& xv = x.values();
    for (std::size_t i = 0; i < xv.size(); ++i) out->val[i] = xv[i] > T(0) ? xv[i] : T(0);
    out->backward_fn = [](Node<T>& self) {
        auto& xp = *self.parents[0];
        if (!xp.requires_grad) return;
        xp.ensure_grad();
        for (std::size_t i = 0; i < self.val.size(); ++i) {
            if (self.val[i] > T(0)) xp.grad[i] += self.grad[i];
        }
    };
    return Tensor<T>(out);
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
    auto out = detail::make_node<T>(x.shape(), "sigmoid", {x.node()});
    const auto& xv = x.values();
    for (std::size_t i = 0; i < xv.size(); ++i) out->val[i] = T(1) / (T(1) + std::exp(-xv[i]));
    out->backward_fn = [](Node<T>& self) {
        auto& xp = *self.parents[0];
        if (!xp.requires_grad) return;
        xp.ensure_grad();
        for (std::size_t i = 0; i < self.val.size(); ++i) {
            xp.grad[i] += self.grad[i] * self.val[i] * (T(1) - self.val[i]);
        }
    };
    return Tensor<T>(out);
}

template <typename T>
Tensor<T> flatten(const Tensor<T>& x) {
    auto out = detail::make_node<T>({static_cast<int>(x.size())}, "flatten", {x.node()});
    out->val = x.values();
    out->backward_fn = [](Node<T>& self) {
        auto& xp = *self.parents[0];
        if (!xp.requires_grad) return;
        xp.ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) xp.grad[i] += self.grad[i];
    };
    return Tensor<T>(out);
}

// y = W x + b with x: [in], W: [out,in], b: [out].
template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
    const Shape& ws = w.shape();
    if (ws.size() != 2 || x.size() != static_cast<std::size_t>(ws[1]) ||
        b.size() != static_cast<std::size_t>(ws[0])) {
        fail_usage("linear: shape mismatch");
    }
    const int out_dim = ws[0], in_dim = ws[1];
    auto out = detail::make_node<T>({out_dim}, "linear", {x.node(), w.node(), b.node()});

    const T* xv = x.values().data();
    const T* wv = w.values().data();
#pragma omp parallel for schedule(static)
    for (int o = 0; o < out_dim; ++o) {
        const T* row = wv + static_cast<std::size_t>(o) * in_dim;
        T acc = T(0);
#pragma omp simd reduction(+ : acc)
        for (int i = 0; i < in_dim; ++i) acc += row[i] * xv[i];
        out->val[o] = acc + b.values()[o];
    }

    out->backward_fn = [out_dim, in_dim](Node<T>& self) {
        auto& xp = *self.parents[0];
        auto& wp = *self.parents[1];
        auto& bp = *self.parents[2];
        const T* g = self.grad.data();
        if (bp.requires_grad) {
            bp.ensure_grad();
            for (int o = 0; o < out_dim; ++o) bp.grad[o] += g[o];
        }
        if (wp.requires_grad) {
            wp.ensure_grad();
#pragma omp parallel for schedule(static)
            for (int o = 0; o < out_dim; ++o) {
                T* grow = wp.grad.data() + static_cast<std::size_t>(o) * in_dim;
                const T go = g[o];
                const T* xv2 = xp.val.data();
#pragma omp simd
                for (int i = 0; i < in_dim; ++i) grow[i] += go * xv2[i];
            }
        }
        if (xp.requires_grad) {
            xp.ensure_grad();
            T* gx = xp.grad.data();
            const T* wv = wp.val.data();
            constexpr int kChunk = 8192;
            const int chunks = (in_dim + kChunk - 1) / kChunk;
#pragma omp parallel for schedule(static)
            for (int cidx = 0; cidx < chunks; ++cidx) {
                const int lo = cidx * kChunk;
                const int hi = lo + kChunk < in_dim ? lo + kChunk : in_dim;
                for (int o = 0; o < out_dim; ++o) {
                    const T go = g[o];
                    const T* wrow = wv + static_cast<std::size_t>(o) * in_dim;
#pragma omp simd
                    for (int i = lo; i < hi; ++i) gx[i] += go * wrow[i];
                }
            }
        }
    };
    return Tensor<T>(out);
}

// Inverted dropout: Bernoulli keep mask with 1/(1-p) scaling at train
// time, identity at eval. Mask is a pure function of `seed`.
template <typename T>
Tensor<T> dropout(const Tensor<T>& x, double p, bool train, std::uint64_t seed) {
    if (p < 0.0 || p >= 1.0) fail_usage("dropout: p must lie in [0, 1)");
    auto out = detail::make_node<T>(x.shape(), "dropout", {x.node()});
    if (!train || p == 0.0) {
        out->val = x.values();
        out->backward_fn = [](Node<T>& self) {
            auto& xp = *self.parents[0];
            if (!xp.requires_grad) return;
            xp.ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) xp.grad[i] += self.grad[i];
        };
        return Tensor<T>(out);
    }

    auto mask = std::make_shared<std::vector<std::uint8_t>>(x.size());
    StreamRng rng(seed, 0x44524f50);
    const T scale = T(1.0 / (1.0 - p));
    const auto& xv = x.values();
    for (std::size_t i = 0; i < xv.size(); ++i) {
        const bool keep = rng.uniform() >= p;
        (*mask)[i] = keep;
        out->val[i] = keep ? xv[i] * scale : T(0);
    }
    out->backward_fn = [mask, scale](Node<T>& self) {
        auto& xp = *self.parents[0];
        if (!xp.requires_grad) return;
        xp.ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            if ((*mask)[i]) xp.grad[i] += self.grad[i] * scale;
        }
    };
    return Tensor<T>(out);
}

// Mean squared error against a constant target.
template <typename T>
Tensor<T> mse_loss(const Tensor<T>& pred, std::span<const T> target) {
    if (pred.size() != target.size()) fail_usage("mse_loss: shape mismatch");
    auto tgt = std::make_shared<std::vector<T>>(target.begin(), target.end());
    auto out = detail::make_node<T>({1}, "mse_loss", {pred.node()});
    const auto& pv = pred.values();
    T acc = T(0);
    for (std::size_t i = 0; i < pv.size(); ++i) {
        const T d = pv[i] - (*tgt)[i];
        acc += d * d;
    }
    out->val[0] = acc / static_cast<T>(pv.size());
    if (!std::isfinite(static_cast<double>(out->val[0]))) {
        fail_numeric("mse_loss: non-finite loss");
    }
    out->backward_fn = [tgt](Node<T>& self) {
        auto& pp = *self.parents[0];
        if (!pp.requires_grad) return;
        pp.ensure_grad();
        const T g = self.grad[0] * T(2) / static_cast<T>(pp.val.size());
        for (std::size_t i = 0; i < pp.val.size(); ++i) {
            pp.grad[i] += g * (pp.val[i] - (*tgt)[i]);
        }
    };
    return Tensor<T>(out);
}

template <typename T>
Tensor<T> mse_loss(const Tensor<T>& pred, const std::vector<T>& target) {
    return mse_loss(pred, std::span<const T>(target.data(), target.size()));
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor) {
    auto out = detail::make_node<T>(x.shape(), "scale", {x.node()});
    const auto& xv = x.values();
    for (std::size_t i = 0; i < xv.size(); ++i) out->val[i] = xv[i] * factor;
    out->backward_fn = [factor](Node<T>& self) {
        auto& xp = *self.parents[0];
        if (!xp.requires_grad) return;
        xp.ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) xp.grad[i] += self.grad[i] * factor;
    };
    return Tensor<T>(out);
}

// One-pole smoothing over the frame axis with one coefficient per band:
// s[n] = (1-a_b) v[n] + a_b s[n-1], zero initial state.
// v: [frames, bands, dim], alpha: [bands].
template <typename T>
Tensor<T> one_pole_smooth(const Tensor<T>& v, const Tensor<T>& alpha) {
    const Shape& vs = v.shape();
    if (vs.size() != 3) fail_usage("one_pole_smooth: expected [frames, bands, dim]");
    const int frames = vs[0], bands = vs[1], dim = vs[2];
    if (alpha.size() != static_cast<std::size_t>(bands)) {
        fail_usage("one_pole_smooth: alpha count mismatch");
    }

    auto out = detail::make_node<T>(vs, "one_pole_smooth", {v.node(), alpha.node()});
    const T* vv = v.values().data();
    const T* av = alpha.values().data();
    const std::size_t row = static_cast<std::size_t>(bands) * dim;
#pragma omp parallel for schedule(static)
    for (int b = 0; b < bands; ++b) {
        const T a = av[b];
        const T one_a = T(1) - a;
        for (int e = 0; e < dim; ++e) {
            const std::size_t off = static_cast<std::size_t>(b) * dim + e;
            T s = T(0);
            for (int n = 0; n < frames; ++n) {
                const std::size_t idx = static_cast<std::size_t>(n) * row + off;
                s = one_a * vv[idx] + a * s;
                out->val[idx] = s;
            }
        }
    }

    out->backward_fn = [frames, bands, dim, row](Node<T>& self) {
        auto& vp = *self.parents[0];
        auto& ap = *self.parents[1];
        const bool need_v = vp.requires_grad;
        const bool need_a = ap.requires_grad;
        if (!need_v && !need_a) return;
        if (need_v) vp.ensure_grad();
        if (need_a) ap.ensure_grad();
        const T* g = self.grad.data();
        const T* s = self.val.data();
        const T* vv = vp.val.data();
#pragma omp parallel for schedule(static)
        for (int b = 0; b < bands; ++b) {
            const T a = ap.val[b];
            const T one_a = T(1) - a;
            T ga = T(0);
            for (int e = 0; e < dim; ++e) {
                const std::size_t off = static_cast<std::size_t>(b) * dim + e;
                T adj = T(0);  // running adjoint of s[n]
                for (int n = frames - 1; n >= 0; --n) {
                    const std::size_t idx = static_cast<std::size_t>(n) * row + off;
                    adj = g[idx] + a * adj;
                    if (need_v) vp.grad[idx] += one_a * adj;
                    if (need_a) {
                        const T s_prev =
                            n > 0 ? s[idx - row] : T(0);
                        ga += adj * (s_prev - vv[idx]);
                    }
                }
            }
            if (need_a) ap.grad[b] += ga;
        }
    };
    return Tensor<T>(out);
}

// [log r0, r1/r0, ..., r_{dim-1}/r0] per (frame, band), r0 floored.
template <typename T>
Tensor<T> log_normalize(const Tensor<T>& v, double floor_val) {
    const Shape& vs = v.shape();
    if (vs.size() != 3) fail_usage("log_normalize: expected [frames, bands, dim]");
    const int dim = vs[2];
    const std::size_t groups = v.size() / static_cast<std::size_t>(dim);

    auto out = detail::make_node<T>(vs, "log_normalize", {v.node()});
    const T* vv = v.values().data();
    const T fl = static_cast<T>(floor_val);
    for (std::size_t gi = 0; gi < groups; ++gi) {
        const T* src = vv + gi * dim;
        T* dst = out->val.data() + gi * dim;
        const T r0 = src[0] > fl ? src[0] : fl;
        dst[0] = std::log(r0);
        for (int e = 1; e < dim; ++e) dst[e] = src[e] / r0;
    }

    out->backward_fn = [dim, groups, fl](Node<T>& self) {
        auto& vp = *self.parents[0];
        if (!vp.requires_grad) return;
        vp.ensure_grad();
        const T* g = self.grad.data();
        const T* vv = vp.val.data();
        for (std::size_t gi = 0; gi < groups; ++gi) {
            const T* src = vv + gi * dim;
            const T* gg = g + gi * dim;
            T* gv = vp.grad.data() + gi * dim;
            const bool clamped = !(src[0] > fl);
            const T r0 = clamped ? fl : src[0];
            T g0 = T(0);
            for (int e = 1; e < dim; ++e) {
                gv[e] += gg[e] / r0;
                g0 -= gg[e] * src[e] / (r0 * r0);
            }
            if (!clamped) gv[0] += gg[0] / r0 + g0;
        }
    };
    return Tensor<T>(out);
}

// Constant per-(band, coordinate) affine map: out = (x - mu) * inv_sigma
// with mu, inv_sigma of length bands*dim. Used for feature
// standardization; the constants carry no gradient.
template <typename T>
Tensor<T> standardize(const Tensor<T>& x, std::shared_ptr<const std::vector<T>> mu,
                      std::shared_ptr<const std::vector<T>> inv_sigma) {
    const Shape& xs = x.shape();
    if (xs.size() != 3) fail_usage("standardize: expected [frames, bands, dim]");
    const std::size_t row = static_cast<std::size_t>(xs[1]) * xs[2];
    if (mu->size() != row || inv_sigma->size() != row) {
        fail_usage("standardize: constant size mismatch");
    }
    auto out = detail::make_node<T>(xs, "standardize", {x.node()});
    const T* xv = x.values().data();
    for (std::size_t i = 0; i < x.size(); ++i) {
        const std::size_t c = i % row;
        out->val[i] = (xv[i] - (*mu)[c]) * (*inv_sigma)[c];
    }
    out->backward_fn = [row, inv_sigma](Node<T>& self) {
        auto& xp = *self.parents[0];
        if (!xp.requires_grad) return;
        xp.ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            xp.grad[i] += self.grad[i] * (*inv_sigma)[i % row];
        }
    };
    return Tensor<T>(out);
}

// [frames, bands, dim] -> [1, dim, frames, bands] (depth-major volume).
template <typename T>
Tensor<T> to_volume(const Tensor<T>& v) {
    const Shape& vs = v.shape();
    if (vs.size() != 3) fail_usage("to_volume: expected [frames, bands, dim]");
    const int frames = vs[0], bands = vs[1], dim = vs[2];
    auto out = detail::make_node<T>({1, dim, frames, bands}, "to_volume", {v.node()});
    const T* vv = v.values().data();
    for (int n = 0; n < frames; ++n) {
        for (int b = 0; b < bands; ++b) {
            const T* src = vv + (static_cast<std::size_t>(n) * bands + b) * dim;
            for (int e = 0; e < dim; ++e) {
                out->val[(static_cast<std::size_t>(e) * frames + n) * bands + b] = src[e];
            }
        }
    }
    out->backward_fn = [frames, bands, dim](Node<T>& self) {
        auto& vp = *self.parents[0];
        if (!vp.requires_grad) return;
        vp.ensure_grad();
        const T* g = self.grad.data();
        for (int n = 0; n < frames; ++n) {
            for (int b = 0; b < bands; ++b) {
                T* dst = vp.grad.data() + (static_cast<std::size_t>(n) * bands + b) * dim;
                for (int e = 0; e < dim; ++e) {
                    dst[e] += g[(static_cast<std::size_t>(e) * frames + n) * bands + b];
                }
            }
        }
    };
    return Tensor<T>(out);
}

// --- Optimizer -----------------------------------------------------------

template <typename T>
struct AdamState {
    std::vector<T> m, v;
    std::int64_t step = 0;
};

template <typename T>
struct Parameter {
    std::string name;
    Tensor<T> tensor;
    AdamState<T> adam;
};

// Bias-corrected Adam update reading gradients accumulated on the
// parameter tensors. Gradients are not cleared here.
template <typename T>
void adam_step(std::span<Parameter<T>* const> params, double lr, double beta1 = 0.9,
               double beta2 = 0.999, double eps = 1e-8) {
    for (Parameter<T>* p : params) {
        auto& val = p->tensor.values();
        auto& grad = p->tensor.grad();
        auto& st = p->adam;
        if (st.m.size() != val.size()) {
            st.m.assign(val.size(), T(0));
            st.v.assign(val.size(), T(0));
        }
        st.step += 1;
        const T b1 = static_cast<T>(beta1);
        const T b2 = static_cast<T>(beta2);
        const T inv_bc1 = static_cast<T>(1.0 / (1.0 - std::pow(beta1, static_cast<double>(st.step))));
        const T inv_bc2 = static_cast<T>(1.0 / (1.0 - std::pow(beta2, static_cast<double>(st.step))));
        const T lr_t = static_cast<T>(lr);
        const T eps_t = static_cast<T>(eps);
        T* mv = st.m.data();
        T* vv = st.v.data();
        T* pv = val.data();
        const T* gv = grad.data();
#pragma omp parallel for simd schedule(static)
        for (std::size_t i = 0; i < val.size(); ++i) {
            const T g = gv[i];
            const T m = b1 * mv[i] + (T(1) - b1) * g;
            const T v = b2 * vv[i] + (T(1) - b2) * g * g;
            mv[i] = m;
            vv[i] = v;
            pv[i] -= lr_t * (m * inv_bc1) / (std::sqrt(v * inv_bc2) + eps_t);
        }
    }
}

// --- Finite-difference gradient check -------------------------------------

// `build` reconstructs the scalar-valued graph from current leaf values.
// Returns the max relative error between analytic and central-difference
// gradients over (up to max_coords sampled) coordinates of `wrt`.
inline double grad_check(const std::function<Tensor<double>()>& build, Tensor<double>& wrt,
                         int max_coords = 64, double step = 1e-5) {
    wrt.zero_grad();
    Tensor<double> out = build();
    out.backward();
    const std::vector<double> analytic = wrt.grad();

    std::vector<std::size_t> coords;
    const std::size_t total = wrt.size();
    if (static_cast<int>(total) <= max_coords) {
        for (std::size_t i = 0; i < total; ++i) coords.push_back(i);
    } else {
        StreamRng rng(0x47434b, total);
        for (int i = 0; i < max_coords; ++i) {
            coords.push_back(static_cast<std::size_t>(
                rng.uniform_int(0, static_cast<std::int64_t>(total) - 1)));
        }
    }

    double max_rel = 0.0;
    for (std::size_t idx : coords) {
        const double orig = wrt.values()[idx];
        wrt.values()[idx] = orig + step;
        const double fp = build().values()[0];
        wrt.values()[idx] = orig - step;
        const double fm = build().values()[0];
        wrt.values()[idx] = orig;
        const double fd = (fp - fm) / (2.0 * step);
        const double ad = analytic[idx];
        const double rel = std::abs(fd - ad) / std::max({std::abs(fd), std::abs(ad), 1e-6});
        max_rel = std::max(max_rel, rel);
    }
    return max_rel;
}

}  // namespace ambiroom::engine
