#include "segdesic/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <unordered_set>

#include "segdesic/errors.hpp"
#include "segdesic/parallel.hpp"

namespace segdesic {

using detail::Node;
using NodePtr = std::shared_ptr<Node>;

void Node::ensure_grad() {
    if (grad.numel() != value.numel())
        grad = Tensor(value.shape().empty() ? std::vector<int>{} : value.shape());
    else if (grad.shape() != value.shape())
        grad = Tensor(value.shape());
}

namespace {

thread_local int g_no_grad_depth = 0;

constexpr double kLogFloor = 1e-300;

int ceil_div(int a, int b) { // b > 0
    return a >= 0 ? (a + b - 1) / b : -((-a) / b);
}

int floor_div(int a, int b) { // b > 0
    return a >= 0 ? a / b : -((-a + b - 1) / b);
}

const NodePtr& req(const Variable& v, const char* what) {
    if (!v.defined()) throw ShapeError(std::string(what) + ": undefined variable");
    return v.node();
}

bool wants_grad(const Variable& v) { return v.defined() && v.node()->requires_grad; }

Variable make_node(Tensor out, std::vector<Variable> parents,
                   std::function<void(Node&)> backward_fn) {
    auto node = std::make_shared<Node>();
    node->value = std::move(out);
    bool track = grad_enabled();
    bool any = false;
    if (track) {
        for (const auto& p : parents) any = any || wants_grad(p);
    }
    if (track && any) {
        node->requires_grad = true;
        node->parents.reserve(parents.size());
        for (auto& p : parents) node->parents.push_back(p.node());
        node->backward_fn = std::move(backward_fn);
    }
    return Variable(std::move(node));
}

} // namespace

Variable::Variable(Tensor value, bool requires_grad, std::string name) {
    node_ = std::make_shared<Node>();
    node_->value = std::move(value);
    node_->requires_grad = requires_grad;
    node_->name = std::move(name);
}

const Tensor& Variable::value() const { return node_->value; }
Tensor& Variable::value() { return node_->value; }
const Tensor& Variable::grad() const { return node_->grad; }
bool Variable::has_grad() const { return node_ && node_->grad.numel() == node_->value.numel(); }
bool Variable::requires_grad() const { return node_ && node_->requires_grad; }
const std::string& Variable::name() const { return node_->name; }

void Variable::zero_grad() {
    if (!node_) return;
    node_->ensure_grad();
    node_->grad.fill(0.0);
}

NoGradGuard::NoGradGuard() { ++g_no_grad_depth; }
NoGradGuard::~NoGradGuard() { --g_no_grad_depth; }

bool grad_enabled() { return g_no_grad_depth == 0; }

// ---- conv2d ----------------------------------------------------------------

namespace {

struct ConvDims {
    int n, ci, h, w, co, kh, kw, oh, ow, stride, pad;
};

ConvDims conv_dims(const Tensor& x, const Tensor& w, const Tensor* b, int stride, int pad,
                   const char* what) {
    require_ndim(x, 4, what);
    require_ndim(w, 4, what);
    if (stride < 1) throw ShapeError(std::string(what) + ": stride must be >= 1");
    if (pad < 0) throw ShapeError(std::string(what) + ": negative padding");
    ConvDims d;
    d.n = x.dim(0);
    d.ci = x.dim(1);
    d.h = x.dim(2);
    d.w = x.dim(3);
    d.co = w.dim(0);
    d.kh = w.dim(2);
    d.kw = w.dim(3);
    d.stride = stride;
    d.pad = pad;
    if (w.dim(1) != d.ci)
        throw ShapeError(std::string(what) + ": weight expects " + std::to_string(w.dim(1)) +
                         " input channels, input has " + std::to_string(d.ci));
    if (b != nullptr && (b->ndim() != 1 || b->dim(0) != d.co))
        throw ShapeError(std::string(what) + ": bias shape mismatch");
    d.oh = (d.h + 2 * pad - d.kh) / stride + 1;
    d.ow = (d.w + 2 * pad - d.kw) / stride + 1;
    if (d.h + 2 * pad < d.kh || d.w + 2 * pad < d.kw || d.oh < 1 || d.ow < 1)
        throw ShapeError(std::string(what) + ": kernel larger than padded input");
    return d;
}

// out[n,co] plane += sum_{ci,kh,kw} w * x rows; fixed accumulation order.
void conv2d_forward_kernel(const ConvDims& d, const double* x, const double* w,
                           const double* bias, double* out) {
    parallel_for(static_cast<std::int64_t>(d.n) * d.co, [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t idx = lo; idx < hi; ++idx) {
            int n = static_cast<int>(idx / d.co);
            int co = static_cast<int>(idx % d.co);
            double* outp = out + (static_cast<std::size_t>(n) * d.co + co) *
                                     (static_cast<std::size_t>(d.oh) * d.ow);
            double bv = bias != nullptr ? bias[co] : 0.0;
            for (std::size_t i = 0, e = static_cast<std::size_t>(d.oh) * d.ow; i < e; ++i)
                outp[i] = bv;
            for (int ci = 0; ci < d.ci; ++ci) {
                const double* xp = x + (static_cast<std::size_t>(n) * d.ci + ci) *
                                           (static_cast<std::size_t>(d.h) * d.w);
                const double* wp = w + (static_cast<std::size_t>(co) * d.ci + ci) *
                                           (static_cast<std::size_t>(d.kh) * d.kw);
                for (int kh = 0; kh < d.kh; ++kh) {
                    for (int kw = 0; kw < d.kw; ++kw) {
                        double wv = wp[kh * d.kw + kw];
                        int oh_lo = std::max(0, ceil_div(d.pad - kh, d.stride));
                        int oh_hi = std::min(d.oh, floor_div(d.h - 1 - kh + d.pad, d.stride) + 1);
                        int ow_lo = std::max(0, ceil_div(d.pad - kw, d.stride));
                        int ow_hi = std::min(d.ow, floor_div(d.w - 1 - kw + d.pad, d.stride) + 1);
                        for (int oh = oh_lo; oh < oh_hi; ++oh) {
                            int ih = oh * d.stride + kh - d.pad;
                            const double* xrow = xp + static_cast<std::size_t>(ih) * d.w +
                                                 (ow_lo * d.stride + kw - d.pad);
                            double* orow = outp + static_cast<std::size_t>(oh) * d.ow + ow_lo;
                            int cnt = ow_hi - ow_lo;
                            if (d.stride == 1) {
                                for (int i = 0; i < cnt; ++i) orow[i] += wv * xrow[i];
                            } else {
                                for (int i = 0; i < cnt; ++i)
                                    orow[i] += wv * xrow[static_cast<std::size_t>(i) * d.stride];
                            }
                        }
                    }
                }
            }
        }
    });
}

void conv2d_backward_input(const ConvDims& d, const double* g, const double* w, double* gx) {
    parallel_for(static_cast<std::int64_t>(d.n) * d.ci, [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t idx = lo; idx < hi; ++idx) {
            int n = static_cast<int>(idx / d.ci);
            int ci = static_cast<int>(idx % d.ci);
            double* gxp = gx + (static_cast<std::size_t>(n) * d.ci + ci) *
                                   (static_cast<std::size_t>(d.h) * d.w);
            for (int co = 0; co < d.co; ++co) {
                const double* gp = g + (static_cast<std::size_t>(n) * d.co + co) *
                                           (static_cast<std::size_t>(d.oh) * d.ow);
                const double* wp = w + (static_cast<std::size_t>(co) * d.ci + ci) *
                                           (static_cast<std::size_t>(d.kh) * d.kw);
                for (int kh = 0; kh < d.kh; ++kh) {
                    for (int kw = 0; kw < d.kw; ++kw) {
                        double wv = wp[kh * d.kw + kw];
                        int oh_lo = std::max(0, ceil_div(d.pad - kh, d.stride));
                        int oh_hi = std::min(d.oh, floor_div(d.h - 1 - kh + d.pad, d.stride) + 1);
                        int ow_lo = std::max(0, ceil_div(d.pad - kw, d.stride));
                        int ow_hi = std::min(d.ow, floor_div(d.w - 1 - kw + d.pad, d.stride) + 1);
                        for (int oh = oh_lo; oh < oh_hi; ++oh) {
                            int ih = oh * d.stride + kh - d.pad;
                            double* gxrow = gxp + static_cast<std::size_t>(ih) * d.w +
                                            (ow_lo * d.stride + kw - d.pad);
                            const double* grow = gp + static_cast<std::size_t>(oh) * d.ow + ow_lo;
                            int cnt = ow_hi - ow_lo;
                            if (d.stride == 1) {
                                for (int i = 0; i < cnt; ++i) gxrow[i] += wv * grow[i];
                            } else {
                                for (int i = 0; i < cnt; ++i)
                                    gxrow[static_cast<std::size_t>(i) * d.stride] += wv * grow[i];
                            }
                        }
                    }
                }
            }
        }
    });
}

void conv2d_backward_weight(const ConvDims& d, const double* g, const double* x, double* gw) {
    parallel_for(static_cast<std::int64_t>(d.co) * d.ci, [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t idx = lo; idx < hi; ++idx) {
            int co = static_cast<int>(idx / d.ci);
            int ci = static_cast<int>(idx % d.ci);
            double* gwp = gw + (static_cast<std::size_t>(co) * d.ci + ci) *
                                   (static_cast<std::size_t>(d.kh) * d.kw);
            for (int kh = 0; kh < d.kh; ++kh) {
                for (int kw = 0; kw < d.kw; ++kw) {
                    int oh_lo = std::max(0, ceil_div(d.pad - kh, d.stride));
                    int oh_hi = std::min(d.oh, floor_div(d.h - 1 - kh + d.pad, d.stride) + 1);
                    int ow_lo = std::max(0, ceil_div(d.pad - kw, d.stride));
                    int ow_hi = std::min(d.ow, floor_div(d.w - 1 - kw + d.pad, d.stride) + 1);
                    double acc = 0.0;
                    for (int n = 0; n < d.n; ++n) {
                        const double* gp = g + (static_cast<std::size_t>(n) * d.co + co) *
                                                   (static_cast<std::size_t>(d.oh) * d.ow);
                        const double* xp = x + (static_cast<std::size_t>(n) * d.ci + ci) *
                                                   (static_cast<std::size_t>(d.h) * d.w);
                        for (int oh = oh_lo; oh < oh_hi; ++oh) {
                            int ih = oh * d.stride + kh - d.pad;
                            const double* xrow = xp + static_cast<std::size_t>(ih) * d.w +
                                                 (ow_lo * d.stride + kw - d.pad);
                            const double* grow = gp + static_cast<std::size_t>(oh) * d.ow + ow_lo;
                            int cnt = ow_hi - ow_lo;
                            if (d.stride == 1) {
                                for (int i = 0; i < cnt; ++i) acc += grow[i] * xrow[i];
                            } else {
                                for (int i = 0; i < cnt; ++i)
                                    acc += grow[i] * xrow[static_cast<std::size_t>(i) * d.stride];
                            }
                        }
                    }
                    gwp[kh * d.kw + kw] += acc;
                }
            }
        }
    });
}

void reduce_bias_grad(int n, int c, std::size_t plane, const double* g, double* gb) {
    parallel_for(c, [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t ch = lo; ch < hi; ++ch) {
            double acc = 0.0;
            for (int i = 0; i < n; ++i) {
                const double* gp = g + (static_cast<std::size_t>(i) * c + ch) * plane;
                for (std::size_t j = 0; j < plane; ++j) acc += gp[j];
            }
            gb[ch] += acc;
        }
    });
}

} // namespace

Variable conv2d(const Variable& x, const Variable& weight, const Variable& bias,
                int stride, int padding) {
    const auto& xn = req(x, "conv2d");
    const auto& wn = req(weight, "conv2d");
    const Tensor* bt = bias.defined() ? &bias.value() : nullptr;
    ConvDims d = conv_dims(xn->value, wn->value, bt, stride, padding, "conv2d");

    Tensor out({d.n, d.co, d.oh, d.ow});
    conv2d_forward_kernel(d, xn->value.data(), wn->value.data(),
                          bt != nullptr ? bt->data() : nullptr, out.data());

    std::vector<Variable> parents{x, weight};
    if (bias.defined()) parents.push_back(bias);
    return make_node(std::move(out), std::move(parents), [d](Node& self) {
        const double* g = self.grad.data();
        Node& xp = *self.parents[0];
        Node& wp = *self.parents[1];
        if (xp.requires_grad) {
            xp.ensure_grad();
            conv2d_backward_input(d, g, wp.value.data(), xp.grad.data());
        }
        if (wp.requires_grad) {
            wp.ensure_grad();
            conv2d_backward_weight(d, g, xp.value.data(), wp.grad.data());
        }
        if (self.parents.size() > 2 && self.parents[2]->requires_grad) {
            Node& bp = *self.parents[2];
            bp.ensure_grad();
            reduce_bias_grad(d.n, d.co, static_cast<std::size_t>(d.oh) * d.ow, g, bp.grad.data());
        }
    });
}

// ---- conv2d_transpose ------------------------------------------------------

namespace {

struct ConvTDims {
    int n, ci, h, w, co, kh, kw, oh, ow, stride, pad;
};

ConvTDims convt_dims(const Tensor& x, const Tensor& w, const Tensor* b, int stride, int pad) {
    require_ndim(x, 4, "conv2d_transpose");
    require_ndim(w, 4, "conv2d_transpose");
    if (stride < 1) throw ShapeError("conv2d_transpose: stride must be >= 1");
    if (pad < 0) throw ShapeError("conv2d_transpose: negative padding");
    ConvTDims d;
    d.n = x.dim(0);
    d.ci = x.dim(1);
    d.h = x.dim(2);
    d.w = x.dim(3);
    if (w.dim(0) != d.ci)
        throw ShapeError("conv2d_transpose: weight expects " + std::to_string(w.dim(0)) +
                         " input channels, input has " + std::to_string(d.ci));
    d.co = w.dim(1);
    d.kh = w.dim(2);
    d.kw = w.dim(3);
    d.stride = stride;
    d.pad = pad;
    d.oh = (d.h - 1) * stride - 2 * pad + d.kh;
    d.ow = (d.w - 1) * stride - 2 * pad + d.kw;
    if (d.oh < 1 || d.ow < 1) throw ShapeError("conv2d_transpose: empty output");
    if (b != nullptr && (b->ndim() != 1 || b->dim(0) != d.co))
        throw ShapeError("conv2d_transpose: bias shape mismatch");
    return d;
}

// Scatter: out[n,co,h*s-p+kh, w*s-p+kw] += x[n,ci,h,w] * wt[ci,co,kh,kw].
void convt_forward_kernel(const ConvTDims& d, const double* x, const double* w,
                          const double* bias, double* out) {
    parallel_for(static_cast<std::int64_t>(d.n) * d.co, [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t idx = lo; idx < hi; ++idx) {
            int n = static_cast<int>(idx / d.co);
            int co = static_cast<int>(idx % d.co);
            double* outp = out + (static_cast<std::size_t>(n) * d.co + co) *
                                     (static_cast<std::size_t>(d.oh) * d.ow);
            double bv = bias != nullptr ? bias[co] : 0.0;
            for (std::size_t i = 0, e = static_cast<std::size_t>(d.oh) * d.ow; i < e; ++i)
                outp[i] = bv;
            for (int ci = 0; ci < d.ci; ++ci) {
                const double* xp = x + (static_cast<std::size_t>(n) * d.ci + ci) *
                                           (static_cast<std::size_t>(d.h) * d.w);
                const double* wp = w + (static_cast<std::size_t>(ci) * d.co + co) *
                                           (static_cast<std::size_t>(d.kh) * d.kw);
                for (int kh = 0; kh < d.kh; ++kh) {
                    for (int kw = 0; kw < d.kw; ++kw) {
                        double wv = wp[kh * d.kw + kw];
                        for (int h = 0; h < d.h; ++h) {
                            int oh = h * d.stride - d.pad + kh;
                            if (oh < 0 || oh >= d.oh) continue;
                            double* orow = outp + static_cast<std::size_t>(oh) * d.ow;
                            const double* xrow = xp + static_cast<std::size_t>(h) * d.w;
                            for (int wcol = 0; wcol < d.w; ++wcol) {
                                int ow = wcol * d.stride - d.pad + kw;
                                if (ow < 0 || ow >= d.ow) continue;
                                orow[ow] += wv * xrow[wcol];
                            }
                        }
                    }
                }
            }
        }
    });
}

// Gather: gx[n,ci,h,w] = sum_{co,kh,kw} g[n,co,h*s-p+kh, w*s-p+kw] * wt[ci,co,kh,kw].
void convt_backward_input(const ConvTDims& d, const double* g, const double* w, double* gx) {
    parallel_for(static_cast<std::int64_t>(d.n) * d.ci, [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t idx = lo; idx < hi; ++idx) {
            int n = static_cast<int>(idx / d.ci);
            int ci = static_cast<int>(idx % d.ci);
            double* gxp = gx + (static_cast<std::size_t>(n) * d.ci + ci) *
                                   (static_cast<std::size_t>(d.h) * d.w);
            for (int co = 0; co < d.co; ++co) {
                const double* gp = g + (static_cast<std::size_t>(n) * d.co + co) *
                                           (static_cast<std::size_t>(d.oh) * d.ow);
                const double* wp = w + (static_cast<std::size_t>(ci) * d.co + co) *
                                           (static_cast<std::size_t>(d.kh) * d.kw);
                for (int kh = 0; kh < d.kh; ++kh) {
                    for (int kw = 0; kw < d.kw; ++kw) {
                        double wv = wp[kh * d.kw + kw];
                        for (int h = 0; h < d.h; ++h) {
                            int oh = h * d.stride - d.pad + kh;
                            if (oh < 0 || oh >= d.oh) continue;
                            const double* grow = gp + static_cast<std::size_t>(oh) * d.ow;
                            double* gxrow = gxp + static_cast<std::size_t>(h) * d.w;
                            for (int wcol = 0; wcol < d.w; ++wcol) {
                                int ow = wcol * d.stride - d.pad + kw;
                                if (ow < 0 || ow >= d.ow) continue;
                                gxrow[wcol] += wv * grow[ow];
                            }
                        }
                    }
                }
            }
        }
    });
}

void convt_backward_weight(const ConvTDims& d, const double* g, const double* x, double* gw) {
    parallel_for(static_cast<std::int64_t>(d.ci) * d.co, [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t idx = lo; idx < hi; ++idx) {
            int ci = static_cast<int>(idx / d.co);
            int co = static_cast<int>(idx % d.co);
            double* gwp = gw + (static_cast<std::size_t>(ci) * d.co + co) *
                                   (static_cast<std::size_t>(d.kh) * d.kw);
            for (int kh = 0; kh < d.kh; ++kh) {
                for (int kw = 0; kw < d.kw; ++kw) {
                    double acc = 0.0;
                    for (int n = 0; n < d.n; ++n) {
                        const double* xp = x + (static_cast<std::size_t>(n) * d.ci + ci) *
                                                   (static_cast<std::size_t>(d.h) * d.w);
                        const double* gp = g + (static_cast<std::size_t>(n) * d.co + co) *
                                                   (static_cast<std::size_t>(d.oh) * d.ow);
                        for (int h = 0; h < d.h; ++h) {
                            int oh = h * d.stride - d.pad + kh;
                            if (oh < 0 || oh >= d.oh) continue;
                            const double* grow = gp + static_cast<std::size_t>(oh) * d.ow;
                            const double* xrow = xp + static_cast<std::size_t>(h) * d.w;
                            for (int wcol = 0; wcol < d.w; ++wcol) {
                                int ow = wcol * d.stride - d.pad + kw;
                                if (ow < 0 || ow >= d.ow) continue;
                                acc += grow[ow] * xrow[wcol];
                            }
                        }
                    }
                    gwp[kh * d.kw + kw] += acc;
                }
            }
        }
    });
}

} // namespace

Variable conv2d_transpose(const Variable& x, const Variable& weight, const Variable& bias,
                          int stride, int padding) {
    const auto& xn = req(x, "conv2d_transpose");
    const auto& wn = req(weight, "conv2d_transpose");
    const Tensor* bt = bias.defined() ? &bias.value() : nullptr;
    ConvTDims d = convt_dims(xn->value, wn->value, bt, stride, padding);

    Tensor out({d.n, d.co, d.oh, d.ow});
    convt_forward_kernel(d, xn->value.data(), wn->value.data(),
                         bt != nullptr ? bt->data() : nullptr, out.data());

    std::vector<Variable> parents{x, weight};
    if (bias.defined()) parents.push_back(bias);
    return make_node(std::move(out), std::move(parents), [d](Node& self) {
        const double* g = self.grad.data();
        Node& xp = *self.parents[0];
        Node& wp = *self.parents[1];
        if (xp.requires_grad) {
            xp.ensure_grad();
            convt_backward_input(d, g, wp.value.data(), xp.grad.data());
        }
        if (wp.requires_grad) {
            wp.ensure_grad();
            convt_backward_weight(d, g, xp.value.data(), wp.grad.data());
        }
        if (self.parents.size() > 2 && self.parents[2]->requires_grad) {
            Node& bp = *self.parents[2];
            bp.ensure_grad();
            reduce_bias_grad(d.n, d.co, static_cast<std::size_t>(d.oh) * d.ow, g, bp.grad.data());
        }
    });
}

// ---- pooling ----------------------------------------------------------------

Variable max_pool2(const Variable& x) {
    const auto& xn = req(x, "max_pool2");
    const Tensor& xv = xn->value;
    require_ndim(xv, 4, "max_pool2");
    int n = xv.dim(0), c = xv.dim(1), h = xv.dim(2), w = xv.dim(3);
    if (h < 2 || w < 2) throw ShapeError("max_pool2: spatial dims must be >= 2");
    int oh = h / 2, ow = w / 2;

    Tensor out({n, c, oh, ow});
    auto argmax = std::make_shared<std::vector<std::int32_t>>(out.numel());
    const double* xd = xv.data();
    double* od = out.data();
    std::int32_t* am = argmax->data();
    for (int i = 0; i < n * c; ++i) {
        const double* plane = xd + static_cast<std::size_t>(i) * h * w;
        double* oplane = od + static_cast<std::size_t>(i) * oh * ow;
        std::int32_t* aplane = am + static_cast<std::size_t>(i) * oh * ow;
        for (int y = 0; y < oh; ++y) {
            for (int xcol = 0; xcol < ow; ++xcol) {
                int best = 2 * y * w + 2 * xcol;
                // row-major scan of the window; first occurrence wins ties
                const int cand[4] = {best, best + 1, best + w, best + w + 1};
                double bv = plane[cand[0]];
                int bi = cand[0];
                for (int k = 1; k < 4; ++k) {
                    if (plane[cand[k]] > bv) {
                        bv = plane[cand[k]];
                        bi = cand[k];
                    }
                }
                oplane[y * ow + xcol] = bv;
                aplane[y * ow + xcol] = bi;
            }
        }
    }

    std::size_t plane_in = static_cast<std::size_t>(h) * w;
    std::size_t plane_out = static_cast<std::size_t>(oh) * ow;
    return make_node(std::move(out), {x}, [argmax, plane_in, plane_out, n, c](Node& self) {
        Node& xp = *self.parents[0];
        if (!xp.requires_grad) return;
        xp.ensure_grad();
        const double* g = self.grad.data();
        double* gx = xp.grad.data();
        const std::int32_t* am = argmax->data();
        for (int i = 0; i < n * c; ++i) {
            const double* gplane = g + i * plane_out;
            const std::int32_t* aplane = am + i * plane_out;
            double* gxplane = gx + i * plane_in;
            for (std::size_t j = 0; j < plane_out; ++j) gxplane[aplane[j]] += gplane[j];
        }
    });
}

Variable global_max_pool(const Variable& x) {
    const auto& xn = req(x, "global_max_pool");
    const Tensor& xv = xn->value;
    require_ndim(xv, 4, "global_max_pool");
    int n = xv.dim(0), c = xv.dim(1), h = xv.dim(2), w = xv.dim(3);
    std::size_t plane = static_cast<std::size_t>(h) * w;

    Tensor out({n, c});
    auto argmax = std::make_shared<std::vector<std::int32_t>>(out.numel());
    const double* xd = xv.data();
    for (int i = 0; i < n * c; ++i) {
        const double* p = xd + i * plane;
        double bv = p[0];
        std::int32_t bi = 0;
        for (std::size_t j = 1; j < plane; ++j) {
            if (p[j] > bv) {
                bv = p[j];
                bi = static_cast<std::int32_t>(j);
            }
        }
        out[static_cast<std::size_t>(i)] = bv;
        (*argmax)[static_cast<std::size_t>(i)] = bi;
    }

    return make_node(std::move(out), {x}, [argmax, plane, n, c](Node& self) {
        Node& xp = *self.parents[0];
        if (!xp.requires_grad) return;
        xp.ensure_grad();
        const double* g = self.grad.data();
        double* gx = xp.grad.data();
        for (int i = 0; i < n * c; ++i)
            gx[i * plane + static_cast<std::size_t>((*argmax)[i])] += g[i];
    });
}

// ---- batch norm --------------------------------------------------------------

namespace {

struct BnLayout {
    int channels;
    std::size_t count; // reduction size per channel
    int batch;
};

BnLayout bn_layout(const Tensor& x) {
    if (x.ndim() == 2) {
        return BnLayout{x.dim(1), static_cast<std::size_t>(x.dim(0)), x.dim(0)};
    }
    if (x.ndim() == 4) {
        return BnLayout{x.dim(1),
                        static_cast<std::size_t>(x.dim(0)) * x.dim(2) * x.dim(3), x.dim(0)};
    }
    throw ShapeError("batch_norm: expected rank 2 or 4 input, got " + x.shape_str());
}

template <typename Fn>
void bn_for_each(const Tensor& x, int channel, Fn&& fn) {
    if (x.ndim() == 2) {
        int n = x.dim(0), c = x.dim(1);
        for (int i = 0; i < n; ++i) fn(static_cast<std::size_t>(i) * c + channel);
    } else {
        int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
        std::size_t plane = static_cast<std::size_t>(h) * w;
        for (int i = 0; i < n; ++i) {
            std::size_t base = (static_cast<std::size_t>(i) * c + channel) * plane;
            for (std::size_t j = 0; j < plane; ++j) fn(base + j);
        }
    }
}

} // namespace

Variable batch_norm(const Variable& x, const Variable& gamma, const Variable& beta,
                    Variable& running_mean, Variable& running_var,
                    bool training, bool update_running_stats, double momentum, double eps) {
    const auto& xn = req(x, "batch_norm");
    const Tensor& xv = xn->value;
    BnLayout layout = bn_layout(xv);
    int c = layout.channels;
    auto check_c = [&](const Variable& v, const char* what) {
        if (!v.defined() || v.value().ndim() != 1 || v.value().dim(0) != c)
            throw ShapeError(std::string("batch_norm: ") + what + " must have shape [" +
                             std::to_string(c) + "]");
    };
    check_c(gamma, "gamma");
    check_c(beta, "beta");
    check_c(running_mean, "running_mean");
    check_c(running_var, "running_var");
    if (training && layout.batch < 2)
        throw ValueError("batch_norm: train mode requires a batch of at least 2");

    Tensor out(xv.shape());
    auto xhat = std::make_shared<Tensor>(xv.shape());
    auto invstd = std::make_shared<std::vector<double>>(static_cast<std::size_t>(c));

    const double* gdat = gamma.value().data();
    const double* bdat = beta.value().data();
    double m = static_cast<double>(layout.count);

    for (int ch = 0; ch < c; ++ch) {
        double mean, var;
        if (training) {
            double s = 0.0;
            bn_for_each(xv, ch, [&](std::size_t i) { s += xv[i]; });
            mean = s / m;
            double sq = 0.0;
            bn_for_each(xv, ch, [&](std::size_t i) {
                double dlt = xv[i] - mean;
                sq += dlt * dlt;
            });
            var = sq / m;
            if (update_running_stats) {
                double var_unbiased = m > 1.0 ? sq / (m - 1.0) : var;
                running_mean.value()[ch] =
                    (1.0 - momentum) * running_mean.value()[ch] + momentum * mean;
                running_var.value()[ch] =
                    (1.0 - momentum) * running_var.value()[ch] + momentum * var_unbiased;
            }
        } else {
            mean = running_mean.value()[ch];
            var = running_var.value()[ch];
        }
        double is = 1.0 / std::sqrt(var + eps);
        (*invstd)[static_cast<std::size_t>(ch)] = is;
        double gch = gdat[ch], bch = bdat[ch];
        bn_for_each(xv, ch, [&](std::size_t i) {
            double xh = (xv[i] - mean) * is;
            (*xhat)[i] = xh;
            out[i] = gch * xh + bch;
        });
    }

    bool train_stats = training;
    return make_node(std::move(out), {x, gamma, beta},
                     [xhat, invstd, layout, train_stats](Node& self) {
        Node& xp = *self.parents[0];
        Node& gp = *self.parents[1];
        Node& bp = *self.parents[2];
        const Tensor& g = self.grad;
        const Tensor& xh = *xhat;
        int c = layout.channels;
        double m = static_cast<double>(layout.count);
        bool need_x = xp.requires_grad;
        bool need_g = gp.requires_grad;
        bool need_b = bp.requires_grad;
        if (need_x) xp.ensure_grad();
        if (need_g) gp.ensure_grad();
        if (need_b) bp.ensure_grad();
        for (int ch = 0; ch < c; ++ch) {
            double sum_g = 0.0, sum_gx = 0.0;
            bn_for_each(xh, ch, [&](std::size_t i) {
                sum_g += g[i];
                sum_gx += g[i] * xh[i];
            });
            if (need_g) gp.grad[ch] += sum_gx;
            if (need_b) bp.grad[ch] += sum_g;
            if (need_x) {
                double gamma_is = gp.value[ch] * (*invstd)[static_cast<std::size_t>(ch)];
                if (train_stats) {
                    double mg = sum_g / m, mgx = sum_gx / m;
                    bn_for_each(xh, ch, [&](std::size_t i) {
                        xp.grad[i] += gamma_is * (g[i] - mg - xh[i] * mgx);
                    });
                } else {
                    bn_for_each(xh, ch, [&](std::size_t i) { xp.grad[i] += gamma_is * g[i]; });
                }
            }
        }
    });
}

// ---- pointwise / dense -------------------------------------------------------

Variable relu(const Variable& x) {
    const auto& xn = req(x, "relu");
    const Tensor& xv = xn->value;
    Tensor out(xv.shape().empty() ? std::vector<int>{} : xv.shape());
    if (xv.is_scalar()) out = Tensor::scalar(0.0);
    for (std::size_t i = 0; i < xv.numel(); ++i) out[i] = xv[i] > 0.0 ? xv[i] : 0.0;
    return make_node(std::move(out), {x}, [](Node& self) {
        Node& xp = *self.parents[0];
        if (!xp.requires_grad) return;
        xp.ensure_grad();
        for (std::size_t i = 0; i < self.grad.numel(); ++i)
            if (xp.value[i] > 0.0) xp.grad[i] += self.grad[i];
    });
}

Variable linear(const Variable& x, const Variable& weight, const Variable& bias) {
    const auto& xn = req(x, "linear");
    const auto& wn = req(weight, "linear");
    const Tensor& xv = xn->value;
    const Tensor& wv = wn->value;
    require_ndim(xv, 2, "linear");
    require_ndim(wv, 2, "linear");
    int n = xv.dim(0), in = xv.dim(1), out_dim = wv.dim(0);
    if (wv.dim(1) != in)
        throw ShapeError("linear: weight expects " + std::to_string(wv.dim(1)) +
                         " inputs, got " + std::to_string(in));
    const Tensor* bt = bias.defined() ? &bias.value() : nullptr;
    if (bt != nullptr && (bt->ndim() != 1 || bt->dim(0) != out_dim))
        throw ShapeError("linear: bias shape mismatch");

    Tensor out({n, out_dim});
    for (int i = 0; i < n; ++i) {
        const double* xrow = xv.data() + static_cast<std::size_t>(i) * in;
        double* orow = out.data() + static_cast<std::size_t>(i) * out_dim;
        for (int o = 0; o < out_dim; ++o) {
            const double* wrow = wv.data() + static_cast<std::size_t>(o) * in;
            double acc = bt != nullptr ? (*bt)[static_cast<std::size_t>(o)] : 0.0;
            for (int k = 0; k < in; ++k) acc += xrow[k] * wrow[k];
            orow[o] = acc;
        }
    }

    std::vector<Variable> parents{x, weight};
    if (bias.defined()) parents.push_back(bias);
    return make_node(std::move(out), std::move(parents), [n, in, out_dim](Node& self) {
        const Tensor& g = self.grad;
        Node& xp = *self.parents[0];
        Node& wp = *self.parents[1];
        if (xp.requires_grad) {
            xp.ensure_grad();
            for (int i = 0; i < n; ++i) {
                const double* grow = g.data() + static_cast<std::size_t>(i) * out_dim;
                double* gxrow = xp.grad.data() + static_cast<std::size_t>(i) * in;
                for (int o = 0; o < out_dim; ++o) {
                    const double* wrow = wp.value.data() + static_cast<std::size_t>(o) * in;
                    double gv = grow[o];
                    for (int k = 0; k < in; ++k) gxrow[k] += gv * wrow[k];
                }
            }
        }
        if (wp.requires_grad) {
            wp.ensure_grad();
            for (int o = 0; o < out_dim; ++o) {
                double* gwrow = wp.grad.data() + static_cast<std::size_t>(o) * in;
                for (int i = 0; i < n; ++i) {
                    double gv = g.data()[static_cast<std::size_t>(i) * out_dim + o];
                    const double* xrow = xp.value.data() + static_cast<std::size_t>(i) * in;
                    for (int k = 0; k < in; ++k) gwrow[k] += gv * xrow[k];
                }
            }
        }
        if (self.parents.size() > 2 && self.parents[2]->requires_grad) {
            Node& bp = *self.parents[2];
            bp.ensure_grad();
            for (int o = 0; o < out_dim; ++o) {
                double acc = 0.0;
                for (int i = 0; i < n; ++i)
                    acc += g.data()[static_cast<std::size_t>(i) * out_dim + o];
                bp.grad[static_cast<std::size_t>(o)] += acc;
            }
        }
    });
}

Variable concat_channels(const Variable& a, const Variable& b) {
    const auto& an = req(a, "concat_channels");
    const auto& bn = req(b, "concat_channels");
    const Tensor& av = an->value;
    const Tensor& bv = bn->value;
    require_ndim(av, 4, "concat_channels");
    require_ndim(bv, 4, "concat_channels");
    if (av.dim(0) != bv.dim(0) || av.dim(2) != bv.dim(2) || av.dim(3) != bv.dim(3))
        throw ShapeError("concat_channels: incompatible shapes " + av.shape_str() + " and " +
                         bv.shape_str());
    int n = av.dim(0), ca = av.dim(1), cb = bv.dim(1), h = av.dim(2), w = av.dim(3);
    std::size_t plane = static_cast<std::size_t>(h) * w;

    Tensor out({n, ca + cb, h, w});
    for (int i = 0; i < n; ++i) {
        std::copy_n(av.data() + static_cast<std::size_t>(i) * ca * plane, ca * plane,
                    out.data() + static_cast<std::size_t>(i) * (ca + cb) * plane);
        std::copy_n(bv.data() + static_cast<std::size_t>(i) * cb * plane, cb * plane,
                    out.data() + (static_cast<std::size_t>(i) * (ca + cb) + ca) * plane);
    }

    return make_node(std::move(out), {a, b}, [n, ca, cb, plane](Node& self) {
        Node& ap = *self.parents[0];
        Node& bp = *self.parents[1];
        const double* g = self.grad.data();
        if (ap.requires_grad) {
            ap.ensure_grad();
            for (int i = 0; i < n; ++i) {
                const double* src = g + static_cast<std::size_t>(i) * (ca + cb) * plane;
                double* dst = ap.grad.data() + static_cast<std::size_t>(i) * ca * plane;
                for (std::size_t j = 0; j < static_cast<std::size_t>(ca) * plane; ++j)
                    dst[j] += src[j];
            }
        }
        if (bp.requires_grad) {
            bp.ensure_grad();
            for (int i = 0; i < n; ++i) {
                const double* src = g + (static_cast<std::size_t>(i) * (ca + cb) + ca) * plane;
                double* dst = bp.grad.data() + static_cast<std::size_t>(i) * cb * plane;
                for (std::size_t j = 0; j < static_cast<std::size_t>(cb) * plane; ++j)
                    dst[j] += src[j];
            }
        }
    });
}

// ---- softmax / losses --------------------------------------------------------

namespace {

struct SoftmaxLayout {
    int outer;   // N
    int classes; // K
    std::size_t inner; // H*W (1 for rank-2)
};

SoftmaxLayout softmax_layout(const Tensor& x) {
    if (x.ndim() == 2) return SoftmaxLayout{x.dim(0), x.dim(1), 1};
    if (x.ndim() == 4)
        return SoftmaxLayout{x.dim(0), x.dim(1), static_cast<std::size_t>(x.dim(2)) * x.dim(3)};
    throw ShapeError("softmax: expected rank 2 or 4 input, got " + x.shape_str());
}

} // namespace

Variable softmax_over_classes(const Variable& x) {
    const auto& xn = req(x, "softmax");
    const Tensor& xv = xn->value;
    SoftmaxLayout lay = softmax_layout(xv);

    Tensor out(xv.shape());
    auto probs = std::make_shared<Tensor>(xv.shape());
    for (int n = 0; n < lay.outer; ++n) {
        std::size_t base = static_cast<std::size_t>(n) * lay.classes * lay.inner;
        for (std::size_t pos = 0; pos < lay.inner; ++pos) {
            double mx = xv[base + pos];
            for (int k = 1; k < lay.classes; ++k)
                mx = std::max(mx, xv[base + static_cast<std::size_t>(k) * lay.inner + pos]);
            double z = 0.0;
            for (int k = 0; k < lay.classes; ++k) {
                double e = std::exp(xv[base + static_cast<std::size_t>(k) * lay.inner + pos] - mx);
                out[base + static_cast<std::size_t>(k) * lay.inner + pos] = e;
                z += e;
            }
            for (int k = 0; k < lay.classes; ++k) {
                std::size_t i = base + static_cast<std::size_t>(k) * lay.inner + pos;
                out[i] /= z;
                (*probs)[i] = out[i];
            }
        }
    }

    return make_node(std::move(out), {x}, [probs, lay](Node& self) {
        Node& xp = *self.parents[0];
        if (!xp.requires_grad) return;
        xp.ensure_grad();
        const Tensor& g = self.grad;
        const Tensor& p = *probs;
        for (int n = 0; n < lay.outer; ++n) {
            std::size_t base = static_cast<std::size_t>(n) * lay.classes * lay.inner;
            for (std::size_t pos = 0; pos < lay.inner; ++pos) {
                double dot = 0.0;
                for (int k = 0; k < lay.classes; ++k) {
                    std::size_t i = base + static_cast<std::size_t>(k) * lay.inner + pos;
                    dot += g[i] * p[i];
                }
                for (int k = 0; k < lay.classes; ++k) {
                    std::size_t i = base + static_cast<std::size_t>(k) * lay.inner + pos;
                    xp.grad[i] += p[i] * (g[i] - dot);
                }
            }
        }
    });
}

Variable cross_entropy(const Variable& probs, const Tensor& labels, int ignore_value) {
    const auto& pn = req(probs, "cross_entropy");
    const Tensor& pv = pn->value;
    require_ndim(pv, 4, "cross_entropy");
    require_ndim(labels, 3, "cross_entropy labels");
    int n = pv.dim(0), k = pv.dim(1), h = pv.dim(2), w = pv.dim(3);
    if (labels.dim(0) != n || labels.dim(1) != h || labels.dim(2) != w)
        throw ShapeError("cross_entropy: labels " + labels.shape_str() +
                         " do not match probs " + pv.shape_str());

    std::size_t plane = static_cast<std::size_t>(h) * w;
    auto ids = std::make_shared<std::vector<std::int32_t>>(labels.numel());
    std::size_t scored = 0;
    double acc = 0.0;
    for (std::size_t i = 0; i < labels.numel(); ++i) {
        double lv = labels[i];
        if (!(lv == std::floor(lv)))
            throw ValueError("cross_entropy: non-integral label value");
        int id = static_cast<int>(lv);
        (*ids)[i] = id;
        if (id == ignore_value) continue;
        if (id < 0 || id >= k)
            throw ValueError("cross_entropy: label " + std::to_string(id) + " outside [0, " +
                             std::to_string(k - 1) + "]");
        std::size_t img = i / plane, pos = i % plane;
        double p = pv[(img * k + static_cast<std::size_t>(id)) * plane + pos];
        if (!(p > 0.0))
            throw ValueError("cross_entropy: non-positive probability at a scored pixel");
        acc += -std::log(std::max(p, kLogFloor));
        ++scored;
    }
    if (scored == 0) throw ValueError("cross_entropy: every pixel is ignored");
    double inv_m = 1.0 / static_cast<double>(scored);

    return make_node(Tensor::scalar(acc * inv_m), {probs},
                     [ids, ignore_value, inv_m, k, plane](Node& self) {
        Node& pp = *self.parents[0];
        if (!pp.requires_grad) return;
        pp.ensure_grad();
        double gseed = self.grad[0];
        for (std::size_t i = 0; i < ids->size(); ++i) {
            int id = (*ids)[i];
            if (id == ignore_value) continue;
            std::size_t img = i / plane, pos = i % plane;
            std::size_t at = (img * k + static_cast<std::size_t>(id)) * plane + pos;
            double p = std::max(pp.value[at], kLogFloor);
            pp.grad[at] -= gseed * inv_m / p;
        }
    });
}

Variable normalize_rows(const Variable& x, NormKind kind) {
    const auto& xn = req(x, "normalize_rows");
    const Tensor& xv = xn->value;
    require_ndim(xv, 2, "normalize_rows");
    int n = xv.dim(0), d = xv.dim(1);

    Tensor out({n, d});
    auto norms = std::make_shared<std::vector<double>>(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const double* row = xv.data() + static_cast<std::size_t>(i) * d;
        double norm = 0.0;
        if (kind == NormKind::L1) {
            for (int j = 0; j < d; ++j) norm += std::fabs(row[j]);
        } else {
            for (int j = 0; j < d; ++j) norm += row[j] * row[j];
            norm = std::sqrt(norm);
        }
        if (!(norm > 0.0)) throw ValueError("normalize_rows: zero-norm row");
        (*norms)[static_cast<std::size_t>(i)] = norm;
        double* orow = out.data() + static_cast<std::size_t>(i) * d;
        for (int j = 0; j < d; ++j) orow[j] = row[j] / norm;
    }

    return make_node(std::move(out), {x}, [norms, kind, n, d](Node& self) {
        Node& xp = *self.parents[0];
        if (!xp.requires_grad) return;
        xp.ensure_grad();
        for (int i = 0; i < n; ++i) {
            const double* g = self.grad.data() + static_cast<std::size_t>(i) * d;
            const double* y = self.value.data() + static_cast<std::size_t>(i) * d;
            const double* xrow = xp.value.data() + static_cast<std::size_t>(i) * d;
            double* gx = xp.grad.data() + static_cast<std::size_t>(i) * d;
            double norm = (*norms)[static_cast<std::size_t>(i)];
            double dot = 0.0;
            for (int j = 0; j < d; ++j) dot += g[j] * y[j];
            if (kind == NormKind::L1) {
                for (int j = 0; j < d; ++j) {
                    double sgn = xrow[j] > 0.0 ? 1.0 : (xrow[j] < 0.0 ? -1.0 : 0.0);
                    gx[j] += (g[j] - dot * sgn) / norm;
                }
            } else {
                for (int j = 0; j < d; ++j) gx[j] += (g[j] - dot * y[j]) / norm;
            }
        }
    });
}

Variable cosine_dissimilarity_mean(const Variable& pred, const Tensor& target) {
    const auto& pn = req(pred, "cosine_dissimilarity_mean");
    const Tensor& pv = pn->value;
    require_ndim(pv, 2, "cosine_dissimilarity_mean");
    if (!pv.same_shape(target))
        throw ShapeError("cosine_dissimilarity_mean: prediction " + pv.shape_str() +
                         " vs target " + target.shape_str());
    int n = pv.dim(0), d = pv.dim(1);

    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        const double* p = pv.data() + static_cast<std::size_t>(i) * d;
        const double* t = target.data() + static_cast<std::size_t>(i) * d;
        double dot = 0.0, np = 0.0, nt = 0.0;
        for (int j = 0; j < d; ++j) {
            dot += p[j] * t[j];
            np += p[j] * p[j];
            nt += t[j] * t[j];
        }
        if (!(np > 0.0) || !(nt > 0.0))
            throw ValueError("cosine_dissimilarity_mean: zero-norm vector in row " +
                             std::to_string(i));
        total += 1.0 - dot / (std::sqrt(np) * std::sqrt(nt));
    }

    Tensor tt = target; // keep a copy alive for the backward pass
    return make_node(Tensor::scalar(total / n), {pred}, [tt = std::move(tt), n, d](Node& self) {
        Node& pp = *self.parents[0];
        if (!pp.requires_grad) return;
        pp.ensure_grad();
        double gseed = self.grad[0] / n;
        for (int i = 0; i < n; ++i) {
            const double* p = pp.value.data() + static_cast<std::size_t>(i) * d;
            const double* t = tt.data() + static_cast<std::size_t>(i) * d;
            double* gp = pp.grad.data() + static_cast<std::size_t>(i) * d;
            double dot = 0.0, np2 = 0.0, nt2 = 0.0;
            for (int j = 0; j < d; ++j) {
                dot += p[j] * t[j];
                np2 += p[j] * p[j];
                nt2 += t[j] * t[j];
            }
            double np = std::sqrt(np2), nt = std::sqrt(nt2);
            double inv = 1.0 / (np * nt);
            double scale = dot / (np2 * np * nt);
            for (int j = 0; j < d; ++j)
                gp[j] += gseed * (scale * p[j] - t[j] * inv);
        }
    });
}

Variable add(const Variable& a, const Variable& b) {
    const auto& an = req(a, "add");
    const auto& bn = req(b, "add");
    if (!an->value.same_shape(bn->value))
        throw ShapeError("add: shape mismatch " + an->value.shape_str() + " vs " +
                         bn->value.shape_str());
    Tensor out = an->value;
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] += bn->value[i];
    return make_node(std::move(out), {a, b}, [](Node& self) {
        for (int pi = 0; pi < 2; ++pi) {
            Node& p = *self.parents[static_cast<std::size_t>(pi)];
            if (!p.requires_grad) continue;
            p.ensure_grad();
            for (std::size_t i = 0; i < self.grad.numel(); ++i) p.grad[i] += self.grad[i];
        }
    });
}

Variable mul(const Variable& a, const Variable& b) {
    const auto& an = req(a, "mul");
    const auto& bn = req(b, "mul");
    if (!an->value.same_shape(bn->value))
        throw ShapeError("mul: shape mismatch " + an->value.shape_str() + " vs " +
                         bn->value.shape_str());
    Tensor out = an->value;
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= bn->value[i];
    return make_node(std::move(out), {a, b}, [](Node& self) {
        Node& ap = *self.parents[0];
        Node& bp = *self.parents[1];
        if (ap.requires_grad) {
            ap.ensure_grad();
            for (std::size_t i = 0; i < self.grad.numel(); ++i)
                ap.grad[i] += self.grad[i] * bp.value[i];
        }
        if (bp.requires_grad) {
            bp.ensure_grad();
            for (std::size_t i = 0; i < self.grad.numel(); ++i)
                bp.grad[i] += self.grad[i] * ap.value[i];
        }
    });
}

Variable mul_const(const Variable& a, const Tensor& w) {
    const auto& an = req(a, "mul_const");
    if (!an->value.same_shape(w))
        throw ShapeError("mul_const: shape mismatch " + an->value.shape_str() + " vs " +
                         w.shape_str());
    Tensor out = an->value;
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= w[i];
    Tensor weights = w;
    return make_node(std::move(out), {a}, [weights = std::move(weights)](Node& self) {
        Node& ap = *self.parents[0];
        if (!ap.requires_grad) return;
        ap.ensure_grad();
        for (std::size_t i = 0; i < self.grad.numel(); ++i)
            ap.grad[i] += self.grad[i] * weights[i];
    });
}

Variable scale(const Variable& a, double k) {
    const auto& an = req(a, "scale");
    Tensor out = an->value;
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= k;
    return make_node(std::move(out), {a}, [k](Node& self) {
        Node& p = *self.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        for (std::size_t i = 0; i < self.grad.numel(); ++i) p.grad[i] += k * self.grad[i];
    });
}

Variable sum(const Variable& x) {
    const auto& xn = req(x, "sum");
    double acc = 0.0;
    for (std::size_t i = 0; i < xn->value.numel(); ++i) acc += xn->value[i];
    return make_node(Tensor::scalar(acc), {x}, [](Node& self) {
        Node& p = *self.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        double g = self.grad[0];
        for (std::size_t i = 0; i < p.grad.numel(); ++i) p.grad[i] += g;
    });
}

// ---- reverse pass -------------------------------------------------------------

void backward(const Variable& loss) {
    if (!loss.defined()) throw ValueError("backward: undefined loss");
    NodePtr root = loss.node();
    if (root->value.numel() != 1)
        throw ValueError("backward: loss must be scalar, got shape " + root->value.shape_str());
    if (!root->requires_grad)
        throw ValueError("backward: loss was not produced by a recorded graph");

    // Iterative post-order DFS; parent order fixes the topological order.
    std::vector<Node*> topo;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(root.get(), 0);
    seen.insert(root.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node* parent = node->parents[next].get();
            ++next;
            if (parent->requires_grad && seen.insert(parent).second)
                stack.emplace_back(parent, 0);
        } else {
            topo.push_back(node);
            stack.pop_back();
        }
    }

    root->ensure_grad();
    root->grad.fill(0.0);
    root->grad[0] = 1.0;
    for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
        Node* node = *it;
        if (node->backward_fn) node->backward_fn(*node);
    }
}

} // namespace segdesic
