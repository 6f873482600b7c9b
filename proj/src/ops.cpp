#include "vsal/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>

#include "vsal/kernels.hpp"

namespace vsal::ops {

namespace {

// Common epilogue: finiteness check, requires_grad propagation, tape record.
template <class T>
TensorPtr<T> finish(Tape<T>* tape, const char* name, std::vector<TensorPtr<T>> inputs,
                    TensorPtr<T> out, std::function<void()> rule) {
    out->check_finite(name);
    bool needs = false;
    if (tape) {
        for (const auto& i : inputs) {
            if (i && i->requires_grad) needs = true;
        }
    }
    out->requires_grad = needs;
    if (needs) tape->record(std::move(inputs), out, std::move(rule));
    return out;
}

template <class T>
void require_same_shape(const char* name, const Tensor<T>& a, const Tensor<T>& b) {
    if (a.shape != b.shape) {
        throw ShapeError(std::string(name) + ": shape mismatch " + shape_to_string(a.shape) + " vs " +
                         shape_to_string(b.shape));
    }
}

}  // namespace

// ---------------------------------------------------------------------------
// Convolutions
// ---------------------------------------------------------------------------

template <class T>
TensorPtr<T> conv3d(Tape<T>* tape, const TensorPtr<T>& input, const TensorPtr<T>& weight,
                    const TensorPtr<T>& bias, Stride3 stride, Pad3 pad) {
    if (input->ndim() != 4) throw ShapeError("conv3d: input must be [C,T,H,W], got " + shape_to_string(input->shape));
    if (weight->ndim() != 5) throw ShapeError("conv3d: weight must be [Co,Ci,kT,kH,kW], got " + shape_to_string(weight->shape));
    if (weight->shape[1] != input->shape[0]) {
        throw ShapeError("conv3d: input channels " + std::to_string(input->shape[0]) +
                         " do not match weight C_in " + std::to_string(weight->shape[1]));
    }
    if (bias && (bias->ndim() != 1 || bias->shape[0] != weight->shape[0])) {
        throw ShapeError("conv3d: bias must be [C_out]");
    }
    const auto g = kernels::make_conv3d_geom(
        input->shape[0], weight->shape[0], input->shape[1], input->shape[2], input->shape[3],
        weight->shape[2], weight->shape[3], weight->shape[4], stride.t, stride.h, stride.w,
        pad.t, pad.h, pad.w);

    auto out = zeros<T>({g.c_out, g.out_t, g.out_h, g.out_w});
    kernels::conv3d_forward(g, input->data.data(), weight->data.data(),
                            bias ? bias->data.data() : nullptr, out->data.data());

    auto rule = [g, input, weight, bias, out]() {
        if (input->requires_grad) {
            input->ensure_grad();
            kernels::conv3d_backward_input(g, out->grad.data(), weight->data.data(), input->grad.data());
        }
        if (weight->requires_grad) {
            weight->ensure_grad();
            kernels::conv3d_backward_weight(g, input->data.data(), out->grad.data(), weight->grad.data());
        }
        if (bias && bias->requires_grad) {
            bias->ensure_grad();
            kernels::conv3d_backward_bias(g, out->grad.data(), bias->grad.data());
        }
    };
    return finish(tape, "conv3d", {input, weight, bias}, out, rule);
}

template <class T>
TensorPtr<T> conv_transpose3d(Tape<T>* tape, const TensorPtr<T>& input, const TensorPtr<T>& weight,
                              const TensorPtr<T>& bias, Stride3 stride, Pad3 pad) {
    if (input->ndim() != 4) throw ShapeError("conv_transpose3d: input must be [C,T,H,W]");
    if (weight->ndim() != 5) throw ShapeError("conv_transpose3d: weight must be [Ci,Co,kT,kH,kW]");
    if (weight->shape[0] != input->shape[0]) {
        throw ShapeError("conv_transpose3d: input channels do not match weight C_in");
    }
    if (bias && (bias->ndim() != 1 || bias->shape[0] != weight->shape[1])) {
        throw ShapeError("conv_transpose3d: bias must be [C_out]");
    }
    const auto g = kernels::make_convt3d_geom(
        input->shape[0], weight->shape[1], input->shape[1], input->shape[2], input->shape[3],
        weight->shape[2], weight->shape[3], weight->shape[4], stride.t, stride.h, stride.w,
        pad.t, pad.h, pad.w);

    auto out = zeros<T>({g.c_out, g.out_t, g.out_h, g.out_w});
    kernels::convt3d_forward(g, input->data.data(), weight->data.data(),
                             bias ? bias->data.data() : nullptr, out->data.data());

    auto rule = [g, input, weight, bias, out]() {
        if (input->requires_grad) {
            input->ensure_grad();
            kernels::convt3d_backward_input(g, out->grad.data(), weight->data.data(), input->grad.data());
        }
        if (weight->requires_grad) {
            weight->ensure_grad();
            kernels::convt3d_backward_weight(g, input->data.data(), out->grad.data(), weight->grad.data());
        }
        if (bias && bias->requires_grad) {
            bias->ensure_grad();
            kernels::convt3d_backward_bias(g, out->grad.data(), bias->grad.data());
        }
    };
    return finish(tape, "conv_transpose3d", {input, weight, bias}, out, rule);
}

template <class T>
TensorPtr<T> conv1d(Tape<T>* tape, const TensorPtr<T>& input, const TensorPtr<T>& weight,
                    const TensorPtr<T>& bias, std::size_t stride, std::size_t pad) {
    if (input->ndim() != 2) throw ShapeError("conv1d: input must be [C,L]");
    if (weight->ndim() != 3) throw ShapeError("conv1d: weight must be [Co,Ci,k]");
    auto x4 = reshape(tape, input, {input->shape[0], input->shape[1], 1, 1});
    auto w5 = reshape(tape, weight, {weight->shape[0], weight->shape[1], weight->shape[2], 1, 1});
    auto y4 = conv3d(tape, x4, w5, bias, Stride3{stride, 1, 1}, Pad3{pad, 0, 0});
    return reshape(tape, y4, {y4->shape[0], y4->shape[1]});
}

template <class T>
TensorPtr<T> sep_conv3d(Tape<T>* tape, const TensorPtr<T>& input,
                        const TensorPtr<T>& spatial_weight, const TensorPtr<T>& spatial_bias,
                        const TensorPtr<T>& temporal_weight, const TensorPtr<T>& temporal_bias,
                        Stride3 spatial_stride, Pad3 spatial_pad,
                        Stride3 temporal_stride, Pad3 temporal_pad) {
    if (spatial_weight->ndim() != 5 || spatial_weight->shape[2] != 1) {
        throw ShapeError("sep_conv3d: spatial weight must be [*,*,1,kH,kW]");
    }
    if (temporal_weight->ndim() != 5 || temporal_weight->shape[3] != 1 || temporal_weight->shape[4] != 1) {
        throw ShapeError("sep_conv3d: temporal weight must be [*,*,kT,1,1]");
    }
    auto mid = conv3d(tape, input, spatial_weight, spatial_bias, spatial_stride, spatial_pad);
    return conv3d(tape, mid, temporal_weight, temporal_bias, temporal_stride, temporal_pad);
}

// ---------------------------------------------------------------------------
// Pooling and resizing
// ---------------------------------------------------------------------------

template <class T>
TensorPtr<T> maxpool3d(Tape<T>* tape, const TensorPtr<T>& input, Size3 kernel, Stride3 stride) {
    if (input->ndim() != 4) throw ShapeError("maxpool3d: input must be [C,T,H,W]");
    const auto g = kernels::make_pool3d_geom(input->shape[0], input->shape[1], input->shape[2],
                                             input->shape[3], kernel.t, kernel.h, kernel.w,
                                             stride.t, stride.h, stride.w);
    auto out = zeros<T>({g.c, g.out_t, g.out_h, g.out_w});
    auto argmax = std::make_shared<std::vector<std::size_t>>(g.out_numel());
    kernels::maxpool3d_forward(g, input->data.data(), out->data.data(), argmax->data());

    auto rule = [g, input, out, argmax]() {
        if (!input->requires_grad) return;
        input->ensure_grad();
        kernels::maxpool3d_backward(g, argmax->data(), out->grad.data(), input->grad.data());
    };
    return finish(tape, "maxpool3d", {input}, out, rule);
}

template <class T>
TensorPtr<T> adaptive_maxpool1d(Tape<T>* tape, const TensorPtr<T>& input, std::size_t out_len) {
    if (input->ndim() != 2) throw ShapeError("adaptive_maxpool1d: input must be [C,L]");
    if (out_len == 0) throw ShapeError("adaptive_maxpool1d: out_len must be positive");
    const std::size_t c_n = input->shape[0], len = input->shape[1];
    if (len < out_len) throw ShapeError("adaptive_maxpool1d: input shorter than out_len");

    auto out = zeros<T>({c_n, out_len});
    auto argmax = std::make_shared<std::vector<std::size_t>>(c_n * out_len);
    for (std::size_t c = 0; c < c_n; ++c) {
        for (std::size_t b = 0; b < out_len; ++b) {
            const std::size_t lo = b * len / out_len;
            const std::size_t hi = (b + 1) * len / out_len;
            T best = -std::numeric_limits<T>::infinity();
            std::size_t best_idx = c * len + lo;
            for (std::size_t i = lo; i < hi; ++i) {
                if (input->data[c * len + i] > best) {
                    best = input->data[c * len + i];
                    best_idx = c * len + i;
                }
            }
            out->data[c * out_len + b] = best;
            (*argmax)[c * out_len + b] = best_idx;
        }
    }

    auto rule = [input, out, argmax]() {
        if (!input->requires_grad) return;
        input->ensure_grad();
        for (std::size_t o = 0; o < out->grad.size(); ++o) input->grad[(*argmax)[o]] += out->grad[o];
    };
    return finish(tape, "adaptive_maxpool1d", {input}, out, rule);
}

template <class T>
TensorPtr<T> trilinear_upsample(Tape<T>* tape, const TensorPtr<T>& input, Size3 out_size) {
    if (input->ndim() != 4) throw ShapeError("trilinear_upsample: input must be [C,T,H,W]");
    if (out_size.t == 0 || out_size.h == 0 || out_size.w == 0) {
        throw ShapeError("trilinear_upsample: output sizes must be >= 1");
    }
    kernels::Resize3dGeom g;
    g.c = input->shape[0];
    g.in_t = input->shape[1];
    g.in_h = input->shape[2];
    g.in_w = input->shape[3];
    g.out_t = out_size.t;
    g.out_h = out_size.h;
    g.out_w = out_size.w;

    auto out = zeros<T>({g.c, g.out_t, g.out_h, g.out_w});
    kernels::trilinear_forward(g, input->data.data(), out->data.data());

    auto rule = [g, input, out]() {
        if (!input->requires_grad) return;
        input->ensure_grad();
        kernels::trilinear_backward(g, out->grad.data(), input->grad.data());
    };
    return finish(tape, "trilinear_upsample", {input}, out, rule);
}

// ---------------------------------------------------------------------------
// Elementwise
// ---------------------------------------------------------------------------

template <class T>
TensorPtr<T> relu(Tape<T>* tape, const TensorPtr<T>& x) {
    auto out = zeros<T>(x->shape);
    for (std::size_t i = 0; i < x->numel(); ++i) out->data[i] = x->data[i] > T(0) ? x->data[i] : T(0);
    auto rule = [x, out]() {
        if (!x->requires_grad) return;
        x->ensure_grad();
        for (std::size_t i = 0; i < x->numel(); ++i) {
            if (x->data[i] > T(0)) x->grad[i] += out->grad[i];
        }
    };
    return finish(tape, "relu", {x}, out, rule);
}

template <class T>
TensorPtr<T> sigmoid(Tape<T>* tape, const TensorPtr<T>& x) {
    auto out = zeros<T>(x->shape);
    for (std::size_t i = 0; i < x->numel(); ++i) {
        const T v = x->data[i];
        if (v >= T(0)) {
            out->data[i] = T(1) / (T(1) + std::exp(-v));
        } else {
            const T e = std::exp(v);
            out->data[i] = e / (T(1) + e);
        }
    }
    auto rule = [x, out]() {
        if (!x->requires_grad) return;
        x->ensure_grad();
        for (std::size_t i = 0; i < x->numel(); ++i) {
            const T y = out->data[i];
            x->grad[i] += out->grad[i] * y * (T(1) - y);
        }
    };
    return finish(tape, "sigmoid", {x}, out, rule);
}

template <class T>
TensorPtr<T> add(Tape<T>* tape, const TensorPtr<T>& a, const TensorPtr<T>& b) {
    require_same_shape("add", *a, *b);
    auto out = zeros<T>(a->shape);
    for (std::size_t i = 0; i < a->numel(); ++i) out->data[i] = a->data[i] + b->data[i];
    auto rule = [a, b, out]() {
        if (a->requires_grad) {
            a->ensure_grad();
            for (std::size_t i = 0; i < a->numel(); ++i) a->grad[i] += out->grad[i];
        }
        if (b->requires_grad) {
            b->ensure_grad();
            for (std::size_t i = 0; i < b->numel(); ++i) b->grad[i] += out->grad[i];
        }
    };
    return finish(tape, "add", {a, b}, out, rule);
}

template <class T>
TensorPtr<T> mul(Tape<T>* tape, const TensorPtr<T>& a, const TensorPtr<T>& b) {
    require_same_shape("mul", *a, *b);
    auto out = zeros<T>(a->shape);
    for (std::size_t i = 0; i < a->numel(); ++i) out->data[i] = a->data[i] * b->data[i];
    auto rule = [a, b, out]() {
        if (a->requires_grad) {
            a->ensure_grad();
            for (std::size_t i = 0; i < a->numel(); ++i) a->grad[i] += out->grad[i] * b->data[i];
        }
        if (b->requires_grad) {
            b->ensure_grad();
            for (std::size_t i = 0; i < b->numel(); ++i) b->grad[i] += out->grad[i] * a->data[i];
        }
    };
    return finish(tape, "mul", {a, b}, out, rule);
}

template <class T>
TensorPtr<T> add_scalar(Tape<T>* tape, const TensorPtr<T>& a, T s) {
    auto out = zeros<T>(a->shape);
    for (std::size_t i = 0; i < a->numel(); ++i) out->data[i] = a->data[i] + s;
    auto rule = [a, out]() {
        if (!a->requires_grad) return;
        a->ensure_grad();
        for (std::size_t i = 0; i < a->numel(); ++i) a->grad[i] += out->grad[i];
    };
    return finish(tape, "add_scalar", {a}, out, rule);
}

template <class T>
TensorPtr<T> mul_scalar(Tape<T>* tape, const TensorPtr<T>& a, T s) {
    auto out = zeros<T>(a->shape);
    for (std::size_t i = 0; i < a->numel(); ++i) out->data[i] = a->data[i] * s;
    auto rule = [a, out, s]() {
        if (!a->requires_grad) return;
        a->ensure_grad();
        for (std::size_t i = 0; i < a->numel(); ++i) a->grad[i] += out->grad[i] * s;
    };
    return finish(tape, "mul_scalar", {a}, out, rule);
}

// ---------------------------------------------------------------------------
// Linear algebra and structure
// ---------------------------------------------------------------------------

template <class T>
TensorPtr<T> matmul(Tape<T>* tape, const TensorPtr<T>& a, const TensorPtr<T>& b) {
    if (a->ndim() != 2 || b->ndim() != 2) throw ShapeError("matmul: operands must be 2-D");
    if (a->shape[1] != b->shape[0]) {
        throw ShapeError("matmul: inner dimensions " + std::to_string(a->shape[1]) + " vs " +
                         std::to_string(b->shape[0]));
    }
    const std::size_t m = a->shape[0], k = a->shape[1], n = b->shape[1];
    auto out = zeros<T>({m, n});
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            T acc = T(0);
            for (std::size_t p = 0; p < k; ++p) acc += a->data[i * k + p] * b->data[p * n + j];
            out->data[i * n + j] = acc;
        }
    }
    auto rule = [a, b, out, m, k, n]() {
        if (a->requires_grad) {
            a->ensure_grad();
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t p = 0; p < k; ++p) {
                    T acc = T(0);
                    for (std::size_t j = 0; j < n; ++j) acc += out->grad[i * n + j] * b->data[p * n + j];
                    a->grad[i * k + p] += acc;
                }
        }
        if (b->requires_grad) {
            b->ensure_grad();
            for (std::size_t p = 0; p < k; ++p)
                for (std::size_t j = 0; j < n; ++j) {
                    T acc = T(0);
                    for (std::size_t i = 0; i < m; ++i) acc += a->data[i * k + p] * out->grad[i * n + j];
                    b->grad[p * n + j] += acc;
                }
        }
    };
    return finish(tape, "matmul", {a, b}, out, rule);
}

template <class T>
TensorPtr<T> concat(Tape<T>* tape, const std::vector<TensorPtr<T>>& parts, std::size_t axis) {
    if (parts.empty()) throw ShapeError("concat: no operands");
    const Shape& base = parts[0]->shape;
    if (axis >= base.size()) throw ShapeError("concat: axis out of range");
    std::size_t total = 0;
    for (const auto& p : parts) {
        if (p->ndim() != base.size()) throw ShapeError("concat: rank mismatch");
        for (std::size_t i = 0; i < base.size(); ++i) {
            if (i != axis && p->shape[i] != base[i]) {
                throw ShapeError("concat: non-concatenated axes must agree, got " +
                                 shape_to_string(p->shape) + " vs " + shape_to_string(base));
            }
        }
        total += p->shape[axis];
    }
    Shape out_shape = base;
    out_shape[axis] = total;

    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < axis; ++i) outer *= base[i];
    for (std::size_t i = axis + 1; i < base.size(); ++i) inner *= base[i];

    auto out = zeros<T>(out_shape);
    std::size_t offset = 0;
    for (const auto& p : parts) {
        const std::size_t extent = p->shape[axis];
        for (std::size_t o = 0; o < outer; ++o) {
            std::copy(p->data.begin() + o * extent * inner, p->data.begin() + (o + 1) * extent * inner,
                      out->data.begin() + (o * total + offset) * inner);
        }
        offset += extent;
    }

    auto rule = [parts, out, outer, inner, total, axis]() {
        std::size_t offset = 0;
        for (const auto& p : parts) {
            const std::size_t extent = p->shape[axis];
            if (p->requires_grad) {
                p->ensure_grad();
                for (std::size_t o = 0; o < outer; ++o) {
                    const T* src = out->grad.data() + (o * total + offset) * inner;
                    T* dst = p->grad.data() + o * extent * inner;
                    for (std::size_t i = 0; i < extent * inner; ++i) dst[i] += src[i];
                }
            }
            offset += extent;
        }
    };
    return finish(tape, "concat", parts, out, rule);
}

template <class T>
TensorPtr<T> slice(Tape<T>* tape, const TensorPtr<T>& x, std::size_t axis, std::size_t start,
                   std::size_t len) {
    if (axis >= x->ndim()) throw ShapeError("slice: axis out of range");
    if (len == 0 || start + len > x->shape[axis]) {
        throw ShapeError("slice: range [" + std::to_string(start) + "," +
                         std::to_string(start + len) + ") exceeds axis extent " +
                         std::to_string(x->shape[axis]));
    }
    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < axis; ++i) outer *= x->shape[i];
    for (std::size_t i = axis + 1; i < x->ndim(); ++i) inner *= x->shape[i];
    const std::size_t extent = x->shape[axis];

    Shape out_shape = x->shape;
    out_shape[axis] = len;
    auto out = zeros<T>(out_shape);
    for (std::size_t o = 0; o < outer; ++o) {
        std::copy(x->data.begin() + (o * extent + start) * inner,
                  x->data.begin() + (o * extent + start + len) * inner,
                  out->data.begin() + o * len * inner);
    }
    auto rule = [x, out, outer, inner, extent, start, len]() {
        if (!x->requires_grad) return;
        x->ensure_grad();
        for (std::size_t o = 0; o < outer; ++o) {
            const T* src = out->grad.data() + o * len * inner;
            T* dst = x->grad.data() + (o * extent + start) * inner;
            for (std::size_t i = 0; i < len * inner; ++i) dst[i] += src[i];
        }
    };
    return finish(tape, "slice", {x}, out, rule);
}

template <class T>
TensorPtr<T> reshape(Tape<T>* tape, const TensorPtr<T>& x, Shape new_shape) {
    if (shape_numel(new_shape) != x->numel()) {
        throw ShapeError("reshape: element count mismatch " + shape_to_string(x->shape) + " -> " +
                         shape_to_string(new_shape));
    }
    auto out = make_tensor<T>(std::move(new_shape), x->data);
    auto rule = [x, out]() {
        if (!x->requires_grad) return;
        x->ensure_grad();
        for (std::size_t i = 0; i < x->numel(); ++i) x->grad[i] += out->grad[i];
    };
    return finish(tape, "reshape", {x}, out, rule);
}

namespace {

// Flat index of a broadcast source element for the given output flat index.
inline std::size_t broadcast_src_index(std::size_t out_flat, const Shape& out_shape,
                                       const Shape& in_padded,
                                       const std::vector<std::size_t>& in_strides) {
    std::size_t src = 0;
    for (std::size_t ax = out_shape.size(); ax-- > 0;) {
        const std::size_t coord = out_flat % out_shape[ax];
        out_flat /= out_shape[ax];
        src += (coord % in_padded[ax]) * in_strides[ax];
    }
    return src;
}

}  // namespace

template <class T>
TensorPtr<T> broadcast_to(Tape<T>* tape, const TensorPtr<T>& x, Shape target) {
    if (target.size() < x->ndim()) throw ShapeError("broadcast_to: target rank too small");
    Shape padded(target.size(), 1);
    std::copy(x->shape.begin(), x->shape.end(), padded.begin() + (target.size() - x->ndim()));
    for (std::size_t i = 0; i < target.size(); ++i) {
        if (padded[i] != target[i] && padded[i] != 1) {
            throw ShapeError("broadcast_to: cannot broadcast " + shape_to_string(x->shape) + " to " +
                             shape_to_string(target));
        }
    }
    std::vector<std::size_t> in_strides(target.size(), 0);
    {
        std::size_t s = 1;
        for (std::size_t i = target.size(); i-- > 0;) {
            in_strides[i] = s;
            s *= padded[i];
        }
    }

    auto out = zeros<T>(target);
    const Shape out_shape = out->shape;
    for (std::size_t o = 0; o < out->numel(); ++o) {
        out->data[o] = x->data[broadcast_src_index(o, out_shape, padded, in_strides)];
    }
    auto rule = [x, out, out_shape, padded, in_strides]() {
        if (!x->requires_grad) return;
        x->ensure_grad();
        for (std::size_t o = 0; o < out->numel(); ++o) {
            x->grad[broadcast_src_index(o, out_shape, padded, in_strides)] += out->grad[o];
        }
    };
    return finish(tape, "broadcast_to", {x}, out, rule);
}

// ---------------------------------------------------------------------------
// Reductions
// ---------------------------------------------------------------------------

namespace {

// Maps an input flat index to the keepdim-reduced output flat index.
inline std::size_t reduce_dst_index(std::size_t in_flat, const Shape& in_shape,
                                    const std::vector<bool>& reduced,
                                    const std::vector<std::size_t>& out_strides) {
    std::size_t dst = 0;
    for (std::size_t ax = in_shape.size(); ax-- > 0;) {
        const std::size_t coord = in_flat % in_shape[ax];
        in_flat /= in_shape[ax];
        if (!reduced[ax]) dst += coord * out_strides[ax];
    }
    return dst;
}

}  // namespace

template <class T>
TensorPtr<T> sum_axes(Tape<T>* tape, const TensorPtr<T>& x, const std::vector<std::size_t>& axes,
                      bool keepdims) {
    std::vector<bool> reduced(x->ndim(), false);
    for (std::size_t a : axes) {
        if (a >= x->ndim()) throw ShapeError("sum_axes: axis out of range");
        reduced[a] = true;
    }
    Shape keep_shape = x->shape;
    for (std::size_t i = 0; i < keep_shape.size(); ++i) {
        if (reduced[i]) keep_shape[i] = 1;
    }
    std::vector<std::size_t> out_strides(x->ndim(), 0);
    {
        std::size_t s = 1;
        for (std::size_t i = x->ndim(); i-- > 0;) {
            out_strides[i] = s;
            s *= keep_shape[i];
        }
    }

    auto out = zeros<T>(keep_shape);
    const Shape in_shape = x->shape;
    for (std::size_t i = 0; i < x->numel(); ++i) {
        out->data[reduce_dst_index(i, in_shape, reduced, out_strides)] += x->data[i];
    }
    auto rule = [x, out, in_shape, reduced, out_strides]() {
        if (!x->requires_grad) return;
        x->ensure_grad();
        for (std::size_t i = 0; i < x->numel(); ++i) {
            x->grad[i] += out->grad[reduce_dst_index(i, in_shape, reduced, out_strides)];
        }
    };
    auto kept = finish(tape, "sum_axes", {x}, out, rule);
    if (keepdims) return kept;
    Shape squeezed;
    for (std::size_t i = 0; i < x->ndim(); ++i) {
        if (!reduced[i]) squeezed.push_back(x->shape[i]);
    }
    if (squeezed.empty()) squeezed.push_back(1);
    return reshape(tape, kept, squeezed);
}

template <class T>
TensorPtr<T> mean_axes(Tape<T>* tape, const TensorPtr<T>& x, const std::vector<std::size_t>& axes,
                       bool keepdims) {
    std::size_t count = 1;
    for (std::size_t a : axes) {
        if (a >= x->ndim()) throw ShapeError("mean_axes: axis out of range");
        count *= x->shape[a];
    }
    auto s = sum_axes(tape, x, axes, keepdims);
    return mul_scalar(tape, s, T(1) / static_cast<T>(count));
}

template <class T>
TensorPtr<T> sum(Tape<T>* tape, const TensorPtr<T>& x) {
    std::vector<std::size_t> axes(x->ndim());
    std::iota(axes.begin(), axes.end(), std::size_t{0});
    return sum_axes(tape, x, axes, /*keepdims=*/false);
}

template <class T>
TensorPtr<T> mean(Tape<T>* tape, const TensorPtr<T>& x) {
    return mul_scalar(tape, sum(tape, x), T(1) / static_cast<T>(x->numel()));
}

// ---------------------------------------------------------------------------
// Distributions and losses
// ---------------------------------------------------------------------------

template <class T>
TensorPtr<T> normalize_to_distribution(Tape<T>* tape, const TensorPtr<T>& x) {
    T total = T(0);
    for (std::size_t i = 0; i < x->numel(); ++i) {
        if (x->data[i] < T(0)) {
            throw ValueError("normalize_to_distribution: negative entry at flat index " + std::to_string(i));
        }
        total += x->data[i];
    }
    if (!(total > T(0))) throw ValueError("normalize_to_distribution: input sums to zero");

    auto out = zeros<T>(x->shape);
    const T inv = T(1) / total;
    for (std::size_t i = 0; i < x->numel(); ++i) out->data[i] = x->data[i] * inv;

    // d y_j / d x_i = (delta_ij - y_j) / S, so grad_x = (g - <g,y>) / S.
    auto rule = [x, out, inv]() {
        if (!x->requires_grad) return;
        x->ensure_grad();
        T dot = T(0);
        for (std::size_t i = 0; i < x->numel(); ++i) dot += out->grad[i] * out->data[i];
        for (std::size_t i = 0; i < x->numel(); ++i) x->grad[i] += (out->grad[i] - dot) * inv;
    };
    return finish(tape, "normalize_to_distribution", {x}, out, rule);
}

template <class T>
TensorPtr<T> kldiv(Tape<T>* tape, const TensorPtr<T>& P, const TensorPtr<T>& Q, T epsilon) {
    require_same_shape("kldiv", *P, *Q);
    if (!(epsilon > T(0))) throw ValueError("kldiv: epsilon must be positive");
    auto check_normalized = [](const Tensor<T>& t, const char* which) {
        T s = T(0);
        for (T v : t.data) s += v;
        if (std::abs(static_cast<double>(s) - 1.0) > 1e-4) {
            throw ValueError(std::string("kldiv: ") + which + " is not normalized (sum = " +
                             std::to_string(static_cast<double>(s)) + ")");
        }
    };
    check_normalized(*P, "P");
    check_normalized(*Q, "Q");

    T value = T(0);
    for (std::size_t i = 0; i < P->numel(); ++i) {
        value += Q->data[i] * std::log(epsilon + Q->data[i] / (P->data[i] + epsilon));
    }
    auto out = make_tensor<T>({1}, {value});

    auto rule = [P, Q, out, epsilon]() {
        const T g = out->grad[0];
        if (P->requires_grad) {
            P->ensure_grad();
            for (std::size_t i = 0; i < P->numel(); ++i) {
                const T pe = P->data[i] + epsilon;
                const T ratio = Q->data[i] / pe;
                P->grad[i] += g * Q->data[i] / (epsilon + ratio) * (-ratio / pe);
            }
        }
        if (Q->requires_grad) {
            Q->ensure_grad();
            for (std::size_t i = 0; i < Q->numel(); ++i) {
                const T pe = P->data[i] + epsilon;
                const T inner = epsilon + Q->data[i] / pe;
                Q->grad[i] += g * (std::log(inner) + Q->data[i] / (inner * pe));
            }
        }
    };
    return finish(tape, "kldiv", {P, Q}, out, rule);
}

template <class T>
TensorPtr<T> bilinear_form(Tape<T>* tape, const TensorPtr<T>& x1, const TensorPtr<T>& A,
                           const TensorPtr<T>& x2, const TensorPtr<T>& b) {
    if (x1->ndim() != 2 || x2->ndim() != 2) throw ShapeError("bilinear_form: x1, x2 must be [C,*]");
    if (A->ndim() != 3) throw ShapeError("bilinear_form: A must be [x0,x,y0]");
    if (b->ndim() != 1) throw ShapeError("bilinear_form: b must be [x]");
    const std::size_t c_n = x1->shape[0], x0 = x1->shape[1], y0 = x2->shape[1];
    const std::size_t xk = A->shape[1];
    if (x2->shape[0] != c_n) throw ShapeError("bilinear_form: channel mismatch between x1 and x2");
    if (A->shape[0] != x0 || A->shape[2] != y0) {
        throw ShapeError("bilinear_form: A shape " + shape_to_string(A->shape) +
                         " incompatible with x0=" + std::to_string(x0) + ", y0=" + std::to_string(y0));
    }
    if (b->shape[0] != xk) throw ShapeError("bilinear_form: b length must equal A's middle axis");

    auto at_A = [A, xk, y0](std::size_t i, std::size_t k, std::size_t j) {
        return A->data[(i * xk + k) * y0 + j];
    };
    auto out = zeros<T>({c_n, xk});
    for (std::size_t c = 0; c < c_n; ++c) {
        for (std::size_t k = 0; k < xk; ++k) {
            T acc = b->data[k];
            for (std::size_t i = 0; i < x0; ++i) {
                for (std::size_t j = 0; j < y0; ++j) {
                    acc += x1->data[c * x0 + i] * at_A(i, k, j) * x2->data[c * y0 + j];
                }
            }
            out->data[c * xk + k] = acc;
        }
    }

    auto rule = [x1, A, x2, b, out, c_n, x0, y0, xk, at_A]() {
        if (x1->requires_grad) {
            x1->ensure_grad();
            for (std::size_t c = 0; c < c_n; ++c)
                for (std::size_t i = 0; i < x0; ++i) {
                    T acc = T(0);
                    for (std::size_t k = 0; k < xk; ++k)
                        for (std::size_t j = 0; j < y0; ++j)
                            acc += out->grad[c * xk + k] * at_A(i, k, j) * x2->data[c * y0 + j];
                    x1->grad[c * x0 + i] += acc;
                }
        }
        if (x2->requires_grad) {
            x2->ensure_grad();
            for (std::size_t c = 0; c < c_n; ++c)
                for (std::size_t j = 0; j < y0; ++j) {
                    T acc = T(0);
                    for (std::size_t k = 0; k < xk; ++k)
                        for (std::size_t i = 0; i < x0; ++i)
                            acc += out->grad[c * xk + k] * x1->data[c * x0 + i] * at_A(i, k, j);
                    x2->grad[c * y0 + j] += acc;
                }
        }
        if (A->requires_grad) {
            A->ensure_grad();
            for (std::size_t i = 0; i < x0; ++i)
                for (std::size_t k = 0; k < xk; ++k)
                    for (std::size_t j = 0; j < y0; ++j) {
                        T acc = T(0);
                        for (std::size_t c = 0; c < c_n; ++c)
                            acc += out->grad[c * xk + k] * x1->data[c * x0 + i] * x2->data[c * y0 + j];
                        A->grad[(i * xk + k) * y0 + j] += acc;
                    }
        }
        if (b->requires_grad) {
            b->ensure_grad();
            for (std::size_t k = 0; k < xk; ++k) {
                T acc = T(0);
                for (std::size_t c = 0; c < c_n; ++c) acc += out->grad[c * xk + k];
                b->grad[k] += acc;
            }
        }
    };
    return finish(tape, "bilinear_form", {x1, A, x2, b}, out, rule);
}

// ---------------------------------------------------------------------------
// Explicit instantiations
// ---------------------------------------------------------------------------

#define VSAL_INSTANTIATE_OPS(T)                                                                         \
    template TensorPtr<T> conv3d<T>(Tape<T>*, const TensorPtr<T>&, const TensorPtr<T>&,                \
                                    const TensorPtr<T>&, Stride3, Pad3);                                \
    template TensorPtr<T> conv_transpose3d<T>(Tape<T>*, const TensorPtr<T>&, const TensorPtr<T>&,      \
                                              const TensorPtr<T>&, Stride3, Pad3);                     \
    template TensorPtr<T> conv1d<T>(Tape<T>*, const TensorPtr<T>&, const TensorPtr<T>&,                \
                                    const TensorPtr<T>&, std::size_t, std::size_t);                    \
    template TensorPtr<T> sep_conv3d<T>(Tape<T>*, const TensorPtr<T>&, const TensorPtr<T>&,            \
                                        const TensorPtr<T>&, const TensorPtr<T>&, const TensorPtr<T>&, \
                                        Stride3, Pad3, Stride3, Pad3);                                  \
    template TensorPtr<T> maxpool3d<T>(Tape<T>*, const TensorPtr<T>&, Size3, Stride3);                 \
    template TensorPtr<T> adaptive_maxpool1d<T>(Tape<T>*, const TensorPtr<T>&, std::size_t);           \
    template TensorPtr<T> trilinear_upsample<T>(Tape<T>*, const TensorPtr<T>&, Size3);                 \
    template TensorPtr<T> relu<T>(Tape<T>*, const TensorPtr<T>&);                                      \
    template TensorPtr<T> sigmoid<T>(Tape<T>*, const TensorPtr<T>&);                                   \
    template TensorPtr<T> add<T>(Tape<T>*, const TensorPtr<T>&, const TensorPtr<T>&);                  \
    template TensorPtr<T> mul<T>(Tape<T>*, const TensorPtr<T>&, const TensorPtr<T>&);                  \
    template TensorPtr<T> add_scalar<T>(Tape<T>*, const TensorPtr<T>&, T);                             \
    template TensorPtr<T> mul_scalar<T>(Tape<T>*, const TensorPtr<T>&, T);                             \
    template TensorPtr<T> matmul<T>(Tape<T>*, const TensorPtr<T>&, const TensorPtr<T>&);               \
    template TensorPtr<T> concat<T>(Tape<T>*, const std::vector<TensorPtr<T>>&, std::size_t);          \
    template TensorPtr<T> slice<T>(Tape<T>*, const TensorPtr<T>&, std::size_t, std::size_t,            \
                                   std::size_t);                                                       \
    template TensorPtr<T> reshape<T>(Tape<T>*, const TensorPtr<T>&, Shape);                            \
    template TensorPtr<T> broadcast_to<T>(Tape<T>*, const TensorPtr<T>&, Shape);                       \
    template TensorPtr<T> sum<T>(Tape<T>*, const TensorPtr<T>&);                                       \
    template TensorPtr<T> mean<T>(Tape<T>*, const TensorPtr<T>&);                                      \
    template TensorPtr<T> sum_axes<T>(Tape<T>*, const TensorPtr<T>&, const std::vector<std::size_t>&,  \
                                      bool);                                                           \
    template TensorPtr<T> mean_axes<T>(Tape<T>*, const TensorPtr<T>&, const std::vector<std::size_t>&, \
                                       bool);                                                          \
    template TensorPtr<T> normalize_to_distribution<T>(Tape<T>*, const TensorPtr<T>&);                 \
    template TensorPtr<T> kldiv<T>(Tape<T>*, const TensorPtr<T>&, const TensorPtr<T>&, T);             \
    template TensorPtr<T> bilinear_form<T>(Tape<T>*, const TensorPtr<T>&, const TensorPtr<T>&,         \
                                           const TensorPtr<T>&, const TensorPtr<T>&);

VSAL_INSTANTIATE_OPS(float)
VSAL_INSTANTIATE_OPS(double)

#undef VSAL_INSTANTIATE_OPS

}  // namespace vsal::ops
