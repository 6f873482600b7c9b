#pragma once

// Per-element kernel bodies shared by the serial and OpenMP backends. Each
// computes exactly one output (or gradient) element with a fixed inner
// summation order, which is what makes the two backends bit-identical: the
// backend only decides which thread evaluates which element.

#include <cstddef>
#include <limits>

#include "vsal/kernels.hpp"

namespace vsal::kernels::cell {

using std::ptrdiff_t;
using std::size_t;

template <class T>
inline T conv3d_out(const Conv3dGeom& g, const T* in, const T* w, const T* bias,
                    size_t co, size_t ot, size_t oh, size_t ow) {
    T acc = bias ? bias[co] : T(0);
    const ptrdiff_t t0 = static_cast<ptrdiff_t>(ot * g.s_t) - static_cast<ptrdiff_t>(g.p_t);
    const ptrdiff_t h0 = static_cast<ptrdiff_t>(oh * g.s_h) - static_cast<ptrdiff_t>(g.p_h);
    const ptrdiff_t w0 = static_cast<ptrdiff_t>(ow * g.s_w) - static_cast<ptrdiff_t>(g.p_w);
    for (size_t ci = 0; ci < g.c_in; ++ci) {
        const T* in_c = in + ci * g.in_t * g.in_h * g.in_w;
        const T* w_c = w + (co * g.c_in + ci) * g.k_t * g.k_h * g.k_w;
        for (size_t kt = 0; kt < g.k_t; ++kt) {
            const ptrdiff_t it = t0 + static_cast<ptrdiff_t>(kt);
            if (it < 0 || it >= static_cast<ptrdiff_t>(g.in_t)) continue;
            for (size_t kh = 0; kh < g.k_h; ++kh) {
                const ptrdiff_t ih = h0 + static_cast<ptrdiff_t>(kh);
                if (ih < 0 || ih >= static_cast<ptrdiff_t>(g.in_h)) continue;
                for (size_t kw = 0; kw < g.k_w; ++kw) {
                    const ptrdiff_t iw = w0 + static_cast<ptrdiff_t>(kw);
                    if (iw < 0 || iw >= static_cast<ptrdiff_t>(g.in_w)) continue;
                    acc += in_c[(it * static_cast<ptrdiff_t>(g.in_h) + ih) * static_cast<ptrdiff_t>(g.in_w) + iw] *
                           w_c[(kt * g.k_h + kh) * g.k_w + kw];
                }
            }
        }
    }
    return acc;
}

// Unit-stride gather avoids the divisibility checks of the general case.
template <class T>
inline T conv3d_grad_in_unit_stride(const Conv3dGeom& g, const T* grad_out, const T* w,
                                    size_t ci, size_t it, size_t ih, size_t iw) {
    T acc = T(0);
    for (size_t co = 0; co < g.c_out; ++co) {
        const T* go_c = grad_out + co * g.out_t * g.out_h * g.out_w;
        const T* w_c = w + (co * g.c_in + ci) * g.k_t * g.k_h * g.k_w;
        for (size_t kt = 0; kt < g.k_t; ++kt) {
            const ptrdiff_t ot = static_cast<ptrdiff_t>(it + g.p_t) - static_cast<ptrdiff_t>(kt);
            if (ot < 0 || ot >= static_cast<ptrdiff_t>(g.out_t)) continue;
            for (size_t kh = 0; kh < g.k_h; ++kh) {
                const ptrdiff_t oh = static_cast<ptrdiff_t>(ih + g.p_h) - static_cast<ptrdiff_t>(kh);
                if (oh < 0 || oh >= static_cast<ptrdiff_t>(g.out_h)) continue;
                for (size_t kw = 0; kw < g.k_w; ++kw) {
                    const ptrdiff_t ow = static_cast<ptrdiff_t>(iw + g.p_w) - static_cast<ptrdiff_t>(kw);
                    if (ow < 0 || ow >= static_cast<ptrdiff_t>(g.out_w)) continue;
                    acc += go_c[(ot * static_cast<ptrdiff_t>(g.out_h) + oh) * static_cast<ptrdiff_t>(g.out_w) + ow] *
                           w_c[(kt * g.k_h + kh) * g.k_w + kw];
                }
            }
        }
    }
    return acc;
}

template <class T>
inline T conv3d_grad_in(const Conv3dGeom& g, const T* grad_out, const T* w,
                        size_t ci, size_t it, size_t ih, size_t iw) {
    if (g.s_t == 1 && g.s_h == 1 && g.s_w == 1) {
        return conv3d_grad_in_unit_stride(g, grad_out, w, ci, it, ih, iw);
    }
    T acc = T(0);
    for (size_t co = 0; co < g.c_out; ++co) {
        const T* go_c = grad_out + co * g.out_t * g.out_h * g.out_w;
        const T* w_c = w + (co * g.c_in + ci) * g.k_t * g.k_h * g.k_w;
        for (size_t kt = 0; kt < g.k_t; ++kt) {
            const ptrdiff_t qt = static_cast<ptrdiff_t>(it + g.p_t) - static_cast<ptrdiff_t>(kt);
            if (qt < 0 || qt % static_cast<ptrdiff_t>(g.s_t) != 0) continue;
            const size_t ot = static_cast<size_t>(qt) / g.s_t;
            if (ot >= g.out_t) continue;
            for (size_t kh = 0; kh < g.k_h; ++kh) {
                const ptrdiff_t qh = static_cast<ptrdiff_t>(ih + g.p_h) - static_cast<ptrdiff_t>(kh);
                if (qh < 0 || qh % static_cast<ptrdiff_t>(g.s_h) != 0) continue;
                const size_t oh = static_cast<size_t>(qh) / g.s_h;
                if (oh >= g.out_h) continue;
                for (size_t kw = 0; kw < g.k_w; ++kw) {
                    const ptrdiff_t qw = static_cast<ptrdiff_t>(iw + g.p_w) - static_cast<ptrdiff_t>(kw);
                    if (qw < 0 || qw % static_cast<ptrdiff_t>(g.s_w) != 0) continue;
                    const size_t ow = static_cast<size_t>(qw) / g.s_w;
                    if (ow >= g.out_w) continue;
                    acc += go_c[(ot * g.out_h + oh) * g.out_w + ow] * w_c[(kt * g.k_h + kh) * g.k_w + kw];
                }
            }
        }
    }
    return acc;
}

template <class T>
inline T conv3d_grad_w(const Conv3dGeom& g, const T* in, const T* grad_out,
                       size_t co, size_t ci, size_t kt, size_t kh, size_t kw) {
    T acc = T(0);
    const T* in_c = in + ci * g.in_t * g.in_h * g.in_w;
    const T* go_c = grad_out + co * g.out_t * g.out_h * g.out_w;
    for (size_t ot = 0; ot < g.out_t; ++ot) {
        const ptrdiff_t it = static_cast<ptrdiff_t>(ot * g.s_t + kt) - static_cast<ptrdiff_t>(g.p_t);
        if (it < 0 || it >= static_cast<ptrdiff_t>(g.in_t)) continue;
        for (size_t oh = 0; oh < g.out_h; ++oh) {
            const ptrdiff_t ih = static_cast<ptrdiff_t>(oh * g.s_h + kh) - static_cast<ptrdiff_t>(g.p_h);
            if (ih < 0 || ih >= static_cast<ptrdiff_t>(g.in_h)) continue;
            for (size_t ow = 0; ow < g.out_w; ++ow) {
                const ptrdiff_t iw = static_cast<ptrdiff_t>(ow * g.s_w + kw) - static_cast<ptrdiff_t>(g.p_w);
                if (iw < 0 || iw >= static_cast<ptrdiff_t>(g.in_w)) continue;
                acc += go_c[(ot * g.out_h + oh) * g.out_w + ow] *
                       in_c[(it * static_cast<ptrdiff_t>(g.in_h) + ih) * static_cast<ptrdiff_t>(g.in_w) + iw];
            }
        }
    }
    return acc;
}

template <class T>
inline T convt3d_out(const ConvT3dGeom& g, const T* in, const T* w, const T* bias,
                     size_t co, size_t ot, size_t oh, size_t ow) {
    T acc = bias ? bias[co] : T(0);
    for (size_t ci = 0; ci < g.c_in; ++ci) {
        const T* in_c = in + ci * g.in_t * g.in_h * g.in_w;
        const T* w_c = w + (ci * g.c_out + co) * g.k_t * g.k_h * g.k_w;
        for (size_t kt = 0; kt < g.k_t; ++kt) {
            const ptrdiff_t qt = static_cast<ptrdiff_t>(ot + g.p_t) - static_cast<ptrdiff_t>(kt);
            if (qt < 0 || qt % static_cast<ptrdiff_t>(g.s_t) != 0) continue;
            const size_t it = static_cast<size_t>(qt) / g.s_t;
            if (it >= g.in_t) continue;
            for (size_t kh = 0; kh < g.k_h; ++kh) {
                const ptrdiff_t qh = static_cast<ptrdiff_t>(oh + g.p_h) - static_cast<ptrdiff_t>(kh);
                if (qh < 0 || qh % static_cast<ptrdiff_t>(g.s_h) != 0) continue;
                const size_t ih = static_cast<size_t>(qh) / g.s_h;
                if (ih >= g.in_h) continue;
                for (size_t kw = 0; kw < g.k_w; ++kw) {
                    const ptrdiff_t qw = static_cast<ptrdiff_t>(ow + g.p_w) - static_cast<ptrdiff_t>(kw);
                    if (qw < 0 || qw % static_cast<ptrdiff_t>(g.s_w) != 0) continue;
                    const size_t iw = static_cast<size_t>(qw) / g.s_w;
                    if (iw >= g.in_w) continue;
                    acc += in_c[(it * g.in_h + ih) * g.in_w + iw] * w_c[(kt * g.k_h + kh) * g.k_w + kw];
                }
            }
        }
    }
    return acc;
}

template <class T>
inline T convt3d_grad_in(const ConvT3dGeom& g, const T* grad_out, const T* w,
                         size_t ci, size_t it, size_t ih, size_t iw) {
    T acc = T(0);
    for (size_t co = 0; co < g.c_out; ++co) {
        const T* go_c = grad_out + co * g.out_t * g.out_h * g.out_w;
        const T* w_c = w + (ci * g.c_out + co) * g.k_t * g.k_h * g.k_w;
        for (size_t kt = 0; kt < g.k_t; ++kt) {
            const ptrdiff_t ot = static_cast<ptrdiff_t>(it * g.s_t + kt) - static_cast<ptrdiff_t>(g.p_t);
            if (ot < 0 || ot >= static_cast<ptrdiff_t>(g.out_t)) continue;
            for (size_t kh = 0; kh < g.k_h; ++kh) {
                const ptrdiff_t oh = static_cast<ptrdiff_t>(ih * g.s_h + kh) - static_cast<ptrdiff_t>(g.p_h);
                if (oh < 0 || oh >= static_cast<ptrdiff_t>(g.out_h)) continue;
                for (size_t kw = 0; kw < g.k_w; ++kw) {
                    const ptrdiff_t ow = static_cast<ptrdiff_t>(iw * g.s_w + kw) - static_cast<ptrdiff_t>(g.p_w);
                    if (ow < 0 || ow >= static_cast<ptrdiff_t>(g.out_w)) continue;
                    acc += go_c[(ot * static_cast<ptrdiff_t>(g.out_h) + oh) * static_cast<ptrdiff_t>(g.out_w) + ow] *
                           w_c[(kt * g.k_h + kh) * g.k_w + kw];
                }
            }
        }
    }
    return acc;
}

template <class T>
inline T convt3d_grad_w(const ConvT3dGeom& g, const T* in, const T* grad_out,
                        size_t ci, size_t co, size_t kt, size_t kh, size_t kw) {
    T acc = T(0);
    const T* in_c = in + ci * g.in_t * g.in_h * g.in_w;
    const T* go_c = grad_out + co * g.out_t * g.out_h * g.out_w;
    for (size_t it = 0; it < g.in_t; ++it) {
        const ptrdiff_t ot = static_cast<ptrdiff_t>(it * g.s_t + kt) - static_cast<ptrdiff_t>(g.p_t);
        if (ot < 0 || ot >= static_cast<ptrdiff_t>(g.out_t)) continue;
        for (size_t ih = 0; ih < g.in_h; ++ih) {
            const ptrdiff_t oh = static_cast<ptrdiff_t>(ih * g.s_h + kh) - static_cast<ptrdiff_t>(g.p_h);
            if (oh < 0 || oh >= static_cast<ptrdiff_t>(g.out_h)) continue;
            for (size_t iw = 0; iw < g.in_w; ++iw) {
                const ptrdiff_t ow = static_cast<ptrdiff_t>(iw * g.s_w + kw) - static_cast<ptrdiff_t>(g.p_w);
                if (ow < 0 || ow >= static_cast<ptrdiff_t>(g.out_w)) continue;
                acc += in_c[(it * g.in_h + ih) * g.in_w + iw] *
                       go_c[(ot * static_cast<ptrdiff_t>(g.out_h) + oh) * static_cast<ptrdiff_t>(g.out_w) + ow];
            }
        }
    }
    return acc;
}

// Max over one pooling window; ties keep the lowest flat input index because
// the scan order is ascending and the comparison is strict.
template <class T>
inline T maxpool3d_out(const Pool3dGeom& g, const T* in, size_t c, size_t ot, size_t oh, size_t ow,
                       size_t* argmax_flat) {
    const size_t t0 = ot * g.s_t, h0 = oh * g.s_h, w0 = ow * g.s_w;
    T best = -std::numeric_limits<T>::infinity();
    size_t best_idx = 0;
    const T* in_c = in + c * g.in_t * g.in_h * g.in_w;
    for (size_t kt = 0; kt < g.k_t; ++kt) {
        for (size_t kh = 0; kh < g.k_h; ++kh) {
            for (size_t kw = 0; kw < g.k_w; ++kw) {
                const size_t idx = ((t0 + kt) * g.in_h + (h0 + kh)) * g.in_w + (w0 + kw);
                if (in_c[idx] > best) {
                    best = in_c[idx];
                    best_idx = c * g.in_t * g.in_h * g.in_w + idx;
                }
            }
        }
    }
    *argmax_flat = best_idx;
    return best;
}

// Half-pixel source mapping for one axis: returns lower index, upper index and
// the lower weight (upper weight is 1 - w_lo). Weights are computed in double
// for both precisions.
struct AxisInterp {
    size_t lo = 0, hi = 0;
    double w_lo = 1.0;
};

inline AxisInterp axis_interp(size_t dst, size_t in_size, size_t out_size) {
    AxisInterp r;
    const double src = (static_cast<double>(dst) + 0.5) * (static_cast<double>(in_size) / static_cast<double>(out_size)) - 0.5;
    const double clamped = src < 0.0 ? 0.0 : (src > static_cast<double>(in_size - 1) ? static_cast<double>(in_size - 1) : src);
    r.lo = static_cast<size_t>(clamped);
    if (r.lo >= in_size - 1) {
        r.lo = in_size - 1;
        r.hi = r.lo;
        r.w_lo = 1.0;
    } else {
        r.hi = r.lo + 1;
        r.w_lo = 1.0 - (clamped - static_cast<double>(r.lo));
    }
    return r;
}

template <class T>
inline T trilinear_out(const Resize3dGeom& g, const T* in, size_t c,
                       const AxisInterp& t, const AxisInterp& h, const AxisInterp& w) {
    const T* in_c = in + c * g.in_t * g.in_h * g.in_w;
    auto at = [&](size_t it, size_t ih, size_t iw) { return in_c[(it * g.in_h + ih) * g.in_w + iw]; };
    double acc = 0.0;
    acc += t.w_lo * h.w_lo * w.w_lo * static_cast<double>(at(t.lo, h.lo, w.lo));
    acc += t.w_lo * h.w_lo * (1.0 - w.w_lo) * static_cast<double>(at(t.lo, h.lo, w.hi));
    acc += t.w_lo * (1.0 - h.w_lo) * w.w_lo * static_cast<double>(at(t.lo, h.hi, w.lo));
    acc += t.w_lo * (1.0 - h.w_lo) * (1.0 - w.w_lo) * static_cast<double>(at(t.lo, h.hi, w.hi));
    acc += (1.0 - t.w_lo) * h.w_lo * w.w_lo * static_cast<double>(at(t.hi, h.lo, w.lo));
    acc += (1.0 - t.w_lo) * h.w_lo * (1.0 - w.w_lo) * static_cast<double>(at(t.hi, h.lo, w.hi));
    acc += (1.0 - t.w_lo) * (1.0 - h.w_lo) * w.w_lo * static_cast<double>(at(t.hi, h.hi, w.lo));
    acc += (1.0 - t.w_lo) * (1.0 - h.w_lo) * (1.0 - w.w_lo) * static_cast<double>(at(t.hi, h.hi, w.hi));
    return static_cast<T>(acc);
}

}  // namespace vsal::kernels::cell
