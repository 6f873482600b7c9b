// OpenMP backend: the same cell bodies as the serial reference, with the
// outer element loop flattened and distributed across threads. Scatter-style
// gradients (maxpool, trilinear) parallelize over channels, which is the
// coarsest racefree partition.

#include <vector>

#include "kernels_cell.hpp"
#include "vsal/kernels.hpp"

namespace vsal::kernels {

namespace {

struct OutIdx {
    std::size_t c, t, h, w;
};

inline OutIdx decompose(std::size_t flat, std::size_t t, std::size_t h, std::size_t w) {
    OutIdx r;
    r.w = flat % w;
    flat /= w;
    r.h = flat % h;
    flat /= h;
    r.t = flat % t;
    r.c = flat / t;
    return r;
}

}  // namespace

template <class T>
void conv3d_forward_omp(const Conv3dGeom& g, const T* in, const T* w, const T* bias, T* out) {
    const long long n = static_cast<long long>(g.out_numel());
#pragma omp parallel for schedule(static)
    for (long long o = 0; o < n; ++o) {
        const OutIdx i = decompose(static_cast<std::size_t>(o), g.out_t, g.out_h, g.out_w);
        out[o] = cell::conv3d_out(g, in, w, bias, i.c, i.t, i.h, i.w);
    }
}

template <class T>
void conv3d_backward_input_omp(const Conv3dGeom& g, const T* grad_out, const T* w, T* grad_in) {
    const long long n = static_cast<long long>(g.in_numel());
#pragma omp parallel for schedule(static)
    for (long long o = 0; o < n; ++o) {
        const OutIdx i = decompose(static_cast<std::size_t>(o), g.in_t, g.in_h, g.in_w);
        grad_in[o] += cell::conv3d_grad_in(g, grad_out, w, i.c, i.t, i.h, i.w);
    }
}

template <class T>
void conv3d_backward_weight_omp(const Conv3dGeom& g, const T* in, const T* grad_out, T* grad_w) {
    const long long n = static_cast<long long>(g.weight_numel());
#pragma omp parallel for schedule(static)
    for (long long o = 0; o < n; ++o) {
        std::size_t rest = static_cast<std::size_t>(o);
        const std::size_t kw = rest % g.k_w;
        rest /= g.k_w;
        const std::size_t kh = rest % g.k_h;
        rest /= g.k_h;
        const std::size_t kt = rest % g.k_t;
        rest /= g.k_t;
        const std::size_t ci = rest % g.c_in;
        const std::size_t co = rest / g.c_in;
        grad_w[o] += cell::conv3d_grad_w(g, in, grad_out, co, ci, kt, kh, kw);
    }
}

template <class T>
void conv3d_backward_bias_omp(const Conv3dGeom& g, const T* grad_out, T* grad_b) {
    const long long n = static_cast<long long>(g.c_out);
    const std::size_t per_channel = g.out_t * g.out_h * g.out_w;
#pragma omp parallel for schedule(static)
    for (long long co = 0; co < n; ++co) {
        T acc = T(0);
        const T* go_c = grad_out + static_cast<std::size_t>(co) * per_channel;
        for (std::size_t i = 0; i < per_channel; ++i) acc += go_c[i];
        grad_b[co] += acc;
    }
}

template <class T>
void convt3d_forward_omp(const ConvT3dGeom& g, const T* in, const T* w, const T* bias, T* out) {
    const long long n = static_cast<long long>(g.out_numel());
#pragma omp parallel for schedule(static)
    for (long long o = 0; o < n; ++o) {
        const OutIdx i = decompose(static_cast<std::size_t>(o), g.out_t, g.out_h, g.out_w);
        out[o] = cell::convt3d_out(g, in, w, bias, i.c, i.t, i.h, i.w);
    }
}

template <class T>
void convt3d_backward_input_omp(const ConvT3dGeom& g, const T* grad_out, const T* w, T* grad_in) {
    const long long n = static_cast<long long>(g.in_numel());
#pragma omp parallel for schedule(static)
    for (long long o = 0; o < n; ++o) {
        const OutIdx i = decompose(static_cast<std::size_t>(o), g.in_t, g.in_h, g.in_w);
        grad_in[o] += cell::convt3d_grad_in(g, grad_out, w, i.c, i.t, i.h, i.w);
    }
}

template <class T>
void convt3d_backward_weight_omp(const ConvT3dGeom& g, const T* in, const T* grad_out, T* grad_w) {
    const long long n = static_cast<long long>(g.weight_numel());
#pragma omp parallel for schedule(static)
    for (long long o = 0; o < n; ++o) {
        std::size_t rest = static_cast<std::size_t>(o);
        const std::size_t kw = rest % g.k_w;
        rest /= g.k_w;
        const std::size_t kh = rest % g.k_h;
        rest /= g.k_h;
        const std::size_t kt = rest % g.k_t;
        rest /= g.k_t;
        const std::size_t co = rest % g.c_out;
        const std::size_t ci = rest / g.c_out;
        grad_w[o] += cell::convt3d_grad_w(g, in, grad_out, ci, co, kt, kh, kw);
    }
}

template <class T>
void convt3d_backward_bias_omp(const ConvT3dGeom& g, const T* grad_out, T* grad_b) {
    const long long n = static_cast<long long>(g.c_out);
    const std::size_t per_channel = g.out_t * g.out_h * g.out_w;
#pragma omp parallel for schedule(static)
    for (long long co = 0; co < n; ++co) {
        T acc = T(0);
        const T* go_c = grad_out + static_cast<std::size_t>(co) * per_channel;
        for (std::size_t i = 0; i < per_channel; ++i) acc += go_c[i];
        grad_b[co] += acc;
    }
}

template <class T>
void maxpool3d_forward_omp(const Pool3dGeom& g, const T* in, T* out, std::size_t* argmax) {
    const long long n = static_cast<long long>(g.out_numel());
#pragma omp parallel for schedule(static)
    for (long long o = 0; o < n; ++o) {
        const OutIdx i = decompose(static_cast<std::size_t>(o), g.out_t, g.out_h, g.out_w);
        out[o] = cell::maxpool3d_out(g, in, i.c, i.t, i.h, i.w, &argmax[o]);
    }
}

template <class T>
void maxpool3d_backward_omp(const Pool3dGeom& g, const std::size_t* argmax, const T* grad_out,
                            T* grad_in) {
    const long long nc = static_cast<long long>(g.c);
    const std::size_t per_channel = g.out_t * g.out_h * g.out_w;
#pragma omp parallel for schedule(static)
    for (long long c = 0; c < nc; ++c) {
        const std::size_t base = static_cast<std::size_t>(c) * per_channel;
        for (std::size_t i = 0; i < per_channel; ++i) grad_in[argmax[base + i]] += grad_out[base + i];
    }
}

namespace {

inline std::vector<cell::AxisInterp> interp_table(std::size_t in_size, std::size_t out_size) {
    std::vector<cell::AxisInterp> table(out_size);
    for (std::size_t d = 0; d < out_size; ++d) table[d] = cell::axis_interp(d, in_size, out_size);
    return table;
}

}  // namespace

template <class T>
void trilinear_forward_omp(const Resize3dGeom& g, const T* in, T* out) {
    const auto tt = interp_table(g.in_t, g.out_t);
    const auto th = interp_table(g.in_h, g.out_h);
    const auto tw = interp_table(g.in_w, g.out_w);
    const long long n = static_cast<long long>(g.out_numel());
#pragma omp parallel for schedule(static)
    for (long long o = 0; o < n; ++o) {
        const OutIdx i = decompose(static_cast<std::size_t>(o), g.out_t, g.out_h, g.out_w);
        out[o] = cell::trilinear_out(g, in, i.c, tt[i.t], th[i.h], tw[i.w]);
    }
}

template <class T>
void trilinear_backward_omp(const Resize3dGeom& g, const T* grad_out, T* grad_in) {
    const auto tt = interp_table(g.in_t, g.out_t);
    const auto th = interp_table(g.in_h, g.out_h);
    const auto tw = interp_table(g.in_w, g.out_w);
    const long long nc = static_cast<long long>(g.c);
#pragma omp parallel for schedule(static)
    for (long long c = 0; c < nc; ++c) {
        const T* go_c = grad_out + static_cast<std::size_t>(c) * g.out_t * g.out_h * g.out_w;
        T* gi_c = grad_in + static_cast<std::size_t>(c) * g.in_t * g.in_h * g.in_w;
        std::size_t o = 0;
        for (std::size_t ot = 0; ot < g.out_t; ++ot)
            for (std::size_t oh = 0; oh < g.out_h; ++oh)
                for (std::size_t ow = 0; ow < g.out_w; ++ow, ++o) {
                    const double go = static_cast<double>(go_c[o]);
                    const auto& t = tt[ot];
                    const auto& h = th[oh];
                    const auto& w = tw[ow];
                    auto add = [&](std::size_t it, std::size_t ih, std::size_t iw, double wt) {
                        gi_c[(it * g.in_h + ih) * g.in_w + iw] += static_cast<T>(wt * go);
                    };
                    add(t.lo, h.lo, w.lo, t.w_lo * h.w_lo * w.w_lo);
                    add(t.lo, h.lo, w.hi, t.w_lo * h.w_lo * (1.0 - w.w_lo));
                    add(t.lo, h.hi, w.lo, t.w_lo * (1.0 - h.w_lo) * w.w_lo);
                    add(t.lo, h.hi, w.hi, t.w_lo * (1.0 - h.w_lo) * (1.0 - w.w_lo));
                    add(t.hi, h.lo, w.lo, (1.0 - t.w_lo) * h.w_lo * w.w_lo);
                    add(t.hi, h.lo, w.hi, (1.0 - t.w_lo) * h.w_lo * (1.0 - w.w_lo));
                    add(t.hi, h.hi, w.lo, (1.0 - t.w_lo) * (1.0 - h.w_lo) * w.w_lo);
                    add(t.hi, h.hi, w.hi, (1.0 - t.w_lo) * (1.0 - h.w_lo) * (1.0 - w.w_lo));
                }
    }
}

#define VSAL_INSTANTIATE_OMP(T)                                                                      \
    template void conv3d_forward_omp<T>(const Conv3dGeom&, const T*, const T*, const T*, T*);        \
    template void conv3d_backward_input_omp<T>(const Conv3dGeom&, const T*, const T*, T*);           \
    template void conv3d_backward_weight_omp<T>(const Conv3dGeom&, const T*, const T*, T*);          \
    template void conv3d_backward_bias_omp<T>(const Conv3dGeom&, const T*, T*);                      \
    template void convt3d_forward_omp<T>(const ConvT3dGeom&, const T*, const T*, const T*, T*);      \
    template void convt3d_backward_input_omp<T>(const ConvT3dGeom&, const T*, const T*, T*);         \
    template void convt3d_backward_weight_omp<T>(const ConvT3dGeom&, const T*, const T*, T*);        \
    template void convt3d_backward_bias_omp<T>(const ConvT3dGeom&, const T*, T*);                    \
    template void maxpool3d_forward_omp<T>(const Pool3dGeom&, const T*, T*, std::size_t*);           \
    template void maxpool3d_backward_omp<T>(const Pool3dGeom&, const std::size_t*, const T*, T*);    \
    template void trilinear_forward_omp<T>(const Resize3dGeom&, const T*, T*);                       \
    template void trilinear_backward_omp<T>(const Resize3dGeom&, const T*, T*);

VSAL_INSTANTIATE_OMP(float)
VSAL_INSTANTIATE_OMP(double)

#undef VSAL_INSTANTIATE_OMP

}  // namespace vsal::kernels
