// Reference backend: plain loop nests over the cell bodies. Kept for testing
// and as the baseline for the kernel benchmark.

#include <vector>

#include "kernels_cell.hpp"
#include "vsal/kernels.hpp"

namespace vsal::kernels {

template <class T>
void conv3d_forward_serial(const Conv3dGeom& g, const T* in, const T* w, const T* bias, T* out) {
    std::size_t o = 0;
    for (std::size_t co = 0; co < g.c_out; ++co)
        for (std::size_t ot = 0; ot < g.out_t; ++ot)
            for (std::size_t oh = 0; oh < g.out_h; ++oh)
                for (std::size_t ow = 0; ow < g.out_w; ++ow)
                    out[o++] = cell::conv3d_out(g, in, w, bias, co, ot, oh, ow);
}

template <class T>
void conv3d_backward_input_serial(const Conv3dGeom& g, const T* grad_out, const T* w, T* grad_in) {
    std::size_t i = 0;
    for (std::size_t ci = 0; ci < g.c_in; ++ci)
        for (std::size_t it = 0; it < g.in_t; ++it)
            for (std::size_t ih = 0; ih < g.in_h; ++ih)
                for (std::size_t iw = 0; iw < g.in_w; ++iw)
                    grad_in[i++] += cell::conv3d_grad_in(g, grad_out, w, ci, it, ih, iw);
}

template <class T>
void conv3d_backward_weight_serial(const Conv3dGeom& g, const T* in, const T* grad_out, T* grad_w) {
    std::size_t i = 0;
    for (std::size_t co = 0; co < g.c_out; ++co)
        for (std::size_t ci = 0; ci < g.c_in; ++ci)
            for (std::size_t kt = 0; kt < g.k_t; ++kt)
                for (std::size_t kh = 0; kh < g.k_h; ++kh)
                    for (std::size_t kw = 0; kw < g.k_w; ++kw)
                        grad_w[i++] += cell::conv3d_grad_w(g, in, grad_out, co, ci, kt, kh, kw);
}

template <class T>
void conv3d_backward_bias_serial(const Conv3dGeom& g, const T* grad_out, T* grad_b) {
    const std::size_t per_channel = g.out_t * g.out_h * g.out_w;
    for (std::size_t co = 0; co < g.c_out; ++co) {
        T acc = T(0);
        const T* go_c = grad_out + co * per_channel;
        for (std::size_t i = 0; i < per_channel; ++i) acc += go_c[i];
        grad_b[co] += acc;
    }
}

template <class T>
void convt3d_forward_serial(const ConvT3dGeom& g, const T* in, const T* w, const T* bias, T* out) {
    std::size_t o = 0;
    for (std::size_t co = 0; co < g.c_out; ++co)
        for (std::size_t ot = 0; ot < g.out_t; ++ot)
            for (std::size_t oh = 0; oh < g.out_h; ++oh)
                for (std::size_t ow = 0; ow < g.out_w; ++ow)
                    out[o++] = cell::convt3d_out(g, in, w, bias, co, ot, oh, ow);
}

template <class T>
void convt3d_backward_input_serial(const ConvT3dGeom& g, const T* grad_out, const T* w, T* grad_in) {
    std::size_t i = 0;
    for (std::size_t ci = 0; ci < g.c_in; ++ci)
        for (std::size_t it = 0; it < g.in_t; ++it)
            for (std::size_t ih = 0; ih < g.in_h; ++ih)
                for (std::size_t iw = 0; iw < g.in_w; ++iw)
                    grad_in[i++] += cell::convt3d_grad_in(g, grad_out, w, ci, it, ih, iw);
}

template <class T>
void convt3d_backward_weight_serial(const ConvT3dGeom& g, const T* in, const T* grad_out, T* grad_w) {
    std::size_t i = 0;
    for (std::size_t ci = 0; ci < g.c_in; ++ci)
        for (std::size_t co = 0; co < g.c_out; ++co)
            for (std::size_t kt = 0; kt < g.k_t; ++kt)
                for (std::size_t kh = 0; kh < g.k_h; ++kh)
                    for (std::size_t kw = 0; kw < g.k_w; ++kw)
                        grad_w[i++] += cell::convt3d_grad_w(g, in, grad_out, ci, co, kt, kh, kw);
}

template <class T>
void convt3d_backward_bias_serial(const ConvT3dGeom& g, const T* grad_out, T* grad_b) {
    const std::size_t per_channel = g.out_t * g.out_h * g.out_w;
    for (std::size_t co = 0; co < g.c_out; ++co) {
        T acc = T(0);
        const T* go_c = grad_out + co * per_channel;
        for (std::size_t i = 0; i < per_channel; ++i) acc += go_c[i];
        grad_b[co] += acc;
    }
}

template <class T>
void maxpool3d_forward_serial(const Pool3dGeom& g, const T* in, T* out, std::size_t* argmax) {
    std::size_t o = 0;
    for (std::size_t c = 0; c < g.c; ++c)
        for (std::size_t ot = 0; ot < g.out_t; ++ot)
            for (std::size_t oh = 0; oh < g.out_h; ++oh)
                for (std::size_t ow = 0; ow < g.out_w; ++ow, ++o)
                    out[o] = cell::maxpool3d_out(g, in, c, ot, oh, ow, &argmax[o]);
}

template <class T>
void maxpool3d_backward_serial(const Pool3dGeom& g, const std::size_t* argmax, const T* grad_out,
                               T* grad_in) {
    const std::size_t n_out = g.out_numel();
    for (std::size_t o = 0; o < n_out; ++o) grad_in[argmax[o]] += grad_out[o];
}

namespace {

inline std::vector<cell::AxisInterp> interp_table(std::size_t in_size, std::size_t out_size) {
    std::vector<cell::AxisInterp> table(out_size);
    for (std::size_t d = 0; d < out_size; ++d) table[d] = cell::axis_interp(d, in_size, out_size);
    return table;
}

}  // namespace

template <class T>
void trilinear_forward_serial(const Resize3dGeom& g, const T* in, T* out) {
    const auto tt = interp_table(g.in_t, g.out_t);
    const auto th = interp_table(g.in_h, g.out_h);
    const auto tw = interp_table(g.in_w, g.out_w);
    std::size_t o = 0;
    for (std::size_t c = 0; c < g.c; ++c)
        for (std::size_t ot = 0; ot < g.out_t; ++ot)
            for (std::size_t oh = 0; oh < g.out_h; ++oh)
                for (std::size_t ow = 0; ow < g.out_w; ++ow)
                    out[o++] = cell::trilinear_out(g, in, c, tt[ot], th[oh], tw[ow]);
}

template <class T>
void trilinear_backward_serial(const Resize3dGeom& g, const T* grad_out, T* grad_in) {
    const auto tt = interp_table(g.in_t, g.out_t);
    const auto th = interp_table(g.in_h, g.out_h);
    const auto tw = interp_table(g.in_w, g.out_w);
    for (std::size_t c = 0; c < g.c; ++c) {
        const T* go_c = grad_out + c * g.out_t * g.out_h * g.out_w;
        T* gi_c = grad_in + c * g.in_t * g.in_h * g.in_w;
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

#define VSAL_INSTANTIATE_SERIAL(T)                                                                      \
    template void conv3d_forward_serial<T>(const Conv3dGeom&, const T*, const T*, const T*, T*);       \
    template void conv3d_backward_input_serial<T>(const Conv3dGeom&, const T*, const T*, T*);          \
    template void conv3d_backward_weight_serial<T>(const Conv3dGeom&, const T*, const T*, T*);         \
    template void conv3d_backward_bias_serial<T>(const Conv3dGeom&, const T*, T*);                     \
    template void convt3d_forward_serial<T>(const ConvT3dGeom&, const T*, const T*, const T*, T*);     \
    template void convt3d_backward_input_serial<T>(const ConvT3dGeom&, const T*, const T*, T*);        \
    template void convt3d_backward_weight_serial<T>(const ConvT3dGeom&, const T*, const T*, T*);       \
    template void convt3d_backward_bias_serial<T>(const ConvT3dGeom&, const T*, T*);                   \
    template void maxpool3d_forward_serial<T>(const Pool3dGeom&, const T*, T*, std::size_t*);          \
    template void maxpool3d_backward_serial<T>(const Pool3dGeom&, const std::size_t*, const T*, T*);   \
    template void trilinear_forward_serial<T>(const Resize3dGeom&, const T*, T*);                      \
    template void trilinear_backward_serial<T>(const Resize3dGeom&, const T*, T*);

VSAL_INSTANTIATE_SERIAL(float)
VSAL_INSTANTIATE_SERIAL(double)

#undef VSAL_INSTANTIATE_SERIAL

}  // namespace vsal::kernels
