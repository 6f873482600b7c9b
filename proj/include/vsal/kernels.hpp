#pragma once

#include <cstddef>
#include <string>

namespace vsal::kernels {

// Compute backend for the hot loops. Both backends evaluate every output
// element with the same inner summation order, so results are bit-identical
// regardless of backend or thread count; `openmp` only changes which thread
// computes which element.
enum class Backend { serial, openmp };

Backend default_backend();  // openmp when compiled with OpenMP support
Backend backend();
void set_backend(Backend b);
std::string backend_name(Backend b);

// ---------------------------------------------------------------------------
// Geometry descriptors. All tensors are row-major, channel-first.
// ---------------------------------------------------------------------------

// conv3d: input [c_in, in_t, in_h, in_w], weight [c_out, c_in, k_t, k_h, k_w],
// output [c_out, out_t, out_h, out_w] with out = floor((in + 2p - k)/s) + 1.
struct Conv3dGeom {
    std::size_t c_in = 0, c_out = 0;
    std::size_t in_t = 0, in_h = 0, in_w = 0;
    std::size_t k_t = 0, k_h = 0, k_w = 0;
    std::size_t s_t = 1, s_h = 1, s_w = 1;
    std::size_t p_t = 0, p_h = 0, p_w = 0;
    std::size_t out_t = 0, out_h = 0, out_w = 0;  // filled by make_conv3d_geom

    std::size_t in_numel() const { return c_in * in_t * in_h * in_w; }
    std::size_t out_numel() const { return c_out * out_t * out_h * out_w; }
    std::size_t weight_numel() const { return c_out * c_in * k_t * k_h * k_w; }
};

Conv3dGeom make_conv3d_geom(std::size_t c_in, std::size_t c_out,
                            std::size_t in_t, std::size_t in_h, std::size_t in_w,
                            std::size_t k_t, std::size_t k_h, std::size_t k_w,
                            std::size_t s_t, std::size_t s_h, std::size_t s_w,
                            std::size_t p_t, std::size_t p_h, std::size_t p_w);

// conv_transpose3d: input [c_in, ...], weight [c_in, c_out, k_t, k_h, k_w],
// output extent (in - 1)*s + k - 2p.
struct ConvT3dGeom {
    std::size_t c_in = 0, c_out = 0;
    std::size_t in_t = 0, in_h = 0, in_w = 0;
    std::size_t k_t = 0, k_h = 0, k_w = 0;
    std::size_t s_t = 1, s_h = 1, s_w = 1;
    std::size_t p_t = 0, p_h = 0, p_w = 0;
    std::size_t out_t = 0, out_h = 0, out_w = 0;

    std::size_t in_numel() const { return c_in * in_t * in_h * in_w; }
    std::size_t out_numel() const { return c_out * out_t * out_h * out_w; }
    std::size_t weight_numel() const { return c_in * c_out * k_t * k_h * k_w; }
};

ConvT3dGeom make_convt3d_geom(std::size_t c_in, std::size_t c_out,
                              std::size_t in_t, std::size_t in_h, std::size_t in_w,
                              std::size_t k_t, std::size_t k_h, std::size_t k_w,
                              std::size_t s_t, std::size_t s_h, std::size_t s_w,
                              std::size_t p_t, std::size_t p_h, std::size_t p_w);

// maxpool3d: no padding; out = floor((in - k)/s) + 1.
struct Pool3dGeom {
    std::size_t c = 0;
    std::size_t in_t = 0, in_h = 0, in_w = 0;
    std::size_t k_t = 0, k_h = 0, k_w = 0;
    std::size_t s_t = 1, s_h = 1, s_w = 1;
    std::size_t out_t = 0, out_h = 0, out_w = 0;

    std::size_t in_numel() const { return c * in_t * in_h * in_w; }
    std::size_t out_numel() const { return c * out_t * out_h * out_w; }
};

Pool3dGeom make_pool3d_geom(std::size_t c,
                            std::size_t in_t, std::size_t in_h, std::size_t in_w,
                            std::size_t k_t, std::size_t k_h, std::size_t k_w,
                            std::size_t s_t, std::size_t s_h, std::size_t s_w);

// Trilinear resize with half-pixel centers and edge clamping:
// src = (dst + 0.5) * in/out - 0.5, clamped to [0, in-1].
struct Resize3dGeom {
    std::size_t c = 0;
    std::size_t in_t = 0, in_h = 0, in_w = 0;
    std::size_t out_t = 0, out_h = 0, out_w = 0;

    std::size_t in_numel() const { return c * in_t * in_h * in_w; }
    std::size_t out_numel() const { return c * out_t * out_h * out_w; }
};

// ---------------------------------------------------------------------------
// Dispatched kernels. Gradient kernels accumulate (+=) into their output
// buffers. `argmax` stores flat input indices; pooling ties resolve to the
// lowest flat index.
// ---------------------------------------------------------------------------

template <class T>
void conv3d_forward(const Conv3dGeom& g, const T* in, const T* w, const T* bias, T* out);
template <class T>
void conv3d_backward_input(const Conv3dGeom& g, const T* grad_out, const T* w, T* grad_in);
template <class T>
void conv3d_backward_weight(const Conv3dGeom& g, const T* in, const T* grad_out, T* grad_w);
template <class T>
void conv3d_backward_bias(const Conv3dGeom& g, const T* grad_out, T* grad_b);

template <class T>
void convt3d_forward(const ConvT3dGeom& g, const T* in, const T* w, const T* bias, T* out);
template <class T>
void convt3d_backward_input(const ConvT3dGeom& g, const T* grad_out, const T* w, T* grad_in);
template <class T>
void convt3d_backward_weight(const ConvT3dGeom& g, const T* in, const T* grad_out, T* grad_w);
template <class T>
void convt3d_backward_bias(const ConvT3dGeom& g, const T* grad_out, T* grad_b);

template <class T>
void maxpool3d_forward(const Pool3dGeom& g, const T* in, T* out, std::size_t* argmax);
template <class T>
void maxpool3d_backward(const Pool3dGeom& g, const std::size_t* argmax, const T* grad_out, T* grad_in);

template <class T>
void trilinear_forward(const Resize3dGeom& g, const T* in, T* out);
template <class T>
void trilinear_backward(const Resize3dGeom& g, const T* grad_out, T* grad_in);

// Per-backend entry points, exposed for the equivalence tests and the
// benchmark. The dispatched functions above route to one of these.
#define VSAL_DECLARE_BACKEND_KERNELS(suffix)                                                            \
    template <class T>                                                                                  \
    void conv3d_forward_##suffix(const Conv3dGeom& g, const T* in, const T* w, const T* bias, T* out);  \
    template <class T>                                                                                  \
    void conv3d_backward_input_##suffix(const Conv3dGeom& g, const T* grad_out, const T* w, T* grad_in); \
    template <class T>                                                                                  \
    void conv3d_backward_weight_##suffix(const Conv3dGeom& g, const T* in, const T* grad_out, T* grad_w); \
    template <class T>                                                                                  \
    void conv3d_backward_bias_##suffix(const Conv3dGeom& g, const T* grad_out, T* grad_b);              \
    template <class T>                                                                                  \
    void convt3d_forward_##suffix(const ConvT3dGeom& g, const T* in, const T* w, const T* bias, T* out); \
    template <class T>                                                                                  \
    void convt3d_backward_input_##suffix(const ConvT3dGeom& g, const T* grad_out, const T* w, T* grad_in); \
    template <class T>                                                                                  \
    void convt3d_backward_weight_##suffix(const ConvT3dGeom& g, const T* in, const T* grad_out, T* grad_w); \
    template <class T>                                                                                  \
    void convt3d_backward_bias_##suffix(const ConvT3dGeom& g, const T* grad_out, T* grad_b);            \
    template <class T>                                                                                  \
    void maxpool3d_forward_##suffix(const Pool3dGeom& g, const T* in, T* out, std::size_t* argmax);     \
    template <class T>                                                                                  \
    void maxpool3d_backward_##suffix(const Pool3dGeom& g, const std::size_t* argmax, const T* grad_out, \
                                     T* grad_in);                                                       \
    template <class T>                                                                                  \
    void trilinear_forward_##suffix(const Resize3dGeom& g, const T* in, T* out);                        \
    template <class T>                                                                                  \
    void trilinear_backward_##suffix(const Resize3dGeom& g, const T* grad_out, T* grad_in);

VSAL_DECLARE_BACKEND_KERNELS(serial)
VSAL_DECLARE_BACKEND_KERNELS(omp)

#undef VSAL_DECLARE_BACKEND_KERNELS

}  // namespace vsal::kernels
