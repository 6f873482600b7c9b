#include "vsal/kernels.hpp"

#include <atomic>

#include "vsal/error.hpp"

namespace vsal::kernels {

namespace {

std::atomic<Backend> g_backend{default_backend()};

std::size_t conv_out_extent(std::size_t in, std::size_t k, std::size_t s, std::size_t p,
                            const char* axis) {
    if (s == 0) throw ShapeError(std::string("conv: stride must be >= 1 on axis ") + axis);
    if (in + 2 * p < k) {
        throw ShapeError(std::string("conv: kernel larger than padded input on axis ") + axis);
    }
    return (in + 2 * p - k) / s + 1;
}

}  // namespace

Backend default_backend() {
#ifdef _OPENMP
    return Backend::openmp;
#else
    return Backend::serial;
#endif
}

Backend backend() { return g_backend.load(); }

void set_backend(Backend b) { g_backend.store(b); }

std::string backend_name(Backend b) { return b == Backend::serial ? "serial" : "openmp"; }

Conv3dGeom make_conv3d_geom(std::size_t c_in, std::size_t c_out,
                            std::size_t in_t, std::size_t in_h, std::size_t in_w,
                            std::size_t k_t, std::size_t k_h, std::size_t k_w,
                            std::size_t s_t, std::size_t s_h, std::size_t s_w,
                            std::size_t p_t, std::size_t p_h, std::size_t p_w) {
    Conv3dGeom g{c_in, c_out, in_t, in_h, in_w, k_t, k_h, k_w, s_t, s_h, s_w, p_t, p_h, p_w};
    g.out_t = conv_out_extent(in_t, k_t, s_t, p_t, "t");
    g.out_h = conv_out_extent(in_h, k_h, s_h, p_h, "h");
    g.out_w = conv_out_extent(in_w, k_w, s_w, p_w, "w");
    return g;
}

ConvT3dGeom make_convt3d_geom(std::size_t c_in, std::size_t c_out,
                              std::size_t in_t, std::size_t in_h, std::size_t in_w,
                              std::size_t k_t, std::size_t k_h, std::size_t k_w,
                              std::size_t s_t, std::size_t s_h, std::size_t s_w,
                              std::size_t p_t, std::size_t p_h, std::size_t p_w) {
    ConvT3dGeom g{c_in, c_out, in_t, in_h, in_w, k_t, k_h, k_w, s_t, s_h, s_w, p_t, p_h, p_w};
    if (s_t == 0 || s_h == 0 || s_w == 0) throw ShapeError("conv_transpose: strides must be >= 1");
    auto extent = [](std::size_t in, std::size_t k, std::size_t s, std::size_t p) -> std::size_t {
        const std::size_t grown = (in - 1) * s + k;
        if (grown < 2 * p + 1) throw ShapeError("conv_transpose: padding exceeds output extent");
        return grown - 2 * p;
    };
    g.out_t = extent(in_t, k_t, s_t, p_t);
    g.out_h = extent(in_h, k_h, s_h, p_h);
    g.out_w = extent(in_w, k_w, s_w, p_w);
    return g;
}

Pool3dGeom make_pool3d_geom(std::size_t c,
                            std::size_t in_t, std::size_t in_h, std::size_t in_w,
                            std::size_t k_t, std::size_t k_h, std::size_t k_w,
                            std::size_t s_t, std::size_t s_h, std::size_t s_w) {
    Pool3dGeom g{c, in_t, in_h, in_w, k_t, k_h, k_w, s_t, s_h, s_w};
    if (s_t == 0 || s_h == 0 || s_w == 0) throw ShapeError("maxpool3d: strides must be >= 1");
    if (k_t > in_t || k_h > in_h || k_w > in_w) {
        throw ShapeError("maxpool3d: window larger than input");
    }
    g.out_t = (in_t - k_t) / s_t + 1;
    g.out_h = (in_h - k_h) / s_h + 1;
    g.out_w = (in_w - k_w) / s_w + 1;
    return g;
}

// Workloads below this many inner-loop operations run serially even under the
// openmp backend; thread fan-out costs more than it saves there. Routing is
// purely a performance choice: both backends are bit-identical.
constexpr std::size_t kOmpMinWork = std::size_t{1} << 17;

#define VSAL_DISPATCH(name, work, ...)                               \
    if (backend() == Backend::openmp && (work) >= kOmpMinWork) {     \
        name##_omp(__VA_ARGS__);                                     \
    } else {                                                         \
        name##_serial(__VA_ARGS__);                                  \
    }

template <class T>
void conv3d_forward(const Conv3dGeom& g, const T* in, const T* w, const T* bias, T* out) {
    const std::size_t work = g.out_numel() * g.c_in * g.k_t * g.k_h * g.k_w;
    VSAL_DISPATCH(conv3d_forward, work, g, in, w, bias, out)
}
template <class T>
void conv3d_backward_input(const Conv3dGeom& g, const T* grad_out, const T* w, T* grad_in) {
    const std::size_t work = g.in_numel() * g.c_out * g.k_t * g.k_h * g.k_w;
    VSAL_DISPATCH(conv3d_backward_input, work, g, grad_out, w, grad_in)
}
template <class T>
void conv3d_backward_weight(const Conv3dGeom& g, const T* in, const T* grad_out, T* grad_w) {
    const std::size_t work = g.weight_numel() * g.out_t * g.out_h * g.out_w;
    VSAL_DISPATCH(conv3d_backward_weight, work, g, in, grad_out, grad_w)
}
template <class T>
void conv3d_backward_bias(const Conv3dGeom& g, const T* grad_out, T* grad_b) {
    VSAL_DISPATCH(conv3d_backward_bias, g.out_numel(), g, grad_out, grad_b)
}

template <class T>
void convt3d_forward(const ConvT3dGeom& g, const T* in, const T* w, const T* bias, T* out) {
    const std::size_t work = g.out_numel() * g.c_in * g.k_t * g.k_h * g.k_w;
    VSAL_DISPATCH(convt3d_forward, work, g, in, w, bias, out)
}
template <class T>
void convt3d_backward_input(const ConvT3dGeom& g, const T* grad_out, const T* w, T* grad_in) {
    const std::size_t work = g.in_numel() * g.c_out * g.k_t * g.k_h * g.k_w;
    VSAL_DISPATCH(convt3d_backward_input, work, g, grad_out, w, grad_in)
}
template <class T>
void convt3d_backward_weight(const ConvT3dGeom& g, const T* in, const T* grad_out, T* grad_w) {
    const std::size_t work = g.weight_numel() * g.in_t * g.in_h * g.in_w;
    VSAL_DISPATCH(convt3d_backward_weight, work, g, in, grad_out, grad_w)
}
template <class T>
void convt3d_backward_bias(const ConvT3dGeom& g, const T* grad_out, T* grad_b) {
    VSAL_DISPATCH(convt3d_backward_bias, g.out_numel(), g, grad_out, grad_b)
}

template <class T>
void maxpool3d_forward(const Pool3dGeom& g, const T* in, T* out, std::size_t* argmax) {
    const std::size_t work = g.out_numel() * g.k_t * g.k_h * g.k_w;
    VSAL_DISPATCH(maxpool3d_forward, work, g, in, out, argmax)
}
template <class T>
void maxpool3d_backward(const Pool3dGeom& g, const std::size_t* argmax, const T* grad_out, T* grad_in) {
    VSAL_DISPATCH(maxpool3d_backward, g.out_numel(), g, argmax, grad_out, grad_in)
}

template <class T>
void trilinear_forward(const Resize3dGeom& g, const T* in, T* out) {
    VSAL_DISPATCH(trilinear_forward, g.out_numel() * 8, g, in, out)
}
template <class T>
void trilinear_backward(const Resize3dGeom& g, const T* grad_out, T* grad_in) {
    VSAL_DISPATCH(trilinear_backward, g.out_numel() * 8, g, grad_out, grad_in)
}

#undef VSAL_DISPATCH

#define VSAL_INSTANTIATE_DISPATCH(T)                                                             \
    template void conv3d_forward<T>(const Conv3dGeom&, const T*, const T*, const T*, T*);        \
    template void conv3d_backward_input<T>(const Conv3dGeom&, const T*, const T*, T*);           \
    template void conv3d_backward_weight<T>(const Conv3dGeom&, const T*, const T*, T*);          \
    template void conv3d_backward_bias<T>(const Conv3dGeom&, const T*, T*);                      \
    template void convt3d_forward<T>(const ConvT3dGeom&, const T*, const T*, const T*, T*);      \
    template void convt3d_backward_input<T>(const ConvT3dGeom&, const T*, const T*, T*);         \
    template void convt3d_backward_weight<T>(const ConvT3dGeom&, const T*, const T*, T*);        \
    template void convt3d_backward_bias<T>(const ConvT3dGeom&, const T*, T*);                    \
    template void maxpool3d_forward<T>(const Pool3dGeom&, const T*, T*, std::size_t*);           \
    template void maxpool3d_backward<T>(const Pool3dGeom&, const std::size_t*, const T*, T*);    \
    template void trilinear_forward<T>(const Resize3dGeom&, const T*, T*);                       \
    template void trilinear_backward<T>(const Resize3dGeom&, const T*, T*);

VSAL_INSTANTIATE_DISPATCH(float)
VSAL_INSTANTIATE_DISPATCH(double)

#undef VSAL_INSTANTIATE_DISPATCH

}  // namespace vsal::kernels
