#pragma once

#include <cstddef>
#include <vector>

#include "vsal/tape.hpp"
#include "vsal/tensor.hpp"

// Differentiable operations. Every op validates shapes, checks the result for
// NaN/Inf, and, when `tape` is non-null and any input requires gradients,
// records a backward rule. Passing tape == nullptr runs pure inference.
namespace vsal::ops {

struct Stride3 {
    std::size_t t = 1, h = 1, w = 1;
};
struct Pad3 {
    std::size_t t = 0, h = 0, w = 0;
};
struct Size3 {
    std::size_t t = 0, h = 0, w = 0;
};

// input [C_in,T,H,W] * weight [C_out,C_in,kT,kH,kW] (+ bias [C_out], optional).
template <class T>
TensorPtr<T> conv3d(Tape<T>* tape, const TensorPtr<T>& input, const TensorPtr<T>& weight,
                    const TensorPtr<T>& bias, Stride3 stride = {}, Pad3 pad = {});

// input [C_in,T,H,W] * weight [C_in,C_out,kT,kH,kW]; output extent (in-1)*s + k - 2p.
template <class T>
TensorPtr<T> conv_transpose3d(Tape<T>* tape, const TensorPtr<T>& input, const TensorPtr<T>& weight,
                              const TensorPtr<T>& bias, Stride3 stride = {}, Pad3 pad = {});

// input [C_in,L] * weight [C_out,C_in,k]; routed through conv3d.
template <class T>
TensorPtr<T> conv1d(Tape<T>* tape, const TensorPtr<T>& input, const TensorPtr<T>& weight,
                    const TensorPtr<T>& bias, std::size_t stride = 1, std::size_t pad = 0);

// Factorized 3D convolution: spatial [Cmid,Cin,1,kH,kW] then temporal
// [Cout,Cmid,kT,1,1]. Equivalent to the composition of two conv3d calls.
template <class T>
TensorPtr<T> sep_conv3d(Tape<T>* tape, const TensorPtr<T>& input,
                        const TensorPtr<T>& spatial_weight, const TensorPtr<T>& spatial_bias,
                        const TensorPtr<T>& temporal_weight, const TensorPtr<T>& temporal_bias,
                        Stride3 spatial_stride = {}, Pad3 spatial_pad = {},
                        Stride3 temporal_stride = {}, Pad3 temporal_pad = {});

// No padding; gradient routes to the argmax, ties to the lowest flat index.
template <class T>
TensorPtr<T> maxpool3d(Tape<T>* tape, const TensorPtr<T>& input, Size3 kernel, Stride3 stride);

// input [C,L] -> [C,out_len]; bin i covers [floor(i*L/out), floor((i+1)*L/out)).
template <class T>
TensorPtr<T> adaptive_maxpool1d(Tape<T>* tape, const TensorPtr<T>& input, std::size_t out_len);

// Half-pixel-center resize of [C,T,H,W] to [C,out.t,out.h,out.w].
template <class T>
TensorPtr<T> trilinear_upsample(Tape<T>* tape, const TensorPtr<T>& input, Size3 out_size);

template <class T>
TensorPtr<T> relu(Tape<T>* tape, const TensorPtr<T>& x);
template <class T>
TensorPtr<T> sigmoid(Tape<T>* tape, const TensorPtr<T>& x);

template <class T>
TensorPtr<T> add(Tape<T>* tape, const TensorPtr<T>& a, const TensorPtr<T>& b);
template <class T>
TensorPtr<T> mul(Tape<T>* tape, const TensorPtr<T>& a, const TensorPtr<T>& b);
template <class T>
TensorPtr<T> add_scalar(Tape<T>* tape, const TensorPtr<T>& a, T s);
template <class T>
TensorPtr<T> mul_scalar(Tape<T>* tape, const TensorPtr<T>& a, T s);

// a [m,k] * b [k,n] -> [m,n].
template <class T>
TensorPtr<T> matmul(Tape<T>* tape, const TensorPtr<T>& a, const TensorPtr<T>& b);

template <class T>
TensorPtr<T> concat(Tape<T>* tape, const std::vector<TensorPtr<T>>& parts, std::size_t axis);

// Contiguous sub-range [start, start+len) along one axis.
template <class T>
TensorPtr<T> slice(Tape<T>* tape, const TensorPtr<T>& x, std::size_t axis, std::size_t start,
                   std::size_t len);

template <class T>
TensorPtr<T> reshape(Tape<T>* tape, const TensorPtr<T>& x, Shape new_shape);

// NumPy-style broadcast (left-pad with 1s; each axis must match or be 1).
template <class T>
TensorPtr<T> broadcast_to(Tape<T>* tape, const TensorPtr<T>& x, Shape target);

template <class T>
TensorPtr<T> sum(Tape<T>* tape, const TensorPtr<T>& x);  // -> scalar
template <class T>
TensorPtr<T> mean(Tape<T>* tape, const TensorPtr<T>& x);  // -> scalar
template <class T>
TensorPtr<T> sum_axes(Tape<T>* tape, const TensorPtr<T>& x, const std::vector<std::size_t>& axes,
                      bool keepdims = true);
template <class T>
TensorPtr<T> mean_axes(Tape<T>* tape, const TensorPtr<T>& x, const std::vector<std::size_t>& axes,
                       bool keepdims = true);

// x / sum(x); requires all entries >= 0 and a positive sum.
template <class T>
TensorPtr<T> normalize_to_distribution(Tape<T>* tape, const TensorPtr<T>& x);

// sum_i Q_i * log(eps + Q_i / (P_i + eps)); P, Q must each sum to 1 within
// 1e-4. Natural logarithm; differentiable w.r.t. P (and Q, if required).
template <class T>
TensorPtr<T> kldiv(Tape<T>* tape, const TensorPtr<T>& P, const TensorPtr<T>& Q, T epsilon);

// Channel-shared bilinear form: y[c,k] = sum_{i,j} x1[c,i]*A[i,k,j]*x2[c,j] + b[k]
// with x1 [C,x0], A [x0,x,y0], x2 [C,y0], b [x] -> y [C,x].
template <class T>
TensorPtr<T> bilinear_form(Tape<T>* tape, const TensorPtr<T>& x1, const TensorPtr<T>& A,
                           const TensorPtr<T>& x2, const TensorPtr<T>& b);

}  // namespace vsal::ops
