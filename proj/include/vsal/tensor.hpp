#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include "vsal/error.hpp"

namespace vsal {

using Shape = std::vector<std::size_t>;

std::string shape_to_string(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

// N-dimensional array, flat row-major storage. Scalars use shape {1}.
// The gradient buffer is allocated lazily on first accumulation; once present
// it always matches the data extent. Values are immutable after an op creates
// them -- only `grad` mutates, during backward.
template <class T>
struct Tensor {
    Shape shape;
    std::vector<T> data;
    std::vector<T> grad;  // empty until touched by backward
    bool requires_grad = false;

    Tensor() = default;
    Tensor(Shape s, std::vector<T> d);

    std::size_t numel() const { return data.size(); }
    std::size_t ndim() const { return shape.size(); }

    bool is_scalar() const { return data.size() == 1; }
    T scalar() const;

    void ensure_grad();                 // allocate zero-filled grad if absent
    void zero_grad();                   // clear accumulated gradient
    void check_finite(const char* op_name) const;

    // Row-major strides for the current shape.
    std::vector<std::size_t> strides() const;
};

template <class T>
using TensorPtr = std::shared_ptr<Tensor<T>>;

// Construction helpers. `requires_grad` marks leaves (model parameters).
template <class T>
TensorPtr<T> make_tensor(Shape shape, std::vector<T> data, bool requires_grad = false);
template <class T>
TensorPtr<T> zeros(Shape shape, bool requires_grad = false);
template <class T>
TensorPtr<T> full(Shape shape, T value, bool requires_grad = false);

template <class T, class U>
TensorPtr<U> cast(const Tensor<T>& t);

// Non-autograd utility: split along an axis into parts of the given sizes.
// Sizes must sum to the axis extent. Inverse of ops::concat.
template <class T>
std::vector<TensorPtr<T>> split(const Tensor<T>& t, std::size_t axis,
                                const std::vector<std::size_t>& sizes);

}  // namespace vsal
