#include "vsal/tensor.hpp"

#include <cmath>
#include <sstream>

namespace vsal {

std::string shape_to_string(const Shape& shape) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ",";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

template <class T>
Tensor<T>::Tensor(Shape s, std::vector<T> d) : shape(std::move(s)), data(std::move(d)) {
    if (shape.empty()) throw ShapeError("tensor shape must have at least one axis");
    for (std::size_t dim : shape) {
        if (dim == 0) throw ShapeError("tensor dimensions must be positive, got " + shape_to_string(shape));
    }
    if (shape_numel(shape) != data.size()) {
        throw ShapeError("shape " + shape_to_string(shape) + " does not match data length " +
                         std::to_string(data.size()));
    }
}

template <class T>
T Tensor<T>::scalar() const {
    if (!is_scalar()) throw ShapeError("expected scalar tensor, got shape " + shape_to_string(shape));
    return data[0];
}

template <class T>
void Tensor<T>::ensure_grad() {
    if (grad.empty()) grad.assign(data.size(), T(0));
}

template <class T>
void Tensor<T>::zero_grad() {
    if (!grad.empty()) grad.assign(data.size(), T(0));
}

template <class T>
void Tensor<T>::check_finite(const char* op_name) const {
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (!std::isfinite(static_cast<double>(data[i]))) {
            throw NumericError(std::string("non-finite value produced by ") + op_name + " at flat index " +
                               std::to_string(i));
        }
    }
}

template <class T>
std::vector<std::size_t> Tensor<T>::strides() const {
    std::vector<std::size_t> s(shape.size(), 1);
    for (std::size_t i = shape.size(); i-- > 1;) s[i - 1] = s[i] * shape[i];
    return s;
}

template <class T>
TensorPtr<T> make_tensor(Shape shape, std::vector<T> data, bool requires_grad) {
    auto t = std::make_shared<Tensor<T>>(std::move(shape), std::move(data));
    t->requires_grad = requires_grad;
    return t;
}

template <class T>
TensorPtr<T> zeros(Shape shape, bool requires_grad) {
    std::size_t n = shape_numel(shape);
    return make_tensor<T>(std::move(shape), std::vector<T>(n, T(0)), requires_grad);
}

template <class T>
TensorPtr<T> full(Shape shape, T value, bool requires_grad) {
    std::size_t n = shape_numel(shape);
    return make_tensor<T>(std::move(shape), std::vector<T>(n, value), requires_grad);
}

template <class T, class U>
TensorPtr<U> cast(const Tensor<T>& t) {
    std::vector<U> out(t.data.size());
    for (std::size_t i = 0; i < t.data.size(); ++i) out[i] = static_cast<U>(t.data[i]);
    return make_tensor<U>(t.shape, std::move(out));
}

template <class T>
std::vector<TensorPtr<T>> split(const Tensor<T>& t, std::size_t axis,
                                const std::vector<std::size_t>& sizes) {
    if (axis >= t.shape.size()) throw ShapeError("split: axis out of range");
    std::size_t total = 0;
    for (std::size_t s : sizes) total += s;
    if (total != t.shape[axis]) throw ShapeError("split: sizes do not sum to axis extent");

    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < axis; ++i) outer *= t.shape[i];
    for (std::size_t i = axis + 1; i < t.shape.size(); ++i) inner *= t.shape[i];

    std::vector<TensorPtr<T>> parts;
    std::size_t offset = 0;
    for (std::size_t s : sizes) {
        Shape ps = t.shape;
        ps[axis] = s;
        std::vector<T> pd(outer * s * inner);
        for (std::size_t o = 0; o < outer; ++o) {
            const T* src = t.data.data() + (o * t.shape[axis] + offset) * inner;
            T* dst = pd.data() + o * s * inner;
            std::copy(src, src + s * inner, dst);
        }
        parts.push_back(make_tensor<T>(std::move(ps), std::move(pd)));
        offset += s;
    }
    return parts;
}

template struct Tensor<float>;
template struct Tensor<double>;
template TensorPtr<float> make_tensor<float>(Shape, std::vector<float>, bool);
template TensorPtr<double> make_tensor<double>(Shape, std::vector<double>, bool);
template TensorPtr<float> zeros<float>(Shape, bool);
template TensorPtr<double> zeros<double>(Shape, bool);
template TensorPtr<float> full<float>(Shape, float, bool);
template TensorPtr<double> full<double>(Shape, double, bool);
template TensorPtr<double> cast<float, double>(const Tensor<float>&);
template TensorPtr<float> cast<double, float>(const Tensor<double>&);
template std::vector<TensorPtr<float>> split<float>(const Tensor<float>&, std::size_t,
                                                    const std::vector<std::size_t>&);
template std::vector<TensorPtr<double>> split<double>(const Tensor<double>&, std::size_t,
                                                      const std::vector<std::size_t>&);

}  // namespace vsal
