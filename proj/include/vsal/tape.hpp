#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "vsal/error.hpp"
#include "vsal/tensor.hpp"

namespace vsal {

// Records executed ops in forward order; forward order is a topological order
// of the graph, so reverse iteration visits every node after all its
// consumers. A tape is single-threaded; independent forward passes on
// separate tapes may run concurrently over shared read-only weights.
template <class T>
class Tape {
public:
    void record(std::vector<TensorPtr<T>> inputs, TensorPtr<T> output,
                std::function<void()> backward_rule) {
        steps_.push_back(Step{std::move(inputs), std::move(output), std::move(backward_rule)});
    }

    // Seeds d(loss)/d(loss) = 1 and propagates gradients to every
    // requires_grad tensor reachable from `loss`.
    void backward(const TensorPtr<T>& loss) {
        if (consumed_) throw NumericError("backward called twice without reset");
        if (steps_.empty()) throw NumericError("backward on empty tape");
        if (!loss || !loss->is_scalar()) {
            throw ShapeError("backward requires a scalar loss tensor");
        }
        consumed_ = true;
        loss->ensure_grad();
        loss->grad[0] = T(1);
        for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) {
            if (!it->output->grad.empty()) it->backward_rule();
        }
    }

    void reset() {
        steps_.clear();
        consumed_ = false;
    }

    bool empty() const { return steps_.empty(); }
    std::size_t size() const { return steps_.size(); }

private:
    struct Step {
        std::vector<TensorPtr<T>> inputs;
        TensorPtr<T> output;
        std::function<void()> backward_rule;
    };

    std::vector<Step> steps_;
    bool consumed_ = false;
};

}  // namespace vsal
