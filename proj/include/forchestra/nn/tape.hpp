#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "forchestra/nn/tensor.hpp"

namespace forchestra::nn {

/// A trainable tensor with its accumulated gradient.
struct Parameter {
    Parameter() = default;
    Parameter(std::string name, Tensor value)
        : name(std::move(name)), value(std::move(value)), grad(this->value.shape()) {}

    std::string name;
    Tensor value;
    Tensor grad;

    std::size_t size() const noexcept { return value.size(); }
    void zero_grad() { grad = Tensor(value.shape()); }
};

void zero_gradients(const std::vector<Parameter*>& params);
std::size_t parameter_count(const std::vector<Parameter*>& params);

/// Handle to a value recorded on a Tape.
struct Var {
    std::size_t index = 0;
};

class Tape;
using BackwardFn = std::function<void(Tape&, Var self)>;

/// Records tensor operations in execution order and replays them in reverse
/// to accumulate gradients. Not thread-safe; one tape per forward pass.
class Tape {
public:
    explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}

    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;
    Tape(Tape&&) = default;
    Tape& operator=(Tape&&) = default;

    /// False for inference tapes: ops skip saving backward state.
    bool grad_enabled() const noexcept { return grad_enabled_; }

    Var constant(Tensor value);
    /// Leaf bound to `p`; backward() adds the leaf's gradient into p.grad.
    Var parameter(Parameter& p);
    /// Appends an op result. `inputs` decide whether the result needs a gradient.
    Var record(Tensor value, std::string_view op, std::span<const Var> inputs, BackwardFn fn);
    Var record(Tensor value, std::string_view op, std::initializer_list<Var> inputs, BackwardFn fn) {
        return record(std::move(value), op, std::span<const Var>(inputs.begin(), inputs.size()),
                      std::move(fn));
    }

    const Tensor& value(Var v) const { return nodes_[v.index].value; }
    const Shape& shape(Var v) const { return nodes_[v.index].value.shape(); }
    bool requires_grad(Var v) const { return nodes_[v.index].requires_grad; }
    std::string_view op(Var v) const { return nodes_[v.index].op; }
    std::size_t size() const noexcept { return nodes_.size(); }

    /// Gradient buffer of `v`, zero-initialised on first access.
    Tensor& grad(Var v);

    /// Seeds d(loss)/d(loss) = 1 and runs every recorded op backwards.
    /// Returns the node indices of the ops visited, in visiting order.
    /// Throws ContractError if loss is not a single element.
    std::vector<std::size_t> backward(Var loss);

private:
    struct Node {
        Tensor value;
        Tensor grad;
        std::string op;
        BackwardFn backward;
        Parameter* param = nullptr;
        bool requires_grad = false;
    };

    std::vector<Node> nodes_;
    bool grad_enabled_;
};

}  // namespace forchestra::nn
