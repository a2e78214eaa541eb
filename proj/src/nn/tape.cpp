#include "forchestra/nn/tape.hpp"

#include <algorithm>

#include "forchestra/error.hpp"

namespace forchestra::nn {

void zero_gradients(const std::vector<Parameter*>& params) {
    for (Parameter* p : params) p->zero_grad();
}

std::size_t parameter_count(const std::vector<Parameter*>& params) {
    std::size_t n = 0;
    for (const Parameter* p : params) n += p->size();
    return n;
}

Var Tape::constant(Tensor value) {
    nodes_.push_back(Node{std::move(value), {}, "constant", {}, nullptr, false});
    return Var{nodes_.size() - 1};
}

Var Tape::parameter(Parameter& p) {
    nodes_.push_back(Node{p.value, {}, "parameter", {}, &p, grad_enabled_});
    return Var{nodes_.size() - 1};
}

Var Tape::record(Tensor value, std::string_view op, std::span<const Var> inputs,
                 BackwardFn fn) {
    bool needs = false;
    if (grad_enabled_) {
        needs = std::any_of(inputs.begin(), inputs.end(),
                            [this](Var v) { return nodes_[v.index].requires_grad; });
    }
    nodes_.push_back(Node{std::move(value), {}, std::string(op),
                          needs ? std::move(fn) : BackwardFn{}, nullptr, needs});
    return Var{nodes_.size() - 1};
}

Tensor& Tape::grad(Var v) {
    Node& n = nodes_[v.index];
    if (n.grad.size() != n.value.size() || n.grad.shape() != n.value.shape()) {
        n.grad = Tensor(n.value.shape());
    }
    return n.grad;
}

std::vector<std::size_t> Tape::backward(Var loss) {
    if (nodes_[loss.index].value.size() != 1) {
        throw ContractError("backward() needs a scalar loss, got shape " +
                            to_string(nodes_[loss.index].value.shape()));
    }
    std::vector<std::size_t> visited;
    if (!nodes_[loss.index].requires_grad) return visited;

    grad(loss).fill(1.0);
    for (std::size_t i = loss.index + 1; i-- > 0;) {
        Node& n = nodes_[i];
        if (!n.requires_grad || n.grad.empty()) continue;
        if (n.backward) {
            n.backward(*this, Var{i});
            visited.push_back(i);
        } else if (n.param != nullptr) {
            auto dst = n.param->grad.data();
            auto src = n.grad.data();
            for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
        }
    }
    return visited;
}

}  // namespace forchestra::nn
