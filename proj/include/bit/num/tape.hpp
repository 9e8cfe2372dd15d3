#pragma once

#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include "bit/num/array.hpp"

namespace bit::num {

// One node of the reverse-mode graph. `backward` scatters the node's grad
// into its inputs' grads; inputs are kept alive by the shared_ptr vector.
struct Node {
    Array value;
    Array grad;  // allocated on first accumulation
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> inputs;
    std::function<void(Node&)> backward;
    const char* op = "leaf";

    void ensure_grad() {
        if (grad.size() != value.size()) grad = Array(value.shape());
    }

    void accumulate(const Array& g) {
        ensure_grad();
        const double* src = g.data();
        double* dst = grad.data();
        for (int64_t i = 0; i < grad.size(); ++i) dst[i] += src[i];
    }
};

// Cheap handle to a graph node. Copying shares the node.
class Tensor {
public:
    Tensor() = default;

    static Tensor leaf(Array v, bool requires_grad = false) {
        Tensor t;
        t.n_ = std::make_shared<Node>();
        t.n_->value = std::move(v);
        t.n_->requires_grad = requires_grad;
        return t;
    }

    static Tensor make(Array v, std::vector<Tensor> inputs, std::function<void(Node&)> bw,
                       const char* op) {
        Tensor t;
        t.n_ = std::make_shared<Node>();
        t.n_->value = std::move(v);
        t.n_->op = op;
        bool rg = false;
        t.n_->inputs.reserve(inputs.size());
        for (auto& in : inputs) {
            rg = rg || in.n_->requires_grad;
            t.n_->inputs.push_back(in.n_);
        }
        t.n_->requires_grad = rg;
        if (rg) t.n_->backward = std::move(bw);
        return t;
    }

    bool defined() const { return n_ != nullptr; }
    const Array& value() const { return n_->value; }
    Array& value() { return n_->value; }
    const Array& grad() const { return n_->grad; }
    bool requires_grad() const { return n_ && n_->requires_grad; }
    Node* node() const { return n_.get(); }
    const std::shared_ptr<Node>& ptr() const { return n_; }

    void zero_grad() {
        if (n_) {
            n_->ensure_grad();
            n_->grad.fill(0.0);
        }
    }

    double item() const {
        if (n_->value.size() != 1) throw NumericError("item() on non-scalar tensor");
        return n_->value[0];
    }

private:
    std::shared_ptr<Node> n_;
};

// Runs reverse-mode accumulation from a scalar loss. Topological order is
// rebuilt per call (graphs are throwaway, parameters persist as leaves).
void backward(const Tensor& loss);

}  // namespace bit::num
