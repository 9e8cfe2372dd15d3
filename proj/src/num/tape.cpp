#include "bit/num/tape.hpp"

#include <unordered_set>
#include <vector>

namespace bit::num {

void backward(const Tensor& loss) {
    if (!loss.defined()) throw NumericError("backward() on undefined tensor");
    if (loss.value().size() != 1) throw NumericError("backward() requires a scalar loss");
    if (!loss.requires_grad()) return;

    // Iterative post-order DFS over the requires_grad subgraph.
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    struct Frame {
        Node* node;
        size_t next_input;
    };
    std::vector<Frame> stack;
    stack.push_back({loss.node(), 0});
    visited.insert(loss.node());
    while (!stack.empty()) {
        Frame& f = stack.back();
        if (f.next_input < f.node->inputs.size()) {
            Node* in = f.node->inputs[f.next_input++].get();
            if (in->requires_grad && !visited.count(in)) {
                visited.insert(in);
                stack.push_back({in, 0});
            }
        } else {
            order.push_back(f.node);
            stack.pop_back();
        }
    }

    loss.node()->ensure_grad();
    loss.node()->grad[0] += 1.0;

    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backward) n->backward(*n);
    }
}

}  // namespace bit::num
