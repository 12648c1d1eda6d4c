#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "groupseg/errors.hpp"

namespace groupseg {

using Shape = std::vector<std::int64_t>;

std::int64_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);
bool shapes_equal(const Shape& a, const Shape& b);

// One value in the computation graph. Parents are the operation's inputs;
// `backprop` accumulates this node's gradient into theirs. Nodes carry a
// global construction counter: reverse counter order is a topological order
// of any graph, which makes the backward pass deterministic.
struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;  // allocated on first use in a backward pass
    bool requires_grad = false;
    std::uint64_t seq = 0;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backprop;

    std::int64_t numel() const { return static_cast<std::int64_t>(value.size()); }
    void ensure_grad();
};

// Value-semantics handle to a graph node. Copying a Tensor aliases the node.
class Tensor {
public:
    Tensor() = default;

    static Tensor from_data(Shape shape, std::vector<double> data,
                            bool requires_grad = false);
    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double v, bool requires_grad = false);
    static Tensor scalar(double v, bool requires_grad = false);

    bool defined() const { return node != nullptr; }
    const Shape& shape() const { return node->shape; }
    int rank() const { return static_cast<int>(node->shape.size()); }
    std::int64_t numel() const { return node->numel(); }
    std::int64_t dim(int i) const;  // negative indices count from the back
    bool requires_grad() const { return node->requires_grad; }

    const std::vector<double>& value() const { return node->value; }
    // In-place access for leaves (parameter updates, test perturbations).
    std::vector<double>& mutable_value();
    const std::vector<double>& grad() const;
    bool has_grad() const { return !node->grad.empty(); }

    double item() const;                        // scalar tensors only
    double at(const std::vector<std::int64_t>& idx) const;

    // Reverse-mode sweep from a scalar root. Visits each reachable node
    // exactly once, in reverse construction order, accumulating gradients
    // into every node with requires_grad set.
    void backward();

    void zero_grad();

    std::shared_ptr<Node> node;

    explicit Tensor(std::shared_ptr<Node> n) : node(std::move(n)) {}
};

// Allocates a node for an op result. requires_grad is inherited from parents.
Tensor make_op_node(Shape shape, std::vector<double> value,
                    std::vector<std::shared_ptr<Node>> parents,
                    std::function<void(Node&)> backprop);

}  // namespace groupseg
