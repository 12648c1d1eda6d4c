#include "groupseg/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <unordered_set>

namespace groupseg {

namespace {
std::atomic<std::uint64_t> g_seq{0};
}

std::int64_t shape_numel(const Shape& s) {
    std::int64_t n = 1;
    for (std::int64_t d : s) n *= d;
    return n;
}

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) os << ", ";
        os << s[i];
    }
    os << ']';
    return os.str();
}

bool shapes_equal(const Shape& a, const Shape& b) { return a == b; }

void Node::ensure_grad() {
    if (grad.empty()) grad.assign(value.size(), 0.0);
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data, bool requires_grad) {
    std::int64_t n = shape_numel(shape);
    for (std::int64_t d : shape)
        if (d <= 0) throw dim_error("tensor dims must be positive, got " + shape_str(shape));
    if (n != static_cast<std::int64_t>(data.size()))
        throw dim_error("data size " + std::to_string(data.size()) +
                        " does not match shape " + shape_str(shape));
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->value = std::move(data);
    node->requires_grad = requires_grad;
    node->seq = g_seq.fetch_add(1, std::memory_order_relaxed);
    return Tensor(std::move(node));
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double v, bool requires_grad) {
    std::int64_t n = shape_numel(shape);
    return from_data(std::move(shape), std::vector<double>(static_cast<std::size_t>(n), v),
                     requires_grad);
}

Tensor Tensor::scalar(double v, bool requires_grad) {
    return from_data(Shape{1}, std::vector<double>{v}, requires_grad);
}

std::int64_t Tensor::dim(int i) const {
    int r = rank();
    if (i < 0) i += r;
    if (i < 0 || i >= r)
        throw dim_error("axis " + std::to_string(i) + " out of range for shape " +
                        shape_str(node->shape));
    return node->shape[static_cast<std::size_t>(i)];
}

std::vector<double>& Tensor::mutable_value() {
    if (!node->parents.empty())
        throw dim_error("mutable_value is only valid on leaf tensors");
    return node->value;
}

const std::vector<double>& Tensor::grad() const {
    if (node->grad.empty())
        throw dim_error("no gradient recorded; run backward() first");
    return node->grad;
}

double Tensor::item() const {
    if (numel() != 1)
        throw dim_error("item() requires a single-element tensor, got shape " +
                        shape_str(node->shape));
    return node->value[0];
}

double Tensor::at(const std::vector<std::int64_t>& idx) const {
    if (static_cast<int>(idx.size()) != rank())
        throw dim_error("index rank " + std::to_string(idx.size()) +
                        " does not match tensor rank " + std::to_string(rank()));
    std::int64_t off = 0;
    for (std::size_t i = 0; i < idx.size(); ++i) {
        if (idx[i] < 0 || idx[i] >= node->shape[i])
            throw dim_error("index out of bounds for shape " + shape_str(node->shape));
        off = off * node->shape[i] + idx[i];
    }
    return node->value[static_cast<std::size_t>(off)];
}

void Tensor::zero_grad() {
    node->grad.clear();
}

void Tensor::backward() {
    if (numel() != 1)
        throw dim_error("backward() requires a scalar root, got shape " +
                        shape_str(node->shape));
    if (!node->requires_grad) return;

    // Iterative DFS: collect every reachable node that participates in the
    // gradient computation, then replay in descending construction order.
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<Node*> stack{node.get()};
    seen.insert(node.get());
    while (!stack.empty()) {
        Node* n = stack.back();
        stack.pop_back();
        order.push_back(n);
        for (const auto& p : n->parents) {
            if (p->requires_grad && seen.insert(p.get()).second)
                stack.push_back(p.get());
        }
    }
    std::sort(order.begin(), order.end(),
              [](const Node* a, const Node* b) { return a->seq > b->seq; });

    node->ensure_grad();
    node->grad[0] += 1.0;
    for (Node* n : order) {
        if (n->backprop && !n->grad.empty()) n->backprop(*n);
    }
}

Tensor make_op_node(Shape shape, std::vector<double> value,
                    std::vector<std::shared_ptr<Node>> parents,
                    std::function<void(Node&)> backprop) {
    std::int64_t n = shape_numel(shape);
    if (n != static_cast<std::int64_t>(value.size()))
        throw dim_error("op result size does not match shape " + shape_str(shape));
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->value = std::move(value);
    bool rg = false;
    for (const auto& p : parents) rg = rg || p->requires_grad;
    node->requires_grad = rg;
    if (rg) {
        node->parents = std::move(parents);
        node->backprop = std::move(backprop);
    }
    node->seq = g_seq.fetch_add(1, std::memory_order_relaxed);
    return Tensor(std::move(node));
}

}  // namespace groupseg
