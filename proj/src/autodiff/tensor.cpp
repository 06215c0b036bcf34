#include "latpoison/autodiff/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <functional>
#include <unordered_set>

namespace latpoison::ad {

namespace {

std::uint64_t next_id() {
    static std::atomic<std::uint64_t> counter{1};
    return counter.fetch_add(1, std::memory_order_relaxed);
}

}  // namespace

std::string to_string(const Shape& shape) {
    std::string out = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i > 0) {
            out += "x";
        }
        out += std::to_string(shape[i]);
    }
    return out + "]";
}

std::size_t element_count(const Shape& shape) {
    std::size_t n = 1;
    for (auto d : shape) {
        n *= d;
    }
    return n;
}

ShapeError::ShapeError(const std::string& op, const Shape& lhs, const Shape& rhs)
    : std::invalid_argument(op + ": shape " + to_string(lhs) + " does not conform with " +
                            to_string(rhs)) {}

ShapeError::ShapeError(const std::string& op, const std::string& detail)
    : std::invalid_argument(op + ": " + detail) {}

std::vector<double>& Node::grad_buffer() {
    if (grad.size() != value.size()) {
        grad.assign(value.size(), 0.0);
    }
    return grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    const auto n = element_count(shape);
    return from(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
    for (auto d : shape) {
        if (d == 0) {
            throw ShapeError("tensor", "zero-sized dimension in " + to_string(shape));
        }
    }
    if (element_count(shape) != values.size()) {
        throw ShapeError("tensor", "shape " + to_string(shape) + " needs " +
                                       std::to_string(element_count(shape)) + " values, got " +
                                       std::to_string(values.size()));
    }
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->value = std::move(values);
    node->requires_grad = requires_grad;
    node->id = next_id();
    return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
    return from({1}, {value}, requires_grad);
}

const Shape& Tensor::shape() const { return node_->shape; }

std::size_t Tensor::size() const { return node_->value.size(); }

std::size_t Tensor::dim(std::size_t axis) const {
    if (axis >= node_->shape.size()) {
        throw ShapeError("dim", "axis " + std::to_string(axis) + " out of range for " +
                                    to_string(node_->shape));
    }
    return node_->shape[axis];
}

std::span<const double> Tensor::values() const& { return node_->value; }

std::span<double> Tensor::mutable_values() & { return node_->value; }

double Tensor::item() const {
    if (node_->value.size() != 1) {
        throw ShapeError("item", "tensor " + to_string(node_->shape) + " is not a scalar");
    }
    return node_->value[0];
}

bool Tensor::requires_grad() const { return node_->requires_grad; }

Tensor& Tensor::set_requires_grad(bool flag) {
    node_->requires_grad = flag;
    return *this;
}

std::span<const double> Tensor::grad() const& { return node_->grad; }

bool Tensor::has_grad() const { return !node_->grad.empty(); }

void Tensor::zero_grad() { std::fill(node_->grad.begin(), node_->grad.end(), 0.0); }

const std::string& Tensor::name() const { return node_->name; }

Tensor& Tensor::set_name(std::string name) {
    node_->name = std::move(name);
    return *this;
}

std::uint64_t Tensor::id() const { return node_->id; }

Tensor Tensor::clone() const {
    auto copy = from(node_->shape, node_->value, node_->requires_grad);
    copy.node_->name = node_->name;
    return copy;
}

Tensor Tensor::detach() const { return from(node_->shape, node_->value, false); }

Tensor Tensor::make_result(Shape shape, std::vector<double> values, std::vector<Tensor> parents,
                           std::function<void(Node&)> backward_fn) {
    Tensor out = from(std::move(shape), std::move(values), false);
    const bool any = std::any_of(parents.begin(), parents.end(),
                                 [](const Tensor& p) { return p.requires_grad(); });
    if (any) {
        out.node_->requires_grad = true;
        out.node_->parents.reserve(parents.size());
        for (auto& p : parents) {
            out.node_->parents.push_back(p.node_);
        }
        out.node_->backward_fn = std::move(backward_fn);
    }
    return out;
}

void Tensor::backward() const {
    if (node_->value.size() != 1) {
        throw ShapeError("backward", "loss must be a scalar, got " + to_string(node_->shape));
    }
    // Iterative post-order DFS gives a topological order.
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(node_.get(), 0);
    visited.insert(node_.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node* parent = node->parents[next++].get();
            if (parent->requires_grad && visited.insert(parent).second) {
                stack.emplace_back(parent, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    for (Node* node : order) {
        if (node->backward_fn) {
            auto& g = node->grad_buffer();
            std::fill(g.begin(), g.end(), 0.0);
        }
    }
    node_->grad_buffer()[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* node = *it;
        if (node->backward_fn) {
            node->backward_fn(*node);
        }
    }
}

}  // namespace latpoison::ad
