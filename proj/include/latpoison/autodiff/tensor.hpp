#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace latpoison::ad {

using Shape = std::vector<std::size_t>;

std::string to_string(const Shape& shape);
std::size_t element_count(const Shape& shape);

// Raised when operand shapes do not conform; the message names both shapes.
class ShapeError : public std::invalid_argument {
  public:
    ShapeError(const std::string& op, const Shape& lhs, const Shape& rhs);
    ShapeError(const std::string& op, const std::string& detail);
};

struct Node;

// Reference handle to a node in a differentiation graph. Copies alias the same
// storage (parameters are shared between a model and the graphs built from
// it); use clone() for an independent copy.
class Tensor {
  public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);

    bool defined() const { return static_cast<bool>(node_); }

    const Shape& shape() const;
    std::size_t size() const;
    std::size_t dim(std::size_t axis) const;

    // Views into the node's storage. Deleted on temporaries, whose storage may
    // die with the handle.
    std::span<const double> values() const&;
    std::span<const double> values() const&& = delete;
    std::span<double> mutable_values() &;
    std::span<double> mutable_values() && = delete;
    double item() const;

    bool requires_grad() const;
    Tensor& set_requires_grad(bool flag);

    // Empty span when no gradient has been accumulated.
    std::span<const double> grad() const&;
    std::span<const double> grad() const&& = delete;
    bool has_grad() const;
    void zero_grad();

    const std::string& name() const;
    Tensor& set_name(std::string name);

    std::uint64_t id() const;

    // Populates grad() of every reachable tensor with d(this)/d(tensor).
    // Leaf gradients accumulate across calls until zero_grad(); intermediate
    // gradients are recomputed on every call.
    void backward() const;

    Tensor clone() const;
    Tensor detach() const;

    // Op construction. `parents` must all be defined; the node records them only
    // when at least one requires a gradient.
    static Tensor make_result(Shape shape, std::vector<double> values,
                              std::vector<Tensor> parents,
                              std::function<void(Node&)> backward_fn);

    std::shared_ptr<Node> node() const { return node_; }

  private:
    explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

    std::shared_ptr<Node> node_;
};

struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    // Reads this node's grad and accumulates into the parents' grads.
    std::function<void(Node&)> backward_fn;
    std::string name;
    std::uint64_t id = 0;

    // Lazily allocates grad to match value.
    std::vector<double>& grad_buffer();
};

}  // namespace latpoison::ad
