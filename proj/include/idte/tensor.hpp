#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "idte/error.hpp"

namespace idte {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& shape);

/// Dense row-major array of doubles with an optional gradient buffer.
///
/// Every op in this library works on rank <= 2 tensors. A rank-1 tensor of
/// length n is viewed as a 1 x n matrix and a rank-0 tensor as 1 x 1.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::vector<double> data);

    static Tensor scalar(double value) { return Tensor({1, 1}, {value}); }
    static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> data) {
        return Tensor({rows, cols}, std::move(data));
    }

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }
    std::size_t rows() const;
    std::size_t cols() const;

    std::span<double> data() { return data_; }
    std::span<const double> data() const { return data_; }
    std::vector<double>& vec() { return data_; }
    const std::vector<double>& vec() const { return data_; }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }
    double item() const;

    bool has_grad() const { return grad_.has_value(); }
    std::vector<double>& grad();
    const std::vector<double>& grad() const;
    void zero_grad();
    void drop_grad() { grad_.reset(); }

    bool all_finite() const;
    bool operator==(const Tensor& other) const { return shape_ == other.shape_ && data_ == other.data_; }

private:
    Shape shape_;
    std::vector<double> data_;
    std::optional<std::vector<double>> grad_;
};

/// Named parameter set of a model. Ordered by name so iteration is stable.
struct ModelParams {
    std::map<std::string, Tensor> tensors;
    std::uint64_t version = 0;

    const Tensor& at(const std::string& name) const;
    Tensor& at(const std::string& name);
    bool contains(const std::string& name) const { return tensors.count(name) != 0; }
    std::size_t element_count() const;
};

using GradientMap = std::map<std::string, Tensor>;

class Tape;

/// Handle to a value recorded on a Tape.
class Var {
public:
    Var() = default;
    Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

    const Tensor& value() const;
    const Shape& shape() const { return value().shape(); }
    std::size_t rows() const { return value().rows(); }
    std::size_t cols() const { return value().cols(); }
    Tape& tape() const { return *tape_; }
    std::size_t id() const { return id_; }
    bool valid() const { return tape_ != nullptr; }

private:
    Tape* tape_ = nullptr;
    std::size_t id_ = 0;
};

/// Reverse-mode computation tape. Nodes are appended in evaluation order, so
/// parents always precede children and a single reverse sweep suffices.
///
/// A tape is not thread-safe; use one per thread.
class Tape {
public:
    using GradBuffers = std::vector<std::vector<double>>;
    using BackwardFn = std::function<void(std::span<const double> grad_out, GradBuffers& grads)>;

    Var constant(Tensor value);
    /// Binds a named parameter. Binding the same name twice returns the same
    /// node, so gradients from every usage site accumulate into one buffer.
    Var param(const std::string& name, const Tensor& value);
    Var record(Tensor value, std::vector<std::size_t> parents, BackwardFn backward);

    /// Gradient of a scalar node w.r.t. every bound parameter. When `all` is
    /// given, parameters never bound to this tape are reported with zeros.
    GradientMap backward(Var loss, const ModelParams* all = nullptr);

    const Tensor& value(std::size_t id) const { return nodes_[id].value; }
    bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
    std::size_t size() const { return nodes_.size(); }

    /// Returns the gradient buffer of `id`, allocating zeros on first use.
    std::vector<double>& grad_of(GradBuffers& grads, std::size_t id) const;

private:
    struct Node {
        Tensor value;
        std::vector<std::size_t> parents;
        BackwardFn backward;
        std::string param_name;
        bool requires_grad = false;
    };
    std::vector<Node> nodes_;
    std::unordered_map<std::string, std::size_t> param_ids_;
};

enum class OpKind {
    matmul,
    add,
    elementwise_mul,
    softmax_rows,
    layer_norm,
    gelu,
    sigmoid,
    embedding_lookup,
    concat_rows,
    mean_rows,
};

std::string to_string(OpKind kind);

inline constexpr double kLayerNormEps = 1e-5;

namespace ops {

Var matmul(Var a, Var b);
/// Elementwise sum. `b` may also be a single row broadcast over the rows of `a`.
Var add(Var a, Var b);
/// Elementwise product, with the same row broadcast rule as add().
Var mul(Var a, Var b);
Var softmax_rows(Var x);
/// Normalizes each row to zero mean and unit population variance.
Var layer_norm(Var x, double eps = kLayerNormEps);
/// tanh approximation.
Var gelu(Var x);
Var sigmoid(Var x);
Var embedding_lookup(Var table, std::span<const int> ids);
Var concat_rows(std::span<const Var> parts);
Var mean_rows(Var x);

Var transpose(Var x);
Var scale(Var x, double factor);
Var slice_rows(Var x, std::size_t begin, std::size_t count);
Var slice_cols(Var x, std::size_t begin, std::size_t count);
Var concat_cols(std::span<const Var> parts);
Var reshape(Var x, Shape shape);
Var sum(Var x);

}  // namespace ops

/// Dispatches one of the named kernels. embedding_lookup takes the table and a
/// tensor of integral ids; concat_rows takes any number of operands.
Var tensor_op(OpKind kind, std::span<const Var> operands);

}  // namespace idte
