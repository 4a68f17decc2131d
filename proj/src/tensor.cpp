#include "idte/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace idte {

namespace {

std::size_t shape_product(const Shape& shape) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

void check_finite(const Tensor& t, const char* op) {
    if (!t.all_finite()) throw NumericError(std::string("non-finite output from ") + op);
}

[[noreturn]] void dim_error(const char* op, const Shape& a, const Shape& b) {
    throw DimensionError(std::string(op) + ": incompatible shapes " + shape_str(a) + " and " + shape_str(b));
}

// True when b matches a exactly or is a single row of a's width.
bool row_broadcastable(const Tensor& a, const Tensor& b) {
    if (a.shape() == b.shape()) return true;
    return b.rows() == 1 && b.cols() == a.cols();
}

}  // namespace

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ',';
        os << shape[i];
    }
    os << ')';
    return os.str();
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), data_(shape_product(shape_), fill) {
    for (auto d : shape_)
        if (d == 0) throw DimensionError("tensor dimensions must be positive, got " + shape_str(shape_));
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
    for (auto d : shape_)
        if (d == 0) throw DimensionError("tensor dimensions must be positive, got " + shape_str(shape_));
    if (shape_product(shape_) != data_.size())
        throw DimensionError("shape " + shape_str(shape_) + " does not match " + std::to_string(data_.size()) +
                             " values");
}

std::size_t Tensor::rows() const {
    if (shape_.size() > 2) throw DimensionError("rank > 2 tensor has no matrix view: " + shape_str(shape_));
    return shape_.size() == 2 ? shape_[0] : 1;
}

std::size_t Tensor::cols() const {
    if (shape_.empty()) return 1;
    return shape_.back();
}

double Tensor::item() const {
    if (data_.size() != 1) throw ContractError("item() on non-scalar tensor " + shape_str(shape_));
    return data_[0];
}

std::vector<double>& Tensor::grad() {
    if (!grad_) grad_.emplace(data_.size(), 0.0);
    return *grad_;
}

const std::vector<double>& Tensor::grad() const {
    if (!grad_) throw ContractError("tensor has no gradient buffer");
    return *grad_;
}

void Tensor::zero_grad() { grad_.emplace(data_.size(), 0.0); }

bool Tensor::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

const Tensor& ModelParams::at(const std::string& name) const {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw ContractError("unknown parameter '" + name + "'");
    return it->second;
}

Tensor& ModelParams::at(const std::string& name) {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw ContractError("unknown parameter '" + name + "'");
    return it->second;
}

std::size_t ModelParams::element_count() const {
    std::size_t n = 0;
    for (const auto& [_, t] : tensors) n += t.size();
    return n;
}

const Tensor& Var::value() const { return tape_->value(id_); }

// ---------------------------------------------------------------------------
// Tape

Var Tape::constant(Tensor value) {
    nodes_.push_back(Node{std::move(value), {}, {}, {}, false});
    return Var(this, nodes_.size() - 1);
}

Var Tape::param(const std::string& name, const Tensor& value) {
    if (auto it = param_ids_.find(name); it != param_ids_.end()) return Var(this, it->second);
    nodes_.push_back(Node{value, {}, {}, name, true});
    nodes_.back().value.drop_grad();
    param_ids_.emplace(name, nodes_.size() - 1);
    return Var(this, nodes_.size() - 1);
}

Var Tape::record(Tensor value, std::vector<std::size_t> parents, BackwardFn backward) {
    const std::size_t id = nodes_.size();
    bool needs = false;
    for (auto p : parents) {
        if (p >= id) throw std::logic_error("tape cycle: node " + std::to_string(id) + " references " + std::to_string(p));
        needs = needs || nodes_[p].requires_grad;
    }
    if (!needs) backward = nullptr;
    nodes_.push_back(Node{std::move(value), std::move(parents), std::move(backward), {}, needs});
    return Var(this, id);
}

std::vector<double>& Tape::grad_of(GradBuffers& grads, std::size_t id) const {
    auto& g = grads[id];
    if (g.empty()) g.assign(nodes_[id].value.size(), 0.0);
    return g;
}

GradientMap Tape::backward(Var loss, const ModelParams* all) {
    if (loss.valid() && &loss.tape() != this) throw ContractError("backward: loss belongs to another tape");
    const auto& lv = nodes_.at(loss.id()).value;
    if (lv.size() != 1) throw ContractError("backward: loss must be scalar, got shape " + shape_str(lv.shape()));

    GradBuffers grads(nodes_.size());
    grads[loss.id()] = {1.0};
    for (std::size_t i = loss.id() + 1; i-- > 0;) {
        auto& node = nodes_[i];
        if (grads[i].empty() || !node.backward) continue;
        for (auto p : node.parents)
            if (p >= i) throw std::logic_error("tape cycle detected at node " + std::to_string(i));
        node.backward(grads[i], grads);
    }

    GradientMap out;
    for (const auto& [name, id] : param_ids_) {
        const auto& v = nodes_[id].value;
        if (grads[id].empty())
            out.emplace(name, Tensor(v.shape(), 0.0));
        else
            out.emplace(name, Tensor(v.shape(), std::move(grads[id])));
    }
    if (all) {
        for (const auto& [name, t] : all->tensors)
            if (!out.count(name)) out.emplace(name, Tensor(t.shape(), 0.0));
    }
    return out;
}

std::string to_string(OpKind kind) {
    switch (kind) {
        case OpKind::matmul: return "matmul";
        case OpKind::add: return "add";
        case OpKind::elementwise_mul: return "elementwise_mul";
        case OpKind::softmax_rows: return "softmax_rows";
        case OpKind::layer_norm: return "layer_norm";
        case OpKind::gelu: return "gelu";
        case OpKind::sigmoid: return "sigmoid";
        case OpKind::embedding_lookup: return "embedding_lookup";
        case OpKind::concat_rows: return "concat_rows";
        case OpKind::mean_rows: return "mean_rows";
    }
    return "unknown";
}

// ---------------------------------------------------------------------------
// Kernels

namespace ops {

namespace {

Tape& same_tape(Var a, Var b, const char* op) {
    if (&a.tape() != &b.tape()) throw ContractError(std::string(op) + ": operands on different tapes");
    return a.tape();
}

}  // namespace

Var matmul(Var a, Var b) {
    Tape& tape = same_tape(a, b, "matmul");
    const Tensor& A = a.value();
    const Tensor& B = b.value();
    const std::size_t m = A.rows(), k = A.cols(), n = B.cols();
    if (B.rows() != k) dim_error("matmul", A.shape(), B.shape());

    Tensor out({m, n}, 0.0);
    const double* pa = A.data().data();
    const double* pb = B.data().data();
    double* po = out.data().data();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
            const double av = pa[i * k + p];
            const double* brow = pb + p * n;
            double* orow = po + i * n;
            for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
    check_finite(out, "matmul");

    const std::size_t ia = a.id(), ib = b.id();
    return tape.record(std::move(out), {ia, ib}, [&tape, ia, ib, m, k, n](std::span<const double> go, Tape::GradBuffers& grads) {
        const double* pa = tape.value(ia).data().data();
        const double* pb = tape.value(ib).data().data();
        if (tape.requires_grad(ia)) {
            // dA = dO * B^T
            auto& ga = tape.grad_of(grads, ia);
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t p = 0; p < k; ++p) {
                    const double* brow = pb + p * n;
                    const double* grow = go.data() + i * n;
                    double s = 0.0;
                    for (std::size_t j = 0; j < n; ++j) s += grow[j] * brow[j];
                    ga[i * k + p] += s;
                }
        }
        if (tape.requires_grad(ib)) {
            // dB = A^T * dO
            auto& gb = tape.grad_of(grads, ib);
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t p = 0; p < k; ++p) {
                    const double av = pa[i * k + p];
                    const double* grow = go.data() + i * n;
                    double* gbrow = gb.data() + p * n;
                    for (std::size_t j = 0; j < n; ++j) gbrow[j] += av * grow[j];
                }
        }
    });
}

Var add(Var a, Var b) {
    Tape& tape = same_tape(a, b, "add");
    const Tensor& A = a.value();
    const Tensor& B = b.value();
    if (!row_broadcastable(A, B)) dim_error("add", A.shape(), B.shape());
    const bool bcast = A.shape() != B.shape();
    const std::size_t n = A.cols();

    Tensor out = A;
    out.drop_grad();
    auto od = out.data();
    auto bd = B.data();
    for (std::size_t i = 0; i < od.size(); ++i) od[i] += bd[bcast ? i % n : i];
    check_finite(out, "add");

    const std::size_t ia = a.id(), ib = b.id();
    return tape.record(std::move(out), {ia, ib}, [&tape, ia, ib, bcast, n](std::span<const double> go, Tape::GradBuffers& grads) {
        if (tape.requires_grad(ia)) {
            auto& ga = tape.grad_of(grads, ia);
            for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i];
        }
        if (tape.requires_grad(ib)) {
            auto& gb = tape.grad_of(grads, ib);
            for (std::size_t i = 0; i < go.size(); ++i) gb[bcast ? i % n : i] += go[i];
        }
    });
}

Var mul(Var a, Var b) {
    Tape& tape = same_tape(a, b, "elementwise_mul");
    const Tensor& A = a.value();
    const Tensor& B = b.value();
    if (!row_broadcastable(A, B)) dim_error("elementwise_mul", A.shape(), B.shape());
    const bool bcast = A.shape() != B.shape();
    const std::size_t n = A.cols();

    Tensor out = A;
    out.drop_grad();
    auto od = out.data();
    auto bd = B.data();
    for (std::size_t i = 0; i < od.size(); ++i) od[i] *= bd[bcast ? i % n : i];
    check_finite(out, "elementwise_mul");

    const std::size_t ia = a.id(), ib = b.id();
    return tape.record(std::move(out), {ia, ib}, [&tape, ia, ib, bcast, n](std::span<const double> go, Tape::GradBuffers& grads) {
        auto ad = tape.value(ia).data();
        auto bd = tape.value(ib).data();
        if (tape.requires_grad(ia)) {
            auto& ga = tape.grad_of(grads, ia);
            for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i] * bd[bcast ? i % n : i];
        }
        if (tape.requires_grad(ib)) {
            auto& gb = tape.grad_of(grads, ib);
            for (std::size_t i = 0; i < go.size(); ++i) gb[bcast ? i % n : i] += go[i] * ad[i];
        }
    });
}

Var softmax_rows(Var x) {
    Tape& tape = x.tape();
    const Tensor& X = x.value();
    const std::size_t m = X.rows(), n = X.cols();
    Tensor out({m, n}, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        const double* xr = X.data().data() + i * n;
        double* yr = out.data().data() + i * n;
        const double mx = *std::max_element(xr, xr + n);
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            yr[j] = std::exp(xr[j] - mx);
            s += yr[j];
        }
        for (std::size_t j = 0; j < n; ++j) yr[j] /= s;
    }
    check_finite(out, "softmax_rows");

    const std::size_t ix = x.id();
    if (!tape.requires_grad(ix)) return tape.record(std::move(out), {ix}, nullptr);
    std::vector<double> y = out.vec();
    return tape.record(std::move(out), {ix}, [&tape, ix, y = std::move(y), m, n](std::span<const double> go, Tape::GradBuffers& grads) {
        auto& gx = tape.grad_of(grads, ix);
        for (std::size_t i = 0; i < m; ++i) {
            double dot = 0.0;
            for (std::size_t j = 0; j < n; ++j) dot += go[i * n + j] * y[i * n + j];
            for (std::size_t j = 0; j < n; ++j) gx[i * n + j] += y[i * n + j] * (go[i * n + j] - dot);
        }
    });
}

Var layer_norm(Var x, double eps) {
    Tape& tape = x.tape();
    const Tensor& X = x.value();
    const std::size_t m = X.rows(), n = X.cols();
    Tensor out({m, n}, 0.0);
    std::vector<double> inv_std(m);
    for (std::size_t i = 0; i < m; ++i) {
        const double* xr = X.data().data() + i * n;
        double* yr = out.data().data() + i * n;
        double mean = 0.0;
        for (std::size_t j = 0; j < n; ++j) mean += xr[j];
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t j = 0; j < n; ++j) var += (xr[j] - mean) * (xr[j] - mean);
        var /= static_cast<double>(n);
        inv_std[i] = 1.0 / std::sqrt(var + eps);
        for (std::size_t j = 0; j < n; ++j) yr[j] = (xr[j] - mean) * inv_std[i];
    }
    check_finite(out, "layer_norm");

    const std::size_t ix = x.id();
    if (!tape.requires_grad(ix)) return tape.record(std::move(out), {ix}, nullptr);
    Tensor y = out;
    return tape.record(std::move(out), {ix},
                       [&tape, ix, y = std::move(y), inv_std = std::move(inv_std), m, n](std::span<const double> go, Tape::GradBuffers& grads) {
                           auto& gx = tape.grad_of(grads, ix);
                           auto yd = y.data();
                           for (std::size_t i = 0; i < m; ++i) {
                               double mg = 0.0, mgy = 0.0;
                               for (std::size_t j = 0; j < n; ++j) {
                                   mg += go[i * n + j];
                                   mgy += go[i * n + j] * yd[i * n + j];
                               }
                               mg /= static_cast<double>(n);
                               mgy /= static_cast<double>(n);
                               for (std::size_t j = 0; j < n; ++j)
                                   gx[i * n + j] += inv_std[i] * (go[i * n + j] - mg - yd[i * n + j] * mgy);
                           }
                       });
}

Var gelu(Var x) {
    static const double k = std::sqrt(2.0 / M_PI);
    constexpr double c = 0.044715;
    Tape& tape = x.tape();
    Tensor out = x.value();
    out.drop_grad();
    for (auto& v : out.data()) v = 0.5 * v * (1.0 + std::tanh(k * (v + c * v * v * v)));
    check_finite(out, "gelu");

    const std::size_t ix = x.id();
    return tape.record(std::move(out), {ix}, [&tape, ix](std::span<const double> go, Tape::GradBuffers& grads) {
        auto xd = tape.value(ix).data();
        auto& gx = tape.grad_of(grads, ix);
        for (std::size_t i = 0; i < go.size(); ++i) {
            const double v = xd[i];
            const double t = std::tanh(k * (v + c * v * v * v));
            const double d = 0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * k * (1.0 + 3.0 * c * v * v);
            gx[i] += go[i] * d;
        }
    });
}

Var sigmoid(Var x) {
    Tape& tape = x.tape();
    Tensor out = x.value();
    out.drop_grad();
    for (auto& v : out.data()) {
        if (v >= 0) {
            v = 1.0 / (1.0 + std::exp(-v));
        } else {
            const double e = std::exp(v);
            v = e / (1.0 + e);
        }
    }
    check_finite(out, "sigmoid");

    const std::size_t ix = x.id();
    if (!tape.requires_grad(ix)) return tape.record(std::move(out), {ix}, nullptr);
    std::vector<double> y = out.vec();
    return tape.record(std::move(out), {ix}, [&tape, ix, y = std::move(y)](std::span<const double> go, Tape::GradBuffers& grads) {
        auto& gx = tape.grad_of(grads, ix);
        for (std::size_t i = 0; i < go.size(); ++i) gx[i] += go[i] * y[i] * (1.0 - y[i]);
    });
}

Var embedding_lookup(Var table, std::span<const int> ids) {
    Tape& tape = table.tape();
    const Tensor& T = table.value();
    const std::size_t vocab = T.rows(), d = T.cols();
    if (ids.empty()) throw DimensionError("embedding_lookup: empty id list");
    Tensor out({ids.size(), d}, 0.0);
    for (std::size_t r = 0; r < ids.size(); ++r) {
        if (ids[r] < 0 || static_cast<std::size_t>(ids[r]) >= vocab)
            throw DimensionError("embedding_lookup: id " + std::to_string(ids[r]) + " outside table " + shape_str(T.shape()));
        std::copy_n(T.data().data() + static_cast<std::size_t>(ids[r]) * d, d, out.data().data() + r * d);
    }
    const std::size_t it = table.id();
    std::vector<int> idv(ids.begin(), ids.end());
    return tape.record(std::move(out), {it}, [&tape, it, idv = std::move(idv), d](std::span<const double> go, Tape::GradBuffers& grads) {
        auto& gt = tape.grad_of(grads, it);
        for (std::size_t r = 0; r < idv.size(); ++r)
            for (std::size_t j = 0; j < d; ++j) gt[static_cast<std::size_t>(idv[r]) * d + j] += go[r * d + j];
    });
}

Var concat_rows(std::span<const Var> parts) {
    if (parts.empty()) throw DimensionError("concat_rows: no operands");
    Tape& tape = parts[0].tape();
    const std::size_t n = parts[0].cols();
    std::size_t m = 0;
    std::vector<std::size_t> ids, offsets;
    for (const auto& p : parts) {
        if (&p.tape() != &tape) throw ContractError("concat_rows: operands on different tapes");
        if (p.cols() != n) dim_error("concat_rows", parts[0].shape(), p.shape());
        ids.push_back(p.id());
        offsets.push_back(m * n);
        m += p.rows();
    }
    Tensor out({m, n}, 0.0);
    for (std::size_t i = 0; i < parts.size(); ++i) {
        auto src = parts[i].value().data();
        std::copy(src.begin(), src.end(), out.data().begin() + static_cast<std::ptrdiff_t>(offsets[i]));
    }
    return tape.record(std::move(out), ids, [&tape, ids, offsets](std::span<const double> go, Tape::GradBuffers& grads) {
        for (std::size_t i = 0; i < ids.size(); ++i) {
            if (!tape.requires_grad(ids[i])) continue;
            auto& g = tape.grad_of(grads, ids[i]);
            for (std::size_t j = 0; j < g.size(); ++j) g[j] += go[offsets[i] + j];
        }
    });
}

Var mean_rows(Var x) {
    Tape& tape = x.tape();
    const Tensor& X = x.value();
    const std::size_t m = X.rows(), n = X.cols();
    Tensor out({1, n}, 0.0);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out.data()[j] += X(i, j);
    for (auto& v : out.data()) v /= static_cast<double>(m);
    const std::size_t ix = x.id();
    return tape.record(std::move(out), {ix}, [&tape, ix, m, n](std::span<const double> go, Tape::GradBuffers& grads) {
        auto& gx = tape.grad_of(grads, ix);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) gx[i * n + j] += go[j] / static_cast<double>(m);
    });
}

Var transpose(Var x) {
    Tape& tape = x.tape();
    const Tensor& X = x.value();
    const std::size_t m = X.rows(), n = X.cols();
    Tensor out({n, m}, 0.0);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out(j, i) = X(i, j);
    const std::size_t ix = x.id();
    return tape.record(std::move(out), {ix}, [&tape, ix, m, n](std::span<const double> go, Tape::GradBuffers& grads) {
        auto& gx = tape.grad_of(grads, ix);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) gx[i * n + j] += go[j * m + i];
    });
}

Var scale(Var x, double factor) {
    Tape& tape = x.tape();
    Tensor out = x.value();
    out.drop_grad();
    for (auto& v : out.data()) v *= factor;
    check_finite(out, "scale");
    const std::size_t ix = x.id();
    return tape.record(std::move(out), {ix}, [&tape, ix, factor](std::span<const double> go, Tape::GradBuffers& grads) {
        auto& gx = tape.grad_of(grads, ix);
        for (std::size_t i = 0; i < go.size(); ++i) gx[i] += go[i] * factor;
    });
}

Var slice_rows(Var x, std::size_t begin, std::size_t count) {
    Tape& tape = x.tape();
    const Tensor& X = x.value();
    const std::size_t n = X.cols();
    if (count == 0 || begin + count > X.rows())
        throw DimensionError("slice_rows: [" + std::to_string(begin) + ", +" + std::to_string(count) + ") outside " +
                             shape_str(X.shape()));
    Tensor out({count, n}, std::vector<double>(X.data().begin() + static_cast<std::ptrdiff_t>(begin * n),
                                               X.data().begin() + static_cast<std::ptrdiff_t>((begin + count) * n)));
    const std::size_t ix = x.id();
    return tape.record(std::move(out), {ix}, [&tape, ix, begin, n](std::span<const double> go, Tape::GradBuffers& grads) {
        auto& gx = tape.grad_of(grads, ix);
        for (std::size_t i = 0; i < go.size(); ++i) gx[begin * n + i] += go[i];
    });
}

Var slice_cols(Var x, std::size_t begin, std::size_t count) {
    Tape& tape = x.tape();
    const Tensor& X = x.value();
    const std::size_t m = X.rows(), n = X.cols();
    if (count == 0 || begin + count > n)
        throw DimensionError("slice_cols: [" + std::to_string(begin) + ", +" + std::to_string(count) + ") outside " +
                             shape_str(X.shape()));
    Tensor out({m, count}, 0.0);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < count; ++j) out(i, j) = X(i, begin + j);
    const std::size_t ix = x.id();
    return tape.record(std::move(out), {ix}, [&tape, ix, begin, count, m, n](std::span<const double> go, Tape::GradBuffers& grads) {
        auto& gx = tape.grad_of(grads, ix);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < count; ++j) gx[i * n + begin + j] += go[i * count + j];
    });
}

Var concat_cols(std::span<const Var> parts) {
    if (parts.empty()) throw DimensionError("concat_cols: no operands");
    Tape& tape = parts[0].tape();
    const std::size_t m = parts[0].rows();
    std::size_t n = 0;
    std::vector<std::size_t> ids, offsets, widths;
    for (const auto& p : parts) {
        if (&p.tape() != &tape) throw ContractError("concat_cols: operands on different tapes");
        if (p.rows() != m) dim_error("concat_cols", parts[0].shape(), p.shape());
        ids.push_back(p.id());
        offsets.push_back(n);
        widths.push_back(p.cols());
        n += p.cols();
    }
    Tensor out({m, n}, 0.0);
    for (std::size_t k = 0; k < parts.size(); ++k) {
        const Tensor& P = parts[k].value();
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < widths[k]; ++j) out(i, offsets[k] + j) = P(i, j);
    }
    return tape.record(std::move(out), ids, [&tape, ids, offsets, widths, m, n](std::span<const double> go, Tape::GradBuffers& grads) {
        for (std::size_t k = 0; k < ids.size(); ++k) {
            if (!tape.requires_grad(ids[k])) continue;
            auto& g = tape.grad_of(grads, ids[k]);
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < widths[k]; ++j) g[i * widths[k] + j] += go[i * n + offsets[k] + j];
        }
    });
}

Var reshape(Var x, Shape shape) {
    Tape& tape = x.tape();
    Tensor out(std::move(shape), x.value().vec());
    const std::size_t ix = x.id();
    return tape.record(std::move(out), {ix}, [&tape, ix](std::span<const double> go, Tape::GradBuffers& grads) {
        auto& gx = tape.grad_of(grads, ix);
        for (std::size_t i = 0; i < go.size(); ++i) gx[i] += go[i];
    });
}

Var sum(Var x) {
    Tape& tape = x.tape();
    const auto d = x.value().data();
    const double s = std::accumulate(d.begin(), d.end(), 0.0);
    const std::size_t ix = x.id();
    return tape.record(Tensor::scalar(s), {ix}, [&tape, ix](std::span<const double> go, Tape::GradBuffers& grads) {
        auto& gx = tape.grad_of(grads, ix);
        for (auto& g : gx) g += go[0];
    });
}

}  // namespace ops

Var tensor_op(OpKind kind, std::span<const Var> operands) {
    auto need = [&](std::size_t n) {
        if (operands.size() != n)
            throw DimensionError(to_string(kind) + ": expected " + std::to_string(n) + " operands, got " +
                                 std::to_string(operands.size()));
    };
    switch (kind) {
        case OpKind::matmul: need(2); return ops::matmul(operands[0], operands[1]);
        case OpKind::add: need(2); return ops::add(operands[0], operands[1]);
        case OpKind::elementwise_mul: need(2); return ops::mul(operands[0], operands[1]);
        case OpKind::softmax_rows: need(1); return ops::softmax_rows(operands[0]);
        case OpKind::layer_norm: need(1); return ops::layer_norm(operands[0]);
        case OpKind::gelu: need(1); return ops::gelu(operands[0]);
        case OpKind::sigmoid: need(1); return ops::sigmoid(operands[0]);
        case OpKind::embedding_lookup: {
            need(2);
            std::vector<int> ids;
            for (double v : operands[1].value().data()) {
                if (v != std::floor(v)) throw DimensionError("embedding_lookup: non-integral id " + std::to_string(v));
                ids.push_back(static_cast<int>(v));
            }
            return ops::embedding_lookup(operands[0], ids);
        }
        case OpKind::concat_rows: return ops::concat_rows(operands);
        case OpKind::mean_rows: need(1); return ops::mean_rows(operands[0]);
    }
    throw ContractError("unknown op kind");
}

}  // namespace idte
