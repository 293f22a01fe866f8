#include "gcl/tensor.h"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "gcl/errors.h"

namespace gcl {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), data_(std::move(values)) {
    if (data_.size() != rows * cols) {
        std::ostringstream os;
        os << "Matrix: " << data_.size() << " values for shape [" << rows << "x" << cols << "]";
        throw ShapeError(os.str());
    }
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows.begin()->size();
    std::vector<double> values;
    values.reserve(r * c);
    for (const auto& row : rows) {
        if (row.size() != c) throw ShapeError("Matrix::from_rows: ragged rows");
        values.insert(values.end(), row.begin(), row.end());
    }
    return Matrix(r, c, std::move(values));
}

Matrix Matrix::column(std::span<const double> values) {
    return Matrix(values.size(), 1, std::vector<double>(values.begin(), values.end()));
}

Matrix Matrix::rows_at(std::span<const std::size_t> indices) const {
    Matrix out(indices.size(), cols_);
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] >= rows_) throw ShapeError("Matrix::rows_at: row index out of range");
        std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>(indices[i] * cols_), cols_,
                    out.data_.begin() + static_cast<std::ptrdiff_t>(i * cols_));
    }
    return out;
}

void Matrix::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Matrix::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

std::string shape_string(const Matrix& m) {
    std::ostringstream os;
    os << "[" << m.rows() << "x" << m.cols() << "]";
    return os.str();
}

Parameter& ParameterStore::create(std::string name, Matrix init) {
    Parameter& p = params_.emplace_back();
    p.id = params_.size() - 1;
    p.name = std::move(name);
    p.grad = Matrix(init.rows(), init.cols());
    p.value = std::move(init);
    return p;
}

std::size_t ParameterStore::scalar_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.value.size();
    return n;
}

void ParameterStore::zero_grad() {
    for (auto& p : params_) p.grad.fill(0.0);
}

std::vector<Matrix> ParameterStore::snapshot() const {
    std::vector<Matrix> out;
    out.reserve(params_.size());
    for (const auto& p : params_) out.push_back(p.value);
    return out;
}

void ParameterStore::restore(const std::vector<Matrix>& values) {
    if (values.size() != params_.size()) throw ShapeError("ParameterStore::restore: parameter count mismatch");
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (values[i].shape() != params_[i].value.shape()) {
            throw ShapeError("ParameterStore::restore: shape mismatch for " + params_[i].name);
        }
        params_[i].value = values[i];
    }
}

const Matrix& Tensor::value() const { return tape_->value(id_); }
const Matrix& Tensor::grad() const { return tape_->grad(id_); }

double Tensor::item() const {
    const Matrix& v = value();
    if (v.size() != 1) throw ShapeError("item: tensor of shape " + shape_string(v) + " is not scalar");
    return v[0];
}

Tensor Tape::constant(Matrix value) {
    Node& n = nodes_.emplace_back();
    n.value = std::move(value);
    return Tensor(this, nodes_.size() - 1);
}

Tensor Tape::param(Parameter& p) {
    Node& n = nodes_.emplace_back();
    n.value = p.value;
    n.param = &p;
    n.requires_grad = true;
    return Tensor(this, nodes_.size() - 1);
}

Tensor Tape::record(Matrix value, std::vector<std::size_t> parents, BackwardFn backward) {
    bool needs = false;
    for (std::size_t p : parents) needs = needs || nodes_[p].requires_grad;
    Node& n = nodes_.emplace_back();
    n.value = std::move(value);
    n.parents = std::move(parents);
    if (needs) n.backward = std::move(backward);
    n.requires_grad = needs;
    return Tensor(this, nodes_.size() - 1);
}

const Matrix& Tape::grad(std::size_t id) const { return nodes_[id].grad; }

Matrix& Tape::grad_buffer(std::size_t id) {
    Node& n = nodes_[id];
    if (n.grad.size() != n.value.size()) n.grad = Matrix(n.value.rows(), n.value.cols());
    return n.grad;
}

void Tape::backward(Tensor root) {
    if (&root.tape() != this) throw std::invalid_argument("backward: root belongs to another tape");
    if (root.value().size() != 1) {
        throw ShapeError("backward: root of shape " + shape_string(root.value()) + " is not scalar");
    }
    const std::size_t last = root.id();
    for (std::size_t i = 0; i <= last; ++i) {
        Node& n = nodes_[i];
        n.grad = Matrix(n.value.rows(), n.value.cols());
    }
    nodes_[last].grad[0] = 1.0;
    for (std::size_t i = last + 1; i-- > 0;) {
        Node& n = nodes_[i];
        if (n.requires_grad && n.backward) n.backward(*this, i);
    }
    for (std::size_t i = 0; i <= last; ++i) {
        Node& n = nodes_[i];
        if (n.param == nullptr) continue;
        Matrix& g = n.param->grad;
        if (g.shape() != n.value.shape()) g = Matrix(n.value.rows(), n.value.cols());
        for (std::size_t k = 0; k < g.size(); ++k) g[k] += n.grad[k];
    }
}

void backward(Tensor root) { root.tape().backward(root); }

namespace {

[[noreturn]] void shape_mismatch(const char* op, const Matrix& a, const Matrix& b) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a) + " vs " + shape_string(b));
}

std::size_t broadcast_extent(const char* op, const Matrix& a, const Matrix& b, std::size_t ea, std::size_t eb) {
    if (ea == eb) return ea;
    if (ea == 1) return eb;
    if (eb == 1) return ea;
    shape_mismatch(op, a, b);
}

// Adds `g` (output-shaped) into `target` (input-shaped), summing over
// broadcast dimensions.
void accumulate_reduced(Matrix& target, const Matrix& g) {
    if (target.shape() == g.shape()) {
        for (std::size_t k = 0; k < g.size(); ++k) target[k] += g[k];
        return;
    }
    const bool rows_b = target.rows() == 1 && g.rows() != 1;
    const bool cols_b = target.cols() == 1 && g.cols() != 1;
    for (std::size_t r = 0; r < g.rows(); ++r) {
        for (std::size_t c = 0; c < g.cols(); ++c) {
            target(rows_b ? 0 : r, cols_b ? 0 : c) += g(r, c);
        }
    }
}

template <typename F, typename Da, typename Db>
Tensor binary(const char* op, Tensor a, Tensor b, F f, Da da, Db db) {
    Tape& t = a.tape();
    if (&b.tape() != &t) throw std::invalid_argument(std::string(op) + ": operands on different tapes");
    const Matrix& av = a.value();
    const Matrix& bv = b.value();
    const std::size_t rows = broadcast_extent(op, av, bv, av.rows(), bv.rows());
    const std::size_t cols = broadcast_extent(op, av, bv, av.cols(), bv.cols());
    const bool ar = av.rows() == 1, ac = av.cols() == 1, br = bv.rows() == 1, bc = bv.cols() == 1;
    Matrix out(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            out(r, c) = f(av(ar ? 0 : r, ac ? 0 : c), bv(br ? 0 : r, bc ? 0 : c));
        }
    }
    const std::size_t ia = a.id(), ib = b.id();
    return t.record(std::move(out), {ia, ib}, [=](Tape& tp, std::size_t self) {
        const Matrix& g = tp.grad(self);
        const Matrix& x = tp.value(ia);
        const Matrix& y = tp.value(ib);
        Matrix ga(rows, cols), gb(rows, cols);
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < cols; ++c) {
                const double xv = x(ar ? 0 : r, ac ? 0 : c);
                const double yv = y(br ? 0 : r, bc ? 0 : c);
                ga(r, c) = g(r, c) * da(xv, yv);
                gb(r, c) = g(r, c) * db(xv, yv);
            }
        }
        if (tp.requires_grad(ia)) accumulate_reduced(tp.grad_buffer(ia), ga);
        if (tp.requires_grad(ib)) accumulate_reduced(tp.grad_buffer(ib), gb);
    });
}

// Elementwise unary map; `d(x, y)` is the local derivative given input x and output y.
template <typename F, typename D>
Tensor unary(Tensor a, F f, D d) {
    const Matrix& av = a.value();
    Matrix out(av.rows(), av.cols());
    for (std::size_t k = 0; k < av.size(); ++k) out[k] = f(av[k]);
    const std::size_t ia = a.id();
    return a.tape().record(std::move(out), {ia}, [=](Tape& tp, std::size_t self) {
        const Matrix& g = tp.grad(self);
        const Matrix& x = tp.value(ia);
        const Matrix& y = tp.value(self);
        Matrix& gx = tp.grad_buffer(ia);
        for (std::size_t k = 0; k < g.size(); ++k) gx[k] += g[k] * d(x[k], y[k]);
    });
}

}  // namespace

Tensor add(Tensor a, Tensor b) {
    return binary(
        "add", a, b, [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
        [](double, double) { return 1.0; });
}

Tensor sub(Tensor a, Tensor b) {
    return binary(
        "subtract", a, b, [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
        [](double, double) { return -1.0; });
}

Tensor mul(Tensor a, Tensor b) {
    return binary(
        "multiply", a, b, [](double x, double y) { return x * y; }, [](double, double y) { return y; },
        [](double x, double) { return x; });
}

Tensor div(Tensor a, Tensor b) {
    return binary(
        "divide", a, b, [](double x, double y) { return x / y; }, [](double, double y) { return 1.0 / y; },
        [](double x, double y) { return -x / (y * y); });
}

Tensor neg(Tensor a) {
    return unary(a, [](double x) { return -x; }, [](double, double) { return -1.0; });
}

Tensor scale(Tensor a, double s) {
    return unary(a, [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Tensor add_scalar(Tensor a, double s) {
    return unary(a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Tensor matmul(Tensor a, Tensor b) {
    Tape& t = a.tape();
    const Matrix& av = a.value();
    const Matrix& bv = b.value();
    if (av.cols() != bv.rows()) shape_mismatch("matmul", av, bv);
    const std::size_t n = av.rows(), k = av.cols(), m = bv.cols();
    Matrix out(n, m);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
            const double x = av(i, p);
            if (x == 0.0) continue;
            for (std::size_t j = 0; j < m; ++j) out(i, j) += x * bv(p, j);
        }
    }
    const std::size_t ia = a.id(), ib = b.id();
    return t.record(std::move(out), {ia, ib}, [=](Tape& tp, std::size_t self) {
        const Matrix& g = tp.grad(self);
        const Matrix& x = tp.value(ia);
        const Matrix& y = tp.value(ib);
        if (tp.requires_grad(ia)) {
            Matrix& gx = tp.grad_buffer(ia);  // g * y^T
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t p = 0; p < k; ++p) {
                    double s = 0.0;
                    for (std::size_t j = 0; j < m; ++j) s += g(i, j) * y(p, j);
                    gx(i, p) += s;
                }
            }
        }
        if (tp.requires_grad(ib)) {
            Matrix& gy = tp.grad_buffer(ib);  // x^T * g
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t p = 0; p < k; ++p) {
                    const double xv = x(i, p);
                    for (std::size_t j = 0; j < m; ++j) gy(p, j) += xv * g(i, j);
                }
            }
        }
    });
}

Tensor transpose(Tensor a) {
    const Matrix& av = a.value();
    Matrix out(av.cols(), av.rows());
    for (std::size_t r = 0; r < av.rows(); ++r)
        for (std::size_t c = 0; c < av.cols(); ++c) out(c, r) = av(r, c);
    const std::size_t ia = a.id();
    return a.tape().record(std::move(out), {ia}, [ia](Tape& tp, std::size_t self) {
        const Matrix& g = tp.grad(self);
        Matrix& gx = tp.grad_buffer(ia);
        for (std::size_t r = 0; r < gx.rows(); ++r)
            for (std::size_t c = 0; c < gx.cols(); ++c) gx(r, c) += g(c, r);
    });
}

Tensor concat_cols(std::span<const Tensor> parts) {
    if (parts.empty()) throw ShapeError("concatenate: no operands");
    Tape& t = parts.front().tape();
    const std::size_t rows = parts.front().rows();
    std::size_t cols = 0;
    std::vector<std::size_t> ids, offsets;
    for (const Tensor& p : parts) {
        if (p.rows() != rows) shape_mismatch("concatenate", parts.front().value(), p.value());
        ids.push_back(p.id());
        offsets.push_back(cols);
        cols += p.cols();
    }
    Matrix out(rows, cols);
    for (std::size_t i = 0; i < parts.size(); ++i) {
        const Matrix& v = parts[i].value();
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < v.cols(); ++c) out(r, offsets[i] + c) = v(r, c);
    }
    std::vector<std::size_t> parents = ids;
    return t.record(std::move(out), std::move(parents), [ids, offsets](Tape& tp, std::size_t self) {
        const Matrix& g = tp.grad(self);
        for (std::size_t i = 0; i < ids.size(); ++i) {
            if (!tp.requires_grad(ids[i])) continue;
            Matrix& gx = tp.grad_buffer(ids[i]);
            for (std::size_t r = 0; r < gx.rows(); ++r)
                for (std::size_t c = 0; c < gx.cols(); ++c) gx(r, c) += g(r, offsets[i] + c);
        }
    });
}

Tensor concat_cols(std::initializer_list<Tensor> parts) {
    return concat_cols(std::span<const Tensor>(parts.begin(), parts.size()));
}

Tensor slice_cols(Tensor a, std::size_t begin, std::size_t end) {
    const Matrix& av = a.value();
    if (begin >= end || end > av.cols()) {
        std::ostringstream os;
        os << "slice: columns [" << begin << "," << end << ") out of range for " << shape_string(av);
        throw ShapeError(os.str());
    }
    Matrix out(av.rows(), end - begin);
    for (std::size_t r = 0; r < av.rows(); ++r)
        for (std::size_t c = begin; c < end; ++c) out(r, c - begin) = av(r, c);
    const std::size_t ia = a.id();
    return a.tape().record(std::move(out), {ia}, [=](Tape& tp, std::size_t self) {
        const Matrix& g = tp.grad(self);
        Matrix& gx = tp.grad_buffer(ia);
        for (std::size_t r = 0; r < g.rows(); ++r)
            for (std::size_t c = 0; c < g.cols(); ++c) gx(r, begin + c) += g(r, c);
    });
}

Tensor gather_rows(Tensor a, std::span<const std::size_t> indices) {
    Matrix out = a.value().rows_at(indices);
    std::vector<std::size_t> idx(indices.begin(), indices.end());
    const std::size_t ia = a.id();
    return a.tape().record(std::move(out), {ia}, [ia, idx](Tape& tp, std::size_t self) {
        const Matrix& g = tp.grad(self);
        Matrix& gx = tp.grad_buffer(ia);
        for (std::size_t i = 0; i < idx.size(); ++i)
            for (std::size_t c = 0; c < g.cols(); ++c) gx(idx[i], c) += g(i, c);
    });
}

Tensor tanh(Tensor a) {
    return unary(a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor relu(Tensor a) {
    return unary(
        a, [](double x) { return x > 0.0 ? x : 0.0; }, [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(Tensor a) {
    return unary(
        a,
        [](double x) {
            if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
            const double e = std::exp(x);
            return e / (1.0 + e);
        },
        [](double, double y) { return y * (1.0 - y); });
}

Tensor exp(Tensor a) {
    return unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor log(Tensor a) {
    return unary(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor sqrt(Tensor a) {
    return unary(a, [](double x) { return std::sqrt(x); }, [](double, double y) { return 0.5 / y; });
}

Tensor square(Tensor a) {
    return unary(a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Tensor softmax_rows(Tensor a) {
    const Matrix& av = a.value();
    Matrix out(av.rows(), av.cols());
    for (std::size_t r = 0; r < av.rows(); ++r) {
        double mx = av(r, 0);
        for (std::size_t c = 1; c < av.cols(); ++c) mx = std::max(mx, av(r, c));
        double s = 0.0;
        for (std::size_t c = 0; c < av.cols(); ++c) s += (out(r, c) = std::exp(av(r, c) - mx));
        for (std::size_t c = 0; c < av.cols(); ++c) out(r, c) /= s;
    }
    const std::size_t ia = a.id();
    return a.tape().record(std::move(out), {ia}, [ia](Tape& tp, std::size_t self) {
        const Matrix& g = tp.grad(self);
        const Matrix& y = tp.value(self);
        Matrix& gx = tp.grad_buffer(ia);
        for (std::size_t r = 0; r < y.rows(); ++r) {
            double dot = 0.0;
            for (std::size_t c = 0; c < y.cols(); ++c) dot += g(r, c) * y(r, c);
            for (std::size_t c = 0; c < y.cols(); ++c) gx(r, c) += y(r, c) * (g(r, c) - dot);
        }
    });
}

Tensor log_softmax_rows(Tensor a) {
    const Matrix& av = a.value();
    Matrix out(av.rows(), av.cols());
    for (std::size_t r = 0; r < av.rows(); ++r) {
        double mx = av(r, 0);
        for (std::size_t c = 1; c < av.cols(); ++c) mx = std::max(mx, av(r, c));
        double s = 0.0;
        for (std::size_t c = 0; c < av.cols(); ++c) s += std::exp(av(r, c) - mx);
        const double lse = mx + std::log(s);
        for (std::size_t c = 0; c < av.cols(); ++c) out(r, c) = av(r, c) - lse;
    }
    const std::size_t ia = a.id();
    return a.tape().record(std::move(out), {ia}, [ia](Tape& tp, std::size_t self) {
        const Matrix& g = tp.grad(self);
        const Matrix& y = tp.value(self);
        Matrix& gx = tp.grad_buffer(ia);
        for (std::size_t r = 0; r < y.rows(); ++r) {
            double gs = 0.0;
            for (std::size_t c = 0; c < y.cols(); ++c) gs += g(r, c);
            for (std::size_t c = 0; c < y.cols(); ++c) gx(r, c) += g(r, c) - std::exp(y(r, c)) * gs;
        }
    });
}

Tensor sum(Tensor a) {
    const Matrix& av = a.value();
    double s = 0.0;
    for (double v : av.data()) s += v;
    const std::size_t ia = a.id();
    return a.tape().record(Matrix(1, 1, s), {ia}, [ia](Tape& tp, std::size_t self) {
        const double g = tp.grad(self)[0];
        Matrix& gx = tp.grad_buffer(ia);
        for (std::size_t k = 0; k < gx.size(); ++k) gx[k] += g;
    });
}

Tensor mean(Tensor a) {
    const Matrix& av = a.value();
    if (av.size() == 0) throw ShapeError("mean: empty tensor");
    const double n = static_cast<double>(av.size());
    double s = 0.0;
    for (double v : av.data()) s += v;
    const std::size_t ia = a.id();
    return a.tape().record(Matrix(1, 1, s / n), {ia}, [ia, n](Tape& tp, std::size_t self) {
        const double g = tp.grad(self)[0] / n;
        Matrix& gx = tp.grad_buffer(ia);
        for (std::size_t k = 0; k < gx.size(); ++k) gx[k] += g;
    });
}

Tensor sum_cols(Tensor a) {
    const Matrix& av = a.value();
    Matrix out(av.rows(), 1);
    for (std::size_t r = 0; r < av.rows(); ++r)
        for (std::size_t c = 0; c < av.cols(); ++c) out(r, 0) += av(r, c);
    const std::size_t ia = a.id();
    return a.tape().record(std::move(out), {ia}, [ia](Tape& tp, std::size_t self) {
        const Matrix& g = tp.grad(self);
        Matrix& gx = tp.grad_buffer(ia);
        for (std::size_t r = 0; r < gx.rows(); ++r)
            for (std::size_t c = 0; c < gx.cols(); ++c) gx(r, c) += g(r, 0);
    });
}

Tensor stop_gradient(Tensor a) { return a.tape().record(a.value(), {}, nullptr); }

}  // namespace gcl
