#pragma once

// Dense double-precision matrices with a define-by-run reverse-mode tape.
//
// Every quantity is a rank-2 array; per-sample scalars are [batch x 1] and
// losses are [1 x 1]. Elementwise binary primitives broadcast any dimension
// of extent 1 (bias rows, per-sample gate columns).

#include <cstddef>
#include <deque>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace gcl {

class Matrix {
   public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

    static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
    static Matrix column(std::span<const double> values);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    std::vector<std::size_t> shape() const { return {rows_, cols_}; }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    std::span<double> data() { return data_; }
    std::span<const double> data() const { return data_; }
    const std::vector<double>& values() const { return data_; }

    Matrix rows_at(std::span<const std::size_t> indices) const;
    void fill(double v);
    bool all_finite() const;

    friend bool operator==(const Matrix&, const Matrix&) = default;

   private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

std::string shape_string(const Matrix& m);

// Trainable array. Gradients accumulate into `grad` on every backward pass
// until zeroed by the owner.
struct Parameter {
    std::size_t id = 0;
    std::string name;
    Matrix value;
    Matrix grad;
};

// Owns all parameters of a model. Addresses are stable for its lifetime.
class ParameterStore {
   public:
    ParameterStore() = default;
    ParameterStore(const ParameterStore&) = delete;
    ParameterStore& operator=(const ParameterStore&) = delete;

    Parameter& create(std::string name, Matrix init);

    std::size_t size() const { return params_.size(); }
    std::size_t scalar_count() const;
    Parameter& operator[](std::size_t i) { return params_[i]; }
    const Parameter& operator[](std::size_t i) const { return params_[i]; }
    auto begin() { return params_.begin(); }
    auto end() { return params_.end(); }
    auto begin() const { return params_.begin(); }
    auto end() const { return params_.end(); }

    void zero_grad();
    std::vector<Matrix> snapshot() const;
    void restore(const std::vector<Matrix>& values);

   private:
    std::deque<Parameter> params_;
};

class Tape;

// Handle to a value recorded on a tape.
class Tensor {
   public:
    Tensor() = default;
    Tensor(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

    bool valid() const { return tape_ != nullptr; }
    Tape& tape() const { return *tape_; }
    std::size_t id() const { return id_; }

    const Matrix& value() const;
    // Empty (0 x 0) until a backward pass sweeps this node.
    const Matrix& grad() const;
    std::size_t rows() const { return value().rows(); }
    std::size_t cols() const { return value().cols(); }
    std::vector<std::size_t> shape() const { return value().shape(); }
    double item() const;

   private:
    Tape* tape_ = nullptr;
    std::size_t id_ = 0;
};

class Tape {
   public:
    using BackwardFn = std::function<void(Tape&, std::size_t)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Tensor constant(Matrix value);
    Tensor param(Parameter& p);

    // Appends a node; `parents` must already be on this tape.
    Tensor record(Matrix value, std::vector<std::size_t> parents, BackwardFn backward);

    // Reverse sweep from a [1 x 1] root. Node adjoints are reset first, so the
    // tape may be swept more than once; parameter gradients accumulate.
    void backward(Tensor root);

    std::size_t size() const { return nodes_.size(); }
    const Matrix& value(std::size_t id) const { return nodes_[id].value; }
    const Matrix& grad(std::size_t id) const;
    // Adjoint buffer of a node, allocated on first use during a sweep.
    Matrix& grad_buffer(std::size_t id);
    const std::vector<std::size_t>& parents(std::size_t id) const { return nodes_[id].parents; }
    bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

   private:
    struct Node {
        Matrix value;
        Matrix grad;
        std::vector<std::size_t> parents;
        BackwardFn backward;
        Parameter* param = nullptr;
        bool requires_grad = false;
    };
    std::deque<Node> nodes_;
};

void backward(Tensor root);

// Elementwise binary primitives with broadcasting over extent-1 dimensions.
Tensor add(Tensor a, Tensor b);
Tensor sub(Tensor a, Tensor b);
Tensor mul(Tensor a, Tensor b);
Tensor div(Tensor a, Tensor b);

Tensor neg(Tensor a);
Tensor scale(Tensor a, double s);
Tensor add_scalar(Tensor a, double s);

Tensor matmul(Tensor a, Tensor b);
Tensor transpose(Tensor a);
Tensor concat_cols(std::span<const Tensor> parts);
Tensor concat_cols(std::initializer_list<Tensor> parts);
Tensor slice_cols(Tensor a, std::size_t begin, std::size_t end);
Tensor gather_rows(Tensor a, std::span<const std::size_t> indices);

Tensor tanh(Tensor a);
Tensor relu(Tensor a);
Tensor sigmoid(Tensor a);
Tensor exp(Tensor a);
Tensor log(Tensor a);
Tensor sqrt(Tensor a);
Tensor square(Tensor a);

Tensor softmax_rows(Tensor a);
Tensor log_softmax_rows(Tensor a);

Tensor sum(Tensor a);
Tensor mean(Tensor a);
// Row sums as a [rows x 1] column.
Tensor sum_cols(Tensor a);

// Same value; no adjoint reaches the argument's ancestors.
Tensor stop_gradient(Tensor a);

inline Tensor operator+(Tensor a, Tensor b) { return add(a, b); }
inline Tensor operator-(Tensor a, Tensor b) { return sub(a, b); }
inline Tensor operator*(Tensor a, Tensor b) { return mul(a, b); }
inline Tensor operator-(Tensor a) { return neg(a); }

}  // namespace gcl
