#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "interprior/errors.hpp"

namespace interprior::nn {

using Index = Eigen::Index;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Named parameter tensors with gradient buffers and Adam moments.
template <typename Scalar>
class ParamStore {
 public:
  struct Entry {
    std::string name;
    Matrix<Scalar> value;
    Matrix<Scalar> grad;
    Matrix<Scalar> first_moment;
    Matrix<Scalar> second_moment;
  };

  std::size_t add(const std::string& name, Index rows, Index cols) {
    for (const auto& e : entries_) {
      if (e.name == name) throw Error(ErrorCode::ShapeMismatch, "duplicate parameter " + name);
    }
    Entry e{name, Matrix<Scalar>::Zero(rows, cols), Matrix<Scalar>::Zero(rows, cols),
            Matrix<Scalar>::Zero(rows, cols), Matrix<Scalar>::Zero(rows, cols)};
    entries_.push_back(std::move(e));
    ++version_;
    return entries_.size() - 1;
  }

  std::size_t index_of(const std::string& name) const {
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      if (entries_[i].name == name) return i;
    }
    throw Error(ErrorCode::ShapeMismatch, "unknown parameter " + name);
  }

  bool contains(const std::string& name) const {
    for (const auto& e : entries_) {
      if (e.name == name) return true;
    }
    return false;
  }

  std::size_t size() const { return entries_.size(); }
  const std::vector<Entry>& entries() const { return entries_; }

  const Matrix<Scalar>& value(std::size_t i) const { return entries_[i].value; }
  /// Any write through this reference invalidates outstanding tapes.
  Matrix<Scalar>& mutable_value(std::size_t i) {
    ++version_;
    return entries_[i].value;
  }
  const Matrix<Scalar>& grad(std::size_t i) const { return entries_[i].grad; }
  Matrix<Scalar>& grad(std::size_t i) { return entries_[i].grad; }
  const std::string& name(std::size_t i) const { return entries_[i].name; }

  void zero_grad() {
    for (auto& e : entries_) e.grad.setZero();
  }

  void scale_grad(Scalar factor) {
    for (auto& e : entries_) e.grad *= factor;
  }

  std::uint64_t version() const { return version_; }
  std::int64_t step_count() const { return step_; }

  Index parameter_count() const {
    Index n = 0;
    for (const auto& e : entries_) n += e.value.size();
    return n;
  }

  /// Bias-corrected Adam update from the current gradient buffers.
  void adam_step(const AdamConfig& cfg) {
    ++step_;
    ++version_;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step_));
    const Scalar b1 = static_cast<Scalar>(cfg.beta1);
    const Scalar b2 = static_cast<Scalar>(cfg.beta2);
    const Scalar step_size = static_cast<Scalar>(cfg.lr / bc1);
    const Scalar inv_bc2 = static_cast<Scalar>(1.0 / bc2);
    const Scalar eps = static_cast<Scalar>(cfg.eps);
    for (auto& e : entries_) {
      e.first_moment = b1 * e.first_moment + (Scalar(1) - b1) * e.grad;
      e.second_moment = b2 * e.second_moment + (Scalar(1) - b2) * e.grad.cwiseAbs2();
      e.value.array() -=
          step_size * e.first_moment.array() / ((e.second_moment.array() * inv_bc2).sqrt() + eps);
    }
  }

  /// Parameter copy in another scalar type; gradients and moments reset.
  template <typename Other>
  ParamStore<Other> cast() const {
    ParamStore<Other> out;
    for (const auto& e : entries_) {
      const std::size_t i = out.add(e.name, e.value.rows(), e.value.cols());
      out.mutable_value(i) = e.value.template cast<Other>();
    }
    return out;
  }

 private:
  std::vector<Entry> entries_;
  std::uint64_t version_ = 0;
  std::int64_t step_ = 0;
};

enum class Activation { None, Relu, Sigmoid };

struct MlpSpec {
  /// Input width followed by every layer's output width.
  std::vector<Index> widths;
  Activation hidden = Activation::Relu;
  Activation output = Activation::None;

  Index input_width() const { return widths.front(); }
  Index output_width() const { return widths.back(); }
  std::size_t layer_count() const { return widths.size() - 1; }
};

template <typename Scalar>
struct MlpTape {
  std::uint64_t version = 0;
  std::vector<Matrix<Scalar>> inputs;
  std::vector<Matrix<Scalar>> activations;
};

/// Dense layers y = act(x·Wᵀ + b), batch along rows. Parameters live in a
/// ParamStore under "<prefix>.W<k>" / "<prefix>.b<k>".
template <typename Scalar>
class Mlp {
 public:
  Mlp() = default;

  /// Registers freshly initialized parameters in `store`.
  template <typename Rng>
  Mlp(const MlpSpec& spec, ParamStore<Scalar>& store, const std::string& prefix, Rng& rng) : spec_(spec) {
    validate();
    for (std::size_t k = 0; k < spec_.layer_count(); ++k) {
      const Index in = spec_.widths[k];
      const Index out = spec_.widths[k + 1];
      const std::size_t w = store.add(prefix + ".W" + std::to_string(k), out, in);
      const std::size_t b = store.add(prefix + ".b" + std::to_string(k), out, 1);
      const double bound = std::sqrt(6.0 / static_cast<double>(in));
      std::uniform_real_distribution<double> dist(-bound, bound);
      auto& W = store.mutable_value(w);
      for (Index c = 0; c < W.cols(); ++c) {
        for (Index r = 0; r < W.rows(); ++r) W(r, c) = static_cast<Scalar>(dist(rng));
      }
      weight_.push_back(w);
      bias_.push_back(b);
    }
  }

  /// Binds to parameters that already exist in `store`.
  static Mlp bind(const MlpSpec& spec, const ParamStore<Scalar>& store, const std::string& prefix) {
    Mlp m;
    m.spec_ = spec;
    m.validate();
    for (std::size_t k = 0; k < spec.layer_count(); ++k) {
      const std::size_t w = store.index_of(prefix + ".W" + std::to_string(k));
      const std::size_t b = store.index_of(prefix + ".b" + std::to_string(k));
      if (store.value(w).rows() != spec.widths[k + 1] || store.value(w).cols() != spec.widths[k] ||
          store.value(b).rows() != spec.widths[k + 1]) {
        throw Error(ErrorCode::ShapeMismatch, "parameter shape differs from spec at " + prefix);
      }
      m.weight_.push_back(w);
      m.bias_.push_back(b);
    }
    return m;
  }

  const MlpSpec& spec() const { return spec_; }
  std::size_t weight_index(std::size_t layer) const { return weight_[layer]; }
  std::size_t bias_index(std::size_t layer) const { return bias_[layer]; }

  Matrix<Scalar> forward(const ParamStore<Scalar>& store, const Matrix<Scalar>& x,
                         MlpTape<Scalar>* tape = nullptr) const {
    if (x.cols() != spec_.input_width()) {
      throw Error(ErrorCode::ShapeMismatch, "MLP input width " + std::to_string(x.cols()) + " != " +
                                                std::to_string(spec_.input_width()));
    }
    if (tape) {
      tape->version = store.version();
      tape->inputs.clear();
      tape->activations.clear();
    }
    Matrix<Scalar> h = x;
    for (std::size_t k = 0; k < spec_.layer_count(); ++k) {
      if (tape) tape->inputs.push_back(h);
      Matrix<Scalar> y = h * store.value(weight_[k]).transpose();
      y.rowwise() += store.value(bias_[k]).col(0).transpose();
      apply_activation(y, activation_of(k));
      if (tape) tape->activations.push_back(y);
      h = std::move(y);
    }
    return h;
  }

  /// Accumulates parameter gradients into `store`; returns dL/dx.
  Matrix<Scalar> backward(ParamStore<Scalar>& store, const MlpTape<Scalar>& tape,
                          const Matrix<Scalar>& grad_out) const {
    return backward_impl(&store, store, tape, grad_out);
  }

  /// dL/dx only; the store is untouched.
  Matrix<Scalar> backward_input(const ParamStore<Scalar>& store, const MlpTape<Scalar>& tape,
                                const Matrix<Scalar>& grad_out) const {
    return backward_impl(nullptr, store, tape, grad_out);
  }

 private:
  Activation activation_of(std::size_t layer) const {
    return layer + 1 == spec_.layer_count() ? spec_.output : spec_.hidden;
  }

  static void apply_activation(Matrix<Scalar>& y, Activation a) {
    switch (a) {
      case Activation::None: break;
      case Activation::Relu: y = y.cwiseMax(Scalar(0)); break;
      case Activation::Sigmoid: y = (Scalar(1) + (-y.array()).exp()).inverse().matrix(); break;
    }
  }

  Matrix<Scalar> backward_impl(ParamStore<Scalar>* grads, const ParamStore<Scalar>& store,
                               const MlpTape<Scalar>& tape, const Matrix<Scalar>& grad_out) const {
    if (tape.version != store.version()) throw Error(ErrorCode::StaleTape, "parameters changed since forward");
    if (tape.inputs.size() != spec_.layer_count()) throw Error(ErrorCode::ShapeMismatch, "tape/layer mismatch");
    Matrix<Scalar> g = grad_out;
    for (std::size_t kk = spec_.layer_count(); kk-- > 0;) {
      const Matrix<Scalar>& y = tape.activations[kk];
      if (g.rows() != y.rows() || g.cols() != y.cols()) {
        throw Error(ErrorCode::ShapeMismatch, "output gradient shape differs from forward output");
      }
      switch (activation_of(kk)) {
        case Activation::None: break;
        case Activation::Relu: g = (y.array() > Scalar(0)).select(g, Scalar(0)); break;
        case Activation::Sigmoid: g = (g.array() * y.array() * (Scalar(1) - y.array())).matrix(); break;
      }
      if (grads) {
        grads->grad(weight_[kk]).noalias() += g.transpose() * tape.inputs[kk];
        grads->grad(bias_[kk]) += g.colwise().sum().transpose();
      }
      g = g * store.value(weight_[kk]);
    }
    return g;
  }

  void validate() const {
    if (spec_.widths.size() < 2) throw Error(ErrorCode::ShapeMismatch, "MLP needs at least one layer");
    for (Index w : spec_.widths) {
      if (w < 1) throw Error(ErrorCode::ShapeMismatch, "MLP widths must be positive");
    }
  }

  MlpSpec spec_;
  std::vector<std::size_t> weight_;
  std::vector<std::size_t> bias_;
};

/// Transformer-style sinusoidal embedding of t/T: the first dim/2 entries
/// are sines, the rest cosines, at geometrically spaced frequencies.
template <typename Scalar>
RowVector<Scalar> time_embedding(int t, int T, Index dim) {
  if (dim % 2 != 0) throw Error(ErrorCode::ShapeMismatch, "time embedding width must be even");
  if (T < 1 || t < 0 || t > T) throw Error(ErrorCode::BadTimestep, "timestep outside [0, T]");
  const Index half = dim / 2;
  const double position = 1000.0 * static_cast<double>(t) / static_cast<double>(T);
  RowVector<Scalar> e(dim);
  for (Index i = 0; i < half; ++i) {
    const double freq = std::pow(10000.0, -static_cast<double>(i) / static_cast<double>(half));
    e(i) = static_cast<Scalar>(std::sin(position * freq));
    e(half + i) = static_cast<Scalar>(std::cos(position * freq));
  }
  return e;
}

}  // namespace interprior::nn
