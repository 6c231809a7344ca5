#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "tsrep/tensor.hpp"

namespace tsrep {

/// Named parameter tensors, iterated in name order. Shapes are fixed once a
/// name is added; values may be overwritten in place.
class ParamSet {
 public:
  using Map = std::map<std::string, Tensor>;

  void add(const std::string& name, Tensor value);
  /// Replace the value of an existing entry; the shape must match.
  void assign(const std::string& name, const Tensor& value);

  bool contains(const std::string& name) const { return entries_.count(name) != 0; }
  const Tensor& at(const std::string& name) const;
  std::span<double> values(const std::string& name);

  std::size_t size() const noexcept { return entries_.size(); }
  Index numel() const;
  std::vector<std::string> names() const;

  Map::const_iterator begin() const { return entries_.begin(); }
  Map::const_iterator end() const { return entries_.end(); }

  /// Same names in the same order with identical shapes.
  bool same_layout(const ParamSet& other) const;
  /// All-zero set with this set's layout.
  ParamSet zeros_like() const;

  friend bool operator==(const ParamSet& a, const ParamSet& b) { return a.entries_ == b.entries_; }

 private:
  Map entries_;
};

/// Gradients share the parameter layout.
using Gradients = ParamSet;

class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  Index dim(Index axis) const { return value().dim(axis); }
  bool requires_grad() const;

  Tape& tape() const { return *tape_; }
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Receives the output gradient and one accumulation target per parent
/// (nullptr for parents that do not require gradients).
using BackwardFn = std::function<void(const Tensor& out_grad, std::span<Tensor* const> parent_grads)>;

/// Records forward operations for reverse-mode differentiation.
///
/// Nodes live in a deque, so references to a node's value stay valid for the
/// lifetime of the tape and backward closures may hold pointers to them. A
/// tape built with `record = false` evaluates eagerly and keeps no closures;
/// nothing on it requires gradients.
class Tape {
 public:
  explicit Tape(bool record = true) : record_(record) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const noexcept { return record_; }

  Var constant(Tensor value);
  /// Unnamed leaf that accumulates a gradient (network inputs under test).
  Var leaf(Tensor value);
  /// Named trainable leaf. Registering the same name twice returns the
  /// existing node.
  Var parameter(const std::string& name, const Tensor& value);
  /// Node whose value equals `x` and through which no gradient flows.
  Var stop_gradient(Var x);

  /// Append an op result. `fn` is dropped if no parent requires gradients.
  Var record(Tensor value, std::vector<Var> parents, BackwardFn fn);

  const Tensor& value(std::size_t id) const { return nodes_.at(id).value; }
  bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }

  /// Gradient accumulated at a node by the last backward pass (zeros if none).
  Tensor grad(Var v) const;

  std::size_t size() const noexcept { return nodes_.size(); }
  const std::map<std::string, std::size_t>& parameters() const noexcept { return params_; }

 private:
  friend Gradients backward(Tape& tape, Var loss);

  struct Node {
    Tensor value;
    Tensor grad;
    bool has_grad = false;
    bool requires_grad = false;
    std::vector<std::size_t> parents;
    BackwardFn backward;
  };

  Var push(Node node);
  void run_backward(std::size_t loss_id);

  bool record_;
  std::deque<Node> nodes_;
  std::map<std::string, std::size_t> params_;
};

/// Reverse pass from a scalar loss. Returns gradients for every parameter
/// registered on the tape; unreachable parameters get zeros.
Gradients backward(Tape& tape, Var loss);

/// As above, keyed exactly like `layout`: names not registered on the tape
/// (or behind a stop-gradient) get zero gradients.
Gradients backward(Tape& tape, Var loss, const ParamSet& layout);

}  // namespace tsrep
