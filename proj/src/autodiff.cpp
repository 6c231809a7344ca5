#include "tsrep/autodiff.hpp"

#include <utility>

namespace tsrep {

void ParamSet::add(const std::string& name, Tensor value) {
  if (!entries_.emplace(name, std::move(value)).second) {
    throw UsageError("duplicate parameter name '" + name + "'");
  }
}

void ParamSet::assign(const std::string& name, const Tensor& value) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw UsageError("unknown parameter '" + name + "'");
  if (it->second.shape() != value.shape()) {
    throw DimensionError("parameter '" + name + "' has shape " + shape_str(it->second.shape()) +
                         ", got " + shape_str(value.shape()));
  }
  it->second = value;
}

const Tensor& ParamSet::at(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw UsageError("unknown parameter '" + name + "'");
  return it->second;
}

std::span<double> ParamSet::values(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw UsageError("unknown parameter '" + name + "'");
  return it->second.span();
}

Index ParamSet::numel() const {
  Index n = 0;
  for (const auto& [_, t] : entries_) n += t.size();
  return n;
}

std::vector<std::string> ParamSet::names() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& [name, _] : entries_) out.push_back(name);
  return out;
}

bool ParamSet::same_layout(const ParamSet& other) const {
  if (entries_.size() != other.entries_.size()) return false;
  auto a = entries_.begin();
  auto b = other.entries_.begin();
  for (; a != entries_.end(); ++a, ++b) {
    if (a->first != b->first || a->second.shape() != b->second.shape()) return false;
  }
  return true;
}

ParamSet ParamSet::zeros_like() const {
  ParamSet out;
  for (const auto& [name, t] : entries_) out.add(name, Tensor(t.shape()));
  return out;
}

const Tensor& Var::value() const {
  if (!tape_) throw UsageError("use of an unbound Var");
  return tape_->value(id_);
}

bool Var::requires_grad() const { return tape_ && tape_->requires_grad(id_); }

Var Tape::push(Node node) {
  if (!node.value.all_finite()) {
    throw NumericError("non-finite value produced at tape node " + std::to_string(nodes_.size()));
  }
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::leaf(Tensor value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = record_;
  return push(std::move(n));
}

Var Tape::parameter(const std::string& name, const Tensor& value) {
  if (auto it = params_.find(name); it != params_.end()) {
    if (nodes_[it->second].value.shape() != value.shape()) {
      throw DimensionError("parameter '" + name + "' re-registered with a different shape");
    }
    return Var(this, it->second);
  }
  Var v = leaf(value);
  params_.emplace(name, v.id());
  return v;
}

Var Tape::stop_gradient(Var x) {
  Node n;
  n.value = x.value();
  n.parents = {x.id()};
  return push(std::move(n));
}

Var Tape::record(Tensor value, std::vector<Var> parents, BackwardFn fn) {
  Node n;
  n.value = std::move(value);
  for (const Var& p : parents) {
    if (&p.tape() != this) throw UsageError("op mixes Vars from different tapes");
    n.parents.push_back(p.id());
    n.requires_grad = n.requires_grad || p.requires_grad();
  }
  if (record_ && n.requires_grad) n.backward = std::move(fn);
  return push(std::move(n));
}

Tensor Tape::grad(Var v) const {
  const Node& n = nodes_.at(v.id());
  return n.has_grad ? n.grad : Tensor::zeros_like(n.value);
}

void Tape::run_backward(std::size_t loss_id) {
  for (auto& n : nodes_) {
    n.has_grad = false;
    n.grad = Tensor();
  }
  Node& root = nodes_[loss_id];
  root.grad = Tensor(root.value.shape(), 1.0);
  root.has_grad = true;

  std::vector<Tensor*> targets;
  for (std::size_t id = loss_id + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.has_grad || !n.backward) continue;
    targets.clear();
    for (std::size_t pid : n.parents) {
      Node& p = nodes_[pid];
      if (!p.requires_grad) {
        targets.push_back(nullptr);
        continue;
      }
      if (!p.has_grad) {
        p.grad = Tensor::zeros_like(p.value);
        p.has_grad = true;
      }
      targets.push_back(&p.grad);
    }
    n.backward(n.grad, targets);
  }
}

Gradients backward(Tape& tape, Var loss) {
  if (&loss.tape() != &tape) throw UsageError("loss is not on this tape");
  if (loss.value().size() != 1) {
    throw UsageError("backward needs a scalar loss, got shape " + shape_str(loss.shape()));
  }
  Gradients grads;
  if (tape.recording()) tape.run_backward(loss.id());
  for (const auto& [name, id] : tape.parameters()) {
    const auto& n = tape.nodes_[id];
    grads.add(name, n.has_grad ? n.grad : Tensor::zeros_like(n.value));
  }
  return grads;
}

Gradients backward(Tape& tape, Var loss, const ParamSet& layout) {
  Gradients on_tape = backward(tape, loss);
  Gradients out;
  for (const auto& [name, t] : layout) {
    if (on_tape.contains(name)) {
      const Tensor& g = on_tape.at(name);
      if (g.shape() != t.shape()) {
        throw DimensionError("gradient for '" + name + "' has shape " + shape_str(g.shape()));
      }
      out.add(name, g);
    } else {
      out.add(name, Tensor::zeros_like(t));
    }
  }
  return out;
}

}  // namespace tsrep
