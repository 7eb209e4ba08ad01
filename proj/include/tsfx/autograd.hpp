#pragma once

#include <cstdint>
#include <functional>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "tsfx/tensor.hpp"

namespace tsfx {

// Accumulates gradients keyed by tensor id during a backward sweep.
class GradientMap {
 public:
  void accumulate(std::uint64_t id, const Tensor& g) {
    auto it = grads_.find(id);
    if (it == grads_.end()) {
      grads_.emplace(id, g);
      return;
    }
    const Tensor& old = it->second;
    std::vector<double> sum(old.data());
    const std::vector<double>& add = g.data();
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += add[i];
    it->second = Tensor(old.shape(), std::move(sum));
  }

  const Tensor* find(std::uint64_t id) const {
    auto it = grads_.find(id);
    return it == grads_.end() ? nullptr : &it->second;
  }

  const Tensor& at(std::uint64_t id) const {
    const Tensor* t = find(id);
    if (!t) throw ContractError("no gradient recorded for tensor id " + std::to_string(id));
    return *t;
  }

  bool contains(std::uint64_t id) const { return grads_.count(id) != 0; }
  void insert(std::uint64_t id, Tensor g) { grads_.insert_or_assign(id, std::move(g)); }
  void erase_except(const std::unordered_set<std::uint64_t>& keep) {
    for (auto it = grads_.begin(); it != grads_.end();) {
      if (keep.count(it->first)) ++it;
      else it = grads_.erase(it);
    }
  }
  std::size_t size() const { return grads_.size(); }

 private:
  std::unordered_map<std::uint64_t, Tensor> grads_;
};

// One recorded operation: the id/shape of its output plus a closure that
// routes the output gradient to the inputs.
struct TapeNode {
  std::uint64_t output_id;
  std::function<void(const Tensor& grad_out, GradientMap& sink)> backward;
};

// Records ops in execution order; replaying the nodes in reverse yields
// reverse-mode gradients for every requires_grad leaf. One tape belongs to
// one worker thread; activate it with a Tape::Scope around the forward pass.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  class Scope {
   public:
    explicit Scope(Tape* tape) : prev_(current_) { current_ = tape; }
    ~Scope() { current_ = prev_; }
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;

   private:
    Tape* prev_;
  };

  static Tape* current() { return current_; }

  // True when `t` participates in this tape's graph.
  bool tracked(const Tensor& t) const {
    return t.requires_grad() || live_.count(t.id()) != 0;
  }

  // Registers an input; requires_grad tensors become gradient leaves.
  void touch_input(const Tensor& t) {
    if (t.requires_grad() && !leaves_.count(t.id())) {
      leaves_.emplace(t.id(), t.shape());
      live_.insert(t.id());
    }
  }

  void record(const Tensor& output,
              std::function<void(const Tensor&, GradientMap&)> backward) {
    live_.insert(output.id());
    nodes_.push_back(TapeNode{output.id(), std::move(backward)});
  }

  const std::vector<TapeNode>& nodes() const { return nodes_; }
  const std::unordered_map<std::uint64_t, Shape>& leaves() const { return leaves_; }
  std::size_t size() const { return nodes_.size(); }

  void clear() {
    nodes_.clear();
    live_.clear();
    leaves_.clear();
  }

 private:
  static thread_local Tape* current_;
  std::vector<TapeNode> nodes_;
  std::unordered_set<std::uint64_t> live_;
  std::unordered_map<std::uint64_t, Shape> leaves_;
};

inline thread_local Tape* Tape::current_ = nullptr;

// Reverse sweep from a scalar loss. Returns one gradient per requires_grad
// leaf; leaves the loss does not reach get zero gradients.
inline GradientMap backward(const Tensor& loss, const Tape& tape) {
  if (loss.numel() != 1)
    throw ContractError("backward() needs a scalar loss, got shape " + shape_str(loss.shape()));

  // No recording while evaluating backward closures.
  Tape::Scope guard(nullptr);

  GradientMap grads;
  grads.insert(loss.id(), Tensor::ones(loss.shape()));
  const auto& nodes = tape.nodes();
  for (std::size_t i = nodes.size(); i-- > 0;) {
    const Tensor* g = grads.find(nodes[i].output_id);
    if (g) nodes[i].backward(*g, grads);
  }

  std::unordered_set<std::uint64_t> leaf_ids;
  for (const auto& [id, shape] : tape.leaves()) {
    leaf_ids.insert(id);
    if (!grads.contains(id)) grads.insert(id, Tensor::zeros(shape));
  }
  grads.erase_except(leaf_ids);
  return grads;
}

}  // namespace tsfx
