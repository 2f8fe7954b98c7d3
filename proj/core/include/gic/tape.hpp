#pragma once

#include <functional>
#include <initializer_list>
#include <memory>
#include <vector>

#include "gic/tensor.hpp"

namespace gic {

// Reverse-mode tape. Ops append records in execution order (inputs always
// precede their consumers) and backward() replays them in reverse, so
// gradient accumulation order is fixed by construction. One tape is
// single-threaded; independent tapes may live on different threads.
template <class S>
class Tape {
public:
  explicit Tape(bool recording = true) : recording_(recording) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return recording_; }

  // True when a tensor participates in gradient flow: either a leaf that
  // wants gradients or an intermediate produced on this tape.
  static bool needs_grad(const Tensor<S>& t) {
    return t.requires_grad() || t.node()->tape_output;
  }

  bool should_record(std::initializer_list<const Tensor<S>*> inputs) const {
    if (!recording_) return false;
    for (const Tensor<S>* t : inputs) {
      if (t && t->defined() && needs_grad(*t)) return true;
    }
    return false;
  }

  void record(const char* op, const Tensor<S>& output, std::function<void()> backward) {
    output.node()->tape_output = true;
    records_.push_back(Record{op, output.node_ptr(), std::move(backward)});
  }

  std::size_t num_records() const { return records_.size(); }

  // Seeds d(loss)/d(loss)=1 and propagates through every record in reverse.
  void backward(const Tensor<S>& loss) {
    if (loss.size() != 1) {
      throw ShapeError("backward: loss must be scalar, got shape " + shape_str(loss.shape()));
    }
    if (!loss.node()->tape_output) {
      throw Error("backward: loss is not an output of this tape");
    }
    loss.grad()[0] += S(1);
    for (auto it = records_.rbegin(); it != records_.rend(); ++it) {
      if (it->output->grad.empty()) continue; // no gradient flowed to this op
      it->fn();
    }
  }

  void clear() { records_.clear(); }

private:
  struct Record {
    const char* op;
    std::shared_ptr<TensorNode<S>> output;
    std::function<void()> fn;
  };

  bool recording_;
  std::vector<Record> records_;
};

using TapeF = Tape<float>;
using TapeD = Tape<double>;

} // namespace gic
