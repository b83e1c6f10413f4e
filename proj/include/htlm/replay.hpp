#pragma once

#include <cstddef>
#include <vector>

#include "htlm/belief.hpp"
#include "htlm/random.hpp"

namespace htlm {

struct TransitionRecord {
  KnowledgeState k;
  ActionId a;
  KnowledgeState k_next;
  double r = 0.0;
  bool terminal = false;
};

// Fixed-capacity ring; once full the oldest record is overwritten.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw ContractViolation("ReplayBuffer: capacity must be positive");
  }

  void push(TransitionRecord rec) {
    if (records_.size() < capacity_) {
      records_.push_back(std::move(rec));
    } else {
      records_[head_] = std::move(rec);
      head_ = (head_ + 1) % capacity_;
    }
  }

  std::size_t size() const { return records_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return records_.empty(); }

  // i = 0 is the oldest stored record.
  const TransitionRecord& at(std::size_t i) const {
    return records_.at((head_ + i) % records_.size());
  }

  // Uniform with replacement.
  std::vector<const TransitionRecord*> sample(std::size_t batch, Rng& rng) const {
    std::vector<const TransitionRecord*> out;
    if (records_.empty()) return out;
    out.reserve(batch);
    for (std::size_t i = 0; i < batch; ++i)
      out.push_back(&records_[uniform_index(rng, records_.size())]);
    return out;
  }

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;
  std::vector<TransitionRecord> records_;
};

}  // namespace htlm
