#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "hed/kernels.hpp"
#include "hed/rng.hpp"

namespace hed {

struct Transition {
  std::vector<double> s;
  std::vector<double> a;
  double r = 0.0;
  std::vector<double> s_next;
  bool terminated = false;

  bool operator==(const Transition&) const = default;
};

/// Mini-batch in feature-major layout (one column per sample).
struct TransitionBatch {
  Matrix s;
  Matrix a;
  std::vector<double> r;
  Matrix s_next;
  std::vector<unsigned char> terminated;

  std::size_t size() const { return r.size(); }
  Transition at(std::size_t k) const;
  static TransitionBatch from_transitions(const std::vector<Transition>& ts);
};

/// Shared ring buffer; FIFO eviction once full.
class ReplayBuffer {
 public:
  ReplayBuffer(std::size_t state_dim, std::size_t action_dim, std::size_t capacity = 1'000'000);

  void push(const Transition& t);

  std::size_t size() const { return size_; }
  std::size_t capacity() const { return capacity_; }
  std::size_t state_dim() const { return state_dim_; }
  std::size_t action_dim() const { return action_dim_; }

  /// Logical index 0 is the oldest stored transition.
  Transition at(std::size_t logical_index) const;

  /// Uniform sampling with replacement.
  std::vector<std::size_t> sample_slots(std::size_t batch_size, Rng& rng) const;
  TransitionBatch sample(std::size_t batch_size, Rng& rng) const;
  TransitionBatch gather(const std::vector<std::size_t>& slots) const;

  void write(std::ostream& out) const;
  static ReplayBuffer read(std::istream& in);

 private:
  Transition slot(std::size_t s) const;

  std::size_t state_dim_;
  std::size_t action_dim_;
  std::size_t capacity_;
  std::size_t size_ = 0;
  std::size_t cursor_ = 0;
  std::vector<double> s_;
  std::vector<double> a_;
  std::vector<double> r_;
  std::vector<double> s_next_;
  std::vector<unsigned char> terminated_;
};

}  // namespace hed
