#include "hed/replay.hpp"

#include <cmath>
#include <stdexcept>

#include "hed/binary_io.hpp"

namespace hed {

Transition TransitionBatch::at(std::size_t k) const {
  return {s.column(k), a.column(k), r[k], s_next.column(k), terminated[k] != 0};
}

TransitionBatch TransitionBatch::from_transitions(const std::vector<Transition>& ts) {
  if (ts.empty()) throw std::invalid_argument("TransitionBatch: empty transition list");
  const std::size_t sd = ts.front().s.size();
  const std::size_t ad = ts.front().a.size();
  const std::size_t n = ts.size();
  TransitionBatch b;
  b.s.resize(sd, n);
  b.a.resize(ad, n);
  b.s_next.resize(sd, n);
  b.r.resize(n);
  b.terminated.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    const auto& t = ts[k];
    if (t.s.size() != sd || t.s_next.size() != sd || t.a.size() != ad)
      throw std::invalid_argument("TransitionBatch: inconsistent dimensions");
    for (std::size_t d = 0; d < sd; ++d) {
      b.s(d, k) = t.s[d];
      b.s_next(d, k) = t.s_next[d];
    }
    for (std::size_t d = 0; d < ad; ++d) b.a(d, k) = t.a[d];
    b.r[k] = t.r;
    b.terminated[k] = t.terminated ? 1 : 0;
  }
  return b;
}

ReplayBuffer::ReplayBuffer(std::size_t state_dim, std::size_t action_dim, std::size_t capacity)
    : state_dim_(state_dim), action_dim_(action_dim), capacity_(capacity) {
  if (state_dim == 0 || action_dim == 0 || capacity == 0)
    throw std::invalid_argument("ReplayBuffer: dims and capacity must be >= 1");
}

void ReplayBuffer::push(const Transition& t) {
  if (t.s.size() != state_dim_ || t.s_next.size() != state_dim_ || t.a.size() != action_dim_)
    throw std::invalid_argument("ReplayBuffer::push: dimension mismatch");
  if (!std::isfinite(t.r)) throw std::invalid_argument("ReplayBuffer::push: non-finite reward");

  if (size_ < capacity_) {
    s_.insert(s_.end(), t.s.begin(), t.s.end());
    a_.insert(a_.end(), t.a.begin(), t.a.end());
    s_next_.insert(s_next_.end(), t.s_next.begin(), t.s_next.end());
    r_.push_back(t.r);
    terminated_.push_back(t.terminated ? 1 : 0);
    ++size_;
  } else {
    std::copy(t.s.begin(), t.s.end(), s_.begin() + static_cast<std::ptrdiff_t>(cursor_ * state_dim_));
    std::copy(t.a.begin(), t.a.end(), a_.begin() + static_cast<std::ptrdiff_t>(cursor_ * action_dim_));
    std::copy(t.s_next.begin(), t.s_next.end(), s_next_.begin() + static_cast<std::ptrdiff_t>(cursor_ * state_dim_));
    r_[cursor_] = t.r;
    terminated_[cursor_] = t.terminated ? 1 : 0;
  }
  cursor_ = (cursor_ + 1) % capacity_;
}

Transition ReplayBuffer::slot(std::size_t k) const {
  Transition t;
  t.s.assign(s_.begin() + static_cast<std::ptrdiff_t>(k * state_dim_),
             s_.begin() + static_cast<std::ptrdiff_t>((k + 1) * state_dim_));
  t.a.assign(a_.begin() + static_cast<std::ptrdiff_t>(k * action_dim_),
             a_.begin() + static_cast<std::ptrdiff_t>((k + 1) * action_dim_));
  t.s_next.assign(s_next_.begin() + static_cast<std::ptrdiff_t>(k * state_dim_),
                  s_next_.begin() + static_cast<std::ptrdiff_t>((k + 1) * state_dim_));
  t.r = r_[k];
  t.terminated = terminated_[k] != 0;
  return t;
}

Transition ReplayBuffer::at(std::size_t logical_index) const {
  if (logical_index >= size_) throw std::out_of_range("ReplayBuffer::at: index out of range");
  const std::size_t oldest = size_ < capacity_ ? 0 : cursor_;
  return slot((oldest + logical_index) % capacity_);
}

std::vector<std::size_t> ReplayBuffer::sample_slots(std::size_t batch_size, Rng& rng) const {
  if (size_ == 0) throw std::logic_error("ReplayBuffer::sample: buffer is empty");
  std::vector<std::size_t> slots(batch_size);
  for (auto& s : slots) s = uniform_index(rng, size_);
  return slots;
}

TransitionBatch ReplayBuffer::gather(const std::vector<std::size_t>& slots) const {
  const std::size_t n = slots.size();
  TransitionBatch b;
  b.s.resize(state_dim_, n);
  b.a.resize(action_dim_, n);
  b.s_next.resize(state_dim_, n);
  b.r.resize(n);
  b.terminated.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t j = slots[k];
    if (j >= size_) throw std::out_of_range("ReplayBuffer::gather: slot out of range");
    for (std::size_t d = 0; d < state_dim_; ++d) {
      b.s(d, k) = s_[j * state_dim_ + d];
      b.s_next(d, k) = s_next_[j * state_dim_ + d];
    }
    for (std::size_t d = 0; d < action_dim_; ++d) b.a(d, k) = a_[j * action_dim_ + d];
    b.r[k] = r_[j];
    b.terminated[k] = terminated_[j];
  }
  return b;
}

TransitionBatch ReplayBuffer::sample(std::size_t batch_size, Rng& rng) const {
  return gather(sample_slots(batch_size, rng));
}

void ReplayBuffer::write(std::ostream& out) const {
  io::write_magic(out, "HEDR");
  io::write_le<std::uint32_t>(out, 1);
  io::write_le<std::uint64_t>(out, state_dim_);
  io::write_le<std::uint64_t>(out, action_dim_);
  io::write_le<std::uint64_t>(out, capacity_);
  io::write_le<std::uint64_t>(out, size_);
  io::write_le<std::uint64_t>(out, cursor_);
  io::write_f64s(out, s_);
  io::write_f64s(out, a_);
  io::write_f64s(out, r_);
  io::write_f64s(out, s_next_);
  io::write_le<std::uint64_t>(out, terminated_.size());
  out.write(reinterpret_cast<const char*>(terminated_.data()), static_cast<std::streamsize>(terminated_.size()));
}

ReplayBuffer ReplayBuffer::read(std::istream& in) {
  io::expect_magic(in, "HEDR");
  if (io::read_le<std::uint32_t>(in) != 1) throw CheckpointError("unsupported replay buffer version");
  const auto sd = io::read_le<std::uint64_t>(in);
  const auto ad = io::read_le<std::uint64_t>(in);
  const auto cap = io::read_le<std::uint64_t>(in);
  if (sd == 0 || ad == 0 || cap == 0) throw CheckpointError("invalid replay buffer header");
  ReplayBuffer buf(sd, ad, cap);
  buf.size_ = io::read_le<std::uint64_t>(in);
  buf.cursor_ = io::read_le<std::uint64_t>(in);
  if (buf.size_ > cap || buf.cursor_ >= cap) throw CheckpointError("invalid replay buffer cursor");
  buf.s_ = io::read_f64s(in);
  buf.a_ = io::read_f64s(in);
  buf.r_ = io::read_f64s(in);
  buf.s_next_ = io::read_f64s(in);
  const auto nt = io::read_le<std::uint64_t>(in);
  if (nt != buf.size_) throw CheckpointError("replay buffer flag count mismatch");
  buf.terminated_.resize(nt);
  if (nt > 0 && !in.read(reinterpret_cast<char*>(buf.terminated_.data()), static_cast<std::streamsize>(nt)))
    throw CheckpointError("truncated checkpoint data");
  if (buf.s_.size() != buf.size_ * sd || buf.s_next_.size() != buf.size_ * sd || buf.a_.size() != buf.size_ * ad ||
      buf.r_.size() != buf.size_)
    throw CheckpointError("replay buffer payload sizes inconsistent");
  return buf;
}

}  // namespace hed
