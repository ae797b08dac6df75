#pragma once

#include <cstddef>
#include <deque>
#include <optional>
#include <stdexcept>
#include <vector>

namespace aoigpr {

/// One observed transition: normalized [AoI, per-RB powers] -> next AoI (ms).
struct Sample {
  std::vector<double> x;
  double y = 0.0;

  bool operator==(const Sample&) const = default;
};

/// Fixed-capacity FIFO window of samples, oldest first.
class SlidingDataset {
 public:
  explicit SlidingDataset(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw std::invalid_argument("dataset capacity must be >= 1");
  }

  /// Appends s; returns the evicted oldest sample when the window was full.
  std::optional<Sample> push(Sample s) {
    if (!samples_.empty() && s.x.size() != samples_.front().x.size())
      throw std::invalid_argument("sample dimension mismatch");
    samples_.push_back(std::move(s));
    if (samples_.size() > capacity_) {
      Sample old = std::move(samples_.front());
      samples_.pop_front();
      return old;
    }
    return std::nullopt;
  }

  std::size_t size() const noexcept { return samples_.size(); }
  std::size_t capacity() const noexcept { return capacity_; }
  bool empty() const noexcept { return samples_.empty(); }
  std::size_t dim() const noexcept { return samples_.empty() ? 0 : samples_.front().x.size(); }

  const Sample& operator[](std::size_t i) const { return samples_[i]; }
  auto begin() const { return samples_.begin(); }
  auto end() const { return samples_.end(); }

  /// Copy holding only the most recent n samples (all of them if n == 0 or n >= size).
  SlidingDataset tail(std::size_t n) const {
    if (n == 0 || n >= samples_.size()) return *this;
    SlidingDataset out(n);
    for (std::size_t i = samples_.size() - n; i < samples_.size(); ++i) out.samples_.push_back(samples_[i]);
    return out;
  }

 private:
  std::size_t capacity_;
  std::deque<Sample> samples_;
};

inline void push_sample(SlidingDataset& dataset, Sample s) { dataset.push(std::move(s)); }

}  // namespace aoigpr
