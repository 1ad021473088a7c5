#pragma once

#include <cstddef>
#include <mutex>
#include <optional>
#include <random>
#include <vector>

#include "qpass/state.hpp"

namespace qpass {

/// Bounded FIFO ring of experiences with uniform batch sampling.
/// insert and sample are linearizable with respect to each other.
class ReplayMemory {
 public:
  ReplayMemory(std::size_t capacity, std::size_t min_fill);

  void insert(const Experience& e);

  /// Uniform without replacement within the batch. Returns nullopt while the
  /// memory holds fewer than max(min_fill, batch_size) experiences.
  std::optional<std::vector<Experience>> sample(std::size_t batch_size, std::mt19937_64& rng) const;
  /// Same, returning ring indices; exposed for distribution checks.
  std::optional<std::vector<std::size_t>> sample_indices(std::size_t batch_size, std::mt19937_64& rng) const;

  std::size_t size() const;
  std::size_t capacity() const { return capacity_; }
  std::size_t min_fill() const { return min_fill_; }
  bool ready(std::size_t batch_size = 1) const;
  /// Snapshot in insertion order, oldest first.
  std::vector<Experience> contents() const;

 private:
  std::vector<std::size_t> draw(std::size_t n, std::size_t batch, std::mt19937_64& rng) const;

  std::size_t capacity_;
  std::size_t min_fill_;
  mutable std::mutex mu_;
  std::vector<Experience> ring_;
  std::size_t head_ = 0;  // next slot to overwrite once full
};

}  // namespace qpass
