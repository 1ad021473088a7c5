#include "qpass/replay_memory.hpp"

#include <stdexcept>
#include <unordered_set>

namespace qpass {

ReplayMemory::ReplayMemory(std::size_t capacity, std::size_t min_fill) : capacity_(capacity), min_fill_(min_fill) {
  if (capacity == 0) throw std::invalid_argument("replay capacity must be positive");
}

void ReplayMemory::insert(const Experience& e) {
  std::lock_guard lock(mu_);
  if (ring_.size() < capacity_) {
    ring_.push_back(e);
    return;
  }
  ring_[head_] = e;
  head_ = (head_ + 1) % capacity_;
}

std::size_t ReplayMemory::size() const {
  std::lock_guard lock(mu_);
  return ring_.size();
}

bool ReplayMemory::ready(std::size_t batch_size) const {
  std::lock_guard lock(mu_);
  return ring_.size() >= min_fill_ && ring_.size() >= batch_size;
}

std::vector<std::size_t> ReplayMemory::draw(std::size_t n, std::size_t batch, std::mt19937_64& rng) const {
  // Floyd's algorithm keeps draws O(batch) and order-deterministic for a seed.
  std::vector<std::size_t> out;
  out.reserve(batch);
  std::unordered_set<std::size_t> chosen;
  for (std::size_t j = n - batch; j < n; ++j) {
    const std::size_t t = std::uniform_int_distribution<std::size_t>(0, j)(rng);
    if (chosen.insert(t).second) {
      out.push_back(t);
    } else {
      chosen.insert(j);
      out.push_back(j);
    }
  }
  return out;
}

std::optional<std::vector<std::size_t>> ReplayMemory::sample_indices(std::size_t batch_size,
                                                                     std::mt19937_64& rng) const {
  std::lock_guard lock(mu_);
  if (ring_.size() < min_fill_ || ring_.size() < batch_size || batch_size == 0) return std::nullopt;
  return draw(ring_.size(), batch_size, rng);
}

std::optional<std::vector<Experience>> ReplayMemory::sample(std::size_t batch_size, std::mt19937_64& rng) const {
  std::lock_guard lock(mu_);
  if (ring_.size() < min_fill_ || ring_.size() < batch_size || batch_size == 0) return std::nullopt;
  std::vector<Experience> out;
  out.reserve(batch_size);
  for (std::size_t i : draw(ring_.size(), batch_size, rng)) out.push_back(ring_[i]);
  return out;
}

std::vector<Experience> ReplayMemory::contents() const {
  std::lock_guard lock(mu_);
  std::vector<Experience> out;
  out.reserve(ring_.size());
  for (std::size_t i = 0; i < ring_.size(); ++i) out.push_back(ring_[(head_ + i) % ring_.size()]);
  return out;
}

}  // namespace qpass
