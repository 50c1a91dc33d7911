// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <deque>
#include <vector>

#include "cmbrl/mac/env.hpp"

namespace cmbrl::rollout {

/// FIFO store of transitions. Capacity 0 means unbounded.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 0) : capacity_(capacity) {}

  void push(mac::Transition t);
  template <typename It>
  void extend(It first, It last) {
    for (; first != last; ++first) push(*first);
  }

  std::size_t size() const { return items_.size(); }
  bool empty() const { return items_.empty(); }
  std::size_t capacity() const { return capacity_; }
  const mac::Transition& operator[](std::size_t i) const { return items_[i]; }
  const std::deque<mac::Transition>& items() const { return items_; }
  void clear() { items_.clear(); }

  /// `count` distinct indices, every subset equally likely (Floyd's
  /// algorithm, one below() call per index). Throws UsageError if
  /// count > size().
  std::vector<std::size_t> sample_indices(std::size_t count, Rng& rng) const;

 private:
  std::size_t capacity_;
  std::deque<mac::Transition> items_;
};

/// Real and synthetic transitions side by side; provenance is read from the
/// transitions' `synthetic` flag.
struct CombinedBuffer {
  std::vector<const mac::Transition*> items;
  std::size_t real_count = 0;
  std::size_t synthetic_count = 0;
};

/// Multiset union; the buffers must outlive the result.
CombinedBuffer combine(const ReplayBuffer& real, const std::vector<mac::Transition>& synthetic);

}  // namespace cmbrl::rollout
