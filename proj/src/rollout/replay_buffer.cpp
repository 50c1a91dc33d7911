// SPDX-License-Identifier: Apache-2.0
#include "cmbrl/rollout/replay_buffer.hpp"

#include "cmbrl/errors.hpp"

namespace cmbrl::rollout {

void ReplayBuffer::push(mac::Transition t) {
  if (capacity_ != 0 && items_.size() == capacity_) items_.pop_front();
  items_.push_back(std::move(t));
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t count, Rng& rng) const {
  if (count > items_.size()) {
    throw UsageError("cannot sample " + std::to_string(count) + " of " + std::to_string(items_.size()) +
                     " transitions without replacement");
  }
  return sample_without_replacement(items_.size(), count, rng);
}

CombinedBuffer combine(const ReplayBuffer& real, const std::vector<mac::Transition>& synthetic) {
  CombinedBuffer out;
  out.items.reserve(real.size() + synthetic.size());
  for (const auto& t : real.items()) out.items.push_back(&t);
  for (const auto& t : synthetic) out.items.push_back(&t);
  for (const auto* t : out.items) (t->synthetic ? out.synthetic_count : out.real_count) += 1;
  return out;
}

}  // namespace cmbrl::rollout
