#include "dan/dan_agent.hpp"
#include "dan/errors.hpp"

namespace dan {

void EpisodeTrace::validate() const {
  const std::size_t n = actions.size();
  if (n == 0) throw ValidationError("episode trace is empty");
  if (inputs.size() != n + 1 || rewards.size() != n || labels.size() != n)
    throw ValidationError("episode trace fields have inconsistent lengths");
  if (!null_obs.empty() && null_obs.size() != n) throw ValidationError("episode trace null flags have the wrong length");
  for (std::size_t i = 1; i < inputs.size(); ++i)
    if (inputs[i].size() != inputs[0].size()) throw ValidationError("episode trace input widths differ");
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ValidationError("replay capacity must be positive");
}

void ReplayBuffer::add(EpisodeTrace episode) {
  episode.validate();
  if (episodes_.size() == capacity_) episodes_.pop_front();
  episodes_.push_back(std::move(episode));
}

std::vector<Slice> ReplayBuffer::sample(std::size_t count, std::size_t length, Rng& rng, bool end_aligned) const {
  std::vector<Slice> out;
  if (episodes_.size() < count || count == 0) return out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const EpisodeTrace& ep = episodes_[rng.uniform_int(episodes_.size())];
    const std::size_t len = std::min(length, ep.length());
    const std::size_t span = ep.length() - len;
    const std::size_t start = end_aligned ? span : rng.uniform_int(span + 1);
    out.push_back({&ep, start, len});
  }
  return out;
}

}  // namespace dan
