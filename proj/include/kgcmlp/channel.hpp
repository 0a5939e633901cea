#pragma once

// In-memory datagram link with injected impairments, driven by virtual ticks.
// The whole link is a deterministic function of (config, traffic, ticks).

#include <cstdint>
#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "kgcmlp/error.hpp"
#include "kgcmlp/rng.hpp"

namespace kgcmlp {

struct ChannelConfig {
  double drop_prob = 0.0;
  double dup_prob = 0.0;
  double corrupt_prob = 0.0;  // flips exactly one uniformly chosen bit
  double reorder_prob = 0.0;  // extra delay of 1..reorder_window ticks
  std::uint64_t latency_ticks = 0;
  std::uint64_t reorder_window = 4;
  std::uint64_t rng_seed = 1;

  void validate() const {
    for (double p : {drop_prob, dup_prob, corrupt_prob, reorder_prob})
      if (!(p >= 0.0 && p <= 1.0)) throw ParameterError("channel probabilities must lie in [0, 1]");
    if (reorder_window < 1) throw ParameterError("reorder_window must be >= 1");
  }
};

struct ChannelStats {
  std::uint64_t frames_sent = 0;
  std::uint64_t bytes_sent = 0;
  std::uint64_t frames_delivered = 0;
  std::uint64_t frames_dropped = 0;
  std::uint64_t frames_duplicated = 0;
  std::uint64_t corrupted_delivered = 0;
};

class SimulatedLink {
 public:
  explicit SimulatedLink(const ChannelConfig& cfg, int endpoints = 2)
      : cfg_(cfg), queues_(static_cast<std::size_t>(endpoints)) {
    cfg_.validate();
    if (endpoints < 1) throw ParameterError("SimulatedLink needs at least one endpoint");
    rng_ = derive_stream(kZeroSeedFallback, cfg.rng_seed);
  }

  // Schedules `bytes` for delivery to endpoint `to`.
  void send(int to, const std::vector<std::uint8_t>& bytes, std::uint64_t now) {
    if (bytes.empty()) throw ParameterError("SimulatedLink::send: empty datagram");
    auto& queue = queues_.at(static_cast<std::size_t>(to));
    ++stats_.frames_sent;
    stats_.bytes_sent += bytes.size();
    if (chance(cfg_.drop_prob)) {
      ++stats_.frames_dropped;
      return;
    }
    int copies = 1;
    if (chance(cfg_.dup_prob)) {
      ++copies;
      ++stats_.frames_duplicated;
    }
    for (int c = 0; c < copies; ++c) {
      Entry e{bytes, false};
      if (chance(cfg_.corrupt_prob)) {
        const auto bit = uniform_below(rng_, bytes.size() * 8);
        e.bytes[bit / 8] ^= static_cast<std::uint8_t>(1U << (bit % 8));
        e.corrupted = true;
      }
      std::uint64_t at = now + cfg_.latency_ticks;
      if (chance(cfg_.reorder_prob)) at += 1 + uniform_below(rng_, cfg_.reorder_window);
      queue.emplace(std::make_pair(at, seq_++), std::move(e));
    }
  }

  // All datagrams for `endpoint` due at or before `now`, in schedule order.
  std::vector<std::vector<std::uint8_t>> poll(int endpoint, std::uint64_t now) {
    auto& queue = queues_.at(static_cast<std::size_t>(endpoint));
    std::vector<std::vector<std::uint8_t>> out;
    auto it = queue.begin();
    while (it != queue.end() && it->first.first <= now) {
      ++stats_.frames_delivered;
      if (it->second.corrupted) ++stats_.corrupted_delivered;
      out.push_back(std::move(it->second.bytes));
      it = queue.erase(it);
    }
    return out;
  }

  std::optional<std::uint64_t> next_delivery_tick() const {
    std::optional<std::uint64_t> best;
    for (const auto& q : queues_)
      if (!q.empty() && (!best || q.begin()->first.first < *best)) best = q.begin()->first.first;
    return best;
  }

  const ChannelStats& stats() const { return stats_; }
  const ChannelConfig& config() const { return cfg_; }

 private:
  struct Entry {
    std::vector<std::uint8_t> bytes;
    bool corrupted = false;
  };

  bool chance(double p) {
    if (p <= 0.0) return false;
    if (p >= 1.0) return true;
    return uniform_unit(rng_) < p;
  }

  ChannelConfig cfg_;
  RngState rng_;
  std::uint64_t seq_ = 0;
  std::vector<std::map<std::pair<std::uint64_t, std::uint64_t>, Entry>> queues_;
  ChannelStats stats_;
};

}  // namespace kgcmlp
