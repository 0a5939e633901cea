#pragma once

// Hosts that run a sender and a receiver: one over the simulated link in
// virtual time, and one endpoint-per-process binding over UDP where a tick is
// one millisecond.

#include <chrono>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <variant>

#include "kgcmlp/channel.hpp"
#include "kgcmlp/frame.hpp"
#include "kgcmlp/protocol.hpp"
#include "kgcmlp/udp.hpp"

namespace kgcmlp {

struct ExchangeOptions {
  ProtocolConfig protocol;
  // Receiver-side config when it must differ (mismatched secret codes).
  std::optional<ProtocolConfig> receiver_protocol;
  ChannelConfig channel;
  RngState sender_rng{1, 2};
  RngState receiver_rng{3, 4};
  std::uint64_t max_rounds = 1'000'000;  // SYN frames before giving up
  // Re-deliver every decoded frame right after the original and check that
  // the copy leaves the endpoint's state digest untouched.
  bool inject_replays = false;
  // Optional tap on every decoded frame that reaches an endpoint.
  std::function<void(int to, const Frame&)> on_frame;
};

struct ExchangeReport {
  Phase sender_phase = Phase::Idle;
  Phase receiver_phase = Phase::Idle;
  std::optional<SessionKey> sender_key;
  std::optional<SessionKey> receiver_key;
  std::string failure;
  bool capped = false;
  std::uint64_t rounds = 0;           // SYN frames the sender emitted
  std::uint64_t bytes_exchanged = 0;  // encoded bytes handed to the link
  std::uint64_t frames_encoded = 0;
  std::uint64_t crc_rejections = 0;
  std::uint64_t other_decode_rejections = 0;
  std::uint64_t stale_frames = 0;          // rejected by id checks
  std::uint64_t stale_state_changes = 0;   // must stay zero
  std::uint64_t replays_injected = 0;
  std::uint64_t replay_state_changes = 0;  // must stay zero
  std::uint64_t ticks = 0;
  ChannelStats channel;
  SenderState sender;
  ReceiverState receiver;

  bool established() const {
    return sender_phase == Phase::Established && receiver_phase == Phase::Established &&
           sender_key && receiver_key && *sender_key == *receiver_key;
  }
};

inline ExchangeReport run_exchange(const ExchangeOptions& opt) {
  constexpr int kSender = 0;
  constexpr int kReceiver = 1;
  const ProtocolConfig& cfg = opt.protocol;
  const ProtocolConfig& rcfg = opt.receiver_protocol ? *opt.receiver_protocol : opt.protocol;

  ExchangeReport rep;
  RngState srng = opt.sender_rng;
  RngState rrng = opt.receiver_rng;
  SenderState sender = make_sender(cfg, srng);
  ReceiverState receiver = make_receiver(rcfg, rrng);
  SimulatedLink link(opt.channel);
  std::optional<std::uint64_t> timer;
  std::uint64_t now = 0;

  auto dispatch = [&](const Actions& actions, int from) {
    for (const auto& a : actions) {
      if (const auto* s = std::get_if<SendFrame>(&a)) {
        auto bytes = encode_frame(s->frame);
        rep.bytes_exchanged += bytes.size();
        ++rep.frames_encoded;
        link.send(from == kSender ? kReceiver : kSender, bytes, now);
      } else if (const auto* t = std::get_if<SetTimer>(&a)) {
        if (from == kSender) timer = now + t->ticks;
      } else if (std::holds_alternative<CancelTimer>(a)) {
        if (from == kSender) timer.reset();
      } else if (const auto* d = std::get_if<DeliverKey>(&a)) {
        (from == kSender ? rep.sender_key : rep.receiver_key) = d->key;
      } else if (const auto* f = std::get_if<Fail>(&a)) {
        if (rep.failure.empty()) rep.failure = (from == kSender ? "sender: " : "receiver: ") + f->reason;
      }
    }
  };

  auto deliver = [&](int to) {
    for (const auto& bytes : link.poll(to, now)) {
      Frame frame;
      try {
        frame = decode_frame(bytes);
      } catch (const IntegrityError&) {
        ++rep.crc_rejections;
        continue;
      } catch (const Error&) {
        ++rep.other_decode_rejections;
        continue;
      }
      if (opt.on_frame) opt.on_frame(to, frame);
      if (to == kReceiver) {
        const bool stale = !integrity_check(frame, receiver.last_seen_id);
        const auto before = stale ? state_digest(receiver) : 0;
        dispatch(receiver_advance(receiver, EventFrame{frame}, rcfg, rrng), kReceiver);
        if (stale) {
          ++rep.stale_frames;
          if (state_digest(receiver) != before) ++rep.stale_state_changes;
        }
        if (opt.inject_replays) {
          const auto settled = state_digest(receiver);
          ++rep.replays_injected;
          const auto actions = receiver_advance(receiver, EventFrame{frame}, rcfg, rrng);
          if (state_digest(receiver) != settled) ++rep.replay_state_changes;
          dispatch(actions, kReceiver);
        }
      } else {
        const bool stale = !sender.awaiting || frame.id != *sender.awaiting;
        const auto before = stale ? state_digest(sender) : 0;
        dispatch(sender_advance(sender, EventFrame{frame}, cfg, srng), kSender);
        if (stale) {
          ++rep.stale_frames;
          if (state_digest(sender) != before) ++rep.stale_state_changes;
        }
        if (opt.inject_replays) {
          const auto settled = state_digest(sender);
          ++rep.replays_injected;
          const auto actions = sender_advance(sender, EventFrame{frame}, cfg, srng);
          if (state_digest(sender) != settled) ++rep.replay_state_changes;
          dispatch(actions, kSender);
        }
      }
    }
  };

  dispatch(sender_advance(sender, EventStart{}, cfg, srng), kSender);
  for (;;) {
    deliver(kReceiver);
    deliver(kSender);
    if (timer && *timer <= now) {
      timer.reset();
      dispatch(sender_advance(sender, EventTimerFired{}, cfg, srng), kSender);
    }
    if (sender.phase == Phase::Established || sender.phase == Phase::Failed) break;
    if (sender.counters.rounds > opt.max_rounds) {
      rep.capped = true;
      break;
    }
    auto next = link.next_delivery_tick();
    if (timer && (!next || *timer < *next)) next = timer;
    if (!next) break;  // nothing left in flight
    now = std::max(now, *next);
  }

  rep.sender_phase = sender.phase;
  rep.receiver_phase = receiver.phase;
  rep.rounds = sender.counters.rounds;
  rep.ticks = now;
  rep.channel = link.stats();
  if (rep.failure.empty() && rep.capped) rep.failure = "round cap reached";
  rep.sender = std::move(sender);
  rep.receiver = std::move(receiver);
  return rep;
}

// Per-frame key for the data phase: both synchronized parties expand a fresh
// public seed into input rounds and concatenate the hidden-unit output bits
// until 128 bits are collected.
inline Block128 frame_key(const TpmNetwork& net, const Seed128& seed) {
  Block128 key{};
  RngState gen = seed_from_bytes(seed);
  std::size_t bit = 0;
  while (bit < 128) {
    auto [x, next] = draw_inputs(gen, net.params().k, net.params().n);
    gen = next;
    for (auto b : hidden_output_key(evaluate(net, x))) {
      if (bit == 128) break;
      if (b) key[bit / 8] |= static_cast<std::uint8_t>(0x80U >> (bit % 8));
      ++bit;
    }
  }
  return key;
}

struct UdpRunResult {
  Phase phase = Phase::Idle;
  std::optional<SessionKey> key;
  std::string failure;
  std::uint64_t rounds = 0;
  std::uint64_t bytes_sent = 0;
  TpmNetwork net;
};

namespace detail {
inline void udp_dispatch(UdpSocket& sock, const Actions& actions, UdpRunResult& res,
                         std::optional<std::chrono::steady_clock::time_point>* timer) {
  for (const auto& a : actions) {
    if (const auto* s = std::get_if<SendFrame>(&a)) {
      auto bytes = encode_frame(s->frame);
      res.bytes_sent += bytes.size();
      sock.send(bytes);
    } else if (const auto* t = std::get_if<SetTimer>(&a)) {
      if (timer) *timer = std::chrono::steady_clock::now() + std::chrono::milliseconds(t->ticks);
    } else if (std::holds_alternative<CancelTimer>(a)) {
      if (timer) timer->reset();
    } else if (const auto* d = std::get_if<DeliverKey>(&a)) {
      res.key = d->key;
    } else if (const auto* f = std::get_if<Fail>(&a)) {
      res.failure = f->reason;
    }
  }
}

inline std::optional<Frame> try_decode(const std::vector<std::uint8_t>& bytes) {
  try {
    return decode_frame(bytes);
  } catch (const Error&) {
    return std::nullopt;
  }
}
}  // namespace detail

// Runs the sender until it is Established or Failed. `sock` must already know
// its peer.
inline UdpRunResult run_udp_sender(UdpSocket& sock, const ProtocolConfig& cfg, RngState rng,
                                   std::uint64_t max_rounds) {
  using clock = std::chrono::steady_clock;
  UdpRunResult res;
  SenderState s = make_sender(cfg, rng);
  std::optional<clock::time_point> timer;
  detail::udp_dispatch(sock, sender_advance(s, EventStart{}, cfg, rng), res, &timer);
  while (s.phase == Phase::Synchronizing || s.phase == Phase::Certifying) {
    if (s.counters.rounds > max_rounds) {
      res.failure = "round cap reached";
      break;
    }
    int wait_ms = 1000;
    if (timer) {
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(*timer - clock::now());
      wait_ms = static_cast<int>(std::max<long long>(0, left.count()));
    }
    auto datagram = sock.receive(wait_ms);
    if (datagram) {
      if (auto frame = detail::try_decode(*datagram))
        detail::udp_dispatch(sock, sender_advance(s, EventFrame{*frame}, cfg, rng), res, &timer);
    }
    if (timer && clock::now() >= *timer) {
      timer.reset();
      detail::udp_dispatch(sock, sender_advance(s, EventTimerFired{}, cfg, rng), res, &timer);
    }
  }
  res.phase = s.phase;
  res.rounds = s.counters.rounds;
  res.net = s.net;
  return res;
}

// Serves one exchange. Returns after Failed, after `idle_ms` without traffic,
// or once Established and quiet for `linger_ms` (so retransmitted AUTH frames
// still get answered).
inline UdpRunResult run_udp_receiver(UdpSocket& sock, const ProtocolConfig& cfg, RngState rng,
                                     int idle_ms, int linger_ms) {
  using clock = std::chrono::steady_clock;
  UdpRunResult res;
  ReceiverState r = make_receiver(cfg, rng);
  auto last_traffic = clock::now();
  while (r.phase != Phase::Failed) {
    const int budget = r.phase == Phase::Established ? linger_ms : idle_ms;
    const auto elapsed =
        std::chrono::duration_cast<std::chrono::milliseconds>(clock::now() - last_traffic).count();
    if (elapsed >= budget) break;
    auto datagram = sock.receive(static_cast<int>(budget - elapsed));
    if (!datagram) continue;
    last_traffic = clock::now();
    if (auto frame = detail::try_decode(*datagram))
      detail::udp_dispatch(sock, receiver_advance(r, EventFrame{*frame}, cfg, rng), res, nullptr);
  }
  if (r.phase != Phase::Established && r.phase != Phase::Failed && res.failure.empty())
    res.failure = "idle timeout";
  res.phase = r.phase;
  res.rounds = r.counters.rounds;
  res.net = r.net;
  return res;
}

}  // namespace kgcmlp
