#pragma once

// Sender and receiver state machines for key generation and certification.
//
// Key generation: the sender repeatedly emits SYN{seed, tau, E_k(ST)}. The
// receiver runs the synchronization test on every fresh SYN; on failure it
// regenerates the inputs from the seed, compares outputs, learns on agreement
// and answers ACK_SYN / NAK_SYN echoing the SYN id. Once the test passes it
// answers FIN_SYN{iv}.
//
// A timed-out round is retransmitted unchanged under a new id. The receiver
// keys rounds by their seed and answers a repeated round from its cached
// reply, so every round is learned at most once on each side. Certification: sender sends AUTH{E_key(SSC)}, the
// receiver verifies SSC and answers AUTH{E_key(RSC)}, the sender verifies RSC.
//
// Transition functions only mutate the endpoint state and return actions;
// transport and timers belong to the host. The host keeps one timer per
// endpoint: SetTimer re-arms it, CancelTimer disarms it.

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "kgcmlp/error.hpp"
#include "kgcmlp/frame.hpp"
#include "kgcmlp/key_codec.hpp"
#include "kgcmlp/rng.hpp"
#include "kgcmlp/tpm.hpp"

namespace kgcmlp {

enum class SeedMode {
  InFrame,    // the SYN seed field drives the input generator directly
  PreShared,  // the SYN seed field is a public nonce mixed into a shared seed
};

enum class Phase { Idle, Synchronizing, Certifying, Established, Failed };

inline const char* to_string(Phase p) {
  switch (p) {
    case Phase::Idle: return "Idle";
    case Phase::Synchronizing: return "Synchronizing";
    case Phase::Certifying: return "Certifying";
    case Phase::Established: return "Established";
    case Phase::Failed: return "Failed";
  }
  return "?";
}

struct ProtocolConfig {
  TpmParams params;
  LearningRule rule = LearningRule::RandomWalk;
  Block128 st{};   // public test plaintext
  Block128 ssc{};  // sender secret code
  Block128 rsc{};  // receiver secret code
  std::uint32_t timeout_ticks = 500;
  std::uint32_t max_attempts = 5;
  SeedMode seed_mode = SeedMode::InFrame;
  Seed128 preshared_seed{};
  SyncCheck sync_check = SyncCheck::Digest;
  Cipher cipher;

  void validate() const {
    params.validate();
    if (timeout_ticks < 1) throw ParameterError("timeout_ticks must be >= 1");
    if (max_attempts < 1) throw ParameterError("max_attempts must be >= 1");
    const std::size_t groups = params.weights_per_layer() * 8 / 128;
    if (groups < 1) throw ParameterError("k*n must be >= 16 to yield a 128-bit key");
    if (groups > 256) throw ParameterError("k*n too large for a one-byte iv");
  }

  std::size_t key_groups() const { return params.weights_per_layer() * 8 / 128; }
};

// Synchronization test: decrypting ek_st under the network's test key must
// give back ST.
inline bool sync_test(const TpmNetwork& net, const Block128& ek_st, const Block128& st,
                      SyncCheck mode = SyncCheck::FirstBlock, const Cipher& cipher = {}) {
  return cipher.decrypt(sync_test_key(net, mode), ek_st) == st;
}

// Input stream for the round announced with `frame_seed`.
inline RngState round_generator(const ProtocolConfig& cfg, const Seed128& frame_seed) {
  const RngState carried = seed_from_bytes(frame_seed);
  if (cfg.seed_mode == SeedMode::PreShared)
    return derive_stream(seed_from_bytes(cfg.preshared_seed),
                         carried.s0 ^ detail::splitmix64(carried.s1));
  return carried;
}

struct EventStart {};
struct EventTimerFired {};
struct EventFrame {
  Frame frame;
};
using Event = std::variant<EventStart, EventTimerFired, EventFrame>;

struct SendFrame {
  Frame frame;
};
struct SetTimer {
  std::uint32_t ticks = 0;
};
struct CancelTimer {};
struct DeliverKey {
  SessionKey key;
};
struct Fail {
  std::string reason;
};
// Event ignored in the current phase; state untouched.
struct Diagnostic {
  std::string text;
};
using Action = std::variant<SendFrame, SetTimer, CancelTimer, DeliverKey, Fail, Diagnostic>;
using Actions = std::vector<Action>;

struct ProtocolCounters {
  std::uint64_t rounds = 0;          // SYN frames sent (sender) / SYNs tested (receiver)
  std::uint64_t learning_steps = 0;  // rounds in which this side applied the rule
  std::uint64_t tau_mismatches = 0;  // NAK_SYN sent or received
  std::uint64_t retransmissions = 0; // repeated SYN/AUTH sent (sender) / answered from cache (receiver)

  friend bool operator==(const ProtocolCounters&, const ProtocolCounters&) = default;
};

struct SenderState {
  Phase phase = Phase::Idle;
  TpmNetwork net;
  std::uint32_t next_id = 0;  // incremented before every send
  std::optional<std::uint32_t> awaiting;
  std::uint32_t attempts = 0;
  Seed128 seed{};      // current round
  InputMatrix inputs;
  Evaluation eval;
  std::optional<SessionKey> session;
  ProtocolCounters counters;
  std::string failure;
};

struct ReceiverState {
  Phase phase = Phase::Idle;
  TpmNetwork net;
  std::uint32_t last_seen_id = 0;
  // Last processed round and the payload it was answered with.
  std::optional<Seed128> round_seed;
  std::optional<FramePayload> round_reply;
  std::optional<SessionKey> session;
  ProtocolCounters counters;
  std::string failure;
};

inline SenderState make_sender(const ProtocolConfig& cfg, RngState& rng) {
  cfg.validate();
  SenderState s;
  s.net = init_network(cfg.params, rng);
  return s;
}

inline ReceiverState make_receiver(const ProtocolConfig& cfg, RngState& rng) {
  cfg.validate();
  ReceiverState r;
  r.net = init_network(cfg.params, rng);
  return r;
}

namespace detail {

// (Re)sends the current round under a fresh id.
inline void send_round(SenderState& s, const ProtocolConfig& cfg, Actions& out) {
  const std::uint32_t id = ++s.next_id;
  const Block128 ek_st = cfg.cipher.encrypt(sync_test_key(s.net, cfg.sync_check), cfg.st);
  s.awaiting = id;
  ++s.attempts;
  out.emplace_back(SendFrame{Frame{id, SynPayload{s.seed, s.eval.tau, ek_st}}});
  out.emplace_back(SetTimer{cfg.timeout_ticks});
}

inline void emit_round(SenderState& s, const ProtocolConfig& cfg, RngState& rng, Actions& out) {
  s.seed = random_seed(rng);
  s.inputs = draw_inputs(round_generator(cfg, s.seed), cfg.params.k, cfg.params.n).first;
  s.eval = evaluate(s.net, s.inputs);
  ++s.counters.rounds;
  send_round(s, cfg, out);
}

inline void emit_auth(SenderState& s, const ProtocolConfig& cfg, Actions& out) {
  const std::uint32_t id = ++s.next_id;
  s.awaiting = id;
  ++s.attempts;
  out.emplace_back(SendFrame{Frame{id, AuthPayload{cfg.cipher.encrypt(s.session->key, cfg.ssc)}}});
  out.emplace_back(SetTimer{cfg.timeout_ticks});
}

inline void fail(Phase& phase, std::string& failure, std::string reason, Actions& out) {
  phase = Phase::Failed;
  failure = reason;
  out.emplace_back(CancelTimer{});
  out.emplace_back(Fail{std::move(reason)});
}

inline std::string ignored(const char* who, const Frame& f, Phase p, const char* why) {
  return std::string(who) + ": ignored " + to_string(f.command()) + " id " + std::to_string(f.id) +
         " in " + to_string(p) + " (" + why + ")";
}

}  // namespace detail

inline Actions sender_advance(SenderState& s, const Event& event, const ProtocolConfig& cfg,
                              RngState& rng) {
  Actions out;
  const bool active = s.phase == Phase::Synchronizing || s.phase == Phase::Certifying;

  if (std::holds_alternative<EventStart>(event)) {
    if (s.phase != Phase::Idle) {
      out.emplace_back(Diagnostic{"sender: Start ignored outside Idle"});
      return out;
    }
    s.phase = Phase::Synchronizing;
    detail::emit_round(s, cfg, rng, out);
    return out;
  }

  if (std::holds_alternative<EventTimerFired>(event)) {
    if (!active) {
      out.emplace_back(Diagnostic{"sender: timer ignored"});
      return out;
    }
    if (s.attempts >= cfg.max_attempts) {
      detail::fail(s.phase, s.failure, "attempts exceeded", out);
      return out;
    }
    ++s.counters.retransmissions;
    if (s.phase == Phase::Synchronizing)
      detail::send_round(s, cfg, out);
    else
      detail::emit_auth(s, cfg, out);
    return out;
  }

  const Frame& f = std::get<EventFrame>(event).frame;
  if (!active) {
    out.emplace_back(Diagnostic{detail::ignored("sender", f, s.phase, "inactive")});
    return out;
  }
  if (!s.awaiting || f.id != *s.awaiting) {
    out.emplace_back(Diagnostic{detail::ignored("sender", f, s.phase, "stale id")});
    return out;
  }

  if (s.phase == Phase::Synchronizing) {
    if (const auto* ack = std::get_if<AckSynPayload>(&f.payload)) {
      if (ack->tau == s.eval.tau) {
        apply_learning(s.net, s.inputs, s.eval, ack->tau, cfg.rule);
        ++s.counters.learning_steps;
      } else {
        ++s.counters.tau_mismatches;
      }
    } else if (std::holds_alternative<NakSynPayload>(f.payload)) {
      ++s.counters.tau_mismatches;
    } else if (const auto* fin = std::get_if<FinSynPayload>(&f.payload)) {
      if (fin->iv >= cfg.key_groups()) {
        out.emplace_back(Diagnostic{detail::ignored("sender", f, s.phase, "iv out of range")});
        return out;
      }
      s.session = extract_key(serialize_weights(s.net), fin->iv);
      s.phase = Phase::Certifying;
      s.attempts = 0;
      detail::emit_auth(s, cfg, out);
      return out;
    } else {
      out.emplace_back(Diagnostic{detail::ignored("sender", f, s.phase, "unexpected")});
      return out;
    }
    s.attempts = 0;
    detail::emit_round(s, cfg, rng, out);
    return out;
  }

  // Certifying
  const auto* auth = std::get_if<AuthPayload>(&f.payload);
  if (!auth) {
    out.emplace_back(Diagnostic{detail::ignored("sender", f, s.phase, "unexpected")});
    return out;
  }
  s.awaiting.reset();
  if (cfg.cipher.decrypt(s.session->key, auth->ek_code) == cfg.rsc) {
    s.phase = Phase::Established;
    out.emplace_back(CancelTimer{});
    out.emplace_back(DeliverKey{*s.session});
  } else {
    s.session.reset();
    detail::fail(s.phase, s.failure, "receiver certification failed", out);
  }
  return out;
}

inline Actions receiver_advance(ReceiverState& r, const Event& event, const ProtocolConfig& cfg,
                                RngState& rng) {
  Actions out;
  const auto* fe = std::get_if<EventFrame>(&event);
  if (!fe) {
    out.emplace_back(Diagnostic{"receiver: only frames drive the receiver"});
    return out;
  }
  const Frame& f = fe->frame;
  if (r.phase == Phase::Failed) {
    out.emplace_back(Diagnostic{detail::ignored("receiver", f, r.phase, "failed")});
    return out;
  }
  if (!integrity_check(f, r.last_seen_id)) {
    out.emplace_back(Diagnostic{detail::ignored("receiver", f, r.phase, "replayed or reordered id")});
    return out;
  }

  if (const auto* syn = std::get_if<SynPayload>(&f.payload)) {
    if (r.phase == Phase::Established) {
      out.emplace_back(Diagnostic{detail::ignored("receiver", f, r.phase, "already established")});
      return out;
    }
    r.last_seen_id = f.id;
    if (r.round_seed == syn->seed && r.round_reply) {
      ++r.counters.retransmissions;
      out.emplace_back(SendFrame{Frame{f.id, *r.round_reply}});
      return out;
    }
    ++r.counters.rounds;
    r.round_seed = syn->seed;
    if (sync_test(r.net, syn->ek_st, cfg.st, cfg.sync_check, cfg.cipher)) {
      const auto iv = uniform_below(rng, cfg.key_groups());
      r.session = extract_key(serialize_weights(r.net), iv);
      r.phase = Phase::Certifying;
      r.round_reply = FinSynPayload{r.session->iv};
      out.emplace_back(SendFrame{Frame{f.id, *r.round_reply}});
      return out;
    }
    r.session.reset();
    r.phase = Phase::Synchronizing;
    auto inputs = draw_inputs(round_generator(cfg, syn->seed), cfg.params.k, cfg.params.n).first;
    const Evaluation ev = evaluate(r.net, inputs);
    if (ev.tau == syn->tau) {
      apply_learning(r.net, inputs, ev, syn->tau, cfg.rule);
      ++r.counters.learning_steps;
      r.round_reply = AckSynPayload{ev.tau};
    } else {
      ++r.counters.tau_mismatches;
      r.round_reply = NakSynPayload{ev.tau};
    }
    out.emplace_back(SendFrame{Frame{f.id, *r.round_reply}});
    return out;
  }

  if (const auto* auth = std::get_if<AuthPayload>(&f.payload)) {
    if (!r.session) {
      out.emplace_back(Diagnostic{detail::ignored("receiver", f, r.phase, "no session")});
      return out;
    }
    const bool valid = cfg.cipher.decrypt(r.session->key, auth->ek_code) == cfg.ssc;
    if (r.phase == Phase::Established && !valid) {
      out.emplace_back(Diagnostic{detail::ignored("receiver", f, r.phase, "bad code after establishment")});
      return out;
    }
    r.last_seen_id = f.id;
    if (!valid) {
      r.session.reset();
      detail::fail(r.phase, r.failure, "sender certification failed", out);
      return out;
    }
    // Retransmitted AUTH after establishment gets the same answer again.
    out.emplace_back(SendFrame{Frame{f.id, AuthPayload{cfg.cipher.encrypt(r.session->key, cfg.rsc)}}});
    if (r.phase != Phase::Established) {
      r.phase = Phase::Established;
      out.emplace_back(DeliverKey{*r.session});
    }
    return out;
  }

  out.emplace_back(Diagnostic{detail::ignored("receiver", f, r.phase, "unexpected")});
  return out;
}

namespace detail {
class Fnv1a {
 public:
  void bytes(const void* data, std::size_t len) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    for (std::size_t i = 0; i < len; ++i) h_ = (h_ ^ p[i]) * 0x100000001B3ULL;
  }
  template <typename T>
  void value(const T& v) {
    bytes(&v, sizeof v);
  }
  void bytes_of(const std::vector<std::uint8_t>& v) { bytes(v.data(), v.size()); }
  void net(const TpmNetwork& n) {
    for (int layer = 0; layer < n.params().layers; ++layer) {
      auto w = n.layer(layer);
      bytes(w.data(), w.size());
    }
  }
  void session(const std::optional<SessionKey>& s) {
    value(s.has_value());
    if (s) {
      bytes(s->key.data(), s->key.size());
      value(s->iv);
    }
  }
  std::uint64_t digest() const { return h_; }

 private:
  std::uint64_t h_ = 0xCBF29CE484222325ULL;
};
}  // namespace detail

// Hash of every field that transitions may touch; used to prove that
// rejected frames leave an endpoint untouched.
inline std::uint64_t state_digest(const SenderState& s) {
  detail::Fnv1a h;
  h.value(s.phase);
  h.net(s.net);
  h.value(s.next_id);
  h.value(s.awaiting.has_value());
  h.value(s.awaiting.value_or(0));
  h.value(s.attempts);
  h.value(s.seed);
  h.bytes(s.inputs.values().data(), s.inputs.values().size());
  for (int sg : s.eval.sigmas) h.value(sg);
  h.value(s.eval.tau);
  h.session(s.session);
  h.value(s.counters);
  h.bytes(s.failure.data(), s.failure.size());
  return h.digest();
}

inline std::uint64_t state_digest(const ReceiverState& r) {
  detail::Fnv1a h;
  h.value(r.phase);
  h.net(r.net);
  h.value(r.last_seen_id);
  h.value(r.round_seed.has_value());
  if (r.round_seed) h.value(*r.round_seed);
  h.value(r.round_reply.has_value());
  if (r.round_reply) h.bytes_of(encode_frame(Frame{0, *r.round_reply}));
  h.session(r.session);
  h.value(r.counters);
  h.bytes(r.failure.data(), r.failure.size());
  return h.digest();
}

}  // namespace kgcmlp
