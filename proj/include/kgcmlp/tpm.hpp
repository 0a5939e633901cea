#pragma once

// Tree parity machine: the per-session view of the multilayer perceptron.
//
// A network holds `layers` weight matrices of k hidden units x n inputs, but
// only the active layer is ever evaluated or trained. Inactive layers keep
// their initial weights.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kgcmlp/error.hpp"
#include "kgcmlp/rng.hpp"

namespace kgcmlp {

inline constexpr int kMaxSynapticDepth = 127;

struct TpmParams {
  int k = 3;             // hidden units per layer
  int n = 32;            // inputs per hidden unit
  int l = 3;             // synaptic depth: weights live in [-l, +l]
  int layers = 1;        // hidden layers held by the network
  int active_layer = 0;  // the one layer used this session

  void validate() const {
    if (k < 1 || n < 1) throw ParameterError("TpmParams: k and n must be >= 1");
    if (l < 0 || l > kMaxSynapticDepth)
      throw ParameterError("TpmParams: l must lie in [0, 127], got " + std::to_string(l));
    if (layers < 1) throw ParameterError("TpmParams: layers must be >= 1");
    if (active_layer < 0 || active_layer >= layers)
      throw ParameterError("TpmParams: active_layer out of range");
  }

  std::size_t weights_per_layer() const { return static_cast<std::size_t>(k) * n; }

  friend bool operator==(const TpmParams&, const TpmParams&) = default;
};

enum class LearningRule { Hebbian, AntiHebbian, RandomWalk };

inline const char* to_string(LearningRule rule) {
  switch (rule) {
    case LearningRule::Hebbian: return "hebbian";
    case LearningRule::AntiHebbian: return "anti-hebbian";
    case LearningRule::RandomWalk: return "random-walk";
  }
  return "?";
}

inline std::optional<LearningRule> parse_rule(const std::string& name) {
  if (name == "hebbian") return LearningRule::Hebbian;
  if (name == "anti-hebbian") return LearningRule::AntiHebbian;
  if (name == "random-walk") return LearningRule::RandomWalk;
  return std::nullopt;
}

// Per-unit classification of one paired learning step.
enum class StepKind { Attractive, Repulsive, NoMove, Idle };

struct Evaluation {
  std::vector<double> fields;  // h_i = (1/sqrt n) sum_j w_ij x_ij
  std::vector<int> sigmas;     // sign(h_i), with sign(0) = -1
  int tau = 1;                 // product of sigmas

  friend bool operator==(const Evaluation&, const Evaluation&) = default;
};

class TpmNetwork {
 public:
  TpmNetwork() = default;

  explicit TpmNetwork(const TpmParams& params)
      : params_(params), weights_(checked(params).weights_per_layer() * params.layers, 0) {}

  // Network whose active layer holds `active` (row-major); other layers zero.
  static TpmNetwork from_weights(const TpmParams& params, std::span<const int> active) {
    TpmNetwork net(params);
    if (active.size() != params.weights_per_layer())
      throw ParameterError("TpmNetwork::from_weights: expected k*n weights");
    for (std::size_t p = 0; p < active.size(); ++p) net.set_flat(p, active[p]);
    return net;
  }

  const TpmParams& params() const { return params_; }

  int weight(int unit, int input) const { return active()[offset(unit, input)]; }
  void set_weight(int unit, int input, int w) { set_flat(offset(unit, input), w); }

  // Active-layer weights, row-major.
  std::span<const std::int8_t> active() const { return layer(params_.active_layer); }
  std::span<const std::int8_t> row(int unit) const {
    return active().subspan(static_cast<std::size_t>(unit) * params_.n, params_.n);
  }
  std::span<const std::int8_t> layer(int index) const {
    const std::size_t per = params_.weights_per_layer();
    return std::span<const std::int8_t>(weights_).subspan(per * index, per);
  }

  // Unit row of the active layer, for in-place updates.
  std::span<std::int8_t> mutable_row(int unit) {
    const std::size_t per = params_.weights_per_layer();
    return std::span<std::int8_t>(weights_).subspan(
        per * params_.active_layer + static_cast<std::size_t>(unit) * params_.n, params_.n);
  }

  friend bool operator==(const TpmNetwork&, const TpmNetwork&) = default;

 private:
  friend TpmNetwork init_network(const TpmParams&, RngState&);

  static const TpmParams& checked(const TpmParams& p) {
    p.validate();
    return p;
  }

  std::size_t offset(int unit, int input) const {
    if (unit < 0 || unit >= params_.k || input < 0 || input >= params_.n)
      throw ParameterError("TpmNetwork: weight index out of range");
    return static_cast<std::size_t>(unit) * params_.n + input;
  }

  void set_flat(std::size_t active_pos, int w) {
    if (w < -params_.l || w > params_.l)
      throw RangeError("TpmNetwork: weight " + std::to_string(w) + " outside [-l, l]");
    weights_[params_.weights_per_layer() * params_.active_layer + active_pos] =
        static_cast<std::int8_t>(w);
  }

  TpmParams params_;
  std::vector<std::int8_t> weights_;  // [layers][k][n]
};

// Every weight of every layer uniform on the 2l+1 integers in [-l, l], drawn
// layer by layer in row-major order.
inline TpmNetwork init_network(const TpmParams& params, RngState& rng) {
  TpmNetwork net(params);
  const std::uint64_t span = static_cast<std::uint64_t>(2 * params.l + 1);
  for (auto& w : net.weights_)
    w = static_cast<std::int8_t>(static_cast<int>(uniform_below(rng, span)) - params.l);
  return net;
}

inline void check_shape(const TpmNetwork& net, const InputMatrix& x) {
  if (x.k() != net.params().k || x.n() != net.params().n)
    throw ParameterError("input shape does not match network (k, n)");
}

inline Evaluation evaluate(const TpmNetwork& net, const InputMatrix& x) {
  check_shape(net, x);
  const int k = net.params().k;
  const double scale = 1.0 / std::sqrt(static_cast<double>(net.params().n));
  Evaluation ev;
  ev.fields.resize(k);
  ev.sigmas.resize(k);
  ev.tau = 1;
  for (int i = 0; i < k; ++i) {
    auto w = net.row(i);
    auto xi = x.row(i);
    long sum = 0;
    for (std::size_t j = 0; j < w.size(); ++j) sum += static_cast<long>(w[j]) * xi[j];
    ev.fields[i] = scale * static_cast<double>(sum);
    ev.sigmas[i] = sum > 0 ? 1 : -1;
    ev.tau *= ev.sigmas[i];
  }
  return ev;
}

// One learning step on the active layer, gated as
//   f = Theta(sigma_i tau) Theta(tau_self tau_other) * {sigma | -sigma | 1}
// followed by clamping to [-l, l]. `peer_sigmas`, when supplied (simulation
// only), lets the step be classified as attractive/repulsive/no-move.
inline std::vector<StepKind> apply_learning(TpmNetwork& net, const InputMatrix& x,
                                            const Evaluation& self, int tau_other,
                                            LearningRule rule,
                                            std::span<const int> peer_sigmas = {}) {
  check_shape(net, x);
  const int k = net.params().k;
  const int l = net.params().l;
  if (static_cast<int>(self.sigmas.size()) != k)
    throw ParameterError("apply_learning: evaluation does not match network");
  if (!peer_sigmas.empty() && static_cast<int>(peer_sigmas.size()) != k)
    throw ParameterError("apply_learning: peer sigma vector has wrong length");

  std::vector<StepKind> kinds(k, StepKind::Idle);
  if (self.tau != tau_other) return kinds;

  const int tau = self.tau;
  for (int i = 0; i < k; ++i) {
    if (peer_sigmas.empty()) {
      kinds[i] = StepKind::NoMove;
    } else if (self.sigmas[i] != peer_sigmas[i]) {
      kinds[i] = StepKind::Repulsive;
    } else {
      kinds[i] = self.sigmas[i] == tau ? StepKind::Attractive : StepKind::NoMove;
    }

    if (self.sigmas[i] != tau) continue;
    int direction = 1;
    switch (rule) {
      case LearningRule::Hebbian: direction = self.sigmas[i]; break;
      case LearningRule::AntiHebbian: direction = -self.sigmas[i]; break;
      case LearningRule::RandomWalk: direction = 1; break;
    }
    auto w = net.mutable_row(i);
    auto xi = x.row(i);
    for (std::size_t j = 0; j < w.size(); ++j) {
      const int updated = std::clamp(w[j] + direction * xi[j], -l, l);
      w[j] = static_cast<std::int8_t>(updated);
    }
  }
  return kinds;
}

struct OrderParams {
  double q_a = 0.0;
  double q_b = 0.0;
  double r = 0.0;
  std::optional<double> rho;  // empty when either row is all zero
};

inline void check_same_params(const TpmNetwork& a, const TpmNetwork& b) {
  if (!(a.params() == b.params())) throw ParameterError("networks have different parameters");
}

inline OrderParams order_params(const TpmNetwork& a, const TpmNetwork& b, int unit) {
  check_same_params(a, b);
  if (unit < 0 || unit >= a.params().k) throw ParameterError("order_params: unit out of range");
  auto wa = a.row(unit);
  auto wb = b.row(unit);
  long saa = 0, sbb = 0, sab = 0;
  for (std::size_t j = 0; j < wa.size(); ++j) {
    saa += static_cast<long>(wa[j]) * wa[j];
    sbb += static_cast<long>(wb[j]) * wb[j];
    sab += static_cast<long>(wa[j]) * wb[j];
  }
  const double n = static_cast<double>(a.params().n);
  OrderParams op{saa / n, sbb / n, sab / n, std::nullopt};
  // Integer sums give rho = 1 exactly for equal rows.
  if (saa > 0 && sbb > 0) {
    op.rho = saa == sbb && sab == saa
                 ? 1.0
                 : static_cast<double>(sab) / std::sqrt(static_cast<double>(saa) * sbb);
  }
  return op;
}

inline bool is_synchronized(const TpmNetwork& a, const TpmNetwork& b) {
  check_same_params(a, b);
  return std::ranges::equal(a.active(), b.active());
}

}  // namespace kgcmlp
