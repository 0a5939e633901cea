#pragma once

// Monte-Carlo runners: synchronization time (direct loop or full protocol
// over a lossless link) and the passive "learning by listening" attacker.
//
// Trial t of a run draws every random quantity from derive_stream(master, t),
// so a fixed master seed reproduces a sweep bit for bit.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "kgcmlp/analysis.hpp"
#include "kgcmlp/exchange.hpp"
#include "kgcmlp/rng.hpp"
#include "kgcmlp/tpm.hpp"

namespace kgcmlp {

struct SyncTrialStats {
  std::uint64_t iterations = 0;
  std::uint64_t bytes_exchanged = 0;
  std::vector<double> rho_trajectory;  // mean overlap over units, sampled
  bool synced = false;
};

enum class TrialMode { Direct, Protocol };

struct SweepResult {
  int k = 0;
  int n = 0;
  int l = 0;
  LearningRule rule = LearningRule::RandomWalk;
  std::uint64_t trials = 0;
  std::uint64_t synced_trials = 0;
  double mean_iterations = 0.0;
  double median_iterations = 0.0;
  double stddev_iterations = 0.0;
  double mean_bytes = 0.0;
  std::optional<double> attacker_success;
  std::optional<double> attacker_mean_iterations;
};

struct TrialOptions {
  TrialMode mode = TrialMode::Direct;
  std::uint64_t iteration_cap = 1'000'000;
  std::uint64_t rho_sample_every = 0;  // 0 disables the trajectory
  ProtocolConfig protocol;             // protocol mode: params and rule are overwritten
};

namespace detail {
inline double mean_rho(const TpmNetwork& a, const TpmNetwork& b) {
  double s = 0.0;
  for (int i = 0; i < a.params().k; ++i) s += order_params(a, b, i).rho.value_or(0.0);
  return s / a.params().k;
}

inline void summarize(SweepResult& r, std::vector<double> iters, double bytes_total) {
  const double count = static_cast<double>(iters.size());
  double sum = 0.0;
  for (double v : iters) sum += v;
  r.mean_iterations = sum / count;
  double ss = 0.0;
  for (double v : iters) ss += (v - r.mean_iterations) * (v - r.mean_iterations);
  r.stddev_iterations = iters.size() > 1 ? std::sqrt(ss / (count - 1.0)) : 0.0;
  std::sort(iters.begin(), iters.end());
  const std::size_t mid = iters.size() / 2;
  r.median_iterations = iters.size() % 2 ? iters[mid] : 0.5 * (iters[mid - 1] + iters[mid]);
  r.mean_bytes = bytes_total / count;
}
}  // namespace detail

// The bare mutual-learning loop: fresh inputs each step, both parties learn
// when their outputs agree, stop once the active layers are identical.
inline SyncTrialStats run_direct_trial(const TpmParams& params, LearningRule rule, RngState stream,
                                       std::uint64_t cap, std::uint64_t rho_every = 0) {
  RngState ra = derive_stream(stream, 0);
  RngState rb = derive_stream(stream, 1);
  RngState inputs = derive_stream(stream, 2);
  TpmNetwork a = init_network(params, ra);
  TpmNetwork b = init_network(params, rb);

  SyncTrialStats st;
  st.synced = is_synchronized(a, b);
  while (!st.synced && st.iterations < cap) {
    auto [x, next] = draw_inputs(inputs, params.k, params.n);
    inputs = next;
    ++st.iterations;
    const Evaluation ea = evaluate(a, x);
    const Evaluation eb = evaluate(b, x);
    if (ea.tau == eb.tau) {
      apply_learning(a, x, ea, eb.tau, rule);
      apply_learning(b, x, eb, ea.tau, rule);
      st.synced = is_synchronized(a, b);
    }
    if (rho_every && st.iterations % rho_every == 0) st.rho_trajectory.push_back(detail::mean_rho(a, b));
  }
  if (rho_every) st.rho_trajectory.push_back(detail::mean_rho(a, b));
  return st;
}

inline SyncTrialStats run_protocol_trial(const ProtocolConfig& cfg, RngState stream, std::uint64_t cap) {
  ExchangeOptions opt;
  opt.protocol = cfg;
  opt.sender_rng = derive_stream(stream, 0);
  opt.receiver_rng = derive_stream(stream, 1);
  opt.channel.rng_seed = take_word(stream);
  opt.max_rounds = cap;
  const ExchangeReport rep = run_exchange(opt);
  SyncTrialStats st;
  st.iterations = std::min<std::uint64_t>(rep.rounds, cap);
  st.bytes_exchanged = rep.channel.bytes_sent;
  st.synced = rep.established();
  return st;
}

inline SweepResult run_sync_trials(const TpmParams& params, LearningRule rule, std::uint64_t trials,
                                   const RngState& master, const TrialOptions& opt = {}) {
  if (trials < 1) throw ParameterError("run_sync_trials: trials must be >= 1");
  params.validate();
  SweepResult r;
  r.k = params.k;
  r.n = params.n;
  r.l = params.l;
  r.rule = rule;
  r.trials = trials;
  std::vector<double> iters;
  iters.reserve(trials);
  double bytes = 0.0;
  ProtocolConfig cfg = opt.protocol;
  cfg.params = params;
  cfg.rule = rule;
  for (std::uint64_t t = 0; t < trials; ++t) {
    const RngState stream = derive_stream(master, t);
    const SyncTrialStats st = opt.mode == TrialMode::Direct
                                  ? run_direct_trial(params, rule, stream, opt.iteration_cap)
                                  : run_protocol_trial(cfg, stream, opt.iteration_cap);
    iters.push_back(static_cast<double>(st.iterations));
    bytes += static_cast<double>(st.bytes_exchanged);
    if (st.synced) ++r.synced_trials;
  }
  detail::summarize(r, std::move(iters), bytes);
  return r;
}

struct AttackTrialStats {
  std::uint64_t ab_iterations = 0;  // until A and B are identical (capped)
  std::uint64_t e_iterations = 0;   // until E equals A (capped)
  bool ab_synced = false;
  bool e_synced = false;
  bool attacker_success = false;  // E equal to A no later than A-B synchronization
};

// A and B learn mutually; E sees every (x, tau_A, tau_B) and, when the
// outputs agree, trains its units whose sigma equals tau_A. The trial keeps
// running after A-B synchronization until E catches up or the cap is hit.
inline AttackTrialStats run_attack_trial(const TpmParams& params, LearningRule rule, RngState stream,
                                         std::uint64_t cap, bool attacker_knows_initial = false) {
  RngState ra = derive_stream(stream, 0);
  RngState rb = derive_stream(stream, 1);
  RngState inputs = derive_stream(stream, 2);
  RngState re = derive_stream(stream, 3);
  TpmNetwork a = init_network(params, ra);
  TpmNetwork b = init_network(params, rb);
  TpmNetwork e = attacker_knows_initial ? a : init_network(params, re);

  AttackTrialStats st;
  st.ab_synced = is_synchronized(a, b);
  st.e_synced = is_synchronized(e, a);
  std::uint64_t it = 0;
  while (!(st.ab_synced && st.e_synced) && it < cap) {
    auto [x, next] = draw_inputs(inputs, params.k, params.n);
    inputs = next;
    ++it;
    const Evaluation ea = evaluate(a, x);
    const Evaluation eb = evaluate(b, x);
    if (ea.tau == eb.tau) {
      Evaluation ee = evaluate(e, x);
      apply_learning(a, x, ea, eb.tau, rule);
      apply_learning(b, x, eb, ea.tau, rule);
      // E cannot influence anyone; it trains toward tau_A on its matching units.
      ee.tau = ea.tau;
      apply_learning(e, x, ee, ea.tau, rule);
    }
    if (!st.ab_synced && is_synchronized(a, b)) {
      st.ab_synced = true;
      st.ab_iterations = it;
    }
    if (!st.e_synced && is_synchronized(e, a)) {
      st.e_synced = true;
      st.e_iterations = it;
    }
  }
  if (!st.ab_synced) st.ab_iterations = it;
  if (!st.e_synced) st.e_iterations = it;
  st.attacker_success = st.e_synced && (!st.ab_synced || st.e_iterations <= st.ab_iterations);
  return st;
}

inline SweepResult run_attack_trials(const TpmParams& params, LearningRule rule, std::uint64_t trials,
                                     const RngState& master, std::uint64_t cap,
                                     bool attacker_knows_initial = false) {
  if (trials < 1) throw ParameterError("run_attack_trials: trials must be >= 1");
  params.validate();
  SweepResult r;
  r.k = params.k;
  r.n = params.n;
  r.l = params.l;
  r.rule = rule;
  r.trials = trials;
  std::vector<double> iters;
  iters.reserve(trials);
  std::uint64_t successes = 0;
  double e_total = 0.0;
  for (std::uint64_t t = 0; t < trials; ++t) {
    const auto st = run_attack_trial(params, rule, derive_stream(master, t), cap, attacker_knows_initial);
    iters.push_back(static_cast<double>(st.ab_iterations));
    e_total += static_cast<double>(st.e_iterations);
    if (st.ab_synced) ++r.synced_trials;
    if (st.attacker_success) ++successes;
  }
  detail::summarize(r, std::move(iters), 0.0);
  r.attacker_success = static_cast<double>(successes) / static_cast<double>(trials);
  r.attacker_mean_iterations = e_total / static_cast<double>(trials);
  return r;
}

// Samples of a single network trained on its own output (tau_other = tau).
// After `burn_in` steps, every `thin` steps one weight per unit is recorded,
// rotating through input positions, so samples are close to independent.
struct WeightSampling {
  int l = 0;
  std::vector<std::uint64_t> histogram;  // index w + l
  // Per w: how often sigma_i x_ij = +1, and the summed analytic prediction
  // and variance using the unit's current Q.
  std::vector<std::uint64_t> agree;
  std::vector<double> predicted;
  std::vector<double> variance;
  double mean_q = 0.0;  // over all units and recorded steps
  std::uint64_t samples = 0;
};

inline WeightSampling sample_weight_distribution(const TpmParams& params, LearningRule rule,
                                                 std::uint64_t steps, std::uint64_t burn_in,
                                                 std::uint64_t thin, RngState stream) {
  params.validate();
  if (thin < 1) throw ParameterError("sample_weight_distribution: thin must be >= 1");
  RngState init = derive_stream(stream, 0);
  RngState inputs = derive_stream(stream, 1);
  TpmNetwork net = init_network(params, init);
  const int l = params.l;
  const int side = 2 * l + 1;
  WeightSampling out;
  out.l = l;
  out.histogram.assign(side, 0);
  out.agree.assign(side, 0);
  out.predicted.assign(side, 0.0);
  out.variance.assign(side, 0.0);
  double q_total = 0.0;
  std::uint64_t q_count = 0;
  std::uint64_t slot = 0;
  for (std::uint64_t step = 0; step < steps; ++step) {
    auto [x, next] = draw_inputs(inputs, params.k, params.n);
    inputs = next;
    const Evaluation ev = evaluate(net, x);
    if (step >= burn_in && (step - burn_in) % thin == 0) {
      const int j = static_cast<int>(slot++ % static_cast<std::uint64_t>(params.n));
      for (int i = 0; i < params.k; ++i) {
        const auto row = net.row(i);
        double q = 0.0;
        for (auto w : row) q += static_cast<double>(w) * w;
        q /= params.n;
        q_total += q;
        ++q_count;
        const int w = row[j];
        ++out.histogram[w + l];
        out.agree[w + l] += ev.sigmas[i] * x(i, j) == 1;
        if (params.n * q > static_cast<double>(w) * w) {
          const double p = sigma_agreement_prob(w, params.n, q);
          out.predicted[w + l] += p;
          out.variance[w + l] += p * (1.0 - p);
        }
        ++out.samples;
      }
    }
    apply_learning(net, x, ev, ev.tau, rule);
  }
  out.mean_q = q_count ? q_total / static_cast<double>(q_count) : 0.0;
  return out;
}

inline constexpr const char* kSweepCsvHeader =
    "k,n,l,rule,trials,mean_iter,median_iter,stddev_iter,mean_bytes,attacker_success";

inline void write_csv_row(std::ostream& os, const SweepResult& r) {
  const auto old = os.precision(10);
  os << r.k << ',' << r.n << ',' << r.l << ',' << to_string(r.rule) << ',' << r.trials << ','
     << r.mean_iterations << ',' << r.median_iterations << ',' << r.stddev_iterations << ','
     << r.mean_bytes << ',';
  if (r.attacker_success) os << *r.attacker_success;
  os << '\n';
  os.precision(old);
}

}  // namespace kgcmlp
