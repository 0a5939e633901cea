#pragma once

// Analytic weight-distribution formulas for Hebbian learning, overlap
// statistics, key-space sizing and the byte chi-square statistic.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/multiprecision/cpp_int.hpp>

#include "kgcmlp/error.hpp"
#include "kgcmlp/tpm.hpp"

namespace kgcmlp {

// P(sigma_i x_ij = +1) for a weight of value w in a unit with order
// parameter q. The rest of the local field is Gaussian with variance
// n q - w^2, so
//   P = 1/2 [1 + erf(w / sqrt(2 (n q - w^2)))].
inline double sigma_agreement_prob(int w, int n, double q) {
  const double denom = n * q - static_cast<double>(w) * w;
  if (n < 1 || !(denom > 0.0))
    throw ParameterError("sigma_agreement_prob: requires n*q > w^2");
  return 0.5 * (1.0 + std::erf(w / std::sqrt(2.0 * denom)));
}

// Stationary distribution of a weight under Hebbian learning, indexed by
// w + l for w in [-l, l]. Detailed balance between w-1 and w gives
//   P(w) = P0 prod_{m=1}^{|w|} p_up(m-1) / p_down(m)
// with p_up(w) = sigma_agreement_prob(w) and p_down(w) = 1 - p_up(w), i.e.
//   (1 + erf((m-1)/sqrt(2(nq-(m-1)^2)))) / (1 - erf(m/sqrt(2(nq-m^2)))).
inline std::vector<double> stationary_distribution(int l, int n, double q) {
  if (l < 0 || n < 1) throw ParameterError("stationary_distribution: need l >= 0, n >= 1");
  const double nq = n * q;
  if (!(nq > static_cast<double>(l) * l))
    throw ParameterError("stationary_distribution: requires n*q > l^2");

  std::vector<double> ratio(static_cast<std::size_t>(l) + 1, 1.0);  // ratio[m] for m >= 1
  for (int m = 1; m <= l; ++m) {
    const double up = 1.0 + std::erf((m - 1) / std::sqrt(2.0 * (nq - (m - 1.0) * (m - 1.0))));
    const double down = 1.0 - std::erf(m / std::sqrt(2.0 * (nq - static_cast<double>(m) * m)));
    ratio[m] = up / down;
  }
  std::vector<double> p(2 * static_cast<std::size_t>(l) + 1);
  double weight = 1.0;
  p[l] = 1.0;
  for (int m = 1; m <= l; ++m) {
    weight *= ratio[m];
    p[l + m] = weight;
    p[l - m] = weight;
  }
  double total = 0.0;
  for (double v : p) total += v;
  for (double& v : p) v /= total;
  return p;
}

// sqrt(Q) of a uniformly initialized weight vector: sqrt(l(l+1)/3).
inline double initial_norm(int l) {
  if (l < 0) throw ParameterError("initial_norm: l must be >= 0");
  return std::sqrt(l * (l + 1.0) / 3.0);
}

inline double second_moment(std::span<const double> p, int l) {
  double q = 0.0;
  for (int w = -l; w <= l; ++w) q += static_cast<double>(w) * w * p[w + l];
  return q;
}

// Self-consistent Q = sum_w w^2 P(w; Q), by damped iteration (factor 1/2)
// from Q0 = l(l+1)/3 until successive iterates differ by < 1e-10.
inline double expected_q(int l, int n) {
  if (l < 1 || n < 1) throw ParameterError("expected_q: need l >= 1, n >= 1");
  double q = l * (l + 1.0) / 3.0;
  if (!(n * q > static_cast<double>(l) * l))
    throw ParameterError("expected_q: n too small for the analytic distribution");
  for (int iter = 0; iter < 10'000; ++iter) {
    const double target = second_moment(stationary_distribution(l, n, q), l);
    const double next = 0.5 * q + 0.5 * target;
    if (std::abs(next - q) < 1e-10) return next;
    q = next;
    if (!(n * q > static_cast<double>(l) * l))
      throw NumericalError("expected_q: iterate left the analytic domain");
  }
  throw NumericalError("expected_q: no convergence within 10^4 iterations");
}

// Empirical joint distribution of (w_a, w_b) over one unit's n positions.
class JointDistribution {
 public:
  JointDistribution(int l, std::vector<double> p) : l_(l), p_(std::move(p)) {}

  int l() const { return l_; }
  int side() const { return 2 * l_ + 1; }
  double at(int a, int b) const {
    return p_[static_cast<std::size_t>(a + l_) * side() + (b + l_)];
  }
  std::span<const double> values() const { return p_; }

  double q_a() const { return moment([](int a, int) { return a * a; }); }
  double q_b() const { return moment([](int, int b) { return b * b; }); }
  double r() const { return moment([](int a, int b) { return a * b; }); }

 private:
  template <typename F>
  double moment(F f) const {
    double s = 0.0;
    for (int a = -l_; a <= l_; ++a)
      for (int b = -l_; b <= l_; ++b) s += f(a, b) * at(a, b);
    return s;
  }

  int l_;
  std::vector<double> p_;
};

inline JointDistribution joint_distribution(const TpmNetwork& a, const TpmNetwork& b, int unit) {
  check_same_params(a, b);
  const auto& pr = a.params();
  if (unit < 0 || unit >= pr.k) throw ParameterError("joint_distribution: unit out of range");
  const int side = 2 * pr.l + 1;
  std::vector<double> p(static_cast<std::size_t>(side) * side, 0.0);
  auto wa = a.row(unit);
  auto wb = b.row(unit);
  const double mass = 1.0 / pr.n;
  for (std::size_t j = 0; j < wa.size(); ++j)
    p[static_cast<std::size_t>(wa[j] + pr.l) * side + (wb[j] + pr.l)] += mass;
  return JointDistribution(pr.l, std::move(p));
}

using BigInt = boost::multiprecision::cpp_int;

// Number of weight configurations, (2l+1)^(k n).
inline BigInt keyspace_size(int k, int n, int l) {
  if (k < 1 || n < 1 || l < 0) throw ParameterError("keyspace_size: need k, n >= 1 and l >= 0");
  return boost::multiprecision::pow(BigInt(2 * l + 1), static_cast<unsigned>(k * n));
}

inline std::vector<std::uint64_t> byte_histogram(std::span<const std::uint8_t> bytes) {
  std::vector<std::uint64_t> h(256, 0);
  for (auto b : bytes) ++h[b];
  return h;
}

// Pearson statistic of observed counts against the uniform law over the bins.
inline double chi_square(std::span<const std::uint64_t> counts) {
  std::uint64_t total = 0;
  for (auto c : counts) total += c;
  if (counts.empty() || total == 0) throw ParameterError("chi_square: empty histogram");
  const double expected = static_cast<double>(total) / counts.size();
  double stat = 0.0;
  for (auto c : counts) {
    const double d = static_cast<double>(c) - expected;
    stat += d * d / expected;
  }
  return stat;
}

// Upper-tail probability of a chi-square statistic with `dof` degrees of freedom.
inline double chi_square_p_value(double statistic, double dof) {
  boost::math::chi_squared dist(dof);
  return boost::math::cdf(boost::math::complement(dist, statistic));
}

inline double chi_square_quantile(double probability, double dof) {
  boost::math::chi_squared dist(dof);
  return boost::math::quantile(dist, probability);
}

// Goodness of fit of observed counts against arbitrary expected probabilities.
inline double chi_square_against(std::span<const std::uint64_t> counts, std::span<const double> probs) {
  if (counts.size() != probs.size()) throw ParameterError("chi_square_against: size mismatch");
  std::uint64_t total = 0;
  for (auto c : counts) total += c;
  if (total == 0) throw ParameterError("chi_square_against: empty histogram");
  double stat = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const double e = probs[i] * static_cast<double>(total);
    if (e <= 0.0) throw ParameterError("chi_square_against: nonpositive expectation");
    const double d = static_cast<double>(counts[i]) - e;
    stat += d * d / e;
  }
  return stat;
}

}  // namespace kgcmlp
