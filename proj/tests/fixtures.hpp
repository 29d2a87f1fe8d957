#pragma once

#include "direg/bell.hpp"

#include <random>

namespace direg::fixtures {

// The signaling frequency table with N_xy = 10 worked through in the
// projection literature, and its exact nonsignaling projection times 40.
inline FrequencyTable worked_frequency() {
  return FrequencyTable(Scenario::chsh(), {3, 0, 1, 6, 7, 0, 1, 2, 5, 1, 1, 3, 1, 6, 3, 0});
}

inline Eigen::VectorXd worked_projection_times_40() {
  Eigen::VectorXd v(16);
  v << 18, 2, 2, 18, 20, 0, 4, 16, 19, 7, 1, 13, 7, 19, 17, -3;
  return v;
}

// Random physical behavior with independent per-setting distributions (signaling).
inline Behavior random_signaling(const Scenario& s, std::mt19937_64& rng) {
  std::exponential_distribution<double> e(1.0);
  Eigen::VectorXd p(static_cast<Eigen::Index>(s.dimension()));
  const int block = s.outputs_a * s.outputs_b;
  for (std::size_t k = 0; k < s.settings(); ++k) {
    double total = 0;
    for (int i = 0; i < block; ++i) total += p[static_cast<Eigen::Index>(k * block + i)] = e(rng);
    for (int i = 0; i < block; ++i) p[static_cast<Eigen::Index>(k * block + i)] /= total;
  }
  return Behavior(s, p);
}

// Random point of the local polytope (mixture of deterministic behaviors).
inline Behavior random_local(const Scenario& s, std::mt19937_64& rng, int terms = 6) {
  std::exponential_distribution<double> e(1.0);
  std::vector<double> w(static_cast<std::size_t>(terms));
  double total = 0;
  for (auto& v : w) total += v = e(rng);
  Eigen::VectorXd p = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(s.dimension()));
  for (int t = 0; t < terms; ++t) {
    std::vector<int> ax(static_cast<std::size_t>(s.inputs_a)), by(static_cast<std::size_t>(s.inputs_b));
    for (auto& a : ax) a = std::uniform_int_distribution<int>(0, s.outputs_a - 1)(rng);
    for (auto& b : by) b = std::uniform_int_distribution<int>(0, s.outputs_b - 1)(rng);
    p += (w[static_cast<std::size_t>(t)] / total) * Behavior::deterministic(s, ax, by).values();
  }
  return Behavior(s, p);
}

// Random two-qubit pure state with random projective measurements.
inline QubitStrategy random_qubit_strategy(std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  QubitStrategy st;
  double norm = 0;
  for (auto& c : st.state) {
    c = {g(rng), g(rng)};
    norm += std::norm(c);
  }
  for (auto& c : st.state) c /= std::sqrt(norm);
  const auto unit = [&] {
    std::array<double, 3> n{g(rng), g(rng), g(rng)};
    const double r = std::sqrt(n[0] * n[0] + n[1] * n[1] + n[2] * n[2]);
    for (auto& v : n) v /= r;
    return n;
  };
  st.alice = {unit(), unit()};
  st.bob = {unit(), unit()};
  return st;
}

}  // namespace direg::fixtures
