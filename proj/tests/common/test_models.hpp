#pragma once

#include "dan/belief_engine.hpp"
#include "dan/rng.hpp"

namespace dan::testing {

/// Static two-state sensor: action 0 has O[z=1] = (0.9, 0.2), action 1 has
/// O[z=1] = (0.6, 0.4).
inline DiscreteModel two_state_sensor() {
  DiscreteModel m;
  m.transition = Eigen::MatrixXd::Identity(2, 2);
  Eigen::MatrixXd a1(2, 2), a2(2, 2);
  a1 << 0.1, 0.8, 0.9, 0.2;
  a2 << 0.4, 0.6, 0.6, 0.4;
  m.observations = {a1, a2};
  return m;
}

inline Eigen::MatrixXd random_stochastic(Rng& rng, std::size_t rows, std::size_t cols) {
  Eigen::MatrixXd m(rows, cols);
  for (std::size_t c = 0; c < cols; ++c) {
    const auto col = rng.dirichlet_uniform(rows);
    for (std::size_t r = 0; r < rows; ++r) m(r, c) = col[r];
  }
  return m;
}

inline DiscreteModel random_model(Rng& rng, std::size_t n_targets, std::size_t n_actions, std::size_t n_obs) {
  DiscreteModel m;
  m.transition = random_stochastic(rng, n_targets, n_targets);
  for (std::size_t a = 0; a < n_actions; ++a) m.observations.push_back(random_stochastic(rng, n_obs, n_targets));
  return m;
}

}  // namespace dan::testing
