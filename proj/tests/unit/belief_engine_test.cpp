#include <cmath>

#include <gtest/gtest.h>

#include "dan/belief_engine.hpp"
#include "dan/errors.hpp"
#include "test_models.hpp"

namespace dan {
namespace {

using testing::random_model;
using testing::two_state_sensor;

TEST(BayesUpdate, TwoStateSensor) {
  const auto b = bayes_update(Belief::uniform(2), 0, 1, two_state_sensor());
  EXPECT_NEAR(b[0], 0.81818181818181818, 1e-15);
  EXPECT_NEAR(b[1], 0.18181818181818182, 1e-15);
}

TEST(BayesUpdate, UninformativeObservationOnlyPredicts) {
  Rng rng(1);
  auto m = random_model(rng, 4, 1, 3);
  m.observations[0].setConstant(1.0 / 3.0);
  const Belief b(rng.dirichlet_uniform(4));
  const auto post = bayes_update(b, 0, 2, m);
  const auto pred = predict(b, m);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(post[i], pred[i], 1e-14);
}

TEST(BayesUpdate, CertaintyIsAbsorbing) {
  const auto b = bayes_update(Belief::vertex(2, 0), 0, 1, two_state_sensor());
  EXPECT_EQ(b[0], 1.0);
  EXPECT_EQ(b[1], 0.0);
}

TEST(BayesUpdate, ImpossibleObservation) {
  DiscreteModel m;
  m.transition = Eigen::MatrixXd::Identity(2, 2);
  m.observations = {Eigen::MatrixXd::Identity(2, 2)};
  EXPECT_THROW(bayes_update(Belief::vertex(2, 0), 0, 1, m), ImpossibleObservationError);
  EXPECT_THROW(bayes_update(Belief::uniform(2), 3, 0, m), ValidationError);
}

TEST(DiscreteModelTest, ValidateRejectsBadColumns) {
  auto m = two_state_sensor();
  EXPECT_NO_THROW(m.validate());
  m.transition(0, 0) = 0.5;
  EXPECT_THROW(m.validate(), ValidationError);
}

TEST(DiscreteModelTest, JsonRoundTrip) {
  Rng rng(8);
  const auto m = random_model(rng, 3, 2, 4);
  const auto back = DiscreteModel::from_json(m.to_json());
  EXPECT_EQ(back.transition, m.transition);
  ASSERT_EQ(back.observations.size(), 2u);
  EXPECT_EQ(back.observations[1], m.observations[1]);
  EXPECT_THROW(DiscreteModel::from_json("{\"n_targets\": 2}"), ValidationError);
}

TEST(InfoGain, TwoStateSensor) {
  const auto m = two_state_sensor();
  EXPECT_NEAR(expected_info_gain(Belief::uniform(2), 0, m), 0.27539611524877041, 1e-14);
  EXPECT_NEAR(expected_info_gain(Belief::uniform(2), 1, m), 0.020135513550688873, 1e-14);
}

TEST(InfoGain, UninformativeAndRevealing) {
  DiscreteModel m;
  m.transition = Eigen::MatrixXd::Identity(4, 4);
  m.observations = {Eigen::MatrixXd::Constant(4, 4, 0.25), Eigen::MatrixXd::Identity(4, 4)};
  EXPECT_NEAR(expected_info_gain(Belief::uniform(4), 0, m), 0.0, 1e-15);
  EXPECT_NEAR(expected_info_gain(Belief::uniform(4), 1, m), std::log(4.0), 1e-14);
  EXPECT_EQ(greedy_action(Belief::uniform(4), m, InfoGainCriterion{}), 1u);
  const PredictionCriterion pc{reward_vectors_01({1.0, 0.0, 4})};
  EXPECT_EQ(greedy_action(Belief::uniform(4), m, pc), 1u);
  EXPECT_NEAR(expected_prediction_value(Belief::uniform(4), 0, m, pc.family), 0.25, 1e-15);
  EXPECT_NEAR(expected_prediction_value(Belief::uniform(4), 1, m, pc.family), 1.0, 1e-15);
}

TEST(InfoGain, NonNegativeOnRandomModels) {
  Rng rng(21);
  for (int i = 0; i < 300; ++i) {
    const auto m = random_model(rng, 2 + rng.uniform_int(7), 2, 2 + rng.uniform_int(4));
    const Belief b(rng.dirichlet_uniform(m.n_targets()));
    for (std::size_t a = 0; a < m.n_actions(); ++a) EXPECT_GE(expected_info_gain(b, a, m), -1e-9);
  }
}

TEST(PredictionValue, TwoStateSensor) {
  const auto m = two_state_sensor();
  const auto fam = reward_vectors_01({1.0, 0.0, 2});
  EXPECT_NEAR(expected_prediction_value(Belief::uniform(2), 0, m, fam), 0.85, 1e-14);
  EXPECT_NEAR(expected_prediction_value(Belief::uniform(2), 1, m, fam), 0.6, 1e-14);
}

TEST(GreedyAction, BothCriteriaPreferSharperSensor) {
  const auto m = two_state_sensor();
  EXPECT_EQ(greedy_action(Belief::uniform(2), m, InfoGainCriterion{}), 0u);
  EXPECT_EQ(greedy_action(Belief::uniform(2), m, PredictionCriterion{reward_vectors_01({1.0, 0.0, 2})}), 0u);
}

TEST(GreedyAction, TiesAndSingleAction) {
  DiscreteModel m;
  m.transition = Eigen::MatrixXd::Identity(2, 2);
  m.observations = {Eigen::MatrixXd::Identity(2, 2), Eigen::MatrixXd::Identity(2, 2)};
  EXPECT_EQ(greedy_action(Belief::uniform(2), m, InfoGainCriterion{}), 0u);
  m.observations.resize(1);
  EXPECT_EQ(greedy_action(Belief::uniform(2), m, InfoGainCriterion{}), 0u);
}

TEST(BoundCoherence, EveryActionWithinTheoremBound) {
  Rng rng(33);
  for (int i = 0; i < 100; ++i) {
    const std::size_t n = 2 + rng.uniform_int(7);
    const auto m = random_model(rng, n, 3, 2 + rng.uniform_int(4));
    const Belief b(rng.dirichlet_uniform(n));
    const PredictionRewardSpec spec{1.0, 0.0, n};
    for (std::size_t a = 0; a < 3; ++a) {
      const double gap = expected_bound_gap(b, a, m, spec);
      EXPECT_GE(gap, -1e-9);
      EXPECT_LE(gap, theorem_bound(spec) + 1e-9);
    }
  }
}

TEST(BruteForce, EmptyAndSingleStep) {
  Rng rng(5);
  const auto m = random_model(rng, 4, 2, 3);
  const Belief prior(rng.dirichlet_uniform(4));
  const auto empty = brute_force_posterior({}, prior, m);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(empty[i], prior[i], 1e-15);
  const std::vector<ActionObservation> h{{1, 2}};
  const auto one = brute_force_posterior(h, prior, m);
  const auto upd = bayes_update(prior, 1, 2, m);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(one[i], upd[i], 1e-12);
}

TEST(BruteForce, MatchesIteratedFilter) {
  Rng rng(99);
  for (int inst = 0; inst < 100; ++inst) {
    const std::size_t n = 2 + rng.uniform_int(7);
    const auto m = random_model(rng, n, 2, 3);
    const Belief prior(rng.dirichlet_uniform(n));
    const std::size_t len = 1 + rng.uniform_int(5);
    std::vector<ActionObservation> h;
    for (std::size_t t = 0; t < len; ++t) h.emplace_back(rng.uniform_int(2), rng.uniform_int(3));
    Belief b = prior;
    for (const auto& [a, z] : h) b = bayes_update(b, a, z, m);
    const auto bf = brute_force_posterior(h, prior, m);
    for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(bf[i], b[i], 1e-9);
  }
}

TEST(BruteForce, GuardsEnumerationSize) {
  Rng rng(1);
  const auto m = random_model(rng, 2, 1, 2);
  const std::vector<ActionObservation> h(9, {0, 0});
  EXPECT_THROW(brute_force_posterior(h, Belief::uniform(2), m), SizeError);
}

TEST(ParticleFilter, DeterministicObservationCollapses) {
  DiscreteModel m;
  m.transition = Eigen::MatrixXd::Identity(3, 3);
  m.observations = {Eigen::MatrixXd::Identity(3, 3)};
  Rng rng(4);
  auto p = ParticleSet::sample(Belief::uniform(3), 300, rng);
  p = particle_filter_step(p, 0, 2, m, rng);
  for (auto v : p.particles) EXPECT_EQ(v, 2u);
  EXPECT_THROW(particle_filter_step(ParticleSet::sample(Belief::vertex(3, 0), 10, rng), 0, 2, m, rng),
               DegeneracyError);
}

double mean_tv(std::size_t particles, std::size_t seeds) {
  const auto m = testing::two_state_sensor();
  const Belief exact = bayes_update(Belief::uniform(2), 0, 1, m);
  double sum = 0.0;
  for (std::size_t s = 0; s < seeds; ++s) {
    Rng rng(derive_seed(1234, "pf", s));
    auto p = ParticleSet::sample(Belief::uniform(2), particles, rng);
    p = particle_filter_step(p, 0, 1, m, rng);
    sum += tv_distance(p.to_belief(2), exact);
  }
  return sum / static_cast<double>(seeds);
}

TEST(ParticleFilter, ApproachesExactPosterior) {
  EXPECT_LT(mean_tv(1500, 100), 0.05);
  EXPECT_GT(mean_tv(400, 100), mean_tv(1500, 100));
}

TEST(ParticleFilter, MultinomialAlsoConverges) {
  const auto m = testing::two_state_sensor();
  const Belief exact = bayes_update(Belief::uniform(2), 0, 1, m);
  Rng rng(6);
  auto p = ParticleSet::sample(Belief::uniform(2), 20000, rng);
  p = particle_filter_step(p, 0, 1, m, rng, Resampling::kMultinomial);
  EXPECT_LT(tv_distance(p.to_belief(2), exact), 0.02);
}

TEST(TvDistance, KnownValues) {
  EXPECT_EQ(tv_distance(Belief({0.3, 0.7}), Belief({0.3, 0.7})), 0.0);
  EXPECT_EQ(tv_distance(Belief({1.0, 0.0}), Belief({0.0, 1.0})), 1.0);
  EXPECT_NEAR(tv_distance(Belief({0.8, 0.2}), Belief({0.6, 0.4})), 0.2, 1e-15);
  EXPECT_THROW(tv_distance(Belief({1.0, 0.0}), Belief::uniform(3)), ValidationError);
}

}  // namespace
}  // namespace dan
