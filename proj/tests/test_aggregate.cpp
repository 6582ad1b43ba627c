#include <doctest.h>

#include <algorithm>
#include <vector>

#include "mlens/aggregate.hpp"
#include "mlens/rng.hpp"

using namespace mlens;

namespace {

LabelVector lv(std::initializer_list<int> bits) {
  LabelVector y(static_cast<Eigen::Index>(bits.size()));
  Eigen::Index i = 0;
  for (int b : bits) y[i++] = b;
  return y;
}

MarginalVector mv(std::initializer_list<double> ps) {
  MarginalVector m(static_cast<Eigen::Index>(ps.size()));
  Eigen::Index i = 0;
  for (double p : ps) m[i++] = p;
  return m;
}

std::vector<MarginalVector> random_members(Rng& rng, int m, int k) {
  std::vector<MarginalVector> out;
  out.reserve(static_cast<std::size_t>(m));
  for (int j = 0; j < m; ++j) {
    MarginalVector p(k);
    for (int i = 0; i < k; ++i) p[i] = rng_double(rng);
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace

TEST_CASE("gmv sums graded votes per label, ties to 0") {
  const std::vector<MarginalVector> members = {mv({0.9, 0.1}), mv({0.4, 0.3}), mv({0.3, 0.2})};
  // label 0: 1.6 vs 1.4 -> 1; label 1: 0.6 vs 2.4 -> 0
  CHECK((gmv(members) == lv({1, 0})).all());
  CHECK((gmv({mv({0.5})}) == lv({0})).all());
  CHECK_THROWS_AS(gmv({}), std::invalid_argument);
  CHECK_THROWS_AS(gmv({mv({0.5}), mv({0.5, 0.5})}), std::invalid_argument);
}

TEST_CASE("bmv hard majority, ties to 0") {
  CHECK((bmv({lv({1}), lv({1}), lv({0})}) == lv({1})).all());
  CHECK((bmv({lv({1}), lv({0})}) == lv({0})).all());
  CHECK((bmv({lv({1, 0, 1}), lv({1, 1, 0}), lv({0, 1, 1}), lv({0, 0, 0})}) == lv({0, 0, 0})).all());
}

TEST_CASE("ptc_mode most-frequent prediction with documented tie chain") {
  // Unique mode.
  CHECK((ptc_mode({lv({1, 1}), lv({1, 1}), lv({0, 1})}) == lv({1, 1})).all());

  // Frequency tie, agreement-score tie (complementary candidates always tie
  // in score): smallest encoding wins.
  CHECK((ptc_mode({lv({1, 1, 1}), lv({0, 0, 0})}) == lv({0, 0, 0})).all());

  // Frequency tie broken by agreement score: votes (1,1)x2, (1,0)x2, (0,1).
  // ones = (4,3), M=5: s((1,1)) = 4+3 = 7 beats s((1,0)) = 4+2 = 6.
  CHECK((ptc_mode({lv({1, 1}), lv({1, 1}), lv({1, 0}), lv({1, 0}), lv({0, 1})}) == lv({1, 1})).all());

  CHECK((ptc_mode({lv({0, 1, 0})}) == lv({0, 1, 0})).all());
}

TEST_CASE("single-member ensembles collapse to the member's own prediction") {
  Rng rng(derive_seed(21, "m1"));
  for (int trial = 0; trial < 50; ++trial) {
    const int k = 1 + static_cast<int>(rng_below(rng, 8));
    const auto members = random_members(rng, 1, k);
    const LabelVector thresholded = predict_hamming(members[0]);
    CHECK((aggregate_members({StrategyKind::GMV, LossKind::Hamming}, members) == thresholded).all());
    CHECK((aggregate_members({StrategyKind::BMV, LossKind::Hamming}, members) == thresholded).all());
    for (LossKind loss : {LossKind::Hamming, LossKind::SubsetZeroOne, LossKind::FMeasure}) {
      const LabelVector own = predict_for_loss_marginals(loss, members[0]);
      CHECK((aggregate_members({StrategyKind::CTP, loss}, members) == own).all());
      CHECK((aggregate_members({StrategyKind::PTC_LW, loss}, members) == own).all());
      CHECK((aggregate_members({StrategyKind::PTC_MODE, loss}, members) == own).all());
    }
  }
}

TEST_CASE("aggregation is invariant to member order") {
  Rng rng(derive_seed(22, "perm"));
  for (int trial = 0; trial < 30; ++trial) {
    const int k = 1 + static_cast<int>(rng_below(rng, 6));
    const int m = 2 + static_cast<int>(rng_below(rng, 7));
    auto members = random_members(rng, m, k);
    auto shuffled = members;
    rng_shuffle(rng, shuffled);
    for (StrategyKind kind :
         {StrategyKind::GMV, StrategyKind::BMV, StrategyKind::CTP, StrategyKind::PTC_LW, StrategyKind::PTC_MODE}) {
      for (LossKind loss : {LossKind::Hamming, LossKind::SubsetZeroOne, LossKind::FMeasure}) {
        const Strategy s{kind, loss};
        CHECK((aggregate_members(s, members) == aggregate_members(s, shuffled)).all());
      }
    }
  }
}

TEST_CASE("decomposable equivalences: CTP==GMV and PTC-lw==BMV") {
  Rng rng(derive_seed(23, "equiv"));
  for (int trial = 0; trial < 300; ++trial) {
    const int k = 1 + static_cast<int>(rng_below(rng, 8));
    const int m = 1 + static_cast<int>(rng_below(rng, 12));
    const auto members = random_members(rng, m, k);
    const LabelVector g = gmv(members);
    const LabelVector b = aggregate_members({StrategyKind::BMV, LossKind::Hamming}, members);
    for (LossKind loss : {LossKind::Hamming, LossKind::SubsetZeroOne}) {
      CHECK((aggregate_members({StrategyKind::CTP, loss}, members) == g).all());
      CHECK((aggregate_members({StrategyKind::PTC_LW, loss}, members) == b).all());
    }
  }
}

TEST_CASE("ctp_mean_marginals and ctp_mean_joint") {
  const auto mean = ctp_mean_marginals({mv({0.2, 1.0}), mv({0.4, 0.0}), mv({0.6, 0.5})});
  CHECK(mean[0] == doctest::Approx(0.4));
  CHECK(mean[1] == doctest::Approx(0.5));

  // Averaging point masses gives the empirical distribution of the votes.
  const std::vector<JointDistribution> joints = {JointDistribution::point_mass(lv({1, 0})),
                                                 JointDistribution::point_mass(lv({1, 0})),
                                                 JointDistribution::point_mass(lv({0, 1})),
                                                 JointDistribution::point_mass(lv({0, 0}))};
  const JointDistribution avg = ctp_mean_joint(joints);
  CHECK(avg.prob_of(lv({1, 0})) == doctest::Approx(0.5));
  CHECK(avg.prob_of(lv({0, 1})) == doctest::Approx(0.25));
  CHECK(avg.prob_of(lv({0, 0})) == doctest::Approx(0.25));
  CHECK(avg.prob_of(lv({1, 1})) == 0.0);
  CHECK((ctp_predict_joint(LossKind::SubsetZeroOne, joints) == lv({1, 0})).all());

  CHECK_THROWS_AS(ctp_mean_joint({}), std::invalid_argument);
}
