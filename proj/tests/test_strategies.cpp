#include <doctest.h>

#include "floquet/strategies.hpp"

using namespace floquet;

namespace {

std::vector<EPCoordinate> located() {
  return {{12, 634.5513, 0.20519}, {13, 604.6039, 0.22495}, {14, 583.1170, 0.23842}, {15, 567.4373, 0.24674}};
}

}  // namespace

TEST_CASE("reference table") {
  const auto t = reference_table();
  REQUIRE(t.eps.size() == 4);
  REQUIRE(t.successive.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(t.successive[i].v_start == 12 + static_cast<int>(i));
    CHECK(t.successive[i].v_expected == 13 + static_cast<int>(i));
    CHECK(t.successive[i].lambda0 == t.eps[i].lambda_nm);
    if (i > 0) {
      CHECK(t.eps[i].lambda_nm < t.eps[i - 1].lambda_nm);
      CHECK(t.eps[i].intensity > t.eps[i - 1].intensity);
    }
  }
  CHECK(t.cluster.v_start == 12);
  CHECK(t.cluster.v_expected == 16);
}

TEST_CASE("mapping the loop geometry onto another cluster") {
  const auto ref = reference_table();
  const auto m = map_table(ref, located());
  // Extreme EPs map onto the extreme EPs.
  const double s = (634.5513 - 567.4373) / (575.0 - 520.0);
  const double k = 0.24674 / 0.290;
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(m.successive[i].lambda0 == doctest::Approx(located()[i].lambda_nm));
    CHECK(m.successive[i].d_lambda == doctest::Approx(5.0 * s));
    CHECK(m.successive[i].i_max == doctest::Approx(0.30 * k));
    // Every single loop still reaches above its EP.
    CHECK(m.successive[i].i_max > located()[i].intensity);
  }
  const double centre_ref = 0.5 * (575.0 + 520.0), centre = 0.5 * (634.5513 + 567.4373);
  CHECK(m.cluster.lambda0 == doctest::Approx(centre + s * (545.0 - centre_ref)));
  CHECK(m.cluster.d_lambda == doctest::Approx(40.0 * s));
  CHECK(m.cluster.i_max == doctest::Approx(0.32 * k));
  // The cluster loop spans all four EPs.
  for (const auto& e : located()) {
    CHECK(std::abs(e.lambda_nm - m.cluster.lambda0) < m.cluster.d_lambda);
    CHECK(e.intensity < m.cluster.i_max);
  }
  // Identity map.
  const auto same = map_table(ref, ref.eps);
  CHECK(same.cluster.lambda0 == doctest::Approx(545.0));
  CHECK(same.cluster.d_lambda == doctest::Approx(40.0));

  auto wrong = located();
  wrong.pop_back();
  CHECK_THROWS_AS(map_table(ref, wrong), std::invalid_argument);
  wrong = located();
  wrong[0].v_low = 11;
  CHECK_THROWS_AS(map_table(ref, wrong), std::invalid_argument);
}

TEST_CASE("cluster selection from an EP map") {
  auto rec = [](int v, int vp, double l, double i) {
    EPRecord r;
    r.v_low = v, r.v_high = v + 1, r.v_plus = vp, r.lambda_nm = l, r.intensity = i;
    return r;
  };
  std::vector<Cluster> clusters(2);
  clusters[0].diagonal = 10;
  clusters[0].members = {rec(11, 1, 678.3, 0.177), rec(12, 2, 634.6, 0.205), rec(13, 3, 604.6, 0.225),
                         rec(14, 4, 583.1, 0.238), rec(15, 5, 567.4, 0.247)};
  clusters[1].diagonal = 9;
  clusters[1].members = {rec(12, 3, 477.8, 0.359), rec(13, 4, 460.0, 0.384), rec(14, 5, 446.7, 0.402),
                         rec(15, 6, 436.6, 0.413)};
  const auto ref = reference_table();
  CHECK(select_cluster(clusters, ref, 575.0).front().lambda_nm == doctest::Approx(634.6));
  CHECK(select_cluster(clusters, ref, 480.0).front().lambda_nm == doctest::Approx(477.8));
  clusters[0].members.pop_back();
  clusters[1].members.pop_back();
  CHECK_THROWS_AS(select_cluster(clusters, ref, 575.0), std::runtime_error);
}

TEST_CASE("strategy loops") {
  const auto m = map_table(reference_table(), located());
  const auto succ = successive_loops(m, 30.0, 400);
  REQUIRE(succ.size() == 4);
  CHECK_NOTHROW(validate_chain(succ));
  for (const auto& l : succ) {
    CHECK(l.family == Character::Feshbach);
    CHECK_NOTHROW(l.spec.validate());
  }
  const auto cl = cluster_loop(m, 30.0, 400, std::nullopt);
  REQUIRE(cl.size() == 1);
  CHECK_FALSE(cl[0].family);
  CHECK(cl[0].v_start == 12);
  CHECK(cl[0].v_expected == 16);
}
