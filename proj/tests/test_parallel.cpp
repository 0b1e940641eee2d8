#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <cmath>

#include "recsim/experiment.hpp"
#include "recsim/parallel.hpp"

using namespace recsim;

TEST_CASE("parallel_for touches every index exactly once") {
  for (const Exec exec : {Exec::serial, Exec::openmp}) {
    std::vector<std::atomic<int>> hits(4097);
    parallel_for(exec, hits.size(), [&](std::size_t i) { hits[i]++; });
    for (const auto& h : hits) CHECK(h.load() == 1);
  }
}

TEST_CASE("parallel_for propagates the body's exception") {
  for (const Exec exec : {Exec::serial, Exec::openmp}) {
    CHECK_THROWS_AS(parallel_for(exec, 100,
                                 [&](std::size_t i) {
                                   if (i == 57)
                                     throw std::runtime_error("boom");
                                 }),
                    std::runtime_error);
  }
}

TEST_CASE("compensated sum matches a long double reference") {
  RngStream rng(60, 0);
  std::vector<double> values;
  for (int i = 0; i < 100000; ++i)
    values.push_back((rng.next_double() - 0.5) * std::pow(10.0, i % 8));
  long double reference = 0.0L;
  for (double v : values) reference += static_cast<long double>(v);
  CHECK(compensated_sum(values) ==
        doctest::Approx(static_cast<double>(reference)).epsilon(1e-12));
}

TEST_CASE("sampling is identical under serial and openmp execution") {
  const auto model = default_moons();
  const Dataset a = sample(*model, 5000, RngStream(61, 0), Exec::serial);
  const Dataset b = sample(*model, 5000, RngStream(61, 0), Exec::openmp);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].first == b[i].first);  // bitwise
    CHECK(a[i].second == b[i].second);
  }
}

TEST_CASE("risk estimates are bitwise identical across execution policies") {
  const auto model = default_two_gaussians();
  const auto bayes = bayes_classifier(model);
  const Dataset data = sample(*model, 50000, RngStream(62, 0));
  const RiskEstimate serial =
      estimate_risk(*bayes, Loss::zero_one(), data, Exec::serial);
  const RiskEstimate openmp =
      estimate_risk(*bayes, Loss::zero_one(), data, Exec::openmp);
  CHECK(serial.value == openmp.value);
  CHECK(serial.stderr_ == openmp.stderr_);
}

TEST_CASE("recourse application is bitwise identical across policies") {
  const auto model = default_moons();
  const auto bayes = bayes_classifier(model);
  const Dataset data = sample(*model, 2000, RngStream(63, 0));

  RecoursePolicy policy;
  policy.searcher.kind = SearcherSpec::Kind::grid_brute_force;
  policy.searcher.grid_resolution = 80;
  policy.acceptance = AcceptanceFunction::gaussian_kernel(0.5);

  PreparedPolicy serial_policy(policy, bayes, data, Exec::serial);
  PreparedPolicy openmp_policy(policy, bayes, data, Exec::openmp);
  const auto a = apply_recourse(serial_policy, *model,
                                ResponseModel::compliant(), data,
                                RngStream(63, 1), Exec::serial);
  const auto b = apply_recourse(openmp_policy, *model,
                                ResponseModel::compliant(), data,
                                RngStream(63, 1), Exec::openmp);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].b == b[i].b);
    CHECK(a[i].x == b[i].x);
    CHECK(a[i].y == b[i].y);
  }
}

TEST_CASE("growing spheres consumes per-point streams deterministically") {
  const auto model = default_two_gaussians();
  const auto bayes = bayes_classifier(model);
  const Dataset data = sample(*model, 300, RngStream(64, 0));
  RecoursePolicy policy;
  policy.searcher.kind = SearcherSpec::Kind::growing_spheres;
  PreparedPolicy prepared(policy, bayes, data, Exec::serial);
  const auto a = apply_recourse(prepared, *model, ResponseModel::defiant(),
                                data, RngStream(64, 1), Exec::serial);
  const auto b = apply_recourse(prepared, *model, ResponseModel::defiant(),
                                data, RngStream(64, 1), Exec::openmp);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].x == b[i].x);
}

TEST_CASE("a full replicate is identical under both execution policies") {
  const auto model = default_moons();
  ClassifierSpec spec;
  spec.train.family = TrainConfig::Family::mlp;
  spec.train.mlp_hidden = {4};
  spec.train.mlp_epochs = 10;
  spec.train.seed = 5;
  RecoursePolicy policy;
  policy.searcher.kind = SearcherSpec::Kind::grid_brute_force;
  policy.searcher.grid_resolution = 60;
  const RiskReport a = run_replicate(*model, spec, policy,
                                     ResponseModel::compliant(),
                                     Loss::zero_one(), 500, 500,
                                     RngStream(65, 0), Exec::serial)
                           .report;
  const RiskReport b = run_replicate(*model, spec, policy,
                                     ResponseModel::compliant(),
                                     Loss::zero_one(), 500, 500,
                                     RngStream(65, 0), Exec::openmp)
                           .report;
  CHECK(a.r_p.value == b.r_p.value);
  CHECK(a.r_q.value == b.r_q.value);
  CHECK(a.decomposition.b1_fneg == b.decomposition.b1_fneg);
}

TEST_CASE("openmp is actually enabled in this build") {
#if defined(_OPENMP)
  CHECK(hardware_threads() >= 1);
#else
  FAIL("built without OpenMP");
#endif
}
