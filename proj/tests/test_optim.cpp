#include <doctest.h>

#include <cmath>

#include "cldnet/optim.hpp"

using namespace cldnet;

TEST_CASE("learning-rate schedule steps at the documented epochs") {
  LrSchedule s;
  CHECK(s.rate_for_epoch(1) == 0.01);
  CHECK(s.rate_for_epoch(4) == 0.01);
  CHECK(s.rate_for_epoch(5) == 0.001);
  CHECK(s.rate_for_epoch(9) == 0.001);
  CHECK(s.rate_for_epoch(10) == 0.0001);
  CHECK(s.rate_for_epoch(12) == 0.0001);
  CHECK(s.rate_for_epoch(19) == 0.0001);
  CHECK(s.rate_for_epoch(20) == 0.00001);
  CHECK(s.rate_for_epoch(29) == 0.00001);
  CHECK(s.rate_for_epoch(30) == 0.000001);
  CHECK(s.rate_for_epoch(35) == 0.000001);
  CHECK(s.rate_for_epoch(1000) == 0.000001);
}

TEST_CASE("first Adam step matches the closed form") {
  // With bias correction, step 1 moves by -lr * g / (|g| + eps).
  auto p = ag::make_var<float>({1, 1, 1, 3}, true, "p");
  p->value = {1.0f, -2.0f, 0.5f};
  p->ensure_grad();
  p->grad = {0.3f, -0.7f, 0.0f};
  AdamState<float> st;
  st.lr = 0.01;
  adam_step<float>({p}, st);
  CHECK(p->value[0] == doctest::Approx(1.0 - 0.01).epsilon(1e-4));
  CHECK(p->value[1] == doctest::Approx(-2.0 + 0.01).epsilon(1e-4));
  CHECK(p->value[2] == doctest::Approx(0.5));  // zero grad, no movement
  CHECK(st.step == 1);
}

TEST_CASE("Adam minimizes a quadratic") {
  auto p = ag::make_var<float>({1, 1, 1, 1}, true, "x");
  p->value = {10.0f};
  AdamState<float> st;
  st.lr = 0.1;
  for (int it = 0; it < 500; ++it) {
    p->ensure_grad();
    p->grad[0] = 2.0f * (p->value[0] - 3.0f);
    adam_step<float>({p}, st);
  }
  CHECK(p->value[0] == doctest::Approx(3.0).epsilon(1e-3));
}

TEST_CASE("per-parameter state is keyed by name") {
  auto a = ag::make_var<float>({1, 1, 1, 1}, true, "a");
  auto b = ag::make_var<float>({1, 1, 1, 1}, true, "b");
  a->value = {0.0f};
  b->value = {0.0f};
  AdamState<float> st;
  st.lr = 0.01;
  a->ensure_grad();
  b->ensure_grad();
  a->grad = {1.0f};
  b->grad = {0.0f};
  adam_step<float>({a, b}, st);
  CHECK(st.slots.count("a") == 1);
  CHECK(st.slots.count("b") == 1);
  CHECK(st.slots["a"].m[0] != 0.0f);
  CHECK(st.slots["b"].m[0] == 0.0f);
}

TEST_CASE("non-finite gradients are reported with the parameter name") {
  auto p = ag::make_var<float>({1, 1, 1, 2}, true, "enc0.pw.weight");
  p->ensure_grad();
  p->grad = {0.1f, std::numeric_limits<float>::quiet_NaN()};
  AdamState<float> st;
  CHECK_THROWS_WITH_AS(adam_step<float>({p}, st),
                       doctest::Contains("enc0.pw.weight"), std::runtime_error);
}
