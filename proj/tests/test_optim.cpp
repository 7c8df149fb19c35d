#include <doctest.h>

#include <cmath>
#include <limits>

#include "ltx/optim.hpp"
#include "support.hpp"

using namespace ltx;
using namespace ltx::train;

TEST_SUITE("optim") {
  TEST_CASE("default hyperparameters") {
    const OptimizerConfig c;
    CHECK(c.beta1 == 0.9);
    CHECK(c.beta2 == 0.999);
    CHECK(c.epsilon == 1e-8);
    CHECK(c.weight_decay == 0.1);
    CHECK(c.lr0 == 5e-5);
  }

  TEST_CASE("schedule endpoints and linearity") {
    OptimizerConfig c;
    c.total_steps = 200;
    CHECK(lr_at(0, c) == 5e-5);
    CHECK(lr_at(200, c) == 0.0);
    CHECK(lr_at(100, c) == doctest::Approx(2.5e-5).epsilon(1e-15));
    CHECK_THROWS_AS(lr_at(201, c), std::out_of_range);
  }

  TEST_CASE("schedule with warmup") {
    OptimizerConfig c;
    c.total_steps = 100;
    c.warmup_steps = 10;
    CHECK(lr_at(0, c) == 0.0);
    CHECK(lr_at(5, c) == doctest::Approx(2.5e-5));
    CHECK(lr_at(10, c) == 5e-5);
    CHECK(lr_at(55, c) == doctest::Approx(2.5e-5));
    CHECK(lr_at(100, c) == 0.0);
  }

  TEST_CASE("invalid configs") {
    OptimizerConfig c;
    c.beta1 = 1.0;
    CHECK_THROWS(c.validate());
    c = {};
    c.warmup_steps = c.total_steps + 1;
    CHECK_THROWS(c.validate());
    c = {};
    c.lr0 = -1;
    CHECK_THROWS(c.validate());
  }

  TEST_CASE("config JSON round trip") {
    OptimizerConfig c;
    c.total_steps = 7;
    c.decay_embeddings = false;
    const auto back = optimizer_config_from_json(nlohmann::json::parse(to_json(c).dump()));
    CHECK(back.total_steps == 7);
    CHECK_FALSE(back.decay_embeddings);
    CHECK(back.lr0 == c.lr0);
  }

  TEST_CASE("scalar step matches the hand-derived recurrence") {
    // m = 0.1, v = 0.001, m_hat = v_hat = 1:
    // theta' = 1 (1 - 5e-5 * 0.1) - 5e-5 / (1 + 1e-8)
    const OptimizerConfig c;
    std::vector<double> theta{1.0}, g{1.0}, m{0.0}, v{0.0};
    adam_update<double>(theta, g, m, v, 1, 5e-5, 0.1, c);
    CHECK(std::abs(theta[0] - 0.99994500) <= 1e-10);
    CHECK(theta[0] == doctest::Approx(0.9999450000005).epsilon(1e-15));
    CHECK(m[0] == doctest::Approx(0.1));
    CHECK(v[0] == doctest::Approx(0.001));
    // second step, scripted oracle value
    adam_update<double>(theta, g, m, v, 2, 5e-5, 0.1, c);
    CHECK(std::abs(theta[0] - 0.9998900002760001) <= 1e-12);
  }

  TEST_CASE("zero gradient without decay is a fixed point") {
    const OptimizerConfig c;
    std::vector<float> theta{0.25f, -3.0f, 1e-7f}, g(3, 0.0f), m(3, 0.0f), v(3, 0.0f);
    const auto before = theta;
    for (std::uint64_t s = 1; s <= 5; ++s) adam_update<float>(theta, g, m, v, s, 5e-5, 0.0, c);
    CHECK(theta == before);
  }

  TEST_CASE("adam_step rejects non-finite gradients without touching parameters") {
    const auto cfg = testing::toy_config(11);
    auto params = nn::init_params<float>(cfg, 1);
    const auto before = params;
    auto grads = nn::zero_params<float>(cfg);
    grads.layers[1].w_fc(0, 0) = std::numeric_limits<float>::quiet_NaN();
    auto state = zero_state<float>(cfg);
    try {
      adam_step(params, grads, state, OptimizerConfig{}, 5e-5);
      FAIL("expected domain_error");
    } catch (const std::domain_error& e) {
      CHECK(std::string(e.what()).find("layers.1.mlp.w_fc") != std::string::npos);
    }
    CHECK(state.step == 0);
    nn::visit_params([](const std::string&, const auto& a, const auto& b) { CHECK(a == b); }, params, before);
  }

  TEST_CASE("embedding decay can be disabled") {
    const auto cfg = testing::toy_config(11);
    auto params = nn::init_params<float>(cfg, 2);
    const auto before = params;
    const auto grads = nn::zero_params<float>(cfg);
    auto state = zero_state<float>(cfg);
    OptimizerConfig oc;
    oc.decay_embeddings = false;
    adam_step(params, grads, state, oc, 1e-2);
    CHECK(state.step == 1);
    CHECK(params.tok_emb == before.tok_emb);
    CHECK(params.pos_emb == before.pos_emb);
    CHECK(params.layers[0].w_qkv != before.layers[0].w_qkv);
    CHECK(params.layers[0].w_qkv.isApprox(before.layers[0].w_qkv * (1 - 1e-2f * 0.1f)));
  }
}
