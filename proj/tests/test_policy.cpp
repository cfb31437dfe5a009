#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "pairuni/policy.hpp"

using namespace pairuni;

TEST_CASE("uniform logits give uniform log-probabilities", "[policy]") {
    const auto p = make_toy_policy(2, 4, 0);
    for (int t = 0; t < 4; ++t)
        CHECK(log_prob(p, 0, t) == Catch::Approx(std::log(0.25)).margin(1e-12));
}

TEST_CASE("log-probability matches a direct softmax sum", "[policy]") {
    auto p = make_toy_policy(1, 4, 0);
    p.logits.at(0, 0) = 10.0;
    double z = 0.0;
    for (int t = 0; t < 4; ++t) z += std::exp(p.logits.at(0, t));
    for (int t = 0; t < 4; ++t)
        CHECK(log_prob(p, 0, t) ==
              Catch::Approx(p.logits.at(0, t) - std::log(z)).margin(1e-12));

    const auto probs = softmax_row(p, 0);
    double total = 0.0;
    for (double q : probs) total += q;
    CHECK(total == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("log-probability is shift invariant", "[policy]") {
    auto p = make_toy_policy(1, 5, 7, 1.0);
    auto shifted = p;
    for (std::size_t t = 0; t < 5; ++t) shifted.logits.at(0, t) += 123.0;
    for (int t = 0; t < 5; ++t)
        CHECK(log_prob(shifted, 0, t) == Catch::Approx(log_prob(p, 0, t)).margin(1e-9));
}

TEST_CASE("large logits do not overflow the normalizer", "[policy]") {
    auto p = make_toy_policy(1, 3, 0);
    p.logits.at(0, 0) = 1000.0;
    p.logits.at(0, 1) = 999.0;
    p.logits.at(0, 2) = -1000.0;
    CHECK(std::isfinite(log_prob(p, 0, 0)));
    CHECK(std::isfinite(log_prob(p, 0, 2)));
    CHECK(log_prob(p, 0, 0) > log_prob(p, 0, 1));
}

TEST_CASE("score gradient is onehot minus softmax in one row", "[policy]") {
    const auto p = make_toy_policy(3, 2, 0);
    const auto g = grad_log_prob(p, 1, 0);
    CHECK(g.at(1, 0) == Catch::Approx(0.5).margin(1e-12));
    CHECK(g.at(1, 1) == Catch::Approx(-0.5).margin(1e-12));
    for (std::size_t t = 0; t < 2; ++t) {
        CHECK(g.at(0, t) == 0.0);
        CHECK(g.at(2, t) == 0.0);
    }
}

TEST_CASE("score gradient rows sum to zero", "[policy]") {
    const auto p = make_toy_policy(4, 6, 11, 1.5);
    for (std::size_t prompt = 0; prompt < 4; ++prompt) {
        const auto g = grad_log_prob(p, prompt, 3);
        double row = 0.0;
        for (std::size_t t = 0; t < 6; ++t) row += g.at(prompt, t);
        CHECK(std::fabs(row) <= 1e-12);
    }
}

TEST_CASE("score gradient matches finite differences", "[policy]") {
    const auto p = make_toy_policy(3, 5, 23, 0.8);
    const auto analytic = grad_log_prob(p, 2, 4);
    const auto numeric = finite_diff_oracle(
        [](const ToyPolicy& q) { return log_prob(q, 2, 4); }, p);
    for (std::size_t i = 0; i < analytic.data.size(); ++i)
        CHECK(analytic.data[i] == Catch::Approx(numeric.data[i]).margin(1e-6));
}

TEST_CASE("gradient accumulation scales and adds in place", "[policy]") {
    const auto p = make_toy_policy(2, 2, 0);
    ParamArray acc(2, 2);
    accumulate_grad_log_prob(p, 0, 1, 2.0, acc);
    accumulate_grad_log_prob(p, 0, 1, 2.0, acc);
    CHECK(acc.at(0, 1) == Catch::Approx(2.0 * 2.0 * 0.5).margin(1e-12));
    CHECK(acc.at(0, 0) == Catch::Approx(-2.0).margin(1e-12));

    ParamArray wrong(3, 2);
    CHECK_THROWS_AS(accumulate_grad_log_prob(p, 0, 1, 1.0, wrong), ShapeMismatchError);
}

TEST_CASE("sampling follows the softmax law", "[policy]") {
    auto p = make_toy_policy(1, 3, 0);
    p.logits.at(0, 0) = std::log(0.6);
    p.logits.at(0, 1) = std::log(0.3);
    p.logits.at(0, 2) = std::log(0.1);

    Rng rng(2024);
    const std::size_t draws = 10000;
    std::size_t counts[3] = {0, 0, 0};
    const auto roll = sample_trajectory(p, 0, draws, rng);
    REQUIRE(roll.tokens.size() == draws);
    for (std::size_t z = 0; z < draws; ++z) {
        REQUIRE(roll.tokens[z] >= 0);
        REQUIRE(roll.tokens[z] < 3);
        ++counts[roll.tokens[z]];
        CHECK(roll.logps[z] ==
              Catch::Approx(log_prob(p, 0, roll.tokens[z])).margin(1e-12));
    }
    const double expect[3] = {0.6, 0.3, 0.1};
    for (int t = 0; t < 3; ++t) {
        const double freq = static_cast<double>(counts[t]) / draws;
        const double se = std::sqrt(expect[t] * (1 - expect[t]) / draws);
        INFO("token " << t << " freq " << freq);
        CHECK(std::fabs(freq - expect[t]) <= 3.5 * se);
    }
}

TEST_CASE("sampling is deterministic per stream", "[policy]") {
    const auto p = make_toy_policy(4, 8, 5, 1.0);
    Rng a(77), b(77), c(78);
    const auto ra = sample_trajectory(p, 1, 32, a);
    const auto rb = sample_trajectory(p, 1, 32, b);
    const auto rc = sample_trajectory(p, 1, 32, c);
    CHECK(ra.tokens == rb.tokens);
    CHECK(ra.logps == rb.logps);
    CHECK(ra.tokens != rc.tokens);
}

TEST_CASE("checkpoints round-trip exactly", "[policy]") {
    const auto p = make_toy_policy(3, 4, 99, 2.0);
    const auto back = policy_from_json(policy_to_json(p));
    CHECK(back.num_prompts == p.num_prompts);
    CHECK(back.vocab_size == p.vocab_size);
    CHECK(back.seed == p.seed);
    REQUIRE(back.logits.data.size() == p.logits.data.size());
    for (std::size_t i = 0; i < p.logits.data.size(); ++i)
        CHECK(back.logits.data[i] == p.logits.data[i]);

    CHECK_THROWS_AS(policy_from_json(json{{"num_prompts", 2}}), SchemaError);
    auto j = policy_to_json(p);
    j["logits"].erase(0);
    CHECK_THROWS_AS(policy_from_json(j), SchemaError);
}

TEST_CASE("index validation guards every accessor", "[policy]") {
    const auto p = make_toy_policy(2, 3, 0);
    CHECK_THROWS_AS(log_prob(p, 2, 0), IndexOutOfRangeError);
    CHECK_THROWS_AS(log_prob(p, 0, 3), IndexOutOfRangeError);
    CHECK_THROWS_AS(log_prob(p, 0, -1), IndexOutOfRangeError);
    CHECK_THROWS_AS(grad_log_prob(p, 5, 0), IndexOutOfRangeError);
    Rng rng(1);
    CHECK_THROWS_AS(sample_trajectory(p, 9, 4, rng), IndexOutOfRangeError);
}

TEST_CASE("initialized policies differ by seed, not by call", "[policy]") {
    const auto a = make_toy_policy(4, 4, 1, 1.0);
    const auto b = make_toy_policy(4, 4, 1, 1.0);
    const auto c = make_toy_policy(4, 4, 2, 1.0);
    CHECK(a.logits.data == b.logits.data);
    CHECK(a.logits.data != c.logits.data);
    const auto zero = make_toy_policy(4, 4, 1);
    for (double v : zero.logits.data) CHECK(v == 0.0);
}
