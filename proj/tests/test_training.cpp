#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "pairuni/training.hpp"

using namespace pairuni;

namespace {

PairRecord aligned_record(const std::string& id) {
    PairRecord r;
    r.pair_id = id;
    r.pair = {id, id, PairKind::Aligned, 1.0, 1.0};
    r.und_image = r.gen_image = "img-" + id;
    r.question = "Q";
    r.answer = "A";
    r.caption = "C";
    return r;
}

PairRecord retrieved_record(const std::string& id, double sim) {
    PairRecord r;
    r.pair_id = id;
    r.pair = {"u-" + id, "g-" + id, PairKind::Retrieved, sim, std::sqrt(sim)};
    r.und_image = "img-u-" + id;
    r.gen_image = "img-g-" + id;
    r.question = "Q";
    r.answer = "A";
    r.caption = "C";
    return r;
}

std::vector<PairRecord> small_dataset() {
    return {aligned_record("a0"), aligned_record("a1"), retrieved_record("r0", 0.81),
            retrieved_record("r1", 0.64)};
}

}  // namespace

TEST_CASE("derived tasks mirror their pair records", "[training]") {
    const auto ds = small_dataset();
    const std::size_t P = 8, V = 6, len = 4;

    const auto t0 = derive_task(ds[0], 0, P, V, len, 42);
    CHECK(t0.pair_id == "a0");
    CHECK(t0.prompt_u == 0);
    CHECK(t0.prompt_g == 0);
    CHECK(t0.alignment == TaskAlignment::Aligned);
    CHECK(t0.target_seq.size() == len);
    for (int tok : t0.target_seq) CHECK(tok == t0.answer_token);

    const auto t2 = derive_task(ds[2], 2, P, V, len, 42);
    CHECK(t2.prompt_u == 2);
    CHECK(t2.alignment == TaskAlignment::Retrieved);
    CHECK(t2.similarity == 0.81);
    std::size_t hits = 0;
    for (int tok : t2.target_seq) hits += tok == t2.answer_token ? 1 : 0;
    CHECK(hits == static_cast<std::size_t>(std::llround(0.81 * len)));
    for (int tok : t2.target_seq) {
        CHECK(tok >= 0);
        CHECK(tok < static_cast<int>(V));
    }

    // Prompt rows wrap around the policy size.
    const auto t9 = derive_task(ds[1], 9, P, V, len, 42);
    CHECK(t9.prompt_u == 1);

    const auto again = derive_task(ds[2], 2, P, V, len, 42);
    CHECK(again.answer_token == t2.answer_token);
    CHECK(again.target_seq == t2.target_seq);
    const auto other_seed = derive_task(ds[2], 2, P, V, len, 43);
    CHECK((other_seed.answer_token != t2.answer_token ||
           other_seed.target_seq != t2.target_seq));
}

TEST_CASE("training runs are deterministic and logged", "[training]") {
    TrainConfig cfg;
    cfg.steps = 5;
    cfg.num_prompts = 8;
    cfg.vocab_size = 6;
    cfg.len_gen = 4;
    cfg.grpo.k_und = 2;
    cfg.grpo.k_gen = 2;
    cfg.grpo.lr = 0.2;

    const auto ds = small_dataset();
    const auto a = train(ds, cfg);
    const auto b = train(ds, cfg);

    CHECK(a.csv == b.csv);
    CHECK(a.policy.logits.data == b.policy.logits.data);
    REQUIRE(a.steps.size() == 5);
    CHECK(a.csv.rfind(kTrainingCsvHeader, 0) == 0);

    std::size_t lines = 0;
    for (char c : a.csv) lines += c == '\n' ? 1 : 0;
    CHECK(lines == 6);

    for (const auto& s : a.steps) {
        CHECK(s.mean_reward_und >= 0.0);
        CHECK(s.mean_reward_und <= 1.0);
        CHECK(s.mean_reward_gen >= 0.0);
        CHECK(s.mean_reward_gen <= 1.0);
        CHECK(s.kl >= 0.0);
        CHECK(std::isfinite(s.objective));
    }

    // The smoothing pass accepts the emitted log as-is.
    const auto smooth = summarize_rewards(a.csv);
    CHECK(smooth.rfind("step,reward_und_ema", 0) == 0);
}

TEST_CASE("disabling similarity weights reproduces the unweighted objective",
          "[training]") {
    TrainConfig weighted;
    weighted.steps = 4;
    weighted.num_prompts = 8;
    weighted.vocab_size = 6;
    weighted.len_gen = 4;
    weighted.grpo.lr = 0.2;
    weighted.objective = ObjectiveKind::PairGrpo;
    weighted.sim_weight = false;

    TrainConfig pairwise = weighted;
    pairwise.objective = ObjectiveKind::Pairwise;
    pairwise.sim_weight = true;

    const auto ds = small_dataset();
    const auto a = train(ds, weighted);
    const auto b = train(ds, pairwise);
    CHECK(a.csv == b.csv);
    CHECK(a.policy.logits.data == b.policy.logits.data);

    // With weights on, the retrieved pairs change the trajectory of the run.
    TrainConfig on = weighted;
    on.sim_weight = true;
    const auto c = train(ds, on);
    CHECK(c.csv != a.csv);
}

TEST_CASE("vanilla training accepts pair datasets but not the weight toggle",
          "[training]") {
    TrainConfig cfg;
    cfg.steps = 2;
    cfg.num_prompts = 8;
    cfg.vocab_size = 6;
    cfg.len_gen = 3;
    cfg.objective = ObjectiveKind::Vanilla;
    const auto ds = small_dataset();
    const auto result = train(ds, cfg);
    CHECK(result.steps.size() == 2);

    cfg.sim_weight = false;
    CHECK_THROWS_AS(train(ds, cfg), ConfigError);
    CHECK_THROWS_AS(train({}, cfg), TooFewPointsError);
}

TEST_CASE("objective names round-trip", "[training]") {
    CHECK(objective_kind_from_string("vanilla") == ObjectiveKind::Vanilla);
    CHECK(objective_kind_from_string("pairwise") == ObjectiveKind::Pairwise);
    CHECK(objective_kind_from_string("pair-grpo") == ObjectiveKind::PairGrpo);
    CHECK(to_string(ObjectiveKind::PairGrpo) == "pair-grpo");
    CHECK_THROWS_AS(objective_kind_from_string("ppo"), ConfigError);
}
