#pragma once

#include <string>
#include <vector>

#include "pairuni/analysis.hpp"
#include "pairuni/core.hpp"
#include "pairuni/grpo.hpp"
#include "pairuni/pairing.hpp"
#include "pairuni/policy.hpp"
#include "pairuni/synthetic.hpp"

namespace pairuni {

enum class ObjectiveKind { Vanilla, Pairwise, PairGrpo };

inline ObjectiveKind objective_kind_from_string(const std::string& s) {
    if (s == "vanilla") return ObjectiveKind::Vanilla;
    if (s == "pairwise") return ObjectiveKind::Pairwise;
    if (s == "pair-grpo") return ObjectiveKind::PairGrpo;
    throw ConfigError("unknown objective '" + s +
                      "' (expected vanilla, pairwise, or pair-grpo)");
}

inline std::string to_string(ObjectiveKind k) {
    switch (k) {
        case ObjectiveKind::Vanilla: return "vanilla";
        case ObjectiveKind::Pairwise: return "pairwise";
        default: return "pair-grpo";
    }
}

struct TrainConfig {
    ObjectiveKind objective = ObjectiveKind::PairGrpo;
    bool sim_weight = true;  // false forces every pair weight to 1
    std::size_t steps = 300;
    std::size_t len_und = 1;
    std::size_t len_gen = 6;
    std::size_t num_prompts = 32;
    std::size_t vocab_size = 16;
    GrpoConfig grpo;
    std::uint64_t seed = 42;
};

struct StepStats {
    std::size_t step = 0;
    double objective = 0.0;
    double mean_reward_und = 0.0;
    double mean_reward_gen = 0.0;
    double clip_fraction = 0.0;
    double kl = 0.0;
    double grad_cos = 0.0;
};

struct TrainResult {
    ToyPolicy policy;
    std::vector<StepStats> steps;
    std::string csv;
};

// One optimization run over the toy tasks derived from a pair dataset:
// sample rollouts from the current policy, evaluate the selected objective,
// take one ascent step, and log per-step metrics.
inline TrainResult train(const std::vector<PairRecord>& records, const TrainConfig& cfg) {
    if (records.empty()) throw TooFewPointsError("train: empty pair dataset");
    if (!cfg.sim_weight && cfg.objective == ObjectiveKind::Vanilla)
        throw ConfigError("disabling similarity weights requires a paired objective");

    std::vector<SyntheticTaskPair> tasks;
    tasks.reserve(records.size());
    for (std::size_t i = 0; i < records.size(); ++i)
        tasks.push_back(derive_task(records[i], i, cfg.num_prompts, cfg.vocab_size,
                                    cfg.len_gen, cfg.seed));

    TrainResult out;
    out.policy = make_toy_policy(cfg.num_prompts, cfg.vocab_size,
                                 derive_seed(cfg.seed, "train-policy"));
    const std::uint64_t stream_root = derive_seed(cfg.seed, "train-rollout");
    out.csv = std::string(kTrainingCsvHeader) + "\n";

    for (std::size_t step = 0; step < cfg.steps; ++step) {
        std::vector<PairRollouts> rollouts;
        rollouts.reserve(tasks.size());
        double sum_u = 0.0, sum_g = 0.0;
        std::size_t n_u = 0, n_g = 0;
        for (std::size_t p = 0; p < tasks.size(); ++p) {
            Rng rng(derive_seed(stream_root, "step", step, p));
            auto pr = sample_pair_rollouts(out.policy, tasks[p], cfg.grpo.k_und,
                                           cfg.grpo.k_gen, cfg.len_und, rng);
            if (!cfg.sim_weight) pr.pair.weight = 1.0;
            for (const auto& t : pr.und) {
                sum_u += t.reward;
                ++n_u;
            }
            for (const auto& t : pr.gen) {
                sum_g += t.reward;
                ++n_g;
            }
            rollouts.push_back(std::move(pr));
        }

        ObjectiveReport report;
        switch (cfg.objective) {
            case ObjectiveKind::Vanilla:
                report = objective_vanilla(flatten_rollouts(rollouts), out.policy, cfg.grpo);
                break;
            case ObjectiveKind::Pairwise:
                report = objective_pairwise(rollouts, out.policy, cfg.grpo);
                break;
            case ObjectiveKind::PairGrpo:
                report = objective_pair_grpo(rollouts, out.policy, cfg.grpo);
                break;
        }

        const auto gc = gradient_cosine(report.per_side_grad.at(Side::Understanding),
                                        report.per_side_grad.at(Side::Generation));
        StepStats s;
        s.step = step;
        s.objective = report.value;
        s.mean_reward_und = n_u > 0 ? sum_u / static_cast<double>(n_u) : 0.0;
        s.mean_reward_gen = n_g > 0 ? sum_g / static_cast<double>(n_g) : 0.0;
        s.clip_fraction = report.clip_fraction;
        s.kl = report.kl;
        s.grad_cos = gc.value;
        out.steps.push_back(s);

        out.csv += std::to_string(s.step);
        for (double v : {s.objective, s.mean_reward_und, s.mean_reward_gen,
                         s.clip_fraction, s.kl, s.grad_cos}) {
            out.csv += ',';
            out.csv += format_double(v);
        }
        out.csv += '\n';

        sgd_step(out.policy, report, cfg.grpo.lr);
    }
    return out;
}

}  // namespace pairuni
