#pragma once

#include <cmath>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "pairuni/core.hpp"
#include "pairuni/grpo.hpp"
#include "pairuni/io.hpp"
#include "pairuni/rewards.hpp"
#include "pairuni/synthetic.hpp"

namespace pairuni {

struct GradientCosine {
    double value = 0.0;
    bool degenerate = false;  // set when either gradient is numerically zero
};

inline GradientCosine gradient_cosine(const ParamArray& gu, const ParamArray& gg) {
    if (!gu.same_shape(gg)) throw ShapeMismatchError("gradient_cosine: shape mismatch");
    const double nu = gu.norm();
    const double ng = gg.norm();
    if (nu < 1e-12 || ng < 1e-12) return {0.0, true};
    return {clamp_unit_interval(gu.dot(gg) / (nu * ng), -1.0, 1.0), false};
}

// ---------------------------------------------------------------------------
// Rollout sampling shared by training and the agreement study.

inline UGPair task_as_pair(const SyntheticTaskPair& t) {
    if (t.alignment == TaskAlignment::Retrieved)
        return {t.pair_id, t.pair_id, PairKind::Retrieved, t.similarity,
                std::sqrt(t.similarity)};
    return {t.pair_id, t.pair_id, PairKind::Aligned, 1.0, 1.0};
}

namespace detail {

inline std::string token_string(const std::vector<int>& tokens) {
    std::string s;
    for (std::size_t z = 0; z < tokens.size(); ++z) {
        if (z > 0) s += ' ';
        s += std::to_string(tokens[z]);
    }
    return s;
}

}  // namespace detail

// Samples k_und understanding and k_gen generation rollouts for one task from
// the current policy; old log-probabilities are recorded at draw time.
inline PairRollouts sample_pair_rollouts(const ToyPolicy& policy,
                                         const SyntheticTaskPair& task,
                                         std::size_t k_und, std::size_t k_gen,
                                         std::size_t len_und, Rng& rng) {
    PairRollouts pr;
    pr.pair = task_as_pair(task);
    const std::string truth =
        detail::token_string(std::vector<int>(len_und, task.answer_token));
    for (std::size_t k = 0; k < k_und; ++k) {
        auto skel = sample_trajectory(policy, task.prompt_u, len_und, rng);
        Trajectory t;
        t.prompt_id = "q" + std::to_string(task.prompt_u);
        t.side = Side::Understanding;
        t.prompt = task.prompt_u;
        t.reward = reward_accuracy(detail::token_string(skel.tokens), truth);
        t.tokens = std::move(skel.tokens);
        t.old_logps = std::move(skel.logps);
        t.pair_id = task.pair_id;
        pr.und.push_back(std::move(t));
    }
    const TargetOverlapScorer scorer(task.target_seq);
    for (std::size_t k = 0; k < k_gen; ++k) {
        auto skel = sample_trajectory(policy, task.prompt_g, task.target_seq.size(), rng);
        Trajectory t;
        t.prompt_id = "q" + std::to_string(task.prompt_g);
        t.side = Side::Generation;
        t.prompt = task.prompt_g;
        t.reward = reward_generation(t.prompt_id, skel.tokens, scorer);
        t.tokens = std::move(skel.tokens);
        t.old_logps = std::move(skel.logps);
        t.pair_id = task.pair_id;
        pr.gen.push_back(std::move(t));
    }
    return pr;
}

inline std::vector<Trajectory> flatten_rollouts(const std::vector<PairRollouts>& pairs) {
    std::vector<Trajectory> batch;
    for (const auto& p : pairs) {
        for (const auto& t : p.und) batch.push_back(t);
        for (const auto& t : p.gen) batch.push_back(t);
    }
    return batch;
}

// ---------------------------------------------------------------------------
// Agreement study.

struct AgreementRecord {
    AgreementRegime regime = AgreementRegime::AlignedPairs;
    std::size_t step = 0;
    double grad_cos = 0.0;
    bool degenerate = false;
};

enum class MedianScope { Steps, Pairs };

inline MedianScope median_scope_from_string(const std::string& s) {
    if (s == "steps") return MedianScope::Steps;
    if (s == "pairs") return MedianScope::Pairs;
    throw ConfigError("unknown median scope '" + s + "' (expected steps or pairs)");
}

inline std::string to_string(MedianScope m) {
    return m == MedianScope::Steps ? "steps" : "pairs";
}

struct AgreementConfig {
    std::vector<AgreementRegime> regimes = all_agreement_regimes();
    std::size_t steps = 200;
    StudyTasksConfig tasks;
    std::size_t len_und = 1;
    std::size_t num_prompts = 32;
    std::size_t vocab_size = 16;
    GrpoConfig grpo;
    MedianScope median_scope = MedianScope::Steps;
    std::uint64_t seed = 42;
};

struct AgreementOutput {
    std::vector<AgreementRecord> records;
    json summary;
};

namespace detail {

inline ObjectiveReport regime_objective(AgreementRegime regime,
                                        const std::vector<PairRollouts>& rollouts,
                                        const ToyPolicy& policy, const GrpoConfig& cfg) {
    switch (regime) {
        case AgreementRegime::AlignedPairs:
        case AgreementRegime::RetrievedPairs:
            return objective_pair_grpo(rollouts, policy, cfg);
        case AgreementRegime::RandomPairs:
            return objective_pairwise(rollouts, policy, cfg);
        default:
            return objective_vanilla(flatten_rollouts(rollouts), policy, cfg);
    }
}

}  // namespace detail

// Runs every requested regime from a fresh zero-logit policy and records the
// cosine between the two task sides' gradients at each step (or per pair).
// The summary carries the per-regime medians.
inline AgreementOutput run_agreement_study(const AgreementConfig& cfg) {
    AgreementOutput out;
    std::map<std::string, double> medians;

    for (const auto regime : cfg.regimes) {
        const auto ridx = static_cast<std::size_t>(regime);
        auto policy =
            make_toy_policy(cfg.num_prompts, cfg.vocab_size,
                            derive_seed(cfg.seed, "study-policy", ridx));
        const auto tasks = make_study_tasks(regime, cfg.num_prompts, cfg.vocab_size,
                                            cfg.tasks, cfg.seed);
        const std::uint64_t stream_root = derive_seed(cfg.seed, "study-rollout", ridx);

        std::size_t k_und = cfg.grpo.k_und, k_gen = cfg.grpo.k_gen;
        if (regime == AgreementRegime::UnderstandingOnly) k_gen = 0;
        if (regime == AgreementRegime::GenerationOnly) k_und = 0;

        std::vector<double> values;
        for (std::size_t step = 0; step < cfg.steps; ++step) {
            std::vector<PairRollouts> rollouts;
            rollouts.reserve(tasks.size());
            for (std::size_t p = 0; p < tasks.size(); ++p) {
                Rng rng(derive_seed(stream_root, "step", step, p));
                rollouts.push_back(sample_pair_rollouts(policy, tasks[p], k_und, k_gen,
                                                        cfg.len_und, rng));
            }
            const auto report = detail::regime_objective(regime, rollouts, policy, cfg.grpo);

            if (cfg.median_scope == MedianScope::Steps) {
                const auto gc =
                    gradient_cosine(report.per_side_grad.at(Side::Understanding),
                                    report.per_side_grad.at(Side::Generation));
                out.records.push_back({regime, step, gc.value, gc.degenerate});
                values.push_back(gc.value);
            } else {
                for (std::size_t p = 0; p < rollouts.size(); ++p) {
                    const std::vector<PairRollouts> one = {rollouts[p]};
                    const auto rp = detail::regime_objective(regime, one, policy, cfg.grpo);
                    const auto gc =
                        gradient_cosine(rp.per_side_grad.at(Side::Understanding),
                                        rp.per_side_grad.at(Side::Generation));
                    out.records.push_back({regime, step, gc.value, gc.degenerate});
                    values.push_back(gc.value);
                }
            }
            sgd_step(policy, report, cfg.grpo.lr);
        }
        medians[to_string(regime)] = median(values);
    }

    out.summary = {{"medians", medians},
                   {"steps", cfg.steps},
                   {"pairs_per_regime", cfg.tasks.pairs},
                   {"median_scope", to_string(cfg.median_scope)},
                   {"seed", cfg.seed}};
    return out;
}

inline std::string agreement_to_csv(const std::vector<AgreementRecord>& records) {
    std::string csv = "regime,step,grad_cos,flag\n";
    for (const auto& r : records) {
        csv += to_string(r.regime);
        csv += ',';
        csv += std::to_string(r.step);
        csv += ',';
        csv += format_double(r.grad_cos);
        csv += ',';
        csv += r.degenerate ? '1' : '0';
        csv += '\n';
    }
    return csv;
}

// ---------------------------------------------------------------------------
// Reward-curve smoothing over a training log.

inline constexpr const char* kTrainingCsvHeader =
    "step,J,mean_reward_und,mean_reward_gen,clip_fraction,kl,grad_cos";

// Exponential moving average (smoothing 0.9) of the per-side mean rewards.
inline std::string summarize_rewards(const std::string& training_csv) {
    std::istringstream in(training_csv);
    std::string line;
    if (!std::getline(in, line)) throw MalformedLogError("training log: empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kTrainingCsvHeader)
        throw MalformedLogError("training log: unexpected header '" + line + "'");

    std::string out = "step,reward_und_ema,reward_gen_ema\n";
    double ema_u = 0.0, ema_g = 0.0;
    bool first = true;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::string field;
        std::istringstream row(line);
        while (std::getline(row, field, ',')) fields.push_back(field);
        if (fields.size() != 7)
            throw MalformedLogError("training log line " + std::to_string(line_no) +
                                    ": expected 7 fields, got " +
                                    std::to_string(fields.size()));
        double ru = 0.0, rg = 0.0;
        try {
            ru = std::stod(fields[2]);
            rg = std::stod(fields[3]);
        } catch (const std::exception&) {
            throw MalformedLogError("training log line " + std::to_string(line_no) +
                                    ": non-numeric reward");
        }
        if (first) {
            ema_u = ru;
            ema_g = rg;
            first = false;
        } else {
            ema_u = 0.9 * ema_u + 0.1 * ru;
            ema_g = 0.9 * ema_g + 0.1 * rg;
        }
        out += fields[0] + "," + format_double(ema_u) + "," + format_double(ema_g) + "\n";
    }
    return out;
}

}  // namespace pairuni
