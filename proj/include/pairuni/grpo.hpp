#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "pairuni/core.hpp"
#include "pairuni/pairing.hpp"
#include "pairuni/policy.hpp"

namespace pairuni {

// One sampled rollout. prompt_id is the grouping key; prompt is the logit
// row it was sampled from.
struct Trajectory {
    std::string prompt_id;
    Side side = Side::Understanding;
    std::size_t prompt = 0;
    std::vector<int> tokens;
    std::vector<double> old_logps;  // log pi_old per token, recorded at draw time
    double reward = 0.0;
    std::string pair_id;  // empty when the rollout is unpaired
};

enum class KlEstimator { K3 };
enum class GroupScope { Pair, Batch };

inline GroupScope group_scope_from_string(const std::string& s) {
    if (s == "pair") return GroupScope::Pair;
    if (s == "batch") return GroupScope::Batch;
    throw ConfigError("unknown group scope '" + s + "' (expected pair or batch)");
}

struct GrpoConfig {
    double clip_eps = 0.2;
    double beta = 0.0;
    std::size_t k_und = 4;
    std::size_t k_gen = 4;
    double sigma_min = 1e-8;
    double lr = 1e-6;
    KlEstimator kl_estimator = KlEstimator::K3;
    GroupScope group_scope = GroupScope::Pair;
};

struct Group {
    std::string prompt_id;
    Side side = Side::Understanding;
    std::vector<std::size_t> members;  // indices into the batch
    double mean = 0.0;
    double stddev = 0.0;              // population std
    std::vector<double> advantages;   // parallel to members
};

namespace detail {

// (r - mean) / population std; all zeros when the std carries no signal.
inline std::vector<double> normalize_rewards(const std::vector<double>& rewards,
                                             double sigma_min, double* out_mean = nullptr,
                                             double* out_std = nullptr) {
    const auto n = static_cast<double>(rewards.size());
    double mean = 0.0;
    for (double r : rewards) mean += r;
    mean /= n;
    double var = 0.0;
    for (double r : rewards) var += (r - mean) * (r - mean);
    const double stddev = std::sqrt(var / n);
    if (out_mean != nullptr) *out_mean = mean;
    if (out_std != nullptr) *out_std = stddev;
    std::vector<double> adv(rewards.size(), 0.0);
    if (stddev >= sigma_min)
        for (std::size_t i = 0; i < rewards.size(); ++i) adv[i] = (rewards[i] - mean) / stddev;
    return adv;
}

}  // namespace detail

// Partition by (prompt_id, side) preserving first-appearance order, then
// normalize rewards within each group.
inline std::vector<Group> group_trajectories(const std::vector<Trajectory>& batch,
                                             double sigma_min = 1e-8) {
    if (batch.empty()) throw TooFewPointsError("grouping: empty batch");
    std::vector<Group> groups;
    std::map<std::pair<std::string, Side>, std::size_t> index;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const auto key = std::make_pair(batch[i].prompt_id, batch[i].side);
        auto it = index.find(key);
        if (it == index.end()) {
            index.emplace(key, groups.size());
            groups.push_back({batch[i].prompt_id, batch[i].side, {}, 0.0, 0.0, {}});
            it = index.find(key);
        }
        groups[it->second].members.push_back(i);
    }
    for (auto& g : groups) {
        std::vector<double> rewards;
        rewards.reserve(g.members.size());
        for (std::size_t i : g.members) rewards.push_back(batch[i].reward);
        g.advantages = detail::normalize_rewards(rewards, sigma_min, &g.mean, &g.stddev);
    }
    return groups;
}

inline double importance_ratio(double new_logp, double old_logp) {
    return std::exp(std::clamp(new_logp - old_logp, -20.0, 20.0));
}

inline double clipped_surrogate(double rho, double adv, double eps) {
    const double clipped = std::clamp(rho, 1.0 - eps, 1.0 + eps) * adv;
    return std::min(rho * adv, clipped);
}

// Mean over tokens of exp(delta) - delta - 1 with delta = old - new;
// nonnegative by convexity, zero only at new = old.
inline double kl_penalty(const std::vector<double>& new_logps,
                         const std::vector<double>& old_logps) {
    if (new_logps.size() != old_logps.size())
        throw ShapeMismatchError("kl_penalty: length mismatch");
    if (new_logps.empty()) return 0.0;
    double s = 0.0;
    for (std::size_t z = 0; z < new_logps.size(); ++z) {
        const double delta = old_logps[z] - new_logps[z];
        s += std::exp(delta) - delta - 1.0;
    }
    return s / static_cast<double>(new_logps.size());
}

inline double pair_weight(PairKind kind, double similarity) {
    if (similarity < 0.0 || similarity > 1.0)
        throw ConfigError("pair weight: similarity outside [0,1]");
    return kind == PairKind::Aligned ? 1.0 : std::sqrt(similarity);
}

struct ObjectiveReport {
    double value = 0.0;
    ParamArray grad;
    std::map<Side, ParamArray> per_side_grad;
    double clip_fraction = 0.0;
    double kl = 0.0;
    std::size_t token_count = 0;
};

namespace detail {

inline void validate_trajectory(const Trajectory& t, const ToyPolicy& policy) {
    if (t.tokens.empty() || t.tokens.size() != t.old_logps.size())
        throw ShapeMismatchError("trajectory '" + t.prompt_id +
                                 "': tokens and old_logps must be equal-length, nonempty");
    for (double lp : t.old_logps)
        if (!std::isfinite(lp))
            throw ShapeMismatchError("trajectory '" + t.prompt_id +
                                     "': non-finite old log-probability");
    if (t.prompt >= policy.num_prompts)
        throw PolicyMismatchError("trajectory '" + t.prompt_id + "': prompt row " +
                                  std::to_string(t.prompt) + " outside policy");
    for (int tok : t.tokens)
        if (tok < 0 || static_cast<std::size_t>(tok) >= policy.vocab_size)
            throw PolicyMismatchError("trajectory '" + t.prompt_id + "': token " +
                                      std::to_string(tok) + " outside vocabulary");
}

// Shared evaluation path for all three objectives: the caller supplies the
// per-trajectory advantage (already weighted) and a fixed iteration order,
// which makes the reduction identities between the objectives exact.
inline ObjectiveReport evaluate_items(const ToyPolicy& policy, const GrpoConfig& cfg,
                                      const std::vector<const Trajectory*>& flat,
                                      const std::vector<double>& advantages) {
    if (flat.empty()) throw TooFewPointsError("objective: empty batch");

    ObjectiveReport rep;
    ParamArray grad_u(policy.num_prompts, policy.vocab_size);
    ParamArray grad_g(policy.num_prompts, policy.vocab_size);
    double surr_sum = 0.0, kl_sum = 0.0;
    std::size_t tokens = 0, clipped_tokens = 0;

    for (std::size_t i = 0; i < flat.size(); ++i) {
        const Trajectory& t = *flat[i];
        validate_trajectory(t, policy);
        const double adv = advantages[i];
        ParamArray& gside = t.side == Side::Understanding ? grad_u : grad_g;

        for (std::size_t z = 0; z < t.tokens.size(); ++z) {
            const double new_lp = log_prob(policy, t.prompt, t.tokens[z]);
            const double diff = new_lp - t.old_logps[z];
            const double clamped = std::clamp(diff, -20.0, 20.0);
            const bool at_clamp = diff != clamped;
            const double rho = std::exp(clamped);

            const double unclipped = rho * adv;
            const double clip_term = std::clamp(rho, 1.0 - cfg.clip_eps,
                                                1.0 + cfg.clip_eps) * adv;
            surr_sum += std::min(unclipped, clip_term);
            const bool clip_selected = clip_term < unclipped;  // ties keep the live branch
            if (clip_selected) ++clipped_tokens;

            const double delta = t.old_logps[z] - new_lp;
            kl_sum += std::exp(delta) - delta - 1.0;

            double coeff = 0.0;
            if (!clip_selected && !at_clamp) coeff = unclipped;
            coeff -= cfg.beta * (1.0 - std::exp(delta));
            if (coeff != 0.0) accumulate_grad_log_prob(policy, t.prompt, t.tokens[z], coeff, gside);
            ++tokens;
        }
    }

    const auto n = static_cast<double>(tokens);
    rep.value = (surr_sum - cfg.beta * kl_sum) / n;
    rep.kl = kl_sum / n;
    rep.clip_fraction = static_cast<double>(clipped_tokens) / n;
    rep.token_count = tokens;
    for (auto& v : grad_u.data) v /= n;
    for (auto& v : grad_g.data) v /= n;
    rep.grad = grad_u + grad_g;
    rep.per_side_grad.emplace(Side::Understanding, std::move(grad_u));
    rep.per_side_grad.emplace(Side::Generation, std::move(grad_g));
    return rep;
}

}  // namespace detail

// Mixed-batch objective: token-mean of the clipped surrogate minus beta
// times the k3 estimate, with advantages normalized per (prompt_id, side).
inline ObjectiveReport objective_vanilla(const std::vector<Trajectory>& batch,
                                         const ToyPolicy& policy, const GrpoConfig& cfg) {
    const auto groups = group_trajectories(batch, cfg.sigma_min);
    std::vector<double> adv(batch.size(), 0.0);
    for (const auto& g : groups)
        for (std::size_t m = 0; m < g.members.size(); ++m)
            adv[g.members[m]] = g.advantages[m];
    std::vector<const Trajectory*> flat;
    flat.reserve(batch.size());
    for (const auto& t : batch) flat.push_back(&t);
    return detail::evaluate_items(policy, cfg, flat, adv);
}

// One pair's rollouts: k_und understanding and k_gen generation trajectories
// sharing their respective prompts.
struct PairRollouts {
    UGPair pair;
    std::vector<Trajectory> und;
    std::vector<Trajectory> gen;
};

namespace detail {

inline ObjectiveReport objective_pair_core(const std::vector<PairRollouts>& pairs,
                                           const ToyPolicy& policy, const GrpoConfig& cfg,
                                           bool use_weights) {
    if (pairs.empty()) throw TooFewPointsError("objective: no pairs");
    std::vector<const Trajectory*> flat;
    std::vector<double> adv;

    if (cfg.group_scope == GroupScope::Pair) {
        for (const auto& p : pairs) {
            const double w = use_weights ? p.pair.weight : 1.0;
            for (const auto* side : {&p.und, &p.gen}) {
                std::vector<double> rewards;
                rewards.reserve(side->size());
                for (const auto& t : *side) rewards.push_back(t.reward);
                const auto a = normalize_rewards(rewards, cfg.sigma_min);
                for (std::size_t m = 0; m < side->size(); ++m) {
                    flat.push_back(&(*side)[m]);
                    adv.push_back(w * a[m]);
                }
            }
        }
    } else {
        // Batch scope: one normalization group per task side across all pairs.
        std::vector<double> ru, rg;
        for (const auto& p : pairs) {
            for (const auto& t : p.und) ru.push_back(t.reward);
            for (const auto& t : p.gen) rg.push_back(t.reward);
        }
        const auto au = normalize_rewards(ru, cfg.sigma_min);
        const auto ag = normalize_rewards(rg, cfg.sigma_min);
        std::size_t iu = 0, ig = 0;
        for (const auto& p : pairs) {
            const double w = use_weights ? p.pair.weight : 1.0;
            for (const auto& t : p.und) {
                flat.push_back(&t);
                adv.push_back(w * au[iu++]);
            }
            for (const auto& t : p.gen) {
                flat.push_back(&t);
                adv.push_back(w * ag[ig++]);
            }
        }
    }
    return evaluate_items(policy, cfg, flat, adv);
}

}  // namespace detail

// Paired objective with unit weights.
inline ObjectiveReport objective_pairwise(const std::vector<PairRollouts>& pairs,
                                          const ToyPolicy& policy, const GrpoConfig& cfg) {
    return detail::objective_pair_core(pairs, policy, cfg, /*use_weights=*/false);
}

// Paired objective with similarity weights: advantages scaled by each pair's
// weight (1 for aligned, sqrt(s) for retrieved) on both sides.
inline ObjectiveReport objective_pair_grpo(const std::vector<PairRollouts>& pairs,
                                           const ToyPolicy& policy, const GrpoConfig& cfg) {
    return detail::objective_pair_core(pairs, policy, cfg, /*use_weights=*/true);
}

// Ascent step on the maximization objective.
inline void sgd_step(ToyPolicy& policy, const ObjectiveReport& report, double lr) {
    if (!report.grad.all_finite())
        throw NonFiniteGradientError("sgd_step: gradient has non-finite entries");
    if (!report.grad.same_shape(policy.logits))
        throw ShapeMismatchError("sgd_step: gradient shape differs from policy");
    policy.logits.add_scaled(report.grad, lr);
}

}  // namespace pairuni
