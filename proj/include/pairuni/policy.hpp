#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "pairuni/core.hpp"
#include "pairuni/io.hpp"
#include "pairuni/rng.hpp"

namespace pairuni {

// Memoryless softmax policy over a small vocabulary, one logit row per
// prompt. A single parameter array serves both task sides, standing in for
// the shared backbone.
struct ToyPolicy {
    std::size_t num_prompts = 32;
    std::size_t vocab_size = 16;
    std::uint64_t seed = 0;
    ParamArray logits;  // shape num_prompts x vocab_size
};

inline ToyPolicy make_toy_policy(std::size_t num_prompts, std::size_t vocab_size,
                                 std::uint64_t seed, double init_scale = 0.0) {
    ToyPolicy p;
    p.num_prompts = num_prompts;
    p.vocab_size = vocab_size;
    p.seed = seed;
    p.logits = ParamArray(num_prompts, vocab_size);
    if (init_scale != 0.0) {
        Rng rng(derive_seed(seed, "policy-init"));
        for (auto& v : p.logits.data) v = init_scale * rng.gaussian();
    }
    return p;
}

namespace detail {

inline void check_prompt(const ToyPolicy& p, std::size_t prompt) {
    if (prompt >= p.num_prompts)
        throw IndexOutOfRangeError("prompt " + std::to_string(prompt) + " outside [0," +
                                   std::to_string(p.num_prompts) + ")");
}

inline void check_token(const ToyPolicy& p, int token) {
    if (token < 0 || static_cast<std::size_t>(token) >= p.vocab_size)
        throw IndexOutOfRangeError("token " + std::to_string(token) + " outside [0," +
                                   std::to_string(p.vocab_size) + ")");
}

inline double row_logsumexp(const ToyPolicy& p, std::size_t prompt) {
    const double* row = &p.logits.data[prompt * p.vocab_size];
    double m = row[0];
    for (std::size_t v = 1; v < p.vocab_size; ++v) m = std::max(m, row[v]);
    double s = 0.0;
    for (std::size_t v = 0; v < p.vocab_size; ++v) s += std::exp(row[v] - m);
    return m + std::log(s);
}

}  // namespace detail

inline double log_prob(const ToyPolicy& p, std::size_t prompt, int token) {
    detail::check_prompt(p, prompt);
    detail::check_token(p, token);
    return p.logits.at(prompt, static_cast<std::size_t>(token)) -
           detail::row_logsumexp(p, prompt);
}

inline std::vector<double> softmax_row(const ToyPolicy& p, std::size_t prompt) {
    detail::check_prompt(p, prompt);
    const double lse = detail::row_logsumexp(p, prompt);
    std::vector<double> probs(p.vocab_size);
    for (std::size_t v = 0; v < p.vocab_size; ++v)
        probs[v] = std::exp(p.logits.at(prompt, v) - lse);
    return probs;
}

// Gradient of log_prob with respect to the logits: onehot(token) - softmax in
// the prompt's row, scaled by coeff, accumulated into acc.
inline void accumulate_grad_log_prob(const ToyPolicy& p, std::size_t prompt, int token,
                                     double coeff, ParamArray& acc) {
    if (!acc.same_shape(p.logits))
        throw ShapeMismatchError("gradient accumulator shape differs from policy");
    const auto probs = softmax_row(p, prompt);
    detail::check_token(p, token);
    for (std::size_t v = 0; v < p.vocab_size; ++v)
        acc.at(prompt, v) -= coeff * probs[v];
    acc.at(prompt, static_cast<std::size_t>(token)) += coeff;
}

inline ParamArray grad_log_prob(const ToyPolicy& p, std::size_t prompt, int token) {
    ParamArray g(p.num_prompts, p.vocab_size);
    accumulate_grad_log_prob(p, prompt, token, 1.0, g);
    return g;
}

struct RolloutSkeleton {
    std::vector<int> tokens;
    std::vector<double> logps;  // log-probabilities at draw time
};

// i.i.d. draws from the prompt's softmax via inverse CDF on one rng stream.
inline RolloutSkeleton sample_trajectory(const ToyPolicy& p, std::size_t prompt,
                                         std::size_t length, Rng& rng) {
    detail::check_prompt(p, prompt);
    const auto probs = softmax_row(p, prompt);
    const double lse = detail::row_logsumexp(p, prompt);
    RolloutSkeleton out;
    out.tokens.reserve(length);
    out.logps.reserve(length);
    for (std::size_t z = 0; z < length; ++z) {
        const double u = rng.uniform();
        double cum = 0.0;
        int token = static_cast<int>(p.vocab_size) - 1;
        for (std::size_t v = 0; v < p.vocab_size; ++v) {
            cum += probs[v];
            if (u < cum) {
                token = static_cast<int>(v);
                break;
            }
        }
        out.tokens.push_back(token);
        out.logps.push_back(p.logits.at(prompt, static_cast<std::size_t>(token)) - lse);
    }
    return out;
}

// Central finite differences of f over every logit; test/verification oracle.
inline ParamArray finite_diff_oracle(const std::function<double(const ToyPolicy&)>& f,
                                     const ToyPolicy& p, double step = 1e-5) {
    ParamArray g(p.num_prompts, p.vocab_size);
    ToyPolicy probe = p;
    for (std::size_t i = 0; i < probe.logits.data.size(); ++i) {
        const double saved = probe.logits.data[i];
        probe.logits.data[i] = saved + step;
        const double hi = f(probe);
        probe.logits.data[i] = saved - step;
        const double lo = f(probe);
        probe.logits.data[i] = saved;
        g.data[i] = (hi - lo) / (2.0 * step);
    }
    return g;
}

inline json policy_to_json(const ToyPolicy& p) {
    return {{"num_prompts", p.num_prompts},
            {"vocab_size", p.vocab_size},
            {"seed", p.seed},
            {"logits", p.logits.data}};
}

inline ToyPolicy policy_from_json(const json& j) {
    ToyPolicy p;
    try {
        p.num_prompts = j.at("num_prompts").get<std::size_t>();
        p.vocab_size = j.at("vocab_size").get<std::size_t>();
        p.seed = j.at("seed").get<std::uint64_t>();
        p.logits = ParamArray(p.num_prompts, p.vocab_size);
        p.logits.data = j.at("logits").get<std::vector<double>>();
    } catch (const json::exception& e) {
        throw SchemaError(std::string("policy checkpoint: ") + e.what());
    }
    if (p.logits.data.size() != p.num_prompts * p.vocab_size)
        throw SchemaError("policy checkpoint: logits length does not match shape");
    return p;
}

enum class TaskAlignment { Aligned, Retrieved, Random };

inline std::string to_string(TaskAlignment a) {
    switch (a) {
        case TaskAlignment::Aligned: return "aligned";
        case TaskAlignment::Retrieved: return "retrieved";
        default: return "random";
    }
}

// Desk-scale analogue of one UG pair: an understanding prompt with a single
// answer token and a generation prompt with a target sequence.
struct SyntheticTaskPair {
    std::string pair_id;
    std::size_t prompt_u = 0;
    std::size_t prompt_g = 0;
    int answer_token = 0;
    std::vector<int> target_seq;
    TaskAlignment alignment = TaskAlignment::Aligned;
    double similarity = 1.0;
};

}  // namespace pairuni
