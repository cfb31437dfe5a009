#pragma once

#include <cmath>
#include <map>
#include <sstream>
#include <string>

#include "pairuni/analysis.hpp"
#include "pairuni/core.hpp"
#include "pairuni/grpo.hpp"
#include "pairuni/pairing.hpp"
#include "pairuni/rewards.hpp"
#include "pairuni/training.hpp"

namespace pairuni {

// Flat `key = value` lines with dotted sections; '#' starts a comment.
inline std::map<std::string, std::string> parse_flat_config(const std::string& text,
                                                            const std::string& origin) {
    std::map<std::string, std::string> out;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    auto trim = [](std::string s) {
        const char* ws = " \t\r";
        const auto b = s.find_first_not_of(ws);
        if (b == std::string::npos) return std::string();
        const auto e = s.find_last_not_of(ws);
        return s.substr(b, e - b + 1);
    };
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::string where = origin + ":" + std::to_string(line_no);
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(where + ": expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError(where + ": empty key");
        if (!out.emplace(key, value).second)
            throw ConfigError(where + ": duplicate key '" + key + "'");
    }
    return out;
}

namespace detail {

inline double parse_double(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const double x = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "': '" + v + "' is not a number");
    }
}

inline std::uint64_t parse_u64(const std::string& key, const std::string& v) {
    try {
        // stoull would wrap "-1" around instead of failing.
        if (!v.empty() && v[0] == '-') throw std::invalid_argument(v);
        std::size_t pos = 0;
        const unsigned long long x = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return static_cast<std::uint64_t>(x);
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "': '" + v + "' is not a nonnegative integer");
    }
}

inline std::size_t parse_size(const std::string& key, const std::string& v) {
    return static_cast<std::size_t>(parse_u64(key, v));
}

}  // namespace detail

// Everything a run needs, resolved from defaults plus a config file plus
// command-line overrides, in that order.
struct RunConfig {
    std::uint64_t seed = 42;
    std::size_t steps = 300;  // training steps
    PairingConfig pairing;
    GrpoConfig grpo;
    std::size_t num_prompts = 32;
    std::size_t vocab_size = 16;
    std::size_t len_und = 1;
    std::size_t len_gen = 6;
    std::string gen_scorer = "target-overlap";
    std::size_t agreement_steps = 200;
    std::size_t agreement_pairs = 8;
    MedianScope median_scope = MedianScope::Steps;
};

inline void apply_config(RunConfig& cfg, const std::map<std::string, std::string>& kv) {
    using detail::parse_double;
    using detail::parse_size;
    using detail::parse_u64;
    for (const auto& [key, v] : kv) {
        if (key == "seed") cfg.seed = parse_u64(key, v);
        else if (key == "steps") cfg.steps = parse_size(key, v);
        else if (key == "pairing.n") cfg.pairing.n = parse_size(key, v);
        else if (key == "pairing.delta") cfg.pairing.delta = parse_double(key, v);
        else if (key == "pairing.k") cfg.pairing.k = parse_size(key, v);
        else if (key == "pairing.greedy_order")
            cfg.pairing.greedy_order = greedy_order_from_string(v);
        else if (key == "clustering.batch_size")
            cfg.pairing.clustering.batch_size = parse_size(key, v);
        else if (key == "clustering.max_iters")
            cfg.pairing.clustering.max_iters = parse_size(key, v);
        else if (key == "clustering.tol")
            cfg.pairing.clustering.convergence_tol = parse_double(key, v);
        else if (key == "grpo.clip_eps") cfg.grpo.clip_eps = parse_double(key, v);
        else if (key == "grpo.beta") cfg.grpo.beta = parse_double(key, v);
        else if (key == "grpo.k_und") cfg.grpo.k_und = parse_size(key, v);
        else if (key == "grpo.k_gen") cfg.grpo.k_gen = parse_size(key, v);
        else if (key == "grpo.sigma_min") cfg.grpo.sigma_min = parse_double(key, v);
        else if (key == "grpo.lr") cfg.grpo.lr = parse_double(key, v);
        else if (key == "grpo.kl_estimator") {
            if (v != "k3") throw ConfigError("key 'grpo.kl_estimator': only k3 is available");
        } else if (key == "grpo.group_scope")
            cfg.grpo.group_scope = group_scope_from_string(v);
        else if (key == "policy.num_prompts") cfg.num_prompts = parse_size(key, v);
        else if (key == "policy.vocab_size") cfg.vocab_size = parse_size(key, v);
        else if (key == "policy.len_und") cfg.len_und = parse_size(key, v);
        else if (key == "policy.len_gen") cfg.len_gen = parse_size(key, v);
        else if (key == "reward.gen.scorer") cfg.gen_scorer = v;
        else if (key == "agreement.steps") cfg.agreement_steps = parse_size(key, v);
        else if (key == "agreement.pairs_per_regime")
            cfg.agreement_pairs = parse_size(key, v);
        else if (key == "agreement.median_scope")
            cfg.median_scope = median_scope_from_string(v);
        else throw ConfigError("unknown config key '" + key + "'");
    }
}

inline void validate_run_config(const RunConfig& cfg, const Logger& warn = null_logger) {
    if (cfg.steps == 0) throw ConfigError("steps must be >= 1");
    if (cfg.agreement_steps == 0) throw ConfigError("agreement.steps must be >= 1");
    if (cfg.agreement_pairs == 0) throw ConfigError("agreement.pairs_per_regime must be >= 1");
    if (cfg.pairing.n == 0) throw ConfigError("pairing.n must be >= 1");
    if (cfg.pairing.delta < 0.0) throw ConfigError("pairing.delta must be >= 0");
    if (cfg.pairing.delta > 1.0)
        warn("pairing.delta " + format_double(cfg.pairing.delta) +
             " exceeds 1; no retrieved pair can qualify");
    if (cfg.pairing.clustering.batch_size == 0)
        throw ConfigError("clustering.batch_size must be >= 1");
    if (cfg.pairing.clustering.max_iters == 0)
        throw ConfigError("clustering.max_iters must be >= 1");
    if (cfg.pairing.clustering.convergence_tol < 0.0)
        throw ConfigError("clustering.tol must be >= 0");
    if (cfg.grpo.clip_eps <= 0.0 || cfg.grpo.clip_eps >= 1.0)
        throw ConfigError("grpo.clip_eps must lie in (0, 1)");
    if (cfg.grpo.beta < 0.0) throw ConfigError("grpo.beta must be >= 0");
    if (cfg.grpo.k_und == 0 || cfg.grpo.k_gen == 0)
        throw ConfigError("grpo.k_und and grpo.k_gen must be >= 1");
    if (cfg.grpo.sigma_min <= 0.0) throw ConfigError("grpo.sigma_min must be > 0");
    if (!std::isfinite(cfg.grpo.lr)) throw ConfigError("grpo.lr must be finite");
    if (cfg.num_prompts == 0) throw ConfigError("policy.num_prompts must be >= 1");
    if (cfg.vocab_size < 2) throw ConfigError("policy.vocab_size must be >= 2");
    if (cfg.len_und == 0 || cfg.len_gen == 0)
        throw ConfigError("policy.len_und and policy.len_gen must be >= 1");
    make_scorer(cfg.gen_scorer);  // throws UnknownScorer for a bad id
}

// Fully resolved key = value rendering; extras carry per-command fields such
// as the objective selection.
inline std::string render_config(const RunConfig& cfg,
                                 const std::map<std::string, std::string>& extras = {}) {
    std::map<std::string, std::string> kv = {
        {"seed", std::to_string(cfg.seed)},
        {"steps", std::to_string(cfg.steps)},
        {"pairing.n", std::to_string(cfg.pairing.n)},
        {"pairing.delta", format_double(cfg.pairing.delta)},
        {"pairing.k", std::to_string(cfg.pairing.k)},
        {"pairing.greedy_order", to_string(cfg.pairing.greedy_order)},
        {"clustering.batch_size", std::to_string(cfg.pairing.clustering.batch_size)},
        {"clustering.max_iters", std::to_string(cfg.pairing.clustering.max_iters)},
        {"clustering.tol", format_double(cfg.pairing.clustering.convergence_tol)},
        {"grpo.clip_eps", format_double(cfg.grpo.clip_eps)},
        {"grpo.beta", format_double(cfg.grpo.beta)},
        {"grpo.k_und", std::to_string(cfg.grpo.k_und)},
        {"grpo.k_gen", std::to_string(cfg.grpo.k_gen)},
        {"grpo.sigma_min", format_double(cfg.grpo.sigma_min)},
        {"grpo.lr", format_double(cfg.grpo.lr)},
        {"grpo.kl_estimator", "k3"},
        {"grpo.group_scope", cfg.grpo.group_scope == GroupScope::Pair ? "pair" : "batch"},
        {"policy.num_prompts", std::to_string(cfg.num_prompts)},
        {"policy.vocab_size", std::to_string(cfg.vocab_size)},
        {"policy.len_und", std::to_string(cfg.len_und)},
        {"policy.len_gen", std::to_string(cfg.len_gen)},
        {"reward.gen.scorer", cfg.gen_scorer},
        {"agreement.steps", std::to_string(cfg.agreement_steps)},
        {"agreement.pairs_per_regime", std::to_string(cfg.agreement_pairs)},
        {"agreement.median_scope", to_string(cfg.median_scope)},
    };
    for (const auto& [k, v] : extras) kv[k] = v;
    std::string out;
    for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
    return out;
}

inline TrainConfig make_train_config(const RunConfig& cfg, ObjectiveKind objective,
                                     bool sim_weight) {
    TrainConfig tc;
    tc.objective = objective;
    tc.sim_weight = sim_weight;
    tc.steps = cfg.steps;
    tc.len_und = cfg.len_und;
    tc.len_gen = cfg.len_gen;
    tc.num_prompts = cfg.num_prompts;
    tc.vocab_size = cfg.vocab_size;
    tc.grpo = cfg.grpo;
    tc.seed = cfg.seed;
    return tc;
}

inline AgreementConfig make_agreement_config(const RunConfig& cfg) {
    AgreementConfig ac;
    ac.steps = cfg.agreement_steps;
    ac.tasks.pairs = cfg.agreement_pairs;
    ac.tasks.len_gen = cfg.len_gen;
    ac.tasks.delta = std::min(cfg.pairing.delta, 0.95);
    ac.len_und = cfg.len_und;
    ac.num_prompts = cfg.num_prompts;
    ac.vocab_size = cfg.vocab_size;
    ac.grpo = cfg.grpo;
    ac.median_scope = cfg.median_scope;
    ac.seed = cfg.seed;
    return ac;
}

}  // namespace pairuni
