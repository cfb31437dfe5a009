#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "pairuni/core.hpp"
#include "pairuni/features.hpp"
#include "pairuni/pairing.hpp"
#include "pairuni/policy.hpp"
#include "pairuni/rng.hpp"

namespace pairuni {

// ---------------------------------------------------------------------------
// Synthetic feature corpus: axis-anchored clusters with gaussian jitter, one
// understanding and one generation split, plus matching quadruple records.

struct SyntheticCorpusConfig {
    std::size_t clusters = 4;
    std::size_t und_per_cluster = 6;
    std::size_t gen_per_cluster = 6;
    std::size_t dim = 8;
    double jitter = 0.25;
    std::uint64_t seed = 42;
};

struct SyntheticCorpus {
    FeatureSet und;
    FeatureSet gen;
    std::map<std::string, Quadruple> quadruples;
};

namespace detail {

inline std::vector<double> jittered_axis_point(std::size_t axis, std::size_t dim,
                                               double jitter, Rng& rng) {
    std::vector<double> v(dim, 0.0);
    v[axis % dim] = 1.0;
    for (auto& x : v) x += jitter * rng.gaussian();
    return l2_normalize(v);
}

}  // namespace detail

inline SyntheticCorpus make_synthetic_corpus(const SyntheticCorpusConfig& cfg) {
    if (cfg.dim == 0 || cfg.clusters == 0)
        throw ConfigError("synthetic corpus: dim and clusters must be positive");
    SyntheticCorpus out;
    out.und.source = Side::Understanding;
    out.gen.source = Side::Generation;
    out.und.dim = out.gen.dim = cfg.dim;

    char idbuf[16];
    std::size_t u = 0, g = 0;
    for (std::size_t c = 0; c < cfg.clusters; ++c) {
        const std::string label = "c" + std::to_string(c);
        for (std::size_t i = 0; i < cfg.und_per_cluster; ++i, ++u) {
            Rng rng(derive_seed(cfg.seed, "corpus-und", c, i));
            std::snprintf(idbuf, sizeof(idbuf), "u%03zu", u);
            const std::string id = idbuf;
            out.und.vectors.push_back(
                {id, Side::Understanding,
                 detail::jittered_axis_point(c, cfg.dim, cfg.jitter, rng)});
            Quadruple q;
            q.id = id;
            q.image = "img/" + id + ".png";
            q.origin = Side::Understanding;
            q.question = "which group does " + q.image + " belong to?";
            q.answer = label;
            q.task = "cluster-" + std::to_string(c);
            out.quadruples.emplace(id, std::move(q));
        }
        for (std::size_t i = 0; i < cfg.gen_per_cluster; ++i, ++g) {
            Rng rng(derive_seed(cfg.seed, "corpus-gen", c, i));
            std::snprintf(idbuf, sizeof(idbuf), "g%03zu", g);
            const std::string id = idbuf;
            out.gen.vectors.push_back(
                {id, Side::Generation,
                 detail::jittered_axis_point(c, cfg.dim, cfg.jitter, rng)});
            Quadruple q;
            q.id = id;
            q.image = "img/" + id + ".png";
            q.origin = Side::Generation;
            q.caption = "an image from group " + label;
            q.task = "cluster-" + std::to_string(c);
            out.quadruples.emplace(id, std::move(q));
        }
    }
    return out;
}

inline json feature_to_json(const FeatureVector& v, Side source) {
    return {{"id", v.id},
            {"source", to_string(source)},
            {"vector", v.values},
            {"normalized", true}};
}

inline json quadruple_to_json(const Quadruple& q) {
    json j = {{"id", q.id}, {"image", q.image}, {"origin", to_string(q.origin)}};
    if (!q.caption.empty()) j["caption"] = q.caption;
    if (!q.question.empty()) j["question"] = q.question;
    if (!q.answer.empty()) j["answer"] = q.answer;
    if (!q.task.empty()) j["task"] = q.task;
    return j;
}

inline void write_synthetic_corpus(const SyntheticCorpus& corpus, const std::string& dir) {
    std::string und_lines, gen_lines, quad_lines;
    for (const auto& v : corpus.und.vectors)
        und_lines += feature_to_json(v, Side::Understanding).dump() + "\n";
    for (const auto& v : corpus.gen.vectors)
        gen_lines += feature_to_json(v, Side::Generation).dump() + "\n";
    for (const auto& [id, q] : corpus.quadruples)
        quad_lines += quadruple_to_json(q).dump() + "\n";
    atomic_write_file(dir + "/und_features.jsonl", und_lines);
    atomic_write_file(dir + "/gen_features.jsonl", gen_lines);
    atomic_write_file(dir + "/quadruples.jsonl", quad_lines);
}

// ---------------------------------------------------------------------------
// Toy task derivation: each pair record becomes one understanding task (a
// single answer token) and one generation task (a target sequence) on a
// shared prompt row. Retrieved pairs overlap the target with the answer in a
// similarity-proportional share of positions.

namespace detail {

inline int token_from(std::uint64_t h, std::size_t vocab) {
    return static_cast<int>(h % static_cast<std::uint64_t>(vocab));
}

inline int other_token(int avoid, std::uint64_t h, std::size_t vocab) {
    if (vocab < 2) return avoid;
    return static_cast<int>(
        (static_cast<std::uint64_t>(avoid) + 1 + h % (vocab - 1)) %
        static_cast<std::uint64_t>(vocab));
}

inline std::vector<int> overlap_target(int answer, int filler, double similarity,
                                       std::size_t len) {
    const auto matched = static_cast<std::size_t>(
        std::llround(similarity * static_cast<double>(len)));
    std::vector<int> t(len, filler);
    for (std::size_t z = 0; z < std::min(matched, len); ++z) t[z] = answer;
    return t;
}

}  // namespace detail

inline SyntheticTaskPair derive_task(const PairRecord& r, std::size_t index,
                                     std::size_t num_prompts, std::size_t vocab_size,
                                     std::size_t len_gen, std::uint64_t seed) {
    SyntheticTaskPair t;
    t.pair_id = r.pair_id;
    t.prompt_u = t.prompt_g = index % num_prompts;
    t.answer_token =
        detail::token_from(derive_seed(seed, "answer/" + r.pair_id), vocab_size);
    t.similarity = r.pair.similarity;
    if (r.pair.kind == PairKind::Aligned) {
        t.alignment = TaskAlignment::Aligned;
        t.target_seq.assign(len_gen, t.answer_token);
    } else {
        t.alignment = TaskAlignment::Retrieved;
        const int filler = detail::other_token(
            t.answer_token, derive_seed(seed, "filler/" + r.pair_id), vocab_size);
        t.target_seq =
            detail::overlap_target(t.answer_token, filler, t.similarity, len_gen);
    }
    return t;
}

// ---------------------------------------------------------------------------
// Task families for the gradient-agreement study.

enum class AgreementRegime {
    AlignedPairs,
    RetrievedPairs,
    RandomPairs,
    Unpaired,
    UnderstandingOnly,
    GenerationOnly,
};

inline const std::vector<AgreementRegime>& all_agreement_regimes() {
    static const std::vector<AgreementRegime> all = {
        AgreementRegime::AlignedPairs,     AgreementRegime::RetrievedPairs,
        AgreementRegime::RandomPairs,      AgreementRegime::Unpaired,
        AgreementRegime::UnderstandingOnly, AgreementRegime::GenerationOnly};
    return all;
}

inline std::string to_string(AgreementRegime r) {
    switch (r) {
        case AgreementRegime::AlignedPairs: return "aligned-pairs";
        case AgreementRegime::RetrievedPairs: return "retrieved-pairs";
        case AgreementRegime::RandomPairs: return "random-pairs";
        case AgreementRegime::Unpaired: return "unpaired";
        case AgreementRegime::UnderstandingOnly: return "understanding-only";
        default: return "generation-only";
    }
}

struct StudyTasksConfig {
    std::size_t pairs = 8;
    std::size_t len_gen = 6;
    double delta = 0.6;  // lower edge for drawn retrieved similarities
};

// Aligned: shared row, identical targets. Retrieved: shared row, targets
// overlapping the answer in a similarity share of positions. Random pairs and
// unpaired: independently drawn targets (shared row / independent rows).
// One-sided regimes leave the other side's tasks unused.
inline std::vector<SyntheticTaskPair> make_study_tasks(AgreementRegime regime,
                                                       std::size_t num_prompts,
                                                       std::size_t vocab_size,
                                                       const StudyTasksConfig& cfg,
                                                       std::uint64_t seed) {
    std::vector<SyntheticTaskPair> tasks;
    const auto ridx = static_cast<std::size_t>(regime);
    for (std::size_t p = 0; p < cfg.pairs; ++p) {
        Rng rng(derive_seed(seed, "study-task", ridx, p));
        SyntheticTaskPair t;
        t.pair_id = to_string(regime) + "/" + std::to_string(p);
        const std::size_t shared_row = (2 * p) % num_prompts;
        t.prompt_u = t.prompt_g = shared_row;
        t.answer_token = detail::token_from(rng.next(), vocab_size);
        switch (regime) {
            case AgreementRegime::AlignedPairs:
            case AgreementRegime::UnderstandingOnly:
            case AgreementRegime::GenerationOnly:
                t.alignment = TaskAlignment::Aligned;
                t.similarity = 1.0;
                t.target_seq.assign(cfg.len_gen, t.answer_token);
                break;
            case AgreementRegime::RetrievedPairs: {
                t.alignment = TaskAlignment::Retrieved;
                t.similarity = cfg.delta + (0.95 - cfg.delta) * rng.uniform();
                const int filler = detail::other_token(t.answer_token, rng.next(),
                                                       vocab_size);
                t.target_seq = detail::overlap_target(t.answer_token, filler,
                                                      t.similarity, cfg.len_gen);
                break;
            }
            case AgreementRegime::RandomPairs:
                t.alignment = TaskAlignment::Random;
                t.similarity = 0.0;
                t.target_seq.assign(cfg.len_gen,
                                    detail::token_from(rng.next(), vocab_size));
                break;
            case AgreementRegime::Unpaired:
                t.alignment = TaskAlignment::Random;
                t.similarity = 0.0;
                t.prompt_u = rng.uniform_index(num_prompts);
                t.prompt_g = rng.uniform_index(num_prompts);
                t.target_seq.assign(cfg.len_gen,
                                    detail::token_from(rng.next(), vocab_size));
                break;
        }
        tasks.push_back(std::move(t));
    }
    return tasks;
}

}  // namespace pairuni
