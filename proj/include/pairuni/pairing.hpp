#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "pairuni/clustering.hpp"
#include "pairuni/core.hpp"
#include "pairuni/features.hpp"
#include "pairuni/io.hpp"

namespace pairuni {

enum class PairKind { Aligned, Retrieved };

inline std::string to_string(PairKind k) {
    return k == PairKind::Aligned ? "aligned" : "retrieved";
}

inline PairKind pair_kind_from_string(const std::string& s) {
    if (s == "aligned") return PairKind::Aligned;
    if (s == "retrieved") return PairKind::Retrieved;
    throw SchemaError("unknown pair kind '" + s + "'");
}

// One unified record (image, caption, question, answer). origin tells which
// side the instance was collected from; the other side's fields may be empty
// until augmentation fills them.
struct Quadruple {
    std::string id;
    std::string image;
    std::string caption;
    std::string question;
    std::string answer;
    Side origin = Side::Understanding;
    std::string task;

    bool complete() const {
        return !image.empty() && !caption.empty() && !question.empty() && !answer.empty();
    }
};

// Quadruple file: JSONL with required id/image/origin; an und-origin record
// must carry question+answer, a gen-origin record must carry caption.
inline std::map<std::string, Quadruple> load_quadruples(const std::string& path) {
    std::map<std::string, Quadruple> out;
    read_jsonl(path, [&](std::size_t line_no, const json& j) {
        const std::string where = path + ":" + std::to_string(line_no);
        if (!j.is_object()) throw SchemaError(where + ": record is not an object");
        Quadruple q;
        try {
            q.id = j.at("id").get<std::string>();
            q.image = j.at("image").get<std::string>();
            q.origin = side_from_string(j.at("origin").get<std::string>());
            if (j.contains("caption")) q.caption = j.at("caption").get<std::string>();
            if (j.contains("question")) q.question = j.at("question").get<std::string>();
            if (j.contains("answer")) q.answer = j.at("answer").get<std::string>();
            if (j.contains("task")) q.task = j.at("task").get<std::string>();
        } catch (const json::exception& e) {
            throw SchemaError(where + ": " + e.what());
        } catch (const SchemaError& e) {
            throw SchemaError(where + ": " + e.what());
        }
        if (q.id.empty()) throw SchemaError(where + ": empty id");
        if (q.image.empty()) throw SchemaError(where + ": empty image");
        if (q.origin == Side::Understanding && (q.question.empty() || q.answer.empty()))
            throw SchemaError(where + ": und-origin record needs question and answer");
        if (q.origin == Side::Generation && q.caption.empty())
            throw SchemaError(where + ": gen-origin record needs caption");
        if (!out.emplace(q.id, q).second)
            throw DuplicateIdError(where + ": duplicate id '" + q.id + "'");
    });
    return out;
}

struct UGPair {
    std::string und_id;
    std::string gen_id;
    PairKind kind = PairKind::Aligned;
    double similarity = 1.0;
    double weight = 1.0;
};

enum class GreedyOrder { ById, MaxSimDesc };

inline GreedyOrder greedy_order_from_string(const std::string& s) {
    if (s == "id") return GreedyOrder::ById;
    if (s == "max-sim-desc") return GreedyOrder::MaxSimDesc;
    throw ConfigError("unknown greedy order '" + s + "' (expected id or max-sim-desc)");
}

inline std::string to_string(GreedyOrder o) {
    return o == GreedyOrder::ById ? "id" : "max-sim-desc";
}

struct PairingConfig {
    std::size_t n = 1;          // neighbors kept per generation item
    double delta = 0.6;         // similarity gate applied after top-n
    std::size_t k = 0;          // clusters; 0 means ceil(0.05 * joint size)
    std::uint64_t seed = 0;
    GreedyOrder greedy_order = GreedyOrder::ById;
    ClusteringConfig clustering;  // k and seed are overwritten from above
};

using Logger = std::function<void(const std::string&)>;

inline void null_logger(const std::string&) {}

// ---------------------------------------------------------------------------
// Augmentation client: fills the missing half of a quadruple. Real backends
// are out of scope; the stub returns deterministic template-derived text.

enum class AugmentationDirection { CompleteCaption, CompleteQA };

struct AugmentationRequest {
    AugmentationDirection direction = AugmentationDirection::CompleteCaption;
    Quadruple quadruple;
    std::string template_id = "default";
};

class AugmentationClient {
  public:
    virtual ~AugmentationClient() = default;
    // Returns the generated fields as an object: {"caption": ...} or
    // {"question": ..., "answer": ...}.
    virtual json complete(const AugmentationRequest& req) = 0;
};

class StubAugmentationClient : public AugmentationClient {
  public:
    json complete(const AugmentationRequest& req) override {
        if (req.direction == AugmentationDirection::CompleteCaption)
            return {{"caption", "[" + req.template_id + "] depiction of " +
                                    req.quadruple.image}};
        return {{"question", "[" + req.template_id + "] what does " +
                                 req.quadruple.image + " show?"},
                {"answer", "content of " + req.quadruple.image}};
    }
};

inline Quadruple request_augmentation(const AugmentationRequest& req,
                                      AugmentationClient& client) {
    if (req.direction == AugmentationDirection::CompleteCaption &&
        (req.quadruple.question.empty() || req.quadruple.answer.empty()))
        throw MalformedCompletionError("caption completion needs question and answer");
    if (req.direction == AugmentationDirection::CompleteQA && req.quadruple.caption.empty())
        throw MalformedCompletionError("qa completion needs a caption");

    const json resp = client.complete(req);
    Quadruple out = req.quadruple;
    auto take = [&](const char* field) {
        if (!resp.contains(field) || !resp[field].is_string() ||
            resp[field].get<std::string>().empty())
            throw MalformedCompletionError(std::string("client response lacks '") +
                                           field + "'");
        return resp[field].get<std::string>();
    };
    if (req.direction == AugmentationDirection::CompleteCaption) {
        out.caption = take("caption");
    } else {
        out.question = take("question");
        out.answer = take("answer");
    }
    return out;
}

// ---------------------------------------------------------------------------
// Aligned pairs: medoids of a joint clustering over both splits.

struct AlignedSeed {
    std::string id;       // instance id, shared by both sides of the pair
    Side source = Side::Understanding;
    std::size_t cluster = 0;
};

struct AlignedResult {
    std::vector<AlignedSeed> seeds;  // cluster index order
    ClusterModel model;              // ids carry the u/ and g/ prefixes
    std::size_t resolved_k = 0;
};

// Joint feature list for clustering. Ids are prefixed u/ and g/ so one
// instance present in both splits keeps two rows; the same raw id in both
// files denotes the same instance.
inline std::vector<FeatureVector> make_joint(const FeatureSet& und, const FeatureSet& gen) {
    if (!und.empty() && !gen.empty() && und.dim != gen.dim)
        throw DimMismatchError("joint clustering: und dim " + std::to_string(und.dim) +
                               " vs gen dim " + std::to_string(gen.dim));
    std::vector<FeatureVector> joint;
    joint.reserve(und.size() + gen.size());
    for (const auto& v : und.vectors)
        joint.push_back({"u/" + v.id, Side::Understanding, v.values});
    for (const auto& v : gen.vectors)
        joint.push_back({"g/" + v.id, Side::Generation, v.values});
    return joint;
}

inline std::pair<Side, std::string> split_joint_id(const std::string& joint_id) {
    if (joint_id.size() > 2 && joint_id[1] == '/') {
        if (joint_id[0] == 'u') return {Side::Understanding, joint_id.substr(2)};
        if (joint_id[0] == 'g') return {Side::Generation, joint_id.substr(2)};
    }
    throw ModelMismatchError("joint id '" + joint_id + "' lacks a u/ or g/ prefix");
}

inline std::size_t resolve_k(const PairingConfig& cfg, std::size_t joint_size) {
    if (cfg.k > 0) return cfg.k;
    return static_cast<std::size_t>(std::ceil(0.05 * static_cast<double>(joint_size)));
}

// One aligned seed per non-empty cluster; the same instance reached through
// both of its rows is kept once (lowest cluster index wins).
inline AlignedResult build_aligned(const std::vector<FeatureVector>& joint,
                                   const PairingConfig& cfg,
                                   const ClusterModel* reuse = nullptr,
                                   const Logger& log = null_logger) {
    if (joint.empty()) throw TooFewPointsError("aligned pairing: no features");
    AlignedResult out;
    out.resolved_k = resolve_k(cfg, joint.size());
    if (reuse != nullptr) {
        out.model = *reuse;
        if (out.model.assignments.size() != joint.size())
            throw ModelMismatchError("resumed model covers " +
                                     std::to_string(out.model.assignments.size()) +
                                     " ids, features hold " + std::to_string(joint.size()));
    } else {
        ClusteringConfig cc = cfg.clustering;
        cc.k = out.resolved_k;
        cc.seed = derive_seed(cfg.seed, "clustering");
        out.model = fit_minibatch_kmeans(joint, cc);
    }

    const auto medoids = select_medoids(out.model, joint);
    std::unordered_set<std::string> seen;
    for (const auto& joint_id : medoids) {
        const auto [side, raw] = split_joint_id(joint_id);
        if (!seen.insert(raw).second) {
            log("aligned: instance '" + raw + "' is the medoid of two clusters; kept once");
            continue;
        }
        out.seeds.push_back({raw, side, out.model.assignments.at(joint_id)});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Retrieved pairs: greedy top-n cosine matching over the shrinking remainder.

// Generation items are visited in a deterministic order; each takes its top-n
// nearest understanding items from what is left, keeps the ones at or above
// delta, and removes them from the pool. Items with no qualifying neighbor
// are skipped and logged.
inline std::vector<UGPair> build_retrieved(const FeatureSet& gen_rem,
                                           const FeatureSet& und_rem,
                                           const PairingConfig& cfg,
                                           const Logger& log = null_logger) {
    if (cfg.n == 0) throw ConfigError("retrieval: n must be positive");
    if (!gen_rem.empty() && !und_rem.empty() && gen_rem.dim != und_rem.dim)
        throw DimMismatchError("retrieval: dims differ");

    std::vector<std::size_t> gen_order(gen_rem.size());
    for (std::size_t i = 0; i < gen_order.size(); ++i) gen_order[i] = i;
    std::sort(gen_order.begin(), gen_order.end(), [&](std::size_t a, std::size_t b) {
        return gen_rem.vectors[a].id < gen_rem.vectors[b].id;
    });
    if (cfg.greedy_order == GreedyOrder::MaxSimDesc) {
        // Ranked by the best similarity available before any removals.
        std::vector<double> best(gen_rem.size(), -2.0);
        for (std::size_t i = 0; i < gen_rem.size(); ++i)
            for (const auto& u : und_rem.vectors)
                best[i] = std::max(best[i],
                                   cosine_similarity(gen_rem.vectors[i].values, u.values));
        std::stable_sort(gen_order.begin(), gen_order.end(),
                         [&](std::size_t a, std::size_t b) { return best[a] > best[b]; });
    }

    std::vector<bool> und_used(und_rem.size(), false);
    std::vector<UGPair> pairs;
    struct Cand {
        double sim;
        std::size_t idx;
    };
    std::vector<Cand> cands;

    for (const std::size_t gi : gen_order) {
        const auto& g = gen_rem.vectors[gi];
        cands.clear();
        for (std::size_t ui = 0; ui < und_rem.size(); ++ui) {
            if (und_used[ui]) continue;
            cands.push_back({cosine_similarity(g.values, und_rem.vectors[ui].values), ui});
        }
        std::sort(cands.begin(), cands.end(), [&](const Cand& a, const Cand& b) {
            if (a.sim != b.sim) return a.sim > b.sim;
            return und_rem.vectors[a.idx].id < und_rem.vectors[b.idx].id;
        });
        if (cands.size() > cfg.n) cands.resize(cfg.n);

        bool any = false;
        for (const auto& c : cands) {
            if (c.sim < cfg.delta || c.sim <= 0.0) continue;
            und_used[c.idx] = true;
            pairs.push_back({und_rem.vectors[c.idx].id, g.id, PairKind::Retrieved, c.sim,
                             std::sqrt(c.sim)});
            any = true;
        }
        if (!any) log("retrieval: no qualifying neighbor for '" + g.id + "'; skipped");
    }
    return pairs;
}

// ---------------------------------------------------------------------------
// Full dataset assembly.

struct PairRecord {
    std::string pair_id;
    UGPair pair;
    std::string und_image, question, answer;
    std::string gen_image, caption;
    std::string task;
};

struct PairDataset {
    std::vector<PairRecord> records;  // aligned first, then retrieved
    json stats;
    ClusterModel model;
};

inline json pair_record_to_json(const PairRecord& r) {
    json meta = {{"und_id", r.pair.und_id}, {"gen_id", r.pair.gen_id}};
    if (!r.task.empty()) meta["task"] = r.task;
    return {{"pair_id", r.pair_id},
            {"kind", to_string(r.pair.kind)},
            {"similarity", r.pair.similarity},
            {"weight", r.pair.weight},
            {"und", {{"image", r.und_image}, {"question", r.question}, {"answer", r.answer}}},
            {"gen", {{"image", r.gen_image}, {"caption", r.caption}}},
            {"meta", meta}};
}

inline json similarity_histogram(const std::vector<PairRecord>& records) {
    constexpr double width = 0.05;
    std::vector<std::size_t> bins(20, 0);
    for (const auto& r : records) {
        auto b = static_cast<std::size_t>(r.pair.similarity / width);
        ++bins[std::min<std::size_t>(b, bins.size() - 1)];
    }
    json h = json::object();
    char label[16];
    for (std::size_t b = 0; b < bins.size(); ++b) {
        std::snprintf(label, sizeof(label), "%.2f-%.2f", width * static_cast<double>(b),
                      width * static_cast<double>(b + 1));
        h[label] = bins[b];
    }
    return h;
}

namespace detail {

inline FeatureSet without_ids(const FeatureSet& fs,
                              const std::unordered_set<std::string>& drop) {
    FeatureSet out;
    out.source = fs.source;
    out.dim = fs.dim;
    for (const auto& v : fs.vectors)
        if (drop.count(v.id) == 0) out.vectors.push_back(v);
    return out;
}

// Fills whatever the record is missing so both sides of a pair can be emitted.
inline Quadruple ensure_complete(const Quadruple& q, bool need_qa, bool need_caption,
                                 AugmentationClient& client) {
    Quadruple out = q;
    if (need_caption && out.caption.empty())
        out = request_augmentation(
            {AugmentationDirection::CompleteCaption, out, "caption-v1"}, client);
    if (need_qa && (out.question.empty() || out.answer.empty()))
        out = request_augmentation({AugmentationDirection::CompleteQA, out, "qa-v1"},
                                   client);
    return out;
}

}  // namespace detail

// Runs the whole pipeline: joint clustering for aligned seeds, greedy
// retrieval over the remainders, content lookup, and summary statistics.
// Every feature id must resolve to a quadruple; quadruples without a feature
// vector are skipped with a warning.
inline PairDataset build_pair_dataset(const FeatureSet& und_features,
                                      const FeatureSet& gen_features,
                                      const std::map<std::string, Quadruple>& quadruples,
                                      const PairingConfig& cfg,
                                      AugmentationClient& client,
                                      const Logger& log = null_logger,
                                      const ClusterModel* reuse = nullptr) {
    std::unordered_set<std::string> feature_ids;
    for (const auto& v : und_features.vectors) feature_ids.insert(v.id);
    for (const auto& v : gen_features.vectors) feature_ids.insert(v.id);
    for (const auto& id : feature_ids)
        if (quadruples.count(id) == 0)
            throw MissingQuadrupleError("no quadruple for feature id '" + id + "'");
    for (const auto& [id, q] : quadruples)
        if (feature_ids.count(id) == 0)
            log("pairing: quadruple '" + id + "' has no feature vector; excluded");

    const auto joint = make_joint(und_features, gen_features);
    const auto aligned = build_aligned(joint, cfg, reuse, log);

    PairDataset out;
    out.model = aligned.model;

    std::unordered_set<std::string> aligned_ids;
    for (const auto& seed : aligned.seeds) aligned_ids.insert(seed.id);

    std::size_t next = 0;
    for (const auto& seed : aligned.seeds) {
        const Quadruple q =
            detail::ensure_complete(quadruples.at(seed.id), true, true, client);
        PairRecord r;
        char buf[16];
        std::snprintf(buf, sizeof(buf), "a%04zu", next++);
        r.pair_id = buf;
        r.pair = {seed.id, seed.id, PairKind::Aligned, 1.0, 1.0};
        r.und_image = q.image;
        r.question = q.question;
        r.answer = q.answer;
        r.gen_image = q.image;
        r.caption = q.caption;
        r.task = q.task;
        out.records.push_back(std::move(r));
    }

    const auto und_rem = detail::without_ids(und_features, aligned_ids);
    const auto gen_rem = detail::without_ids(gen_features, aligned_ids);
    const auto retrieved = build_retrieved(gen_rem, und_rem, cfg, log);

    next = 0;
    for (const auto& p : retrieved) {
        const Quadruple qu =
            detail::ensure_complete(quadruples.at(p.und_id), true, false, client);
        const Quadruple qg =
            detail::ensure_complete(quadruples.at(p.gen_id), false, true, client);
        PairRecord r;
        char buf[16];
        std::snprintf(buf, sizeof(buf), "r%04zu", next++);
        r.pair_id = buf;
        r.pair = p;
        r.und_image = qu.image;
        r.question = qu.question;
        r.answer = qu.answer;
        r.gen_image = qg.image;
        r.caption = qg.caption;
        r.task = qu.task;
        out.records.push_back(std::move(r));
    }

    std::size_t n_aligned = aligned.seeds.size();
    out.stats = {{"counts",
                  {{"aligned", n_aligned},
                   {"retrieved", retrieved.size()},
                   {"total", out.records.size()}}},
                 {"similarity_histogram", similarity_histogram(out.records)},
                 {"config",
                  {{"n", cfg.n},
                   {"delta", cfg.delta},
                   {"k", aligned.resolved_k},
                   {"seed", cfg.seed},
                   {"greedy_order", to_string(cfg.greedy_order)}}},
                 {"clustering", {{"inertia", out.model.inertia}}}};
    return out;
}

inline void write_pair_dataset(const PairDataset& ds, const std::string& pairs_path,
                               const std::string& stats_path) {
    std::string lines;
    for (const auto& r : ds.records) {
        lines += pair_record_to_json(r).dump();
        lines += '\n';
    }
    atomic_write_file(pairs_path, lines);
    atomic_write_file(stats_path, ds.stats.dump(2) + "\n");
}

inline std::vector<PairRecord> load_pair_records(const std::string& path) {
    std::vector<PairRecord> out;
    std::unordered_set<std::string> und_seen;
    read_jsonl(path, [&](std::size_t line_no, const json& j) {
        const std::string where = path + ":" + std::to_string(line_no);
        PairRecord r;
        try {
            r.pair_id = j.at("pair_id").get<std::string>();
            r.pair.kind = pair_kind_from_string(j.at("kind").get<std::string>());
            r.pair.similarity = j.at("similarity").get<double>();
            r.pair.weight = j.at("weight").get<double>();
            r.pair.und_id = j.at("meta").at("und_id").get<std::string>();
            r.pair.gen_id = j.at("meta").at("gen_id").get<std::string>();
            r.und_image = j.at("und").at("image").get<std::string>();
            r.question = j.at("und").at("question").get<std::string>();
            r.answer = j.at("und").at("answer").get<std::string>();
            r.gen_image = j.at("gen").at("image").get<std::string>();
            r.caption = j.at("gen").at("caption").get<std::string>();
            if (j.at("meta").contains("task"))
                r.task = j.at("meta").at("task").get<std::string>();
        } catch (const json::exception& e) {
            throw SchemaError(where + ": " + e.what());
        } catch (const SchemaError& e) {
            throw SchemaError(where + ": " + e.what());
        }
        if (r.pair.similarity < 0.0 || r.pair.similarity > 1.0)
            throw SchemaError(where + ": similarity out of [0,1]");
        if (r.pair.kind == PairKind::Retrieved && !und_seen.insert(r.pair.und_id).second)
            throw SchemaError(where + ": und id '" + r.pair.und_id +
                              "' reused across retrieved pairs");
        out.push_back(std::move(r));
    });
    return out;
}

// Invariant audit used by `pair stats --verify`; returns human-readable
// violations, empty when the dataset is sound.
inline std::vector<std::string> verify_dataset(const std::vector<PairRecord>& records,
                                               double delta) {
    std::vector<std::string> bad;
    std::unordered_set<std::string> und_seen;
    for (const auto& r : records) {
        if (r.pair.kind == PairKind::Aligned) {
            if (r.pair.weight != 1.0)
                bad.push_back(r.pair_id + ": aligned weight " +
                              format_double(r.pair.weight) + " != 1");
            if (r.pair.similarity != 1.0)
                bad.push_back(r.pair_id + ": aligned similarity " +
                              format_double(r.pair.similarity) + " != 1");
        } else {
            if (r.pair.similarity < delta)
                bad.push_back(r.pair_id + ": similarity " +
                              format_double(r.pair.similarity) + " below threshold " +
                              format_double(delta));
            if (std::fabs(r.pair.weight - std::sqrt(r.pair.similarity)) > 1e-12)
                bad.push_back(r.pair_id + ": weight is not sqrt(similarity)");
            if (!und_seen.insert(r.pair.und_id).second)
                bad.push_back(r.pair_id + ": und id '" + r.pair.und_id + "' reused");
        }
    }
    return bad;
}

}  // namespace pairuni
