#pragma once

#include <limits>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "pairuni/core.hpp"
#include "pairuni/features.hpp"
#include "pairuni/io.hpp"
#include "pairuni/rng.hpp"

namespace pairuni {

struct ClusteringConfig {
    std::size_t k = 1;
    std::size_t batch_size = 64;
    std::size_t max_iters = 200;
    std::uint64_t seed = 0;
    double convergence_tol = 1e-4;
};

struct ClusterModel {
    std::vector<std::vector<double>> centroids;
    std::map<std::string, std::size_t> assignments;  // vector id -> cluster index
    double inertia = 0.0;
    ClusteringConfig config;
};

namespace detail {

inline double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

// Nearest centroid by squared distance, ties to the lowest cluster index.
inline std::size_t nearest_centroid(const std::vector<double>& x,
                                    const std::vector<std::vector<double>>& centroids) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < centroids.size(); ++k) {
        const double d = sq_dist(x, centroids[k]);
        if (d < best_d) {
            best_d = d;
            best = k;
        }
    }
    return best;
}

}  // namespace detail

// k-means++ seeding (Arthur & Vassilvitskii). Exposed so tests can run a
// full-batch reference from the same start. If the D^2 mass hits zero
// (duplicate-only remainder) the next unchosen point in index order is taken.
inline std::vector<std::vector<double>> kmeanspp_init(
    const std::vector<FeatureVector>& points, std::size_t k, std::uint64_t seed) {
    const std::size_t n = points.size();
    Rng rng(derive_seed(seed, "kmeans++"));
    std::vector<std::vector<double>> centroids;
    centroids.reserve(k);
    std::vector<bool> chosen(n, false);

    const std::size_t first = rng.uniform_index(n);
    centroids.push_back(points[first].values);
    chosen[first] = true;

    std::vector<double> mindist(n);
    for (std::size_t i = 0; i < n; ++i)
        mindist[i] = detail::sq_dist(points[i].values, centroids[0]);

    while (centroids.size() < k) {
        double total = 0.0;
        for (double d : mindist) total += d;
        std::size_t pick = n;
        if (total > 0.0) {
            const double r = rng.uniform() * total;
            double cum = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                cum += mindist[i];
                if (cum > r) {
                    pick = i;
                    break;
                }
            }
            if (pick == n) {  // r landed on the tail of accumulated rounding
                for (std::size_t i = n; i-- > 0;)
                    if (mindist[i] > 0.0) {
                        pick = i;
                        break;
                    }
            }
        }
        if (pick == n) {
            for (std::size_t i = 0; i < n; ++i)
                if (!chosen[i]) {
                    pick = i;
                    break;
                }
        }
        chosen[pick] = true;
        centroids.push_back(points[pick].values);
        for (std::size_t i = 0; i < n; ++i)
            mindist[i] = std::min(mindist[i],
                                  detail::sq_dist(points[i].values, centroids.back()));
    }
    return centroids;
}

namespace detail {

struct Finalized {
    std::vector<std::vector<double>> centroids;
    std::vector<std::size_t> assign;
    double inertia = 0.0;
};

// Full-batch assignment plus empty-cluster repair: an empty cluster takes the
// point farthest from its current centroid, then assignment is redone.
inline Finalized finalize_model(const std::vector<FeatureVector>& points,
                                std::vector<std::vector<double>> centroids) {
    const std::size_t n = points.size();
    const std::size_t k = centroids.size();
    Finalized out;
    out.assign.resize(n);

    for (std::size_t round = 0; round <= k; ++round) {
        std::vector<std::size_t> counts(k, 0);
        for (std::size_t i = 0; i < n; ++i) {
            out.assign[i] = nearest_centroid(points[i].values, centroids);
            ++counts[out.assign[i]];
        }
        std::size_t empty = k;
        for (std::size_t c = 0; c < k; ++c)
            if (counts[c] == 0) {
                empty = c;
                break;
            }
        if (empty == k) break;

        // Farthest point from its assigned centroid, drawn only from clusters
        // that can spare a member.
        std::size_t far_idx = n;
        double far_d = -1.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (counts[out.assign[i]] <= 1) continue;
            const double d = sq_dist(points[i].values, centroids[out.assign[i]]);
            if (d > far_d) {
                far_d = d;
                far_idx = i;
            }
        }
        if (far_idx == n) break;  // k == n with duplicates; nothing to move
        centroids[empty] = points[far_idx].values;
    }

    out.inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        out.inertia += sq_dist(points[i].values, centroids[out.assign[i]]);
    out.centroids = std::move(centroids);
    return out;
}

}  // namespace detail

// Mini-batch k-means (Sculley 2010): per-centroid running-count learning rate
// 1/count, stopping when the largest centroid displacement in an iteration
// drops below convergence_tol. The returned model never has a full-batch
// inertia above the k-means++ start (the start is kept if the stream update
// ends up worse).
inline ClusterModel fit_minibatch_kmeans(const std::vector<FeatureVector>& points,
                                         const ClusteringConfig& cfg) {
    if (cfg.k == 0) throw ConfigError("clustering: k must be positive");
    if (cfg.batch_size == 0) throw ConfigError("clustering: batch_size must be positive");
    if (points.size() < cfg.k)
        throw TooFewPointsError("clustering: " + std::to_string(points.size()) +
                                " points for k=" + std::to_string(cfg.k));
    const std::size_t dim = points.front().dim();
    for (const auto& p : points)
        if (p.dim() != dim) throw DimMismatchError("clustering: inconsistent dims");

    const auto init = kmeanspp_init(points, cfg.k, cfg.seed);
    auto centroids = init;

    Rng rng(derive_seed(cfg.seed, "minibatch"));
    std::vector<std::size_t> counts(cfg.k, 0);
    std::vector<std::size_t> batch(cfg.batch_size);
    std::vector<std::size_t> batch_assign(cfg.batch_size);

    for (std::size_t it = 0; it < cfg.max_iters; ++it) {
        for (auto& b : batch) b = rng.uniform_index(points.size());
        // Assignments are cached before any centroid moves within the batch.
        for (std::size_t j = 0; j < batch.size(); ++j)
            batch_assign[j] = detail::nearest_centroid(points[batch[j]].values, centroids);

        const auto snapshot = centroids;
        for (std::size_t j = 0; j < batch.size(); ++j) {
            const std::size_t c = batch_assign[j];
            const double eta = 1.0 / static_cast<double>(++counts[c]);
            const auto& x = points[batch[j]].values;
            for (std::size_t d = 0; d < dim; ++d)
                centroids[c][d] = (1.0 - eta) * centroids[c][d] + eta * x[d];
        }

        double max_disp_sq = 0.0;
        for (std::size_t c = 0; c < cfg.k; ++c)
            max_disp_sq = std::max(max_disp_sq, detail::sq_dist(centroids[c], snapshot[c]));
        if (std::sqrt(max_disp_sq) < cfg.convergence_tol) break;
    }

    auto fitted = detail::finalize_model(points, centroids);
    const auto fallback = detail::finalize_model(points, init);
    const auto& best = fitted.inertia <= fallback.inertia ? fitted : fallback;

    ClusterModel model;
    model.centroids = best.centroids;
    model.inertia = best.inertia;
    model.config = cfg;
    for (std::size_t i = 0; i < points.size(); ++i)
        model.assignments[points[i].id] = best.assign[i];
    return model;
}

inline ClusterModel fit_minibatch_kmeans(const FeatureSet& features,
                                         const ClusteringConfig& cfg) {
    return fit_minibatch_kmeans(features.vectors, cfg);
}

// One id per non-empty cluster: the member maximizing <f_i, c_k>, ties to the
// lexicographically smallest id. Output follows cluster index order.
inline std::vector<std::string> select_medoids(const ClusterModel& model,
                                               const std::vector<FeatureVector>& points) {
    std::unordered_map<std::string, const FeatureVector*> by_id;
    by_id.reserve(points.size());
    for (const auto& p : points) by_id[p.id] = &p;
    if (points.size() != model.assignments.size())
        throw ModelMismatchError("select_medoids: model covers " +
                                 std::to_string(model.assignments.size()) +
                                 " ids, features hold " + std::to_string(points.size()));

    const std::size_t k = model.centroids.size();
    std::vector<std::string> best_id(k);
    std::vector<double> best_dot(k, -std::numeric_limits<double>::infinity());

    // model.assignments is id-ordered, so strict > keeps the smallest id on ties.
    for (const auto& [id, c] : model.assignments) {
        auto it = by_id.find(id);
        if (it == by_id.end())
            throw ModelMismatchError("select_medoids: unknown id '" + id + "'");
        if (c >= k) throw ModelMismatchError("select_medoids: cluster index out of range");
        double dot = 0.0;
        const auto& v = it->second->values;
        for (std::size_t d = 0; d < v.size(); ++d) dot += v[d] * model.centroids[c][d];
        if (dot > best_dot[c]) {
            best_dot[c] = dot;
            best_id[c] = id;
        }
    }

    std::vector<std::string> medoids;
    for (std::size_t c = 0; c < k; ++c)
        if (best_dot[c] > -std::numeric_limits<double>::infinity())
            medoids.push_back(best_id[c]);
    return medoids;
}

inline std::vector<std::string> select_medoids(const ClusterModel& model,
                                               const FeatureSet& features) {
    return select_medoids(model, features.vectors);
}

inline json cluster_model_to_json(const ClusterModel& m) {
    json j;
    j["centroids"] = m.centroids;
    j["assignments"] = m.assignments;
    j["inertia"] = m.inertia;
    j["config"] = {{"k", m.config.k},
                   {"batch_size", m.config.batch_size},
                   {"max_iters", m.config.max_iters},
                   {"seed", m.config.seed},
                   {"convergence_tol", m.config.convergence_tol}};
    return j;
}

inline ClusterModel cluster_model_from_json(const json& j) {
    ClusterModel m;
    try {
        m.centroids = j.at("centroids").get<std::vector<std::vector<double>>>();
        m.assignments = j.at("assignments").get<std::map<std::string, std::size_t>>();
        m.inertia = j.at("inertia").get<double>();
        const auto& c = j.at("config");
        m.config.k = c.at("k").get<std::size_t>();
        m.config.batch_size = c.at("batch_size").get<std::size_t>();
        m.config.max_iters = c.at("max_iters").get<std::size_t>();
        m.config.seed = c.at("seed").get<std::uint64_t>();
        m.config.convergence_tol = c.at("convergence_tol").get<double>();
    } catch (const json::exception& e) {
        throw SchemaError(std::string("cluster model: ") + e.what());
    }
    return m;
}

}  // namespace pairuni
