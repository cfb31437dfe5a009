#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "pairuni/core.hpp"
#include "pairuni/io.hpp"

namespace pairuni {

// One L2-normalized image embedding, tagged with the split it came from.
struct FeatureVector {
    std::string id;
    Side source = Side::Understanding;
    std::vector<double> values;

    std::size_t dim() const { return values.size(); }
};

// Homogeneous collection: all members share source and dimensionality.
struct FeatureSet {
    Side source = Side::Understanding;
    std::size_t dim = 0;
    std::vector<FeatureVector> vectors;

    std::size_t size() const { return vectors.size(); }
    bool empty() const { return vectors.empty(); }
};

// v / ||v||. Degenerate embeddings (norm < 1e-12) are the caller's problem.
inline std::vector<double> l2_normalize(const std::vector<double>& v) {
    if (v.empty()) throw ZeroVectorError("l2_normalize: empty vector");
    double sq = 0.0;
    for (double x : v) sq += x * x;
    const double norm = std::sqrt(sq);
    if (norm < 1e-12) throw ZeroVectorError("l2_normalize: zero-norm vector");
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] / norm;
    return out;
}

// Dot product of unit vectors, clamped to [-1, 1]: downstream sqrt(s) and
// arccos-style diagnostics must never see 1 + ulp.
inline double cosine_similarity(const std::vector<double>& a,
                                const std::vector<double>& b) {
    if (a.size() != b.size())
        throw DimMismatchError("cosine_similarity: dim " + std::to_string(a.size()) +
                               " vs " + std::to_string(b.size()));
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return clamp_unit_interval(s, -1.0, 1.0);
}

inline double cosine_similarity(const FeatureVector& a, const FeatureVector& b) {
    return cosine_similarity(a.values, b.values);
}

// Loads a feature JSONL file:
//   {"id": "...", "source": "und"|"gen", "vector": [...], "normalized": bool}
// Records must be dimension-consistent and id-unique; vectors are normalized
// on load when the record says they are not. If expected_source is given,
// every record must carry it.
inline FeatureSet load_features(const std::string& path,
                                std::optional<Side> expected_source = std::nullopt) {
    FeatureSet set;
    std::unordered_set<std::string> seen;
    bool first = true;
    read_jsonl(path, [&](std::size_t line_no, const json& rec) {
        auto where = [&]() { return path + ":" + std::to_string(line_no); };
        if (!rec.is_object() || !rec.contains("id") || !rec.contains("source") ||
            !rec.contains("vector") || !rec.contains("normalized"))
            throw SchemaError(where() + ": record needs id, source, vector, normalized");
        if (!rec["id"].is_string() || !rec["vector"].is_array() ||
            !rec["normalized"].is_boolean() || !rec["source"].is_string())
            throw SchemaError(where() + ": wrong field type");

        FeatureVector fv;
        fv.id = rec["id"].get<std::string>();
        try {
            fv.source = side_from_string(rec["source"].get<std::string>());
        } catch (const SchemaError& e) {
            throw SchemaError(where() + ": " + e.what());
        }
        if (expected_source && fv.source != *expected_source)
            throw SchemaError(where() + ": expected source '" +
                              to_string(*expected_source) + "'");
        for (const auto& x : rec["vector"]) {
            if (!x.is_number()) throw SchemaError(where() + ": non-numeric vector entry");
            fv.values.push_back(x.get<double>());
        }
        if (fv.values.empty()) throw SchemaError(where() + ": empty vector");

        if (first) {
            set.source = fv.source;
            set.dim = fv.values.size();
            first = false;
        } else {
            if (fv.source != set.source)
                throw SchemaError(where() + ": mixed sources within one file");
            if (fv.values.size() != set.dim)
                throw DimMismatchError(where() + ": dim " +
                                       std::to_string(fv.values.size()) + " != " +
                                       std::to_string(set.dim));
        }
        if (!seen.insert(fv.id).second)
            throw DuplicateIdError(where() + ": duplicate id '" + fv.id + "'");

        if (rec["normalized"].get<bool>()) {
            double sq = 0.0;
            for (double x : fv.values) sq += x * x;
            if (std::abs(std::sqrt(sq) - 1.0) > 1e-6)
                throw SchemaError(where() + ": flagged normalized but norm != 1");
        } else {
            try {
                fv.values = l2_normalize(fv.values);
            } catch (const ZeroVectorError&) {
                throw SchemaError(where() + ": zero-norm vector");
            }
        }
        set.vectors.push_back(std::move(fv));
    });
    return set;
}

}  // namespace pairuni
