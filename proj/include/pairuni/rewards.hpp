#pragma once

#include <cctype>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "pairuni/core.hpp"
#include "pairuni/io.hpp"

namespace pairuni {

// Trim, casefold, strip trailing punctuation. Applied to both sides of the
// accuracy comparison, so the check is symmetric under formatting noise.
inline std::string normalize_answer(const std::string& s) {
    std::size_t b = 0, e = s.size();
    auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
    while (b < e && is_space(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && is_space(static_cast<unsigned char>(s[e - 1]))) --e;
    std::string out;
    out.reserve(e - b);
    for (std::size_t i = b; i < e; ++i)
        out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(s[i]))));
    const std::string punct = ".,;:!?";
    while (!out.empty() && punct.find(out.back()) != std::string::npos) out.pop_back();
    return out;
}

inline double reward_accuracy(const std::string& pred, const std::string& truth) {
    return normalize_answer(pred) == normalize_answer(truth) ? 1.0 : 0.0;
}

class GenerationScorer {
  public:
    virtual ~GenerationScorer() = default;
    virtual double score(const std::string& prompt, const std::vector<int>& output) const = 0;
};

// Positional overlap with a fixed target sequence, normalized by the target
// length. Extra output tokens beyond the target never count.
class TargetOverlapScorer : public GenerationScorer {
  public:
    explicit TargetOverlapScorer(std::vector<int> target) : target_(std::move(target)) {}

    double score(const std::string&, const std::vector<int>& output) const override {
        if (target_.empty()) return 0.0;
        std::size_t hits = 0;
        const std::size_t upto = std::min(target_.size(), output.size());
        for (std::size_t z = 0; z < upto; ++z)
            if (output[z] == target_[z]) ++hits;
        return static_cast<double>(hits) / static_cast<double>(target_.size());
    }

  private:
    std::vector<int> target_;
};

using ScorerFactory =
    std::function<std::shared_ptr<GenerationScorer>(const json& params)>;

inline const std::map<std::string, ScorerFactory>& scorer_registry() {
    static const std::map<std::string, ScorerFactory> registry = {
        {"target-overlap", [](const json& params) {
             std::vector<int> target;
             if (params.contains("target"))
                 target = params.at("target").get<std::vector<int>>();
             return std::make_shared<TargetOverlapScorer>(std::move(target));
         }}};
    return registry;
}

inline std::shared_ptr<GenerationScorer> make_scorer(const std::string& id,
                                                     const json& params = json::object()) {
    const auto& reg = scorer_registry();
    auto it = reg.find(id);
    if (it == reg.end()) throw UnknownScorerError("no generation scorer '" + id + "'");
    return it->second(params);
}

inline double reward_generation(const std::string& prompt, const std::vector<int>& output,
                                const GenerationScorer& scorer) {
    return scorer.score(prompt, output);
}

}  // namespace pairuni
