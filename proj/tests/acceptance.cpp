// Acceptance gate. Runs one check per release criterion and prints exactly
// one PASS/FAIL line for each; exits nonzero if any fail.
//
// Usage: acceptance <cli-binary> <scratch-dir>

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "oracles.hpp"
#include "pairuni/pairuni.hpp"

namespace fs = std::filesystem;
using namespace pairuni;

namespace {

std::string g_cli;
std::string g_scratch;
int g_failures = 0;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

void report(int number, const std::string& label, bool pass, const std::string& detail) {
    std::cout << (pass ? "PASS" : "FAIL") << " criterion-" << number << " " << label;
    if (!detail.empty()) std::cout << " (" << detail << ")";
    std::cout << "\n";
    if (!pass) ++g_failures;
}

void run_criterion(int number, const std::string& label,
                   const std::function<std::pair<bool, std::string>()>& body) {
    try {
        const auto [pass, detail] = body();
        report(number, label, pass, detail);
    } catch (const std::exception& e) {
        report(number, label, false, std::string("exception: ") + e.what());
    }
}

std::string path(const std::string& rel) { return g_scratch + "/" + rel; }

std::string slurp(const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)),
                       std::istreambuf_iterator<char>());
}

int run_cli(const std::string& args, std::string* out = nullptr,
            std::string* err = nullptr) {
    const std::string out_path = path("cli_stdout.txt");
    const std::string err_path = path("cli_stderr.txt");
    const std::string cmd = g_cli + " " + args + " > " + out_path + " 2> " + err_path;
    const int status = std::system(cmd.c_str());
    if (out != nullptr) *out = slurp(out_path);
    if (err != nullptr) *err = slurp(err_path);
    if (status == -1) return -1;
    return WEXITSTATUS(status);
}

std::string fmt(double v) {
    std::ostringstream s;
    s.precision(6);
    s << v;
    return s.str();
}

// --------------------------------------------------------------------------
// Criterion 1: group-relative advantage normalization statistics.

std::pair<bool, std::string> advantage_normalization() {
    const auto start = Clock::now();
    Rng rng(1001);
    std::size_t checked = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 2 + rng.uniform_index(7);
        std::vector<double> rewards(n);
        switch (trial % 4) {
            case 0:
                for (auto& r : rewards) r = static_cast<double>(rng.uniform_index(2));
                break;
            case 1:
                for (auto& r : rewards) r = rng.uniform();
                break;
            case 2:
                for (auto& r : rewards) r = 5.0 + 0.3 * rng.gaussian();
                break;
            default: {
                const double v = rng.uniform();
                for (auto& r : rewards) r = v;  // all equal
                break;
            }
        }
        double sigma = 0.0;
        const auto adv = detail::normalize_rewards(rewards, 1e-8, nullptr, &sigma);
        if (sigma < 1e-8) {
            for (double a : adv)
                if (a != 0.0)
                    return {false, "zero-signal group produced nonzero advantage"};
            continue;
        }
        double mean = 0.0, var = 0.0;
        for (double a : adv) mean += a;
        mean /= static_cast<double>(n);
        for (double a : adv) var += (a - mean) * (a - mean);
        var /= static_cast<double>(n);
        if (std::fabs(mean) > 1e-9)
            return {false, "advantage mean " + fmt(mean) + " exceeds 1e-9"};
        if (std::fabs(std::sqrt(var) - 1.0) > 1e-6)
            return {false, "advantage std " + fmt(std::sqrt(var)) + " off by > 1e-6"};
        ++checked;
    }
    const double elapsed = seconds_since(start);
    if (elapsed >= 1.0) return {false, "took " + fmt(elapsed) + "s, budget 1s"};
    return {true, std::to_string(checked) + " signal groups of 1000, " +
                      fmt(elapsed) + "s"};
}

// --------------------------------------------------------------------------
// Shared batch builders for criteria 2 and 3.

PairRollouts random_pair(const ToyPolicy& behavior, const UGPair& pair,
                         std::size_t prompt_u, std::size_t prompt_g, std::size_t k_und,
                         std::size_t k_gen, std::size_t len, Rng& rng) {
    PairRollouts pr;
    pr.pair = pair;
    auto fill = [&](std::vector<Trajectory>& out, Side side, std::size_t prompt,
                    std::size_t count, const std::string& tag) {
        for (std::size_t i = 0; i < count; ++i) {
            auto roll = sample_trajectory(behavior, prompt, len, rng);
            Trajectory t;
            t.prompt_id = tag + std::to_string(prompt);
            t.side = side;
            t.prompt = prompt;
            t.tokens = roll.tokens;
            t.old_logps = roll.logps;
            t.reward = side == Side::Understanding
                           ? static_cast<double>(rng.uniform_index(2))
                           : rng.uniform();
            out.push_back(std::move(t));
        }
    };
    fill(pr.und, Side::Understanding, prompt_u, k_und, "u");
    fill(pr.gen, Side::Generation, prompt_g, k_gen, "g");
    return pr;
}

std::vector<PairRollouts> random_batch(const ToyPolicy& behavior, std::size_t num_pairs,
                                       std::size_t num_prompts, Rng& rng) {
    std::vector<PairRollouts> pairs;
    for (std::size_t p = 0; p < num_pairs; ++p) {
        const bool aligned = rng.uniform_index(2) == 0;
        const double s = aligned ? 1.0 : 0.4 + 0.6 * rng.uniform();
        UGPair pair{"u" + std::to_string(p), "g" + std::to_string(p),
                    aligned ? PairKind::Aligned : PairKind::Retrieved, s,
                    aligned ? 1.0 : std::sqrt(s)};
        const std::size_t pu = (2 * p) % num_prompts;
        const std::size_t pg = (2 * p + 1) % num_prompts;
        pairs.push_back(random_pair(behavior, pair, pu, pg, 2 + rng.uniform_index(3),
                                    2 + rng.uniform_index(3), 1 + rng.uniform_index(3),
                                    rng));
    }
    return pairs;
}

std::pair<bool, std::string> reduction_equivalences() {
    const auto start = Clock::now();
    const auto behavior = make_toy_policy(16, 8, 77, 1.0);
    auto policy = behavior;
    Rng drift(derive_seed(77, "drift"));
    for (auto& v : policy.logits.data) v += 0.15 * drift.gaussian();

    Rng rng(1002);
    for (int trial = 0; trial < 100; ++trial) {
        const auto pairs = random_batch(behavior, 1 + rng.uniform_index(4), 16, rng);
        GrpoConfig cfg;
        cfg.beta = trial % 2 == 0 ? 0.0 : 0.05;

        auto forced = pairs;
        for (auto& p : forced) p.pair.weight = 1.0;
        const auto weighted = objective_pair_grpo(forced, policy, cfg);
        const auto unweighted = objective_pairwise(pairs, policy, cfg);
        if (std::fabs(weighted.value - unweighted.value) > 1e-12)
            return {false, "weighted(1) vs pairwise J gap " +
                               fmt(std::fabs(weighted.value - unweighted.value))};
        for (std::size_t i = 0; i < weighted.grad.data.size(); ++i)
            if (std::fabs(weighted.grad.data[i] - unweighted.grad.data[i]) > 1e-12)
                return {false, "weighted(1) vs pairwise gradient gap at coordinate " +
                                   std::to_string(i)};

        std::vector<Trajectory> merged;
        for (const auto& p : pairs) {
            for (const auto& t : p.und) merged.push_back(t);
            for (const auto& t : p.gen) merged.push_back(t);
        }
        const auto plain = objective_vanilla(merged, policy, cfg);
        if (std::fabs(plain.value - unweighted.value) > 1e-12)
            return {false, "pairwise vs vanilla J gap " +
                               fmt(std::fabs(plain.value - unweighted.value))};
        for (std::size_t i = 0; i < plain.grad.data.size(); ++i)
            if (std::fabs(plain.grad.data[i] - unweighted.grad.data[i]) > 1e-12)
                return {false, "pairwise vs vanilla gradient gap at coordinate " +
                                   std::to_string(i)};
    }
    const double elapsed = seconds_since(start);
    if (elapsed >= 5.0) return {false, "took " + fmt(elapsed) + "s, budget 5s"};
    return {true, "100 batches, both identities within 1e-12, " + fmt(elapsed) + "s"};
}

// --------------------------------------------------------------------------
// Criterion 3: analytic gradient vs central finite differences.

void nudge_off_kinks(std::vector<PairRollouts>& pairs, const ToyPolicy& policy,
                     double eps) {
    auto fix = [&](Trajectory& t) {
        for (std::size_t z = 0; z < t.tokens.size(); ++z) {
            const double rho =
                importance_ratio(log_prob(policy, t.prompt, t.tokens[z]), t.old_logps[z]);
            for (double kink : {1.0 - eps, 1.0 + eps})
                if (std::fabs(rho - kink) < 2e-3) t.old_logps[z] -= 1e-2;
        }
    };
    for (auto& p : pairs) {
        for (auto& t : p.und) fix(t);
        for (auto& t : p.gen) fix(t);
    }
}

std::pair<bool, std::string> gradient_oracle() {
    const auto start = Clock::now();
    const auto behavior = make_toy_policy(32, 16, 88, 1.0);

    Rng rng(1003);
    std::size_t clipped_batches = 0;
    for (int trial = 0; trial < 20; ++trial) {
        // Mild drift near the behavior policy; strong drift activates clipping.
        const double scale = trial % 3 == 2 ? 0.6 : 0.1;
        auto policy = behavior;
        Rng drift(derive_seed(88, "drift", static_cast<std::uint64_t>(trial)));
        for (auto& v : policy.logits.data) v += scale * drift.gaussian();

        auto pairs = random_batch(behavior, 2, 32, rng);
        if (trial % 4 == 3)
            for (auto& t : pairs[0].und) t.reward = 0.5;  // zero-advantage side
        nudge_off_kinks(pairs, policy, 0.2);

        GrpoConfig cfg;
        cfg.beta = trial % 5 == 4 ? 0.05 : 0.0;
        const auto rep = objective_pair_grpo(pairs, policy, cfg);
        if (rep.clip_fraction > 0.0) ++clipped_batches;

        const auto fd = finite_diff_oracle(
            [&](const ToyPolicy& q) { return objective_pair_grpo(pairs, q, cfg).value; },
            policy, 1e-5);
        for (std::size_t i = 0; i < rep.grad.data.size(); ++i) {
            const double a = rep.grad.data[i], b = fd.data[i];
            const double diff = std::fabs(a - b);
            if (diff > 1e-8 && diff > 1e-4 * std::max(std::fabs(a), std::fabs(b)))
                return {false, "batch " + std::to_string(trial) + " coordinate " +
                                   std::to_string(i) + ": analytic " + fmt(a) +
                                   " vs numeric " + fmt(b)};
        }
    }
    if (clipped_batches == 0) return {false, "no batch exercised the clipped branch"};
    const double elapsed = seconds_since(start);
    if (elapsed >= 30.0) return {false, "took " + fmt(elapsed) + "s, budget 30s"};
    return {true, "20 batches (" + std::to_string(clipped_batches) +
                      " clip-active), every coordinate within 1e-4 relative, " +
                      fmt(elapsed) + "s"};
}

// --------------------------------------------------------------------------
// Criterion 4: greedy retrieval and medoid selection vs hand enumeration.

std::pair<bool, std::string> pairing_oracle() {
    const auto start = Clock::now();
    Rng rng(1004);
    std::size_t instances = 0;

    for (std::size_t gn = 1; gn <= 6; ++gn) {
        for (std::size_t un = 1; un <= 6; ++un) {
            for (double delta : {0.0, 0.3, 0.6, 0.9}) {
                for (std::size_t n : {std::size_t{1}, std::size_t{2}, std::size_t{3}}) {
                    const auto und = testoracle::random_feature_set(
                        Side::Understanding, un, 3, rng, "u");
                    const auto gen = testoracle::random_feature_set(
                        Side::Generation, gn, 3, rng, "g");
                    PairingConfig cfg;
                    cfg.n = n;
                    cfg.delta = delta;

                    std::vector<std::string> skip_log;
                    const auto got = build_retrieved(gen, und, cfg,
                                                     [&](const std::string& m) {
                                                         skip_log.push_back(m);
                                                     });
                    const auto want =
                        testoracle::reference_retrieved(gen, und, n, delta);
                    if (got.size() != want.size())
                        return {false, "pair count mismatch at gen=" +
                                           std::to_string(gn) + " und=" +
                                           std::to_string(un)};
                    for (std::size_t i = 0; i < got.size(); ++i) {
                        if (got[i].und_id != want[i].und_id ||
                            got[i].gen_id != want[i].gen_id ||
                            got[i].similarity != want[i].sim ||
                            got[i].weight != std::sqrt(want[i].sim))
                            return {false, "pair " + std::to_string(i) +
                                               " differs from enumeration"};
                    }
                    // Skip behavior: exactly the generation items that
                    // contributed no pair must be logged.
                    std::size_t expected_skips = 0;
                    for (const auto& g : gen.vectors) {
                        bool matched = false;
                        for (const auto& p : want) matched |= p.gen_id == g.id;
                        if (!matched) {
                            ++expected_skips;
                            bool logged = false;
                            for (const auto& m : skip_log)
                                logged |= m.find("'" + g.id + "'") != std::string::npos;
                            if (!logged)
                                return {false, "skipped item '" + g.id +
                                                   "' was not logged"};
                        }
                    }
                    if (skip_log.size() != expected_skips)
                        return {false, "skip log has " +
                                           std::to_string(skip_log.size()) +
                                           " entries, expected " +
                                           std::to_string(expected_skips)};
                    ++instances;
                }
            }
        }
    }

    // Medoids: fitted models vs brute-force argmax inner product per cluster.
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t count = 4 + rng.uniform_index(8);
        const auto pts = testoracle::random_feature_set(Side::Understanding, count, 4,
                                                        rng, "m");
        ClusteringConfig cc;
        cc.k = 1 + rng.uniform_index(3);
        cc.seed = 2000 + static_cast<std::uint64_t>(trial);
        const auto model = fit_minibatch_kmeans(pts.vectors, cc);
        const auto got = select_medoids(model, pts.vectors);

        std::map<std::size_t, std::string> best_id;
        std::map<std::size_t, double> best_dot;
        for (const auto& [id, c] : model.assignments) {
            const FeatureVector* v = nullptr;
            for (const auto& p : pts.vectors)
                if (p.id == id) v = &p;
            double dot = 0.0;
            for (std::size_t d = 0; d < v->values.size(); ++d)
                dot += v->values[d] * model.centroids[c][d];
            auto it = best_dot.find(c);
            if (it == best_dot.end() || dot > it->second) {
                best_dot[c] = dot;
                best_id[c] = id;
            }
        }
        std::vector<std::string> want;
        for (const auto& [c, id] : best_id) want.push_back(id);
        if (got != want) return {false, "medoid mismatch on trial " +
                                            std::to_string(trial)};
    }

    const double elapsed = seconds_since(start);
    if (elapsed >= 10.0) return {false, "took " + fmt(elapsed) + "s, budget 10s"};
    return {true, std::to_string(instances) +
                      " retrieval instances + 30 medoid models match enumeration, " +
                      fmt(elapsed) + "s"};
}

// --------------------------------------------------------------------------
// Criterion 5: weight law and threshold audited end to end.

std::pair<bool, std::string> weight_law() {
    const int rc_synth = run_cli("synth --out " + path("data"));
    if (rc_synth != 0) return {false, "synth exited " + std::to_string(rc_synth)};

    const std::string inputs = " --und " + path("data/und_features.jsonl") +
                               " --gen " + path("data/gen_features.jsonl") +
                               " --quadruples " + path("data/quadruples.jsonl");

    struct Build {
        std::string out;
        std::string extra;
        double delta;
    };
    const Build builds[] = {
        {"build1", "", 0.6},
        {"build_alt", " --seed 9 --delta 0.7 --n 2", 0.7},
    };
    for (const auto& b : builds) {
        const int rc = run_cli("pair build" + inputs + " --out " + path(b.out) + b.extra);
        if (rc != 0)
            return {false, "pair build (" + b.out + ") exited " + std::to_string(rc)};
        std::string out, err;
        const int vrc = run_cli("pair stats --pairs " + path(b.out + "/pairs.jsonl") +
                                    " --verify --delta " + fmt(b.delta),
                                &out, &err);
        if (vrc != 0)
            return {false, "verify on " + b.out + " exited " + std::to_string(vrc) +
                               ": " + err};
        if (out.find("\"violations\": []") == std::string::npos)
            return {false, "verify on " + b.out + " reported violations"};
    }
    return {true, "2 generated datasets pass `pair stats --verify`"};
}

// --------------------------------------------------------------------------
// Criterion 6: gradient-agreement ordering across task regimes.

std::pair<bool, std::string> agreement_mechanism() {
    const auto start = Clock::now();
    const int rc = run_cli("agreement --out " + path("agreement"));
    if (rc != 0) return {false, "agreement exited " + std::to_string(rc)};

    json summary;
    try {
        summary = json::parse(slurp(path("agreement/agreement_summary.json")));
    } catch (const json::exception& e) {
        return {false, std::string("summary unreadable: ") + e.what()};
    }
    const auto& medians = summary.at("medians");
    const double aligned = medians.at("aligned-pairs").get<double>();
    const double random = medians.at("random-pairs").get<double>();
    const double und_only = medians.at("understanding-only").get<double>();
    const double gen_only = medians.at("generation-only").get<double>();

    if (!(aligned > random))
        return {false, "median ordering violated: aligned " + fmt(aligned) +
                           " vs random " + fmt(random)};
    if (und_only != 0.0 || gen_only != 0.0)
        return {false, "one-sided regimes must report exactly 0, got " +
                           fmt(und_only) + " and " + fmt(gen_only)};
    const double elapsed = seconds_since(start);
    if (elapsed >= 60.0) return {false, "took " + fmt(elapsed) + "s, budget 60s"};
    return {true, "aligned " + fmt(aligned) + " > random " + fmt(random) +
                      ", one-sided exactly 0, " + fmt(elapsed) + "s"};
}

// --------------------------------------------------------------------------
// Criterion 7: training raises the combined reward.

struct CurvePoint {
    double und = 0.0;
    double gen = 0.0;
};

std::vector<CurvePoint> parse_training_csv(const std::string& csv) {
    std::istringstream in(csv);
    std::string line;
    std::getline(in, line);  // header
    std::vector<CurvePoint> points;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::istringstream row(line);
        std::string f;
        while (std::getline(row, f, ',')) fields.push_back(f);
        if (fields.size() != 7) throw MalformedLogError("training row malformed");
        points.push_back({std::stod(fields[2]), std::stod(fields[3])});
    }
    return points;
}

std::pair<bool, std::string> training_progress() {
    const auto start = Clock::now();
    const int rc = run_cli("train --objective pair-grpo --pairs " +
                           path("build1/pairs.jsonl") + " --out " + path("train1"));
    if (rc != 0) return {false, "train exited " + std::to_string(rc)};

    const auto points = parse_training_csv(slurp(path("train1/training.csv")));
    if (points.size() < 20) return {false, "training log too short"};
    const std::size_t tenth = points.size() / 10;
    double head = 0.0, tail = 0.0;
    for (std::size_t i = 0; i < tenth; ++i)
        head += 0.5 * (points[i].und + points[i].gen);
    for (std::size_t i = points.size() - tenth; i < points.size(); ++i)
        tail += 0.5 * (points[i].und + points[i].gen);
    head /= static_cast<double>(tenth);
    tail /= static_cast<double>(tenth);

    const double gain = tail - head;
    const double elapsed = seconds_since(start);
    if (elapsed >= 120.0) return {false, "took " + fmt(elapsed) + "s, budget 120s"};
    if (gain < 0.1)
        return {false, "combined reward gain " + fmt(gain) + " < 0.1 (first tenth " +
                           fmt(head) + ", last tenth " + fmt(tail) + ")"};
    return {true, "combined reward " + fmt(head) + " -> " + fmt(tail) + " (gain " +
                      fmt(gain) + "), " + fmt(elapsed) + "s"};
}

// --------------------------------------------------------------------------
// Criterion 8: byte-identical reruns.

std::pair<bool, std::string> determinism() {
    const std::string inputs = " --und " + path("data/und_features.jsonl") +
                               " --gen " + path("data/gen_features.jsonl") +
                               " --quadruples " + path("data/quadruples.jsonl");
    const int rc = run_cli("pair build" + inputs + " --out " + path("build2"));
    if (rc != 0) return {false, "second build exited " + std::to_string(rc)};
    for (const char* name : {"pairs.jsonl", "stats.json", "cluster_model.json"}) {
        if (slurp(path("build1/") + name) != slurp(path("build2/") + name))
            return {false, std::string(name) + " differs between identical builds"};
    }

    const int rc2 = run_cli("train --objective pair-grpo --pairs " +
                            path("build1/pairs.jsonl") + " --out " + path("train2"));
    if (rc2 != 0) return {false, "second train exited " + std::to_string(rc2)};
    for (const char* name : {"training.csv", "checkpoint.json", "reward_curves.csv"}) {
        if (slurp(path("train1/") + name) != slurp(path("train2/") + name))
            return {false, std::string(name) + " differs between identical runs"};
    }
    return {true, "dataset, checkpoint, and CSV outputs byte-identical"};
}

// --------------------------------------------------------------------------
// Criterion 9: the weight ablation is recorded and equals the unweighted
// objective step for step.

std::pair<bool, std::string> ablation_plumbing() {
    const std::string pairs_arg = " --pairs " + path("build1/pairs.jsonl");
    const int rc1 = run_cli("train --objective pair-grpo --no-sim-weight" + pairs_arg +
                            " --steps 25 --out " + path("ablation_off"));
    if (rc1 != 0) return {false, "ablated train exited " + std::to_string(rc1)};
    const int rc2 = run_cli("train --objective pairwise" + pairs_arg +
                            " --steps 25 --out " + path("ablation_pairwise"));
    if (rc2 != 0) return {false, "pairwise train exited " + std::to_string(rc2)};
    const int rc3 = run_cli("train --objective pair-grpo" + pairs_arg +
                            " --steps 25 --out " + path("ablation_on"));
    if (rc3 != 0) return {false, "weighted train exited " + std::to_string(rc3)};

    const auto echo = slurp(path("ablation_off/config_echo.cfg"));
    if (echo.find("train.sim_weight = false\n") == std::string::npos)
        return {false, "config echo does not record the override"};

    const auto off = slurp(path("ablation_off/training.csv"));
    const auto pairwise = slurp(path("ablation_pairwise/training.csv"));
    if (off != pairwise)
        return {false, "all-unit-weight run does not match the pairwise objective"};

    const auto on = slurp(path("ablation_on/training.csv"));
    if (on == off)
        return {false, "similarity weights had no effect on this dataset"};
    return {true, "override echoed; unit-weight run equals pairwise step for step"};
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 3) {
        std::cerr << "usage: acceptance <cli-binary> <scratch-dir>\n";
        return 2;
    }
    g_cli = argv[1];
    g_scratch = argv[2];
    std::error_code ec;
    fs::remove_all(g_scratch, ec);
    fs::create_directories(g_scratch);

    run_criterion(1, "advantage-normalization", advantage_normalization);
    run_criterion(2, "reduction-equivalences", reduction_equivalences);
    run_criterion(3, "gradient-oracle", gradient_oracle);
    run_criterion(4, "pairing-oracle", pairing_oracle);
    run_criterion(5, "weight-law-and-threshold", weight_law);
    run_criterion(6, "agreement-mechanism", agreement_mechanism);
    run_criterion(7, "training-progress", training_progress);
    run_criterion(8, "determinism", determinism);
    run_criterion(9, "ablation-plumbing", ablation_plumbing);

    if (g_failures > 0) {
        std::cout << g_failures << " criterion(s) failed\n";
        return 1;
    }
    std::cout << "all criteria passed\n";
    return 0;
}
