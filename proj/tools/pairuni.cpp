#include <CLI11.hpp>

#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <string>

#include "pairuni/pairuni.hpp"

namespace fs = std::filesystem;
using namespace pairuni;

namespace {

void warn_to_stderr(const std::string& m) { std::cerr << "warning: " << m << "\n"; }

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory '" + dir + "': " + ec.message());
}

// Exit codes: 0 ok, 2 schema or content, 3 configuration, 4 I/O.
int run_guarded(const std::function<int()>& body) {
    try {
        return body();
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const UnknownScorerError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}

struct CommonOpts {
    std::string config_path;
    std::string out_dir = "out";
    std::optional<std::uint64_t> seed;
};

RunConfig resolve_config(const CommonOpts& common, double default_lr = 0.0) {
    RunConfig run;
    if (default_lr > 0.0) run.grpo.lr = default_lr;
    if (!common.config_path.empty())
        apply_config(run, parse_flat_config(read_file(common.config_path),
                                            common.config_path));
    if (common.seed) run.seed = *common.seed;
    return run;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"understanding-generation pair construction and toy policy optimization"};
    app.require_subcommand(1);

    // ---- pair build -------------------------------------------------------
    auto* pair_cmd = app.add_subcommand("pair", "pair dataset commands");
    pair_cmd->require_subcommand(1);
    auto* build = pair_cmd->add_subcommand(
        "build", "construct the aligned + retrieved pair dataset");
    std::string und_path, gen_path, quad_path, resume_path;
    CommonOpts build_common;
    std::optional<std::size_t> opt_n, opt_k;
    std::optional<double> opt_delta;
    build->add_option("--und", und_path, "understanding feature JSONL")->required();
    build->add_option("--gen", gen_path, "generation feature JSONL")->required();
    build->add_option("--quadruples", quad_path, "quadruple JSONL")->required();
    build->add_option("--config", build_common.config_path, "flat key=value config file");
    build->add_option("--out", build_common.out_dir, "output directory");
    build->add_option("--seed", build_common.seed, "root seed override");
    build->add_option("--n", opt_n, "neighbors per generation item");
    build->add_option("--delta", opt_delta, "similarity threshold");
    build->add_option("--k", opt_k, "cluster count (0 = 5% heuristic)");
    build->add_option("--resume", resume_path, "reuse a saved cluster model");

    // ---- pair stats -------------------------------------------------------
    auto* stats = pair_cmd->add_subcommand("stats", "summarize a pair dataset");
    std::string stats_pairs;
    bool verify = false;
    double verify_delta = 0.6;
    stats->add_option("--pairs", stats_pairs, "pair dataset JSONL")->required();
    stats->add_flag("--verify", verify, "audit weight and threshold invariants");
    stats->add_option("--delta", verify_delta,
                      "threshold assumed by --verify (default 0.6)");

    // ---- train ------------------------------------------------------------
    auto* train_cmd =
        app.add_subcommand("train", "optimize the toy policy on a pair dataset");
    std::string train_pairs, objective_str = "pair-grpo";
    bool no_sim_weight = false;
    CommonOpts train_common;
    std::optional<std::size_t> opt_steps;
    train_cmd->add_option("--pairs", train_pairs, "pair dataset JSONL")->required();
    train_cmd->add_option("--config", train_common.config_path, "flat key=value config file");
    train_cmd->add_option("--objective", objective_str,
                          "vanilla, pairwise, or pair-grpo");
    train_cmd->add_flag("--no-sim-weight", no_sim_weight,
                        "force every pair weight to 1");
    train_cmd->add_option("--out", train_common.out_dir, "output directory");
    train_cmd->add_option("--seed", train_common.seed, "root seed override");
    train_cmd->add_option("--steps", opt_steps, "training steps override");

    // ---- agreement --------------------------------------------------------
    auto* agreement_cmd =
        app.add_subcommand("agreement", "gradient-agreement study across regimes");
    CommonOpts agree_common;
    std::optional<std::size_t> opt_agree_steps;
    agreement_cmd->add_option("--config", agree_common.config_path,
                              "flat key=value config file");
    agreement_cmd->add_option("--out", agree_common.out_dir, "output directory");
    agreement_cmd->add_option("--seed", agree_common.seed, "root seed override");
    agreement_cmd->add_option("--steps", opt_agree_steps, "study steps override");

    // ---- synth ------------------------------------------------------------
    auto* synth = app.add_subcommand(
        "synth", "emit a synthetic feature corpus with quadruples");
    SyntheticCorpusConfig synth_cfg;
    std::string synth_out = "data";
    synth->add_option("--out", synth_out, "output directory");
    synth->add_option("--seed", synth_cfg.seed, "corpus seed");
    synth->add_option("--clusters", synth_cfg.clusters, "cluster count");
    synth->add_option("--und-per-cluster", synth_cfg.und_per_cluster,
                      "understanding items per cluster");
    synth->add_option("--gen-per-cluster", synth_cfg.gen_per_cluster,
                      "generation items per cluster");
    synth->add_option("--dim", synth_cfg.dim, "feature dimension");
    synth->add_option("--jitter", synth_cfg.jitter, "gaussian jitter scale");

    CLI11_PARSE(app, argc, argv);

    if (*build) {
        return run_guarded([&]() -> int {
            RunConfig run = resolve_config(build_common);
            if (opt_n) run.pairing.n = *opt_n;
            if (opt_delta) run.pairing.delta = *opt_delta;
            if (opt_k) run.pairing.k = *opt_k;
            validate_run_config(run, warn_to_stderr);

            const auto und = load_features(und_path, Side::Understanding);
            const auto gen = load_features(gen_path, Side::Generation);
            const auto quads = load_quadruples(quad_path);

            PairingConfig pc = run.pairing;
            pc.seed = run.seed;

            std::optional<ClusterModel> reuse;
            if (!resume_path.empty()) {
                json j;
                try {
                    j = json::parse(read_file(resume_path));
                } catch (const json::exception& e) {
                    throw SchemaError(resume_path + ": " + e.what());
                }
                reuse = cluster_model_from_json(j);
            }

            StubAugmentationClient client;
            const auto ds =
                build_pair_dataset(und, gen, quads, pc, client, warn_to_stderr,
                                   reuse ? &*reuse : nullptr);

            ensure_dir(build_common.out_dir);
            write_pair_dataset(ds, build_common.out_dir + "/pairs.jsonl",
                               build_common.out_dir + "/stats.json");
            atomic_write_file(build_common.out_dir + "/cluster_model.json",
                              cluster_model_to_json(ds.model).dump(2) + "\n");
            atomic_write_file(build_common.out_dir + "/config_echo.cfg",
                              render_config(run));
            std::cout << ds.stats.dump(2) << "\n";
            return 0;
        });
    }

    if (*stats) {
        return run_guarded([&]() -> int {
            const auto records = load_pair_records(stats_pairs);
            std::size_t aligned = 0, retrieved = 0;
            double wmin = 1.0, wmax = 0.0, wsum = 0.0;
            for (const auto& r : records) {
                (r.pair.kind == PairKind::Aligned ? aligned : retrieved) += 1;
                wmin = std::min(wmin, r.pair.weight);
                wmax = std::max(wmax, r.pair.weight);
                wsum += r.pair.weight;
            }
            json summary = {
                {"counts",
                 {{"aligned", aligned}, {"retrieved", retrieved}, {"total", records.size()}}},
                {"similarity_histogram", similarity_histogram(records)}};
            if (!records.empty())
                summary["weights"] = {
                    {"min", wmin},
                    {"max", wmax},
                    {"mean", wsum / static_cast<double>(records.size())}};

            int code = 0;
            if (verify) {
                const auto violations = verify_dataset(records, verify_delta);
                summary["verify"] = {{"delta", verify_delta}, {"violations", violations}};
                if (!violations.empty()) {
                    for (const auto& v : violations) std::cerr << "violation: " << v << "\n";
                    code = 2;
                }
            }
            std::cout << summary.dump(2) << "\n";
            return code;
        });
    }

    if (*train_cmd) {
        return run_guarded([&]() -> int {
            RunConfig run = resolve_config(train_common, /*default_lr=*/2.0);
            if (opt_steps) run.steps = *opt_steps;
            validate_run_config(run, warn_to_stderr);
            const auto objective = objective_kind_from_string(objective_str);
            if (no_sim_weight && objective == ObjectiveKind::Vanilla)
                throw ConfigError(
                    "--no-sim-weight cannot be combined with --objective vanilla");

            const auto records = load_pair_records(train_pairs);
            const auto tc = make_train_config(run, objective, !no_sim_weight);
            const auto result = train(records, tc);

            ensure_dir(train_common.out_dir);
            atomic_write_file(train_common.out_dir + "/training.csv", result.csv);
            atomic_write_file(train_common.out_dir + "/checkpoint.json",
                              policy_to_json(result.policy).dump(2) + "\n");
            atomic_write_file(train_common.out_dir + "/reward_curves.csv",
                              summarize_rewards(result.csv));
            atomic_write_file(
                train_common.out_dir + "/config_echo.cfg",
                render_config(run, {{"train.objective", to_string(objective)},
                                    {"train.sim_weight", no_sim_weight ? "false" : "true"}}));

            const auto& last = result.steps.back();
            std::cout << "trained " << result.steps.size() << " steps; final rewards und="
                      << format_double(last.mean_reward_und)
                      << " gen=" << format_double(last.mean_reward_gen) << "\n";
            return 0;
        });
    }

    if (*agreement_cmd) {
        return run_guarded([&]() -> int {
            RunConfig run = resolve_config(agree_common, /*default_lr=*/0.5);
            if (opt_agree_steps) run.agreement_steps = *opt_agree_steps;
            validate_run_config(run, warn_to_stderr);

            const auto result = run_agreement_study(make_agreement_config(run));

            ensure_dir(agree_common.out_dir);
            atomic_write_file(agree_common.out_dir + "/agreement.csv",
                              agreement_to_csv(result.records));
            atomic_write_file(agree_common.out_dir + "/agreement_summary.json",
                              result.summary.dump(2) + "\n");
            atomic_write_file(agree_common.out_dir + "/config_echo.cfg",
                              render_config(run));
            std::cout << result.summary.dump(2) << "\n";
            return 0;
        });
    }

    return run_guarded([&]() -> int {  // synth
        const auto corpus = make_synthetic_corpus(synth_cfg);
        ensure_dir(synth_out);
        write_synthetic_corpus(corpus, synth_out);
        std::cout << "wrote " << corpus.und.size() << " und + " << corpus.gen.size()
                  << " gen features and " << corpus.quadruples.size()
                  << " quadruples to " << synth_out << "\n";
        return 0;
    });
}
