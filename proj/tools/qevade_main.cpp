#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "qevade/attack.hpp"
#include "qevade/defense.hpp"
#include "qevade/errors.hpp"
#include "qevade/manifest.hpp"
#include "qevade/model_io.hpp"
#include "qevade/pipeline.hpp"
#include "qevade/qlearn.hpp"
#include "qevade/report_io.hpp"
#include "qevade/rng.hpp"

namespace fs = std::filesystem;
using namespace qevade;

namespace {

// Relative output paths resolve under $QEVADE_OUT when it is set.
fs::path resolve_out(const std::string& path) {
    fs::path p(path);
    if (p.is_absolute()) return p;
    if (const char* root = std::getenv("QEVADE_OUT")) {
        return fs::path(root) / p;
    }
    return p;
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

void write_file(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
}

std::vector<std::size_t> parse_budgets(const std::string& text) {
    // comma list, each item either N or A..B
    std::vector<std::size_t> budgets;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t dots = item.find("..");
        if (dots == std::string::npos) {
            budgets.push_back(std::stoull(item));
        } else {
            std::size_t lo = std::stoull(item.substr(0, dots));
            std::size_t hi = std::stoull(item.substr(dots + 2));
            for (std::size_t b = lo; b <= hi; ++b) budgets.push_back(b);
        }
    }
    if (budgets.empty()) throw Error("no budgets given");
    return budgets;
}

std::vector<DetectorModel> load_models_arg(const std::string& arg) {
    std::vector<DetectorModel> models;
    if (fs::is_directory(arg)) {
        std::vector<fs::path> files;
        for (const auto& entry : fs::directory_iterator(arg)) {
            const std::string name = entry.path().filename().string();
            if (name.ends_with(".json") && !name.ends_with(".metrics.json")) {
                files.push_back(entry.path());
            }
        }
        std::sort(files.begin(), files.end());
        for (const fs::path& file : files) models.push_back(load_model_file(file.string()));
    } else {
        models.push_back(load_model_file(arg));
    }
    if (models.empty()) throw Error("no model files found in " + arg);
    return models;
}

std::vector<AttackPolicy> load_policies_arg(const std::string& arg) {
    std::vector<AttackPolicy> policies;
    if (fs::is_directory(arg)) {
        std::vector<fs::path> files;
        for (const auto& entry : fs::directory_iterator(arg)) {
            if (entry.path().extension() == ".json") files.push_back(entry.path());
        }
        std::sort(files.begin(), files.end());
        for (const fs::path& file : files) {
            policies.push_back(load_policy_file(file.string()));
        }
    } else {
        policies.push_back(load_policy_file(arg));
    }
    if (policies.empty()) throw Error("no policy files found in " + arg);
    return policies;
}

// Finds the policy trained against the given model, preferring a matching
// source_model_id and falling back to list position.
const AttackPolicy& policy_for(const std::vector<AttackPolicy>& policies,
                               const std::string& model_id, std::size_t index) {
    for (const AttackPolicy& p : policies) {
        if (p.source_model_id == model_id) return p;
    }
    return policies.at(index);
}

int run_ingest(int label, const std::string& manifests, const std::string& vocab_path,
               const std::string& out_csv) {
    auto vocab = std::make_shared<Vocabulary>(Vocabulary::load_file(vocab_path));
    IngestResult result = ingest_corpus(manifests, vocab, label);
    fs::path out = resolve_out(out_csv);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    save_dataset_csv_file(result.dataset, out.string());
    std::cout << "ingested " << result.dataset.size() << " manifests -> " << out << "\n";
    for (const IngestSkip& skip : result.skipped) {
        std::cerr << "skipped " << skip.file << ": " << skip.reason << "\n";
    }
    return 0;
}

int run_synth(const SynthSpec& spec, const std::string& out_csv) {
    LabeledDataset dataset = synth_dataset(spec);
    fs::path out = resolve_out(out_csv);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    save_dataset_csv_file(dataset, out.string());
    std::cout << "wrote " << dataset.size() << " samples x " << dataset.feature_count()
              << " features -> " << out << "\n";
    return 0;
}

int run_rank_features(const std::string& data, std::size_t k, std::uint64_t seed,
                      const std::string& out_dir) {
    LabeledDataset dataset = load_dataset_csv_file(data);
    RankArtifacts artifacts = rank_features(dataset, k, seed);
    fs::path out = resolve_out(out_dir);
    fs::create_directories(out);
    write_file(out / "ranking.json",
               ranking_to_json(artifacts.ranking, dataset.vocabulary().names()));
    std::ostringstream table;
    write_ranking_text(artifacts.ranking, dataset.vocabulary().names(), k, table);
    write_file(out / "ranking.txt", table.str());
    save_dataset_csv_file(artifacts.reduced, (out / "reduced.csv").string());
    std::cout << table.str();
    std::cout << "wrote ranking + reduced dataset -> " << out << "\n";
    return 0;
}

int run_train(const std::string& data, const std::vector<std::string>& algorithm_names,
              std::uint64_t seed, std::size_t cv_folds, const std::string& eval_csv,
              const std::string& out_dir) {
    LabeledDataset train = load_dataset_csv_file(data);
    fs::path out = resolve_out(out_dir);
    fs::create_directories(out);
    for (const std::string& name : algorithm_names) {
        auto algorithm = algorithm_from_name(name);
        if (!algorithm) throw Error("unknown algorithm: " + name);
        DetectorSpec spec = DetectorSpec::defaults(
            *algorithm, derive_seed(seed, "train:" + algorithm_id(*algorithm)));
        DetectorModel model = train_model(spec, train);
        save_model_file(model, (out / (model.id() + ".json")).string());
        std::cout << model.id() << ": trained on " << train.size() << " samples";
        if (!eval_csv.empty()) {
            LabeledDataset test =
                load_dataset_csv_file(eval_csv, &train.vocabulary());
            Metrics m = evaluate(model, test);
            std::cout << ", test accuracy " << m.accuracy;
        }
        if (cv_folds >= 2) {
            CrossValidation cv = cross_validate(spec, train, cv_folds, seed);
            std::cout << ", " << cv_folds << "-fold mean accuracy " << cv.mean_accuracy;
        }
        std::cout << "\n";
    }
    return 0;
}

int run_attack(const std::string& mode_name, const std::string& budgets_arg,
               const std::string& models_arg, const std::string& malware_csv,
               const std::string& policies_arg, std::size_t episodes,
               std::uint64_t seed, const EnvConfig& env, const std::string& out_dir) {
    auto mode = attack_mode_from_name(mode_name);
    if (!mode) throw Error("mode must be spa or mpa");
    std::vector<std::size_t> budgets = parse_budgets(budgets_arg);
    std::vector<DetectorModel> models = load_models_arg(models_arg);
    LabeledDataset malware = load_dataset_csv_file(malware_csv);

    fs::path out = resolve_out(out_dir);
    fs::create_directories(out);

    std::vector<AttackPolicy> policies;
    if (!policies_arg.empty()) {
        policies = load_policies_arg(policies_arg);
    } else {
        // white-box setup: train one Q-table against each target model
        fs::create_directories(out / "qtables");
        fs::create_directories(out / "policies");
        LabeledDataset pool = malware.filter_label(1);
        for (const DetectorModel& model : models) {
            QTrainResult trained =
                train_qtable(env, model, pool, episodes, EpsilonSchedule{},
                             derive_seed(seed, "qtable:" + model.id()));
            save_qtable_file(trained.table,
                             (out / "qtables" / (model.id() + ".json")).string());
            AttackPolicy policy = extract_policy(trained.table);
            save_policy_file(policy,
                             (out / "policies" / (model.id() + ".json")).string());
            policies.push_back(std::move(policy));
        }
    }

    std::vector<AttackReport> reports;
    for (std::size_t i = 0; i < models.size(); ++i) {
        for (std::size_t budget : budgets) {
            AttackReport report =
                *mode == AttackMode::SPA
                    ? spa_attack(policy_for(policies, models[i].id(), i), models[i],
                                 malware, budget, env.benign_threshold, env.action_mode)
                    : mpa_attack(policies, models[i], malware, budget,
                                 env.benign_threshold, env.action_mode);
            std::string name = models[i].id() + "_" +
                               std::string(attack_mode_name(*mode)) + "_b" +
                               std::to_string(budget) + ".json";
            save_attack_report_file(report, (out / name).string());
            std::cout << models[i].id() << " " << attack_mode_name(*mode) << " budget "
                      << budget << ": fooling rate " << report.fooling_rate << "%\n";
            reports.push_back(std::move(report));
        }
    }
    std::ostringstream csv;
    write_attack_summary_csv(reports, csv);
    write_file(out / "summary.csv", csv.str());
    return 0;
}

int run_defend(const std::string& models_arg, const std::string& policies_arg,
               const std::string& train_csv, const std::string& test_csv,
               const std::string& budgets_arg, const std::string& mode_names,
               double pool_fraction, std::uint64_t seed, const EnvConfig& env,
               const std::string& out_dir) {
    std::vector<DetectorModel> models = load_models_arg(models_arg);
    std::vector<AttackPolicy> all_policies = load_policies_arg(policies_arg);
    std::vector<AttackPolicy> policies;
    for (std::size_t i = 0; i < models.size(); ++i) {
        policies.push_back(policy_for(all_policies, models[i].id(), i));
    }
    LabeledDataset train = load_dataset_csv_file(train_csv);
    LabeledDataset test = load_dataset_csv_file(test_csv, &train.vocabulary());
    std::vector<std::size_t> budgets = parse_budgets(budgets_arg);

    std::vector<AttackMode> modes;
    std::stringstream ss(mode_names);
    std::string item;
    while (std::getline(ss, item, ',')) {
        auto mode = attack_mode_from_name(item);
        if (!mode) throw Error("unknown mode: " + item);
        modes.push_back(*mode);
    }

    fs::path out = resolve_out(out_dir);
    fs::create_directories(out);

    LabeledDataset train_malware = train.filter_label(1);
    DefenseReport combined;
    for (AttackMode mode : modes) {
        AdversarialPool pool;
        for (std::size_t i = 0; i < models.size(); ++i) {
            AttackReport harvest =
                mode == AttackMode::SPA
                    ? spa_attack(policies[i], models[i], train_malware, budgets.back(),
                                 env.benign_threshold, env.action_mode)
                    : mpa_attack(policies, models[i], train_malware, budgets.back(),
                                 env.benign_threshold, env.action_mode);
            pool.merge(collect_adversarial(harvest));
        }
        std::size_t cap = static_cast<std::size_t>(
            pool_fraction * static_cast<double>(train_malware.size()));
        pool = subsample_pool(pool, std::max<std::size_t>(cap, 1),
                              derive_seed(seed, "defense-pool"));
        std::string mode_dir(attack_mode_name(mode));
        std::transform(mode_dir.begin(), mode_dir.end(), mode_dir.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        fs::create_directories(out / mode_dir / "models");
        std::vector<DetectorModel> retrained;
        for (const DetectorModel& model : models) {
            DetectorModel defended = retrain_with_adversarial(
                model.spec(), train, pool,
                derive_seed(seed, "defense:" + model.id() + ":" + mode_dir));
            save_model_file(defended,
                            (out / mode_dir / "models" / (defended.id() + ".json")).string());
            retrained.push_back(std::move(defended));
        }
        AttackMode mode_span[] = {mode};
        DefenseReport report =
            defense_evaluate(models, retrained, policies, test, budgets, mode_span,
                             env.benign_threshold, env.action_mode);
        combined.rows.insert(combined.rows.end(), report.rows.begin(), report.rows.end());
    }

    save_defense_report_file(combined, (out / "report.json").string());
    std::ostringstream csv;
    write_defense_csv(combined, csv);
    write_file(out / "report.csv", csv.str());
    std::cout << csv.str();
    return 0;
}

int run_report(const std::string& run_dir, const std::string& formats) {
    EmitOptions options;
    options.csv = formats.find("csv") != std::string::npos;
    options.svg = formats.find("svg") != std::string::npos;
    if (!options.csv && !options.svg) throw Error("format must include csv and/or svg");
    std::vector<fs::path> written = emit_reports(resolve_out(run_dir), options);
    for (const fs::path& path : written) std::cout << "wrote " << path << "\n";
    return 0;
}

int run_pipeline_cmd(const std::string& config_path, const std::string& out_override,
                     std::optional<std::uint64_t> seed_override,
                     std::optional<std::size_t> episodes_override) {
    RunConfig config = RunConfig::from_json(read_file(config_path));
    if (!out_override.empty()) config.out_dir = resolve_out(out_override);
    else if (!config.out_dir.empty()) config.out_dir = resolve_out(config.out_dir.string());
    if (seed_override) config.master_seed = *seed_override;
    if (episodes_override) config.episodes = *episodes_override;
    run_pipeline(config);
    std::cout << "pipeline complete -> " << config.out_dir << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "qevade: reinforcement-learning evasion attacks and adversarial retraining "
        "for permission-based Android malware detectors"};
    app.require_subcommand(1);

    // ingest
    auto* ingest = app.add_subcommand("ingest", "Build a dataset CSV from manifest files");
    int ingest_label = 0;
    std::string ingest_dir, ingest_vocab, ingest_out;
    ingest->add_option("--label", ingest_label, "Class label (1 = malware, 0 = benign)")
        ->required()
        ->check(CLI::Range(0, 1));
    ingest->add_option("--manifests", ingest_dir, "Directory of decoded manifest XML files")
        ->required();
    ingest->add_option("--vocab", ingest_vocab, "Master permission list (one per line)")
        ->required();
    ingest->add_option("--out", ingest_out, "Output CSV path")->required();

    // synth
    auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset CSV");
    SynthSpec synth_spec{200, 200, 10, 4, 0.05, 7};
    std::string synth_out;
    synth->add_option("--benign", synth_spec.n_benign, "Benign sample count");
    synth->add_option("--malware", synth_spec.n_malware, "Malware sample count");
    synth->add_option("--features", synth_spec.k, "Feature count");
    synth->add_option("--informative", synth_spec.informative, "Label-correlated features");
    synth->add_option("--noise", synth_spec.noise, "Bit-flip probability");
    synth->add_option("--seed", synth_spec.seed, "Generator seed");
    synth->add_option("--out", synth_out, "Output CSV path")->required();

    // rank-features
    auto* rank = app.add_subcommand("rank-features",
                                    "Rank features by importance and reduce the dataset");
    std::string rank_data, rank_out;
    std::size_t rank_k = 10;
    std::uint64_t rank_seed = 0;
    rank->add_option("--data", rank_data, "Dataset CSV")->required();
    rank->add_option("--k", rank_k, "Features to keep");
    rank->add_option("--seed", rank_seed, "Ranking forest seed");
    rank->add_option("--out", rank_out, "Output directory")->required();

    // train
    auto* train = app.add_subcommand("train", "Train detection models");
    std::string train_data, train_out, train_eval;
    std::vector<std::string> train_algorithms{"LR", "SVM", "DT", "RF",
                                              "AB", "GB",  "ET", "DNN"};
    std::uint64_t train_seed = 0;
    std::size_t train_cv = 0;
    train->add_option("--data", train_data, "Training CSV")->required();
    train->add_option("--algorithms", train_algorithms, "Subset of LR,SVM,DT,RF,AB,GB,ET,DNN")
        ->delimiter(',');
    train->add_option("--seed", train_seed, "Master training seed");
    train->add_option("--cv", train_cv, "Also run k-fold cross validation");
    train->add_option("--eval", train_eval, "Optional held-out CSV to score");
    train->add_option("--out", train_out, "Output directory for model files")->required();

    // shared environment options for attack/defend
    EnvConfig env;
    auto add_env_options = [&env](CLI::App* cmd) {
        cmd->add_option("--w1", env.w1, "Reward weight on benign probability");
        cmd->add_option("--w2", env.w2, "Penalty weight per modification");
        cmd->add_option("--w3", env.w3, "Goal bonus weight");
        cmd->add_option("--gamma", env.gamma, "Discount factor");
        cmd->add_option("--max-steps", env.max_steps, "Episode cap (0 = feature count)");
        cmd->add_option("--threshold", env.benign_threshold, "Benign decision threshold");
        cmd->add_flag_callback(
            "--flip-mode", [&env]() { env.action_mode = ActionMode::Flip; },
            "Toggle bits instead of add-only");
    };

    // attack
    auto* attack = app.add_subcommand("attack", "Run evasion attacks against models");
    std::string attack_mode = "spa", attack_budgets = "1..5";
    std::string attack_models, attack_malware, attack_policies, attack_out;
    std::size_t attack_episodes = 100000;
    std::uint64_t attack_seed = 0;
    attack->add_option("--mode", attack_mode, "spa or mpa")->required();
    attack->add_option("--budget,--budgets", attack_budgets,
                       "Budgets, e.g. 5 or 1..5 or 1,3,5");
    attack->add_option("--models", attack_models, "Model file or directory")->required();
    attack->add_option("--malware", attack_malware, "Malware CSV (labels all 1)")
        ->required();
    attack->add_option("--policies", attack_policies,
                       "Pretrained policy file/directory (trained on the fly if absent)");
    attack->add_option("--episodes", attack_episodes, "Q-table training episodes");
    attack->add_option("--seed", attack_seed, "Q-table training seed");
    attack->add_option("--out", attack_out, "Output directory")->required();
    add_env_options(attack);

    // defend
    auto* defend = app.add_subcommand("defend", "Adversarially retrain and re-evaluate");
    std::string defend_models, defend_policies, defend_train, defend_test;
    std::string defend_budgets = "1..5", defend_modes = "spa";
    std::uint64_t defend_seed = 0;
    std::string defend_out;
    defend->add_option("--models", defend_models, "Model file or directory")->required();
    defend->add_option("--policies", defend_policies, "Policy file or directory")
        ->required();
    defend->add_option("--train", defend_train, "Training CSV")->required();
    defend->add_option("--test", defend_test, "Held-out test CSV")->required();
    defend->add_option("--budget,--budgets", defend_budgets, "Budgets");
    defend->add_option("--modes", defend_modes, "spa, mpa or spa,mpa");
    double defend_pool_fraction = 0.15;
    defend->add_option("--pool-fraction", defend_pool_fraction,
                       "Harvested variants kept, as a share of the malware count");
    defend->add_option("--seed", defend_seed, "Retraining seed");
    defend->add_option("--out", defend_out, "Output directory")->required();
    add_env_options(defend);

    // report
    auto* report = app.add_subcommand("report", "Emit CSV/SVG reports for a run directory");
    std::string report_run, report_formats = "csv,svg";
    report->add_option("--run", report_run, "Run directory")->required();
    report->add_option("--format", report_formats, "csv, svg or csv,svg");

    // pipeline
    auto* pipeline = app.add_subcommand("pipeline", "Run the full batch pipeline");
    std::string pipeline_config, pipeline_out;
    std::uint64_t pipeline_seed = 0;
    std::size_t pipeline_episodes = 0;
    bool pipeline_seed_set = false, pipeline_episodes_set = false;
    pipeline->add_option("--config", pipeline_config, "JSON config file")->required();
    pipeline->add_option("--out", pipeline_out, "Override the output directory");
    pipeline->add_option("--seed", pipeline_seed, "Override the master seed")
        ->trigger_on_parse()
        ->each([&](const std::string&) { pipeline_seed_set = true; });
    pipeline->add_option("--episodes", pipeline_episodes, "Override the episode budget")
        ->trigger_on_parse()
        ->each([&](const std::string&) { pipeline_episodes_set = true; });

    CLI11_PARSE(app, argc, argv);

    try {
        if (*ingest) return run_ingest(ingest_label, ingest_dir, ingest_vocab, ingest_out);
        if (*synth) return run_synth(synth_spec, synth_out);
        if (*rank) return run_rank_features(rank_data, rank_k, rank_seed, rank_out);
        if (*train) {
            return run_train(train_data, train_algorithms, train_seed, train_cv,
                             train_eval, train_out);
        }
        if (*attack) {
            return run_attack(attack_mode, attack_budgets, attack_models, attack_malware,
                              attack_policies, attack_episodes, attack_seed, env,
                              attack_out);
        }
        if (*defend) {
            return run_defend(defend_models, defend_policies, defend_train, defend_test,
                              defend_budgets, defend_modes, defend_pool_fraction,
                              defend_seed, env, defend_out);
        }
        if (*report) return run_report(report_run, report_formats);
        if (*pipeline) {
            return run_pipeline_cmd(
                pipeline_config, pipeline_out,
                pipeline_seed_set ? std::optional<std::uint64_t>(pipeline_seed)
                                  : std::nullopt,
                pipeline_episodes_set ? std::optional<std::size_t>(pipeline_episodes)
                                      : std::nullopt);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
