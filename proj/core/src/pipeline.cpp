#include "qevade/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "qevade/attack.hpp"
#include "qevade/defense.hpp"
#include "qevade/errors.hpp"
#include "qevade/manifest.hpp"
#include "qevade/model_io.hpp"
#include "qevade/qlearn.hpp"
#include "qevade/report_io.hpp"
#include "qevade/rng.hpp"

namespace qevade {

using nlohmann::json;
namespace fs = std::filesystem;

// ---- config ---------------------------------------------------------------------

void RunConfig::validate() const {
    if (budgets.empty()) throw ConfigError("budget list must not be empty");
    std::size_t previous = 0;
    for (std::size_t b : budgets) {
        if (b == 0) throw ConfigError("budgets must be positive");
        if (b <= previous) throw ConfigError("budgets must be strictly increasing");
        previous = b;
    }
    if (algorithms.empty()) throw ConfigError("algorithm list must not be empty");
    if (!run_spa && !run_mpa) throw ConfigError("at least one attack mode required");
    if (episodes == 0) throw ConfigError("episode budget must be positive");
    if (feature_k == 0) throw ConfigError("feature_k must be positive");
    if (n_folds < 2) throw ConfigError("n_folds must be at least 2");
    if (defense_pool_fraction <= 0.0 || defense_pool_fraction > 1.0) {
        throw ConfigError("defense_pool_fraction must lie in (0, 1]");
    }
    if (out_dir.empty()) throw ConfigError("output directory required");
    env.validate();
    if (source.kind == DatasetSource::Kind::Synth) source.synth.validate();
}

std::uint64_t RunConfig::stage_seed(const std::string& label) const {
    auto it = seed_overrides.find(label);
    if (it != seed_overrides.end()) return it->second;
    return derive_seed(master_seed, label);
}

namespace {

EnvConfig env_from_json(const json& j) {
    EnvConfig env;
    env.w1 = j.value("w1", env.w1);
    env.w2 = j.value("w2", env.w2);
    env.w3 = j.value("w3", env.w3);
    env.gamma = j.value("gamma", env.gamma);
    env.max_steps = j.value("max_steps", env.max_steps);
    env.benign_threshold = j.value("benign_threshold", env.benign_threshold);
    std::string mode = j.value("action_mode", "add-only");
    if (mode == "add-only") {
        env.action_mode = ActionMode::AddOnly;
    } else if (mode == "flip") {
        env.action_mode = ActionMode::Flip;
    } else {
        throw ConfigError("unknown action_mode: " + mode);
    }
    return env;
}

json env_to_json(const EnvConfig& env) {
    return {{"w1", env.w1},
            {"w2", env.w2},
            {"w3", env.w3},
            {"gamma", env.gamma},
            {"max_steps", env.max_steps},
            {"action_mode", env.action_mode == ActionMode::Flip ? "flip" : "add-only"},
            {"benign_threshold", env.benign_threshold}};
}

}  // namespace

RunConfig RunConfig::from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }

    RunConfig config;
    config.master_seed = j.value("master_seed", std::uint64_t{0});

    if (j.contains("dataset")) {
        const json& d = j.at("dataset");
        if (d.contains("synth")) {
            const json& s = d.at("synth");
            config.source.kind = DatasetSource::Kind::Synth;
            config.source.synth.n_benign = s.value("n_benign", std::size_t{200});
            config.source.synth.n_malware = s.value("n_malware", std::size_t{200});
            config.source.synth.k = s.value("k", std::size_t{10});
            config.source.synth.informative = s.value("informative", std::size_t{4});
            config.source.synth.noise = s.value("noise", 0.05);
            config.source.synth_seed_explicit = s.contains("seed");
            config.source.synth.seed = s.value("seed", std::uint64_t{0});
        } else if (d.contains("csv")) {
            config.source.kind = DatasetSource::Kind::Csv;
            config.source.csv_path = d.at("csv").get<std::string>();
        } else if (d.contains("manifests")) {
            const json& m = d.at("manifests");
            config.source.kind = DatasetSource::Kind::Manifests;
            config.source.malware_manifest_dir = m.at("malware_dir").get<std::string>();
            config.source.benign_manifest_dir = m.at("benign_dir").get<std::string>();
            config.source.vocab_path = m.at("vocab").get<std::string>();
        } else {
            throw ConfigError("dataset must be one of synth / csv / manifests");
        }
    }

    config.feature_k = j.value("feature_k", std::size_t{10});
    if (j.contains("algorithms")) {
        config.algorithms.clear();
        for (const json& name : j.at("algorithms")) {
            auto algorithm = algorithm_from_name(name.get<std::string>());
            if (!algorithm) {
                throw ConfigError("unknown algorithm: " + name.get<std::string>());
            }
            config.algorithms.push_back(*algorithm);
        }
    }
    if (j.contains("env")) config.env = env_from_json(j.at("env"));
    config.episodes = j.value("episodes", std::size_t{100000});
    if (j.contains("budgets")) {
        config.budgets = j.at("budgets").get<std::vector<std::size_t>>();
    }
    if (j.contains("modes")) {
        config.run_spa = false;
        config.run_mpa = false;
        for (const json& name : j.at("modes")) {
            auto mode = attack_mode_from_name(name.get<std::string>());
            if (!mode) throw ConfigError("unknown mode: " + name.get<std::string>());
            (*mode == AttackMode::SPA ? config.run_spa : config.run_mpa) = true;
        }
    }
    config.defense = j.value("defense", true);
    config.defense_pool_fraction = j.value("defense_pool_fraction", 0.15);
    if (j.contains("out_dir")) config.out_dir = j.at("out_dir").get<std::string>();
    config.n_folds = j.value("n_folds", std::size_t{5});
    if (j.contains("seed_overrides")) {
        for (const auto& [label, seed] : j.at("seed_overrides").items()) {
            config.seed_overrides[label] = seed.get<std::uint64_t>();
        }
    }
    return config;
}

std::string RunConfig::to_json() const {
    json j;
    switch (source.kind) {
        case DatasetSource::Kind::Synth:
            j["dataset"]["synth"] = {{"n_benign", source.synth.n_benign},
                                     {"n_malware", source.synth.n_malware},
                                     {"k", source.synth.k},
                                     {"informative", source.synth.informative},
                                     {"noise", source.synth.noise},
                                     {"seed", source.synth.seed}};
            break;
        case DatasetSource::Kind::Csv:
            j["dataset"]["csv"] = source.csv_path;
            break;
        case DatasetSource::Kind::Manifests:
            j["dataset"]["manifests"] = {{"malware_dir", source.malware_manifest_dir},
                                         {"benign_dir", source.benign_manifest_dir},
                                         {"vocab", source.vocab_path}};
            break;
    }
    j["feature_k"] = feature_k;
    json names = json::array();
    for (Algorithm a : algorithms) names.push_back(std::string(algorithm_name(a)));
    j["algorithms"] = std::move(names);
    j["env"] = env_to_json(env);
    j["episodes"] = episodes;
    j["budgets"] = budgets;
    json modes = json::array();
    if (run_spa) modes.push_back("SPA");
    if (run_mpa) modes.push_back("MPA");
    j["modes"] = std::move(modes);
    j["defense"] = defense;
    j["defense_pool_fraction"] = defense_pool_fraction;
    j["master_seed"] = master_seed;
    j["n_folds"] = n_folds;
    if (!seed_overrides.empty()) {
        json overrides;
        for (const auto& [label, seed] : seed_overrides) overrides[label] = seed;
        j["seed_overrides"] = std::move(overrides);
    }
    return j.dump(2) + "\n";
}

// ---- feature ranking ---------------------------------------------------------------

RankArtifacts rank_features(const LabeledDataset& dataset, std::size_t k,
                            std::uint64_t seed) {
    if (k > dataset.feature_count()) {
        throw IndexOutOfRange("feature_k exceeds the vocabulary size");
    }
    DetectorModel forest = train_model(DetectorSpec::defaults(Algorithm::RF, seed), dataset);
    RankArtifacts artifacts;
    artifacts.ranking = feature_importance(forest);
    artifacts.top = select_top_k(artifacts.ranking, k);
    if (k == dataset.feature_count()) {
        artifacts.reduced = dataset;  // ranking only, keep column order
    } else {
        artifacts.reduced = reduce_to_features(dataset, artifacts.top);
    }
    return artifacts;
}

// ---- pipeline ---------------------------------------------------------------------

namespace {

[[noreturn]] void stage_fail(const std::string& stage, const std::string& what) {
    throw Error("[stage " + stage + "] " + what);
}

template <typename Fn>
auto run_stage(const std::string& stage, Fn&& fn) {
    try {
        return fn();
    } catch (const Error& e) {
        stage_fail(stage, e.what());
    } catch (const std::exception& e) {
        stage_fail(stage, e.what());
    }
}

void write_text(const fs::path& path, const std::string& text) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
}

json metrics_to_json(const DetectorModel& model, const Metrics& metrics) {
    return {{"model_id", model.id()},
            {"algorithm", std::string(algorithm_name(model.spec().algorithm))},
            {"accuracy", metrics.accuracy},
            {"tp", metrics.tp},
            {"fp", metrics.fp},
            {"tn", metrics.tn},
            {"fn", metrics.fn}};
}

LabeledDataset resolve_dataset(const RunConfig& config) {
    switch (config.source.kind) {
        case DatasetSource::Kind::Synth: {
            SynthSpec spec = config.source.synth;
            if (!config.source.synth_seed_explicit) {
                spec.seed = config.stage_seed("synth");
            }
            return synth_dataset(spec);
        }
        case DatasetSource::Kind::Csv:
            return load_dataset_csv_file(config.source.csv_path);
        case DatasetSource::Kind::Manifests: {
            auto vocab = std::make_shared<Vocabulary>(
                Vocabulary::load_file(config.source.vocab_path));
            IngestResult malware =
                ingest_corpus(config.source.malware_manifest_dir, vocab, 1);
            IngestResult benign =
                ingest_corpus(config.source.benign_manifest_dir, vocab, 0);
            return malware.dataset.with_extra_samples(benign.dataset.samples());
        }
    }
    throw ConfigError("unhandled dataset source");
}

}  // namespace

void run_pipeline(const RunConfig& config) {
    config.validate();
    const fs::path out = config.out_dir;
    fs::create_directories(out);
    write_text(out / "config.json", config.to_json());

    // dataset
    LabeledDataset full = run_stage("dataset", [&] { return resolve_dataset(config); });
    run_stage("dataset", [&] {
        fs::create_directories(out / "dataset");
        save_dataset_csv_file(full, (out / "dataset" / "full.csv").string());
        return 0;
    });
    if (config.feature_k > full.feature_count()) {
        stage_fail("dataset", "feature_k exceeds the dataset's vocabulary size");
    }

    // split: fold 0 of a stratified k-fold is the held-out test set
    FoldAssignment folds = run_stage("split", [&] {
        return split_kfold(full, config.n_folds, config.stage_seed("split"));
    });
    LabeledDataset train = full.subset(folds.complement_indices(0));
    LabeledDataset test = full.subset(folds.fold_indices(0));
    run_stage("split", [&] {
        save_dataset_csv_file(train, (out / "dataset" / "train.csv").string());
        save_dataset_csv_file(test, (out / "dataset" / "test.csv").string());
        return 0;
    });

    // feature selection on the training split only
    RankArtifacts ranked = run_stage("feature-select", [&] {
        return rank_features(train, config.feature_k, config.stage_seed("feature-select"));
    });
    LabeledDataset train_reduced = ranked.reduced;
    LabeledDataset test_reduced =
        config.feature_k == full.feature_count()
            ? test
            : reduce_to_features(test, ranked.top);
    run_stage("feature-select", [&] {
        write_text(out / "features" / "ranking.json",
                   ranking_to_json(ranked.ranking, train.vocabulary().names()));
        std::ostringstream table;
        write_ranking_text(ranked.ranking, train.vocabulary().names(), config.feature_k,
                           table);
        write_text(out / "features" / "ranking.txt", table.str());
        save_dataset_csv_file(train_reduced,
                              (out / "dataset" / "train_reduced.csv").string());
        save_dataset_csv_file(test_reduced,
                              (out / "dataset" / "test_reduced.csv").string());
        return 0;
    });

    // detector zoo
    std::vector<DetectorModel> models;
    run_stage("train", [&] {
        fs::create_directories(out / "models");
        for (Algorithm algorithm : config.algorithms) {
            DetectorSpec spec = DetectorSpec::defaults(
                algorithm, config.stage_seed("train:" + algorithm_id(algorithm)));
            DetectorModel model = train_model(spec, train_reduced);
            Metrics metrics = evaluate(model, test_reduced, config.env.benign_threshold);
            save_model_file(model, (out / "models" / (model.id() + ".json")).string());
            write_text(out / "models" / (model.id() + ".metrics.json"),
                       metrics_to_json(model, metrics).dump(2) + "\n");
            models.push_back(std::move(model));
        }
        return 0;
    });

    // agent training (one Q-table per target model)
    LabeledDataset train_malware = train_reduced.filter_label(1);
    LabeledDataset test_malware = test_reduced.filter_label(1);
    std::vector<AttackPolicy> policies;
    run_stage("qtable", [&] {
        fs::create_directories(out / "qtables");
        fs::create_directories(out / "policies");
        for (const DetectorModel& model : models) {
            QTrainResult trained = train_qtable(
                config.env, model, train_malware, config.episodes, EpsilonSchedule{},
                config.stage_seed("qtable:" + model.id()));
            save_qtable_file(trained.table,
                             (out / "qtables" / (model.id() + ".json")).string());
            AttackPolicy policy = extract_policy(trained.table);
            save_policy_file(policy, (out / "policies" / (model.id() + ".json")).string());
            policies.push_back(std::move(policy));
        }
        return 0;
    });

    // attacks on the held-out malware
    std::vector<AttackMode> modes;
    if (config.run_spa) modes.push_back(AttackMode::SPA);
    if (config.run_mpa) modes.push_back(AttackMode::MPA);
    run_stage("attack", [&] {
        fs::create_directories(out / "attacks");
        for (std::size_t i = 0; i < models.size(); ++i) {
            for (AttackMode mode : modes) {
                for (std::size_t budget : config.budgets) {
                    AttackReport report =
                        mode == AttackMode::SPA
                            ? spa_attack(policies[i], models[i], test_malware, budget,
                                         config.env.benign_threshold,
                                         config.env.action_mode)
                            : mpa_attack(policies, models[i], test_malware, budget,
                                         config.env.benign_threshold,
                                         config.env.action_mode);
                    std::string name = models[i].id() + "_" +
                                       std::string(attack_mode_name(mode)) + "_b" +
                                       std::to_string(budget) + ".json";
                    save_attack_report_file(report, (out / "attacks" / name).string());
                }
            }
        }
        return 0;
    });

    // adversarial retraining with frozen policies
    if (config.defense) {
        run_stage("defense", [&] {
            DefenseReport combined;
            std::size_t max_budget = config.budgets.back();
            for (AttackMode mode : modes) {
                // harvest new variants by attacking the training malware
                AdversarialPool pool;
                for (std::size_t i = 0; i < models.size(); ++i) {
                    AttackReport harvest =
                        mode == AttackMode::SPA
                            ? spa_attack(policies[i], models[i], train_malware,
                                         max_budget, config.env.benign_threshold,
                                         config.env.action_mode)
                            : mpa_attack(policies, models[i], train_malware, max_budget,
                                         config.env.benign_threshold,
                                         config.env.action_mode);
                    pool.merge(collect_adversarial(harvest));
                }
                std::size_t cap = static_cast<std::size_t>(
                    config.defense_pool_fraction *
                    static_cast<double>(train_malware.size()));
                std::string mode_label(attack_mode_name(mode));
                std::transform(mode_label.begin(), mode_label.end(), mode_label.begin(),
                               [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
                pool = subsample_pool(pool, std::max<std::size_t>(cap, 1),
                                      config.stage_seed("defense-pool:" + mode_label));

                std::vector<DetectorModel> retrained;
                std::string mode_dir(attack_mode_name(mode));
                std::transform(mode_dir.begin(), mode_dir.end(), mode_dir.begin(),
                               [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
                fs::create_directories(out / "defense" / mode_dir / "models");
                for (const DetectorModel& model : models) {
                    DetectorModel defended = retrain_with_adversarial(
                        model.spec(), train_reduced, pool,
                        config.stage_seed("defense:" + model.id() + ":" + mode_dir));
                    save_model_file(defended, (out / "defense" / mode_dir / "models" /
                                               (defended.id() + ".json"))
                                                  .string());
                    retrained.push_back(std::move(defended));
                }

                AttackMode mode_span[] = {mode};
                DefenseReport report = defense_evaluate(
                    models, retrained, policies, test_reduced, config.budgets, mode_span,
                    config.env.benign_threshold, config.env.action_mode);
                combined.rows.insert(combined.rows.end(), report.rows.begin(),
                                     report.rows.end());
            }
            save_defense_report_file(combined, (out / "defense" / "report.json").string());
            return 0;
        });
    }

    run_stage("report", [&] {
        emit_reports(out);
        return 0;
    });
    run_stage("manifest", [&] {
        write_run_manifest(out);
        return 0;
    });
}

// ---- report emission ----------------------------------------------------------------

std::vector<fs::path> emit_reports(const fs::path& run_dir, const EmitOptions& options) {
    std::vector<fs::path> written;

    // gather attack reports, sorted for stable output
    std::vector<fs::path> report_files;
    if (fs::is_directory(run_dir / "attacks")) {
        for (const auto& entry : fs::directory_iterator(run_dir / "attacks")) {
            if (entry.path().extension() == ".json") report_files.push_back(entry.path());
        }
    }
    std::sort(report_files.begin(), report_files.end());
    std::vector<AttackReport> reports;
    for (const fs::path& file : report_files) {
        reports.push_back(load_attack_report_file(file.string()));
    }

    std::map<std::string, double> baselines;
    if (fs::is_directory(run_dir / "models")) {
        for (const auto& entry : fs::directory_iterator(run_dir / "models")) {
            if (entry.path().string().ends_with(".metrics.json")) {
                std::ifstream in(entry.path());
                json j = json::parse(in);
                baselines[j.at("model_id").get<std::string>()] =
                    j.at("accuracy").get<double>();
            }
        }
    }

    if (options.csv && !reports.empty()) {
        std::ostringstream csv;
        write_attack_summary_csv(reports, csv);
        fs::path path = run_dir / "attacks" / "summary.csv";
        write_text(path, csv.str());
        written.push_back(path);
    }
    if (options.svg && !reports.empty()) {
        for (AttackMode mode : {AttackMode::SPA, AttackMode::MPA}) {
            std::vector<AttackReport> of_mode;
            for (const AttackReport& r : reports) {
                if (r.mode == mode) of_mode.push_back(r);
            }
            if (of_mode.empty()) continue;
            std::string name(attack_mode_name(mode));
            std::string title = name + " fooling rate per detection model";
            std::transform(name.begin(), name.end(), name.begin(), [](unsigned char c) {
                return static_cast<char>(std::tolower(c));
            });
            fs::path path = run_dir / "charts" / (name + ".svg");
            write_text(path, render_fooling_chart_svg(title, of_mode, baselines));
            written.push_back(path);
        }
    }

    fs::path defense_json = run_dir / "defense" / "report.json";
    if (fs::exists(defense_json)) {
        DefenseReport defense = load_defense_report_file(defense_json.string());
        if (options.csv) {
            std::ostringstream csv;
            write_defense_csv(defense, csv);
            fs::path path = run_dir / "defense" / "report.csv";
            write_text(path, csv.str());
            written.push_back(path);
        }
        if (options.svg) {
            for (AttackMode mode : {AttackMode::SPA, AttackMode::MPA}) {
                bool any = std::any_of(defense.rows.begin(), defense.rows.end(),
                                       [&](const DefenseRow& r) { return r.mode == mode; });
                if (!any) continue;
                std::string name(attack_mode_name(mode));
                std::string title =
                    name + " fooling rate before/after adversarial retraining";
                std::transform(name.begin(), name.end(), name.begin(),
                               [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
                fs::path path = run_dir / "charts" / ("defense_" + name + ".svg");
                write_text(path, render_defense_chart_svg(title, defense, mode));
                written.push_back(path);
            }
        }
    }
    return written;
}

// ---- manifest ------------------------------------------------------------------------

std::string file_hash_hex(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open file: " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    std::uint64_t h = fnv1a64(buffer.str());
    char hex[17];
    std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(h));
    return std::string(hex);
}

void write_run_manifest(const fs::path& run_dir) {
    std::vector<std::string> paths;
    for (const auto& entry : fs::recursive_directory_iterator(run_dir)) {
        if (!entry.is_regular_file()) continue;
        fs::path relative = fs::relative(entry.path(), run_dir);
        if (relative == "manifest.json") continue;
        paths.push_back(relative.generic_string());
    }
    std::sort(paths.begin(), paths.end());

    json artifacts = json::array();
    for (const std::string& path : paths) {
        artifacts.push_back({{"path", path}, {"fnv1a64", file_hash_hex(run_dir / path)}});
    }
    json manifest;
    manifest["format"] = "qevade-manifest-v1";
    manifest["artifacts"] = std::move(artifacts);
    write_text(run_dir / "manifest.json", manifest.dump(2) + "\n");
}

}  // namespace qevade
