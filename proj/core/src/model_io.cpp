#include "qevade/model_io.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "qevade/errors.hpp"

namespace qevade {

using nlohmann::json;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open file: " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

void spill(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write file: " + path);
    out << text;
}

json tree_node_to_json(const Tree& tree, std::size_t index) {
    const TreeNode& node = tree.nodes.at(index);
    json j;
    j["w0"] = node.w0;
    j["w1"] = node.w1;
    j["value"] = node.value;
    if (node.feature >= 0) {
        j["feature"] = node.feature;
        j["left"] = tree_node_to_json(tree, static_cast<std::size_t>(node.left));
        j["right"] = tree_node_to_json(tree, static_cast<std::size_t>(node.right));
    }
    return j;
}

json tree_to_json(const Tree& tree) {
    if (tree.nodes.empty()) return nullptr;
    return tree_node_to_json(tree, 0);
}

std::int32_t tree_node_from_json(const json& j, Tree& tree) {
    TreeNode node;
    node.w0 = j.at("w0").get<double>();
    node.w1 = j.at("w1").get<double>();
    node.value = j.at("value").get<double>();
    std::int32_t index = static_cast<std::int32_t>(tree.nodes.size());
    tree.nodes.push_back(node);
    if (j.contains("feature")) {
        std::int32_t left = tree_node_from_json(j.at("left"), tree);
        std::int32_t right = tree_node_from_json(j.at("right"), tree);
        tree.nodes[static_cast<std::size_t>(index)].feature = j.at("feature").get<std::int32_t>();
        tree.nodes[static_cast<std::size_t>(index)].left = left;
        tree.nodes[static_cast<std::size_t>(index)].right = right;
    }
    return index;
}

Tree tree_from_json(const json& j) {
    Tree tree;
    if (!j.is_null()) tree_node_from_json(j, tree);
    return tree;
}

json trees_to_json(const std::vector<Tree>& trees) {
    json arr = json::array();
    for (const Tree& t : trees) arr.push_back(tree_to_json(t));
    return arr;
}

std::vector<Tree> trees_from_json(const json& arr) {
    std::vector<Tree> trees;
    for (const json& j : arr) trees.push_back(tree_from_json(j));
    return trees;
}

json hyperparameters_to_json(const Hyperparameters& hp) {
    json j;
    j["reg_lambda"] = hp.reg_lambda;
    j["svm_cost"] = hp.svm_cost;
    j["max_iter"] = hp.max_iter;
    j["tol"] = hp.tol;
    j["balanced"] = hp.balanced;
    j["n_estimators"] = hp.n_estimators;
    j["max_depth"] = hp.max_depth;
    j["min_samples_split"] = hp.min_samples_split;
    j["min_samples_leaf"] = hp.min_samples_leaf;
    j["max_features"] = hp.max_features;
    j["learning_rate"] = hp.learning_rate;
    j["hidden_units"] = hp.hidden_units;
    j["batch_size"] = hp.batch_size;
    j["adam_lr"] = hp.adam_lr;
    j["epochs"] = hp.epochs;
    return j;
}

Hyperparameters hyperparameters_from_json(const json& j) {
    Hyperparameters hp;
    hp.reg_lambda = j.at("reg_lambda").get<double>();
    hp.svm_cost = j.at("svm_cost").get<double>();
    hp.max_iter = j.at("max_iter").get<int>();
    hp.tol = j.at("tol").get<double>();
    hp.balanced = j.at("balanced").get<bool>();
    hp.n_estimators = j.at("n_estimators").get<int>();
    hp.max_depth = j.at("max_depth").get<int>();
    hp.min_samples_split = j.at("min_samples_split").get<int>();
    hp.min_samples_leaf = j.at("min_samples_leaf").get<int>();
    hp.max_features = j.at("max_features").get<int>();
    hp.learning_rate = j.at("learning_rate").get<double>();
    hp.hidden_units = j.at("hidden_units").get<int>();
    hp.batch_size = j.at("batch_size").get<int>();
    hp.adam_lr = j.at("adam_lr").get<double>();
    hp.epochs = j.at("epochs").get<int>();
    return hp;
}

struct ParamsToJson {
    json operator()(const LinearParams& p) const {
        return {{"type", "linear"},
                {"weights", p.weights},
                {"bias", p.bias},
                {"use_platt", p.use_platt},
                {"platt_scale", p.platt_scale},
                {"platt_offset", p.platt_offset}};
    }
    json operator()(const TreeModelParams& p) const {
        return {{"type", "tree"}, {"tree", tree_to_json(p.tree)}};
    }
    json operator()(const ForestParams& p) const {
        return {{"type", "forest"}, {"trees", trees_to_json(p.trees)}};
    }
    json operator()(const AdaBoostParams& p) const {
        return {{"type", "adaboost"}, {"trees", trees_to_json(p.trees)}};
    }
    json operator()(const GradBoostParams& p) const {
        return {{"type", "gradboost"},
                {"initial_logit", p.initial_logit},
                {"learning_rate", p.learning_rate},
                {"trees", trees_to_json(p.trees)}};
    }
    json operator()(const MlpParams& p) const {
        return {{"type", "mlp"},    {"inputs", p.inputs}, {"hidden", p.hidden},
                {"w1", p.w1},       {"b1", p.b1},         {"w2", p.w2},
                {"b2", p.b2}};
    }
};

ModelParams params_from_json(const json& j) {
    std::string type = j.at("type").get<std::string>();
    if (type == "linear") {
        LinearParams p;
        p.weights = j.at("weights").get<std::vector<double>>();
        p.bias = j.at("bias").get<double>();
        p.use_platt = j.at("use_platt").get<bool>();
        p.platt_scale = j.at("platt_scale").get<double>();
        p.platt_offset = j.at("platt_offset").get<double>();
        return p;
    }
    if (type == "tree") return TreeModelParams{tree_from_json(j.at("tree"))};
    if (type == "forest") return ForestParams{trees_from_json(j.at("trees"))};
    if (type == "adaboost") return AdaBoostParams{trees_from_json(j.at("trees"))};
    if (type == "gradboost") {
        GradBoostParams p;
        p.initial_logit = j.at("initial_logit").get<double>();
        p.learning_rate = j.at("learning_rate").get<double>();
        p.trees = trees_from_json(j.at("trees"));
        return p;
    }
    if (type == "mlp") {
        MlpParams p;
        p.inputs = j.at("inputs").get<std::size_t>();
        p.hidden = j.at("hidden").get<std::size_t>();
        p.w1 = j.at("w1").get<std::vector<double>>();
        p.b1 = j.at("b1").get<std::vector<double>>();
        p.w2 = j.at("w2").get<std::vector<double>>();
        p.b2 = j.at("b2").get<double>();
        return p;
    }
    throw Error("unknown model parameter type: " + type);
}

}  // namespace

std::string model_to_json(const DetectorModel& model) {
    json j;
    j["format"] = "qevade-model-v1";
    j["algorithm"] = std::string(algorithm_name(model.spec().algorithm));
    j["model_id"] = model.id();
    j["seed"] = model.spec().seed;
    j["hyperparameters"] = hyperparameters_to_json(model.spec().hp);
    j["feature_names"] = model.feature_names();
    j["training_log"] = model.training_log();
    j["parameters"] = std::visit(ParamsToJson{}, model.params());
    return j.dump(2) + "\n";
}

DetectorModel model_from_json(const std::string& text) {
    json j = json::parse(text);
    if (j.at("format").get<std::string>() != "qevade-model-v1") {
        throw Error("not a qevade model file");
    }
    DetectorSpec spec;
    auto algorithm = algorithm_from_name(j.at("algorithm").get<std::string>());
    if (!algorithm) throw Error("unknown algorithm in model file");
    spec.algorithm = *algorithm;
    spec.model_id = j.at("model_id").get<std::string>();
    spec.seed = j.at("seed").get<std::uint64_t>();
    spec.hp = hyperparameters_from_json(j.at("hyperparameters"));
    return DetectorModel(std::move(spec),
                         j.at("feature_names").get<std::vector<std::string>>(),
                         params_from_json(j.at("parameters")),
                         j.at("training_log").get<std::vector<std::string>>());
}

void save_model_file(const DetectorModel& model, const std::string& path) {
    spill(path, model_to_json(model));
}

DetectorModel load_model_file(const std::string& path) {
    return model_from_json(slurp(path));
}

std::string qtable_to_json(const QTable& table) {
    json j;
    j["format"] = "qevade-qtable-v1";
    j["k"] = table.k();
    j["source_model_id"] = table.source_model_id();
    j["values"] = table.values();
    j["visits"] = table.visits();
    return j.dump() + "\n";
}

QTable qtable_from_json(const std::string& text) {
    json j = json::parse(text);
    if (j.at("format").get<std::string>() != "qevade-qtable-v1") {
        throw Error("not a qevade Q-table file");
    }
    return QTable::from_arrays(j.at("k").get<std::size_t>(),
                               j.at("source_model_id").get<std::string>(),
                               j.at("values").get<std::vector<double>>(),
                               j.at("visits").get<std::vector<std::uint64_t>>());
}

void save_qtable_file(const QTable& table, const std::string& path) {
    spill(path, qtable_to_json(table));
}

QTable load_qtable_file(const std::string& path) {
    return qtable_from_json(slurp(path));
}

std::string policy_to_json(const AttackPolicy& policy) {
    json j;
    j["format"] = "qevade-policy-v1";
    j["k"] = policy.k;
    j["source_model_id"] = policy.source_model_id;
    j["actions"] = policy.action_of;
    return j.dump() + "\n";
}

AttackPolicy policy_from_json(const std::string& text) {
    json j = json::parse(text);
    if (j.at("format").get<std::string>() != "qevade-policy-v1") {
        throw Error("not a qevade policy file");
    }
    AttackPolicy policy;
    policy.k = j.at("k").get<std::size_t>();
    policy.source_model_id = j.at("source_model_id").get<std::string>();
    policy.action_of = j.at("actions").get<std::vector<std::uint8_t>>();
    if (policy.action_of.size() != (std::size_t{1} << policy.k)) {
        throw DimensionMismatch("policy action table has the wrong length");
    }
    for (std::uint8_t a : policy.action_of) {
        if (a > policy.k) throw InvalidAction("policy contains an out-of-range action");
    }
    return policy;
}

void save_policy_file(const AttackPolicy& policy, const std::string& path) {
    spill(path, policy_to_json(policy));
}

AttackPolicy load_policy_file(const std::string& path) {
    return policy_from_json(slurp(path));
}

}  // namespace qevade
