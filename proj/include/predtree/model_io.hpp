#pragma once

#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "predtree/tree.hpp"

namespace predtree {

inline constexpr int kModelFormatVersion = 1;

namespace detail {

inline nlohmann::json config_to_json(const TreeConfig& config) {
    return nlohmann::json{{"score", config.rule.name()},
                          {"alpha", config.rule.alpha},
                          {"max_depth", config.max_depth},
                          {"min_node_size", config.min_node_size},
                          {"quantile_step", config.quantile_step},
                          {"kappa", config.kappa},
                          {"discrete_unique_cutoff", config.discrete_unique_cutoff},
                          {"seed", config.seed}};
}

inline TreeConfig config_from_json(const nlohmann::json& j) {
    TreeConfig config;
    config.rule = ScoringRule::from_name(j.at("score").get<std::string>(),
                                         j.at("alpha").get<double>());
    config.max_depth = j.at("max_depth").get<std::size_t>();
    config.min_node_size = j.at("min_node_size").get<std::size_t>();
    config.quantile_step = j.at("quantile_step").get<double>();
    config.kappa = j.at("kappa").get<double>();
    config.discrete_unique_cutoff = j.at("discrete_unique_cutoff").get<std::size_t>();
    config.seed = j.at("seed").get<std::uint64_t>();
    return config;
}

}  // namespace detail

inline nlohmann::json model_to_json(const PredictiveTree& tree) {
    nlohmann::json doc;
    doc["version"] = kModelFormatVersion;
    doc["config"] = detail::config_to_json(tree.config());
    nlohmann::json schema;
    schema["response"] = tree.response_name();
    schema["predictors"] = nlohmann::json::array();
    for (const auto& col : tree.predictor_schema()) {
        schema["predictors"].push_back({{"name", col.name}, {"kind", to_string(col.kind)}});
    }
    doc["schema"] = schema;
    doc["root_n"] = tree.root_n();
    doc["root_delta"] = tree.root_delta();
    doc["nodes"] = nlohmann::json::array();
    for (const auto& [id, node] : tree.nodes()) {
        nlohmann::json jn;
        jn["id"] = id;
        if (std::holds_alternative<InternalNode>(node)) {
            const auto& internal = std::get<InternalNode>(node);
            jn["type"] = "internal";
            jn["feature"] = internal.split.feature;
            if (internal.split.is_threshold()) {
                jn["threshold"] = internal.split.threshold();
            } else {
                jn["left_categories"] = internal.split.category_split().left_categories;
            }
            jn["delta"] = internal.delta;
            jn["n"] = internal.n;
        } else {
            jn["type"] = "leaf";
            jn["samples"] = std::get<LeafNode>(node).ecdf.samples();
        }
        doc["nodes"].push_back(std::move(jn));
    }
    return doc;
}

inline PredictiveTree model_from_json(const nlohmann::json& doc) {
    if (!doc.contains("version") || !doc.at("version").is_number_integer() ||
        doc.at("version").get<int>() != kModelFormatVersion) {
        throw std::runtime_error("unsupported model version");
    }
    const TreeConfig config = detail::config_from_json(doc.at("config"));
    std::vector<ColumnSchema> schema;
    for (const auto& jc : doc.at("schema").at("predictors")) {
        ColumnSchema col;
        col.name = jc.at("name").get<std::string>();
        const std::string kind = jc.at("kind").get<std::string>();
        if (kind == "numeric") {
            col.kind = ColumnKind::Numeric;
        } else if (kind == "categorical") {
            col.kind = ColumnKind::Categorical;
        } else {
            throw std::runtime_error("unknown column kind '" + kind + "'");
        }
        schema.push_back(std::move(col));
    }
    std::map<PredictiveTree::NodeId, PredictiveTree::Node> nodes;
    for (const auto& jn : doc.at("nodes")) {
        const auto id = jn.at("id").get<PredictiveTree::NodeId>();
        const std::string type = jn.at("type").get<std::string>();
        if (type == "internal") {
            InternalNode internal;
            internal.split.feature = jn.at("feature").get<std::size_t>();
            if (jn.contains("threshold")) {
                internal.split.rule = ThresholdSplit{jn.at("threshold").get<double>()};
            } else {
                CategorySplit cs;
                cs.left_categories =
                    jn.at("left_categories").get<std::vector<std::string>>();
                std::sort(cs.left_categories.begin(), cs.left_categories.end());
                internal.split.rule = std::move(cs);
            }
            internal.delta = jn.at("delta").get<double>();
            internal.n = jn.at("n").get<std::size_t>();
            nodes.emplace(id, std::move(internal));
        } else if (type == "leaf") {
            nodes.emplace(id, LeafNode{Ecdf(jn.at("samples").get<std::vector<double>>())});
        } else {
            throw std::runtime_error("unknown node type '" + type + "'");
        }
    }
    return PredictiveTree(std::move(nodes), config, std::move(schema),
                          doc.at("schema").at("response").get<std::string>(),
                          doc.at("root_delta").get<double>(),
                          doc.at("root_n").get<std::size_t>());
}

inline void save_model(const PredictiveTree& tree, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write file '" + path + "'");
    out << model_to_json(tree).dump(2) << '\n';
    if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

inline PredictiveTree load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file '" + path + "'");
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("malformed model file '" + path + "': " + e.what());
    }
    try {
        return model_from_json(doc);
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("malformed model file '" + path + "': " + e.what());
    }
}

}  // namespace predtree
