#include <fstream>

#include <json.hpp>

#include "aki/common.hpp"
#include "aki/learners.hpp"

namespace aki {

namespace {

using nlohmann::json;

json linear_to_json(const LinearModel& m) {
    return json{{"coef", m.coef}, {"intercept", m.intercept}};
}

LinearModel linear_from_json(const json& j) {
    LinearModel m;
    m.coef = j.at("coef").get<std::vector<double>>();
    m.intercept = j.at("intercept").get<double>();
    return m;
}

json tree_to_json(const Tree& t) {
    json nodes = json::array();
    for (const auto& nd : t.nodes) {
        nodes.push_back(json{{"feature", nd.feature},
                             {"threshold", nd.threshold},
                             {"value", nd.value},
                             {"gain", nd.gain},
                             {"left", nd.left},
                             {"right", nd.right}});
    }
    return nodes;
}

Tree tree_from_json(const json& j) {
    Tree t;
    for (const auto& n : j) {
        TreeNode nd;
        nd.feature = n.at("feature").get<int>();
        nd.threshold = n.at("threshold").get<double>();
        nd.value = n.at("value").get<double>();
        nd.gain = n.at("gain").get<double>();
        nd.left = n.at("left").get<int>();
        nd.right = n.at("right").get<int>();
        t.nodes.push_back(nd);
    }
    return t;
}

}  // namespace

double TrainedModel::raw_score(const std::vector<double>& model_row) const {
    if (kind == LearnerKind::gbt) return gbc.decision(model_row);
    return linear.decision(model_row);
}

double TrainedModel::predict_row(const std::vector<double>& model_row) const {
    const double s = raw_score(model_row);
    return calibrated ? calibrator(s) : sigmoid(s);
}

namespace {

std::vector<std::size_t> map_columns(const FeatureMatrix& m,
                                     const std::vector<std::string>& names) {
    std::vector<std::size_t> cols;
    cols.reserve(names.size());
    for (const auto& name : names) {
        auto it = m.dict.index.find(name);
        if (it == m.dict.index.end()) {
            throw ConfigError("model feature not present in matrix: " + name);
        }
        cols.push_back(it->second);
    }
    return cols;
}

}  // namespace

std::vector<double> TrainedModel::transform(const FeatureMatrix& m, std::size_t row,
                                            const std::vector<std::size_t>& cols) const {
    std::vector<double> v(cols.size());
    for (std::size_t j = 0; j < cols.size(); ++j) {
        double x = m.rows[row][cols[j]];
        if (!anscombe_mask.empty() && anscombe_mask[j] && !is_missing(x)) x = anscombe(x);
        v[j] = x;
    }
    imputer.apply(v);
    if (scaled) scaler.apply(v);
    return v;
}

std::vector<double> TrainedModel::raw_scores(const FeatureMatrix& m,
                                             const std::vector<std::size_t>& rows) const {
    const auto cols = map_columns(m, feature_names);
    std::vector<double> out(rows.size());
    for (std::size_t k = 0; k < rows.size(); ++k) {
        out[k] = raw_score(transform(m, rows[k], cols));
    }
    return out;
}

std::vector<double> TrainedModel::predict(const FeatureMatrix& m,
                                          const std::vector<std::size_t>& rows) const {
    const auto cols = map_columns(m, feature_names);
    std::vector<double> out(rows.size());
    for (std::size_t k = 0; k < rows.size(); ++k) {
        out[k] = predict_row(transform(m, rows[k], cols));
    }
    return out;
}

void TrainedModel::save(const std::string& path) const {
    json j;
    j["format_version"] = 1;
    j["kind"] = kind == LearnerKind::gbt           ? "gbt"
                : kind == LearnerKind::l1_logistic ? "l1_logistic"
                                                   : "ridge_clinical";
    j["feature_names"] = feature_names;
    j["anscombe_mask"] = anscombe_mask;
    j["imputer_fill"] = imputer.fill;
    j["scaled"] = scaled;
    if (scaled) {
        j["scaler_mean"] = scaler.mean;
        j["scaler_sd"] = scaler.sd;
    }
    if (kind == LearnerKind::gbt) {
        json g;
        g["init_score"] = gbc.init_score;
        g["n_estimators"] = gbc.config.n_estimators;
        g["learning_rate"] = gbc.config.learning_rate;
        g["max_depth"] = gbc.config.max_depth;
        g["min_samples_split"] = gbc.config.min_samples_split;
        g["min_samples_leaf"] = gbc.config.min_samples_leaf;
        g["train_deviance"] = gbc.train_deviance;
        json trees = json::array();
        for (const auto& t : gbc.trees) trees.push_back(tree_to_json(t));
        g["trees"] = std::move(trees);
        j["gbt"] = std::move(g);
    } else {
        j["linear"] = linear_to_json(linear);
    }
    j["calibrated"] = calibrated;
    if (calibrated) {
        j["platt_a"] = calibrator.a;
        j["platt_b"] = calibrator.b;
    }
    j["has_stability"] = has_stability;
    if (has_stability) {
        j["stability_frequency"] = stability.frequency;
        j["stability_threshold"] = stability.threshold;
        j["stability_selected"] = stability.selected;
        j["stability_feature_names"] = stability_feature_names;
    }
    std::ofstream out(path);
    if (!out) throw InputError("cannot write model file: " + path);
    out << j.dump(1) << "\n";
}

TrainedModel TrainedModel::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot read model file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw InputError("malformed model file " + path + ": " + e.what());
    }
    if (j.value("format_version", 0) != 1) {
        throw InputError("unsupported model format version in " + path);
    }

    TrainedModel m;
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "gbt") {
        m.kind = LearnerKind::gbt;
    } else if (kind == "l1_logistic") {
        m.kind = LearnerKind::l1_logistic;
    } else if (kind == "ridge_clinical") {
        m.kind = LearnerKind::ridge_clinical;
    } else {
        throw InputError("unknown model kind: " + kind);
    }
    m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    m.anscombe_mask = j.at("anscombe_mask").get<std::vector<std::uint8_t>>();
    m.imputer.fill = j.at("imputer_fill").get<std::vector<double>>();
    m.scaled = j.at("scaled").get<bool>();
    if (m.scaled) {
        m.scaler.mean = j.at("scaler_mean").get<std::vector<double>>();
        m.scaler.sd = j.at("scaler_sd").get<std::vector<double>>();
    }
    if (m.kind == LearnerKind::gbt) {
        const json& g = j.at("gbt");
        m.gbc.init_score = g.at("init_score").get<double>();
        m.gbc.config.n_estimators = g.at("n_estimators").get<int>();
        m.gbc.config.learning_rate = g.at("learning_rate").get<double>();
        m.gbc.config.max_depth = g.at("max_depth").get<int>();
        m.gbc.config.min_samples_split = g.at("min_samples_split").get<int>();
        m.gbc.config.min_samples_leaf = g.at("min_samples_leaf").get<int>();
        m.gbc.train_deviance = g.at("train_deviance").get<std::vector<double>>();
        for (const auto& t : g.at("trees")) m.gbc.trees.push_back(tree_from_json(t));
    } else {
        m.linear = linear_from_json(j.at("linear"));
    }
    m.calibrated = j.at("calibrated").get<bool>();
    if (m.calibrated) {
        m.calibrator.a = j.at("platt_a").get<double>();
        m.calibrator.b = j.at("platt_b").get<double>();
    }
    m.has_stability = j.value("has_stability", false);
    if (m.has_stability) {
        m.stability.frequency = j.at("stability_frequency").get<std::vector<double>>();
        m.stability.threshold = j.at("stability_threshold").get<double>();
        m.stability.selected = j.at("stability_selected").get<std::vector<std::size_t>>();
        m.stability_feature_names =
            j.at("stability_feature_names").get<std::vector<std::string>>();
    }
    return m;
}

}  // namespace aki
