#pragma once

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "realpipe/errors.hpp"
#include "realpipe/explanation.hpp"
#include "realpipe/model.hpp"
#include "realpipe/realapp.hpp"
#include "realpipe/tabular.hpp"
#include "realpipe/transform.hpp"

namespace realpipe {

// All JSON in this project preserves insertion order so output bytes are a
// stable contract.
using ojson = nlohmann::ordered_json;

// ---- cells and tables -------------------------------------------------------

// Rendering contract: Numeric -> number, Categorical -> string, Boolean ->
// "true"/"false", Missing -> null, Any -> "(any)".
inline ojson cell_to_json(const Cell& c) {
    if (c.is_missing()) return nullptr;
    if (c.is_any()) return "(any)";
    if (c.is_numeric()) return c.number();
    if (c.is_boolean()) return c.truth() ? "true" : "false";
    return c.text();
}

// The reverse direction needs the column dtype: "true" is a boolean in a
// Boolean column and plain text in a Categorical one.
inline Cell cell_from_json(const ojson& j, Dtype dtype) {
    if (j.is_null()) return Cell::missing();
    if (j.is_string() && j.get<std::string>() == "(any)" &&
        dtype == Dtype::Categorical)
        return Cell::any();
    switch (dtype) {
        case Dtype::Numeric:
            if (!j.is_number())
                throw SchemaError("expected a number in a numeric column");
            return Cell(j.get<double>());
        case Dtype::Boolean: {
            if (!j.is_string())
                throw SchemaError("expected \"true\"/\"false\" in a boolean "
                                  "column");
            std::string s = j.get<std::string>();
            if (s == "true") return Cell(true);
            if (s == "false") return Cell(false);
            throw SchemaError("expected \"true\"/\"false\" in a boolean "
                              "column, got \"" +
                              s + "\"");
        }
        case Dtype::Categorical:
            if (!j.is_string())
                throw SchemaError("expected a string in a categorical column");
            return Cell(j.get<std::string>());
    }
    throw SchemaError("unknown dtype");
}

inline ojson table_to_json(const Table& t) {
    ojson j;
    j["row_ids"] = t.row_ids();
    ojson columns = ojson::array();
    for (const auto& col : t.columns()) {
        ojson jc;
        jc["name"] = col.name;
        jc["dtype"] = dtype_name(col.dtype);
        ojson cells = ojson::array();
        for (const auto& c : col.cells) cells.push_back(cell_to_json(c));
        jc["cells"] = std::move(cells);
        columns.push_back(std::move(jc));
    }
    j["columns"] = std::move(columns);
    return j;
}

inline Table table_from_json(const ojson& j) {
    if (!j.is_object() || !j.contains("row_ids") || !j.contains("columns"))
        throw SchemaError("table document needs row_ids and columns");
    std::vector<std::string> row_ids =
        j.at("row_ids").get<std::vector<std::string>>();
    std::vector<Column> columns;
    for (const auto& jc : j.at("columns")) {
        Column col;
        col.name = jc.at("name").get<std::string>();
        col.dtype = dtype_from_name(jc.at("dtype").get<std::string>());
        for (const auto& cell : jc.at("cells"))
            col.cells.push_back(cell_from_json(cell, col.dtype));
        columns.push_back(std::move(col));
    }
    return Table(std::move(columns), std::move(row_ids));
}

// ---- model specs ------------------------------------------------------------

inline Task task_from_json_name(const std::string& s) {
    if (s == "regression") return Task::Regression;
    if (s == "binary") return Task::BinaryProbability;
    throw ConfigError("unknown task '" + s +
                      "' (expected \"regression\" or \"binary\")");
}

inline std::string task_to_json_name(Task t) { return task_name(t); }

// Parses {"kind":"linear","weights":{...},"intercept":n}
//     or {"kind":"tree","nodes":[...],"root":i}; both take an optional
// "task" ("regression" default, or "binary").
inline Model load_model_spec(const ojson& j) {
    if (!j.is_object() || !j.contains("kind"))
        throw ConfigError("model spec needs a \"kind\" field");
    std::string kind = j.at("kind").get<std::string>();
    Model m;
    if (j.contains("task"))
        m.task = task_from_json_name(j.at("task").get<std::string>());
    if (kind == "linear") {
        LinearModel lm;
        if (!j.contains("weights") || !j.at("weights").is_object())
            throw ConfigError("linear model spec needs a \"weights\" object");
        for (const auto& [name, w] : j.at("weights").items()) {
            if (!w.is_number())
                throw ConfigError("weight for '" + name + "' is not a number");
            lm.weights[name] = w.get<double>();
        }
        if (j.contains("intercept")) {
            if (!j.at("intercept").is_number())
                throw ConfigError("intercept is not a number");
            lm.intercept = j.at("intercept").get<double>();
        }
        m.impl = std::move(lm);
        return m;
    }
    if (kind == "tree") {
        TreeModel tm;
        if (!j.contains("nodes") || !j.at("nodes").is_array())
            throw ConfigError("tree model spec needs a \"nodes\" array");
        for (const auto& jn : j.at("nodes")) {
            TreeNode n;
            if (jn.contains("value")) {
                n.leaf = true;
                n.value = jn.at("value").get<double>();
                if (jn.contains("feature") || jn.contains("left"))
                    throw ConfigError(
                        "tree node cannot be both a leaf and internal");
            } else {
                n.leaf = false;
                n.feature = jn.at("feature").get<std::string>();
                n.threshold = jn.at("threshold").get<double>();
                auto left = jn.at("left").get<long long>();
                auto right = jn.at("right").get<long long>();
                if (left < 0 || right < 0)
                    throw ConfigError("tree child index is negative");
                n.left = static_cast<std::size_t>(left);
                n.right = static_cast<std::size_t>(right);
            }
            tm.nodes.push_back(std::move(n));
        }
        if (j.contains("root")) {
            auto root = j.at("root").get<long long>();
            if (root < 0) throw ConfigError("tree root index is negative");
            tm.root = static_cast<std::size_t>(root);
        }
        validate_tree(tm);
        m.impl = std::move(tm);
        return m;
    }
    throw ConfigError("unknown model kind '" + kind + "'");
}

inline ojson model_spec_to_json(const Model& m) {
    ojson j;
    if (m.is_linear()) {
        j["kind"] = "linear";
        ojson weights = ojson::object();
        for (const auto& [name, w] : m.linear().weights) weights[name] = w;
        j["weights"] = std::move(weights);
        j["intercept"] = m.linear().intercept;
    } else {
        j["kind"] = "tree";
        ojson nodes = ojson::array();
        for (const auto& n : m.tree().nodes) {
            ojson jn;
            if (n.leaf) {
                jn["value"] = n.value;
            } else {
                jn["feature"] = n.feature;
                jn["threshold"] = n.threshold;
                jn["left"] = n.left;
                jn["right"] = n.right;
            }
            nodes.push_back(std::move(jn));
        }
        j["nodes"] = std::move(nodes);
        j["root"] = m.tree().root;
    }
    j["task"] = task_to_json_name(m.task);
    return j;
}

// ---- audits and explanation documents --------------------------------------

inline ojson audit_to_json(const Audit& audit) {
    ojson j = ojson::array();
    for (const auto& ev : audit) {
        ojson je;
        je["event"] = ev.event;
        je["transformer"] = ev.transformer;
        je["step"] = ev.step;
        je["detail"] = ev.detail;
        j.push_back(std::move(je));
    }
    return j;
}

inline ojson contributions_to_json(const ContributionsOutput& out) {
    ojson j;
    j["type"] = "feature_contributions";
    j["space"] = out.space;
    j["base_value"] = out.base_value;
    ojson rows = ojson::object();
    for (const auto& [row_id, records] : out.rows) {
        ojson jrecords = ojson::array();
        for (const auto& rec : records) {
            ojson jr;
            jr["feature"] = rec.feature;
            jr["value"] = cell_to_json(rec.value);
            jr["contribution"] = rec.contribution;
            jrecords.push_back(std::move(jr));
        }
        rows[row_id] = std::move(jrecords);
    }
    j["rows"] = std::move(rows);
    j["audit"] = audit_to_json(out.audit);
    return j;
}

inline ojson importance_to_json(const ImportanceOutput& out) {
    ojson j;
    j["type"] = "feature_importance";
    ojson entries = ojson::array();
    for (const auto& rec : out.entries) {
        ojson jr;
        jr["feature"] = rec.feature;
        jr["importance"] = rec.importance;
        entries.push_back(std::move(jr));
    }
    j["entries"] = std::move(entries);
    return j;
}

inline ojson examples_to_json(const SimilarExamplesOutput& out) {
    ojson j;
    j["type"] = "similar_examples";
    ojson rows = ojson::object();
    for (const auto& [row_id, records] : out.rows) {
        ojson jrecords = ojson::array();
        for (const auto& rec : records) {
            ojson jr;
            ojson example = ojson::object();
            for (const auto& [feature, cell] : rec.example)
                example[feature] = cell_to_json(cell);
            jr["example"] = std::move(example);
            jr["target"] = cell_to_json(rec.target);
            jr["distance"] = rec.distance;
            jrecords.push_back(std::move(jr));
        }
        rows[row_id] = std::move(jrecords);
    }
    j["rows"] = std::move(rows);
    return j;
}

} // namespace realpipe
