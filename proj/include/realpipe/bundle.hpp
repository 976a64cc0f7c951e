#pragma once

#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "realpipe/config.hpp"
#include "realpipe/errors.hpp"
#include "realpipe/explainer.hpp"
#include "realpipe/realapp.hpp"
#include "realpipe/serialize.hpp"
#include "realpipe/transform.hpp"

namespace realpipe {

inline constexpr const char* kBundleVersion = "realpipe-bundle/1";

namespace detail {

inline std::string cell_dtype_tag(const Cell& c) {
    if (c.is_numeric()) return "numeric";
    if (c.is_boolean()) return "boolean";
    return "categorical";
}

inline ojson fitted_state_to_json(const Transformer& t) {
    const FittedState& state = t.fitted_state();
    ojson j = ojson::object();
    if (auto* f = std::get_if<OneHotFit>(&state)) {
        ojson categories = ojson::array();
        for (const auto& [column, values] : f->categories) {
            ojson jc;
            jc["column"] = column;
            jc["values"] = values;
            categories.push_back(std::move(jc));
        }
        j["categories"] = std::move(categories);
    } else if (auto* f = std::get_if<ImputerFit>(&state)) {
        ojson fills = ojson::array();
        for (const auto& [column, value] : f->fills) {
            ojson jf;
            jf["column"] = column;
            jf["dtype"] = cell_dtype_tag(value);
            jf["value"] = cell_to_json(value);
            fills.push_back(std::move(jf));
        }
        j["fills"] = std::move(fills);
    } else if (auto* f = std::get_if<StandardizerFit>(&state)) {
        ojson stats = ojson::array();
        for (const auto& s : f->stats) {
            ojson js;
            js["column"] = s.column;
            js["mu"] = s.mu;
            js["sigma"] = s.sigma;
            stats.push_back(std::move(js));
        }
        j["stats"] = std::move(stats);
    } else if (auto* f = std::get_if<SelectorFit>(&state)) {
        j["input_columns"] = f->input_columns;
    } else if (std::get_if<BinnerFit>(&state)) {
        // stateless
    } else if (auto* f = std::get_if<CombinerFit>(&state)) {
        j["fitted_categories"] = f->fitted_categories;
    } else if (std::get_if<MappingFit>(&state)) {
        // recompiled from the spec on load
    } else {
        throw ContractError("cannot persist an unfitted transformer: " +
                            t.name());
    }
    return j;
}

inline FittedState fitted_state_from_json(const std::string& type,
                                          const ojson& j) {
    if (type == "one_hot_encoder") {
        OneHotFit f;
        for (const auto& jc : j.at("categories"))
            f.categories.emplace_back(
                jc.at("column").get<std::string>(),
                jc.at("values").get<std::vector<std::string>>());
        return f;
    }
    if (type == "imputer") {
        ImputerFit f;
        for (const auto& jf : j.at("fills"))
            f.fills.emplace_back(
                jf.at("column").get<std::string>(),
                cell_from_json(jf.at("value"),
                               dtype_from_name(
                                   jf.at("dtype").get<std::string>())));
        return f;
    }
    if (type == "standardizer") {
        StandardizerFit f;
        for (const auto& js : j.at("stats"))
            f.stats.push_back(StandardizerStat{
                js.at("column").get<std::string>(),
                js.at("mu").get<double>(), js.at("sigma").get<double>()});
        return f;
    }
    if (type == "feature_selector") {
        SelectorFit f;
        f.input_columns =
            j.at("input_columns").get<std::vector<std::string>>();
        return f;
    }
    if (type == "numeric_binner") return BinnerFit{};
    if (type == "category_combiner") {
        CombinerFit f;
        f.fitted_categories =
            j.at("fitted_categories").get<std::vector<std::string>>();
        return f;
    }
    if (type == "mapping_encoder") return MappingFit{};
    throw SchemaError("unknown transformer type '" + type + "' in bundle");
}

} // namespace detail

// Serializes a fitted app to a single self-contained document. Loading it
// back reproduces byte-identical produce outputs without refitting.
inline ojson save_bundle(const RealApp& app, const ojson& config_echo) {
    ojson j;
    j["version"] = kBundleVersion;
    j["config"] = config_echo;
    if (app.id_column())
        j["id_column"] = *app.id_column();
    else
        j["id_column"] = nullptr;
    j["seed"] = app.seed();
    ojson descs = ojson::object();
    for (const auto& [name, text] : app.feature_descriptions())
        descs[name] = text;
    j["feature_descriptions"] = std::move(descs);

    j["active_model"] = app.active_model_id();
    ojson models = ojson::object();
    for (const auto& [id, m] : app.models()) models[id] = model_spec_to_json(m);
    j["models"] = std::move(models);

    j["train"] = table_to_json(app.train());
    j["targets"] = app.targets();

    ojson transformers = ojson::array();
    for (const auto& t : app.pipeline().transformers()) {
        ojson jt = transformer_to_json(t);
        jt["fitted"] = detail::fitted_state_to_json(t);
        transformers.push_back(std::move(jt));
    }
    j["transformers"] = std::move(transformers);

    const FittedExplainer& f =
        app.explainer_for(ExplanationKind::FeatureContributions);
    ojson explainer;
    explainer["background_row_ids"] = f.background.rows.row_ids();
    explainer["base_value"] = f.base_value;
    ojson stats = ojson::array();
    for (const auto& s : f.se_stats) {
        ojson js;
        js["column"] = s.column;
        js["mu"] = s.mu;
        js["sigma"] = s.sigma;
        stats.push_back(std::move(js));
    }
    explainer["se_stats"] = std::move(stats);
    j["explainer"] = std::move(explainer);
    return j;
}

inline RealApp load_bundle(const ojson& j) {
    if (!j.is_object() || !j.contains("version"))
        throw SchemaError("bundle is missing its \"version\" field");
    std::string version = j.at("version").get<std::string>();
    if (version != kBundleVersion)
        throw SchemaError("unsupported bundle version \"" + version +
                          "\" (expected \"" + std::string(kBundleVersion) +
                          "\")");

    std::optional<std::string> id_column;
    if (j.contains("id_column") && !j.at("id_column").is_null())
        id_column = j.at("id_column").get<std::string>();
    std::uint64_t seed = j.at("seed").get<std::uint64_t>();

    std::map<std::string, std::string> descs;
    for (const auto& [name, text] : j.at("feature_descriptions").items())
        descs[name] = text.get<std::string>();

    std::string active = j.at("active_model").get<std::string>();
    std::map<std::string, Model> models;
    for (const auto& [id, spec] : j.at("models").items())
        models[id] = load_model_spec(spec);

    Table train = table_from_json(j.at("train"));
    std::vector<double> targets = j.at("targets").get<std::vector<double>>();

    std::vector<Transformer> transformers;
    std::size_t index = 0;
    for (const auto& jt : j.at("transformers")) {
        Transformer t = transformer_from_json(jt, index++);
        t.restore_fitted_state(detail::fitted_state_from_json(
            t.type_name(), jt.at("fitted")));
        transformers.push_back(std::move(t));
    }
    TransformPipeline pipeline(std::move(transformers));
    pipeline.mark_fitted();

    const ojson& je = j.at("explainer");
    RestoredExplainerState restored;
    restored.background_row_ids =
        je.at("background_row_ids").get<std::vector<std::string>>();
    restored.base_value = je.at("base_value").get<double>();
    for (const auto& js : je.at("se_stats"))
        restored.se_stats.push_back(SeStat{
            js.at("column").get<std::string>(), js.at("mu").get<double>(),
            js.at("sigma").get<double>()});

    return RealApp(std::move(models), std::move(active), std::move(pipeline),
                   std::move(train), std::move(targets), std::move(descs),
                   std::move(id_column), seed, std::move(restored));
}

} // namespace realpipe
