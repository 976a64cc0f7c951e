#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "realpipe/errors.hpp"
#include "realpipe/model.hpp"
#include "realpipe/serialize.hpp"
#include "realpipe/transform.hpp"

namespace realpipe {

inline constexpr const char* kConfigVersion = "realpipe-config/1";

struct DataConfig {
    std::string path;
    std::optional<std::string> id_column;
    std::string target_column;
};

// Marker for "fit a linear model on the training data" instead of an
// explicit model spec.
struct FitLinear {};

struct ProjectConfig {
    DataConfig data;
    std::variant<FitLinear, Model> model;
    std::vector<Transformer> transformers;
    std::map<std::string, std::string> feature_descriptions;
    std::uint64_t seed = 0;
    ojson raw; // original document, echoed into bundles
};

namespace detail {

inline const ojson& require_field(const ojson& j, const char* key,
                                  const std::string& where) {
    if (!j.is_object() || !j.contains(key))
        throw ConfigError(where + " is missing required field \"" + key +
                          "\"");
    return j.at(key);
}

inline std::string require_string(const ojson& j, const char* key,
                                  const std::string& where) {
    const ojson& v = require_field(j, key, where);
    if (!v.is_string())
        throw ConfigError(where + " field \"" + key + "\" must be a string");
    return v.get<std::string>();
}

inline bool require_bool(const ojson& j, const char* key,
                         const std::string& where) {
    const ojson& v = require_field(j, key, where);
    if (!v.is_boolean())
        throw ConfigError(where + " field \"" + key + "\" must be a boolean");
    return v.get<bool>();
}

inline std::vector<std::string> require_string_array(const ojson& j,
                                                     const char* key,
                                                     const std::string& where) {
    const ojson& v = require_field(j, key, where);
    if (!v.is_array())
        throw ConfigError(where + " field \"" + key + "\" must be an array");
    std::vector<std::string> out;
    for (const auto& item : v) {
        if (!item.is_string())
            throw ConfigError(where + " field \"" + key +
                              "\" must contain only strings");
        out.push_back(item.get<std::string>());
    }
    return out;
}

// Scalars in config documents use natural JSON types: numbers, strings and
// booleans (unlike explanation output, where booleans render as strings).
inline Cell cell_from_config_scalar(const ojson& j, const std::string& where) {
    if (j.is_number()) return Cell(j.get<double>());
    if (j.is_string()) return Cell(j.get<std::string>());
    if (j.is_boolean()) return Cell(j.get<bool>());
    throw ConfigError(where + " must be a number, string or boolean");
}

inline ojson cell_to_config_scalar(const Cell& c) {
    if (c.is_numeric()) return c.number();
    if (c.is_boolean()) return c.truth();
    if (c.is_text()) return c.text();
    return nullptr;
}

} // namespace detail

inline TransformerSpec spec_from_params(const std::string& type,
                                        const ojson& params) {
    const std::string where = "transformer \"" + type + "\" params";
    if (type == "one_hot_encoder") {
        OneHotEncoderSpec s;
        s.columns = detail::require_string_array(params, "columns", where);
        return s;
    }
    if (type == "imputer") return ImputerSpec{};
    if (type == "standardizer") {
        StandardizerSpec s;
        s.columns = detail::require_string_array(params, "columns", where);
        return s;
    }
    if (type == "feature_selector") {
        FeatureSelectorSpec s;
        s.keep = detail::require_string_array(params, "keep", where);
        return s;
    }
    if (type == "numeric_binner") {
        NumericBinnerSpec s;
        s.column = detail::require_string(params, "column", where);
        const ojson& thresholds =
            detail::require_field(params, "thresholds", where);
        if (!thresholds.is_array())
            throw ConfigError(where + " field \"thresholds\" must be an array");
        for (const auto& t : thresholds) {
            if (!t.is_number())
                throw ConfigError(where + " thresholds must be numbers");
            s.thresholds.push_back(t.get<double>());
        }
        s.labels = detail::require_string_array(params, "labels", where);
        return s;
    }
    if (type == "category_combiner") {
        CategoryCombinerSpec s;
        s.column = detail::require_string(params, "column", where);
        const ojson& map = detail::require_field(params, "map", where);
        if (!map.is_object())
            throw ConfigError(where + " field \"map\" must be an object");
        for (const auto& [child, parent] : map.items()) {
            if (!parent.is_string())
                throw ConfigError(where + " map values must be strings");
            s.child_to_parent[child] = parent.get<std::string>();
        }
        return s;
    }
    if (type == "mapping_encoder") {
        MappingEncoderSpec s;
        s.source_columns =
            detail::require_string_array(params, "source_columns", where);
        s.target_column =
            detail::require_string(params, "target_column", where);
        const ojson& lookup = detail::require_field(params, "lookup", where);
        if (!lookup.is_array())
            throw ConfigError(where + " field \"lookup\" must be an array");
        for (const auto& entry : lookup) {
            const ojson& key = detail::require_field(entry, "key", where);
            if (!key.is_array())
                throw ConfigError(where + " lookup keys must be arrays");
            std::vector<Cell> cells;
            for (const auto& part : key)
                cells.push_back(detail::cell_from_config_scalar(
                    part, where + " lookup key"));
            s.lookup.emplace_back(
                std::move(cells),
                detail::require_string(entry, "label", where));
        }
        s.default_label = detail::require_string(params, "default_label", where);
        if (params.contains("key_precision")) {
            const ojson& p = params.at("key_precision");
            if (!p.is_number_integer())
                throw ConfigError(where +
                                  " field \"key_precision\" must be an "
                                  "integer");
            s.key_precision = p.get<int>();
        }
        return s;
    }
    throw ConfigError("unknown transformer type '" + type + "'");
}

inline ojson params_to_json(const TransformerSpec& spec) {
    ojson params = ojson::object();
    if (auto* s = std::get_if<OneHotEncoderSpec>(&spec)) {
        params["columns"] = s->columns;
    } else if (std::get_if<ImputerSpec>(&spec)) {
        // no parameters
    } else if (auto* s = std::get_if<StandardizerSpec>(&spec)) {
        params["columns"] = s->columns;
    } else if (auto* s = std::get_if<FeatureSelectorSpec>(&spec)) {
        params["keep"] = s->keep;
    } else if (auto* s = std::get_if<NumericBinnerSpec>(&spec)) {
        params["column"] = s->column;
        params["thresholds"] = s->thresholds;
        params["labels"] = s->labels;
    } else if (auto* s = std::get_if<CategoryCombinerSpec>(&spec)) {
        params["column"] = s->column;
        ojson map = ojson::object();
        for (const auto& [child, parent] : s->child_to_parent)
            map[child] = parent;
        params["map"] = std::move(map);
    } else if (auto* s = std::get_if<MappingEncoderSpec>(&spec)) {
        params["source_columns"] = s->source_columns;
        params["target_column"] = s->target_column;
        ojson lookup = ojson::array();
        for (const auto& [key, label] : s->lookup) {
            ojson entry;
            ojson parts = ojson::array();
            for (const auto& c : key)
                parts.push_back(detail::cell_to_config_scalar(c));
            entry["key"] = std::move(parts);
            entry["label"] = label;
            lookup.push_back(std::move(entry));
        }
        params["lookup"] = std::move(lookup);
        params["default_label"] = s->default_label;
        params["key_precision"] = s->key_precision;
    }
    return params;
}

inline UnsupportedMode unsupported_mode_from_name(const std::string& s) {
    if (s == "break") return UnsupportedMode::Break;
    if (s == "skip") return UnsupportedMode::Skip;
    throw ConfigError("on_unsupported must be \"break\" or \"skip\", got \"" +
                      s + "\"");
}

inline std::string unsupported_mode_name(UnsupportedMode m) {
    return m == UnsupportedMode::Break ? "break" : "skip";
}

inline Transformer transformer_from_json(const ojson& j, std::size_t index) {
    const std::string where = "transformers[" + std::to_string(index) + "]";
    std::string type = detail::require_string(j, "type", where);
    ojson params = j.contains("params") ? j.at("params") : ojson::object();
    if (!params.is_object())
        throw ConfigError(where + " field \"params\" must be an object");
    TransformerSpec spec = spec_from_params(type, params);

    FeatureSpaceFlags flags;
    flags.model = detail::require_bool(j, "model", where);
    flags.interpret = detail::require_bool(j, "interpret", where);
    if (j.contains("algo")) {
        if (!j.at("algo").is_boolean())
            throw ConfigError(where + " field \"algo\" must be a boolean");
        flags.algorithm = j.at("algo").get<bool>();
    }

    std::optional<UnsupportedMode> mode;
    if (j.contains("on_unsupported"))
        mode = unsupported_mode_from_name(
            detail::require_string(j, "on_unsupported", where));
    return Transformer(std::move(spec), flags, mode);
}

inline ojson transformer_to_json(const Transformer& t) {
    ojson j;
    j["type"] = t.type_name();
    j["params"] = params_to_json(t.spec());
    j["model"] = t.flags().model;
    if (t.flags().algorithm) j["algo"] = *t.flags().algorithm;
    j["interpret"] = t.flags().interpret;
    j["on_unsupported"] = unsupported_mode_name(t.unsupported_mode());
    return j;
}

inline ProjectConfig parse_project_config(const ojson& j) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    std::string version = detail::require_string(j, "version", "config");
    if (version != kConfigVersion)
        throw ConfigError("unsupported config version \"" + version +
                          "\" (expected \"" + std::string(kConfigVersion) +
                          "\")");

    ProjectConfig cfg;
    cfg.raw = j;

    const ojson& data = detail::require_field(j, "data", "config");
    cfg.data.path = detail::require_string(data, "path", "config.data");
    cfg.data.target_column =
        detail::require_string(data, "target_column", "config.data");
    if (data.contains("id_column")) {
        if (!data.at("id_column").is_string())
            throw ConfigError("config.data field \"id_column\" must be a "
                              "string");
        cfg.data.id_column = data.at("id_column").get<std::string>();
    }

    const ojson& model = detail::require_field(j, "model", "config");
    if (!model.is_object())
        throw ConfigError("config field \"model\" must be an object");
    if (model.contains("fit")) {
        std::string fit = model.at("fit").get<std::string>();
        if (fit != "linear")
            throw ConfigError("config.model \"fit\" supports only \"linear\", "
                              "got \"" +
                              fit + "\"");
        cfg.model = FitLinear{};
    } else {
        cfg.model = load_model_spec(model);
    }

    if (j.contains("transformers")) {
        const ojson& transformers = j.at("transformers");
        if (!transformers.is_array())
            throw ConfigError("config field \"transformers\" must be an "
                              "array");
        std::size_t index = 0;
        for (const auto& jt : transformers)
            cfg.transformers.push_back(transformer_from_json(jt, index++));
    }

    if (j.contains("feature_descriptions")) {
        const ojson& descs = j.at("feature_descriptions");
        if (!descs.is_object())
            throw ConfigError("config field \"feature_descriptions\" must be "
                              "an object");
        for (const auto& [name, text] : descs.items()) {
            if (!text.is_string())
                throw ConfigError("feature description for '" + name +
                                  "' must be a string");
            cfg.feature_descriptions[name] = text.get<std::string>();
        }
    }

    if (j.contains("seed")) {
        const ojson& seed = j.at("seed");
        if (!seed.is_number_integer() ||
            (seed.is_number_integer() && !seed.is_number_unsigned() &&
             seed.get<long long>() < 0))
            throw ConfigError("config field \"seed\" must be a non-negative "
                              "integer");
        cfg.seed = seed.get<std::uint64_t>();
    }
    return cfg;
}

} // namespace realpipe
