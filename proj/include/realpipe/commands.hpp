#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "realpipe/bench.hpp"
#include "realpipe/bundle.hpp"
#include "realpipe/config.hpp"
#include "realpipe/errors.hpp"
#include "realpipe/realapp.hpp"
#include "realpipe/serialize.hpp"
#include "realpipe/tabular.hpp"

namespace realpipe {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitBreak = 4;
inline constexpr int kExitEquivalence = 5;

struct CommandStreams {
    std::ostream& out;
    std::ostream& err;
};

namespace detail {

template <typename MakeError>
inline std::string read_text_file(const std::string& path,
                                  MakeError make_error) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw make_error("cannot read file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

inline void write_text_file(const std::string& path,
                            const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write file '" + path + "'");
    out << content;
    if (!out) throw DataError("failed while writing file '" + path + "'");
}

template <typename MakeError>
inline ojson load_json_file(const std::string& path, MakeError make_error) {
    std::string text = read_text_file(path, make_error);
    try {
        return ojson::parse(text);
    } catch (const ojson::parse_error& e) {
        throw make_error("file '" + path + "' is not valid JSON: " + e.what());
    }
}

inline std::string audit_text(const Audit& audit) {
    std::string s;
    for (const auto& ev : audit) {
        s += "[" + ev.event + "] step " + std::to_string(ev.step) + " " +
             ev.transformer + ": " + ev.detail + "\n";
    }
    return s;
}

inline Table drop_column(const Table& t, const std::string& name) {
    std::vector<Column> columns;
    columns.reserve(t.column_count());
    for (const auto& c : t.columns()) {
        if (c.name != name) columns.push_back(c);
    }
    return Table(std::move(columns), t);
}

inline std::vector<double> extract_targets(const Table& t,
                                           const std::string& target_column) {
    if (!t.has_column(target_column))
        throw DataError("target column '" + target_column +
                        "' not found in the data");
    const Column& col = t.column(target_column);
    if (col.dtype == Dtype::Categorical)
        throw DataError("target column '" + target_column +
                        "' must be numeric or boolean");
    std::vector<double> targets;
    targets.reserve(col.cells.size());
    for (std::size_t r = 0; r < col.cells.size(); ++r) {
        const Cell& c = col.cells[r];
        if (c.is_numeric())
            targets.push_back(c.number());
        else if (c.is_boolean())
            targets.push_back(c.truth() ? 1.0 : 0.0);
        else
            throw DataError("target column '" + target_column +
                            "' has no value in row '" + t.row_ids()[r] + "'");
    }
    return targets;
}

} // namespace detail

// REALPIPE_SEED wins over the seed in any config it applies to.
inline std::optional<std::uint64_t> seed_override_from_env() {
    const char* env = std::getenv("REALPIPE_SEED");
    if (!env || !*env) return std::nullopt;
    std::string s(env);
    std::uint64_t value = 0;
    for (char ch : s) {
        if (ch < '0' || ch > '9')
            throw ConfigError("REALPIPE_SEED must be a non-negative integer, "
                              "got \"" +
                              s + "\"");
        value = value * 10 + static_cast<std::uint64_t>(ch - '0');
    }
    return value;
}

template <typename Fn>
inline int run_command(Fn&& fn, std::ostream& err) {
    try {
        return fn();
    } catch (const EquivalenceError& e) {
        err << "error: " << e.what() << "\n";
        return kExitEquivalence;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const CapabilityError& e) {
        err << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const PipelineError& e) {
        err << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const ParseError& e) {
        err << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const SchemaError& e) {
        err << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const DataError& e) {
        err << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const LookupError& e) {
        err << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const ContractError& e) {
        err << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitConfig;
    }
}

namespace detail {

struct LoadedTrainingData {
    Table train;
    std::vector<double> targets;
};

inline LoadedTrainingData load_training_data(const ProjectConfig& cfg) {
    std::string csv = read_text_file(cfg.data.path, [](const std::string& m) {
        return DataError(m);
    });
    Table full = read_table(csv, cfg.data.id_column);
    LoadedTrainingData out;
    out.targets = extract_targets(full, cfg.data.target_column);
    out.train = drop_column(full, cfg.data.target_column);
    return out;
}

inline Model resolve_model(const ProjectConfig& cfg, const Table& train,
                           const std::vector<double>& targets) {
    if (const Model* m = std::get_if<Model>(&cfg.model)) return *m;
    TransformPipeline pipeline(cfg.transformers);
    pipeline.fit(train);
    Model model;
    model.impl = fit_linear(pipeline.to_model_space(train), targets);
    model.task = Task::Regression;
    return model;
}

} // namespace detail

inline int cmd_fit(const std::string& config_path, const std::string& out_path,
                   CommandStreams s) {
    return run_command(
        [&]() -> int {
            ojson jc = detail::load_json_file(
                config_path,
                [](const std::string& m) { return ConfigError(m); });
            ProjectConfig cfg = parse_project_config(jc);
            if (auto seed = seed_override_from_env()) cfg.seed = *seed;

            detail::LoadedTrainingData data = detail::load_training_data(cfg);
            Model model = detail::resolve_model(cfg, data.train, data.targets);

            RealApp app({{"default", std::move(model)}}, "default",
                        cfg.transformers, std::move(data.train),
                        std::move(data.targets), cfg.feature_descriptions,
                        cfg.data.id_column, cfg.seed);
            s.out << app.validation_report().to_text();

            ojson bundle = save_bundle(app, cfg.raw);
            detail::write_text_file(out_path, bundle.dump(2) + "\n");
            s.out << "wrote " << out_path << "\n";
            return kExitOk;
        },
        s.err);
}

namespace detail {

inline std::string pad_right(const std::string& s, std::size_t width) {
    return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

inline std::string contributions_text(const ContributionsOutput& out) {
    std::size_t wf = std::string("feature").size();
    std::size_t wv = std::string("value").size();
    for (const auto& [row_id, records] : out.rows) {
        for (const auto& rec : records) {
            wf = std::max(wf, rec.feature.size());
            wv = std::max(wv, rec.value.to_display().size());
        }
    }
    std::string text = "base value " + format_double(out.base_value) +
                       " (space: " + out.space + ")\n";
    for (const auto& [row_id, records] : out.rows) {
        std::vector<ContributionRecord> sorted = records;
        std::stable_sort(sorted.begin(), sorted.end(),
                         [](const ContributionRecord& a,
                            const ContributionRecord& b) {
                             return std::fabs(a.contribution) >
                                    std::fabs(b.contribution);
                         });
        text += "row " + row_id + "\n";
        text += "  " + pad_right("feature", wf) + "  " +
                pad_right("value", wv) + "  contribution\n";
        for (const auto& rec : sorted) {
            text += "  " + pad_right(rec.feature, wf) + "  " +
                    pad_right(rec.value.to_display(), wv) + "  " +
                    format_double(rec.contribution) + "\n";
        }
    }
    return text;
}

inline std::string importance_text(const ImportanceOutput& out) {
    std::size_t wf = std::string("feature").size();
    for (const auto& rec : out.entries) wf = std::max(wf, rec.feature.size());
    std::string text = pad_right("feature", wf) + "  importance\n";
    for (const auto& rec : out.entries)
        text += pad_right(rec.feature, wf) + "  " +
                format_double(rec.importance) + "\n";
    return text;
}

inline std::string examples_text(const SimilarExamplesOutput& out) {
    std::string text;
    for (const auto& [row_id, records] : out.rows) {
        text += "row " + row_id + "\n";
        std::size_t index = 0;
        for (const auto& rec : records) {
            text += "  example " + std::to_string(index++) + " (distance " +
                    format_double(rec.distance) + ", target " +
                    rec.target.to_display() + ")\n";
            std::size_t wf = std::string("feature").size();
            for (const auto& [feature, cell] : rec.example)
                wf = std::max(wf, feature.size());
            for (const auto& [feature, cell] : rec.example)
                text += "    " + pad_right(feature, wf) + "  " +
                        cell.to_display() + "\n";
        }
    }
    return text;
}

} // namespace detail

inline int cmd_produce(const std::string& subkind, const std::string& app_path,
                       const std::optional<std::string>& input_path,
                       std::size_t k, const std::string& output_path,
                       const std::string& format, CommandStreams s) {
    return run_command(
        [&]() -> int {
            if (subkind != "contributions" && subkind != "importance" &&
                subkind != "examples")
                throw ConfigError("unknown produce subkind '" + subkind + "'");
            if (format != "json" && format != "table")
                throw ConfigError("format must be \"json\" or \"table\"");
            if (subkind == "importance" && input_path)
                throw ConfigError(
                    "input not accepted for importance (it is a global "
                    "explanation of the training data)");
            if (subkind != "importance" && !input_path)
                throw ConfigError("--input is required for " + subkind);

            ojson jb = detail::load_json_file(
                app_path, [](const std::string& m) { return DataError(m); });
            RealApp app = load_bundle(jb);

            std::optional<Table> X;
            if (input_path) {
                std::string csv = detail::read_text_file(
                    *input_path,
                    [](const std::string& m) { return DataError(m); });
                Table full = read_table(csv, app.id_column());
                // inputs may still carry the target column; predictions and
                // explanations never use it
                std::string target = jb.at("config")
                                         .at("data")
                                         .at("target_column")
                                         .get<std::string>();
                X = full.has_column(target)
                        ? detail::drop_column(full, target)
                        : std::move(full);
            }

            std::string rendered;
            if (subkind == "contributions") {
                ContributionsOutput out = app.produce_feature_contributions(*X);
                if (out.broke) {
                    s.err << "pipeline stopped before reaching a displayable "
                             "space:\n"
                          << detail::audit_text(out.audit);
                    return kExitBreak;
                }
                rendered = format == "json"
                               ? contributions_to_json(out).dump(2) + "\n"
                               : detail::contributions_text(out);
            } else if (subkind == "importance") {
                ImportanceOutput out = app.produce_feature_importance();
                if (out.broke) {
                    s.err << "pipeline stopped before reaching a displayable "
                             "space:\n"
                          << detail::audit_text(out.audit);
                    return kExitBreak;
                }
                rendered = format == "json"
                               ? importance_to_json(out).dump(2) + "\n"
                               : detail::importance_text(out);
            } else {
                SimilarExamplesOutput out = app.produce_similar_examples(*X, k);
                if (out.broke) {
                    s.err << "pipeline stopped before reaching a displayable "
                             "space:\n"
                          << detail::audit_text(out.audit);
                    return kExitBreak;
                }
                rendered = format == "json"
                               ? examples_to_json(out).dump(2) + "\n"
                               : detail::examples_text(out);
            }
            detail::write_text_file(output_path, rendered);
            s.out << "wrote " << output_path << "\n";
            return kExitOk;
        },
        s.err);
}

inline int cmd_validate(const std::string& config_path, CommandStreams s) {
    return run_command(
        [&]() -> int {
            ojson jc = detail::load_json_file(
                config_path,
                [](const std::string& m) { return ConfigError(m); });
            ProjectConfig cfg = parse_project_config(jc);
            detail::LoadedTrainingData data = detail::load_training_data(cfg);

            TransformPipeline pipeline(cfg.transformers);
            try {
                pipeline.fit(data.train);
            } catch (const PipelineError& e) {
                s.out << "route failure: " << e.what() << "\n";
                return kExitBreak;
            }
            PipelineValidationReport report =
                pipeline.validate_pipeline(data.train);
            s.out << report.to_text();
            return report.ok() ? kExitOk : kExitBreak;
        },
        s.err);
}

inline int cmd_bench(const std::string& config_path,
                     const std::string& out_path, CommandStreams s) {
    return run_command(
        [&]() -> int {
            ojson jc = detail::load_json_file(
                config_path,
                [](const std::string& m) { return ConfigError(m); });
            BenchConfig cfg = parse_bench_config(jc);
            if (auto seed = seed_override_from_env()) cfg.seed = *seed;

            BenchReport report = run_benchmark(cfg);
            detail::write_text_file(out_path,
                                    bench_report_to_json(report).dump(2) +
                                        "\n");
            s.out << "wrote " << out_path << "\n";
            return kExitOk;
        },
        s.err);
}

} // namespace realpipe
