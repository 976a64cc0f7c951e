#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "realpipe/errors.hpp"
#include "realpipe/explainer.hpp"
#include "realpipe/explanation.hpp"
#include "realpipe/model.hpp"
#include "realpipe/tabular.hpp"
#include "realpipe/transform.hpp"

namespace realpipe {

struct ContributionRecord {
    std::string feature;
    Cell value;
    double contribution = 0.0;
};

// Per-row contribution records keyed by row id, in input-row order.
struct ContributionsOutput {
    std::vector<std::pair<std::string, std::vector<ContributionRecord>>> rows;
    double base_value = 0.0;
    std::string space;
    Audit audit;
    bool broke = false;
};

struct ImportanceRecord {
    std::string feature;
    double importance = 0.0;
};

struct ImportanceOutput {
    std::vector<ImportanceRecord> entries;
    Audit audit;
    bool broke = false;
};

struct ExampleRecord {
    std::vector<std::pair<std::string, Cell>> example;
    Cell target;
    double distance = 0.0;
};

struct SimilarExamplesOutput {
    std::vector<std::pair<std::string, std::vector<ExampleRecord>>> rows;
    Audit audit;
    bool broke = false;
};

inline bool audit_has_break(const Audit& audit) {
    for (const auto& ev : audit) {
        if (ev.event == "break") return true;
    }
    return false;
}

// Formatting from explanation objects to row-id-keyed record outputs. Free
// functions so the benchmark can time this step in isolation.
inline ContributionsOutput format_contributions(const FeatureContributions& c,
                                                Audit audit) {
    ContributionsOutput out;
    out.audit = std::move(audit);
    out.broke = audit_has_break(out.audit);
    out.base_value = c.base_value;
    out.space = c.space;
    out.rows.reserve(c.rows.size());
    for (const auto& row : c.rows) {
        std::vector<ContributionRecord> records;
        records.reserve(row.entries.size());
        for (const auto& entry : row.entries)
            records.push_back(ContributionRecord{entry.feature, entry.value,
                                                 entry.contribution});
        out.rows.emplace_back(row.row_id, std::move(records));
    }
    return out;
}

inline ImportanceOutput format_importance(const FeatureImportance& imp,
                                          Audit audit) {
    ImportanceOutput out;
    out.audit = std::move(audit);
    out.broke = audit_has_break(out.audit);
    out.entries.reserve(imp.entries.size());
    for (const auto& entry : imp.entries)
        out.entries.push_back(
            ImportanceRecord{entry.feature, entry.importance});
    return out;
}

inline SimilarExamplesOutput format_examples(const ExampleBased& ex,
                                             Audit audit) {
    SimilarExamplesOutput out;
    out.audit = std::move(audit);
    out.broke = audit_has_break(out.audit);
    out.rows.reserve(ex.rows.size());
    for (const auto& row : ex.rows) {
        std::vector<ExampleRecord> records;
        records.reserve(row.examples.size());
        for (const auto& n : row.examples)
            records.push_back(ExampleRecord{n.example, n.target, n.distance});
        out.rows.emplace_back(row.row_id, std::move(records));
    }
    return out;
}

// Explainer state restored from a saved bundle instead of being recomputed.
struct RestoredExplainerState {
    std::vector<std::string> background_row_ids;
    double base_value = 0.0;
    std::vector<SeStat> se_stats;
};

// The fully-encapsulated application object: models, fitted pipeline,
// training data, targets and display names, with lazily fitted explainers
// cached per explanation kind.
class RealApp {
public:
    RealApp(std::map<std::string, Model> models, std::string active_id,
            std::vector<Transformer> transformers, Table train,
            std::vector<double> targets,
            std::map<std::string, std::string> feature_descriptions,
            std::optional<std::string> id_column, std::uint64_t seed)
        : models_(std::move(models)),
          active_id_(std::move(active_id)),
          pipeline_(std::move(transformers)),
          train_(std::move(train)),
          targets_(std::move(targets)),
          descriptions_(std::move(feature_descriptions)),
          id_column_(std::move(id_column)),
          seed_(seed) {
        if (!models_.count(active_id_))
            throw ConfigError("active model id '" + active_id_ +
                              "' is not among the configured models");
        if (targets_.size() != train_.row_count())
            throw DataError("target count " + std::to_string(targets_.size()) +
                            " does not match training rows " +
                            std::to_string(train_.row_count()));
        pipeline_.fit(train_);
        finish_construction();
    }

    // Rebuilds an app from persisted state: the pipeline arrives already
    // fitted and the explainer internals are restored, not recomputed.
    RealApp(std::map<std::string, Model> models, std::string active_id,
            TransformPipeline fitted_pipeline, Table train,
            std::vector<double> targets,
            std::map<std::string, std::string> feature_descriptions,
            std::optional<std::string> id_column, std::uint64_t seed,
            RestoredExplainerState restored)
        : models_(std::move(models)),
          active_id_(std::move(active_id)),
          pipeline_(std::move(fitted_pipeline)),
          train_(std::move(train)),
          targets_(std::move(targets)),
          descriptions_(std::move(feature_descriptions)),
          id_column_(std::move(id_column)),
          seed_(seed),
          restored_(std::move(restored)) {
        if (!models_.count(active_id_))
            throw ConfigError("active model id '" + active_id_ +
                              "' is not among the configured models");
        finish_construction();
    }

    const std::map<std::string, Model>& models() const { return models_; }
    const std::string& active_model_id() const { return active_id_; }
    const Model& active_model() const { return models_.at(active_id_); }
    const TransformPipeline& pipeline() const { return pipeline_; }
    const Table& train() const { return train_; }
    const std::vector<double>& targets() const { return targets_; }
    const std::map<std::string, std::string>& feature_descriptions() const {
        return descriptions_;
    }
    const std::optional<std::string>& id_column() const { return id_column_; }
    std::uint64_t seed() const { return seed_; }
    const PipelineValidationReport& validation_report() const {
        return report_;
    }

    void set_active_model(const std::string& id) {
        if (!models_.count(id))
            throw ConfigError("model id '" + id +
                              "' is not among the configured models");
        std::lock_guard<std::mutex> lock(*cache_mutex_);
        active_id_ = id;
        cache_.clear();
    }

    // Number of from-scratch explainer fits, for cache observability.
    int explainer_fit_count() const {
        std::lock_guard<std::mutex> lock(*cache_mutex_);
        return fit_count_;
    }

    const FittedExplainer& explainer_for(ExplanationKind kind) const {
        std::lock_guard<std::mutex> lock(*cache_mutex_);
        auto it = cache_.find(kind);
        if (it != cache_.end()) return it->second;
        FittedExplainer f;
        if (restored_) {
            f.kind = kind;
            f.seed = seed_;
            f.algo_train = pipeline_.to_algorithm_space(train_);
            f.targets = targets_;
            f.background.rows =
                select_rows(f.algo_train, restored_->background_row_ids);
            f.background.seed = seed_;
            f.base_value = restored_->base_value;
            f.se_stats = restored_->se_stats;
        } else {
            f = fit_explainer(kind, pipeline_, active_model(), train_,
                              targets_, seed_);
            ++fit_count_;
        }
        return cache_.emplace(kind, std::move(f)).first->second;
    }

    ContributionsOutput produce_feature_contributions(const Table& X) const {
        const FittedExplainer& f =
            explainer_for(ExplanationKind::FeatureContributions);
        ProduceOptions options;
        options.descriptions = descriptions_;
        ProduceResult result =
            produce_interpretable(f, pipeline_, active_model(), X,
                                  ExplanationKind::FeatureContributions,
                                  options);
        return format_contributions(result.explanation.contributions(),
                                    std::move(result.audit));
    }

    ImportanceOutput produce_feature_importance() const {
        const FittedExplainer& f =
            explainer_for(ExplanationKind::FeatureImportance);
        ProduceOptions options;
        options.descriptions = descriptions_;
        ProduceResult result = produce_interpretable(
            f, pipeline_, active_model(), train_,
            ExplanationKind::FeatureImportance, options);
        return format_importance(result.explanation.importance(),
                                 std::move(result.audit));
    }

    SimilarExamplesOutput produce_similar_examples(const Table& X,
                                                   std::size_t k = 5) const {
        const FittedExplainer& f =
            explainer_for(ExplanationKind::SimilarExamples);
        ProduceOptions options;
        options.k = k;
        options.descriptions = descriptions_;
        ProduceResult result = produce_interpretable(
            f, pipeline_, active_model(), X, ExplanationKind::SimilarExamples,
            options);
        return format_examples(result.explanation.examples(),
                               std::move(result.audit));
    }

    const RestoredExplainerState* restored_state() const {
        return restored_ ? &*restored_ : nullptr;
    }

private:
    void finish_construction() {
        report_ = pipeline_.validate_pipeline(train_);
        if (!report_.ok())
            throw PipelineError("pipeline validation failed:\n" +
                                report_.to_text());
    }

    std::map<std::string, Model> models_;
    std::string active_id_;
    TransformPipeline pipeline_;
    Table train_;
    std::vector<double> targets_;
    std::map<std::string, std::string> descriptions_;
    std::optional<std::string> id_column_;
    std::uint64_t seed_ = 0;
    std::optional<RestoredExplainerState> restored_;
    PipelineValidationReport report_;

    // held by pointer so the app stays movable
    mutable std::unique_ptr<std::mutex> cache_mutex_ =
        std::make_unique<std::mutex>();
    mutable std::map<ExplanationKind, FittedExplainer> cache_;
    mutable int fit_count_ = 0;
};

} // namespace realpipe
