#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "realpipe/errors.hpp"
#include "realpipe/tabular.hpp"

namespace realpipe {

// Leaf kinds of the explanation taxonomy. The first two are feature-based
// and additive (per-feature scores that sum meaningfully); the last two are
// example-based. Counterfactual is a recognized kind with no producer yet.
enum class ExplanationKind {
    FeatureContributions,
    FeatureImportance,
    SimilarExamples,
    Counterfactual,
};

inline const char* explanation_kind_name(ExplanationKind k) {
    switch (k) {
        case ExplanationKind::FeatureContributions: return "feature_contributions";
        case ExplanationKind::FeatureImportance: return "feature_importance";
        case ExplanationKind::SimilarExamples: return "similar_examples";
        case ExplanationKind::Counterfactual: return "counterfactual";
    }
    return "unknown";
}

inline ExplanationKind explanation_kind_from_name(const std::string& s) {
    if (s == "feature_contributions") return ExplanationKind::FeatureContributions;
    if (s == "feature_importance") return ExplanationKind::FeatureImportance;
    if (s == "similar_examples") return ExplanationKind::SimilarExamples;
    if (s == "counterfactual") return ExplanationKind::Counterfactual;
    throw ConfigError("unknown explanation kind '" + s + "'");
}

inline bool is_feature_based(ExplanationKind k) {
    return k == ExplanationKind::FeatureContributions ||
           k == ExplanationKind::FeatureImportance;
}

inline bool is_example_based(ExplanationKind k) { return !is_feature_based(k); }

// Feature-based explanations are additive: transformers may merge entries by
// summing their scores.
inline bool is_additive(ExplanationKind k) { return is_feature_based(k); }

// One scored feature of one explained row. The value is the feature's value
// in whatever space the explanation currently lives in.
struct ContributionEntry {
    std::string feature;
    Cell value;
    double contribution = 0.0;
};

struct ContributionRow {
    std::string row_id;
    std::vector<ContributionEntry> entries;
    // Model output for this row, when the producer guarantees additivity
    // (base_value + sum of contributions == prediction).
    std::optional<double> prediction;
};

struct FeatureContributions {
    std::vector<ContributionRow> rows;
    double base_value = 0.0;
    std::string space = "algorithm";
    bool exact = false; // producer guarantees the additivity identity
};

struct ImportanceEntry {
    std::string feature;
    double importance = 0.0;
};

struct FeatureImportance {
    std::vector<ImportanceEntry> entries;
    std::string space = "algorithm";
};

// One neighbor of one explained row: the neighbor's feature values, its
// training target, and the distance to the query.
struct ExampleNeighbor {
    std::string example_id;
    std::vector<std::pair<std::string, Cell>> example;
    Cell target;
    double distance = 0.0;
};

struct ExampleBasedRow {
    std::string row_id;
    std::vector<ExampleNeighbor> examples;
};

struct ExampleBased {
    ExplanationKind kind = ExplanationKind::SimilarExamples;
    std::vector<ExampleBasedRow> rows;
    std::string space = "algorithm";
};

class Explanation {
public:
    Explanation(FeatureContributions v) : value_(std::move(v)) {}
    Explanation(FeatureImportance v) : value_(std::move(v)) {}
    Explanation(ExampleBased v) : value_(std::move(v)) {}

    ExplanationKind kind() const {
        if (std::holds_alternative<FeatureContributions>(value_))
            return ExplanationKind::FeatureContributions;
        if (std::holds_alternative<FeatureImportance>(value_))
            return ExplanationKind::FeatureImportance;
        return std::get<ExampleBased>(value_).kind;
    }

    bool is_contributions() const {
        return std::holds_alternative<FeatureContributions>(value_);
    }
    bool is_importance() const {
        return std::holds_alternative<FeatureImportance>(value_);
    }
    bool is_example_based() const {
        return std::holds_alternative<ExampleBased>(value_);
    }

    const FeatureContributions& contributions() const {
        return std::get<FeatureContributions>(value_);
    }
    FeatureContributions& contributions() {
        return std::get<FeatureContributions>(value_);
    }
    const FeatureImportance& importance() const {
        return std::get<FeatureImportance>(value_);
    }
    FeatureImportance& importance() {
        return std::get<FeatureImportance>(value_);
    }
    const ExampleBased& examples() const { return std::get<ExampleBased>(value_); }
    ExampleBased& examples() { return std::get<ExampleBased>(value_); }

    const std::string& space() const {
        if (is_contributions()) return contributions().space;
        if (is_importance()) return importance().space;
        return examples().space;
    }
    void set_space(const std::string& s) {
        if (is_contributions())
            contributions().space = s;
        else if (is_importance())
            importance().space = s;
        else
            examples().space = s;
    }

private:
    std::variant<FeatureContributions, FeatureImportance, ExampleBased> value_;
};

// Structural checks; returns human-readable violations, empty when sound.
inline std::vector<std::string> validate(const Explanation& e) {
    std::vector<std::string> problems;
    auto check_unique = [&](const std::vector<std::string>& names,
                            const std::string& where) {
        std::set<std::string> seen;
        for (const auto& n : names) {
            if (!seen.insert(n).second)
                problems.push_back(where + ": duplicate feature '" + n + "'");
        }
    };
    if (e.is_contributions()) {
        const auto& c = e.contributions();
        if (!std::isfinite(c.base_value))
            problems.push_back("base value is not finite");
        for (const auto& row : c.rows) {
            double total = 0.0;
            for (std::size_t i = 0; i < row.entries.size(); ++i) {
                const auto& entry = row.entries[i];
                total += entry.contribution;
                if (!std::isfinite(entry.contribution))
                    problems.push_back("row '" + row.row_id + "': feature '" +
                                       entry.feature +
                                       "' has a non-finite contribution");
                for (std::size_t later = i + 1; later < row.entries.size();
                     ++later) {
                    if (row.entries[later].feature == entry.feature)
                        problems.push_back("row '" + row.row_id +
                                           "': duplicate feature '" +
                                           entry.feature + "'");
                }
            }
            if (c.exact && row.prediction) {
                double gap = std::fabs(c.base_value + total - *row.prediction);
                if (!(gap <= 1e-9))
                    problems.push_back(
                        "row '" + row.row_id +
                        "': contributions do not add up to the prediction "
                        "(gap " +
                        format_double(gap) + ")");
            }
        }
    } else if (e.is_importance()) {
        std::vector<std::string> names;
        for (const auto& entry : e.importance().entries) {
            names.push_back(entry.feature);
            if (!std::isfinite(entry.importance))
                problems.push_back("feature '" + entry.feature +
                                   "' has a non-finite importance");
        }
        check_unique(names, "importance entries");
    } else {
        for (const auto& row : e.examples().rows) {
            double prev = 0.0;
            bool first = true;
            for (const auto& ex : row.examples) {
                if (!(ex.distance >= 0.0))
                    problems.push_back("row '" + row.row_id + "': example '" +
                                       ex.example_id +
                                       "' has a negative distance");
                if (!first && ex.distance < prev)
                    problems.push_back("row '" + row.row_id +
                                       "': examples are not sorted by "
                                       "distance");
                prev = ex.distance;
                first = false;
                std::vector<std::string> names;
                for (const auto& [name, cell] : ex.example)
                    names.push_back(name);
                check_unique(names, "row '" + row.row_id + "' example '" +
                                         ex.example_id + "'");
            }
        }
    }
    return problems;
}

// Sum of one row's contributions. The row must exist.
inline double total_contribution(const FeatureContributions& c,
                                 const std::string& row_id) {
    for (const auto& row : c.rows) {
        if (row.row_id == row_id) {
            double total = 0.0;
            for (const auto& entry : row.entries) total += entry.contribution;
            return total;
        }
    }
    throw LookupError("no explained row with id '" + row_id + "'");
}

// Renames features for display. Names without a mapping are kept; the
// mapping may cover features that do not occur.
inline Explanation rename_features(Explanation e,
                                   const std::map<std::string, std::string>& names) {
    auto renamed = [&](const std::string& f) {
        auto it = names.find(f);
        return it == names.end() ? f : it->second;
    };
    Explanation out = std::move(e);
    if (out.is_contributions()) {
        for (auto& row : out.contributions().rows) {
            for (auto& entry : row.entries) entry.feature = renamed(entry.feature);
        }
    } else if (out.is_importance()) {
        for (auto& entry : out.importance().entries)
            entry.feature = renamed(entry.feature);
    } else {
        for (auto& row : out.examples().rows) {
            for (auto& ex : row.examples) {
                for (auto& [name, cell] : ex.example) name = renamed(name);
            }
        }
    }
    return out;
}

} // namespace realpipe
