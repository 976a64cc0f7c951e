#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "realpipe/errors.hpp"
#include "realpipe/explanation.hpp"
#include "realpipe/model.hpp"
#include "realpipe/rng.hpp"
#include "realpipe/tabular.hpp"
#include "realpipe/transform.hpp"

namespace realpipe {

// Reference rows (algorithm space) defining the interventional value
// function and the base value. Subsampled from training data when the cap
// binds, deterministically for a given seed.
struct BackgroundSample {
    Table rows;
    std::size_t cap = 100;
    std::uint64_t seed = 0;
};

enum class Metric { MSE, Accuracy };

struct SeStat {
    std::string column;
    double mu = 0.0;
    double sigma = 0.0;
};

// Everything an explanation algorithm needs that is worth computing once:
// the algorithm-space training table, training targets, the background
// sample with its base value, and standardization stats for the
// similar-examples distance.
struct FittedExplainer {
    ExplanationKind kind = ExplanationKind::FeatureContributions;
    Table algo_train;
    std::vector<double> targets;
    BackgroundSample background;
    double base_value = 0.0;
    std::vector<SeStat> se_stats;
    std::uint64_t seed = 0;
};

namespace detail {

inline double mean_prediction(const Model& model,
                              const TransformPipeline& pipeline,
                              const Table& algo_rows) {
    std::vector<double> preds =
        predict(model, pipeline.algorithm_to_model_space(algo_rows));
    double sum = 0.0;
    for (double p : preds) sum += p;
    return sum / static_cast<double>(preds.size());
}

inline std::vector<SeStat> numeric_stats(const Table& t) {
    std::vector<SeStat> stats;
    for (const auto& col : t.columns()) {
        if (col.dtype != Dtype::Numeric) continue;
        double sum = 0.0;
        std::size_t n = 0;
        for (const auto& c : col.cells) {
            if (c.is_numeric()) {
                sum += c.number();
                ++n;
            }
        }
        SeStat s;
        s.column = col.name;
        if (n) {
            s.mu = sum / static_cast<double>(n);
            double sq = 0.0;
            for (const auto& c : col.cells) {
                if (c.is_numeric())
                    sq += (c.number() - s.mu) * (c.number() - s.mu);
            }
            s.sigma = std::sqrt(sq / static_cast<double>(n));
        }
        stats.push_back(std::move(s));
    }
    return stats;
}

} // namespace detail

// Prepares the computation-heavy parts once: routes the training table to
// algorithm space, draws the background sample, and precomputes the base
// value and distance stats. The targets ride along so similar-examples and
// importance calls need nothing else.
inline FittedExplainer fit_explainer(ExplanationKind kind,
                                     const TransformPipeline& pipeline,
                                     const Model& model, const Table& train,
                                     const std::vector<double>& targets,
                                     std::uint64_t seed,
                                     std::size_t background_cap = 100) {
    if (targets.size() != train.row_count())
        throw ContractError("target count " + std::to_string(targets.size()) +
                            " does not match training rows " +
                            std::to_string(train.row_count()));
    FittedExplainer f;
    f.kind = kind;
    f.seed = seed;
    f.algo_train = pipeline.to_algorithm_space(train);
    f.targets = targets;
    f.background.cap = background_cap;
    f.background.seed = seed;
    std::vector<std::size_t> picks =
        sample_indices(train.row_count(), background_cap, seed);
    f.background.rows = select_row_indices(f.algo_train, picks);
    f.base_value = detail::mean_prediction(model, pipeline, f.background.rows);
    f.se_stats = detail::numeric_stats(f.algo_train);
    return f;
}

// Exact interventional Shapley values over the algorithm-space features of
// each input row:
//   phi_i = sum over S subseteq F\{i} of w(S) * (v(S u {i}) - v(S))
//   w(S)  = |S|! * (|F|-|S|-1)! / |F|!
//   v(S)  = mean over background rows b of predict(route(x_S combined b))
// Features the model never reads get phi = 0 exactly, and
// base_value + sum(phi) equals the prediction up to accumulated rounding.
inline FeatureContributions exact_shapley(const FittedExplainer& f,
                                          const TransformPipeline& pipeline,
                                          const Model& model,
                                          const Table& rows) {
    std::size_t d = rows.column_count();
    if (d > 12)
        throw CapabilityError(
            "exact enumeration is limited to 12 algorithm-space features "
            "(got " +
            std::to_string(d) +
            "); use a linear model's closed form or reduce features");
    const Table& bg = f.background.rows;
    std::size_t nb = bg.row_count();
    if (!nb) throw ContractError("background sample is empty");
    for (const auto& col : rows.columns()) {
        if (!bg.has_column(col.name))
            throw ContractError("input column '" + col.name +
                                "' is not part of the fitted algorithm "
                                "space");
    }

    std::vector<double> fact(d + 1, 1.0);
    for (std::size_t i = 1; i <= d; ++i)
        fact[i] = fact[i - 1] * static_cast<double>(i);
    std::vector<double> weight(d, 0.0);
    for (std::size_t s = 0; s + 1 <= d; ++s)
        weight[s] = fact[s] * fact[d - 1 - s] / fact[d];

    FeatureContributions out;
    out.base_value = f.base_value;
    out.exact = true;
    out.space = "algorithm";

    std::size_t n_masks = std::size_t(1) << d;
    std::vector<double> v(n_masks, 0.0);
    for (std::size_t r = 0; r < rows.row_count(); ++r) {
        for (std::size_t mask = 0; mask < n_masks; ++mask) {
            std::vector<Column> cols;
            cols.reserve(d);
            for (std::size_t j = 0; j < d; ++j) {
                const Column& xc = rows.column_at(j);
                if (mask & (std::size_t(1) << j)) {
                    Column c{xc.name, xc.dtype,
                             std::vector<Cell>(nb, xc.cells[r])};
                    cols.push_back(std::move(c));
                } else {
                    cols.push_back(bg.column(xc.name));
                }
            }
            Table composite(std::move(cols), bg.row_ids());
            v[mask] = detail::mean_prediction(model, pipeline, composite);
        }
        ContributionRow crow;
        crow.row_id = rows.row_ids()[r];
        for (std::size_t i = 0; i < d; ++i) {
            double phi = 0.0;
            std::size_t bit = std::size_t(1) << i;
            for (std::size_t mask = 0; mask < n_masks; ++mask) {
                if (mask & bit) continue;
                std::size_t s = static_cast<std::size_t>(
                    std::popcount(static_cast<unsigned long long>(mask)));
                phi += weight[s] * (v[mask | bit] - v[mask]);
            }
            crow.entries.push_back(ContributionEntry{
                rows.column_at(i).name, rows.column_at(i).cells[r], phi});
        }
        Table single = select_row_indices(rows, {r});
        crow.prediction =
            predict(model, pipeline.algorithm_to_model_space(single)).front();
        out.rows.push_back(std::move(crow));
    }
    return out;
}

// Closed-form contributions for linear models when the algorithm space
// already is the model space for consumed features:
//   phi_i = w_i * (x_i - mu_i)   with mu_i the background mean of feature i
//   base  = intercept + sum w_i * mu_i
inline FeatureContributions linear_contributions(
    const FittedExplainer& f, const TransformPipeline& pipeline,
    const Model& model, const Table& rows) {
    if (!model.is_linear())
        throw CapabilityError(
            "closed-form contributions need a linear model; use "
            "exact_shapley");
    if (model.task != Task::Regression)
        throw CapabilityError(
            "closed-form contributions need an unclamped regression "
            "model; use exact_shapley");
    for (const auto& tr : pipeline.transformers()) {
        if (tr.flags().model && !tr.flags().algo())
            throw CapabilityError(
                "closed-form contributions need the algorithm space to "
                "match the model space, but " +
                tr.name() +
                " transforms between them; use exact_shapley");
    }
    const LinearModel& lm = model.linear();
    const Table& bg = f.background.rows;
    if (!bg.row_count()) throw ContractError("background sample is empty");

    // background means and per-row readers for every weighted feature
    struct WeightedFeature {
        std::string name;
        double w = 0.0;
        double mu = 0.0;
    };
    auto numeric_value = [](const Cell& c, const std::string& cname,
                            const std::string& row_id) {
        if (c.is_numeric()) return c.number();
        if (c.is_boolean()) return c.truth() ? 1.0 : 0.0;
        throw DataError("feature '" + cname + "' has no value in row '" +
                        row_id + "'");
    };
    std::vector<WeightedFeature> feats;
    double base = lm.intercept;
    for (const auto& [name, w] : lm.weights) {
        WeightedFeature wf;
        wf.name = name;
        wf.w = w;
        if (!bg.has_column(name))
            throw ContractError("model consumes feature '" + name +
                                "' which is not in the algorithm space");
        const Column& bcol = bg.column(name);
        double sum = 0.0;
        for (std::size_t r = 0; r < bg.row_count(); ++r)
            sum += numeric_value(bcol.cells[r], name, bg.row_ids()[r]);
        wf.mu = sum / static_cast<double>(bg.row_count());
        if (!rows.has_column(name))
            throw ContractError("model consumes feature '" + name +
                                "' which is not a column of the input");
        base += w * wf.mu;
        feats.push_back(std::move(wf));
    }

    FeatureContributions out;
    out.base_value = base;
    out.exact = true;
    out.space = "algorithm";
    std::map<std::string, const WeightedFeature*> by_name;
    for (const auto& wf : feats) by_name[wf.name] = &wf;
    std::vector<const WeightedFeature*> by_column(rows.column_count(),
                                                  nullptr);
    for (std::size_t c = 0; c < rows.column_count(); ++c) {
        auto it = by_name.find(rows.column_at(c).name);
        if (it != by_name.end()) by_column[c] = it->second;
    }

    out.rows.reserve(rows.row_count());
    for (std::size_t r = 0; r < rows.row_count(); ++r) {
        ContributionRow crow;
        crow.row_id = rows.row_ids()[r];
        crow.entries.reserve(rows.column_count());
        double pred = lm.intercept;
        for (std::size_t c = 0; c < rows.column_count(); ++c) {
            const Column& col = rows.column_at(c);
            double phi = 0.0;
            if (const WeightedFeature* wf = by_column[c]) {
                double x = numeric_value(col.cells[r], col.name,
                                         rows.row_ids()[r]);
                phi = wf->w * (x - wf->mu);
                pred += wf->w * x;
            }
            crow.entries.push_back(
                ContributionEntry{col.name, col.cells[r], phi});
        }
        crow.prediction = pred;
        out.rows.push_back(std::move(crow));
    }
    return out;
}

namespace detail {

inline double metric_error(Metric metric, const std::vector<double>& preds,
                           const std::vector<double>& targets) {
    double sum = 0.0;
    std::size_t n = preds.size();
    if (metric == Metric::MSE) {
        for (std::size_t i = 0; i < n; ++i) {
            double d = preds[i] - targets[i];
            sum += d * d;
        }
        return sum / static_cast<double>(n);
    }
    for (std::size_t i = 0; i < n; ++i) {
        bool predicted = preds[i] >= 0.5;
        bool actual = targets[i] > 0.5;
        if (predicted != actual) sum += 1.0;
    }
    return sum / static_cast<double>(n); // error rate = 1 - accuracy
}

} // namespace detail

// Permutation feature importance: how much the error grows when one
// feature's column is shuffled. Each (feature, repeat) pair gets its own
// deterministic shuffle stream, so results are reproducible for a seed.
// Importance is mean over repeats of (permuted error - baseline error); for
// Accuracy that equals baseline accuracy minus mean permuted accuracy.
inline FeatureImportance permutation_importance(
    const FittedExplainer& f, const TransformPipeline& pipeline,
    const Model& model, const Table& eval, const std::vector<double>& targets,
    Metric metric, int repeats = 5, std::uint64_t seed = 0) {
    (void)f;
    if (eval.row_count() == 0)
        throw ContractError("cannot compute importance on an empty table");
    if (targets.size() != eval.row_count())
        throw ContractError("target count does not match row count");
    if (repeats < 1) throw ContractError("repeats must be at least 1");
    if (metric == Metric::MSE && model.task != Task::Regression)
        throw ConfigError("MSE importance requires a regression model");
    if (metric == Metric::Accuracy && model.task != Task::BinaryProbability)
        throw ConfigError(
            "accuracy importance requires a binary-probability model");

    std::vector<double> baseline_preds =
        predict(model, pipeline.algorithm_to_model_space(eval));
    double e0 = detail::metric_error(metric, baseline_preds, targets);

    FeatureImportance out;
    out.space = "algorithm";
    for (std::size_t i = 0; i < eval.column_count(); ++i) {
        double delta_sum = 0.0;
        for (int r = 0; r < repeats; ++r) {
            std::vector<Cell> cells = eval.column_at(i).cells;
            Rng rng(derive_stream_seed(seed, i,
                                       static_cast<std::uint64_t>(r)));
            seeded_shuffle(cells, rng);
            Table permuted = with_column_cells(eval, i, std::move(cells));
            std::vector<double> preds = predict(
                model, pipeline.algorithm_to_model_space(std::move(permuted)));
            delta_sum += detail::metric_error(metric, preds, targets) - e0;
        }
        out.entries.push_back(ImportanceEntry{
            eval.column_at(i).name,
            delta_sum / static_cast<double>(repeats)});
    }
    return out;
}

// Nearest training rows under a z-scored distance:
//   distance^2 = sum over numeric features ((x - x') / sigma)^2
//              + sum over categorical/boolean features [x != x']
// sigma = 0 contributes 0; a numeric pair with a missing side falls back to
// the 0/1 mismatch term. Ties break in favor of earlier training rows.
inline ExampleBased similar_examples(const FittedExplainer& f,
                                     const Table& x_rows, std::size_t k) {
    if (k < 1) throw ContractError("k must be at least 1");
    const Table& train = f.algo_train;
    std::map<std::string, const SeStat*> stats;
    for (const auto& s : f.se_stats) stats[s.column] = &s;

    struct ColumnPlan {
        const Column* train_col = nullptr;
        const Column* query_col = nullptr;
        double inv_sigma = 0.0; // 0 means "use mismatch term"
        bool numeric = false;
    };
    std::vector<ColumnPlan> plan;
    for (const auto& col : train.columns()) {
        if (!x_rows.has_column(col.name))
            throw ContractError("query is missing algorithm-space column '" +
                                col.name + "'");
        ColumnPlan p;
        p.train_col = &col;
        p.query_col = &x_rows.column(col.name);
        p.numeric = col.dtype == Dtype::Numeric;
        if (p.numeric) {
            auto it = stats.find(col.name);
            if (it != stats.end() && it->second->sigma > 0.0)
                p.inv_sigma = 1.0 / it->second->sigma;
        }
        plan.push_back(p);
    }

    std::size_t keep = std::min(k, train.row_count());
    ExampleBased out;
    out.kind = ExplanationKind::SimilarExamples;
    out.space = "algorithm";
    for (std::size_t q = 0; q < x_rows.row_count(); ++q) {
        // sorted ascending; equal distances keep the earlier training row
        std::vector<std::pair<double, std::size_t>> best;
        best.reserve(keep + 1);
        for (std::size_t t = 0; keep > 0 && t < train.row_count(); ++t) {
            double dist2 = 0.0;
            for (const auto& p : plan) {
                const Cell& a = p.query_col->cells[q];
                const Cell& b = p.train_col->cells[t];
                if (p.numeric && a.is_numeric() && b.is_numeric()) {
                    if (p.inv_sigma > 0.0) {
                        double z = (a.number() - b.number()) * p.inv_sigma;
                        dist2 += z * z;
                    }
                } else if (!(a == b)) {
                    dist2 += 1.0;
                }
            }
            if (best.size() == keep && dist2 >= best.back().first) continue;
            std::size_t pos = best.size();
            while (pos > 0 && best[pos - 1].first > dist2) --pos;
            best.insert(best.begin() + static_cast<std::ptrdiff_t>(pos),
                        {dist2, t});
            if (best.size() > keep) best.pop_back();
        }
        ExampleBasedRow row;
        row.row_id = x_rows.row_ids()[q];
        for (const auto& [dist2, t] : best) {
            ExampleNeighbor nb;
            nb.example_id = train.row_ids()[t];
            for (const auto& col : train.columns())
                nb.example.emplace_back(col.name, col.cells[t]);
            nb.target = Cell(f.targets[t]);
            nb.distance = std::sqrt(dist2);
            row.examples.push_back(std::move(nb));
        }
        out.rows.push_back(std::move(row));
    }
    return out;
}

struct ProduceOptions {
    std::size_t k = 5;   // similar examples per row
    int repeats = 5;     // permutation importance repeats
    std::map<std::string, std::string> descriptions;
};

struct ProduceResult {
    Explanation explanation;
    Audit audit;

    bool broke() const {
        for (const auto& ev : audit) {
            if (ev.event == "break") return true;
        }
        return false;
    }
};

namespace detail {

inline bool linear_path_available(const TransformPipeline& pipeline,
                                  const Model& model) {
    if (!model.is_linear() || model.task != Task::Regression) return false;
    for (const auto& tr : pipeline.transformers()) {
        if (tr.flags().model && !tr.flags().algo()) return false;
    }
    return true;
}

} // namespace detail

// The end-to-end produce path: route the input to algorithm space, run the
// explanation algorithm, convert the explanation to the interpretable
// space, attach interpretable feature values (local contributions), and
// apply display names. A Break-mode stop returns the partial explanation
// with its audit instead of raising.
inline ProduceResult produce_interpretable(const FittedExplainer& f,
                                           const TransformPipeline& pipeline,
                                           const Model& model, const Table& X,
                                           ExplanationKind kind,
                                           const ProduceOptions& options = {}) {
    std::optional<Explanation> algo_expl;
    switch (kind) {
        case ExplanationKind::FeatureContributions: {
            Table x_algo = pipeline.to_algorithm_space(X);
            algo_expl = detail::linear_path_available(pipeline, model)
                            ? Explanation(linear_contributions(f, pipeline,
                                                               model, x_algo))
                            : Explanation(exact_shapley(f, pipeline, model,
                                                        x_algo));
            break;
        }
        case ExplanationKind::FeatureImportance: {
            Metric metric = model.task == Task::Regression ? Metric::MSE
                                                           : Metric::Accuracy;
            algo_expl = Explanation(permutation_importance(
                f, pipeline, model, f.algo_train, f.targets, metric,
                options.repeats, f.seed));
            break;
        }
        case ExplanationKind::SimilarExamples: {
            Table x_algo = pipeline.to_algorithm_space(X);
            algo_expl = Explanation(similar_examples(f, x_algo, options.k));
            break;
        }
        case ExplanationKind::Counterfactual:
            throw CapabilityError(
                "no producer is available for counterfactual explanations");
    }

    ExplanationContext ctx;
    ctx.original = &X;
    auto [expl, audit] =
        pipeline.explanation_to_interpretable(std::move(*algo_expl), ctx);
    ProduceResult result{std::move(expl), std::move(audit)};
    if (result.broke()) return result;

    if (kind == ExplanationKind::FeatureContributions) {
        Table x_interp = pipeline.to_interpretable_space(X);
        // feature -> column index + 1, 0 for features with no column; rows
        // normally arrive in table order so the positional check avoids the
        // id lookup
        std::unordered_map<std::string, std::size_t> column_memo;
        std::size_t next = 0;
        for (auto& row : result.explanation.contributions().rows) {
            std::size_t r = next < x_interp.row_count() &&
                                    x_interp.row_ids()[next] == row.row_id
                                ? next
                                : x_interp.row_index(row.row_id);
            next = r + 1;
            for (auto& entry : row.entries) {
                auto [it, inserted] = column_memo.try_emplace(entry.feature, 0);
                if (inserted && x_interp.has_column(entry.feature))
                    it->second = x_interp.column_index(entry.feature) + 1;
                if (it->second)
                    entry.value = x_interp.column_at(it->second - 1).cells[r];
            }
        }
    }
    result.explanation =
        rename_features(std::move(result.explanation), options.descriptions);
    auto problems = validate(result.explanation);
    if (!problems.empty())
        throw Error("produced explanation failed validation: " +
                    problems.front());
    return result;
}

} // namespace realpipe
