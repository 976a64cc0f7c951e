#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "realpipe/errors.hpp"
#include "realpipe/explainer.hpp"
#include "realpipe/explanation.hpp"
#include "realpipe/model.hpp"
#include "realpipe/realapp.hpp"
#include "realpipe/rng.hpp"
#include "realpipe/serialize.hpp"
#include "realpipe/tabular.hpp"
#include "realpipe/transform.hpp"

namespace realpipe {

// Raised when the engine and the hand-rolled reference disagree; the CLI
// maps it to exit 5.
class EquivalenceError : public Error {
public:
    using Error::Error;
};

enum class Condition { NoPyreal, NoPyrealInterpret, Pyreal, PyrealFormat };

inline const char* condition_name(Condition c) {
    switch (c) {
        case Condition::NoPyreal: return "no_pyreal";
        case Condition::NoPyrealInterpret: return "no_pyreal_interpret";
        case Condition::Pyreal: return "pyreal";
        case Condition::PyrealFormat: return "pyreal_format";
    }
    return "unknown";
}

inline constexpr Condition kAllConditions[] = {
    Condition::NoPyreal, Condition::NoPyrealInterpret, Condition::Pyreal,
    Condition::PyrealFormat};

inline std::string bench_kind_token(ExplanationKind k) {
    switch (k) {
        case ExplanationKind::FeatureContributions: return "lfc";
        case ExplanationKind::FeatureImportance: return "gfi";
        case ExplanationKind::SimilarExamples: return "se";
        default: break;
    }
    throw ConfigError("explanation kind is not benchmarkable");
}

inline ExplanationKind bench_kind_from_token(const std::string& s) {
    if (s == "lfc") return ExplanationKind::FeatureContributions;
    if (s == "gfi") return ExplanationKind::FeatureImportance;
    if (s == "se") return ExplanationKind::SimilarExamples;
    throw ConfigError("unknown bench kind '" + s +
                      "' (expected \"lfc\", \"gfi\" or \"se\")");
}

struct BenchConfig {
    std::vector<std::size_t> sizes = {10000, 20000};
    std::vector<ExplanationKind> kinds = {
        ExplanationKind::FeatureContributions,
        ExplanationKind::FeatureImportance,
        ExplanationKind::SimilarExamples};
    int repeats = 10;
    std::uint64_t seed = 17;
};

inline BenchConfig parse_bench_config(const ojson& j) {
    if (!j.is_object()) throw ConfigError("bench config must be a JSON object");
    if (j.contains("version") &&
        j.at("version").get<std::string>() != "realpipe-bench-config/1")
        throw ConfigError("unsupported bench config version");
    BenchConfig cfg;
    if (j.contains("sizes")) {
        cfg.sizes.clear();
        for (const auto& s : j.at("sizes")) {
            if (!s.is_number_integer() || s.get<long long>() < 1)
                throw ConfigError("bench sizes must be positive integers");
            cfg.sizes.push_back(s.get<std::size_t>());
        }
        if (cfg.sizes.empty())
            throw ConfigError("bench config needs at least one size");
    }
    if (j.contains("kinds")) {
        cfg.kinds.clear();
        for (const auto& k : j.at("kinds"))
            cfg.kinds.push_back(bench_kind_from_token(k.get<std::string>()));
        if (cfg.kinds.empty())
            throw ConfigError("bench config needs at least one kind");
    }
    if (j.contains("repeats")) {
        if (!j.at("repeats").is_number_integer() ||
            j.at("repeats").get<long long>() < 1)
            throw ConfigError("bench repeats must be a positive integer");
        cfg.repeats = j.at("repeats").get<int>();
    }
    if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
    return cfg;
}

inline double percent_change(double a, double b) {
    return (b - a) / a * 100.0;
}

struct BenchEntry {
    Condition condition;
    ExplanationKind kind;
    std::size_t rows = 0;    // dataset size
    std::size_t queries = 0; // rows pushed through the explain call
    int runs = 0;
    double mean_seconds = 0.0;
    double std_seconds = 0.0;
};

struct PercentChangeEntry {
    ExplanationKind kind;
    std::size_t rows = 0;
    Condition from;
    Condition to;
    double percent = 0.0;
};

struct BenchReport {
    BenchConfig config;
    std::vector<BenchEntry> entries;
    std::vector<PercentChangeEntry> percent_changes;
    std::vector<std::string> notes;
    std::string equivalence = "ok";
};

// ---- synthetic housing-like data --------------------------------------------

namespace bench_detail {

inline constexpr std::uint64_t kDataStreamTag = 0xDA7A;

inline double uniform01(Rng& rng) {
    return static_cast<double>(rng.next_u64() >> 11) * 0x1.0p-53;
}

inline const std::vector<std::string>& ocean_categories() {
    static const std::vector<std::string> cats = {"inland", "near bay",
                                                  "near ocean"};
    return cats;
}

} // namespace bench_detail

// Six original-space columns: five numerics (a latitude/longitude grid pair
// among them) and one categorical, with occasional missing incomes. The
// target is a noisy linear signal so a fitted linear model is meaningful.
inline std::pair<Table, std::vector<double>> make_housing_table(
    std::size_t n, std::uint64_t seed) {
    using bench_detail::kDataStreamTag;
    using bench_detail::uniform01;

    Rng r_income(derive_stream_seed(seed, 0, kDataStreamTag));
    Rng r_age(derive_stream_seed(seed, 1, kDataStreamTag));
    Rng r_rooms(derive_stream_seed(seed, 2, kDataStreamTag));
    Rng r_lat(derive_stream_seed(seed, 3, kDataStreamTag));
    Rng r_long(derive_stream_seed(seed, 4, kDataStreamTag));
    Rng r_ocean(derive_stream_seed(seed, 5, kDataStreamTag));
    Rng r_noise(derive_stream_seed(seed, 6, kDataStreamTag));

    Column income{"med_income", Dtype::Numeric, {}};
    Column age{"house_age", Dtype::Numeric, {}};
    Column rooms{"avg_rooms", Dtype::Numeric, {}};
    Column lat{"latitude", Dtype::Numeric, {}};
    Column lng{"longitude", Dtype::Numeric, {}};
    Column ocean{"ocean_prox", Dtype::Categorical, {}};
    std::vector<double> targets;
    targets.reserve(n);

    const auto& cats = bench_detail::ocean_categories();
    for (std::size_t i = 0; i < n; ++i) {
        double v_income = 0.5 + 14.5 * uniform01(r_income);
        bool income_missing = uniform01(r_income) < 0.02;
        double v_age = 1.0 + 51.0 * uniform01(r_age);
        double v_rooms = 2.0 + 8.0 * uniform01(r_rooms);
        double v_lat = 37.0 + 0.01 * static_cast<double>(r_lat.next_below(20));
        double v_long =
            -122.5 + 0.01 * static_cast<double>(r_long.next_below(20));
        const std::string& v_ocean = cats[r_ocean.next_below(3)];
        double noise = -3.0 + 6.0 * uniform01(r_noise);

        income.cells.push_back(income_missing ? Cell::missing()
                                              : Cell(v_income));
        age.cells.push_back(Cell(v_age));
        rooms.cells.push_back(Cell(v_rooms));
        lat.cells.push_back(Cell(v_lat));
        lng.cells.push_back(Cell(v_long));
        ocean.cells.push_back(Cell(v_ocean));

        double bonus = 0.0;
        if (v_ocean == "near bay") bonus = 18.0;
        if (v_ocean == "near ocean") bonus = 9.0;
        targets.push_back(3.2 * v_income - 0.35 * v_age + 6.5 * v_rooms +
                          70.0 * (v_lat - 37.0) + 55.0 * (v_long + 122.5) +
                          bonus + noise);
    }

    std::vector<Column> columns = {std::move(income), std::move(age),
                                   std::move(rooms),  std::move(lat),
                                   std::move(lng),    std::move(ocean)};
    return {Table(std::move(columns)), std::move(targets)};
}

// (latitude, longitude) grid cells map onto 16 named districts.
inline MappingEncoderSpec make_neighborhood_spec() {
    MappingEncoderSpec spec;
    spec.source_columns = {"latitude", "longitude"};
    spec.target_column = "neighborhood";
    spec.default_label = "unknown district";
    for (int gi = 0; gi < 20; ++gi) {
        for (int gj = 0; gj < 20; ++gj) {
            std::vector<Cell> key = {
                Cell(37.0 + 0.01 * static_cast<double>(gi)),
                Cell(-122.5 + 0.01 * static_cast<double>(gj))};
            spec.lookup.emplace_back(
                std::move(key),
                "district_" + std::to_string((gi / 5) * 4 + gj / 5));
        }
    }
    return spec;
}

inline std::map<std::string, std::string> housing_descriptions() {
    return {{"med_income", "Median Income"},
            {"ocean_prox", "Ocean Proximity"}};
}

// ---- the hand-rolled straight-line path --------------------------------------
//
// A deliberately separate implementation of the same fixture: inline
// imputation, one-hot flags, grid lookup, group sums and renames, written
// against the plain table structures rather than the pipeline machinery.
// The model object and the seeded-stream helpers are shared, the way
// hand-written notebook code shares the model and its libraries.

struct HandRolled {
    std::vector<std::string> categories; // ocean_prox values, first seen order
    double income_fill = 0.0;
    Table train_enc;                   // pre-encoded training table
    std::vector<double> weights;       // aligned with train_enc columns
    double intercept = 0.0;
    std::vector<double> mu_bg;         // background means per encoded column
    std::vector<double> inv_sigma;     // per encoded column; 0: mismatch term
    std::vector<double> targets;
    const Model* model = nullptr;
    std::unordered_map<std::string, std::string> grid_labels;
    std::string default_label;
    std::uint64_t seed = 0;
    int produce_repeats = 5;
};

namespace bench_detail {

inline std::string grid_key(double lat, double lng) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f|%.6f", lat, lng);
    return buf;
}

inline const std::string& grid_label(const HandRolled& h, double lat,
                                     double lng) {
    auto it = h.grid_labels.find(grid_key(lat, lng));
    return it == h.grid_labels.end() ? h.default_label : it->second;
}

// The passes below mirror the straight-line notebook workflow one dataframe
// op at a time, each materializing its result before the next begins.

inline Table hand_fill_income(const HandRolled& h, const Table& X) {
    std::vector<Column> columns = X.columns();
    Column& income = columns[X.column_index("med_income")];
    for (auto& c : income.cells) {
        if (c.is_missing()) c = Cell(h.income_fill);
    }
    return Table(std::move(columns), X);
}

inline Table hand_onehot(const HandRolled& h, const Table& X) {
    const Column& ocean = X.column("ocean_prox");
    std::vector<Column> columns;
    columns.reserve(5 + h.categories.size());
    columns.push_back(X.column("med_income"));
    columns.push_back(X.column("house_age"));
    columns.push_back(X.column("avg_rooms"));
    columns.push_back(X.column("latitude"));
    columns.push_back(X.column("longitude"));
    for (const auto& cat : h.categories) {
        Column flag{"ocean_prox_" + cat, Dtype::Boolean, {}};
        flag.cells.reserve(X.row_count());
        for (const auto& c : ocean.cells)
            flag.cells.push_back(Cell(c.is_text() && c.text() == cat));
        columns.push_back(std::move(flag));
    }
    return Table(std::move(columns), X);
}

inline Table hand_encode(const HandRolled& h, const Table& X) {
    return hand_onehot(h, hand_fill_income(h, X));
}

// Copy of the filled frame with the grid pair swapped for the neighborhood
// label: what the user-facing columns look like.
inline Table hand_interpretable(const HandRolled& h, const Table& filled) {
    const Column& lat = filled.column("latitude");
    const Column& lng = filled.column("longitude");
    Column neighborhood{"neighborhood", Dtype::Categorical, {}};
    neighborhood.cells.reserve(filled.row_count());
    for (std::size_t r = 0; r < filled.row_count(); ++r)
        neighborhood.cells.push_back(Cell(grid_label(
            h, lat.cells[r].number(), lng.cells[r].number())));
    std::vector<Column> columns;
    columns.reserve(5);
    columns.push_back(filled.column("med_income"));
    columns.push_back(filled.column("house_age"));
    columns.push_back(filled.column("avg_rooms"));
    columns.push_back(std::move(neighborhood));
    columns.push_back(filled.column("ocean_prox"));
    return Table(std::move(columns), filled);
}

inline double cell_as_double(const Cell& c) {
    if (c.is_numeric()) return c.number();
    return c.truth() ? 1.0 : 0.0;
}

// One scored entry per encoded column, plus the prediction.
inline FeatureContributions hand_raw_contributions(const HandRolled& h,
                                                   const Table& enc) {
    std::size_t nc = enc.column_count();
    FeatureContributions out;
    out.space = "algorithm";
    out.exact = true;
    out.base_value = h.intercept;
    for (std::size_t j = 0; j < nc; ++j)
        out.base_value += h.weights[j] * h.mu_bg[j];
    out.rows.reserve(enc.row_count());
    for (std::size_t r = 0; r < enc.row_count(); ++r) {
        ContributionRow row;
        row.row_id = enc.row_ids()[r];
        row.entries.reserve(nc);
        double pred = h.intercept;
        for (std::size_t j = 0; j < nc; ++j) {
            const Column& col = enc.column_at(j);
            double x = cell_as_double(col.cells[r]);
            row.entries.push_back(ContributionEntry{
                col.name, col.cells[r], h.weights[j] * (x - h.mu_bg[j])});
            pred += h.weights[j] * x;
        }
        row.prediction = pred;
        out.rows.push_back(std::move(row));
    }
    return out;
}

// Entries arrive as [income, age, rooms, lat, lng, flags...]; the flag block
// collapses into one ocean_prox score.
inline void hand_sum_onehot_group(FeatureContributions& exp) {
    for (auto& row : exp.rows) {
        double flag_sum = 0.0;
        for (std::size_t j = 5; j < row.entries.size(); ++j)
            flag_sum += row.entries[j].contribution;
        row.entries[5] =
            ContributionEntry{"ocean_prox", Cell::missing(), flag_sum};
        row.entries.resize(6);
    }
}

inline void hand_sum_grid_group(FeatureContributions& exp) {
    for (auto& row : exp.rows) {
        double grid_sum =
            row.entries[3].contribution + row.entries[4].contribution;
        row.entries[3] =
            ContributionEntry{"neighborhood", Cell::missing(), grid_sum};
        row.entries.erase(row.entries.begin() + 4);
    }
}

inline void hand_attach_and_rename(FeatureContributions& exp,
                                   const Table& interp) {
    static const char* const display[] = {"Median Income", "house_age",
                                          "avg_rooms", "neighborhood",
                                          "Ocean Proximity"};
    for (std::size_t r = 0; r < exp.rows.size(); ++r) {
        auto& row = exp.rows[r];
        for (std::size_t j = 0; j < 5; ++j) {
            row.entries[j].feature = display[j];
            row.entries[j].value = interp.column_at(j).cells[r];
        }
    }
    exp.space = "interpretable";
}

} // namespace bench_detail

inline HandRolled build_hand_rolled(const Table& train,
                                    const std::vector<double>& targets,
                                    const Model& model,
                                    const MappingEncoderSpec& neighborhood,
                                    std::uint64_t seed) {
    HandRolled h;
    h.seed = seed;
    h.model = &model;
    h.targets = targets;
    h.default_label = neighborhood.default_label;
    for (const auto& [key, label] : neighborhood.lookup)
        h.grid_labels[bench_detail::grid_key(key[0].number(),
                                             key[1].number())] = label;

    const Column& income = train.column("med_income");
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto& c : income.cells) {
        if (c.is_numeric()) {
            sum += c.number();
            ++count;
        }
    }
    h.income_fill = count ? sum / static_cast<double>(count) : 0.0;

    for (const auto& c : train.column("ocean_prox").cells) {
        if (!c.is_text()) continue;
        if (std::find(h.categories.begin(), h.categories.end(), c.text()) ==
            h.categories.end())
            h.categories.push_back(c.text());
    }

    h.train_enc = bench_detail::hand_encode(h, train);

    const auto& w = model.linear().weights;
    h.intercept = model.linear().intercept;
    for (const auto& col : h.train_enc.columns()) {
        auto it = w.find(col.name);
        h.weights.push_back(it == w.end() ? 0.0 : it->second);
    }

    std::vector<std::size_t> picks =
        sample_indices(train.row_count(), 100, seed);
    for (const auto& col : h.train_enc.columns()) {
        double total = 0.0;
        for (std::size_t idx : picks)
            total += bench_detail::cell_as_double(col.cells[idx]);
        h.mu_bg.push_back(total / static_cast<double>(picks.size()));
    }

    for (const auto& col : h.train_enc.columns()) {
        if (col.dtype != Dtype::Numeric) {
            h.inv_sigma.push_back(0.0);
            continue;
        }
        double mu = 0.0;
        for (const auto& c : col.cells) mu += c.number();
        mu /= static_cast<double>(col.cells.size());
        double sq = 0.0;
        for (const auto& c : col.cells)
            sq += (c.number() - mu) * (c.number() - mu);
        double sigma = std::sqrt(sq / static_cast<double>(col.cells.size()));
        h.inv_sigma.push_back(sigma > 0.0 ? 1.0 / sigma : 0.0);
    }
    return h;
}

inline Explanation hand_local_contributions(const HandRolled& h,
                                            const Table& X) {
    Table filled = bench_detail::hand_fill_income(h, X);
    Table enc = bench_detail::hand_onehot(h, filled);
    Table interp = bench_detail::hand_interpretable(h, filled);
    FeatureContributions exp = bench_detail::hand_raw_contributions(h, enc);
    bench_detail::hand_sum_onehot_group(exp);
    bench_detail::hand_sum_grid_group(exp);
    bench_detail::hand_attach_and_rename(exp, interp);
    return Explanation(std::move(exp));
}

inline Explanation hand_global_importance(const HandRolled& h) {
    const Table& enc = h.train_enc;
    std::size_t n = enc.row_count();
    std::size_t nc = enc.column_count();

    auto mse = [&](const std::vector<double>& preds) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double d = preds[i] - h.targets[i];
            total += d * d;
        }
        return total / static_cast<double>(n);
    };

    double e0 = mse(predict(*h.model, enc));
    std::vector<double> imp(nc);
    for (std::size_t i = 0; i < nc; ++i) {
        double delta = 0.0;
        for (int r = 0; r < h.produce_repeats; ++r) {
            std::vector<Cell> cells = enc.column_at(i).cells;
            Rng rng(derive_stream_seed(h.seed, i,
                                       static_cast<std::uint64_t>(r)));
            seeded_shuffle(cells, rng);
            Table permuted = with_column_cells(enc, i, std::move(cells));
            delta += mse(predict(*h.model, permuted)) - e0;
        }
        imp[i] = delta / static_cast<double>(h.produce_repeats);
    }

    double flag_sum = 0.0;
    for (std::size_t j = 5; j < nc; ++j) flag_sum += imp[j];
    FeatureImportance out;
    out.space = "interpretable";
    out.entries = {ImportanceEntry{"Median Income", imp[0]},
                   ImportanceEntry{"house_age", imp[1]},
                   ImportanceEntry{"avg_rooms", imp[2]},
                   ImportanceEntry{"neighborhood", imp[3] + imp[4]},
                   ImportanceEntry{"Ocean Proximity", flag_sum}};
    return Explanation(std::move(out));
}

inline Explanation hand_similar_examples(const HandRolled& h, const Table& X,
                                         std::size_t k) {
    Table enc = bench_detail::hand_encode(h, X);
    const Table& train = h.train_enc;
    std::size_t nc = train.column_count();
    std::size_t keep = std::min(k, train.row_count());

    ExampleBased out;
    out.kind = ExplanationKind::SimilarExamples;
    out.space = "interpretable";
    out.rows.reserve(enc.row_count());
    for (std::size_t q = 0; q < enc.row_count(); ++q) {
        std::vector<std::pair<double, std::size_t>> best;
        best.reserve(keep + 1);
        for (std::size_t t = 0; keep > 0 && t < train.row_count(); ++t) {
            double dist2 = 0.0;
            for (std::size_t j = 0; j < nc; ++j) {
                const Cell& a = enc.column_at(j).cells[q];
                const Cell& b = train.column_at(j).cells[t];
                if (j < 5) {
                    if (h.inv_sigma[j] > 0.0) {
                        double z = (a.number() - b.number()) * h.inv_sigma[j];
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
        row.row_id = enc.row_ids()[q];
        for (const auto& [dist2, t] : best) {
            double lat = train.column_at(3).cells[t].number();
            double lng = train.column_at(4).cells[t].number();
            std::string category;
            for (std::size_t j = 5; j < nc; ++j) {
                if (train.column_at(j).cells[t].truth())
                    category = h.categories[j - 5];
            }
            ExampleNeighbor nb;
            nb.example_id = train.row_ids()[t];
            nb.example = {
                {"Median Income", train.column_at(0).cells[t]},
                {"house_age", train.column_at(1).cells[t]},
                {"avg_rooms", train.column_at(2).cells[t]},
                {"neighborhood", Cell(bench_detail::grid_label(h, lat, lng))},
                {"Ocean Proximity", Cell(category)}};
            nb.target = Cell(h.targets[t]);
            nb.distance = std::sqrt(dist2);
            row.examples.push_back(std::move(nb));
        }
        out.rows.push_back(std::move(row));
    }
    return Explanation(std::move(out));
}

// ---- fixtures and conditions --------------------------------------------------

struct BenchFixture {
    Table train;
    std::vector<double> targets;
    TransformPipeline pipeline;
    Model model;
    std::map<std::string, std::string> descriptions;
    FittedExplainer ex_lfc;
    FittedExplainer ex_gfi;
    FittedExplainer ex_se;
    Table x_se;       // original-space query batch for similar examples
    Table x_algo_full; // pre-routed full table (model space == algorithm space)
    Table x_se_algo;  // pre-routed query batch
    HandRolled hand;
    std::uint64_t seed = 0;
    std::size_t se_queries = 0;
};

inline constexpr std::size_t kSeQueryBatch = 200;

inline BenchFixture make_housing_fixture(std::size_t n, std::uint64_t seed) {
    BenchFixture fx;
    fx.seed = seed;
    auto [train, targets] = make_housing_table(n, seed);
    fx.train = std::move(train);
    fx.targets = std::move(targets);

    FeatureSpaceFlags both;
    both.model = true;
    both.interpret = true;
    FeatureSpaceFlags model_only;
    model_only.model = true;
    model_only.interpret = false;
    FeatureSpaceFlags interpret_only;
    interpret_only.model = false;
    interpret_only.interpret = true;

    MappingEncoderSpec neighborhood = make_neighborhood_spec();
    std::vector<Transformer> transformers;
    transformers.emplace_back(ImputerSpec{}, both);
    transformers.emplace_back(OneHotEncoderSpec{{"ocean_prox"}}, model_only);
    transformers.emplace_back(neighborhood, interpret_only);
    fx.pipeline = TransformPipeline(std::move(transformers));
    fx.pipeline.fit(fx.train);

    fx.model.impl = fit_linear(fx.pipeline.to_model_space(fx.train),
                               fx.targets);
    fx.model.task = Task::Regression;
    fx.descriptions = housing_descriptions();

    fx.ex_lfc = fit_explainer(ExplanationKind::FeatureContributions,
                              fx.pipeline, fx.model, fx.train, fx.targets,
                              seed);
    fx.ex_gfi = fit_explainer(ExplanationKind::FeatureImportance, fx.pipeline,
                              fx.model, fx.train, fx.targets, seed);
    fx.ex_se = fit_explainer(ExplanationKind::SimilarExamples, fx.pipeline,
                             fx.model, fx.train, fx.targets, seed);

    fx.se_queries = std::min(kSeQueryBatch, fx.train.row_count());
    std::vector<std::size_t> head(fx.se_queries);
    for (std::size_t i = 0; i < fx.se_queries; ++i) head[i] = i;
    fx.x_se = select_row_indices(fx.train, head);
    fx.x_algo_full = fx.pipeline.to_algorithm_space(fx.train);
    fx.x_se_algo = fx.pipeline.to_algorithm_space(fx.x_se);

    fx.hand = build_hand_rolled(fx.train, fx.targets, fx.model, neighborhood,
                                seed);
    return fx;
}

struct ConditionRun {
    std::optional<Explanation> explanation;
    double seconds = 0.0;
    std::size_t formatted_rows = 0;
};

// Timing covers explanation generation only; every input the condition needs
// is prepared in the fixture.
inline ConditionRun run_condition(Condition c, ExplanationKind kind,
                                  const BenchFixture& fx) {
    ConditionRun run;
    ProduceOptions options;
    options.descriptions = fx.descriptions;
    options.k = 5;
    options.repeats = fx.hand.produce_repeats;

    auto t0 = std::chrono::steady_clock::now();
    switch (c) {
        case Condition::NoPyreal:
            if (kind == ExplanationKind::FeatureContributions) {
                run.explanation = Explanation(linear_contributions(
                    fx.ex_lfc, fx.pipeline, fx.model, fx.x_algo_full));
            } else if (kind == ExplanationKind::FeatureImportance) {
                run.explanation = Explanation(permutation_importance(
                    fx.ex_gfi, fx.pipeline, fx.model, fx.ex_gfi.algo_train,
                    fx.ex_gfi.targets, Metric::MSE, fx.hand.produce_repeats,
                    fx.seed));
            } else {
                run.explanation = Explanation(
                    similar_examples(fx.ex_se, fx.x_se_algo, options.k));
            }
            break;
        case Condition::NoPyrealInterpret:
            if (kind == ExplanationKind::FeatureContributions)
                run.explanation = hand_local_contributions(fx.hand, fx.train);
            else if (kind == ExplanationKind::FeatureImportance)
                run.explanation = hand_global_importance(fx.hand);
            else
                run.explanation =
                    hand_similar_examples(fx.hand, fx.x_se, options.k);
            break;
        case Condition::Pyreal:
        case Condition::PyrealFormat: {
            const FittedExplainer& f =
                kind == ExplanationKind::FeatureContributions ? fx.ex_lfc
                : kind == ExplanationKind::FeatureImportance  ? fx.ex_gfi
                                                              : fx.ex_se;
            const Table& X =
                kind == ExplanationKind::SimilarExamples ? fx.x_se : fx.train;
            ProduceResult result = produce_interpretable(f, fx.pipeline,
                                                         fx.model, X, kind,
                                                         options);
            if (c == Condition::PyrealFormat) {
                if (kind == ExplanationKind::FeatureContributions) {
                    ContributionsOutput out = format_contributions(
                        result.explanation.contributions(),
                        std::move(result.audit));
                    run.formatted_rows = out.rows.size();
                } else if (kind == ExplanationKind::FeatureImportance) {
                    ImportanceOutput out = format_importance(
                        result.explanation.importance(),
                        std::move(result.audit));
                    run.formatted_rows = out.entries.size();
                } else {
                    SimilarExamplesOutput out = format_examples(
                        result.explanation.examples(),
                        std::move(result.audit));
                    run.formatted_rows = out.rows.size();
                }
            }
            run.explanation = std::move(result.explanation);
            break;
        }
    }
    auto t1 = std::chrono::steady_clock::now();
    run.seconds = std::chrono::duration<double>(t1 - t0).count();
    return run;
}

// ---- equivalence ---------------------------------------------------------------

struct EquivalenceResult {
    bool ok = true;
    std::string diff;
};

namespace bench_detail {

inline bool cells_close(const Cell& a, const Cell& b, double tol) {
    if (a.is_numeric() && b.is_numeric())
        return std::fabs(a.number() - b.number()) <= tol;
    return a == b;
}

inline std::string cell_text(const Cell& c) { return c.to_display(); }

class DiffLog {
public:
    void add(const std::string& line) {
        if (lines_ >= 20) {
            truncated_ = true;
            return;
        }
        if (!text_.empty()) text_.push_back('\n');
        text_ += line;
        ++lines_;
    }
    bool empty() const { return lines_ == 0; }
    std::string str() const {
        return truncated_ ? text_ + "\n..." : text_;
    }

private:
    std::string text_;
    int lines_ = 0;
    bool truncated_ = false;
};

template <typename Entries, typename NameOf>
inline void diff_feature_sets(const Entries& a, const Entries& b,
                              NameOf name_of, const std::string& where,
                              DiffLog& log) {
    auto names = [&](const Entries& entries) {
        std::vector<std::string> out;
        out.reserve(entries.size());
        for (const auto& e : entries) out.push_back(name_of(e));
        std::sort(out.begin(), out.end());
        return out;
    };
    std::vector<std::string> na = names(a);
    std::vector<std::string> nb = names(b);
    if (na == nb) return;
    std::vector<std::string> only_a;
    std::vector<std::string> only_b;
    std::set_difference(na.begin(), na.end(), nb.begin(), nb.end(),
                        std::back_inserter(only_a));
    std::set_difference(nb.begin(), nb.end(), na.begin(), na.end(),
                        std::back_inserter(only_b));
    std::string line = where + ": feature sets differ";
    if (!only_a.empty())
        line += "; only in first: " + detail::join_names(only_a);
    if (!only_b.empty())
        line += "; only in second: " + detail::join_names(only_b);
    log.add(line);
}

} // namespace bench_detail

inline EquivalenceResult assert_equivalence(const Explanation& a,
                                            const Explanation& b,
                                            double tol = 1e-9) {
    using bench_detail::cells_close;
    using bench_detail::DiffLog;
    DiffLog log;
    if (a.kind() != b.kind()) {
        log.add("explanation kinds differ: " +
                std::string(explanation_kind_name(a.kind())) + " vs " +
                std::string(explanation_kind_name(b.kind())));
        return {false, log.str()};
    }

    if (a.is_contributions()) {
        const auto& ca = a.contributions();
        const auto& cb = b.contributions();
        if (std::fabs(ca.base_value - cb.base_value) > tol)
            log.add("base values differ: " + format_double(ca.base_value) +
                    " vs " + format_double(cb.base_value));
        if (ca.rows.size() != cb.rows.size()) {
            log.add("row counts differ: " + std::to_string(ca.rows.size()) +
                    " vs " + std::to_string(cb.rows.size()));
            return {false, log.str()};
        }
        for (std::size_t r = 0; r < ca.rows.size(); ++r) {
            const auto& ra = ca.rows[r];
            const auto& rb = cb.rows[r];
            const std::string where = "row '" + ra.row_id + "'";
            if (ra.row_id != rb.row_id) {
                log.add("row ids differ at position " + std::to_string(r) +
                        ": '" + ra.row_id + "' vs '" + rb.row_id + "'");
                continue;
            }
            bench_detail::diff_feature_sets(
                ra.entries, rb.entries,
                [](const ContributionEntry& e) { return e.feature; }, where,
                log);
            for (const auto& ea : ra.entries) {
                const ContributionEntry* eb = nullptr;
                for (const auto& candidate : rb.entries) {
                    if (candidate.feature == ea.feature) {
                        eb = &candidate;
                        break;
                    }
                }
                if (!eb) continue;
                if (std::fabs(ea.contribution - eb->contribution) > tol)
                    log.add(where + " feature '" + ea.feature +
                            "': contributions differ by " +
                            format_double(std::fabs(ea.contribution -
                                                    eb->contribution)));
                if (!cells_close(ea.value, eb->value, tol))
                    log.add(where + " feature '" + ea.feature +
                            "': values differ (" +
                            bench_detail::cell_text(ea.value) + " vs " +
                            bench_detail::cell_text(eb->value) + ")");
            }
            if (ra.prediction && rb.prediction &&
                std::fabs(*ra.prediction - *rb.prediction) > tol)
                log.add(where + ": predictions differ by " +
                        format_double(
                            std::fabs(*ra.prediction - *rb.prediction)));
        }
    } else if (a.is_importance()) {
        const auto& ia = a.importance();
        const auto& ib = b.importance();
        bench_detail::diff_feature_sets(
            ia.entries, ib.entries,
            [](const ImportanceEntry& e) { return e.feature; }, "importance",
            log);
        for (const auto& ea : ia.entries) {
            for (const auto& eb : ib.entries) {
                if (eb.feature != ea.feature) continue;
                if (std::fabs(ea.importance - eb.importance) > tol)
                    log.add("feature '" + ea.feature +
                            "': importances differ by " +
                            format_double(
                                std::fabs(ea.importance - eb.importance)));
            }
        }
    } else {
        const auto& xa = a.examples();
        const auto& xb = b.examples();
        if (xa.rows.size() != xb.rows.size()) {
            log.add("row counts differ: " + std::to_string(xa.rows.size()) +
                    " vs " + std::to_string(xb.rows.size()));
            return {false, log.str()};
        }
        for (std::size_t r = 0; r < xa.rows.size(); ++r) {
            const auto& ra = xa.rows[r];
            const auto& rb = xb.rows[r];
            const std::string where = "row '" + ra.row_id + "'";
            if (ra.row_id != rb.row_id) {
                log.add("row ids differ at position " + std::to_string(r));
                continue;
            }
            if (ra.examples.size() != rb.examples.size()) {
                log.add(where + ": neighbor counts differ");
                continue;
            }
            for (std::size_t e = 0; e < ra.examples.size(); ++e) {
                const auto& na = ra.examples[e];
                const auto& nb = rb.examples[e];
                const std::string at =
                    where + " neighbor " + std::to_string(e);
                if (na.example_id != nb.example_id)
                    log.add(at + ": example ids differ ('" + na.example_id +
                            "' vs '" + nb.example_id + "')");
                if (std::fabs(na.distance - nb.distance) > tol)
                    log.add(at + ": distances differ by " +
                            format_double(
                                std::fabs(na.distance - nb.distance)));
                if (!cells_close(na.target, nb.target, tol))
                    log.add(at + ": targets differ");
                bench_detail::diff_feature_sets(
                    na.example, nb.example,
                    [](const std::pair<std::string, Cell>& p) {
                        return p.first;
                    },
                    at, log);
                for (const auto& [feature, cell] : na.example) {
                    for (const auto& [other_feature, other_cell] :
                         nb.example) {
                        if (other_feature != feature) continue;
                        if (!cells_close(cell, other_cell, tol))
                            log.add(at + " feature '" + feature +
                                    "': values differ");
                    }
                }
            }
        }
    }
    if (log.empty()) return {true, ""};
    return {false, log.str()};
}

// ---- the protocol ---------------------------------------------------------------

namespace bench_detail {

inline std::pair<double, double> mean_std(const std::vector<double>& xs) {
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double var = 0.0;
    for (double x : xs) var += (x - mean) * (x - mean);
    var /= static_cast<double>(xs.size());
    return {mean, std::sqrt(var)};
}

inline std::size_t queries_for(ExplanationKind kind, const BenchFixture& fx) {
    if (kind == ExplanationKind::SimilarExamples) return fx.se_queries;
    return fx.train.row_count();
}

} // namespace bench_detail

inline BenchReport run_benchmark(const BenchConfig& cfg) {
    BenchReport report;
    report.config = cfg;
    report.notes = {
        "similar-examples conditions time a " +
            std::to_string(kSeQueryBatch) +
            "-row query batch; the training scan covers the full dataset",
        "the no_pyreal condition for similar examples returns "
        "algorithm-space neighbors without interpretable rendering",
        "importance conditions start from a pre-encoded training table on "
        "both paths, matching the fitted state the engine keeps",
        "no_pyreal_interpret is straight-line code over the same table "
        "structures, sharing only the model object and the seeded stream "
        "helpers"};

    for (std::size_t size : cfg.sizes) {
        BenchFixture fx = make_housing_fixture(size, cfg.seed);
        for (ExplanationKind kind : cfg.kinds) {
            ConditionRun engine_run =
                run_condition(Condition::Pyreal, kind, fx);
            ConditionRun hand_run =
                run_condition(Condition::NoPyrealInterpret, kind, fx);
            EquivalenceResult eq = assert_equivalence(
                *engine_run.explanation, *hand_run.explanation, 1e-9);
            if (!eq.ok)
                throw EquivalenceError(
                    "equivalence failure between pyreal and "
                    "no_pyreal_interpret for " +
                    bench_kind_token(kind) + " at " + std::to_string(size) +
                    " rows:\n" + eq.diff);

            std::map<Condition, double> means;
            for (Condition c : kAllConditions) {
                std::vector<double> seconds;
                seconds.reserve(static_cast<std::size_t>(cfg.repeats));
                for (int r = 0; r < cfg.repeats; ++r)
                    seconds.push_back(run_condition(c, kind, fx).seconds);
                auto [mean, sd] = bench_detail::mean_std(seconds);
                means[c] = mean;
                BenchEntry entry;
                entry.condition = c;
                entry.kind = kind;
                entry.rows = size;
                entry.queries = bench_detail::queries_for(kind, fx);
                entry.runs = cfg.repeats;
                entry.mean_seconds = mean;
                entry.std_seconds = sd;
                report.entries.push_back(entry);
            }
            for (Condition from : kAllConditions) {
                for (Condition to : kAllConditions) {
                    if (from == to) continue;
                    report.percent_changes.push_back(PercentChangeEntry{
                        kind, size, from, to,
                        percent_change(means[from], means[to])});
                }
            }
        }
    }
    return report;
}

inline ojson bench_report_to_json(const BenchReport& report) {
    ojson j;
    j["version"] = "realpipe-bench/1";
    ojson env;
#if defined(__VERSION__)
    env["compiler"] = __VERSION__;
#else
    env["compiler"] = "unknown";
#endif
#if defined(__linux__)
    env["os"] = "linux";
#elif defined(__APPLE__)
    env["os"] = "macos";
#elif defined(_WIN32)
    env["os"] = "windows";
#else
    env["os"] = "unknown";
#endif
#if defined(NDEBUG)
    env["build"] = "release";
#else
    env["build"] = "debug";
#endif
    j["environment"] = std::move(env);

    ojson config;
    config["sizes"] = report.config.sizes;
    ojson kinds = ojson::array();
    for (ExplanationKind k : report.config.kinds)
        kinds.push_back(bench_kind_token(k));
    config["kinds"] = std::move(kinds);
    config["repeats"] = report.config.repeats;
    config["seed"] = report.config.seed;
    j["config"] = std::move(config);

    j["equivalence"] = report.equivalence;

    ojson entries = ojson::array();
    for (const auto& e : report.entries) {
        ojson je;
        je["condition"] = condition_name(e.condition);
        je["kind"] = bench_kind_token(e.kind);
        je["rows"] = e.rows;
        je["queries"] = e.queries;
        je["runs"] = e.runs;
        je["mean_seconds"] = e.mean_seconds;
        je["std_seconds"] = e.std_seconds;
        entries.push_back(std::move(je));
    }
    j["entries"] = std::move(entries);

    ojson changes = ojson::array();
    for (const auto& p : report.percent_changes) {
        ojson jp;
        jp["kind"] = bench_kind_token(p.kind);
        jp["rows"] = p.rows;
        jp["from"] = condition_name(p.from);
        jp["to"] = condition_name(p.to);
        jp["percent"] = p.percent;
        changes.push_back(std::move(jp));
    }
    j["percent_changes"] = std::move(changes);
    j["notes"] = report.notes;
    return j;
}

} // namespace realpipe
