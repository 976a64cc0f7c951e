#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include <realpipe/model.hpp>
#include <realpipe/rng.hpp>
#include <realpipe/tabular.hpp>

using namespace realpipe;

namespace {

Table numeric_table(const std::vector<std::string>& names,
                    const std::vector<std::vector<double>>& rows) {
    std::vector<Column> cols;
    for (std::size_t c = 0; c < names.size(); ++c) {
        Column col{names[c], Dtype::Numeric, {}};
        for (const auto& row : rows) col.cells.push_back(Cell(row[c]));
        cols.push_back(std::move(col));
    }
    return Table(std::move(cols));
}

double sse(const Table& X, const std::vector<double>& y,
           const LinearModel& lm) {
    double total = 0.0;
    for (std::size_t r = 0; r < X.row_count(); ++r) {
        double pred = lm.intercept;
        for (const auto& [name, w] : lm.weights)
            pred += w * X.column(name).cells[r].number();
        total += (pred - y[r]) * (pred - y[r]);
    }
    return total;
}

Model and_tree() {
    // value 1 only when both inputs exceed 0.5
    TreeModel tm;
    tm.nodes.push_back({false, 0.0, "x1", 0.5, 1, 2});
    tm.nodes.push_back({true, 0.0, "", 0.0, 0, 0});
    tm.nodes.push_back({false, 0.0, "x2", 0.5, 3, 4});
    tm.nodes.push_back({true, 0.0, "", 0.0, 0, 0});
    tm.nodes.push_back({true, 1.0, "", 0.0, 0, 0});
    validate_tree(tm);
    Model m;
    m.impl = std::move(tm);
    return m;
}

} // namespace

TEST(FitLinear, RecoversAnExactLinearRelationship) {
    std::vector<std::vector<double>> rows;
    std::vector<double> y;
    Rng rng(41);
    for (int i = 0; i < 40; ++i) {
        double x1 = static_cast<double>(rng.next_below(100)) / 10.0;
        double x2 = static_cast<double>(rng.next_below(100)) / 10.0 - 5.0;
        rows.push_back({x1, x2});
        y.push_back(2.0 * x1 - 3.0 * x2 + 7.0);
    }
    Table X = numeric_table({"x1", "x2"}, rows);
    LinearModel lm = fit_linear(X, y);
    EXPECT_NEAR(lm.weights.at("x1"), 2.0, 1e-6);
    EXPECT_NEAR(lm.weights.at("x2"), -3.0, 1e-6);
    EXPECT_NEAR(lm.intercept, 7.0, 1e-6);
}

TEST(FitLinear, ResidualsSatisfyTheNormalEquations) {
    // At the least-squares optimum the residual is orthogonal to every
    // regressor column and to the intercept, up to the tiny ridge term.
    std::vector<std::vector<double>> rows;
    std::vector<double> y;
    Rng rng(97);
    for (int i = 0; i < 60; ++i) {
        double x1 = static_cast<double>(rng.next_below(1000)) / 100.0;
        double x2 = static_cast<double>(rng.next_below(1000)) / 100.0;
        double noise = static_cast<double>(rng.next_below(200)) / 100.0 - 1.0;
        rows.push_back({x1, x2});
        y.push_back(1.5 * x1 + 0.25 * x2 - 2.0 + noise);
    }
    Table X = numeric_table({"x1", "x2"}, rows);
    LinearModel lm = fit_linear(X, y);

    std::vector<double> res;
    for (std::size_t r = 0; r < X.row_count(); ++r) {
        double pred = lm.intercept +
                      lm.weights.at("x1") * rows[r][0] +
                      lm.weights.at("x2") * rows[r][1];
        res.push_back(y[r] - pred);
    }
    double dot_intercept = 0.0, dot_x1 = 0.0, dot_x2 = 0.0;
    for (std::size_t r = 0; r < res.size(); ++r) {
        dot_intercept += res[r];
        dot_x1 += rows[r][0] * res[r];
        dot_x2 += rows[r][1] * res[r];
    }
    EXPECT_NEAR(dot_intercept, 0.0, 1e-6);
    EXPECT_NEAR(dot_x1, 1e-8 * lm.weights.at("x1"), 1e-6);
    EXPECT_NEAR(dot_x2, 1e-8 * lm.weights.at("x2"), 1e-6);
}

TEST(FitLinear, BeatsNearbyWeightVectorsOnSse) {
    std::vector<std::vector<double>> rows;
    std::vector<double> y;
    Rng rng(7);
    for (int i = 0; i < 30; ++i) {
        double x1 = static_cast<double>(rng.next_below(50));
        double x2 = static_cast<double>(rng.next_below(50));
        rows.push_back({x1, x2});
        y.push_back(0.5 * x1 - x2 + 3.0 +
                    static_cast<double>(rng.next_below(10)) / 10.0);
    }
    Table X = numeric_table({"x1", "x2"}, rows);
    LinearModel fitted = fit_linear(X, y);
    double best = sse(X, y, fitted);
    for (double dx : {-0.05, 0.05}) {
        LinearModel nudged = fitted;
        nudged.weights["x1"] += dx;
        EXPECT_LE(best, sse(X, y, nudged));
        nudged = fitted;
        nudged.intercept += dx;
        EXPECT_LE(best, sse(X, y, nudged));
    }
}

TEST(FitLinear, BooleanColumnsCountAsZeroOne) {
    std::vector<Column> cols;
    cols.push_back({"flag", Dtype::Boolean,
                    {Cell(false), Cell(true), Cell(false), Cell(true),
                     Cell(true), Cell(false)}});
    cols.push_back({"x", Dtype::Numeric,
                    {Cell(1.0), Cell(2.0), Cell(3.0), Cell(4.0), Cell(5.0),
                     Cell(6.0)}});
    Table X(std::move(cols));
    std::vector<double> y;
    for (std::size_t r = 0; r < X.row_count(); ++r) {
        double flag = X.cell(r, "flag").truth() ? 1.0 : 0.0;
        y.push_back(4.0 * flag + 0.5 * X.cell(r, "x").number() + 1.0);
    }
    LinearModel lm = fit_linear(X, y);
    EXPECT_NEAR(lm.weights.at("flag"), 4.0, 1e-6);
    EXPECT_NEAR(lm.weights.at("x"), 0.5, 1e-6);
    EXPECT_NEAR(lm.intercept, 1.0, 1e-6);
}

TEST(FitLinear, RejectsBadInputs) {
    Table empty(std::vector<Column>{{"x", Dtype::Numeric, {}}});
    EXPECT_THROW(fit_linear(empty, {}), DataError);

    Table X = numeric_table({"x"}, {{1.0}, {2.0}});
    EXPECT_THROW(fit_linear(X, {1.0}), DataError);

    Table cat(std::vector<Column>{
        {"c", Dtype::Categorical, {Cell("a"), Cell("b")}}});
    EXPECT_THROW(fit_linear(cat, {1.0, 2.0}), DataError);

    Table holes(std::vector<Column>{
        {"x", Dtype::Numeric, {Cell(1.0), Cell::missing()}}});
    EXPECT_THROW(fit_linear(holes, {1.0, 2.0}), DataError);
}

TEST(FitLinear, CollinearColumnsStillSolve) {
    // x2 = 2 * x1: without the ridge term the normal equations would be
    // singular; with it the fit exists and predicts the targets.
    std::vector<std::vector<double>> rows;
    std::vector<double> y;
    for (int i = 0; i < 10; ++i) {
        double x1 = static_cast<double>(i);
        rows.push_back({x1, 2.0 * x1});
        y.push_back(3.0 * x1 + 1.0);
    }
    Table X = numeric_table({"x1", "x2"}, rows);
    LinearModel lm = fit_linear(X, y);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        double pred = lm.intercept + lm.weights.at("x1") * rows[r][0] +
                      lm.weights.at("x2") * rows[r][1];
        EXPECT_NEAR(pred, y[r], 1e-4);
    }
}

TEST(Predict, LinearModelScoresEveryRow) {
    Model m;
    m.impl = LinearModel{{{"a", 2.0}, {"b", -1.0}}, 10.0};
    Table t = numeric_table({"a", "b"}, {{1.0, 3.0}, {0.0, 0.0}});
    std::vector<double> preds = predict(m, t);
    ASSERT_EQ(preds.size(), 2u);
    EXPECT_DOUBLE_EQ(preds[0], 10.0 + 2.0 - 3.0);
    EXPECT_DOUBLE_EQ(preds[1], 10.0);
}

TEST(Predict, TreeRoutesTiesLeft) {
    Model m = and_tree();
    Table t = numeric_table({"x1", "x2"},
                            {{0.5, 1.0}, {1.0, 0.5}, {1.0, 1.0}, {0.0, 0.0}});
    std::vector<double> preds = predict(m, t);
    EXPECT_DOUBLE_EQ(preds[0], 0.0);
    EXPECT_DOUBLE_EQ(preds[1], 0.0);
    EXPECT_DOUBLE_EQ(preds[2], 1.0);
    EXPECT_DOUBLE_EQ(preds[3], 0.0);
}

TEST(Predict, BinaryProbabilityClampsToUnitInterval) {
    Model m;
    m.impl = LinearModel{{{"x", 1.0}}, 0.0};
    m.task = Task::BinaryProbability;
    Table t = numeric_table({"x"}, {{-0.5}, {0.25}, {3.0}});
    std::vector<double> preds = predict(m, t);
    EXPECT_DOUBLE_EQ(preds[0], 0.0);
    EXPECT_DOUBLE_EQ(preds[1], 0.25);
    EXPECT_DOUBLE_EQ(preds[2], 1.0);
}

TEST(Predict, BooleanFeaturesReadAsZeroOne) {
    Model m;
    m.impl = LinearModel{{{"flag", 5.0}}, 1.0};
    Table t(std::vector<Column>{
        {"flag", Dtype::Boolean, {Cell(true), Cell(false)}}});
    std::vector<double> preds = predict(m, t);
    EXPECT_DOUBLE_EQ(preds[0], 6.0);
    EXPECT_DOUBLE_EQ(preds[1], 1.0);
}

TEST(Predict, InputProblemsRaiseBeforeScoring) {
    Model m;
    m.impl = LinearModel{{{"x", 1.0}}, 0.0};

    Table wrong = numeric_table({"y"}, {{1.0}});
    EXPECT_THROW(predict(m, wrong), ContractError);

    Table cat(std::vector<Column>{{"x", Dtype::Categorical, {Cell("a")}}});
    EXPECT_THROW(predict(m, cat), ContractError);

    Table hole(std::vector<Column>{
        {"x", Dtype::Numeric, {Cell(1.0), Cell::missing()}}});
    try {
        predict(m, hole);
        FAIL() << "expected DataError";
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find("row '1'"), std::string::npos);
    }

    // unused columns can be anything
    Model only_x = m;
    Table extra(std::vector<Column>{
        {"x", Dtype::Numeric, {Cell(2.0)}},
        {"junk", Dtype::Categorical, {Cell::missing()}}});
    EXPECT_DOUBLE_EQ(predict(only_x, extra)[0], 2.0);
}

TEST(ConsumedFeatures, SortedAndDeduplicated) {
    Model lin;
    lin.impl = LinearModel{{{"b", 1.0}, {"a", 2.0}}, 0.0};
    EXPECT_EQ(consumed_features(lin), (std::vector<std::string>{"a", "b"}));

    TreeModel tm;
    tm.nodes.push_back({false, 0.0, "z", 1.0, 1, 2});
    tm.nodes.push_back({false, 0.0, "a", 2.0, 3, 4});
    tm.nodes.push_back({true, 1.0, "", 0.0, 0, 0});
    tm.nodes.push_back({true, 2.0, "", 0.0, 0, 0});
    tm.nodes.push_back({false, 0.0, "z", 3.0, 5, 6});
    tm.nodes.push_back({true, 3.0, "", 0.0, 0, 0});
    tm.nodes.push_back({true, 4.0, "", 0.0, 0, 0});
    Model tree;
    tree.impl = tm;
    EXPECT_EQ(consumed_features(tree), (std::vector<std::string>{"a", "z"}));
}

TEST(ValidateTree, AcceptsAProperTree) {
    EXPECT_NO_THROW(validate_tree(and_tree().tree()));
}

TEST(ValidateTree, RejectsStructuralProblems) {
    TreeModel empty;
    EXPECT_THROW(validate_tree(empty), ConfigError);

    TreeModel bad_root;
    bad_root.nodes.push_back({true, 1.0, "", 0.0, 0, 0});
    bad_root.root = 5;
    EXPECT_THROW(validate_tree(bad_root), ConfigError);

    TreeModel bad_child;
    bad_child.nodes.push_back({false, 0.0, "x", 0.0, 1, 9});
    bad_child.nodes.push_back({true, 1.0, "", 0.0, 0, 0});
    EXPECT_THROW(validate_tree(bad_child), ConfigError);

    TreeModel shared;
    shared.nodes.push_back({false, 0.0, "x", 0.0, 1, 1});
    shared.nodes.push_back({true, 1.0, "", 0.0, 0, 0});
    EXPECT_THROW(validate_tree(shared), ConfigError);

    TreeModel orphan;
    orphan.nodes.push_back({true, 1.0, "", 0.0, 0, 0});
    orphan.nodes.push_back({true, 2.0, "", 0.0, 0, 0});
    EXPECT_THROW(validate_tree(orphan), ConfigError);
}
