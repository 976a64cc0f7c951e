#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include <realpipe/explanation.hpp>

using namespace realpipe;

namespace {

FeatureContributions simple_contributions() {
    FeatureContributions c;
    c.base_value = 1.0;
    ContributionRow row;
    row.row_id = "r1";
    row.entries.push_back({"a", Cell(2.0), 0.5});
    row.entries.push_back({"b", Cell("left"), -0.25});
    c.rows.push_back(std::move(row));
    return c;
}

ExampleBased simple_examples() {
    ExampleBased ex;
    ExampleBasedRow row;
    row.row_id = "q";
    ExampleNeighbor near;
    near.example_id = "t1";
    near.example = {{"a", Cell(1.0)}, {"b", Cell("x")}};
    near.target = Cell(10.0);
    near.distance = 0.5;
    ExampleNeighbor far = near;
    far.example_id = "t2";
    far.distance = 2.0;
    row.examples = {near, far};
    ex.rows.push_back(std::move(row));
    return ex;
}

} // namespace

TEST(ExplanationKinds, NamesRoundTrip) {
    for (ExplanationKind k :
         {ExplanationKind::FeatureContributions,
          ExplanationKind::FeatureImportance,
          ExplanationKind::SimilarExamples, ExplanationKind::Counterfactual})
        EXPECT_EQ(explanation_kind_from_name(explanation_kind_name(k)), k);
    EXPECT_THROW(explanation_kind_from_name("saliency"), ConfigError);
}

TEST(ExplanationKinds, FamilyPredicates) {
    EXPECT_TRUE(is_feature_based(ExplanationKind::FeatureContributions));
    EXPECT_TRUE(is_additive(ExplanationKind::FeatureContributions));
    EXPECT_TRUE(is_feature_based(ExplanationKind::FeatureImportance));
    EXPECT_FALSE(is_feature_based(ExplanationKind::SimilarExamples));
    EXPECT_TRUE(is_example_based(ExplanationKind::SimilarExamples));
    EXPECT_TRUE(is_example_based(ExplanationKind::Counterfactual));
}

TEST(Explanation, WrapperExposesKindAndSpace) {
    Explanation e(simple_contributions());
    EXPECT_EQ(e.kind(), ExplanationKind::FeatureContributions);
    EXPECT_TRUE(e.is_contributions());
    EXPECT_FALSE(e.is_importance());
    EXPECT_EQ(e.space(), "algorithm");
    e.set_space("interpretable");
    EXPECT_EQ(e.contributions().space, "interpretable");

    FeatureImportance imp;
    imp.entries.push_back({"a", 0.1});
    Explanation ei(imp);
    EXPECT_EQ(ei.kind(), ExplanationKind::FeatureImportance);

    Explanation ex(simple_examples());
    EXPECT_EQ(ex.kind(), ExplanationKind::SimilarExamples);
    EXPECT_TRUE(ex.is_example_based());
}

TEST(Validate, AcceptsSoundExplanations) {
    EXPECT_TRUE(validate(Explanation(simple_contributions())).empty());
    EXPECT_TRUE(validate(Explanation(simple_examples())).empty());
    FeatureImportance imp;
    imp.entries.push_back({"a", 0.0});
    imp.entries.push_back({"b", -0.5});
    EXPECT_TRUE(validate(Explanation(imp)).empty());
}

TEST(Validate, FlagsDuplicateFeatures) {
    FeatureContributions c = simple_contributions();
    c.rows[0].entries.push_back({"a", Cell(3.0), 0.0});
    auto problems = validate(Explanation(c));
    ASSERT_FALSE(problems.empty());
    EXPECT_NE(problems.front().find("duplicate feature 'a'"),
              std::string::npos);

    FeatureImportance imp;
    imp.entries.push_back({"f", 0.1});
    imp.entries.push_back({"f", 0.2});
    EXPECT_FALSE(validate(Explanation(imp)).empty());
}

TEST(Validate, FlagsNonFiniteNumbers) {
    FeatureContributions c = simple_contributions();
    c.rows[0].entries[0].contribution =
        std::numeric_limits<double>::quiet_NaN();
    EXPECT_FALSE(validate(Explanation(c)).empty());

    FeatureContributions c2 = simple_contributions();
    c2.base_value = std::numeric_limits<double>::infinity();
    EXPECT_FALSE(validate(Explanation(c2)).empty());

    FeatureImportance imp;
    imp.entries.push_back({"f", std::numeric_limits<double>::infinity()});
    EXPECT_FALSE(validate(Explanation(imp)).empty());
}

TEST(Validate, ChecksAdditivityOnlyForExactExplanationsWithPredictions) {
    FeatureContributions c = simple_contributions();
    c.exact = true;
    c.rows[0].prediction = c.base_value + 0.5 - 0.25;
    EXPECT_TRUE(validate(Explanation(c)).empty());

    c.rows[0].prediction = 99.0;
    auto problems = validate(Explanation(c));
    ASSERT_FALSE(problems.empty());
    EXPECT_NE(problems.front().find("do not add up"), std::string::npos);

    // without the exact flag the same gap is fine
    c.exact = false;
    EXPECT_TRUE(validate(Explanation(c)).empty());

    // and without a prediction there is nothing to compare
    c.exact = true;
    c.rows[0].prediction.reset();
    EXPECT_TRUE(validate(Explanation(c)).empty());
}

TEST(Validate, AdditivityToleranceIsOneNano) {
    FeatureContributions c = simple_contributions();
    c.exact = true;
    double exact_pred = c.base_value + 0.5 - 0.25;
    c.rows[0].prediction = exact_pred + 0.9e-9;
    EXPECT_TRUE(validate(Explanation(c)).empty());
    c.rows[0].prediction = exact_pred + 1.1e-9;
    EXPECT_FALSE(validate(Explanation(c)).empty());
}

TEST(Validate, FlagsExampleOrderingAndDistanceProblems) {
    ExampleBased ex = simple_examples();
    std::swap(ex.rows[0].examples[0], ex.rows[0].examples[1]);
    auto problems = validate(Explanation(ex));
    ASSERT_FALSE(problems.empty());
    EXPECT_NE(problems.front().find("not sorted"), std::string::npos);

    ExampleBased neg = simple_examples();
    neg.rows[0].examples[0].distance = -0.25;
    EXPECT_FALSE(validate(Explanation(neg)).empty());

    ExampleBased dup = simple_examples();
    dup.rows[0].examples[0].example.push_back({"a", Cell(9.0)});
    EXPECT_FALSE(validate(Explanation(dup)).empty());
}

TEST(TotalContribution, SumsOneRowOrThrows) {
    FeatureContributions c = simple_contributions();
    EXPECT_DOUBLE_EQ(total_contribution(c, "r1"), 0.25);
    EXPECT_THROW(total_contribution(c, "r9"), LookupError);
}

TEST(RenameFeatures, AppliesMappingEverywhereItMatches) {
    std::map<std::string, std::string> names{
        {"a", "Alpha"}, {"missing", "Unused"}};

    Explanation c = rename_features(Explanation(simple_contributions()), names);
    EXPECT_EQ(c.contributions().rows[0].entries[0].feature, "Alpha");
    EXPECT_EQ(c.contributions().rows[0].entries[1].feature, "b");

    FeatureImportance imp;
    imp.entries.push_back({"a", 0.5});
    Explanation i = rename_features(Explanation(imp), names);
    EXPECT_EQ(i.importance().entries[0].feature, "Alpha");

    Explanation ex = rename_features(Explanation(simple_examples()), names);
    EXPECT_EQ(ex.examples().rows[0].examples[0].example[0].first, "Alpha");
    EXPECT_EQ(ex.examples().rows[0].examples[0].example[1].first, "b");
}
