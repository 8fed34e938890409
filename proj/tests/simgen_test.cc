// Copyright 2026 The Aegis Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "aegis/simgen.h"

#include <gtest/gtest.h>

#include "aegis/error.h"
#include "test_util.h"

namespace aegis {
namespace {

// A trimmed default spec: ten topics per category keeps the suite quick.
GeneratorSpec SmallSpec(uint64_t seed = 11) {
  GeneratorSpec spec = DefaultGeneratorSpec();
  for (auto& [category, plan] : spec.categories) plan.count = 10;
  spec.seed = seed;
  return spec;
}

UserProfile LocationProfile(const AttributeSchema& schema, int k = 3,
                            double delta = 0.10) {
  UserProfile p;
  p.true_values = {{"gender", "male"}, {"ethnicity", "white"},
                   {"location", "ca"}};
  p.public_attrs = {"gender", "ethnicity"};
  p.sensitive = {{"location", k, delta, {}}};
  return ValidateProfile(p, schema);
}

class GeneratedCorpusTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    spec_ = new GeneratorSpec(SmallSpec());
    corpus_ = new GeneratedCorpus(Generate(*spec_));
    schema_ = new std::shared_ptr<const AttributeSchema>(
        std::make_shared<const AttributeSchema>(spec_->schema));
    snap_ = new Snapshot(testing::Ingest(*schema_, corpus_->posts));
  }
  static void TearDownTestSuite() {
    delete snap_;
    delete schema_;
    delete corpus_;
    delete spec_;
  }

  static GeneratorSpec* spec_;
  static GeneratedCorpus* corpus_;
  static std::shared_ptr<const AttributeSchema>* schema_;
  static Snapshot* snap_;
};

GeneratorSpec* GeneratedCorpusTest::spec_ = nullptr;
GeneratedCorpus* GeneratedCorpusTest::corpus_ = nullptr;
std::shared_ptr<const AttributeSchema>* GeneratedCorpusTest::schema_ = nullptr;
Snapshot* GeneratedCorpusTest::snap_ = nullptr;

TEST_F(GeneratedCorpusTest, TopicsHitTheirPlannedStrength) {
  size_t planned = 0;
  for (const GeneratedTopic& t : corpus_->topics) {
    EXPECT_NEAR(t.realized_delta, t.target_delta, spec_->tolerance) << t.topic;
    if (!t.category) continue;
    ++planned;
    ConnectionStrength measured =
        ComputeConnectionStrength(t.topic, spec_->connection_k, **snap_);
    EXPECT_NEAR(measured.delta, t.realized_delta, 1e-12) << t.topic;
    EXPECT_EQ(measured.category, *t.category) << t.topic;
  }
  EXPECT_EQ(planned, 40u);
}

// Oracle: persona shares recounted from the raw posts of each topic.
TEST_F(GeneratedCorpusTest, RealizedStrengthMatchesRawPostCounts) {
  std::map<std::string, std::map<std::vector<std::string>, int>> by_topic;
  std::map<std::string, int> totals;
  for (const LabeledPost& p : corpus_->posts) {
    ASSERT_EQ(p.topics.size(), 1u);
    std::vector<std::string> persona = {p.labels.at("gender"),
                                        p.labels.at("ethnicity"),
                                        p.labels.at("location")};
    by_topic[p.topics[0]][persona] += 1;
    totals[p.topics[0]] += 1;
  }
  for (const GeneratedTopic& t : corpus_->topics) {
    std::vector<int> counts;
    for (const auto& [persona, n] : by_topic[t.topic]) counts.push_back(n);
    std::sort(counts.rbegin(), counts.rend());
    ASSERT_GE(counts.size(), 3u) << t.topic;
    double delta = (counts[0] - counts[2]) / double(totals[t.topic]);
    EXPECT_NEAR(delta, t.realized_delta, 1e-12) << t.topic;
    EXPECT_EQ(static_cast<uint64_t>(totals[t.topic]), t.posts);
  }
}

TEST_F(GeneratedCorpusTest, CategoryTopicsLeadWithTheTargetPersona) {
  UserProfile profile = LocationProfile(**schema_);
  for (StrengthCategory c :
       {StrengthCategory::kNegligible, StrengthCategory::kWeak,
        StrengthCategory::kMild, StrengthCategory::kStrong}) {
    std::vector<std::string> topics =
        ExperimentTopics(profile, c, spec_->connection_k, **snap_);
    // Negligible topics may tie at the top, so only the linked bands must
    // be complete.
    if (c != StrengthCategory::kNegligible) {
      EXPECT_EQ(topics.size(), 10u) << CategoryName(c);
    }
    for (const std::string& t : topics) {
      EXPECT_EQ(t.substr(0, CategoryName(c).size()), CategoryName(c));
    }
  }
  EXPECT_EQ(DominantPersona(**snap_).size(), 3u);
}

TEST_F(GeneratedCorpusTest, StrongTopicsNeedSuggestionsAndKeepPersona) {
  ExperimentConfig config;
  config.profile = LocationProfile(**schema_);
  config.category = StrengthCategory::kStrong;
  ExperimentResult r = RunObfuscationExperiment(**snap_, config);
  EXPECT_EQ(r.rows.size(), 10u);
  EXPECT_EQ(r.cover_set.size(), 3u);
  EXPECT_EQ(r.summary.satisfied, 10u);
  EXPECT_GE(r.summary.mean_suggestions, 1.0);
  EXPECT_EQ(r.summary.argmax_unchanged_rate, 1.0);
  for (const ExperimentRow& row : r.rows) {
    EXPECT_GE(row.delta_before, 0.10);
    EXPECT_LT(row.delta_after, 0.10);
    EXPECT_EQ(row.trajectory.size(), static_cast<size_t>(row.suggestions) + 1);
    EXPECT_EQ(row.accepted.size(), static_cast<size_t>(row.suggestions));
  }
}

TEST_F(GeneratedCorpusTest, ThreadCountDoesNotChangeResults) {
  ExperimentConfig config;
  config.profile = LocationProfile(**schema_);
  config.category = StrengthCategory::kMild;
  config.threads = 1;
  ExperimentResult one = RunObfuscationExperiment(**snap_, config);
  config.threads = 8;
  ExperimentResult many = RunObfuscationExperiment(**snap_, config);
  EXPECT_EQ(one, many);
  EXPECT_EQ(ExperimentCsv({one}), ExperimentCsv({many}));
}

TEST_F(GeneratedCorpusTest, MaximalThresholdMeansNothingToFix) {
  ExperimentConfig config;
  config.profile = LocationProfile(**schema_, 3, 1.0);
  config.category = StrengthCategory::kStrong;
  ExperimentResult r = RunObfuscationExperiment(**snap_, config);
  EXPECT_EQ(r.summary.mean_suggestions, 0.0);
  EXPECT_EQ(r.summary.satisfied, r.rows.size());
}

TEST_F(GeneratedCorpusTest, KSweepReportsMonotonicity) {
  ExperimentConfig config;
  config.profile = LocationProfile(**schema_);
  config.category = StrengthCategory::kStrong;
  KSweep sweep = RunKSweep(**snap_, config, {3, 5});
  ASSERT_EQ(sweep.results.size(), 2u);
  EXPECT_EQ(sweep.results[1].k, 5);
  EXPECT_EQ(sweep.results[1].cover_set.size(), 5u);
  EXPECT_EQ(sweep.monotone, sweep.results[1].summary.mean_suggestions >=
                                sweep.results[0].summary.mean_suggestions);
  nlohmann::json j = KSweepJson(sweep);
  EXPECT_EQ(j["results"].size(), 2u);
}

TEST_F(GeneratedCorpusTest, CsvHasOneLinePerRow) {
  ExperimentConfig config;
  config.profile = LocationProfile(**schema_);
  config.category = StrengthCategory::kWeak;
  ExperimentResult r = RunObfuscationExperiment(**snap_, config);
  std::string csv = ExperimentCsv({r});
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "topic,category,k,suggestions,delta_before,delta_after,"
            "persona_argmax_changed,margin_shift");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'),
            static_cast<long>(r.rows.size() + 1));
}

TEST(GenerateTest, SameSeedSameCorpus) {
  GeneratorSpec spec = SmallSpec(5);
  spec.supply_per_pair = 1;
  GeneratedCorpus a = Generate(spec);
  GeneratedCorpus b = Generate(spec);
  EXPECT_EQ(a.posts, b.posts);
  spec.seed = 6;
  EXPECT_NE(Generate(spec).posts, a.posts);
}

TEST(GenerateTest, NoPlannedTopicsMeansEmptyCorpus) {
  GeneratorSpec spec = DefaultGeneratorSpec();
  for (auto& [category, plan] : spec.categories) plan.count = 0;
  GeneratedCorpus corpus = Generate(spec);
  EXPECT_TRUE(corpus.posts.empty());
  EXPECT_TRUE(corpus.topics.empty());
}

TEST(GenerateTest, UnreachableStrengthIsInfeasible) {
  GeneratorSpec spec = DefaultGeneratorSpec();
  // Four posts only give gaps in steps of a quarter.
  spec.categories = {{StrengthCategory::kStrong, {2, 0.60, 0.70}}};
  spec.posts_min = spec.posts_max = 4;
  spec.supply_per_pair = 0;
  try {
    Generate(spec);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInfeasibleSpec);
  }
}

TEST(GenerateTest, SingleStrongTopicLandsNearTarget) {
  GeneratorSpec spec = DefaultGeneratorSpec();
  spec.categories = {{StrengthCategory::kStrong, {1, 0.35, 0.35}}};
  spec.posts_min = spec.posts_max = 200;
  spec.supply_per_pair = 0;
  GeneratedCorpus corpus = Generate(spec);
  ASSERT_EQ(corpus.topics.size(), 1u);
  EXPECT_EQ(corpus.posts.size(), 200u);
  EXPECT_NEAR(corpus.topics[0].realized_delta, 0.35, 0.02);
}

TEST(SpecJsonTest, RoundTripsAndValidates) {
  GeneratorSpec spec = DefaultGeneratorSpec();
  nlohmann::json j = GeneratorSpecToJson(spec);
  GeneratorSpec back = GeneratorSpecFromJson(j);
  EXPECT_EQ(GeneratorSpecToJson(back), j);
  EXPECT_EQ(back.schema, spec.schema);
  EXPECT_EQ(back.categories.at(StrengthCategory::kStrong).count, 50u);

  nlohmann::json bad = j;
  bad["connection_k"] = 0;
  EXPECT_THROW(GeneratorSpecFromJson(bad), Error);
  bad = j;
  bad["public_mass"] = 1.5;
  EXPECT_THROW(GeneratorSpecFromJson(bad), Error);
  EXPECT_THROW(GeneratorSpecFromJson(nlohmann::json::array()), Error);
}

}  // namespace
}  // namespace aegis
