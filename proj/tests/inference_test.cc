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

#include "aegis/inference.h"

#include <gtest/gtest.h>

#include "aegis/error.h"
#include "test_util.h"

namespace aegis {
namespace {

using testing::AddPosts;
using testing::Attr;
using testing::SmallSchema;

std::map<std::string, std::string> Labels(const char* g, const char* e,
                                           const char* l) {
  return {{"gender", g}, {"ethnicity", e}, {"location", l}};
}

// Property: the library's estimate equals the mean of per-topic label
// distributions recomputed from the raw posts, on random corpora and random
// topic subsets.
TEST(AggregateTest, MatchesBruteForceOnRandomCorpora) {
  auto schema = SmallSchema();
  std::mt19937_64 rng(20260101);
  for (uint64_t seed = 0; seed < 40; ++seed) {
    std::vector<LabeledPost> posts =
        testing::RandomCorpus(seed, *schema, 12, 300, 0.7);
    Snapshot snap = testing::Ingest(schema, posts);
    std::vector<std::string> topics;
    for (const auto& [topic, stats] : snap->topics) topics.push_back(topic);
    std::shuffle(topics.begin(), topics.end(), rng);
    topics.resize(1 + rng() % topics.size());

    Estimate got = Aggregate(topics, *snap);
    testing::OracleEstimate want =
        testing::BruteForceAggregate(posts, topics, *schema);
    for (const Attribute& a : schema->attributes()) {
      ASSERT_EQ(got.at(a.id).has_value(), want.at(a.id).has_value())
          << "seed " << seed << " attr " << a.id;
      if (!want.at(a.id)) continue;
      for (const std::string& v : a.domain) {
        EXPECT_NEAR(got.at(a.id)->prob(v), want.at(a.id)->at(v), 1e-12)
            << "seed " << seed << " " << a.id << "." << v;
      }
    }
  }
}

TEST(AggregateTest, TopicsWithoutLabelsSitOut) {
  auto schema = SmallSchema();
  std::vector<LabeledPost> posts;
  AddPosts(posts, "a", {{"gender", "male"}}, 3);
  AddPosts(posts, "b", {{"location", "ny"}}, 2);
  Snapshot snap = testing::Ingest(schema, posts);
  std::vector<std::string> both = {"a", "b"};
  Estimate e = Aggregate(both, *snap);
  // "b" has no gender labels, so gender is just "a".
  EXPECT_DOUBLE_EQ(e.at("gender")->prob("male"), 1.0);
  EXPECT_DOUBLE_EQ(e.at("location")->prob("ny"), 1.0);
  EXPECT_FALSE(e.at("ethnicity").has_value());

  std::vector<std::string> missing = {"a", "nope"};
  EXPECT_THROW(Aggregate(missing, *snap), Error);
}

TEST(AggregateTest, DuplicateTopicsWeighTwice) {
  auto schema = SmallSchema();
  std::vector<LabeledPost> posts;
  AddPosts(posts, "a", {{"gender", "male"}}, 1);
  AddPosts(posts, "b", {{"gender", "female"}}, 1);
  Snapshot snap = testing::Ingest(schema, posts);
  std::vector<std::string> topics = {"a", "a", "b"};
  EXPECT_NEAR(Aggregate(topics, *snap).at("gender")->prob("male"), 2.0 / 3.0,
              1e-15);
}

UserProfile GenderProfile(const AttributeSchema& schema, double delta) {
  return testing::WalkthroughProfile(schema, delta);
}

TEST(CheckTest, ThresholdIsInclusive) {
  auto schema = SmallSchema();
  const Attribute& g = schema->attribute("gender");
  Estimate e;
  e["gender"] = Distribution::Create(g, {{"male", 0.625}, {"female", 0.375}});
  e["ethnicity"] = std::nullopt;
  e["location"] = std::nullopt;
  // Gap is exactly 0.25 in binary.
  auto at = Check(GenderProfile(*schema, 0.25), e);
  ASSERT_EQ(at.size(), 1u);
  EXPECT_EQ(at[0].verdict, Verdict::kAttackSucceeds);
  EXPECT_EQ(at[0].inferred_value, "male");
  EXPECT_DOUBLE_EQ(*at[0].delta, 0.25);
  auto above = Check(GenderProfile(*schema, 0.26), e);
  EXPECT_EQ(above[0].verdict, Verdict::kIndistinguishable);
}

TEST(CheckTest, MissingEstimateIsNoInference) {
  auto schema = SmallSchema();
  Estimate e;
  e["gender"] = std::nullopt;
  auto v = Check(GenderProfile(*schema, 0.1), e);
  EXPECT_EQ(v[0].verdict, Verdict::kNoInference);
  EXPECT_FALSE(v[0].delta.has_value());
  EXPECT_TRUE(v[0].inferred_value.empty());
}

TEST(CheckTest, GapUsesFullDomainNotCoverSet) {
  auto schema = SmallSchema();
  UserProfile p;
  p.true_values = {{"gender", "male"}, {"ethnicity", "white"},
                   {"location", "ca"}};
  p.public_attrs = {"gender", "ethnicity"};
  p.sensitive = {{"location", 2, 0.1, {"ca", "tx"}}};
  p = ValidateProfile(p, *schema);
  Estimate e;
  e["location"] = Distribution::Create(schema->attribute("location"),
                                       {{"ca", 0.5}, {"ny", 0.45}, {"tx", 0.05}});
  // Rank 2 is ny even though ny is outside the cover set.
  auto v = Check(p, e);
  EXPECT_NEAR(*v[0].delta, 0.05, 1e-12);
  EXPECT_EQ(v[0].verdict, Verdict::kIndistinguishable);
}

TEST(EvaluateTest, WalkthroughOriginalIsExposed) {
  auto schema = SmallSchema();
  Snapshot snap = testing::Ingest(schema, testing::WalkthroughPosts());
  UserProfile profile = GenderProfile(*schema, 0.1);
  std::vector<std::string> topics = {"gowarriors"};
  InferenceReport r = Evaluate(profile, topics, *snap);
  ASSERT_NE(r.Find("gender"), nullptr);
  EXPECT_NEAR(*r.Find("gender")->delta, testing::RunningMeanGap(0), 1e-12);
  EXPECT_FALSE(r.Indistinguishable());
  nlohmann::json j = ReportToJson(r);
  EXPECT_EQ(j["sensitive"][0]["verdict"], "AttackSucceeds");
  EXPECT_EQ(j["estimate"]["gender"][0]["value"], "male");
  EXPECT_FALSE(j["indistinguishable"].get<bool>());
}

TEST(LinkTest, NeedsSupportAndStrictMargin) {
  const Attribute g = Attr("gender", {"female", "male"});
  LinkOptions opts;
  EXPECT_EQ(LinkCounts(g, {{"male", 20}, {"female", 9}}, opts), std::nullopt)
      << "29 observations is under the support floor";
  EXPECT_EQ(LinkCounts(g, {{"male", 21}, {"female", 9}}, opts), "male");
  EXPECT_EQ(LinkCounts(g, {{"male", 54}, {"female", 46}}, opts), std::nullopt);
  EXPECT_EQ(LinkCounts(g, {{"male", 56}, {"female", 44}}, opts), "male");
  EXPECT_EQ(LinkCounts(g, {}, opts), std::nullopt);
}

TEST(LinkTest, TopicUsesMarginals) {
  auto schema = SmallSchema();
  Snapshot snap = testing::Ingest(schema, testing::WalkthroughPosts());
  LinkOptions opts;
  EXPECT_EQ(LinkTopic("gowarriors", "gender", *snap, opts), "male");
  // 95 male to 105 female: too close overall.
  EXPECT_EQ(LinkTopic("womenintech", "gender", *snap, opts), std::nullopt);
  EXPECT_EQ(LinkTopic("womenintech", "ethnicity", *snap, opts), "white");
  EXPECT_EQ(LinkTopic("giveaway", "location", *snap, opts), std::nullopt);
  EXPECT_THROW(LinkTopic("nope", "gender", *snap, opts), Error);
}

TEST(StrengthTest, CategoryBoundaries) {
  EXPECT_EQ(CategorizeStrength(0.0), StrengthCategory::kNegligible);
  EXPECT_EQ(CategorizeStrength(0.0999), StrengthCategory::kNegligible);
  EXPECT_EQ(CategorizeStrength(0.10), StrengthCategory::kWeak);
  EXPECT_EQ(CategorizeStrength(0.1999), StrengthCategory::kWeak);
  EXPECT_EQ(CategorizeStrength(0.20), StrengthCategory::kMild);
  EXPECT_EQ(CategorizeStrength(0.30), StrengthCategory::kStrong);
  EXPECT_EQ(CategorizeStrength(1.0), StrengthCategory::kStrong);
  EXPECT_EQ(ParseCategory("Strong"), StrengthCategory::kStrong);
  EXPECT_THROW(ParseCategory("huge"), Error);
}

// The #Disney example: top persona 33.93%, third 6.19%, k=3.
TEST(StrengthTest, DisneyExampleFollowsTheCategoryTable) {
  double delta = 0.3393 - 0.0619;
  EXPECT_NEAR(delta, 0.2774, 1e-12);
  EXPECT_EQ(CategorizeStrength(delta), StrengthCategory::kMild);
}

TEST(StrengthTest, ComputedFromJointPersonaShares) {
  auto schema = SmallSchema();
  std::vector<LabeledPost> posts;
  AddPosts(posts, "t", Labels("male", "asian", "ny"), 50);
  AddPosts(posts, "t", Labels("female", "white", "ca"), 30);
  AddPosts(posts, "t", Labels("male", "white", "tx"), 15);
  AddPosts(posts, "t", Labels("female", "black", "tx"), 5);
  // Partial labels stay out of the joint tallies.
  AddPosts(posts, "t", {{"gender", "male"}}, 100);
  Snapshot snap = testing::Ingest(schema, posts);
  ConnectionStrength s = ComputeConnectionStrength("t", 3, *snap);
  EXPECT_NEAR(s.delta, 0.50 - 0.15, 1e-12);
  EXPECT_EQ(s.category, StrengthCategory::kStrong);
  EXPECT_NEAR(ComputeConnectionStrength("t", 4, *snap).delta, 0.45, 1e-12);
  try {
    ComputeConnectionStrength("t", 5, *snap);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInsufficientPersonas);
  }
  EXPECT_THROW(ComputeConnectionStrength("nope", 3, *snap), Error);
}

// Oracle: enumerate the full persona product and sort it.
std::vector<Persona> AllPersonas(const AttributeSchema& schema) {
  std::vector<Persona> out = {{}};
  for (const Attribute& a : schema.attributes()) {
    std::vector<Persona> next;
    for (const Persona& p : out) {
      for (const std::string& v : a.domain) {
        Persona q = p;
        q.push_back(v);
        next.push_back(std::move(q));
      }
    }
    out = std::move(next);
  }
  return out;
}

TEST(PersonaRankTest, MatchesFullEnumeration) {
  auto schema = SmallSchema();
  std::vector<LabeledPost> posts =
      testing::RandomCorpus(99, *schema, 6, 400, 1.0);
  Snapshot snap = testing::Ingest(schema, posts);
  std::vector<Persona> everyone = AllPersonas(*schema);
  std::vector<std::string> topics;
  for (const auto& [t, stats] : snap->topics) topics.push_back(t);
  auto table = PersonaRankTable(topics, everyone, *snap);
  ASSERT_EQ(table.size(), topics.size());
  for (size_t t = 0; t < topics.size(); ++t) {
    std::map<Persona, int> count;
    int total = 0;
    for (const LabeledPost& p : posts) {
      if (std::find(p.topics.begin(), p.topics.end(), topics[t]) ==
          p.topics.end()) {
        continue;
      }
      count[{p.labels.at("gender"), p.labels.at("ethnicity"),
             p.labels.at("location")}] += 1;
      ++total;
    }
    std::vector<Persona> order = everyone;
    std::stable_sort(order.begin(), order.end(),
                     [&](const Persona& a, const Persona& b) {
                       if (count[a] != count[b]) return count[a] > count[b];
                       return a < b;
                     });
    EXPECT_EQ(table[t].frequency, snap->topic(topics[t]).post_count);
    for (size_t i = 0; i < everyone.size(); ++i) {
      int want = static_cast<int>(
          std::find(order.begin(), order.end(), everyone[i]) - order.begin() +
          1);
      EXPECT_EQ(table[t].ranks[i], want) << topics[t];
      EXPECT_NEAR(table[t].shares[i],
                  static_cast<double>(count[everyone[i]]) / total, 1e-12);
    }
  }
}

TEST(PersonaRankTest, RejectsBadPersonas) {
  auto schema = SmallSchema();
  Snapshot snap = testing::Ingest(schema, testing::WalkthroughPosts());
  std::vector<std::string> topics = {"gowarriors"};
  std::vector<Persona> short_persona = {{"male"}};
  EXPECT_THROW(PersonaRankTable(topics, short_persona, *snap), Error);
  std::vector<Persona> ok = {{"male", "white", "ca"}};
  auto table = PersonaRankTable(topics, ok, *snap);
  EXPECT_EQ(table[0].ranks[0], 1);
  EXPECT_NEAR(table[0].shares[0], 88.0 / 200.0, 1e-12);
}

}  // namespace
}  // namespace aegis
