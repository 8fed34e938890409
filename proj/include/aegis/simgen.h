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

// Synthetic corpora with controlled topic-to-persona connection strength,
// and the obfuscation experiments run over them.
//
// Every topic's posting shares over personas are a three-part mixture:
//
//   share(x) = w * [x == target]
//            + rho * [x agrees with target on the public attributes]
//                  * background(x on the other attributes)
//            + (1 - w - rho) * background(x)
//
// with w + rho held at `public_mass` for all topics, so topics aimed at one
// public prefix carry identical public marginals whatever their strength.
// w is solved by bisection to hit a drawn target strength, and post counts
// are apportioned deterministically (largest remainder) so the realized
// strength is checked, not sampled.

#ifndef AEGIS_SIMGEN_H_
#define AEGIS_SIMGEN_H_

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "aegis/corpus.h"
#include "aegis/inference.h"
#include "aegis/model.h"
#include "aegis/suggest.h"
#include "json.hpp"

namespace aegis {

struct CategoryPlan {
  size_t count = 0;
  double delta_min = 0.0;
  double delta_max = 0.0;
};

struct GeneratorSpec {
  AttributeSchema schema;
  // attribute -> value -> weight; the background is the product of these.
  std::map<std::string, std::map<std::string, double>> background;
  // Personas the category topics are aimed at, round robin. Each assigns
  // every schema attribute.
  std::vector<std::map<std::string, std::string>> targets;
  // Attributes the prefix concentration holds fixed.
  std::vector<std::string> public_attrs;
  double public_mass = 0.7;
  int connection_k = 3;
  std::map<StrengthCategory, CategoryPlan> categories;
  uint64_t posts_min = 100;
  uint64_t posts_max = 400;
  // Obfuscation supply: for every public prefix and every value of the
  // remaining attributes, this many topics aimed at that persona.
  size_t supply_per_pair = 3;
  double supply_delta_min = 0.15;
  double supply_delta_max = 0.30;
  uint64_t supply_posts_min = 150;
  uint64_t supply_posts_max = 300;
  double tolerance = 0.02;
  uint64_t seed = 1;
};

// 2 genders x 5 ethnicities x 10 states, aimed at (male, white, ca), with
// gender and ethnicity public.
GeneratorSpec DefaultGeneratorSpec();

// Throws Error(kMalformedDocument | kInvalidArgument).
GeneratorSpec GeneratorSpecFromJson(const nlohmann::json& doc);
nlohmann::json GeneratorSpecToJson(const GeneratorSpec& spec);

struct GeneratedTopic {
  std::string topic;
  // Planned category, or nullopt for supply topics.
  std::optional<StrengthCategory> category;
  std::map<std::string, std::string> target;
  double target_delta = 0.0;
  double realized_delta = 0.0;
  double weight = 0.0;
  uint64_t posts = 0;
};

struct GeneratedCorpus {
  std::vector<LabeledPost> posts;
  std::vector<GeneratedTopic> topics;
};

// Deterministic in spec.seed. Throws Error(kInfeasibleSpec) when a topic's
// target strength cannot be reached within tolerance.
GeneratedCorpus Generate(const GeneratorSpec& spec);

struct ExperimentConfig {
  // Public attributes, true values and exactly one sensitive setting; the
  // cover set is chosen against the tree when empty.
  UserProfile profile;
  StrengthCategory category = StrengthCategory::kStrong;
  int connection_k = 3;
  // Use the independent per-attribute classifier and skip the persona
  // filter.
  bool baseline = false;
  SuggestOptions suggest;
  LinkOptions link;
  unsigned threads = 0;
};

struct ExperimentRow {
  std::string topic;
  StrengthCategory category = StrengthCategory::kNegligible;
  int k = 0;
  int suggestions = 0;
  double delta_before = 0.0;
  double delta_after = 0.0;
  bool persona_argmax_changed = false;
  double margin_shift = 0.0;
  // "satisfied", "budget_exhausted" or "no_candidates".
  std::string status;
  std::vector<double> trajectory;
  std::vector<std::string> accepted;

  bool operator==(const ExperimentRow&) const = default;
};

struct ExperimentSummary {
  size_t rows = 0;
  size_t satisfied = 0;
  size_t budget_exhausted = 0;
  size_t no_candidates = 0;
  double mean_suggestions = 0.0;
  // Over satisfied rows only.
  double argmax_unchanged_rate = 1.0;
  double mean_margin_shift = 0.0;

  bool operator==(const ExperimentSummary&) const = default;
};

struct ExperimentResult {
  std::string attribute;
  int k = 0;
  double delta = 0.0;
  StrengthCategory category = StrengthCategory::kNegligible;
  bool baseline = false;
  std::vector<std::string> cover_set;
  std::vector<ExperimentRow> rows;
  ExperimentSummary summary;

  bool operator==(const ExperimentResult&) const = default;
};

// Topics whose measured strength falls in `category` and whose top persona
// is the profile's, in topic order.
std::vector<std::string> ExperimentTopics(const UserProfile& profile,
                                          StrengthCategory category,
                                          int connection_k,
                                          const RepositoryState& state);

// Runs the suggest/accept loop once per experiment topic, in parallel over
// topics with results folded in topic order.
ExperimentResult RunObfuscationExperiment(const RepositoryState& state,
                                          const ExperimentConfig& config);

struct KSweep {
  std::vector<ExperimentResult> results;
  // Mean suggestions never decreases along the listed ks.
  bool monotone = true;
};

KSweep RunKSweep(const RepositoryState& state, const ExperimentConfig& config,
                 const std::vector<int>& ks);

ExperimentSummary Summarize(const std::vector<ExperimentRow>& rows);

// topic,category,k,suggestions,delta_before,delta_after,
// persona_argmax_changed,margin_shift
std::string ExperimentCsv(const std::vector<ExperimentResult>& results);
nlohmann::json ExperimentSummaryJson(const ExperimentResult& result);
nlohmann::json KSweepJson(const KSweep& sweep);

// Most frequent persona over the joint tallies, ties lexicographic.
std::map<std::string, std::string> DominantPersona(const RepositoryState& state);

}  // namespace aegis

#endif  // AEGIS_SIMGEN_H_
