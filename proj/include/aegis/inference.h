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

// The simulated adversary. A user's attributes are estimated as the mean of
// the per-topic attribute distributions of every topic the user posted
// about; an attribute is exposed when the top-1 estimate beats the top-k
// estimate by at least the user's privacy threshold.

#ifndef AEGIS_INFERENCE_H_
#define AEGIS_INFERENCE_H_

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "aegis/corpus.h"
#include "aegis/model.h"
#include "json.hpp"

namespace aegis {

// attribute id -> estimate; nullopt means no topic carried observations for
// the attribute (NoInference).
using Estimate = std::map<std::string, std::optional<Distribution>>;

// Mean of the per-topic distributions over `topics`. Topics without
// observations for an attribute are left out of that attribute's mean.
// Duplicate entries are weighted twice. Throws Error(kUnknownTopic).
Estimate Aggregate(std::span<const std::string> topics,
                   const RepositoryState& state);

enum class Verdict { kAttackSucceeds, kIndistinguishable, kNoInference };

std::string_view VerdictName(Verdict verdict);

struct SensitiveVerdict {
  std::string attribute;
  int k = 2;
  double threshold = kDefaultDelta;
  // p(rank 1) - p(rank k); absent with kNoInference.
  std::optional<double> delta;
  Verdict verdict = Verdict::kNoInference;
  // The adversary's guess (rank 1), empty with kNoInference.
  std::string inferred_value;
};

std::vector<SensitiveVerdict> Check(const UserProfile& profile,
                                    const Estimate& estimate);

struct InferenceReport {
  Estimate estimate;
  std::vector<SensitiveVerdict> sensitive;
  std::vector<std::string> topics_used;

  const SensitiveVerdict* Find(std::string_view attribute_id) const;
  // True when no sensitive attribute is kAttackSucceeds.
  bool Indistinguishable() const;
};

InferenceReport Evaluate(const UserProfile& profile,
                         std::span<const std::string> topics,
                         const RepositoryState& state);

nlohmann::json ReportToJson(const InferenceReport& report);

struct LinkOptions {
  double delta_link = 0.10;
  uint64_t min_support = 30;
};

// Linkage decision on raw counts: the argmax value when it beats the
// runner-up by more than delta_link and the counts total at least
// min_support.
std::optional<std::string> LinkCounts(
    const Attribute& attribute, const std::map<std::string, uint64_t>& counts,
    const LinkOptions& options);

// Topic-level linkage on the marginal distribution. nullopt means Unlinked.
// Throws Error(kUnknownTopic).
std::optional<std::string> LinkTopic(const std::string& topic_id,
                                     const std::string& attribute_id,
                                     const RepositoryState& state,
                                     const LinkOptions& options);

enum class StrengthCategory { kNegligible, kWeak, kMild, kStrong };

std::string_view CategoryName(StrengthCategory category);
// Throws Error(kInvalidArgument) on an unknown name.
StrengthCategory ParseCategory(std::string_view name);

// Negligible [0, .1), Weak [.1, .2), Mild [.2, .3), Strong [.3, 1].
StrengthCategory CategorizeStrength(double delta);

struct ConnectionStrength {
  std::string topic;
  double delta = 0.0;
  StrengthCategory category = StrengthCategory::kNegligible;
};

// Share of the top-1 posting persona minus share of the top-k persona, over
// the topic's joint persona tallies. Throws Error(kUnknownTopic |
// kInsufficientPersonas).
ConnectionStrength ComputeConnectionStrength(const std::string& topic_id,
                                             int k,
                                             const RepositoryState& state);

// A persona assigns one value to every schema attribute, in schema order.
using Persona = std::vector<std::string>;

struct TopicPersonaRanks {
  std::string topic;
  uint64_t frequency = 0;
  // Parallel to the requested personas; ranks are 1-based among every
  // persona of the schema's full product.
  std::vector<int> ranks;
  std::vector<double> shares;
};

// Throws Error(kUnknownTopic | kInvalidArgument).
std::vector<TopicPersonaRanks> PersonaRankTable(
    std::span<const std::string> topics, std::span<const Persona> personas,
    const RepositoryState& state);

}  // namespace aegis

#endif  // AEGIS_INFERENCE_H_
