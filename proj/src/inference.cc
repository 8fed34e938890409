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

#include <algorithm>

#include "aegis/error.h"

namespace aegis {

using nlohmann::json;

Estimate Aggregate(std::span<const std::string> topics,
                   const RepositoryState& state) {
  if (topics.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "no topics to aggregate");
  }
  for (const std::string& topic : topics) state.topic(topic);

  Estimate estimate;
  for (const Attribute& attribute : state.schema->attributes()) {
    std::vector<Distribution> per_topic;
    per_topic.reserve(topics.size());
    for (const std::string& topic : topics) {
      if (auto dist = TopicDistribution(state, topic, attribute.id)) {
        per_topic.push_back(std::move(*dist));
      }
    }
    if (per_topic.empty()) {
      estimate[attribute.id] = std::nullopt;
      continue;
    }
    std::vector<const Distribution*> parts;
    for (const Distribution& d : per_topic) parts.push_back(&d);
    estimate[attribute.id] = Distribution::Mean(attribute, parts);
  }
  return estimate;
}

std::string_view VerdictName(Verdict verdict) {
  switch (verdict) {
    case Verdict::kAttackSucceeds:
      return "AttackSucceeds";
    case Verdict::kIndistinguishable:
      return "Indistinguishable";
    case Verdict::kNoInference:
      return "NoInference";
  }
  return "NoInference";
}

std::vector<SensitiveVerdict> Check(const UserProfile& profile,
                                    const Estimate& estimate) {
  std::vector<SensitiveVerdict> verdicts;
  for (const SensitiveSetting& setting : profile.sensitive) {
    SensitiveVerdict verdict;
    verdict.attribute = setting.attribute;
    verdict.k = setting.k;
    verdict.threshold = setting.delta;
    auto it = estimate.find(setting.attribute);
    if (it != estimate.end() && it->second.has_value()) {
      const Distribution& dist = *it->second;
      double delta = dist.TopKGap(setting.k);
      verdict.delta = delta;
      verdict.inferred_value = dist.Ranked().front().value;
      verdict.verdict = delta >= setting.delta ? Verdict::kAttackSucceeds
                                               : Verdict::kIndistinguishable;
    }
    verdicts.push_back(std::move(verdict));
  }
  return verdicts;
}

const SensitiveVerdict* InferenceReport::Find(
    std::string_view attribute_id) const {
  for (const SensitiveVerdict& verdict : sensitive) {
    if (verdict.attribute == attribute_id) return &verdict;
  }
  return nullptr;
}

bool InferenceReport::Indistinguishable() const {
  return std::none_of(sensitive.begin(), sensitive.end(),
                      [](const SensitiveVerdict& v) {
                        return v.verdict == Verdict::kAttackSucceeds;
                      });
}

InferenceReport Evaluate(const UserProfile& profile,
                         std::span<const std::string> topics,
                         const RepositoryState& state) {
  InferenceReport report;
  report.estimate = Aggregate(topics, state);
  report.sensitive = Check(profile, report.estimate);
  report.topics_used.assign(topics.begin(), topics.end());
  return report;
}

json ReportToJson(const InferenceReport& report) {
  json estimate = json::object();
  for (const auto& [attr, dist] : report.estimate) {
    if (!dist) {
      estimate[attr] = nullptr;
      continue;
    }
    json ranked = json::array();
    for (const RankedValue& r : dist->Ranked()) {
      ranked.push_back({{"value", r.value}, {"p", r.probability}});
    }
    estimate[attr] = std::move(ranked);
  }
  json sensitive = json::array();
  for (const SensitiveVerdict& v : report.sensitive) {
    json entry = {{"attr", v.attribute},
                  {"k", v.k},
                  {"threshold", v.threshold},
                  {"verdict", VerdictName(v.verdict)}};
    entry["delta"] = v.delta ? json(*v.delta) : json(nullptr);
    entry["inferred_value"] =
        v.inferred_value.empty() ? json(nullptr) : json(v.inferred_value);
    sensitive.push_back(std::move(entry));
  }
  return {{"estimate", std::move(estimate)},
          {"sensitive", std::move(sensitive)},
          {"topics_used", report.topics_used},
          {"indistinguishable", report.Indistinguishable()}};
}

std::optional<std::string> LinkCounts(
    const Attribute& attribute, const std::map<std::string, uint64_t>& counts,
    const LinkOptions& options) {
  uint64_t total = 0;
  for (const auto& [value, count] : counts) total += count;
  if (total == 0 || total < options.min_support) return std::nullopt;
  std::optional<Distribution> dist = Distribution::FromCounts(attribute, counts);
  std::vector<RankedValue> ranked = dist->Ranked();
  if (ranked[0].probability - ranked[1].probability > options.delta_link) {
    return ranked[0].value;
  }
  return std::nullopt;
}

std::optional<std::string> LinkTopic(const std::string& topic_id,
                                     const std::string& attribute_id,
                                     const RepositoryState& state,
                                     const LinkOptions& options) {
  const TopicStats& stats = state.topic(topic_id);
  const Attribute& attribute = state.schema->attribute(attribute_id);
  auto it = stats.counts.find(attribute_id);
  if (it == stats.counts.end()) return std::nullopt;
  return LinkCounts(attribute, it->second, options);
}

std::string_view CategoryName(StrengthCategory category) {
  switch (category) {
    case StrengthCategory::kNegligible:
      return "negligible";
    case StrengthCategory::kWeak:
      return "weak";
    case StrengthCategory::kMild:
      return "mild";
    case StrengthCategory::kStrong:
      return "strong";
  }
  return "negligible";
}

StrengthCategory ParseCategory(std::string_view name) {
  std::string lowered = NormalizeValueId(name);
  for (StrengthCategory c :
       {StrengthCategory::kNegligible, StrengthCategory::kWeak,
        StrengthCategory::kMild, StrengthCategory::kStrong}) {
    if (CategoryName(c) == lowered) return c;
  }
  throw Error(ErrorCode::kInvalidArgument,
              "unknown strength category '" + std::string(name) + "'");
}

StrengthCategory CategorizeStrength(double delta) {
  if (delta < 0.10) return StrengthCategory::kNegligible;
  if (delta < 0.20) return StrengthCategory::kWeak;
  if (delta < 0.30) return StrengthCategory::kMild;
  return StrengthCategory::kStrong;
}

ConnectionStrength ComputeConnectionStrength(const std::string& topic_id,
                                             int k,
                                             const RepositoryState& state) {
  const TopicStats& stats = state.topic(topic_id);
  if (k < 1) throw Error(ErrorCode::kInvalidArgument, "k must be positive");
  std::vector<uint64_t> counts;
  for (const auto& [persona, count] : stats.joint) {
    if (count > 0) counts.push_back(count);
  }
  if (counts.size() < static_cast<size_t>(k)) {
    throw Error(ErrorCode::kInsufficientPersonas,
                topic_id + " has " + std::to_string(counts.size()) +
                    " observed personas, k=" + std::to_string(k));
  }
  std::sort(counts.begin(), counts.end(), std::greater<>());
  const double total = static_cast<double>(stats.JointTotal());
  ConnectionStrength strength;
  strength.topic = topic_id;
  strength.delta = static_cast<double>(counts[0]) / total -
                   static_cast<double>(counts[static_cast<size_t>(k) - 1]) /
                       total;
  strength.category = CategorizeStrength(strength.delta);
  return strength;
}

namespace {

// Number of full-product personas that sort lexicographically before
// `persona`, comparing value ids attribute by attribute.
uint64_t LexicographicPredecessors(const AttributeSchema& schema,
                                   const Persona& persona) {
  uint64_t below = 0;
  const auto& attributes = schema.attributes();
  for (size_t i = 0; i < attributes.size(); ++i) {
    uint64_t smaller = 0;
    for (const std::string& value : attributes[i].domain) {
      if (value < persona[i]) ++smaller;
    }
    uint64_t tail = 1;
    for (size_t j = i + 1; j < attributes.size(); ++j) {
      tail *= attributes[j].domain.size();
    }
    below += smaller * tail;
  }
  return below;
}

}  // namespace

std::vector<TopicPersonaRanks> PersonaRankTable(
    std::span<const std::string> topics, std::span<const Persona> personas,
    const RepositoryState& state) {
  const AttributeSchema& schema = *state.schema;
  std::vector<Persona> normalized;
  for (const Persona& persona : personas) {
    if (persona.size() != schema.size()) {
      throw Error(ErrorCode::kInvalidArgument,
                  "persona must assign every schema attribute");
    }
    Persona p;
    for (size_t i = 0; i < persona.size(); ++i) {
      std::string value = NormalizeValueId(persona[i]);
      if (!schema.attributes()[i].Contains(value)) {
        throw Error(ErrorCode::kUnknownValue,
                    schema.attributes()[i].id + "." + value);
      }
      p.push_back(std::move(value));
    }
    normalized.push_back(std::move(p));
  }

  std::vector<TopicPersonaRanks> table;
  for (const std::string& topic : topics) {
    const TopicStats& stats = state.topic(topic);
    TopicPersonaRanks row;
    row.topic = topic;
    row.frequency = stats.post_count;
    const uint64_t total = stats.JointTotal();
    for (const Persona& persona : normalized) {
      auto it = stats.joint.find(persona);
      uint64_t count = it == stats.joint.end() ? 0 : it->second;
      // Rank = 1 + personas with a larger count + equal-count personas that
      // sort first.
      uint64_t ahead = 0;
      uint64_t tied_before_observed = 0;
      for (const auto& [other, other_count] : stats.joint) {
        if (other_count > count) {
          ++ahead;
        } else if (other_count == count && other < persona) {
          ++tied_before_observed;
        }
      }
      if (count == 0) {
        // Every unobserved persona also ties at zero; count those sorting
        // first without enumerating the product.
        uint64_t observed_before = 0;
        for (const auto& [other, other_count] : stats.joint) {
          if (other < persona) ++observed_before;
        }
        uint64_t observed_zero_before = tied_before_observed;
        tied_before_observed =
            LexicographicPredecessors(schema, persona) - observed_before +
            observed_zero_before;
      }
      row.ranks.push_back(static_cast<int>(1 + ahead + tied_before_observed));
      row.shares.push_back(total == 0 ? 0.0
                                      : static_cast<double>(count) /
                                            static_cast<double>(total));
    }
    table.push_back(std::move(row));
  }
  return table;
}

}  // namespace aegis
