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

// Attribute schema, user profiles and the distribution types shared by the
// rest of the engine. Everything here is immutable once loaded.

#ifndef AEGIS_MODEL_H_
#define AEGIS_MODEL_H_

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

namespace aegis {

// Value ids are trimmed and ASCII case-folded.
std::string NormalizeValueId(std::string_view raw);

// Topic ids are trimmed, case-folded and stripped of leading '#'.
std::string NormalizeTopicId(std::string_view raw);

// Accepts 0.1, "0.1" or "10%". The result must lie in (0, 1].
double ParseFraction(const nlohmann::json& value);

// One generalization level above the attribute's domain. `groups` maps a
// coarse id to the ids of the previous level it covers.
struct HierarchyLevel {
  std::string name;
  std::map<std::string, std::vector<std::string>> groups;

  bool operator==(const HierarchyLevel&) const = default;
};

struct Attribute {
  std::string id;
  std::vector<std::string> domain;
  std::vector<HierarchyLevel> hierarchy_levels;

  std::optional<size_t> IndexOf(std::string_view value) const;
  bool Contains(std::string_view value) const {
    return IndexOf(value).has_value();
  }

  bool operator==(const Attribute&) const = default;
};

class AttributeSchema {
 public:
  AttributeSchema() = default;

  // Validates uniqueness, domain sizes and hierarchy coarsening. Throws
  // Error(kDuplicateAttribute | kDuplicateValue | kDomainTooSmall |
  // kMalformedDocument).
  static AttributeSchema Create(std::vector<Attribute> attributes);

  const std::vector<Attribute>& attributes() const { return attributes_; }
  size_t size() const { return attributes_.size(); }

  std::optional<size_t> IndexOf(std::string_view attribute_id) const;

  // Throws Error(kUnknownAttribute).
  const Attribute& attribute(std::string_view attribute_id) const;

  bool operator==(const AttributeSchema&) const = default;

 private:
  std::vector<Attribute> attributes_;
};

AttributeSchema LoadSchema(std::string_view document);
AttributeSchema SchemaFromJson(const nlohmann::json& document);
nlohmann::json SchemaToJson(const AttributeSchema& schema);

inline constexpr double kDefaultDelta = 0.10;
inline constexpr int kDefaultSuggestionBudget = 10;

struct SensitiveSetting {
  std::string attribute;
  int k = 2;
  double delta = kDefaultDelta;
  // Either empty (to be chosen against the topic tree) or exactly k values
  // including the user's true value.
  std::vector<std::string> cover_set;

  bool operator==(const SensitiveSetting&) const = default;
};

struct UserProfile {
  std::map<std::string, std::string> true_values;
  std::vector<std::string> public_attrs;
  std::vector<SensitiveSetting> sensitive;
  int suggestion_budget = kDefaultSuggestionBudget;

  const SensitiveSetting* FindSensitive(std::string_view attribute_id) const;
  bool IsPublic(std::string_view attribute_id) const;

  bool operator==(const UserProfile&) const = default;
};

// Checks every profile invariant against `schema` and normalizes ids.
UserProfile ValidateProfile(UserProfile profile, const AttributeSchema& schema);

UserProfile LoadProfile(std::string_view document,
                        const AttributeSchema& schema);
UserProfile ProfileFromJson(const nlohmann::json& document,
                            const AttributeSchema& schema);
nlohmann::json ProfileToJson(const UserProfile& profile);

struct RankedValue {
  std::string value;
  double probability;
};

// A probability distribution over an attribute's full domain. Values the
// distribution never observed carry probability zero, so ranking always sees
// the whole domain.
class Distribution {
 public:
  // Throws Error(kInvalidArgument) on negative mass, mass outside the
  // domain, or a sum further than 1e-9 from one.
  static Distribution Create(const Attribute& attribute,
                             const std::map<std::string, double>& probs);

  // Returns nullopt when no count is positive.
  static std::optional<Distribution> FromCounts(
      const Attribute& attribute,
      const std::map<std::string, uint64_t>& counts);

  // Arithmetic mean of distributions over the same attribute.
  static Distribution Mean(const Attribute& attribute,
                           std::span<const Distribution* const> parts);

  const std::string& attribute_id() const { return attribute_id_; }
  const std::map<std::string, double>& probs() const { return probs_; }
  double prob(std::string_view value) const;

  // Descending probability; ties broken by ascending value id.
  std::vector<RankedValue> Ranked() const;

  // p(rank 1) - p(rank k), with k clamped to the domain size.
  double TopKGap(int k) const;

  const std::string& Argmax() const;

  bool operator==(const Distribution&) const = default;

 private:
  Distribution(std::string attribute_id, std::map<std::string, double> probs)
      : attribute_id_(std::move(attribute_id)), probs_(std::move(probs)) {}

  std::string attribute_id_;
  std::map<std::string, double> probs_;
};

// Per-topic observation counts. `joint` tallies full persona tuples (one
// value per schema attribute, schema order) for posts labeled on every
// attribute.
struct TopicStats {
  std::string topic;
  std::map<std::string, std::map<std::string, uint64_t>> counts;
  std::map<std::vector<std::string>, uint64_t> joint;
  uint64_t post_count = 0;

  uint64_t ObservationCount(std::string_view attribute_id) const;
  uint64_t JointTotal() const;

  bool operator==(const TopicStats&) const = default;
};

}  // namespace aegis

#endif  // AEGIS_MODEL_H_
