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

#include "aegis/model.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>

#include "aegis/error.h"

namespace aegis {

using nlohmann::json;

namespace {

std::string_view Trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) {
    s.remove_prefix(1);
  }
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) {
    s.remove_suffix(1);
  }
  return s;
}

std::string Lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) {
    return static_cast<char>(std::tolower(c));
  });
  return out;
}

json ParseDocument(std::string_view document) {
  json parsed = json::parse(document, nullptr, /*allow_exceptions=*/false);
  if (parsed.is_discarded()) {
    throw Error(ErrorCode::kMalformedDocument, "document is not valid JSON");
  }
  return parsed;
}

const json& Require(const json& object, const char* field) {
  if (!object.is_object() || !object.contains(field)) {
    throw Error(ErrorCode::kMalformedDocument,
                std::string("missing field '") + field + "'");
  }
  return object.at(field);
}

std::string RequireString(const json& value, const char* what) {
  if (!value.is_string()) {
    throw Error(ErrorCode::kMalformedDocument,
                std::string(what) + " must be a string");
  }
  return value.get<std::string>();
}

void ValidateHierarchy(const Attribute& attribute) {
  std::vector<std::string> previous = attribute.domain;
  for (const HierarchyLevel& level : attribute.hierarchy_levels) {
    std::set<std::string> seen;
    for (const auto& [group, members] : level.groups) {
      for (const std::string& member : members) {
        if (std::find(previous.begin(), previous.end(), member) ==
            previous.end()) {
          throw Error(ErrorCode::kMalformedDocument,
                      "hierarchy level '" + level.name + "' of '" +
                          attribute.id + "' references unknown id '" +
                          member + "'");
        }
        if (!seen.insert(member).second) {
          throw Error(ErrorCode::kMalformedDocument,
                      "hierarchy level '" + level.name + "' assigns '" +
                          member + "' twice");
        }
      }
    }
    if (seen.size() != previous.size()) {
      throw Error(ErrorCode::kMalformedDocument,
                  "hierarchy level '" + level.name +
                      "' does not partition the previous level");
    }
    if (level.groups.size() >= previous.size()) {
      throw Error(ErrorCode::kMalformedDocument,
                  "hierarchy level '" + level.name + "' is not coarser");
    }
    previous.clear();
    for (const auto& [group, members] : level.groups) previous.push_back(group);
  }
}

}  // namespace

std::string NormalizeValueId(std::string_view raw) { return Lower(Trim(raw)); }

std::string NormalizeTopicId(std::string_view raw) {
  std::string_view trimmed = Trim(raw);
  while (!trimmed.empty() && trimmed.front() == '#') trimmed.remove_prefix(1);
  return Lower(Trim(trimmed));
}

double ParseFraction(const json& value) {
  double parsed = 0;
  if (value.is_number()) {
    parsed = value.get<double>();
  } else if (value.is_string()) {
    std::string text(Trim(value.get<std::string>()));
    bool percent = !text.empty() && text.back() == '%';
    if (percent) text.pop_back();
    size_t consumed = 0;
    try {
      parsed = std::stod(text, &consumed);
    } catch (const std::exception&) {
      consumed = 0;
    }
    if (consumed == 0 || consumed != text.size()) {
      throw Error(ErrorCode::kMalformedDocument,
                  "cannot parse fraction '" + value.get<std::string>() + "'");
    }
    if (percent) parsed /= 100.0;
  } else {
    throw Error(ErrorCode::kMalformedDocument,
                "fraction must be a number or string");
  }
  if (!(parsed > 0.0 && parsed <= 1.0)) {
    throw Error(ErrorCode::kMalformedDocument,
                "fraction " + std::to_string(parsed) + " outside (0, 1]");
  }
  return parsed;
}

std::optional<size_t> Attribute::IndexOf(std::string_view value) const {
  auto it = std::find(domain.begin(), domain.end(), value);
  if (it == domain.end()) return std::nullopt;
  return static_cast<size_t>(it - domain.begin());
}

AttributeSchema AttributeSchema::Create(std::vector<Attribute> attributes) {
  std::set<std::string> ids;
  for (Attribute& attribute : attributes) {
    attribute.id = NormalizeValueId(attribute.id);
    if (attribute.id.empty()) {
      throw Error(ErrorCode::kMalformedDocument, "empty attribute id");
    }
    if (!ids.insert(attribute.id).second) {
      throw Error(ErrorCode::kDuplicateAttribute, attribute.id);
    }
    std::set<std::string> values;
    for (std::string& value : attribute.domain) {
      value = NormalizeValueId(value);
      if (value.empty()) {
        throw Error(ErrorCode::kMalformedDocument,
                    "empty value id in '" + attribute.id + "'");
      }
      if (!values.insert(value).second) {
        throw Error(ErrorCode::kDuplicateValue, attribute.id + "." + value);
      }
    }
    if (attribute.domain.size() < 2) {
      throw Error(ErrorCode::kDomainTooSmall, attribute.id);
    }
    ValidateHierarchy(attribute);
  }
  AttributeSchema schema;
  schema.attributes_ = std::move(attributes);
  return schema;
}

std::optional<size_t> AttributeSchema::IndexOf(
    std::string_view attribute_id) const {
  for (size_t i = 0; i < attributes_.size(); ++i) {
    if (attributes_[i].id == attribute_id) return i;
  }
  return std::nullopt;
}

const Attribute& AttributeSchema::attribute(
    std::string_view attribute_id) const {
  auto index = IndexOf(attribute_id);
  if (!index) {
    throw Error(ErrorCode::kUnknownAttribute, std::string(attribute_id));
  }
  return attributes_[*index];
}

AttributeSchema SchemaFromJson(const json& document) {
  const json& list = Require(document, "attributes");
  if (!list.is_array()) {
    throw Error(ErrorCode::kMalformedDocument, "'attributes' must be a list");
  }
  std::vector<Attribute> attributes;
  for (const json& entry : list) {
    Attribute attribute;
    attribute.id = RequireString(Require(entry, "id"), "attribute id");
    const json& domain = Require(entry, "domain");
    if (!domain.is_array()) {
      throw Error(ErrorCode::kMalformedDocument, "'domain' must be a list");
    }
    for (const json& value : domain) {
      attribute.domain.push_back(RequireString(value, "domain value"));
    }
    if (entry.contains("hierarchy_levels")) {
      for (const json& level_json : entry.at("hierarchy_levels")) {
        HierarchyLevel level;
        level.name = RequireString(Require(level_json, "name"), "level name");
        for (const auto& [group, members] :
             Require(level_json, "groups").items()) {
          auto& target = level.groups[NormalizeValueId(group)];
          for (const json& member : members) {
            target.push_back(NormalizeValueId(RequireString(member, "member")));
          }
        }
        attribute.hierarchy_levels.push_back(std::move(level));
      }
    }
    attributes.push_back(std::move(attribute));
  }
  return AttributeSchema::Create(std::move(attributes));
}

AttributeSchema LoadSchema(std::string_view document) {
  return SchemaFromJson(ParseDocument(document));
}

json SchemaToJson(const AttributeSchema& schema) {
  json attributes = json::array();
  for (const Attribute& attribute : schema.attributes()) {
    json entry = {{"id", attribute.id}, {"domain", attribute.domain}};
    if (!attribute.hierarchy_levels.empty()) {
      json levels = json::array();
      for (const HierarchyLevel& level : attribute.hierarchy_levels) {
        levels.push_back({{"name", level.name}, {"groups", level.groups}});
      }
      entry["hierarchy_levels"] = std::move(levels);
    }
    attributes.push_back(std::move(entry));
  }
  return {{"attributes", std::move(attributes)}};
}

const SensitiveSetting* UserProfile::FindSensitive(
    std::string_view attribute_id) const {
  for (const SensitiveSetting& setting : sensitive) {
    if (setting.attribute == attribute_id) return &setting;
  }
  return nullptr;
}

bool UserProfile::IsPublic(std::string_view attribute_id) const {
  return std::find(public_attrs.begin(), public_attrs.end(), attribute_id) !=
         public_attrs.end();
}

UserProfile ValidateProfile(UserProfile profile,
                            const AttributeSchema& schema) {
  std::map<std::string, std::string> true_values;
  for (const auto& [attr, value] : profile.true_values) {
    std::string attr_id = NormalizeValueId(attr);
    std::string value_id = NormalizeValueId(value);
    if (!schema.attribute(attr_id).Contains(value_id)) {
      throw Error(ErrorCode::kUnknownValue, attr_id + "." + value_id);
    }
    true_values[attr_id] = value_id;
  }
  for (const Attribute& attribute : schema.attributes()) {
    if (!true_values.contains(attribute.id)) {
      throw Error(ErrorCode::kMalformedDocument,
                  "no true value for attribute '" + attribute.id + "'");
    }
  }
  profile.true_values = std::move(true_values);

  std::set<std::string> sensitive_ids;
  for (SensitiveSetting& setting : profile.sensitive) {
    setting.attribute = NormalizeValueId(setting.attribute);
    const Attribute& attribute = schema.attribute(setting.attribute);
    if (!sensitive_ids.insert(setting.attribute).second) {
      throw Error(ErrorCode::kOverlappingPartition,
                  "'" + setting.attribute + "' listed as sensitive twice");
    }
    if (setting.k < 2) {
      throw Error(ErrorCode::kMalformedDocument,
                  "k for '" + setting.attribute + "' must be at least 2");
    }
    if (static_cast<size_t>(setting.k) > attribute.domain.size()) {
      throw Error(ErrorCode::kKExceedsDomain,
                  "k=" + std::to_string(setting.k) + " for '" +
                      setting.attribute + "' with " +
                      std::to_string(attribute.domain.size()) + " values");
    }
    if (!(setting.delta > 0.0 && setting.delta <= 1.0)) {
      throw Error(ErrorCode::kMalformedDocument,
                  "delta for '" + setting.attribute + "' outside (0, 1]");
    }
    if (!setting.cover_set.empty()) {
      std::set<std::string> cover;
      for (std::string& value : setting.cover_set) {
        value = NormalizeValueId(value);
        if (!attribute.Contains(value)) {
          throw Error(ErrorCode::kUnknownValue,
                      setting.attribute + "." + value);
        }
        if (!cover.insert(value).second) {
          throw Error(ErrorCode::kMalformedDocument,
                      "cover set repeats '" + value + "'");
        }
      }
      if (cover.size() != static_cast<size_t>(setting.k)) {
        throw Error(ErrorCode::kMalformedDocument,
                    "cover set for '" + setting.attribute + "' needs exactly " +
                        std::to_string(setting.k) + " values");
      }
      if (!cover.contains(profile.true_values.at(setting.attribute))) {
        throw Error(ErrorCode::kTrueValueNotInCover, setting.attribute);
      }
    }
  }

  std::set<std::string> public_ids;
  for (std::string& attr : profile.public_attrs) {
    attr = NormalizeValueId(attr);
    schema.attribute(attr);
    if (sensitive_ids.contains(attr) || !public_ids.insert(attr).second) {
      throw Error(ErrorCode::kOverlappingPartition, attr);
    }
  }
  if (public_ids.size() + sensitive_ids.size() != schema.size()) {
    throw Error(ErrorCode::kMalformedDocument,
                "public and sensitive attributes must cover the schema");
  }
  if (profile.suggestion_budget < 1) {
    throw Error(ErrorCode::kMalformedDocument,
                "suggestion_budget must be positive");
  }
  return profile;
}

UserProfile ProfileFromJson(const json& document,
                            const AttributeSchema& schema) {
  UserProfile profile;
  const json& true_values = Require(document, "true_values");
  if (!true_values.is_object()) {
    throw Error(ErrorCode::kMalformedDocument, "'true_values' must be a map");
  }
  for (const auto& [attr, value] : true_values.items()) {
    profile.true_values[attr] = RequireString(value, "true value");
  }
  std::set<std::string> sensitive_ids;
  if (document.contains("sensitive")) {
    for (const json& entry : document.at("sensitive")) {
      SensitiveSetting setting;
      setting.attribute = RequireString(Require(entry, "attr"), "attr");
      const json& k = Require(entry, "k");
      if (!k.is_number_integer()) {
        throw Error(ErrorCode::kMalformedDocument, "k must be an integer");
      }
      setting.k = k.get<int>();
      if (entry.contains("delta") && !entry.at("delta").is_null()) {
        setting.delta = ParseFraction(entry.at("delta"));
      }
      if (entry.contains("cover_set") && !entry.at("cover_set").is_null()) {
        for (const json& value : entry.at("cover_set")) {
          setting.cover_set.push_back(RequireString(value, "cover value"));
        }
      }
      sensitive_ids.insert(NormalizeValueId(setting.attribute));
      profile.sensitive.push_back(std::move(setting));
    }
  }
  if (document.contains("public")) {
    for (const json& attr : document.at("public")) {
      profile.public_attrs.push_back(RequireString(attr, "public attribute"));
    }
  } else {
    for (const Attribute& attribute : schema.attributes()) {
      if (!sensitive_ids.contains(attribute.id)) {
        profile.public_attrs.push_back(attribute.id);
      }
    }
  }
  if (document.contains("suggestion_budget")) {
    const json& budget = document.at("suggestion_budget");
    if (!budget.is_number_integer()) {
      throw Error(ErrorCode::kMalformedDocument,
                  "suggestion_budget must be an integer");
    }
    profile.suggestion_budget = budget.get<int>();
  }
  return ValidateProfile(std::move(profile), schema);
}

UserProfile LoadProfile(std::string_view document,
                        const AttributeSchema& schema) {
  return ProfileFromJson(ParseDocument(document), schema);
}

json ProfileToJson(const UserProfile& profile) {
  json sensitive = json::array();
  for (const SensitiveSetting& setting : profile.sensitive) {
    json entry = {{"attr", setting.attribute},
                  {"k", setting.k},
                  {"delta", setting.delta}};
    if (!setting.cover_set.empty()) entry["cover_set"] = setting.cover_set;
    sensitive.push_back(std::move(entry));
  }
  return {{"true_values", profile.true_values},
          {"public", profile.public_attrs},
          {"sensitive", std::move(sensitive)},
          {"suggestion_budget", profile.suggestion_budget}};
}

Distribution Distribution::Create(const Attribute& attribute,
                                  const std::map<std::string, double>& probs) {
  std::map<std::string, double> full;
  for (const std::string& value : attribute.domain) full[value] = 0.0;
  double sum = 0.0;
  for (const auto& [value, p] : probs) {
    if (!attribute.Contains(value)) {
      throw Error(ErrorCode::kInvalidArgument,
                  "mass on '" + value + "' outside domain of '" +
                      attribute.id + "'");
    }
    if (!(p >= 0.0)) {
      throw Error(ErrorCode::kInvalidArgument, "negative probability");
    }
    full[value] = p;
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw Error(ErrorCode::kInvalidArgument,
                "probabilities of '" + attribute.id + "' sum to " +
                    std::to_string(sum));
  }
  return Distribution(attribute.id, std::move(full));
}

std::optional<Distribution> Distribution::FromCounts(
    const Attribute& attribute, const std::map<std::string, uint64_t>& counts) {
  uint64_t total = 0;
  for (const auto& [value, count] : counts) total += count;
  if (total == 0) return std::nullopt;
  std::map<std::string, double> probs;
  for (const std::string& value : attribute.domain) probs[value] = 0.0;
  for (const auto& [value, count] : counts) {
    probs.at(value) = static_cast<double>(count) / static_cast<double>(total);
  }
  return Distribution(attribute.id, std::move(probs));
}

Distribution Distribution::Mean(const Attribute& attribute,
                                std::span<const Distribution* const> parts) {
  if (parts.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "mean of no distributions");
  }
  std::map<std::string, double> sums;
  for (const std::string& value : attribute.domain) sums[value] = 0.0;
  for (const Distribution* part : parts) {
    for (const auto& [value, p] : part->probs_) sums.at(value) += p;
  }
  const double n = static_cast<double>(parts.size());
  for (auto& [value, p] : sums) p /= n;
  return Distribution(attribute.id, std::move(sums));
}

double Distribution::prob(std::string_view value) const {
  auto it = probs_.find(std::string(value));
  return it == probs_.end() ? 0.0 : it->second;
}

std::vector<RankedValue> Distribution::Ranked() const {
  std::vector<RankedValue> ranked;
  ranked.reserve(probs_.size());
  for (const auto& [value, p] : probs_) ranked.push_back({value, p});
  // probs_ is ordered by value id, so a stable sort keeps ties lexicographic.
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const RankedValue& a, const RankedValue& b) {
                     return a.probability > b.probability;
                   });
  return ranked;
}

double Distribution::TopKGap(int k) const {
  std::vector<RankedValue> ranked = Ranked();
  size_t kth = std::clamp<size_t>(static_cast<size_t>(std::max(k, 1)), 1,
                                  ranked.size());
  return ranked.front().probability - ranked[kth - 1].probability;
}

const std::string& Distribution::Argmax() const {
  const std::string* best = nullptr;
  double best_p = -1.0;
  for (const auto& [value, p] : probs_) {
    if (p > best_p) {
      best = &value;
      best_p = p;
    }
  }
  return *best;
}

uint64_t TopicStats::ObservationCount(std::string_view attribute_id) const {
  auto it = counts.find(std::string(attribute_id));
  if (it == counts.end()) return 0;
  uint64_t total = 0;
  for (const auto& [value, count] : it->second) total += count;
  return total;
}

uint64_t TopicStats::JointTotal() const {
  uint64_t total = 0;
  for (const auto& [persona, count] : joint) total += count;
  return total;
}

}  // namespace aegis
