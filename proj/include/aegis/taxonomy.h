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

// Dependent topic classification. The tree's levels follow the user's
// public attributes first and sensitive attributes last; a topic descends
// one level at a time while it stays linked to a value of that level's
// attribute among the posts that match the path so far. Topics on sibling
// nodes of a sensitive level therefore share the user's public persona.

#ifndef AEGIS_TAXONOMY_H_
#define AEGIS_TAXONOMY_H_

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "aegis/corpus.h"
#include "aegis/inference.h"
#include "aegis/model.h"
#include "json.hpp"

namespace aegis {

using Path = std::vector<std::string>;

struct Placement {
  Path path;
  // The topic had no joint tallies, so every level used the marginal
  // distribution instead of the prefix-conditional one.
  bool marginal_fallback = false;
};

class TopicTree {
 public:
  const std::vector<std::string>& order() const { return order_; }
  const LinkOptions& options() const { return options_; }
  uint64_t built_at_generation() const { return built_at_generation_; }

  // Topics resting exactly at `path`, by descending post count then id.
  const std::vector<std::string>& TopicsAt(const Path& path) const;

  // Topics at `prefix` and every descendant node, in node then topic order.
  std::vector<std::string> TopicsUnder(const Path& prefix) const;

  // Throws Error(kUnknownTopic).
  const Placement& placement(const std::string& topic) const;
  bool Contains(const std::string& topic) const {
    return placements_.contains(topic);
  }

  const std::map<Path, std::vector<std::string>>& nodes() const {
    return nodes_;
  }
  size_t topic_count() const { return placements_.size(); }

  // Level index of `attribute_id`, or -1.
  int LevelOf(const std::string& attribute_id) const;

  std::string ToText() const;
  nlohmann::json ToJson() const;

  // The user's path plus, for every sensitive level, the cover-set sibling
  // nodes under the user's prefix.
  nlohmann::json PrunedJson(const UserProfile& profile) const;

 private:
  friend TopicTree BuildTree(const UserProfile&, const RepositoryState&,
                             const LinkOptions&);
  friend TopicTree BuildTreeWithOrder(std::vector<std::string>,
                                      const RepositoryState&,
                                      const LinkOptions&);

  std::vector<std::string> order_;
  LinkOptions options_;
  uint64_t built_at_generation_ = 0;
  std::map<Path, std::vector<std::string>> nodes_;
  std::map<std::string, Placement> placements_;
  std::map<std::string, uint64_t> post_counts_;
};

// Public attributes then sensitive attributes, each in profile order.
std::vector<std::string> AttributeOrder(const UserProfile& profile);

// The user's true values along AttributeOrder(profile).
Path UserPath(const UserProfile& profile);

TopicTree BuildTree(const UserProfile& profile, const RepositoryState& state,
                    const LinkOptions& options);
TopicTree BuildTreeWithOrder(std::vector<std::string> order,
                             const RepositoryState& state,
                             const LinkOptions& options);

// Descends level by level using prefix-conditional linkage. Deterministic.
// Throws Error(kUnknownTopic).
Placement PlaceTopic(const std::string& topic,
                     std::span<const std::string> order,
                     const RepositoryState& state, const LinkOptions& options);
Placement PlaceTopic(const std::string& topic, const TopicTree& tree,
                     const RepositoryState& state);

// For each cover value other than the user's own at the sensitive level,
// the topics under the user's prefix with that value substituted. Throws
// Error(kLevelMismatch | kPreconditionViolation).
std::map<std::string, std::vector<std::string>> SiblingTopics(
    const TopicTree& tree, const Path& user_path,
    const std::string& sensitive_attribute,
    std::span<const std::string> cover_set);

// The rejected classifier: marginal linkage with no conditioning prefix.
std::optional<std::string> IndependentBaseline(const std::string& topic,
                                               const std::string& attribute_id,
                                               const RepositoryState& state,
                                               const LinkOptions& options);

// Holds the tree readers should use; rebuilt trees are swapped in whole.
class ActiveTree {
 public:
  std::shared_ptr<const TopicTree> Get() const;
  void Swap(std::shared_ptr<const TopicTree> tree);

 private:
  mutable std::mutex mu_;
  std::shared_ptr<const TopicTree> tree_;
};

}  // namespace aegis

#endif  // AEGIS_TAXONOMY_H_
