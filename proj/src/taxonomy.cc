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

#include "aegis/taxonomy.h"

#include <algorithm>
#include <set>
#include <sstream>

#include "aegis/error.h"

namespace aegis {

using nlohmann::json;

namespace {

bool HasPrefix(const Path& path, const Path& prefix) {
  return path.size() >= prefix.size() &&
         std::equal(prefix.begin(), prefix.end(), path.begin());
}

const std::vector<std::string>& EmptyTopics() {
  static const std::vector<std::string> kEmpty;
  return kEmpty;
}

}  // namespace

const std::vector<std::string>& TopicTree::TopicsAt(const Path& path) const {
  auto it = nodes_.find(path);
  return it == nodes_.end() ? EmptyTopics() : it->second;
}

std::vector<std::string> TopicTree::TopicsUnder(const Path& prefix) const {
  std::vector<std::string> topics;
  for (auto it = nodes_.lower_bound(prefix);
       it != nodes_.end() && HasPrefix(it->first, prefix); ++it) {
    topics.insert(topics.end(), it->second.begin(), it->second.end());
  }
  return topics;
}

const Placement& TopicTree::placement(const std::string& topic) const {
  auto it = placements_.find(topic);
  if (it == placements_.end()) throw Error(ErrorCode::kUnknownTopic, topic);
  return it->second;
}

int TopicTree::LevelOf(const std::string& attribute_id) const {
  auto it = std::find(order_.begin(), order_.end(), attribute_id);
  return it == order_.end() ? -1 : static_cast<int>(it - order_.begin());
}

std::string TopicTree::ToText() const {
  std::ostringstream out;
  out << "# order: ";
  for (size_t i = 0; i < order_.size(); ++i) {
    out << (i ? " > " : "") << order_[i];
  }
  out << "\n# generation: " << built_at_generation_ << "\n";
  for (const auto& [path, topics] : nodes_) {
    out << std::string(2 * path.size(), ' ')
        << (path.empty() ? "(root)" : path.back()) << " [" << topics.size()
        << "]";
    for (size_t i = 0; i < topics.size(); ++i) {
      out << (i ? ", " : ": ") << '#' << topics[i];
    }
    out << "\n";
  }
  return out.str();
}

namespace {

json NodeJson(const Path& path, const std::vector<std::string>& topics,
              const std::map<std::string, uint64_t>& post_counts) {
  std::vector<uint64_t> counts;
  for (const std::string& topic : topics) counts.push_back(post_counts.at(topic));
  return {{"path", path}, {"topics", topics}, {"counts", counts}};
}

}  // namespace

json TopicTree::ToJson() const {
  json nodes = json::array();
  for (const auto& [path, topics] : nodes_) {
    nodes.push_back(NodeJson(path, topics, post_counts_));
  }
  return {{"order", order_},
          {"generation", built_at_generation_},
          {"nodes", std::move(nodes)}};
}

json TopicTree::PrunedJson(const UserProfile& profile) const {
  Path user = UserPath(profile);
  std::set<Path> keep;
  for (size_t depth = 0; depth <= user.size(); ++depth) {
    keep.insert(Path(user.begin(), user.begin() + depth));
  }
  for (const SensitiveSetting& setting : profile.sensitive) {
    int level = LevelOf(setting.attribute);
    if (level < 0) continue;
    Path prefix(user.begin(), user.begin() + level);
    for (const auto& [path, topics] : nodes_) {
      if (path.size() <= static_cast<size_t>(level) || !HasPrefix(path, prefix)) {
        continue;
      }
      const std::string& value = path[level];
      bool in_cover =
          setting.cover_set.empty() ||
          std::find(setting.cover_set.begin(), setting.cover_set.end(),
                    value) != setting.cover_set.end();
      if (in_cover) keep.insert(path);
    }
  }
  json nodes = json::array();
  for (const Path& path : keep) {
    nodes.push_back(NodeJson(path, TopicsAt(path), post_counts_));
  }
  return {{"order", order_},
          {"generation", built_at_generation_},
          {"user_path", user},
          {"nodes", std::move(nodes)}};
}

std::vector<std::string> AttributeOrder(const UserProfile& profile) {
  std::vector<std::string> order = profile.public_attrs;
  for (const SensitiveSetting& setting : profile.sensitive) {
    order.push_back(setting.attribute);
  }
  return order;
}

Path UserPath(const UserProfile& profile) {
  Path path;
  for (const std::string& attr : AttributeOrder(profile)) {
    path.push_back(profile.true_values.at(attr));
  }
  return path;
}

Placement PlaceTopic(const std::string& topic,
                     std::span<const std::string> order,
                     const RepositoryState& state, const LinkOptions& options) {
  const TopicStats& stats = state.topic(topic);
  const AttributeSchema& schema = *state.schema;
  Placement placement;
  placement.marginal_fallback = stats.joint.empty();
  std::vector<size_t> level_index;
  for (const std::string& attr : order) {
    auto index = schema.IndexOf(attr);
    if (!index) throw Error(ErrorCode::kUnknownAttribute, attr);
    level_index.push_back(*index);
  }

  for (size_t level = 0; level < order.size(); ++level) {
    const Attribute& attribute = schema.attributes()[level_index[level]];
    std::map<std::string, uint64_t> counts;
    if (placement.marginal_fallback) {
      auto it = stats.counts.find(attribute.id);
      if (it != stats.counts.end()) counts = it->second;
    } else {
      for (const auto& [persona, count] : stats.joint) {
        bool matches = true;
        for (size_t i = 0; i < level && matches; ++i) {
          matches = persona[level_index[i]] == placement.path[i];
        }
        if (matches) counts[persona[level_index[level]]] += count;
      }
    }
    std::optional<std::string> linked = LinkCounts(attribute, counts, options);
    if (!linked) break;
    placement.path.push_back(std::move(*linked));
  }
  return placement;
}

Placement PlaceTopic(const std::string& topic, const TopicTree& tree,
                     const RepositoryState& state) {
  return PlaceTopic(topic, tree.order(), state, tree.options());
}

TopicTree BuildTreeWithOrder(std::vector<std::string> order,
                             const RepositoryState& state,
                             const LinkOptions& options) {
  TopicTree tree;
  tree.order_ = std::move(order);
  tree.options_ = options;
  tree.built_at_generation_ = state.generation;
  tree.nodes_[Path{}];
  for (const auto& [topic, stats] : state.topics) {
    Placement placement = PlaceTopic(topic, tree.order_, state, options);
    tree.nodes_[placement.path].push_back(topic);
    tree.post_counts_[topic] = stats.post_count;
    tree.placements_.emplace(topic, std::move(placement));
  }
  for (auto& [path, topics] : tree.nodes_) {
    std::stable_sort(topics.begin(), topics.end(),
                     [&](const std::string& a, const std::string& b) {
                       return tree.post_counts_.at(a) > tree.post_counts_.at(b);
                     });
  }
  return tree;
}

TopicTree BuildTree(const UserProfile& profile, const RepositoryState& state,
                    const LinkOptions& options) {
  return BuildTreeWithOrder(AttributeOrder(profile), state, options);
}

std::map<std::string, std::vector<std::string>> SiblingTopics(
    const TopicTree& tree, const Path& user_path,
    const std::string& sensitive_attribute,
    std::span<const std::string> cover_set) {
  int level = tree.LevelOf(sensitive_attribute);
  if (level < 0 || user_path.size() <= static_cast<size_t>(level) ||
      user_path.size() > tree.order().size()) {
    throw Error(ErrorCode::kLevelMismatch,
                "'" + sensitive_attribute + "' is not a level of the user path");
  }
  if (cover_set.size() < 2) {
    throw Error(ErrorCode::kPreconditionViolation,
                "cover set for '" + sensitive_attribute +
                    "' needs at least two values");
  }
  const std::string& own = user_path[level];
  std::map<std::string, std::vector<std::string>> siblings;
  for (const std::string& value : cover_set) {
    if (value == own) continue;
    Path prefix(user_path.begin(), user_path.begin() + level);
    prefix.push_back(value);
    siblings[value] = tree.TopicsUnder(prefix);
  }
  return siblings;
}

std::optional<std::string> IndependentBaseline(const std::string& topic,
                                               const std::string& attribute_id,
                                               const RepositoryState& state,
                                               const LinkOptions& options) {
  return LinkTopic(topic, attribute_id, state, options);
}

std::shared_ptr<const TopicTree> ActiveTree::Get() const {
  std::lock_guard<std::mutex> lock(mu_);
  return tree_;
}

void ActiveTree::Swap(std::shared_ptr<const TopicTree> tree) {
  std::lock_guard<std::mutex> lock(mu_);
  tree_ = std::move(tree);
}

}  // namespace aegis
