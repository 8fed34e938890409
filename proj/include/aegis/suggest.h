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

// Suggestion process. A pending post and the obfuscation topics accepted for
// it form a group; the group is checked against the simulated adversary, and
// while any sensitive attribute stays exposed the engine proposes topics
// from the cover-set sibling nodes of the user's tree path.

#ifndef AEGIS_SUGGEST_H_
#define AEGIS_SUGGEST_H_

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "aegis/corpus.h"
#include "aegis/inference.h"
#include "aegis/model.h"
#include "aegis/taxonomy.h"
#include "json.hpp"

namespace aegis {

enum class GroupState { kDraft, kSatisfied, kBudgetExhausted };

std::string_view GroupStateName(GroupState state);

struct PostGroup {
  std::vector<std::string> original;
  std::string original_text;
  std::vector<std::string> accepted;
  GroupState state = GroupState::kDraft;

  // Original topics then accepted topics, duplicates removed.
  std::vector<std::string> TopicSet() const;

  bool operator==(const PostGroup&) const = default;
};

nlohmann::json GroupToJson(const PostGroup& group);

// Deduplicated union of every group's topics, in first-seen order.
std::vector<std::string> TimelineTopics(std::span<const PostGroup> timeline);

struct GroupEvaluation {
  // Over the group's own topic set.
  InferenceReport group;
  // Over the prior timeline plus this group.
  InferenceReport timeline;

  bool Satisfied() const {
    return group.Indistinguishable() && timeline.Indistinguishable();
  }
};

nlohmann::json EvaluationToJson(const GroupEvaluation& evaluation);

// An empty topic set yields NoInference on every attribute.
InferenceReport EvaluateTopics(const UserProfile& profile,
                               std::span<const std::string> topics,
                               const RepositoryState& state);

// Throws Error(kUnknownTopic).
GroupEvaluation EvaluateGroup(const PostGroup& group,
                              std::span<const PostGroup> timeline,
                              const UserProfile& profile,
                              const RepositoryState& state);

struct OpenedGroup {
  PostGroup group;
  GroupEvaluation evaluation;
};

// Normalizes the draft's topics and evaluates it. The group starts Satisfied
// when nothing is exposed. Throws Error(kUnknownTopic | kInvalidArgument).
OpenedGroup OpenGroup(std::span<const std::string> topics, std::string text,
                      std::span<const PostGroup> timeline,
                      const UserProfile& profile, const RepositoryState& state);

struct SuggestOptions {
  size_t max_candidates = 10;
  // Largest tolerated drop of a public attribute's top-1 margin per accepted
  // topic.
  double persona_epsilon = 0.02;
  bool preserve_persona = true;
};

struct SuggestionEntry {
  std::string topic;
  // Sensitive attribute -> cover value the topic is drawn for.
  std::map<std::string, std::string> alternates;
  // Group-scope delta per sensitive attribute if the topic is accepted.
  std::map<std::string, double> projected_delta;
  double score = 0.0;
  uint64_t post_count = 0;
};

struct SuggestionSet {
  std::vector<SuggestionEntry> entries;
  uint64_t generation = 0;
  double worst_delta = 0.0;

  bool Contains(const std::string& topic) const;
};

nlohmann::json SuggestionSetToJson(const SuggestionSet& set);

// sensitive attribute -> alternate value -> candidate topics.
using CandidatePool =
    std::map<std::string, std::map<std::string, std::vector<std::string>>>;

// Cover-set siblings of the user's path for each listed attribute.
CandidatePool TreeCandidates(const UserProfile& profile, const TopicTree& tree,
                             std::span<const std::string> attributes);

// Every topic whose marginal linkage lands on a cover alternate, with no
// regard for the public persona. Comparison baseline only.
CandidatePool IndependentCandidates(const UserProfile& profile,
                                    const RepositoryState& state,
                                    const LinkOptions& options,
                                    std::span<const std::string> attributes);

// Ranks topics from `pool` by how far they cut the worst exposed delta when
// appended to the group. Throws Error(kPreconditionViolation) when nothing is
// exposed and Error(kNoCandidates) when no topic qualifies.
SuggestionSet SuggestFromPool(const PostGroup& group,
                              std::span<const PostGroup> timeline,
                              const UserProfile& profile,
                              const RepositoryState& state,
                              const CandidatePool& pool,
                              const SuggestOptions& options);

SuggestionSet Suggest(const PostGroup& group,
                      std::span<const PostGroup> timeline,
                      const UserProfile& profile, const TopicTree& tree,
                      const RepositoryState& state,
                      const SuggestOptions& options);

struct AcceptResult {
  PostGroup group;
  GroupEvaluation evaluation;
};

// Throws Error(kDuplicateTopic | kStaleSuggestion | kPreconditionViolation).
AcceptResult Accept(const PostGroup& group, const std::string& topic,
                    const SuggestionSet& latest,
                    std::span<const PostGroup> timeline,
                    const UserProfile& profile, const RepositoryState& state);

struct TimelineVerdict {
  bool satisfied = true;
  InferenceReport report;
  std::vector<std::string> violated;
};

// Recomputes the adversary over the deduplicated topics of the whole
// timeline.
TimelineVerdict TimelineGuard(std::span<const PostGroup> timeline,
                              const UserProfile& profile,
                              const RepositoryState& state);

// Fills empty cover sets with the k-1 alternates whose sibling nodes under
// the user's prefix hold the most topics (ties by value id).
UserProfile ChooseCoverSets(UserProfile profile, const TopicTree& tree,
                            const AttributeSchema& schema);

// One user's suggestion loop pinned to a snapshot and tree. Not thread-safe;
// callers serialize access per session.
class Session {
 public:
  Session(UserProfile profile, Snapshot snapshot,
          std::shared_ptr<const TopicTree> tree, SuggestOptions options,
          std::vector<PostGroup> timeline = {});

  const GroupEvaluation& Open(std::span<const std::string> topics,
                              std::string text = {});
  const SuggestionSet& Suggestions();
  const GroupEvaluation& Accept(const std::string& topic);
  // Moves the Satisfied group onto the timeline and returns it. Throws
  // Error(kNotSatisfied).
  PostGroup Finalize();

  bool has_group() const { return group_.has_value(); }
  const PostGroup& group() const;
  const GroupEvaluation& evaluation() const;
  const std::optional<SuggestionSet>& latest_suggestions() const {
    return suggestions_;
  }
  const std::vector<PostGroup>& timeline() const { return timeline_; }
  const UserProfile& profile() const { return profile_; }
  const Snapshot& snapshot() const { return snapshot_; }
  const TopicTree& tree() const { return *tree_; }

 private:
  UserProfile profile_;
  Snapshot snapshot_;
  std::shared_ptr<const TopicTree> tree_;
  SuggestOptions options_;
  std::vector<PostGroup> timeline_;
  std::optional<PostGroup> group_;
  std::optional<GroupEvaluation> evaluation_;
  std::optional<SuggestionSet> suggestions_;
};

}  // namespace aegis

#endif  // AEGIS_SUGGEST_H_
