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

#include "aegis/suggest.h"

#include <algorithm>
#include <set>

#include "aegis/error.h"

namespace aegis {

using nlohmann::json;

namespace {

constexpr double kMinProgress = 1e-12;

void AppendUnique(std::vector<std::string>& out, const std::string& topic) {
  if (std::find(out.begin(), out.end(), topic) == out.end()) {
    out.push_back(topic);
  }
}

// An exposed (scope, attribute) pair with its current delta.
struct Exposure {
  bool timeline_scope;
  std::string attribute;
  double delta;
  double threshold;
};

std::optional<double> DeltaOf(const InferenceReport& report,
                              const std::string& attribute) {
  const SensitiveVerdict* v = report.Find(attribute);
  return v ? v->delta : std::nullopt;
}

}  // namespace

std::string_view GroupStateName(GroupState state) {
  switch (state) {
    case GroupState::kDraft:
      return "Draft";
    case GroupState::kSatisfied:
      return "Satisfied";
    case GroupState::kBudgetExhausted:
      return "BudgetExhausted";
  }
  return "Draft";
}

std::vector<std::string> PostGroup::TopicSet() const {
  std::vector<std::string> topics;
  for (const std::string& t : original) AppendUnique(topics, t);
  for (const std::string& t : accepted) AppendUnique(topics, t);
  return topics;
}

json GroupToJson(const PostGroup& group) {
  return {{"original", group.original},
          {"original_text", group.original_text},
          {"accepted", group.accepted},
          {"state", GroupStateName(group.state)}};
}

std::vector<std::string> TimelineTopics(std::span<const PostGroup> timeline) {
  std::vector<std::string> topics;
  for (const PostGroup& group : timeline) {
    for (const std::string& t : group.TopicSet()) AppendUnique(topics, t);
  }
  return topics;
}

json EvaluationToJson(const GroupEvaluation& evaluation) {
  return {{"group", ReportToJson(evaluation.group)},
          {"timeline", ReportToJson(evaluation.timeline)},
          {"satisfied", evaluation.Satisfied()}};
}

InferenceReport EvaluateTopics(const UserProfile& profile,
                               std::span<const std::string> topics,
                               const RepositoryState& state) {
  if (!topics.empty()) return Evaluate(profile, topics, state);
  InferenceReport report;
  for (const Attribute& attribute : state.schema->attributes()) {
    report.estimate[attribute.id] = std::nullopt;
  }
  report.sensitive = Check(profile, report.estimate);
  return report;
}

GroupEvaluation EvaluateGroup(const PostGroup& group,
                              std::span<const PostGroup> timeline,
                              const UserProfile& profile,
                              const RepositoryState& state) {
  std::vector<std::string> group_topics = group.TopicSet();
  std::vector<std::string> all_topics = TimelineTopics(timeline);
  for (const std::string& t : group_topics) AppendUnique(all_topics, t);
  GroupEvaluation evaluation;
  evaluation.group = EvaluateTopics(profile, group_topics, state);
  evaluation.timeline = all_topics == group_topics
                            ? evaluation.group
                            : EvaluateTopics(profile, all_topics, state);
  return evaluation;
}

OpenedGroup OpenGroup(std::span<const std::string> topics, std::string text,
                      std::span<const PostGroup> timeline,
                      const UserProfile& profile,
                      const RepositoryState& state) {
  OpenedGroup opened;
  for (const std::string& raw : topics) {
    std::string topic = NormalizeTopicId(raw);
    if (topic.empty()) continue;
    state.topic(topic);
    AppendUnique(opened.group.original, topic);
  }
  if (opened.group.original.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "draft post has no topics");
  }
  opened.group.original_text = std::move(text);
  opened.evaluation = EvaluateGroup(opened.group, timeline, profile, state);
  opened.group.state = opened.evaluation.Satisfied() ? GroupState::kSatisfied
                                                     : GroupState::kDraft;
  return opened;
}

bool SuggestionSet::Contains(const std::string& topic) const {
  return std::any_of(entries.begin(), entries.end(),
                     [&](const SuggestionEntry& e) { return e.topic == topic; });
}

json SuggestionSetToJson(const SuggestionSet& set) {
  json entries = json::array();
  for (const SuggestionEntry& e : set.entries) {
    entries.push_back({{"topic", e.topic},
                       {"alternates", e.alternates},
                       {"projected_delta", e.projected_delta},
                       {"score", e.score},
                       {"post_count", e.post_count}});
  }
  return {{"entries", std::move(entries)},
          {"generation", set.generation},
          {"worst_delta", set.worst_delta}};
}

CandidatePool TreeCandidates(const UserProfile& profile, const TopicTree& tree,
                             std::span<const std::string> attributes) {
  CandidatePool pool;
  Path user_path = UserPath(profile);
  for (const std::string& attr : attributes) {
    const SensitiveSetting* setting = profile.FindSensitive(attr);
    if (!setting) throw Error(ErrorCode::kUnknownAttribute, attr);
    if (setting->cover_set.empty()) {
      throw Error(ErrorCode::kPreconditionViolation,
                  "cover set for '" + attr + "' has not been chosen");
    }
    pool[attr] = SiblingTopics(tree, user_path, attr, setting->cover_set);
  }
  return pool;
}

CandidatePool IndependentCandidates(const UserProfile& profile,
                                    const RepositoryState& state,
                                    const LinkOptions& options,
                                    std::span<const std::string> attributes) {
  CandidatePool pool;
  for (const std::string& attr : attributes) {
    const SensitiveSetting* setting = profile.FindSensitive(attr);
    if (!setting) throw Error(ErrorCode::kUnknownAttribute, attr);
    const std::string& own = profile.true_values.at(attr);
    auto& by_value = pool[attr];
    for (const std::string& value : setting->cover_set) {
      if (value != own) by_value[value];
    }
    for (const auto& [topic, stats] : state.topics) {
      std::optional<std::string> linked =
          IndependentBaseline(topic, attr, state, options);
      if (linked && by_value.contains(*linked)) {
        by_value[*linked].push_back(topic);
      }
    }
  }
  return pool;
}

SuggestionSet SuggestFromPool(const PostGroup& group,
                              std::span<const PostGroup> timeline,
                              const UserProfile& profile,
                              const RepositoryState& state,
                              const CandidatePool& pool,
                              const SuggestOptions& options) {
  GroupEvaluation current = EvaluateGroup(group, timeline, profile, state);
  std::vector<Exposure> exposures;
  for (bool timeline_scope : {false, true}) {
    const InferenceReport& report =
        timeline_scope ? current.timeline : current.group;
    for (const SensitiveVerdict& v : report.sensitive) {
      if (v.verdict == Verdict::kAttackSucceeds) {
        exposures.push_back({timeline_scope, v.attribute, *v.delta,
                             v.threshold});
      }
    }
  }
  if (exposures.empty()) {
    throw Error(ErrorCode::kPreconditionViolation,
                "no sensitive attribute is exposed");
  }
  double worst_before = 0.0;
  std::set<std::string> exposed_attrs;
  for (const Exposure& e : exposures) {
    worst_before = std::max(worst_before, e.delta);
    exposed_attrs.insert(e.attribute);
  }

  // Candidate topic -> alternates it was drawn for.
  std::map<std::string, std::map<std::string, std::string>> candidates;
  std::vector<std::string> group_topics = group.TopicSet();
  for (const std::string& attr : exposed_attrs) {
    auto it = pool.find(attr);
    if (it == pool.end()) continue;
    for (const auto& [value, topics] : it->second) {
      for (const std::string& topic : topics) {
        if (std::find(group_topics.begin(), group_topics.end(), topic) !=
            group_topics.end()) {
          continue;
        }
        candidates[topic].emplace(attr, value);
      }
    }
  }

  SuggestionSet set;
  set.generation = state.generation;
  set.worst_delta = worst_before;
  for (const auto& [topic, alternates] : candidates) {
    PostGroup extended = group;
    extended.accepted.push_back(topic);
    GroupEvaluation after = EvaluateGroup(extended, timeline, profile, state);

    double worst_after = 0.0;
    for (const Exposure& e : exposures) {
      const InferenceReport& report = e.timeline_scope ? after.timeline
                                                       : after.group;
      worst_after = std::max(worst_after,
                             DeltaOf(report, e.attribute).value_or(0.0));
    }
    double score = worst_before - worst_after;
    if (score <= kMinProgress) continue;

    // No sensitive attribute in either scope may get worse unless it stays
    // below its threshold.
    bool acceptable = true;
    for (bool timeline_scope : {false, true}) {
      const InferenceReport& before_report =
          timeline_scope ? current.timeline : current.group;
      const InferenceReport& after_report =
          timeline_scope ? after.timeline : after.group;
      for (const SensitiveVerdict& v : after_report.sensitive) {
        if (!v.delta) continue;
        double old_delta = DeltaOf(before_report, v.attribute).value_or(0.0);
        if (*v.delta > old_delta + kMinProgress && *v.delta >= v.threshold) {
          acceptable = false;
        }
      }
    }
    if (!acceptable) continue;

    if (options.preserve_persona) {
      for (const std::string& attr : profile.public_attrs) {
        const auto& before = current.group.estimate.at(attr);
        const auto& projected = after.group.estimate.at(attr);
        if (!before || !projected) continue;
        if (projected->Argmax() != before->Argmax() ||
            before->TopKGap(2) - projected->TopKGap(2) >
                options.persona_epsilon) {
          acceptable = false;
          break;
        }
      }
      if (!acceptable) continue;
    }

    SuggestionEntry entry;
    entry.topic = topic;
    entry.alternates = alternates;
    for (const SensitiveVerdict& v : after.group.sensitive) {
      if (v.delta) entry.projected_delta[v.attribute] = *v.delta;
    }
    entry.score = score;
    entry.post_count = state.topic(topic).post_count;
    set.entries.push_back(std::move(entry));
  }

  if (set.entries.empty()) {
    throw Error(ErrorCode::kNoCandidates,
                "no persona-preserving topic reduces the exposed delta");
  }
  std::sort(set.entries.begin(), set.entries.end(),
            [](const SuggestionEntry& a, const SuggestionEntry& b) {
              if (a.score != b.score) return a.score > b.score;
              if (a.post_count != b.post_count) {
                return a.post_count > b.post_count;
              }
              return a.topic < b.topic;
            });
  if (set.entries.size() > options.max_candidates) {
    set.entries.resize(options.max_candidates);
  }
  return set;
}

SuggestionSet Suggest(const PostGroup& group,
                      std::span<const PostGroup> timeline,
                      const UserProfile& profile, const TopicTree& tree,
                      const RepositoryState& state,
                      const SuggestOptions& options) {
  if (group.state == GroupState::kSatisfied) {
    throw Error(ErrorCode::kPreconditionViolation, "group already satisfied");
  }
  std::vector<std::string> attrs;
  for (const SensitiveSetting& s : profile.sensitive) {
    attrs.push_back(s.attribute);
  }
  CandidatePool pool = TreeCandidates(profile, tree, attrs);
  return SuggestFromPool(group, timeline, profile, state, pool, options);
}

AcceptResult Accept(const PostGroup& group, const std::string& raw_topic,
                    const SuggestionSet& latest,
                    std::span<const PostGroup> timeline,
                    const UserProfile& profile, const RepositoryState& state) {
  if (group.state != GroupState::kDraft) {
    throw Error(ErrorCode::kPreconditionViolation,
                std::string("group is ") +
                    std::string(GroupStateName(group.state)));
  }
  std::string topic = NormalizeTopicId(raw_topic);
  std::vector<std::string> topics = group.TopicSet();
  if (std::find(topics.begin(), topics.end(), topic) != topics.end()) {
    throw Error(ErrorCode::kDuplicateTopic, topic);
  }
  if (latest.generation != state.generation) {
    throw Error(ErrorCode::kStaleSuggestion,
                "suggestions were computed at generation " +
                    std::to_string(latest.generation));
  }
  if (!latest.Contains(topic)) {
    throw Error(ErrorCode::kStaleSuggestion,
                "'" + topic + "' is not in the latest suggestion set");
  }
  AcceptResult result;
  result.group = group;
  result.group.accepted.push_back(topic);
  result.evaluation = EvaluateGroup(result.group, timeline, profile, state);
  if (result.evaluation.Satisfied()) {
    result.group.state = GroupState::kSatisfied;
  } else if (result.group.accepted.size() >=
             static_cast<size_t>(profile.suggestion_budget)) {
    result.group.state = GroupState::kBudgetExhausted;
  }
  return result;
}

TimelineVerdict TimelineGuard(std::span<const PostGroup> timeline,
                              const UserProfile& profile,
                              const RepositoryState& state) {
  TimelineVerdict verdict;
  std::vector<std::string> topics = TimelineTopics(timeline);
  verdict.report = EvaluateTopics(profile, topics, state);
  for (const SensitiveVerdict& v : verdict.report.sensitive) {
    if (v.verdict == Verdict::kAttackSucceeds) {
      verdict.violated.push_back(v.attribute);
    }
  }
  verdict.satisfied = verdict.violated.empty();
  return verdict;
}

UserProfile ChooseCoverSets(UserProfile profile, const TopicTree& tree,
                            const AttributeSchema& schema) {
  Path user_path = UserPath(profile);
  for (SensitiveSetting& setting : profile.sensitive) {
    if (!setting.cover_set.empty()) continue;
    int level = tree.LevelOf(setting.attribute);
    if (level < 0) throw Error(ErrorCode::kLevelMismatch, setting.attribute);
    const std::string& own = profile.true_values.at(setting.attribute);
    Path prefix(user_path.begin(), user_path.begin() + level);
    std::vector<std::pair<size_t, std::string>> ranked;
    for (const std::string& value : schema.attribute(setting.attribute).domain) {
      if (value == own) continue;
      Path node = prefix;
      node.push_back(value);
      ranked.emplace_back(tree.TopicsUnder(node).size(), value);
    }
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second < b.second;
    });
    setting.cover_set = {own};
    for (size_t i = 0; i + 1 < static_cast<size_t>(setting.k); ++i) {
      setting.cover_set.push_back(ranked[i].second);
    }
    std::sort(setting.cover_set.begin(), setting.cover_set.end());
  }
  return ValidateProfile(std::move(profile), schema);
}

Session::Session(UserProfile profile, Snapshot snapshot,
                 std::shared_ptr<const TopicTree> tree, SuggestOptions options,
                 std::vector<PostGroup> timeline)
    : profile_(std::move(profile)),
      snapshot_(std::move(snapshot)),
      tree_(std::move(tree)),
      options_(options),
      timeline_(std::move(timeline)) {
  profile_ = ChooseCoverSets(std::move(profile_), *tree_, *snapshot_->schema);
}

const GroupEvaluation& Session::Open(std::span<const std::string> topics,
                                     std::string text) {
  OpenedGroup opened =
      OpenGroup(topics, std::move(text), timeline_, profile_, *snapshot_);
  group_ = std::move(opened.group);
  evaluation_ = std::move(opened.evaluation);
  suggestions_.reset();
  return *evaluation_;
}

const PostGroup& Session::group() const {
  if (!group_) throw Error(ErrorCode::kPreconditionViolation, "no open group");
  return *group_;
}

const GroupEvaluation& Session::evaluation() const {
  if (!evaluation_) {
    throw Error(ErrorCode::kPreconditionViolation, "no open group");
  }
  return *evaluation_;
}

const SuggestionSet& Session::Suggestions() {
  const PostGroup& current = group();
  if (!suggestions_) {
    suggestions_ =
        Suggest(current, timeline_, profile_, *tree_, *snapshot_, options_);
  }
  return *suggestions_;
}

const GroupEvaluation& Session::Accept(const std::string& topic) {
  const PostGroup& current = group();
  std::vector<std::string> topics = current.TopicSet();
  if (std::find(topics.begin(), topics.end(), NormalizeTopicId(topic)) !=
      topics.end()) {
    throw Error(ErrorCode::kDuplicateTopic, NormalizeTopicId(topic));
  }
  if (current.state != GroupState::kDraft) {
    throw Error(ErrorCode::kPreconditionViolation,
                std::string("group is ") +
                    std::string(GroupStateName(current.state)));
  }
  const SuggestionSet& latest = Suggestions();
  AcceptResult result = aegis::Accept(current, topic, latest, timeline_,
                                      profile_, *snapshot_);
  group_ = std::move(result.group);
  evaluation_ = std::move(result.evaluation);
  suggestions_.reset();
  return *evaluation_;
}

PostGroup Session::Finalize() {
  const PostGroup& current = group();
  if (current.state != GroupState::kSatisfied) {
    throw Error(ErrorCode::kNotSatisfied,
                std::string("group is ") +
                    std::string(GroupStateName(current.state)));
  }
  PostGroup finalized = current;
  timeline_.push_back(finalized);
  group_.reset();
  evaluation_.reset();
  suggestions_.reset();
  return finalized;
}

}  // namespace aegis
