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

#include "aegis/queue.h"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <random>

#include "aegis/error.h"

namespace aegis {

using nlohmann::json;

std::string_view PostKindName(PostKind kind) {
  return kind == PostKind::kOriginal ? "original" : "obfuscation";
}

json EntryToJson(const QueueEntry& entry) {
  return {{"topics", entry.topics},
          {"text", entry.text},
          {"kind", PostKindName(entry.kind)},
          {"scheduled_at", entry.scheduled_at},
          {"group_id", entry.group_id}};
}

namespace {

QueueEntry EntryFromJson(const json& doc) {
  try {
    QueueEntry entry;
    entry.topics = doc.at("topics").get<std::vector<std::string>>();
    entry.text = doc.value("text", "");
    std::string kind = doc.at("kind").get<std::string>();
    if (kind == "original") {
      entry.kind = PostKind::kOriginal;
    } else if (kind == "obfuscation") {
      entry.kind = PostKind::kObfuscation;
    } else {
      throw Error(ErrorCode::kMalformedDocument, "unknown kind '" + kind + "'");
    }
    entry.scheduled_at = doc.at("scheduled_at").get<int64_t>();
    entry.group_id = doc.at("group_id").get<std::string>();
    return entry;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kMalformedDocument, e.what());
  }
}

}  // namespace

std::vector<QueueEntry> ScheduleGroup(const PostGroup& group,
                                      const std::string& group_id, int64_t now,
                                      uint64_t seed,
                                      const IntervalBounds& bounds) {
  if (group.state != GroupState::kSatisfied) {
    throw Error(ErrorCode::kNotSatisfied,
                std::string("group is ") +
                    std::string(GroupStateName(group.state)));
  }
  if (bounds.min_seconds < 0 || bounds.min_seconds > bounds.max_seconds) {
    throw Error(ErrorCode::kInvalidArgument, "interval bounds out of order");
  }
  std::vector<QueueEntry> entries;
  entries.push_back({group.original, group.original_text, PostKind::kOriginal,
                     0, group_id});
  for (const std::string& topic : group.accepted) {
    entries.push_back({{topic}, "", PostKind::kObfuscation, 0, group_id});
  }

  std::mt19937_64 rng(seed);
  // Fisher-Yates, drawing j uniformly from [0, i].
  for (size_t i = entries.size() - 1; i > 0; --i) {
    std::uniform_int_distribution<size_t> pick(0, i);
    std::swap(entries[i], entries[pick(rng)]);
  }
  std::uniform_int_distribution<int64_t> gap(bounds.min_seconds,
                                             bounds.max_seconds);
  int64_t at = now;
  for (QueueEntry& entry : entries) {
    at += gap(rng);
    entry.scheduled_at = at;
  }
  return entries;
}

void PostQueue::Enqueue(std::vector<QueueEntry> entries) {
  std::lock_guard<std::mutex> lock(mu_);
  for (QueueEntry& entry : entries) {
    slots_.push_back({std::move(entry), next_sequence_++});
  }
}

std::vector<PostQueue::Slot> PostQueue::SortedLocked() const {
  std::vector<Slot> sorted = slots_;
  std::sort(sorted.begin(), sorted.end(), [](const Slot& a, const Slot& b) {
    if (a.entry.scheduled_at != b.entry.scheduled_at) {
      return a.entry.scheduled_at < b.entry.scheduled_at;
    }
    return a.sequence < b.sequence;
  });
  return sorted;
}

std::vector<QueueEntry> PostQueue::Drain(int64_t now) {
  std::lock_guard<std::mutex> lock(mu_);
  std::vector<Slot> sorted = SortedLocked();
  std::vector<QueueEntry> due;
  std::vector<Slot> rest;
  for (Slot& slot : sorted) {
    if (slot.entry.scheduled_at <= now) {
      due.push_back(std::move(slot.entry));
    } else {
      rest.push_back(std::move(slot));
    }
  }
  slots_ = std::move(rest);
  return due;
}

std::vector<QueueEntry> PostQueue::Pending() const {
  std::lock_guard<std::mutex> lock(mu_);
  std::vector<QueueEntry> pending;
  for (const Slot& slot : SortedLocked()) pending.push_back(slot.entry);
  return pending;
}

size_t PostQueue::size() const {
  std::lock_guard<std::mutex> lock(mu_);
  return slots_.size();
}

json PostQueue::MaskedJson() const {
  json entries = json::array();
  for (const QueueEntry& entry : Pending()) {
    json masked = EntryToJson(entry);
    masked["kind"] = "pending";
    entries.push_back(std::move(masked));
  }
  return {{"entries", std::move(entries)}};
}

json PostQueue::ToJson() const {
  json entries = json::array();
  for (const QueueEntry& entry : Pending()) {
    entries.push_back(EntryToJson(entry));
  }
  return {{"entries", std::move(entries)}};
}

void PostQueue::Restore(const json& doc) {
  if (!doc.is_object() || !doc.contains("entries") ||
      !doc["entries"].is_array()) {
    throw Error(ErrorCode::kMalformedDocument, "queue needs an entries array");
  }
  std::vector<QueueEntry> entries;
  for (const json& e : doc["entries"]) entries.push_back(EntryFromJson(e));
  Enqueue(std::move(entries));
}

void MemoryPublisher::Publish(const QueueEntry& entry) {
  published_.push_back(entry);
}

void FilePublisher::Publish(const QueueEntry& entry) {
  std::ofstream out(path_, std::ios::app);
  if (!out) throw Error(ErrorCode::kIoError, "cannot append to " + path_);
  out << EntryToJson(entry).dump() << "\n";
  if (!out) throw Error(ErrorCode::kIoError, "write failed: " + path_);
}

int64_t SystemClock::Now() const {
  return std::chrono::duration_cast<std::chrono::seconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

size_t PublishDue(PostQueue& queue, const Clock& clock, Publisher& publisher) {
  std::vector<QueueEntry> due = queue.Drain(clock.Now());
  for (const QueueEntry& entry : due) publisher.Publish(entry);
  return due.size();
}

}  // namespace aegis
