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

// Publication queue. A Satisfied group's original and obfuscation posts are
// released in a seeded random order at random intervals so that neither
// position nor timing tells them apart.

#ifndef AEGIS_QUEUE_H_
#define AEGIS_QUEUE_H_

#include <cstdint>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include "aegis/suggest.h"
#include "json.hpp"

namespace aegis {

enum class PostKind { kOriginal, kObfuscation };

std::string_view PostKindName(PostKind kind);

struct QueueEntry {
  std::vector<std::string> topics;
  std::string text;
  PostKind kind = PostKind::kOriginal;
  int64_t scheduled_at = 0;
  std::string group_id;

  bool operator==(const QueueEntry&) const = default;
};

// Full entry, kind included. For publishers and logs, never for the UI.
nlohmann::json EntryToJson(const QueueEntry& entry);

struct IntervalBounds {
  int64_t min_seconds = 300;
  int64_t max_seconds = 14400;
};

// One entry for the original post plus one per accepted topic, shuffled
// uniformly under `seed`, the first released one gap after `now` and each
// later one a further gap drawn uniformly from `bounds`. Throws
// Error(kNotSatisfied | kInvalidArgument).
std::vector<QueueEntry> ScheduleGroup(const PostGroup& group,
                                      const std::string& group_id, int64_t now,
                                      uint64_t seed,
                                      const IntervalBounds& bounds = {});

// Mutex-guarded so enqueuers on other threads can hand off entries; a single
// scheduler drains.
class PostQueue {
 public:
  void Enqueue(std::vector<QueueEntry> entries);

  // Removes and returns every entry due at or before `now`, ordered by
  // scheduled time then enqueue order.
  std::vector<QueueEntry> Drain(int64_t now);

  std::vector<QueueEntry> Pending() const;
  size_t size() const;

  // Pending entries with the kind replaced by "pending".
  nlohmann::json MaskedJson() const;

  nlohmann::json ToJson() const;
  // Appends the entries of a ToJson() document. Throws
  // Error(kMalformedDocument).
  void Restore(const nlohmann::json& doc);

 private:
  struct Slot {
    QueueEntry entry;
    uint64_t sequence;
  };
  std::vector<Slot> SortedLocked() const;

  mutable std::mutex mu_;
  std::vector<Slot> slots_;
  uint64_t next_sequence_ = 0;
};

class Publisher {
 public:
  virtual ~Publisher() = default;
  virtual void Publish(const QueueEntry& entry) = 0;
};

class MemoryPublisher : public Publisher {
 public:
  void Publish(const QueueEntry& entry) override;
  const std::vector<QueueEntry>& published() const { return published_; }

 private:
  std::vector<QueueEntry> published_;
};

// Appends one JSON line per published entry. Throws Error(kIoError).
class FilePublisher : public Publisher {
 public:
  explicit FilePublisher(std::string path) : path_(std::move(path)) {}
  void Publish(const QueueEntry& entry) override;

 private:
  std::string path_;
};

class Clock {
 public:
  virtual ~Clock() = default;
  virtual int64_t Now() const = 0;
};

class SimulatedClock : public Clock {
 public:
  explicit SimulatedClock(int64_t start = 0) : now_(start) {}
  int64_t Now() const override { return now_; }
  void Set(int64_t now) { now_ = now; }
  void Advance(int64_t seconds) { now_ += seconds; }

 private:
  int64_t now_;
};

class SystemClock : public Clock {
 public:
  int64_t Now() const override;
};

// Drains everything due at clock.Now() into `publisher`; returns the count.
size_t PublishDue(PostQueue& queue, const Clock& clock, Publisher& publisher);

}  // namespace aegis

#endif  // AEGIS_QUEUE_H_
