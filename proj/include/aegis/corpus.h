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

// The topic analyzer side: labeled posts flow in from a stream source and are
// tallied into a topic repository. Readers work on immutable snapshots.

#ifndef AEGIS_CORPUS_H_
#define AEGIS_CORPUS_H_

#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "aegis/model.h"
#include "json.hpp"

namespace aegis {

struct LabeledPost {
  std::string post_id;
  std::vector<std::string> topics;
  std::map<std::string, std::string> labels;
  int64_t timestamp = 0;

  bool operator==(const LabeledPost&) const = default;
};

// Normalizes ids and checks labels against `schema`. Throws
// Error(kMalformedDocument | kUnknownAttribute | kUnknownValue).
LabeledPost ValidatePost(LabeledPost post, const AttributeSchema& schema);
LabeledPost PostFromJson(const nlohmann::json& line,
                         const AttributeSchema& schema);
nlohmann::json PostToJson(const LabeledPost& post);

std::vector<LabeledPost> ReadCorpus(const std::filesystem::path& path,
                                    const AttributeSchema& schema);
void WriteCorpus(const std::filesystem::path& path,
                 std::span<const LabeledPost> posts);

// Builds a schema from the label values a corpus actually uses. Attributes
// appear in order of first use; domains are sorted.
AttributeSchema InferSchema(const std::filesystem::path& corpus_path);

// Immutable repository contents at one generation.
struct RepositoryState {
  std::shared_ptr<const AttributeSchema> schema;
  uint64_t generation = 0;
  std::map<std::string, TopicStats> topics;

  // Throws Error(kUnknownTopic).
  const TopicStats& topic(const std::string& topic_id) const;
  bool Contains(const std::string& topic_id) const {
    return topics.contains(topic_id);
  }

  bool operator==(const RepositoryState& other) const;
};

using Snapshot = std::shared_ptr<const RepositoryState>;

// Per-attribute distribution of a topic, or nullopt when the attribute has no
// labeled observation for it. Throws Error(kUnknownTopic).
std::optional<Distribution> TopicDistribution(const RepositoryState& state,
                                              const std::string& topic_id,
                                              const std::string& attribute_id);

// Single-writer topic repository. Snapshot() hands out the current contents
// without copying; the writer copies on its next mutation if a snapshot is
// still alive, so readers never observe later ingests.
class TopicRepository {
 public:
  struct Options {
    size_t dedup_window = size_t{1} << 16;
    // Tally full persona tuples for posts labeled on every attribute.
    bool track_joint = true;
  };

  explicit TopicRepository(std::shared_ptr<const AttributeSchema> schema);
  TopicRepository(std::shared_ptr<const AttributeSchema> schema,
                  Options options);
  // Resumes writing on top of previously persisted contents.
  explicit TopicRepository(RepositoryState state);
  TopicRepository(RepositoryState state, Options options);

  // Adds one post without ending the batch. Redelivery of a (post_id, topic)
  // pair inside the dedup window is ignored.
  void Ingest(const LabeledPost& post);

  // Ends the current batch.
  void Commit();

  void IngestBatch(std::span<const LabeledPost> posts);

  Snapshot snapshot() const;
  uint64_t generation() const;
  const AttributeSchema& schema() const { return *schema_; }

 private:
  bool Remember(const std::string& post_id, const std::string& topic);
  RepositoryState& Mutable();

  std::shared_ptr<const AttributeSchema> schema_;
  Options options_;
  mutable std::mutex mu_;
  std::shared_ptr<RepositoryState> state_;
  std::set<std::pair<std::string, std::string>> recent_;
  std::deque<std::pair<std::string, std::string>> recent_order_;
};

// Repository file: one format-version byte, the JSON payload, then the
// payload's CRC-32 as four little-endian bytes.
inline constexpr uint8_t kRepositoryFormatVersion = 1;

void SaveRepository(const RepositoryState& state,
                    const std::filesystem::path& path);
// Throws Error(kIoError | kCorruptFile).
RepositoryState LoadRepository(const std::filesystem::path& path);

nlohmann::json RepositoryToJson(const RepositoryState& state);
RepositoryState RepositoryFromJson(const nlohmann::json& document);

// Pull-style stream of labeled posts. An empty batch means exhausted.
class PostSource {
 public:
  virtual ~PostSource() = default;
  virtual std::vector<LabeledPost> NextBatch(size_t max_posts) = 0;
};

class JsonlPostSource : public PostSource {
 public:
  JsonlPostSource(const std::filesystem::path& path,
                  std::shared_ptr<const AttributeSchema> schema);

  std::vector<LabeledPost> NextBatch(size_t max_posts) override;

 private:
  std::ifstream in_;
  std::shared_ptr<const AttributeSchema> schema_;
  size_t line_number_ = 0;
};

class VectorPostSource : public PostSource {
 public:
  explicit VectorPostSource(std::vector<LabeledPost> posts)
      : posts_(std::move(posts)) {}

  std::vector<LabeledPost> NextBatch(size_t max_posts) override;

 private:
  std::vector<LabeledPost> posts_;
  size_t next_ = 0;
};

// Drains `source` into `repository`, committing once per batch. Returns the
// number of posts read.
size_t IngestAll(PostSource& source, TopicRepository& repository,
                 size_t batch_size = 4096);

}  // namespace aegis

#endif  // AEGIS_CORPUS_H_
