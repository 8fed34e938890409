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

#include "aegis/corpus.h"

#include <zlib.h>

#include <algorithm>
#include <iterator>
#include <sstream>

#include "aegis/error.h"

namespace aegis {

using nlohmann::json;

LabeledPost ValidatePost(LabeledPost post, const AttributeSchema& schema) {
  if (post.post_id.empty()) {
    throw Error(ErrorCode::kMalformedDocument, "post without post_id");
  }
  std::vector<std::string> topics;
  for (const std::string& raw : post.topics) {
    std::string topic = NormalizeTopicId(raw);
    if (topic.empty()) continue;
    if (std::find(topics.begin(), topics.end(), topic) == topics.end()) {
      topics.push_back(std::move(topic));
    }
  }
  if (topics.empty()) {
    throw Error(ErrorCode::kMalformedDocument,
                "post '" + post.post_id + "' has no topics");
  }
  post.topics = std::move(topics);
  std::map<std::string, std::string> labels;
  for (const auto& [attr, value] : post.labels) {
    std::string attr_id = NormalizeValueId(attr);
    std::string value_id = NormalizeValueId(value);
    if (!schema.attribute(attr_id).Contains(value_id)) {
      throw Error(ErrorCode::kUnknownValue,
                  "post '" + post.post_id + "': " + attr_id + "." + value_id);
    }
    labels[attr_id] = value_id;
  }
  post.labels = std::move(labels);
  return post;
}

LabeledPost PostFromJson(const json& line, const AttributeSchema& schema) {
  if (!line.is_object() || !line.contains("post_id") ||
      !line.contains("topics")) {
    throw Error(ErrorCode::kMalformedDocument,
                "post needs 'post_id' and 'topics'");
  }
  LabeledPost post;
  const json& id = line.at("post_id");
  post.post_id = id.is_string() ? id.get<std::string>() : id.dump();
  if (!line.at("topics").is_array()) {
    throw Error(ErrorCode::kMalformedDocument, "'topics' must be a list");
  }
  for (const json& topic : line.at("topics")) {
    if (!topic.is_string()) {
      throw Error(ErrorCode::kMalformedDocument, "topic must be a string");
    }
    post.topics.push_back(topic.get<std::string>());
  }
  if (line.contains("labels")) {
    for (const auto& [attr, value] : line.at("labels").items()) {
      if (value.is_null()) continue;
      if (!value.is_string()) {
        throw Error(ErrorCode::kMalformedDocument, "label must be a string");
      }
      post.labels[attr] = value.get<std::string>();
    }
  }
  if (line.contains("ts")) {
    if (!line.at("ts").is_number_integer()) {
      throw Error(ErrorCode::kMalformedDocument, "'ts' must be an integer");
    }
    post.timestamp = line.at("ts").get<int64_t>();
  }
  return ValidatePost(std::move(post), schema);
}

json PostToJson(const LabeledPost& post) {
  return {{"post_id", post.post_id},
          {"topics", post.topics},
          {"labels", post.labels},
          {"ts", post.timestamp}};
}

std::vector<LabeledPost> ReadCorpus(const std::filesystem::path& path,
                                    const AttributeSchema& schema) {
  auto shared = std::make_shared<const AttributeSchema>(schema);
  JsonlPostSource source(path, shared);
  std::vector<LabeledPost> posts;
  while (true) {
    std::vector<LabeledPost> batch = source.NextBatch(4096);
    if (batch.empty()) break;
    std::move(batch.begin(), batch.end(), std::back_inserter(posts));
  }
  return posts;
}

void WriteCorpus(const std::filesystem::path& path,
                 std::span<const LabeledPost> posts) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  for (const LabeledPost& post : posts) out << PostToJson(post).dump() << '\n';
  if (!out) throw Error(ErrorCode::kIoError, "write failed: " + path.string());
}

AttributeSchema InferSchema(const std::filesystem::path& corpus_path) {
  std::ifstream in(corpus_path);
  if (!in) {
    throw Error(ErrorCode::kIoError, "cannot read " + corpus_path.string());
  }
  std::vector<std::string> order;
  std::map<std::string, std::set<std::string>> values;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::ordered_json parsed = nlohmann::ordered_json::parse(line, nullptr, false);
    if (parsed.is_discarded() || !parsed.is_object()) {
      throw Error(ErrorCode::kMalformedDocument, "bad corpus line");
    }
    if (!parsed.contains("labels")) continue;
    for (const auto& [attr, value] : parsed.at("labels").items()) {
      if (!value.is_string()) continue;
      std::string attr_id = NormalizeValueId(attr);
      if (!values.contains(attr_id)) order.push_back(attr_id);
      values[attr_id].insert(NormalizeValueId(value.get<std::string>()));
    }
  }
  std::vector<Attribute> attributes;
  for (const std::string& attr : order) {
    Attribute attribute;
    attribute.id = attr;
    attribute.domain.assign(values[attr].begin(), values[attr].end());
    attributes.push_back(std::move(attribute));
  }
  return AttributeSchema::Create(std::move(attributes));
}

const TopicStats& RepositoryState::topic(const std::string& topic_id) const {
  auto it = topics.find(topic_id);
  if (it == topics.end()) throw Error(ErrorCode::kUnknownTopic, topic_id);
  return it->second;
}

bool RepositoryState::operator==(const RepositoryState& other) const {
  bool same_schema = (schema == other.schema) ||
                     (schema && other.schema && *schema == *other.schema);
  return same_schema && generation == other.generation &&
         topics == other.topics;
}

std::optional<Distribution> TopicDistribution(const RepositoryState& state,
                                              const std::string& topic_id,
                                              const std::string& attribute_id) {
  const TopicStats& stats = state.topic(topic_id);
  const Attribute& attribute = state.schema->attribute(attribute_id);
  auto it = stats.counts.find(attribute_id);
  if (it == stats.counts.end()) return std::nullopt;
  return Distribution::FromCounts(attribute, it->second);
}

TopicRepository::TopicRepository(std::shared_ptr<const AttributeSchema> schema)
    : TopicRepository(std::move(schema), Options{}) {}

TopicRepository::TopicRepository(std::shared_ptr<const AttributeSchema> schema,
                                 Options options)
    : schema_(std::move(schema)),
      options_(options),
      state_(std::make_shared<RepositoryState>()) {
  state_->schema = schema_;
}

TopicRepository::TopicRepository(RepositoryState state)
    : TopicRepository(std::move(state), Options{}) {}

TopicRepository::TopicRepository(RepositoryState state, Options options)
    : schema_(state.schema),
      options_(options),
      state_(std::make_shared<RepositoryState>(std::move(state))) {}

RepositoryState& TopicRepository::Mutable() {
  // Snapshots are only created under mu_, so a count of one here cannot race
  // with a new reader.
  if (state_.use_count() > 1) {
    state_ = std::make_shared<RepositoryState>(*state_);
  }
  return *state_;
}

bool TopicRepository::Remember(const std::string& post_id,
                               const std::string& topic) {
  auto key = std::make_pair(post_id, topic);
  if (recent_.contains(key)) return false;
  if (options_.dedup_window == 0) return true;
  recent_.insert(key);
  recent_order_.push_back(std::move(key));
  while (recent_order_.size() > options_.dedup_window) {
    recent_.erase(recent_order_.front());
    recent_order_.pop_front();
  }
  return true;
}

void TopicRepository::Ingest(const LabeledPost& raw) {
  LabeledPost post = ValidatePost(raw, *schema_);
  std::vector<std::string> persona;
  if (options_.track_joint && post.labels.size() == schema_->size()) {
    for (const Attribute& attribute : schema_->attributes()) {
      persona.push_back(post.labels.at(attribute.id));
    }
  }
  std::lock_guard<std::mutex> lock(mu_);
  for (const std::string& topic : post.topics) {
    if (!Remember(post.post_id, topic)) continue;
    RepositoryState& state = Mutable();
    TopicStats& stats = state.topics[topic];
    stats.topic = topic;
    stats.post_count += 1;
    for (const auto& [attr, value] : post.labels) stats.counts[attr][value] += 1;
    if (!persona.empty()) stats.joint[persona] += 1;
  }
}

void TopicRepository::Commit() {
  std::lock_guard<std::mutex> lock(mu_);
  Mutable().generation += 1;
}

void TopicRepository::IngestBatch(std::span<const LabeledPost> posts) {
  for (const LabeledPost& post : posts) Ingest(post);
  Commit();
}

Snapshot TopicRepository::snapshot() const {
  std::lock_guard<std::mutex> lock(mu_);
  return state_;
}

uint64_t TopicRepository::generation() const {
  std::lock_guard<std::mutex> lock(mu_);
  return state_->generation;
}

json RepositoryToJson(const RepositoryState& state) {
  json topics = json::array();
  for (const auto& [id, stats] : state.topics) {
    json joint = json::array();
    for (const auto& [persona, count] : stats.joint) {
      joint.push_back({{"persona", persona}, {"count", count}});
    }
    topics.push_back({{"topic", id},
                      {"post_count", stats.post_count},
                      {"counts", stats.counts},
                      {"joint", std::move(joint)}});
  }
  return {{"schema", SchemaToJson(*state.schema)},
          {"generation", state.generation},
          {"topics", std::move(topics)}};
}

RepositoryState RepositoryFromJson(const json& document) {
  try {
    RepositoryState state;
    state.schema = std::make_shared<const AttributeSchema>(
        SchemaFromJson(document.at("schema")));
    state.generation = document.at("generation").get<uint64_t>();
    for (const json& entry : document.at("topics")) {
      TopicStats stats;
      stats.topic = entry.at("topic").get<std::string>();
      stats.post_count = entry.at("post_count").get<uint64_t>();
      stats.counts = entry.at("counts")
                         .get<std::map<std::string,
                                       std::map<std::string, uint64_t>>>();
      for (const json& joint : entry.at("joint")) {
        stats.joint[joint.at("persona").get<std::vector<std::string>>()] =
            joint.at("count").get<uint64_t>();
      }
      std::string id = stats.topic;
      state.topics.emplace(std::move(id), std::move(stats));
    }
    return state;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kCorruptFile, e.what());
  }
}

void SaveRepository(const RepositoryState& state,
                    const std::filesystem::path& path) {
  std::string payload = RepositoryToJson(state).dump();
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, reinterpret_cast<const Bytef*>(payload.data()),
              static_cast<uInt>(payload.size()));
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out.put(static_cast<char>(kRepositoryFormatVersion));
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  for (int i = 0; i < 4; ++i) {
    out.put(static_cast<char>((crc >> (8 * i)) & 0xFF));
  }
  if (!out) throw Error(ErrorCode::kIoError, "write failed: " + path.string());
}

RepositoryState LoadRepository(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot read " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  if (bytes.size() < 5) {
    throw Error(ErrorCode::kCorruptFile, path.string() + " is truncated");
  }
  if (static_cast<uint8_t>(bytes[0]) != kRepositoryFormatVersion) {
    throw Error(ErrorCode::kCorruptFile,
                "unsupported format version " +
                    std::to_string(static_cast<uint8_t>(bytes[0])));
  }
  std::string_view payload(bytes.data() + 1, bytes.size() - 5);
  uint32_t stored = 0;
  for (int i = 0; i < 4; ++i) {
    stored |= static_cast<uint32_t>(
                  static_cast<uint8_t>(bytes[bytes.size() - 4 + i]))
              << (8 * i);
  }
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, reinterpret_cast<const Bytef*>(payload.data()),
              static_cast<uInt>(payload.size()));
  if (static_cast<uint32_t>(crc) != stored) {
    throw Error(ErrorCode::kCorruptFile, "checksum mismatch in " + path.string());
  }
  json document = json::parse(payload, nullptr, false);
  if (document.is_discarded()) {
    throw Error(ErrorCode::kCorruptFile, "unparseable payload");
  }
  return RepositoryFromJson(document);
}

JsonlPostSource::JsonlPostSource(const std::filesystem::path& path,
                                 std::shared_ptr<const AttributeSchema> schema)
    : in_(path), schema_(std::move(schema)) {
  if (!in_) throw Error(ErrorCode::kIoError, "cannot read " + path.string());
}

std::vector<LabeledPost> JsonlPostSource::NextBatch(size_t max_posts) {
  std::vector<LabeledPost> batch;
  std::string line;
  while (batch.size() < max_posts && std::getline(in_, line)) {
    ++line_number_;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json parsed = json::parse(line, nullptr, false);
    if (parsed.is_discarded()) {
      throw Error(ErrorCode::kMalformedDocument,
                  "corpus line " + std::to_string(line_number_) +
                      " is not valid JSON");
    }
    batch.push_back(PostFromJson(parsed, *schema_));
  }
  return batch;
}

std::vector<LabeledPost> VectorPostSource::NextBatch(size_t max_posts) {
  size_t end = std::min(posts_.size(), next_ + max_posts);
  std::vector<LabeledPost> batch(posts_.begin() + next_, posts_.begin() + end);
  next_ = end;
  return batch;
}

size_t IngestAll(PostSource& source, TopicRepository& repository,
                 size_t batch_size) {
  size_t total = 0;
  while (true) {
    std::vector<LabeledPost> batch = source.NextBatch(batch_size);
    if (batch.empty()) break;
    total += batch.size();
    repository.IngestBatch(batch);
  }
  return total;
}

}  // namespace aegis
