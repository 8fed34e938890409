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

#include "aegis/service.h"

#include <cctype>

#include "httplib.h"

namespace aegis {

using nlohmann::json;

json ErrorJson(std::string_view code, std::string_view message) {
  return {{"error", {{"code", code}, {"message", message}}}};
}

json ErrorJson(const Error& error) {
  return ErrorJson(ErrorCodeName(error.code()), error.message());
}

int HttpStatusFor(ErrorCode code) {
  switch (code) {
    case ErrorCode::kMalformedDocument:
    case ErrorCode::kInvalidArgument:
      return 400;
    case ErrorCode::kUnknownTopic:
      return 404;
    case ErrorCode::kStaleSuggestion:
    case ErrorCode::kDuplicateTopic:
    case ErrorCode::kNotSatisfied:
    case ErrorCode::kPreconditionViolation:
      return 409;
    default:
      return 422;
  }
}

std::vector<std::string> ExtractHashtags(std::string_view text) {
  std::vector<std::string> tags;
  for (size_t i = 0; i < text.size(); ++i) {
    if (text[i] != '#') continue;
    size_t j = i + 1;
    while (j < text.size() &&
           (std::isalnum(static_cast<unsigned char>(text[j])) ||
            text[j] == '_')) {
      ++j;
    }
    if (j > i + 1) {
      std::string tag = NormalizeTopicId(text.substr(i + 1, j - i - 1));
      if (std::find(tags.begin(), tags.end(), tag) == tags.end()) {
        tags.push_back(std::move(tag));
      }
    }
    i = j - 1;
  }
  return tags;
}

namespace {

Response Fail(int status, std::string_view code, std::string_view message) {
  return {status, ErrorJson(code, message)};
}

std::vector<std::string> SplitPath(std::string_view path) {
  size_t query = path.find('?');
  if (query != std::string_view::npos) path = path.substr(0, query);
  std::vector<std::string> parts;
  size_t start = 0;
  while (start <= path.size()) {
    size_t slash = path.find('/', start);
    if (slash == std::string_view::npos) slash = path.size();
    if (slash > start) parts.emplace_back(path.substr(start, slash - start));
    start = slash + 1;
  }
  return parts;
}

json SessionJson(const std::string& id, const Session& session) {
  return {{"session_id", id},
          {"generation", session.snapshot()->generation},
          {"group", GroupToJson(session.group())},
          {"evaluation", EvaluationToJson(session.evaluation())}};
}

}  // namespace

Service::Service(UserProfile profile, Snapshot snapshot, Options options,
                 std::shared_ptr<const Clock> clock)
    : snapshot_(std::move(snapshot)),
      options_(options),
      clock_(std::move(clock)) {
  profile = ValidateProfile(std::move(profile), *snapshot_->schema);
  tree_ = std::make_shared<const TopicTree>(
      BuildTree(profile, *snapshot_, options_.link));
  profile_ = ChooseCoverSets(std::move(profile), *tree_, *snapshot_->schema);
}

Service::~Service() = default;

std::shared_ptr<Service::Entry> Service::Find(const std::string& id) {
  std::lock_guard<std::mutex> lock(mu_);
  auto it = sessions_.find(id);
  return it == sessions_.end() ? nullptr : it->second;
}

Response Service::Dispatch(std::string_view method, std::string_view path,
                           std::string_view body) {
  std::vector<std::string> parts = SplitPath(path);
  json doc;
  if (method == "POST") {
    doc = body.empty() ? json::object() : json::parse(body, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) {
      return Fail(400, "MalformedDocument", "request body must be a JSON object");
    }
  }
  try {
    if (parts.size() == 1 && parts[0] == "health" && method == "GET") {
      return {200,
              {{"status", "ok"}, {"generation", snapshot_->generation}}};
    }
    if (parts.size() == 1 && parts[0] == "adversary" && method == "GET") {
      return Adversary();
    }
    if (parts.size() == 1 && parts[0] == "tree" && method == "GET") {
      return {200, tree_->PrunedJson(profile_)};
    }
    if (parts.size() == 1 && parts[0] == "queue" && method == "GET") {
      return {200, queue_.MaskedJson()};
    }
    if (parts.size() == 1 && parts[0] == "session" && method == "POST") {
      return OpenSession(doc);
    }
    if (parts.size() >= 2 && parts[0] == "session") {
      const std::string& id = parts[1];
      if (parts.size() == 2 && method == "DELETE") return CloseSession(id);
      std::shared_ptr<Entry> entry = Find(id);
      if (!entry) return Fail(404, "UnknownSession", "no session '" + id + "'");
      std::lock_guard<std::mutex> lock(entry->mu);
      if (parts.size() == 2 && method == "GET") {
        if (!entry->session.has_group()) {
          return Fail(409, "PreconditionViolation", "session is finalized");
        }
        return {200, SessionJson(id, entry->session)};
      }
      if (parts.size() == 3 && parts[2] == "suggestions" && method == "GET") {
        return Suggestions(*entry, id);
      }
      if (parts.size() == 3 && parts[2] == "accept" && method == "POST") {
        return AcceptTopic(*entry, id, doc);
      }
      if (parts.size() == 3 && parts[2] == "finalize" && method == "POST") {
        return Finalize(*entry, id);
      }
    }
    return Fail(404, "NotFound",
                std::string(method) + " " + std::string(path) + " is not a route");
  } catch (const Error& e) {
    return {HttpStatusFor(e.code()), ErrorJson(e)};
  } catch (const json::exception& e) {
    return Fail(400, "MalformedDocument", e.what());
  }
}

Response Service::OpenSession(const json& body) {
  std::vector<std::string> topics;
  std::string text = body.value("text", "");
  if (body.contains("topics")) {
    if (!body["topics"].is_array()) {
      return Fail(400, "MalformedDocument", "topics must be an array");
    }
    topics = body["topics"].get<std::vector<std::string>>();
  } else {
    topics = ExtractHashtags(text);
  }
  std::lock_guard<std::mutex> lock(mu_);
  if (!active_.empty()) {
    return Fail(409, "SessionActive",
                "session '" + active_ + "' is still open for this profile");
  }
  Session session(profile_, snapshot_, tree_, options_.suggest, timeline_);
  session.Open(topics, text);
  std::string id = "s" + std::to_string(next_session_++);
  auto entry = std::make_shared<Entry>(std::move(session));
  json out = SessionJson(id, entry->session);
  sessions_[id] = std::move(entry);
  active_ = id;
  return {201, std::move(out)};
}

Response Service::Suggestions(Entry& entry, const std::string& id) {
  Session& session = entry.session;
  if (!session.has_group()) {
    return Fail(409, "PreconditionViolation", "session is finalized");
  }
  json out = {{"session_id", id},
              {"state", GroupStateName(session.group().state)}};
  if (session.group().state != GroupState::kDraft) {
    out["suggestions"] = SuggestionSetToJson(
        SuggestionSet{{}, session.snapshot()->generation, 0.0});
    return {200, std::move(out)};
  }
  try {
    out["suggestions"] = SuggestionSetToJson(session.Suggestions());
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kNoCandidates) throw;
    out["suggestions"] = SuggestionSetToJson(
        SuggestionSet{{}, session.snapshot()->generation, 0.0});
    out["reason"] = ErrorCodeName(e.code());
  }
  return {200, std::move(out)};
}

Response Service::AcceptTopic(Entry& entry, const std::string& id,
                              const json& body) {
  if (!body.contains("topic") || !body["topic"].is_string()) {
    return Fail(400, "MalformedDocument", "body needs a string 'topic'");
  }
  Session& session = entry.session;
  if (!session.has_group()) {
    return Fail(409, "PreconditionViolation", "session is finalized");
  }
  std::string topic = NormalizeTopicId(body["topic"].get<std::string>());
  if (!session.snapshot()->Contains(topic)) {
    throw Error(ErrorCode::kUnknownTopic, topic);
  }
  session.Accept(topic);
  return {200, SessionJson(id, session)};
}

Response Service::Finalize(Entry& entry, const std::string& id) {
  Session& session = entry.session;
  if (!session.has_group()) {
    return Fail(409, "PreconditionViolation", "session is finalized");
  }
  PostGroup group = session.Finalize();
  std::lock_guard<std::mutex> lock(mu_);
  std::vector<QueueEntry> entries =
      ScheduleGroup(group, id, clock_->Now(), options_.seed + finalized_++,
                    options_.bounds);
  size_t scheduled = entries.size();
  queue_.Enqueue(std::move(entries));
  timeline_.push_back(group);
  if (active_ == id) active_.clear();
  return {200,
          {{"session_id", id},
           {"state", "queued"},
           {"group", GroupToJson(group)},
           {"scheduled", scheduled}}};
}

Response Service::CloseSession(const std::string& id) {
  std::lock_guard<std::mutex> lock(mu_);
  if (sessions_.erase(id) == 0) {
    return Fail(404, "UnknownSession", "no session '" + id + "'");
  }
  if (active_ == id) active_.clear();
  return {200, {{"session_id", id}, {"state", "closed"}}};
}

Response Service::Adversary() {
  std::vector<PostGroup> timeline;
  {
    std::lock_guard<std::mutex> lock(mu_);
    timeline = timeline_;
  }
  TimelineVerdict verdict = TimelineGuard(timeline, profile_, *snapshot_);
  json out = ReportToJson(verdict.report);
  out["groups"] = timeline.size();
  out["violated"] = verdict.violated;
  return {200, std::move(out)};
}

void Service::Serve(const std::string& host, int port) {
  {
    std::lock_guard<std::mutex> lock(server_mu_);
    server_ = std::make_unique<httplib::Server>();
    auto handle = [this](const httplib::Request& req, httplib::Response& res) {
      Response r = Dispatch(req.method, req.path, req.body);
      res.status = r.status;
      res.set_content(r.body.dump(), "application/json");
    };
    server_->Get(".*", handle);
    server_->Post(".*", handle);
    server_->Delete(".*", handle);
  }
  if (!server_->listen(host, port)) {
    throw Error(ErrorCode::kIoError,
                "cannot listen on " + host + ":" + std::to_string(port));
  }
}

void Service::Stop() {
  std::lock_guard<std::mutex> lock(server_mu_);
  if (server_) server_->stop();
}

}  // namespace aegis
