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

// Local HTTP/JSON facade for the companion UI. Routing lives in Dispatch()
// so it can be exercised without a socket; Serve() only adapts it to
// cpp-httplib.

#ifndef AEGIS_SERVICE_H_
#define AEGIS_SERVICE_H_

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include "aegis/corpus.h"
#include "aegis/error.h"
#include "aegis/queue.h"
#include "aegis/suggest.h"
#include "aegis/taxonomy.h"
#include "json.hpp"

namespace httplib {
class Server;
}

namespace aegis {

struct Response {
  int status = 200;
  nlohmann::json body;
};

// {"error": {"code": ..., "message": ...}}, shared with the CLI.
nlohmann::json ErrorJson(const Error& error);
nlohmann::json ErrorJson(std::string_view code, std::string_view message);

int HttpStatusFor(ErrorCode code);

// Topic ids written inline as #hashtags, in order of appearance.
std::vector<std::string> ExtractHashtags(std::string_view text);

class Service {
 public:
  struct Options {
    SuggestOptions suggest;
    LinkOptions link;
    IntervalBounds bounds;
    uint64_t seed = 0;
  };

  // The service only reads `snapshot`; it never writes the repository.
  Service(UserProfile profile, Snapshot snapshot, Options options,
          std::shared_ptr<const Clock> clock);
  ~Service();

  Response Dispatch(std::string_view method, std::string_view path,
                    std::string_view body);

  // Blocks until Stop(). Binds 127.0.0.1 unless told otherwise.
  void Serve(const std::string& host, int port);
  void Stop();

  const PostQueue& queue() const { return queue_; }
  const UserProfile& profile() const { return profile_; }

 private:
  struct Entry {
    std::mutex mu;
    Session session;
    explicit Entry(Session s) : session(std::move(s)) {}
  };

  Response OpenSession(const nlohmann::json& body);
  Response Suggestions(Entry& entry, const std::string& id);
  Response AcceptTopic(Entry& entry, const std::string& id,
                       const nlohmann::json& body);
  Response Finalize(Entry& entry, const std::string& id);
  Response CloseSession(const std::string& id);
  Response Adversary();
  std::shared_ptr<Entry> Find(const std::string& id);

  UserProfile profile_;
  Snapshot snapshot_;
  Options options_;
  std::shared_ptr<const Clock> clock_;
  std::shared_ptr<const TopicTree> tree_;
  PostQueue queue_;

  std::mutex mu_;
  std::map<std::string, std::shared_ptr<Entry>> sessions_;
  std::string active_;
  uint64_t next_session_ = 1;
  uint64_t finalized_ = 0;
  std::vector<PostGroup> timeline_;

  std::mutex server_mu_;
  std::unique_ptr<httplib::Server> server_;
};

}  // namespace aegis

#endif  // AEGIS_SERVICE_H_
