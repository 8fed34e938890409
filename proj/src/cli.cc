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

#include "aegis/cli.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "aegis/corpus.h"
#include "aegis/error.h"
#include "aegis/inference.h"
#include "aegis/model.h"
#include "aegis/queue.h"
#include "aegis/service.h"
#include "aegis/simgen.h"
#include "aegis/suggest.h"
#include "aegis/taxonomy.h"
#include "json.hpp"

namespace aegis {

using nlohmann::json;

namespace {

struct Globals {
  uint64_t seed = 0;
  std::string repo;
  std::string profile;
  std::string format = "json";
};

std::string ReadText(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot read " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void WriteText(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path);
  out << text;
  if (!out) throw Error(ErrorCode::kIoError, "write failed: " + path);
}

json ParseJsonFile(const std::string& path) {
  json doc = json::parse(ReadText(path), nullptr, false);
  if (doc.is_discarded()) {
    throw Error(ErrorCode::kMalformedDocument, path + " is not valid JSON");
  }
  return doc;
}

void Require(const std::string& value, const char* flag) {
  if (value.empty()) {
    throw CLI::RequiredError(flag);
  }
}

// "#x, y,#z" -> normalized ids.
std::vector<std::string> SplitTopics(const std::string& list) {
  std::vector<std::string> topics;
  std::stringstream in(list);
  std::string item;
  while (std::getline(in, item, ',')) {
    std::string topic = NormalizeTopicId(item);
    if (!topic.empty()) topics.push_back(std::move(topic));
  }
  return topics;
}

Snapshot LoadSnapshot(const Globals& g) {
  Require(g.repo, "--repo");
  return std::make_shared<const RepositoryState>(LoadRepository(g.repo));
}

UserProfile LoadUserProfile(const Globals& g, const AttributeSchema& schema) {
  Require(g.profile, "--profile");
  return LoadProfile(ReadText(g.profile), schema);
}

void Emit(std::ostream& out, const json& doc) { out << doc.dump(2) << "\n"; }

std::string ReportText(const InferenceReport& report) {
  std::ostringstream out;
  for (const SensitiveVerdict& v : report.sensitive) {
    out << v.attribute << " k=" << v.k << " ";
    if (v.delta) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%.4f", *v.delta);
      out << "delta=" << buf << " top=" << v.inferred_value << " ";
    }
    out << VerdictName(v.verdict) << "\n";
  }
  return out.str();
}

// Session loop on stdin: one command per line, one JSON document per reply.
int RunSessionLoop(const Globals& g, const std::string& queue_path,
                   std::istream& in, std::ostream& out) {
  Snapshot snapshot = LoadSnapshot(g);
  UserProfile profile = LoadUserProfile(g, *snapshot->schema);
  auto tree = std::make_shared<const TopicTree>(
      BuildTree(profile, *snapshot, LinkOptions{}));
  Session session(profile, snapshot, tree, SuggestOptions{});
  PostQueue queue;
  SimulatedClock clock(0);
  uint64_t groups = 0;

  std::string line;
  while (std::getline(in, line)) {
    std::istringstream words(line);
    std::string command;
    if (!(words >> command)) continue;
    if (command == "quit" || command == "exit") break;
    try {
      if (command == "open") {
        std::string rest;
        std::getline(words, rest);
        std::vector<std::string> topics = ExtractHashtags(rest);
        session.Open(topics, rest.empty() ? rest : rest.substr(1));
        out << json{{"group", GroupToJson(session.group())},
                    {"evaluation", EvaluationToJson(session.evaluation())}}
                   .dump()
            << "\n";
      } else if (command == "suggest") {
        out << SuggestionSetToJson(session.Suggestions()).dump() << "\n";
      } else if (command == "accept") {
        std::string topic;
        words >> topic;
        session.Accept(topic);
        out << json{{"group", GroupToJson(session.group())},
                    {"evaluation", EvaluationToJson(session.evaluation())}}
                   .dump()
            << "\n";
      } else if (command == "status") {
        out << json{{"group", GroupToJson(session.group())},
                    {"evaluation", EvaluationToJson(session.evaluation())}}
                   .dump()
            << "\n";
      } else if (command == "finalize") {
        PostGroup group = session.Finalize();
        std::string id = "g" + std::to_string(++groups);
        std::vector<QueueEntry> entries =
            ScheduleGroup(group, id, clock.Now(), g.seed + groups - 1);
        size_t n = entries.size();
        queue.Enqueue(std::move(entries));
        out << json{{"state", "queued"}, {"group_id", id}, {"scheduled", n}}
                   .dump()
            << "\n";
      } else if (command == "adversary") {
        TimelineVerdict v =
            TimelineGuard(session.timeline(), session.profile(), *snapshot);
        json report = ReportToJson(v.report);
        report["violated"] = v.violated;
        out << report.dump() << "\n";
      } else if (command == "queue") {
        out << queue.MaskedJson().dump() << "\n";
      } else {
        out << ErrorJson("UnknownCommand", command).dump() << "\n";
      }
    } catch (const Error& e) {
      out << ErrorJson(e).dump() << "\n";
    }
  }
  if (!queue_path.empty()) WriteText(queue_path, queue.ToJson().dump(2) + "\n");
  return kExitOk;
}

std::map<std::string, std::string> ParsePersona(const std::string& text) {
  std::map<std::string, std::string> persona;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    size_t eq = item.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::kInvalidArgument,
                  "persona entries look like attr=value, got '" + item + "'");
    }
    persona[NormalizeValueId(item.substr(0, eq))] =
        NormalizeValueId(item.substr(eq + 1));
  }
  return persona;
}

std::vector<int> ParseKs(const std::string& text) {
  std::vector<int> ks;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      ks.push_back(std::stoi(item));
    } catch (const std::exception&) {
      throw Error(ErrorCode::kInvalidArgument, "bad k '" + item + "'");
    }
  }
  if (ks.empty()) throw Error(ErrorCode::kInvalidArgument, "no ks given");
  return ks;
}

}  // namespace

int RunCli(int argc, const char* const* argv, std::istream& in,
           std::ostream& out, std::ostream& err) {
  CLI::App app{"Aegis: topic obfuscation against attribute inference"};
  app.require_subcommand(1);
  // Global flags may follow the subcommand.
  app.fallthrough();
  app.set_config("--config", "", "Read flags from a TOML/INI file");

  Globals g;
  std::string seed_text;
  app.add_option("--seed", seed_text, "Random seed (falls back to AEGIS_SEED)");
  app.add_option("--repo", g.repo, "Repository file");
  app.add_option("--profile", g.profile, "User profile JSON");
  app.add_option("--format", g.format, "Output format")
      ->check(CLI::IsMember({"json", "csv", "text"}));

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Ingest a labeled corpus");
  std::string ingest_corpus, ingest_schema;
  size_t ingest_batch = 4096;
  bool ingest_append = false;
  ingest->add_option("--corpus", ingest_corpus, "JSONL corpus")->required();
  ingest->add_option("--schema", ingest_schema, "Schema JSON (else inferred)");
  ingest->add_option("--batch", ingest_batch, "Posts per commit");
  ingest->add_flag("--append", ingest_append, "Add to an existing repository");

  // classify
  auto* classify = app.add_subcommand("classify", "Build the topic tree");
  bool classify_pruned = false;
  classify->add_flag("--pruned", classify_pruned,
                     "Only the user's path and cover siblings");

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "Run the adversary");
  std::string evaluate_topics;
  evaluate->add_option("--topics", evaluate_topics, "Comma-separated topics")
      ->required();

  // suggest
  auto* suggest = app.add_subcommand("suggest", "Rank obfuscation topics");
  std::string suggest_topics, suggest_accepted;
  size_t suggest_max = 10;
  suggest->add_option("--topics", suggest_topics, "Draft post topics")
      ->required();
  suggest->add_option("--accepted", suggest_accepted,
                      "Topics already accepted for this draft");
  suggest->add_option("--max", suggest_max, "Maximum candidates");

  // session
  auto* session = app.add_subcommand("session", "Interactive loop on stdin");
  std::string session_queue;
  session->add_option("--queue", session_queue, "Write the queue here on exit");

  // queue-drain
  auto* drain = app.add_subcommand("queue-drain", "Publish due queue entries");
  std::string drain_queue, drain_out;
  int64_t drain_now = 0;
  drain->add_option("--queue", drain_queue, "Queue JSON file")->required();
  drain->add_option("--now", drain_now, "Current time in seconds")->required();
  drain->add_option("--out", drain_out, "Append published entries (JSONL)");

  // generate
  auto* generate = app.add_subcommand("generate", "Write a synthetic corpus");
  std::string generate_spec, generate_out, generate_schema_out,
      generate_topics_out;
  generate->add_option("--spec", generate_spec, "Generator spec JSON");
  generate->add_option("--out", generate_out, "Corpus JSONL")->required();
  generate->add_option("--schema-out", generate_schema_out, "Schema JSON");
  generate->add_option("--topics-out", generate_topics_out,
                       "Per-topic calibration JSON");

  // experiment
  auto* experiment =
      app.add_subcommand("experiment", "Measure obfuscation cost");
  std::string exp_corpus, exp_schema, exp_attr, exp_category = "strong",
                                                exp_persona, exp_ks, exp_out,
                                                exp_summary;
  int exp_k = 3;
  int exp_connection_k = 3;
  int exp_budget = kDefaultSuggestionBudget;
  double exp_delta = kDefaultDelta;
  bool exp_baseline = false;
  unsigned exp_threads = 0;
  experiment->add_option("--corpus", exp_corpus, "JSONL corpus (else --repo)");
  experiment->add_option("--schema", exp_schema, "Schema JSON (else inferred)");
  experiment->add_option("--attr", exp_attr, "Sensitive attribute")->required();
  experiment->add_option("--k", exp_k, "Indistinguishability level");
  experiment->add_option("--ks", exp_ks, "Comma-separated k sweep");
  experiment->add_option("--delta", exp_delta, "Privacy threshold");
  experiment->add_option("--category", exp_category, "Strength category");
  experiment->add_option("--persona", exp_persona,
                         "attr=value,... (else the dominant persona)");
  experiment->add_option("--connection-k", exp_connection_k,
                         "k for topic strength categories");
  experiment->add_option("--budget", exp_budget, "Suggestions per topic");
  experiment->add_flag("--baseline", exp_baseline,
                       "Independent per-attribute classifier");
  experiment->add_option("--threads", exp_threads, "Worker threads");
  experiment->add_option("--out", exp_out, "CSV file");
  experiment->add_option("--summary", exp_summary, "Summary JSON file");

  // serve
  auto* serve = app.add_subcommand("serve", "Local HTTP API");
  std::string serve_host = "127.0.0.1";
  int serve_port = 8080;
  serve->add_option("--host", serve_host, "Bind address");
  serve->add_option("--port", serve_port, "Port");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "aegis: " << e.what() << "\n" << "Run with --help for usage.\n";
    return kExitUsage;
  }

  try {
    if (seed_text.empty()) {
      if (const char* env = std::getenv("AEGIS_SEED")) seed_text = env;
    }
    if (!seed_text.empty()) {
      try {
        size_t used = 0;
        g.seed = std::stoull(seed_text, &used);
        if (used != seed_text.size()) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        err << "aegis: --seed must be a non-negative integer\n";
        return kExitUsage;
      }
    }

    if (*ingest) {
      Require(g.repo, "--repo");
      std::unique_ptr<TopicRepository> repo;
      if (ingest_append && std::filesystem::exists(g.repo)) {
        repo = std::make_unique<TopicRepository>(LoadRepository(g.repo));
      } else {
        AttributeSchema schema = ingest_schema.empty()
                                     ? InferSchema(ingest_corpus)
                                     : LoadSchema(ReadText(ingest_schema));
        repo = std::make_unique<TopicRepository>(
            std::make_shared<const AttributeSchema>(std::move(schema)));
      }
      JsonlPostSource source(
          ingest_corpus, std::make_shared<const AttributeSchema>(repo->schema()));
      size_t posts = IngestAll(source, *repo, std::max<size_t>(1, ingest_batch));
      Snapshot snap = repo->snapshot();
      SaveRepository(*snap, g.repo);
      Emit(out, {{"posts", posts},
                 {"topics", snap->topics.size()},
                 {"generation", snap->generation}});
    } else if (*classify) {
      Snapshot snap = LoadSnapshot(g);
      UserProfile profile = LoadUserProfile(g, *snap->schema);
      TopicTree tree = BuildTree(profile, *snap, LinkOptions{});
      if (g.format == "text") {
        out << tree.ToText();
      } else if (classify_pruned) {
        profile = ChooseCoverSets(std::move(profile), tree, *snap->schema);
        Emit(out, tree.PrunedJson(profile));
      } else {
        Emit(out, tree.ToJson());
      }
    } else if (*evaluate) {
      Snapshot snap = LoadSnapshot(g);
      UserProfile profile = LoadUserProfile(g, *snap->schema);
      std::vector<std::string> topics = SplitTopics(evaluate_topics);
      InferenceReport report = EvaluateTopics(profile, topics, *snap);
      if (g.format == "text") {
        out << ReportText(report);
      } else {
        Emit(out, ReportToJson(report));
      }
    } else if (*suggest) {
      Snapshot snap = LoadSnapshot(g);
      UserProfile profile = LoadUserProfile(g, *snap->schema);
      TopicTree tree = BuildTree(profile, *snap, LinkOptions{});
      profile = ChooseCoverSets(std::move(profile), tree, *snap->schema);
      std::vector<std::string> topics = SplitTopics(suggest_topics);
      OpenedGroup opened = OpenGroup(topics, "", {}, profile, *snap);
      for (const std::string& t : SplitTopics(suggest_accepted)) {
        snap->topic(t);
        opened.group.accepted.push_back(t);
      }
      opened.evaluation = EvaluateGroup(opened.group, {}, profile, *snap);
      SuggestOptions options;
      options.max_candidates = suggest_max;
      json doc = {{"evaluation", EvaluationToJson(opened.evaluation)}};
      if (opened.evaluation.Satisfied()) {
        doc["suggestions"] =
            SuggestionSetToJson(SuggestionSet{{}, snap->generation, 0.0});
      } else {
        opened.group.state = GroupState::kDraft;
        doc["suggestions"] = SuggestionSetToJson(
            Suggest(opened.group, {}, profile, tree, *snap, options));
      }
      Emit(out, doc);
    } else if (*session) {
      return RunSessionLoop(g, session_queue, in, out);
    } else if (*drain) {
      PostQueue queue;
      queue.Restore(ParseJsonFile(drain_queue));
      std::vector<QueueEntry> due = queue.Drain(drain_now);
      if (!drain_out.empty()) {
        FilePublisher publisher(drain_out);
        for (const QueueEntry& e : due) publisher.Publish(e);
      }
      WriteText(drain_queue, queue.ToJson().dump(2) + "\n");
      json published = json::array();
      for (const QueueEntry& e : due) published.push_back(EntryToJson(e));
      Emit(out, {{"published", std::move(published)},
                 {"remaining", queue.size()}});
    } else if (*generate) {
      GeneratorSpec spec = generate_spec.empty()
                               ? DefaultGeneratorSpec()
                               : GeneratorSpecFromJson(ParseJsonFile(generate_spec));
      if (!seed_text.empty()) spec.seed = g.seed;
      GeneratedCorpus corpus = Generate(spec);
      WriteCorpus(generate_out, corpus.posts);
      if (!generate_schema_out.empty()) {
        WriteText(generate_schema_out, SchemaToJson(spec.schema).dump(2) + "\n");
      }
      if (!generate_topics_out.empty()) {
        json topics = json::array();
        for (const GeneratedTopic& t : corpus.topics) {
          topics.push_back(
              {{"topic", t.topic},
               {"category", t.category ? json(CategoryName(*t.category))
                                       : json(nullptr)},
               {"target", t.target},
               {"target_delta", t.target_delta},
               {"realized_delta", t.realized_delta},
               {"posts", t.posts}});
        }
        WriteText(generate_topics_out, topics.dump(2) + "\n");
      }
      Emit(out, {{"posts", corpus.posts.size()},
                 {"topics", corpus.topics.size()},
                 {"seed", spec.seed}});
    } else if (*experiment) {
      Snapshot snap;
      if (!exp_corpus.empty()) {
        AttributeSchema schema = exp_schema.empty()
                                     ? InferSchema(exp_corpus)
                                     : LoadSchema(ReadText(exp_schema));
        auto shared = std::make_shared<const AttributeSchema>(std::move(schema));
        TopicRepository repo(shared);
        JsonlPostSource source(exp_corpus, shared);
        IngestAll(source, repo);
        snap = repo.snapshot();
      } else {
        snap = LoadSnapshot(g);
      }
      const AttributeSchema& schema = *snap->schema;
      std::string attr = NormalizeValueId(exp_attr);
      schema.attribute(attr);

      ExperimentConfig config;
      config.profile.true_values = exp_persona.empty()
                                       ? DominantPersona(*snap)
                                       : ParsePersona(exp_persona);
      for (const Attribute& a : schema.attributes()) {
        if (a.id != attr) config.profile.public_attrs.push_back(a.id);
      }
      config.profile.sensitive.push_back({attr, exp_k, exp_delta, {}});
      config.profile.suggestion_budget = exp_budget;
      config.category = ParseCategory(exp_category);
      config.connection_k = exp_connection_k;
      config.baseline = exp_baseline;
      config.threads = exp_threads;

      std::vector<int> ks = exp_ks.empty() ? std::vector<int>{exp_k}
                                           : ParseKs(exp_ks);
      KSweep sweep = RunKSweep(*snap, config, ks);
      std::string csv = ExperimentCsv(sweep.results);
      json summary = KSweepJson(sweep);
      if (!exp_out.empty()) WriteText(exp_out, csv);
      if (!exp_summary.empty()) WriteText(exp_summary, summary.dump(2) + "\n");
      if (g.format == "json") {
        Emit(out, summary);
      } else {
        out << csv;
      }
    } else if (*serve) {
      Snapshot snap = LoadSnapshot(g);
      UserProfile profile = LoadUserProfile(g, *snap->schema);
      Service::Options options;
      options.seed = g.seed;
      Service service(std::move(profile), snap, options,
                      std::make_shared<SystemClock>());
      err << "aegis: serving on http://" << serve_host << ":" << serve_port
          << "\n";
      service.Serve(serve_host, serve_port);
    }
  } catch (const CLI::ParseError& e) {
    err << "aegis: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    Emit(out, ErrorJson(e));
    return kExitDomainError;
  } catch (const std::exception& e) {
    Emit(out, ErrorJson("InternalError", e.what()));
    return kExitDomainError;
  }
  return kExitOk;
}

}  // namespace aegis
