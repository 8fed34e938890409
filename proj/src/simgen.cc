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

#include "aegis/simgen.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include "aegis/error.h"
#include "aegis/taxonomy.h"

namespace aegis {

using nlohmann::json;

namespace {

constexpr size_t kMaxPersonas = size_t{1} << 20;

const StrengthCategory kCategories[] = {
    StrengthCategory::kNegligible, StrengthCategory::kWeak,
    StrengthCategory::kMild, StrengthCategory::kStrong};

Attribute MakeAttribute(std::string id, std::vector<std::string> domain) {
  Attribute attribute;
  attribute.id = std::move(id);
  attribute.domain = std::move(domain);
  return attribute;
}

// Persona tuples in schema order, enumerated lexicographically by domain
// position.
std::vector<Persona> EnumeratePersonas(const AttributeSchema& schema) {
  size_t total = 1;
  for (const Attribute& a : schema.attributes()) {
    total *= a.domain.size();
    if (total > kMaxPersonas) {
      throw Error(ErrorCode::kInvalidArgument, "persona space too large");
    }
  }
  std::vector<Persona> personas;
  personas.reserve(total);
  std::vector<size_t> index(schema.size(), 0);
  for (size_t n = 0; n < total; ++n) {
    Persona p;
    for (size_t i = 0; i < schema.size(); ++i) {
      p.push_back(schema.attributes()[i].domain[index[i]]);
    }
    personas.push_back(std::move(p));
    for (size_t i = schema.size(); i-- > 0;) {
      if (++index[i] < schema.attributes()[i].domain.size()) break;
      index[i] = 0;
    }
  }
  return personas;
}

// Everything Generate needs about the persona space, computed once.
struct PersonaSpace {
  std::vector<Persona> personas;
  std::vector<double> background;
  // background restricted to the non-public attributes.
  std::vector<double> private_background;
  std::vector<bool> is_public;
  // Domain sizes in schema order; personas are enumerated with the last
  // attribute varying fastest.
  std::vector<size_t> radix;
};

PersonaSpace BuildSpace(const GeneratorSpec& spec) {
  const AttributeSchema& schema = spec.schema;
  PersonaSpace space;
  space.personas = EnumeratePersonas(schema);
  for (const Attribute& a : schema.attributes()) {
    space.radix.push_back(a.domain.size());
  }
  space.is_public.assign(schema.size(), false);
  for (const std::string& attr : spec.public_attrs) {
    auto index = schema.IndexOf(attr);
    if (!index) throw Error(ErrorCode::kUnknownAttribute, attr);
    space.is_public[*index] = true;
  }
  // Normalized marginals; attributes without weights are uniform.
  std::vector<std::map<std::string, double>> marginals;
  for (const Attribute& a : schema.attributes()) {
    std::map<std::string, double> m;
    auto it = spec.background.find(a.id);
    double total = 0.0;
    for (const std::string& v : a.domain) {
      double weight = 1.0;
      if (it != spec.background.end()) {
        auto w = it->second.find(v);
        weight = w == it->second.end() ? 0.0 : w->second;
      }
      if (weight < 0) {
        throw Error(ErrorCode::kInvalidArgument, "negative background weight");
      }
      m[v] = weight;
      total += weight;
    }
    if (total <= 0) {
      throw Error(ErrorCode::kInvalidArgument,
                  "background for '" + a.id + "' has no mass");
    }
    for (auto& [v, weight] : m) weight /= total;
    marginals.push_back(std::move(m));
  }
  for (const Persona& p : space.personas) {
    double all = 1.0;
    double priv = 1.0;
    for (size_t i = 0; i < p.size(); ++i) {
      double m = marginals[i].at(p[i]);
      all *= m;
      if (!space.is_public[i]) priv *= m;
    }
    space.background.push_back(all);
    space.private_background.push_back(priv);
  }
  return space;
}

std::vector<double> MixtureShares(const PersonaSpace& space,
                                  const Persona& target, double w,
                                  double public_mass) {
  double rho = std::max(0.0, public_mass - w);
  double rest = 1.0 - w - rho;
  std::vector<double> shares(space.personas.size());
  for (size_t n = 0; n < space.personas.size(); ++n) {
    const Persona& p = space.personas[n];
    bool same = true;
    bool same_public = true;
    for (size_t i = 0; i < p.size(); ++i) {
      if (p[i] != target[i]) {
        same = false;
        if (space.is_public[i]) same_public = false;
      }
    }
    shares[n] = (same ? w : 0.0) +
                (same_public ? rho * space.private_background[n] : 0.0) +
                rest * space.background[n];
  }
  return shares;
}

double GapOf(std::vector<double> shares, int k) {
  std::sort(shares.begin(), shares.end(), std::greater<>());
  size_t kth = std::min(shares.size(), static_cast<size_t>(k)) - 1;
  return shares[0] - shares[kth];
}

// Largest-remainder apportionment of `total` posts; ties go to the earlier
// persona.
std::vector<uint64_t> Apportion(const std::vector<double>& shares,
                                uint64_t total) {
  std::vector<uint64_t> counts(shares.size());
  std::vector<std::pair<double, size_t>> remainders;
  uint64_t assigned = 0;
  for (size_t n = 0; n < shares.size(); ++n) {
    double exact = shares[n] * static_cast<double>(total);
    counts[n] = static_cast<uint64_t>(std::floor(exact));
    assigned += counts[n];
    remainders.emplace_back(exact - std::floor(exact), n);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (size_t i = 0; assigned < total && i < remainders.size(); ++i) {
    ++counts[remainders[i].second];
    ++assigned;
  }
  return counts;
}

// Apportions attribute by attribute, so every prefix marginal is off by less
// than one post per block instead of accumulating per-persona rounding.
void ApportionBlock(const std::vector<double>& shares,
                    const std::vector<size_t>& radix, size_t level,
                    size_t begin, size_t end, uint64_t total,
                    std::vector<uint64_t>& counts) {
  if (level == radix.size()) {
    counts[begin] = total;
    return;
  }
  size_t width = (end - begin) / radix[level];
  std::vector<double> block(radix[level], 0.0);
  double mass = 0.0;
  for (size_t b = 0; b < radix[level]; ++b) {
    for (size_t n = begin + b * width; n < begin + (b + 1) * width; ++n) {
      block[b] += shares[n];
    }
    mass += block[b];
  }
  if (mass <= 0) return;
  for (double& b : block) b /= mass;
  std::vector<uint64_t> split = Apportion(block, total);
  for (size_t b = 0; b < radix[level]; ++b) {
    if (split[b] == 0) continue;
    ApportionBlock(shares, radix, level + 1, begin + b * width,
                   begin + (b + 1) * width, split[b], counts);
  }
}

std::vector<uint64_t> ApportionNested(const PersonaSpace& space,
                                      const std::vector<double>& shares,
                                      uint64_t total) {
  std::vector<uint64_t> counts(shares.size(), 0);
  ApportionBlock(shares, space.radix, 0, 0, shares.size(), total, counts);
  return counts;
}

Persona PersonaOf(const AttributeSchema& schema,
                  const std::map<std::string, std::string>& values) {
  Persona p;
  for (const Attribute& a : schema.attributes()) {
    auto it = values.find(a.id);
    if (it == values.end()) {
      throw Error(ErrorCode::kInvalidArgument,
                  "persona misses attribute '" + a.id + "'");
    }
    std::string v = NormalizeValueId(it->second);
    if (!a.Contains(v)) throw Error(ErrorCode::kUnknownValue, a.id + "." + v);
    p.push_back(std::move(v));
  }
  return p;
}

std::map<std::string, std::string> PersonaMap(const AttributeSchema& schema,
                                              const Persona& p) {
  std::map<std::string, std::string> out;
  for (size_t i = 0; i < p.size(); ++i) out[schema.attributes()[i].id] = p[i];
  return out;
}

size_t IndexOfPersona(const PersonaSpace& space, const Persona& persona) {
  auto it = std::find(space.personas.begin(), space.personas.end(), persona);
  return static_cast<size_t>(it - space.personas.begin());
}

struct TopicPlan {
  std::string topic;
  std::optional<StrengthCategory> category;
  Persona target;
  size_t target_index;
  double target_delta;
  uint64_t posts;
};

GeneratedTopic Realize(const GeneratorSpec& spec, const PersonaSpace& space,
                       const std::shared_ptr<const AttributeSchema>& schema,
                       const TopicPlan& plan,
                       std::vector<LabeledPost>& posts) {
  auto gap_at = [&](double w) {
    return GapOf(MixtureShares(space, plan.target, w, spec.public_mass),
                 spec.connection_k);
  };
  // Only the branch where the target persona leads counts; below it the
  // strength measures some other persona.
  auto target_leads = [&](double w) {
    std::vector<double> shares =
        MixtureShares(space, plan.target, w, spec.public_mass);
    double own = shares[plan.target_index];
    for (size_t n = 0; n < shares.size(); ++n) {
      if (n != plan.target_index && shares[n] >= own) return false;
    }
    return true;
  };
  double lo = 0.0;
  double hi = 1.0;
  if (!target_leads(lo)) {
    for (int i = 0; i < 60; ++i) {
      double mid = 0.5 * (lo + hi);
      (target_leads(mid) ? hi : lo) = mid;
    }
    lo = hi;
    hi = 1.0;
  }
  // Supply topics only need to lead for their persona, so a drawn strength
  // below what the background already implies is raised to that floor.
  double target_delta = plan.target_delta;
  if (!plan.category) target_delta = std::max(target_delta, gap_at(lo));
  if (gap_at(lo) > target_delta) {
    hi = lo;
  } else {
    for (int i = 0; i < 60; ++i) {
      double mid = 0.5 * (lo + hi);
      (gap_at(mid) < target_delta ? lo : hi) = mid;
    }
  }
  double w = hi;
  std::vector<uint64_t> counts = ApportionNested(
      space, MixtureShares(space, plan.target, w, spec.public_mass),
      plan.posts);

  // Measure what was actually produced with the library's own estimator.
  TopicStats stats;
  stats.topic = plan.topic;
  for (size_t n = 0; n < counts.size(); ++n) {
    if (counts[n] > 0) stats.joint[space.personas[n]] = counts[n];
  }
  stats.post_count = plan.posts;
  RepositoryState probe;
  probe.schema = schema;
  probe.topics.emplace(plan.topic, stats);
  double realized;
  try {
    realized =
        ComputeConnectionStrength(plan.topic, spec.connection_k, probe).delta;
  } catch (const Error& e) {
    throw Error(ErrorCode::kInfeasibleSpec, plan.topic + ": " + e.message());
  }
  if (std::abs(realized - target_delta) > spec.tolerance) {
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "%s: target strength %.4f, reachable %.4f with %llu posts",
                  plan.topic.c_str(), target_delta, realized,
                  static_cast<unsigned long long>(plan.posts));
    throw Error(ErrorCode::kInfeasibleSpec, buf);
  }

  uint64_t serial = 0;
  for (size_t n = 0; n < counts.size(); ++n) {
    for (uint64_t c = 0; c < counts[n]; ++c) {
      LabeledPost post;
      post.post_id = plan.topic + "-" + std::to_string(serial++);
      post.topics = {plan.topic};
      post.labels = PersonaMap(*schema, space.personas[n]);
      posts.push_back(std::move(post));
    }
  }
  GeneratedTopic generated;
  generated.topic = plan.topic;
  generated.category = plan.category;
  generated.target = PersonaMap(*schema, plan.target);
  generated.target_delta = target_delta;
  generated.realized_delta = realized;
  generated.weight = w;
  generated.posts = plan.posts;
  return generated;
}

std::string Numbered(std::string_view stem, size_t n) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04zu", n);
  return std::string(stem) + buf;
}

// Like ParseFraction but admits zero and, for weights, values above one.
double ParseNonNegative(const json& value, bool allow_above_one) {
  if (value.is_number()) {
    double v = value.get<double>();
    if (v < 0 || (!allow_above_one && v > 1)) {
      throw Error(ErrorCode::kMalformedDocument,
                  "value " + value.dump() + " out of range");
    }
    return v;
  }
  if (value.is_string() && value.get<std::string>() == "0") return 0.0;
  return ParseFraction(value);
}

std::pair<double, double> RangeFromJson(const json& doc, const char* what) {
  if (!doc.is_array() || doc.size() != 2) {
    throw Error(ErrorCode::kMalformedDocument,
                std::string(what) + " must be a [min, max] pair");
  }
  double lo = ParseNonNegative(doc[0], false);
  double hi = ParseNonNegative(doc[1], false);
  if (lo > hi) {
    throw Error(ErrorCode::kMalformedDocument,
                std::string(what) + " range is reversed");
  }
  return {lo, hi};
}

std::pair<uint64_t, uint64_t> CountRangeFromJson(const json& doc,
                                                 const char* what) {
  if (!doc.is_array() || doc.size() != 2 || !doc[0].is_number_unsigned() ||
      !doc[1].is_number_unsigned() || doc[0] > doc[1]) {
    throw Error(ErrorCode::kMalformedDocument,
                std::string(what) + " must be an ascending [min, max] pair");
  }
  return {doc[0].get<uint64_t>(), doc[1].get<uint64_t>()};
}

}  // namespace

GeneratorSpec DefaultGeneratorSpec() {
  GeneratorSpec spec;
  spec.schema = AttributeSchema::Create(
      {MakeAttribute("gender", {"female", "male"}),
       MakeAttribute("ethnicity",
                     {"asian", "black", "hispanic", "nativeamerican", "white"}),
       MakeAttribute("location", {"ca", "fl", "ga", "il", "mi", "nc", "ny",
                                  "oh", "pa", "tx"})});
  spec.background = {
      {"gender", {{"male", 0.66}, {"female", 0.34}}},
      {"ethnicity",
       {{"white", 0.60},
        {"black", 0.13},
        {"asian", 0.07},
        {"hispanic", 0.17},
        {"nativeamerican", 0.03}}},
      {"location",
       {{"ca", 0.15},
        {"tx", 0.12},
        {"fl", 0.10},
        {"ny", 0.10},
        {"pa", 0.09},
        {"il", 0.09},
        {"oh", 0.09},
        {"ga", 0.09},
        {"nc", 0.09},
        {"mi", 0.08}}}};
  spec.targets = {
      {{"gender", "male"}, {"ethnicity", "white"}, {"location", "ca"}}};
  spec.public_attrs = {"gender", "ethnicity"};
  spec.categories = {
      {StrengthCategory::kNegligible, {50, 0.05, 0.09}},
      {StrengthCategory::kWeak, {50, 0.12, 0.18}},
      {StrengthCategory::kMild, {50, 0.22, 0.28}},
      {StrengthCategory::kStrong, {50, 0.35, 0.65}},
  };
  return spec;
}

GeneratorSpec GeneratorSpecFromJson(const json& doc) {
  if (!doc.is_object()) {
    throw Error(ErrorCode::kMalformedDocument, "generator spec must be an object");
  }
  GeneratorSpec spec = DefaultGeneratorSpec();
  try {
    if (doc.contains("schema")) {
      spec.schema = SchemaFromJson(doc["schema"]);
      spec.background.clear();
      spec.targets.clear();
      spec.public_attrs.clear();
    }
    if (doc.contains("background")) {
      spec.background.clear();
      for (const auto& [attr, weights] : doc["background"].items()) {
        for (const auto& [value, weight] : weights.items()) {
          spec.background[NormalizeValueId(attr)][NormalizeValueId(value)] =
              ParseNonNegative(weight, true);
        }
      }
    }
    if (doc.contains("targets")) {
      spec.targets.clear();
      for (const json& t : doc["targets"]) {
        std::map<std::string, std::string> target;
        for (const auto& [attr, value] : t.items()) {
          target[NormalizeValueId(attr)] =
              NormalizeValueId(value.get<std::string>());
        }
        spec.targets.push_back(std::move(target));
      }
    }
    if (doc.contains("public")) {
      spec.public_attrs.clear();
      for (const json& a : doc["public"]) {
        spec.public_attrs.push_back(NormalizeValueId(a.get<std::string>()));
      }
    }
    if (doc.contains("public_mass")) {
      spec.public_mass = ParseNonNegative(doc["public_mass"], false);
    }
    if (doc.contains("connection_k")) {
      spec.connection_k = doc["connection_k"].get<int>();
    }
    if (doc.contains("categories")) {
      spec.categories.clear();
      for (const auto& [name, plan] : doc["categories"].items()) {
        CategoryPlan p;
        p.count = plan.at("count").get<size_t>();
        std::tie(p.delta_min, p.delta_max) =
            RangeFromJson(plan.at("delta"), "category delta");
        spec.categories[ParseCategory(name)] = p;
      }
    }
    if (doc.contains("posts_per_topic")) {
      std::tie(spec.posts_min, spec.posts_max) =
          CountRangeFromJson(doc["posts_per_topic"], "posts_per_topic");
    }
    if (doc.contains("supply")) {
      const json& s = doc["supply"];
      if (s.contains("per_pair")) {
        spec.supply_per_pair = s["per_pair"].get<size_t>();
      }
      if (s.contains("delta")) {
        std::tie(spec.supply_delta_min, spec.supply_delta_max) =
            RangeFromJson(s["delta"], "supply delta");
      }
      if (s.contains("posts")) {
        std::tie(spec.supply_posts_min, spec.supply_posts_max) =
            CountRangeFromJson(s["posts"], "supply posts");
      }
    }
    if (doc.contains("tolerance")) spec.tolerance = doc["tolerance"].get<double>();
    if (doc.contains("seed")) spec.seed = doc["seed"].get<uint64_t>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kMalformedDocument, e.what());
  }
  if (spec.connection_k < 1) {
    throw Error(ErrorCode::kMalformedDocument, "connection_k must be positive");
  }
  if (spec.public_mass < 0 || spec.public_mass > 1) {
    throw Error(ErrorCode::kMalformedDocument, "public_mass must be in [0, 1]");
  }
  return spec;
}

json GeneratorSpecToJson(const GeneratorSpec& spec) {
  json categories = json::object();
  for (const auto& [category, plan] : spec.categories) {
    categories[std::string(CategoryName(category))] = {
        {"count", plan.count}, {"delta", {plan.delta_min, plan.delta_max}}};
  }
  return {{"schema", SchemaToJson(spec.schema)},
          {"background", spec.background},
          {"targets", spec.targets},
          {"public", spec.public_attrs},
          {"public_mass", spec.public_mass},
          {"connection_k", spec.connection_k},
          {"categories", std::move(categories)},
          {"posts_per_topic", {spec.posts_min, spec.posts_max}},
          {"supply",
           {{"per_pair", spec.supply_per_pair},
            {"delta", {spec.supply_delta_min, spec.supply_delta_max}},
            {"posts", {spec.supply_posts_min, spec.supply_posts_max}}}},
          {"tolerance", spec.tolerance},
          {"seed", spec.seed}};
}

GeneratedCorpus Generate(const GeneratorSpec& spec) {
  GeneratedCorpus corpus;
  // Supply exists to serve the category topics; without them there is
  // nothing to generate.
  size_t planned = 0;
  for (const auto& [category, plan] : spec.categories) planned += plan.count;
  if (planned == 0) return corpus;

  auto schema = std::make_shared<const AttributeSchema>(spec.schema);
  PersonaSpace space = BuildSpace(spec);
  std::vector<Persona> targets;
  for (const auto& t : spec.targets) targets.push_back(PersonaOf(*schema, t));

  std::mt19937_64 rng(spec.seed);
  std::vector<TopicPlan> plans;
  for (StrengthCategory category : kCategories) {
    auto it = spec.categories.find(category);
    if (it == spec.categories.end() || it->second.count == 0) continue;
    if (targets.empty()) {
      throw Error(ErrorCode::kInfeasibleSpec, "category topics need a target");
    }
    const CategoryPlan& plan = it->second;
    std::uniform_real_distribution<double> delta(plan.delta_min,
                                                 plan.delta_max);
    std::uniform_int_distribution<uint64_t> posts(spec.posts_min,
                                                  spec.posts_max);
    for (size_t i = 0; i < plan.count; ++i) {
      double d = delta(rng);
      uint64_t n = posts(rng);
      const Persona& target = targets[i % targets.size()];
      plans.push_back({Numbered(CategoryName(category), i + 1), category,
                       target, IndexOfPersona(space, target), d, n});
    }
  }
  if (spec.supply_per_pair > 0) {
    std::uniform_real_distribution<double> delta(spec.supply_delta_min,
                                                 spec.supply_delta_max);
    std::uniform_int_distribution<uint64_t> posts(spec.supply_posts_min,
                                                  spec.supply_posts_max);
    size_t serial = 0;
    for (size_t index = 0; index < space.personas.size(); ++index) {
      const Persona& persona = space.personas[index];
      if (std::find(targets.begin(), targets.end(), persona) != targets.end()) {
        continue;
      }
      for (size_t b = 0; b < spec.supply_per_pair; ++b) {
        double d = delta(rng);
        uint64_t n = posts(rng);
        plans.push_back({Numbered("supply", ++serial), std::nullopt, persona,
                         index, d, n});
      }
    }
  }

  for (const TopicPlan& plan : plans) {
    corpus.topics.push_back(Realize(spec, space, schema, plan, corpus.posts));
  }
  // Interleave the stream the way a crawl would see it.
  std::shuffle(corpus.posts.begin(), corpus.posts.end(), rng);
  for (size_t i = 0; i < corpus.posts.size(); ++i) {
    corpus.posts[i].timestamp = static_cast<int64_t>(i);
  }
  return corpus;
}

namespace {

Persona ProfilePersona(const UserProfile& profile,
                       const AttributeSchema& schema) {
  Persona p;
  for (const Attribute& a : schema.attributes()) {
    p.push_back(profile.true_values.at(a.id));
  }
  return p;
}

const Persona* TopPersona(const TopicStats& stats) {
  const Persona* best = nullptr;
  uint64_t best_count = 0;
  // std::map order makes the first maximum the lexicographically smallest.
  for (const auto& [persona, count] : stats.joint) {
    if (count > best_count) {
      best = &persona;
      best_count = count;
    }
  }
  return best;
}

struct PublicView {
  std::map<std::string, std::string> argmax;
  std::map<std::string, double> margin;
};

PublicView ViewOf(const UserProfile& profile, const InferenceReport& report) {
  PublicView view;
  for (const std::string& attr : profile.public_attrs) {
    const auto& dist = report.estimate.at(attr);
    if (!dist) continue;
    view.argmax[attr] = dist->Argmax();
    view.margin[attr] = dist->TopKGap(2);
  }
  return view;
}

ExperimentRow RunRow(const std::string& topic, const UserProfile& profile,
                     const RepositoryState& state, const CandidatePool& pool,
                     const SuggestOptions& options,
                     StrengthCategory category) {
  const std::string& attr = profile.sensitive.front().attribute;
  ExperimentRow row;
  row.topic = topic;
  row.category = category;
  row.k = profile.sensitive.front().k;

  std::vector<std::string> topics = {topic};
  OpenedGroup opened = OpenGroup(topics, "", {}, profile, state);
  PostGroup group = std::move(opened.group);
  GroupEvaluation evaluation = std::move(opened.evaluation);
  PublicView before = ViewOf(profile, evaluation.group);
  auto delta_of = [&](const GroupEvaluation& e) {
    return e.group.Find(attr)->delta.value_or(0.0);
  };
  row.trajectory.push_back(delta_of(evaluation));

  row.status = "satisfied";
  while (group.state == GroupState::kDraft) {
    SuggestionSet set;
    try {
      set = SuggestFromPool(group, {}, profile, state, pool, options);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kNoCandidates) throw;
      row.status = "no_candidates";
      break;
    }
    AcceptResult result =
        Accept(group, set.entries.front().topic, set, {}, profile, state);
    group = std::move(result.group);
    evaluation = std::move(result.evaluation);
    row.accepted.push_back(set.entries.front().topic);
    row.trajectory.push_back(delta_of(evaluation));
  }
  if (group.state == GroupState::kBudgetExhausted) {
    row.status = "budget_exhausted";
  }
  row.suggestions = static_cast<int>(row.accepted.size());
  row.delta_before = row.trajectory.front();
  row.delta_after = row.trajectory.back();
  PublicView after = ViewOf(profile, evaluation.group);
  for (const auto& [public_attr, value] : before.argmax) {
    if (after.argmax[public_attr] != value) row.persona_argmax_changed = true;
    row.margin_shift =
        std::max(row.margin_shift, std::abs(before.margin.at(public_attr) -
                                            after.margin[public_attr]));
  }
  return row;
}

std::string Fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

}  // namespace

std::vector<std::string> ExperimentTopics(const UserProfile& profile,
                                          StrengthCategory category,
                                          int connection_k,
                                          const RepositoryState& state) {
  Persona own = ProfilePersona(profile, *state.schema);
  std::vector<std::string> topics;
  for (const auto& [topic, stats] : state.topics) {
    const Persona* top = TopPersona(stats);
    if (!top || *top != own) continue;
    ConnectionStrength strength;
    try {
      strength = ComputeConnectionStrength(topic, connection_k, state);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kInsufficientPersonas) throw;
      continue;
    }
    if (strength.category == category) topics.push_back(topic);
  }
  return topics;
}

ExperimentSummary Summarize(const std::vector<ExperimentRow>& rows) {
  ExperimentSummary summary;
  summary.rows = rows.size();
  double suggestions = 0.0;
  size_t unchanged = 0;
  double shift = 0.0;
  for (const ExperimentRow& row : rows) {
    suggestions += row.suggestions;
    if (row.status == "satisfied") {
      ++summary.satisfied;
      if (!row.persona_argmax_changed) ++unchanged;
      shift += row.margin_shift;
    } else if (row.status == "budget_exhausted") {
      ++summary.budget_exhausted;
    } else {
      ++summary.no_candidates;
    }
  }
  if (!rows.empty()) summary.mean_suggestions = suggestions / rows.size();
  if (summary.satisfied > 0) {
    summary.argmax_unchanged_rate =
        static_cast<double>(unchanged) / summary.satisfied;
    summary.mean_margin_shift = shift / summary.satisfied;
  }
  return summary;
}

ExperimentResult RunObfuscationExperiment(const RepositoryState& state,
                                          const ExperimentConfig& config) {
  if (config.profile.sensitive.size() != 1) {
    throw Error(ErrorCode::kInvalidArgument,
                "experiments take exactly one sensitive attribute");
  }
  UserProfile profile = ValidateProfile(config.profile, *state.schema);
  TopicTree tree = BuildTree(profile, state, config.link);
  profile = ChooseCoverSets(std::move(profile), tree, *state.schema);
  const SensitiveSetting& setting = profile.sensitive.front();
  std::vector<std::string> attrs = {setting.attribute};

  SuggestOptions options = config.suggest;
  CandidatePool pool;
  if (config.baseline) {
    options.preserve_persona = false;
    pool = IndependentCandidates(profile, state, config.link, attrs);
  } else {
    pool = TreeCandidates(profile, tree, attrs);
  }

  std::vector<std::string> topics =
      ExperimentTopics(profile, config.category, config.connection_k, state);
  std::vector<ExperimentRow> rows(topics.size());
  std::atomic<size_t> next{0};
  auto worker = [&] {
    for (size_t i = next++; i < topics.size(); i = next++) {
      rows[i] = RunRow(topics[i], profile, state, pool, options,
                       config.category);
    }
  };
  unsigned threads = config.threads ? config.threads
                                    : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, std::max<size_t>(1, topics.size()));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool_threads;
    std::exception_ptr failure;
    std::mutex failure_mu;
    for (unsigned t = 0; t < threads; ++t) {
      pool_threads.emplace_back([&] {
        try {
          worker();
        } catch (...) {
          std::lock_guard<std::mutex> lock(failure_mu);
          if (!failure) failure = std::current_exception();
          next = topics.size();
        }
      });
    }
    for (std::thread& t : pool_threads) t.join();
    if (failure) std::rethrow_exception(failure);
  }

  ExperimentResult result;
  result.attribute = setting.attribute;
  result.k = setting.k;
  result.delta = setting.delta;
  result.category = config.category;
  result.baseline = config.baseline;
  result.cover_set = setting.cover_set;
  result.summary = Summarize(rows);
  result.rows = std::move(rows);
  return result;
}

KSweep RunKSweep(const RepositoryState& state, const ExperimentConfig& config,
                 const std::vector<int>& ks) {
  KSweep sweep;
  for (int k : ks) {
    ExperimentConfig at_k = config;
    if (at_k.profile.sensitive.size() != 1) {
      throw Error(ErrorCode::kInvalidArgument,
                  "experiments take exactly one sensitive attribute");
    }
    at_k.profile.sensitive.front().k = k;
    at_k.profile.sensitive.front().cover_set.clear();
    sweep.results.push_back(RunObfuscationExperiment(state, at_k));
  }
  for (size_t i = 1; i < sweep.results.size(); ++i) {
    if (sweep.results[i].summary.mean_suggestions <
        sweep.results[i - 1].summary.mean_suggestions) {
      sweep.monotone = false;
    }
  }
  return sweep;
}

std::string ExperimentCsv(const std::vector<ExperimentResult>& results) {
  std::ostringstream out;
  out << "topic,category,k,suggestions,delta_before,delta_after,"
         "persona_argmax_changed,margin_shift\n";
  for (const ExperimentResult& result : results) {
    for (const ExperimentRow& row : result.rows) {
      out << row.topic << ',' << CategoryName(row.category) << ',' << row.k
          << ',' << row.suggestions << ',' << Fixed(row.delta_before) << ','
          << Fixed(row.delta_after) << ','
          << (row.persona_argmax_changed ? 1 : 0) << ','
          << Fixed(row.margin_shift) << '\n';
    }
  }
  return out.str();
}

json ExperimentSummaryJson(const ExperimentResult& result) {
  const ExperimentSummary& s = result.summary;
  return {{"attribute", result.attribute},
          {"k", result.k},
          {"delta", result.delta},
          {"category", CategoryName(result.category)},
          {"baseline", result.baseline},
          {"cover_set", result.cover_set},
          {"rows", s.rows},
          {"satisfied", s.satisfied},
          {"budget_exhausted", s.budget_exhausted},
          {"no_candidates", s.no_candidates},
          {"mean_suggestions", s.mean_suggestions},
          {"argmax_unchanged_rate", s.argmax_unchanged_rate},
          {"mean_margin_shift", s.mean_margin_shift}};
}

json KSweepJson(const KSweep& sweep) {
  json results = json::array();
  for (const ExperimentResult& r : sweep.results) {
    results.push_back(ExperimentSummaryJson(r));
  }
  return {{"results", std::move(results)}, {"monotone", sweep.monotone}};
}

std::map<std::string, std::string> DominantPersona(
    const RepositoryState& state) {
  std::map<Persona, uint64_t> totals;
  for (const auto& [topic, stats] : state.topics) {
    for (const auto& [persona, count] : stats.joint) totals[persona] += count;
  }
  const Persona* best = nullptr;
  uint64_t best_count = 0;
  for (const auto& [persona, count] : totals) {
    if (count > best_count) {
      best = &persona;
      best_count = count;
    }
  }
  if (!best) {
    throw Error(ErrorCode::kInsufficientPersonas,
                "corpus has no fully labeled posts");
  }
  return PersonaMap(*state.schema, *best);
}

}  // namespace aegis
