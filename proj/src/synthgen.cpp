#include "commshift/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "commshift/error.hpp"
#include "commshift/rng.hpp"

namespace commshift::synthgen {

namespace {

using json = nlohmann::json;

// pseudo-word for id: consonant-vowel syllables over base-75 digits, >= 3 syllables
std::string pseudo_word(std::uint64_t id) {
  static const char consonants[] = "bcdfgklmnprstvz";
  static const char vowels[] = "aeiou";
  std::string out;
  std::uint64_t v = id;
  do {
    std::uint64_t d = v % 75;
    v /= 75;
    out += consonants[d % 15];
    out += vowels[(d / 15) % 5];
  } while (v > 0);
  while (out.size() < 6) out += "xa";
  return out;
}

std::map<std::string, std::uint64_t> parse_per_community(const json& j,
                                                         const std::vector<std::string>& names,
                                                         const char* what) {
  std::map<std::string, std::uint64_t> out;
  if (j.is_number_unsigned() || j.is_number_integer()) {
    for (const auto& n : names) out[n] = j.get<std::uint64_t>();
  } else if (j.is_object()) {
    for (const auto& n : names) {
      if (!j.contains(n))
        throw DataError(std::string(what) + " missing entry for community " + n);
      out[n] = j.at(n).get<std::uint64_t>();
    }
  } else {
    throw DataError(std::string(what) + " must be a number or per-community object");
  }
  return out;
}

struct Allocation {
  std::vector<std::uint64_t> per_community;  // indexed like all_names
  double achieved_prominence = 0;
};

}  // namespace

ShiftScenario parse_scenario(const std::string& json_text) {
  json j = json::parse(json_text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw DataError("scenario is not valid JSON");
  ShiftScenario s;
  try {
    s.vocabulary_size = j.at("vocabulary_size").get<std::uint32_t>();
    s.communities = j.at("communities").get<std::vector<std::string>>();
    if (j.contains("global")) s.global_name = j.at("global").get<std::string>();
    std::vector<std::string> all = s.communities;
    all.push_back(s.global_name);
    s.tokens = parse_per_community(j.at("tokens_per_community"), all, "tokens_per_community");
    std::map<std::string, std::uint64_t> a =
        parse_per_community(j.at("authors_per_community"), all, "authors_per_community");
    for (const auto& [k, v] : a) s.authors[k] = static_cast<std::uint32_t>(v);
    if (j.contains("zipf_exponent")) s.zipf_exponent = j.at("zipf_exponent").get<double>();
    if (j.contains("doc_mean_tokens"))
      s.doc_mean_tokens = j.at("doc_mean_tokens").get<double>();
    if (j.contains("context_words_per_planted"))
      s.context_words_per_planted = j.at("context_words_per_planted").get<std::uint32_t>();
    if (j.contains("injection_window"))
      s.injection_window = j.at("injection_window").get<std::uint32_t>();
    if (j.contains("seed")) s.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("planted")) {
      for (const auto& p : j.at("planted")) {
        PlantedSpec spec;
        if (p.contains("name")) spec.name = p.at("name").get<std::string>();
        std::string level = p.value("level", "domain");
        if (level == "domain") {
          spec.domain_level = true;
        } else if (level == "community") {
          spec.domain_level = false;
          spec.community = p.at("community").get<std::string>();
        } else {
          throw DataError("planted level must be 'domain' or 'community'");
        }
        spec.alpha = p.value("alpha", 1.0);
        spec.prominence = p.value("prominence", 0.75);
        spec.dissemination = p.value("dissemination", -1.0);
        spec.count = p.value("count", std::uint64_t{0});
        s.planted.push_back(std::move(spec));
      }
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("bad scenario: ") + e.what());
  }
  return s;
}

std::string scenario_to_json(const ShiftScenario& s) {
  json j;
  j["vocabulary_size"] = s.vocabulary_size;
  j["communities"] = s.communities;
  j["global"] = s.global_name;
  j["tokens_per_community"] = s.tokens;
  j["authors_per_community"] = s.authors;
  j["zipf_exponent"] = s.zipf_exponent;
  j["doc_mean_tokens"] = s.doc_mean_tokens;
  j["context_words_per_planted"] = s.context_words_per_planted;
  j["injection_window"] = s.injection_window;
  j["seed"] = s.seed;
  json planted = json::array();
  for (const auto& p : s.planted) {
    json e;
    if (!p.name.empty()) e["name"] = p.name;
    e["level"] = p.domain_level ? "domain" : "community";
    if (!p.domain_level) e["community"] = p.community;
    e["alpha"] = p.alpha;
    e["prominence"] = p.prominence;
    e["dissemination"] = p.dissemination;
    e["count"] = p.count;
    planted.push_back(e);
  }
  j["planted"] = planted;
  return j.dump(2) + "\n";
}

std::string meta_to_json(const GeneratedMeta& m) {
  json j;
  j["tokens"] = m.tokens;
  j["documents"] = m.documents;
  json planted = json::array();
  for (const auto& p : m.planted) {
    json e;
    e["word"] = p.word;
    e["level"] = p.domain_level ? "domain" : "community";
    if (!p.domain_level) e["community"] = p.community;
    e["alpha"] = p.alpha;
    e["prominence_target"] = p.prominence_target;
    e["prominence_achieved"] = p.prominence_achieved;
    e["counts"] = p.counts;
    e["context_words"] = p.context_words;
    planted.push_back(e);
  }
  j["planted"] = planted;
  return j.dump(2) + "\n";
}

GeneratedMeta generate(const ShiftScenario& sc, const RecordSink& sink) {
  if (sc.communities.size() < 2)
    throw DataError("scenario needs at least two member communities");
  std::vector<std::string> all_names = sc.communities;
  all_names.push_back(sc.global_name);
  for (std::size_t i = 0; i < all_names.size(); ++i)
    for (std::size_t j = i + 1; j < all_names.size(); ++j)
      if (all_names[i] == all_names[j])
        throw DataError("duplicate community name: " + all_names[i]);

  const std::size_t n_members = sc.communities.size();
  const std::size_t n_all = all_names.size();
  const std::size_t global_i = n_all - 1;
  const std::size_t n_planted = sc.planted.size();
  if (sc.vocabulary_size < n_planted + 20)
    throw DataError("vocabulary too small for the planted word list");
  const std::size_t n_background = sc.vocabulary_size - n_planted;

  std::uint64_t total_budget = 0;
  for (const auto& name : all_names) {
    auto it = sc.tokens.find(name);
    if (it == sc.tokens.end()) throw DataError("no token budget for community " + name);
    if (it->second < std::uint64_t{10} * sc.vocabulary_size)
      throw DataError("token budget for " + name + " is below 10x vocabulary size");
    total_budget += it->second;
    if (!sc.authors.count(name)) throw DataError("no author count for community " + name);
    if (sc.authors.at(name) == 0) throw DataError("author count must be positive for " + name);
  }
  if (sc.doc_mean_tokens < 4.0) throw DataError("doc_mean_tokens must be at least 4");

  // background word names and Zipf weights by rank
  std::vector<std::string> bg_names(n_background);
  for (std::size_t i = 0; i < n_background; ++i) bg_names[i] = pseudo_word(i);
  std::vector<double> cum(n_background);
  {
    double acc = 0;
    for (std::size_t r = 0; r < n_background; ++r) {
      acc += 1.0 / std::pow(static_cast<double>(r + 1), sc.zipf_exponent);
      cum[r] = acc;
    }
    for (auto& c : cum) c /= acc;
  }

  // planted word names
  std::vector<std::string> planted_names(n_planted);
  for (std::size_t p = 0; p < n_planted; ++p) {
    if (!sc.planted[p].name.empty()) {
      planted_names[p] = sc.planted[p].name;
    } else {
      planted_names[p] = pseudo_word(n_background + p);
    }
  }
  {
    std::vector<std::string> names = planted_names;
    names.insert(names.end(), bg_names.begin(), bg_names.end());
    std::sort(names.begin(), names.end());
    if (std::adjacent_find(names.begin(), names.end()) != names.end())
      throw DataError("planted word name collides with another word");
  }

  Rng rng(derive_seed(sc.seed, "synthgen"));
  auto draw_background = [&]() -> std::size_t {
    double u = rng.uniform();
    return static_cast<std::size_t>(
        std::lower_bound(cum.begin(), cum.end(), u) - cum.begin());
  };

  // per-planted context sets: frequency-weighted sample of background words, so
  // context words keep enough background mass to stay un-shifted themselves
  std::vector<std::vector<std::size_t>> ctx_sets(n_planted);
  {
    std::size_t lo = std::min<std::size_t>(5, n_background - 1);
    for (std::size_t p = 0; p < n_planted; ++p) {
      std::vector<char> taken(n_background, 0);
      std::size_t want = std::min<std::size_t>(sc.context_words_per_planted,
                                               (n_background - lo) / 2);
      if (want < 3) throw DataError("vocabulary too small for context sets");
      std::size_t guard = 0;
      while (ctx_sets[p].size() < want) {
        if (++guard > 1000000) throw InternalError("context sampling stalled");
        std::size_t r = draw_background();
        if (r < lo || taken[r]) continue;
        taken[r] = 1;
        ctx_sets[p].push_back(r);
      }
      std::sort(ctx_sets[p].begin(), ctx_sets[p].end());
    }
  }

  // planted count allocations
  std::vector<Allocation> allocs(n_planted);
  std::vector<PlantedMeta> metas(n_planted);
  for (std::size_t p = 0; p < n_planted; ++p) {
    const PlantedSpec& spec = sc.planted[p];
    if (spec.alpha < 0.0 || spec.alpha > 1.0)
      throw DataError("alpha must lie in [0,1] for " + planted_names[p]);
    if (spec.prominence <= 0.0 || spec.prominence > 1.0)
      throw DataError("prominence target must lie in (0,1] for " + planted_names[p]);
    if (spec.dissemination > 1.0)
      throw DataError("dissemination target above 1 for " + planted_names[p]);
    if (!spec.domain_level &&
        std::find(sc.communities.begin(), sc.communities.end(), spec.community) ==
            sc.communities.end())
      throw DataError("planted community " + spec.community + " is not a member");

    std::uint64_t total = spec.count;
    if (total == 0)
      total = std::max<std::uint64_t>(
          60 * (n_members + 1), static_cast<std::uint64_t>(0.002 * total_budget));

    Allocation& al = allocs[p];
    al.per_community.assign(n_all, 0);
    if (spec.domain_level) {
      auto global_share =
          static_cast<std::uint64_t>(std::llround((1.0 - spec.prominence) * total));
      std::uint64_t members_total = total - global_share;
      for (std::size_t c = 0; c < n_members; ++c)
        al.per_community[c] = members_total / n_members + (c < members_total % n_members);
      al.per_community[global_i] = global_share;
      std::uint64_t nd = members_total;
      al.achieved_prominence =
          static_cast<double>(nd) / static_cast<double>(nd + global_share);
    } else {
      std::size_t target_c = static_cast<std::size_t>(
          std::find(sc.communities.begin(), sc.communities.end(), spec.community) -
          sc.communities.begin());
      if (spec.prominence == 1.0) {
        // confined jargon: the word never leaves its community
        al.per_community[target_c] = total;
        al.achieved_prominence = 1.0;
      } else {
        std::uint64_t global_share = total / (n_members + 1);
        std::uint64_t members_total = total - global_share;
        auto own =
            static_cast<std::uint64_t>(std::llround(spec.prominence * members_total));
        std::uint64_t sibling_total = members_total - own;
        std::size_t n_siblings = n_members - 1;
        al.per_community[target_c] = own;
        std::size_t si = 0;
        for (std::size_t c = 0; c < n_members; ++c) {
          if (c == target_c) continue;
          al.per_community[c] = sibling_total / n_siblings + (si < sibling_total % n_siblings);
          ++si;
        }
        al.per_community[global_i] = global_share;
        al.achieved_prominence =
            static_cast<double>(own) / static_cast<double>(own + sibling_total);
      }
    }
    if (std::abs(al.achieved_prominence - spec.prominence) > 0.05 * spec.prominence)
      throw DataError("prominence target unsatisfiable for " + planted_names[p] +
                      " (allocation granularity too coarse; raise count)");

    PlantedMeta& m = metas[p];
    m.word = planted_names[p];
    m.domain_level = spec.domain_level;
    m.community = spec.community;
    m.alpha = spec.alpha;
    m.prominence_target = spec.prominence;
    m.prominence_achieved = al.achieved_prominence;
    for (std::size_t r : ctx_sets[p]) m.context_words.push_back(bg_names[r]);
    for (std::size_t c = 0; c < n_all; ++c)
      if (al.per_community[c] > 0) m.counts[all_names[c]] = al.per_community[c];
  }

  // sanity: planted documents must leave room for background text
  for (std::size_t c = 0; c < n_all; ++c) {
    double planted_tokens = 0;
    for (std::size_t p = 0; p < n_planted; ++p)
      planted_tokens += static_cast<double>(allocs[p].per_community[c]) * sc.doc_mean_tokens;
    if (planted_tokens > 0.8 * static_cast<double>(sc.tokens.at(all_names[c])))
      throw DataError("planted allocation would consume most of " + all_names[c] +
                      "'s budget; lower counts or raise the budget");
  }

  GeneratedMeta meta;
  struct Doc {
    std::uint32_t author;
    std::vector<std::size_t> word_ids;  // < n_background: background; else planted
  };

  const double p_end = 1.0 / sc.doc_mean_tokens;
  auto doc_len = [&]() -> std::size_t {
    std::uint64_t raw = rng.geometric(p_end);
    return static_cast<std::size_t>(std::clamp<std::uint64_t>(raw, 5, 120));
  };

  for (std::size_t c = 0; c < n_all; ++c) {
    const std::string& cname = all_names[c];
    const std::uint64_t budget = sc.tokens.at(cname);
    const std::uint32_t n_authors = sc.authors.at(cname);
    std::vector<Doc> docs;
    std::uint64_t emitted = 0;

    for (std::size_t p = 0; p < n_planted; ++p) {
      std::uint64_t want = allocs[p].per_community[c];
      if (want == 0) continue;
      const PlantedSpec& spec = sc.planted[p];
      bool inject = spec.alpha > 0.0 &&
                    (spec.domain_level ? c != global_i : all_names[c] == spec.community);

      // dissemination: designated author subset used round-robin
      std::vector<std::uint32_t> author_pool;
      if (spec.dissemination > 0.0) {
        auto k = static_cast<std::uint32_t>(std::clamp<long long>(
            std::llround(spec.dissemination * n_authors), 1, n_authors));
        std::vector<std::uint32_t> ids(n_authors);
        std::iota(ids.begin(), ids.end(), 0u);
        rng.shuffle(ids);
        author_pool.assign(ids.begin(), ids.begin() + k);
      }

      const std::vector<std::size_t>& ctx = ctx_sets[p];
      for (std::uint64_t occ = 0; occ < want; ++occ) {
        Doc d;
        d.author = author_pool.empty()
                       ? static_cast<std::uint32_t>(rng.below(n_authors))
                       : author_pool[occ % author_pool.size()];
        std::size_t len = doc_len();
        std::size_t at = rng.below(len);
        d.word_ids.resize(len);
        for (std::size_t t = 0; t < len; ++t) {
          if (t == at) {
            d.word_ids[t] = n_background + p;
          } else if (inject && t + sc.injection_window >= at &&
                     t <= at + sc.injection_window && rng.uniform() < spec.alpha) {
            d.word_ids[t] = ctx[rng.below(ctx.size())];
          } else {
            d.word_ids[t] = draw_background();
          }
        }
        emitted += len;
        docs.push_back(std::move(d));
      }
    }

    while (emitted < budget) {
      Doc d;
      d.author = static_cast<std::uint32_t>(rng.below(n_authors));
      std::size_t len = std::min<std::uint64_t>(doc_len(), budget - emitted);
      if (len == 0) break;
      d.word_ids.resize(len);
      for (std::size_t t = 0; t < len; ++t) d.word_ids[t] = draw_background();
      emitted += len;
      docs.push_back(std::move(d));
    }

    Rng mixer(derive_seed(sc.seed, "synthmix", c));
    mixer.shuffle(docs);

    meta.tokens[cname] = emitted;
    meta.documents[cname] = docs.size();
    for (const auto& d : docs) {
      corpus::IngestRecord rec;
      rec.community = cname;
      rec.author = cname + "-a" + std::to_string(d.author);
      std::string body;
      for (std::size_t t = 0; t < d.word_ids.size(); ++t) {
        if (t) body += ' ';
        body += d.word_ids[t] < n_background ? bg_names[d.word_ids[t]]
                                             : planted_names[d.word_ids[t] - n_background];
      }
      rec.body = std::move(body);
      sink(rec);
    }
  }

  meta.planted = std::move(metas);
  return meta;
}

corpus::CorpusStore generate_store(const ShiftScenario& scenario, GeneratedMeta* meta_out) {
  std::vector<corpus::Community> comms;
  for (const auto& c : scenario.communities)
    comms.push_back({c, corpus::CommunityKind::member});
  comms.push_back({scenario.global_name, corpus::CommunityKind::global});
  corpus::CorpusStore store(std::move(comms));
  corpus::TokenizerOptions topts;
  GeneratedMeta meta = generate(scenario, [&](const corpus::IngestRecord& rec) {
    auto c = store.find_community(rec.community);
    store.add_document(*c, rec.author, corpus::tokenize(rec.body, topts));
  });
  store.rebuild_counts();
  if (meta_out) *meta_out = std::move(meta);
  return store;
}

}  // namespace commshift::synthgen
