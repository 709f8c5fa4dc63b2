#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "commshift/corpus.hpp"

namespace commshift::synthgen {

struct PlantedSpec {
  std::string name;          // auto-assigned pseudo-word when empty
  bool domain_level = true;  // false: confined to `community`
  std::string community;
  double alpha = 1.0;         // context divergence strength, 0 = no shift
  double prominence = 0.75;   // target count share (vs global / vs siblings)
  double dissemination = -1;  // target author coverage; < 0 = uniform authors
  std::uint64_t count = 0;    // total occurrences; 0 = heuristic default
};

struct ShiftScenario {
  std::uint32_t vocabulary_size = 500;
  std::vector<std::string> communities;  // members
  std::string global_name = "global";
  std::map<std::string, std::uint64_t> tokens;   // per community incl. global
  std::map<std::string, std::uint32_t> authors;  // per community incl. global
  std::vector<PlantedSpec> planted;
  double zipf_exponent = 1.0;
  double doc_mean_tokens = 20.0;
  std::uint32_t context_words_per_planted = 60;
  std::uint32_t injection_window = 5;
  std::uint64_t seed = 1;
};

ShiftScenario parse_scenario(const std::string& json_text);
std::string scenario_to_json(const ShiftScenario& s);

struct PlantedMeta {
  std::string word;
  bool domain_level = true;
  std::string community;
  double alpha = 1.0;
  double prominence_target = 0;
  double prominence_achieved = 0;
  std::map<std::string, std::uint64_t> counts;  // per community
  std::vector<std::string> context_words;
};

struct GeneratedMeta {
  std::map<std::string, std::uint64_t> tokens;     // per community
  std::map<std::string, std::uint64_t> documents;  // per community
  std::vector<PlantedMeta> planted;
};

std::string meta_to_json(const GeneratedMeta& m);

using RecordSink = std::function<void(const corpus::IngestRecord&)>;

// Mixture-of-unigrams corpora with planted shifts: background tokens follow one
// Zipfian distribution shared by every community; each planted word's documents
// draw the tokens around it from a word-specific context set with probability
// alpha (in member communities for domain-level words, only in the target
// community otherwise). Occurrence counts realize the prominence targets and
// designated author subsets realize dissemination. Deterministic per seed.
GeneratedMeta generate(const ShiftScenario& scenario, const RecordSink& sink);

// generate() piped straight into a store, for tests and acceptance runs
corpus::CorpusStore generate_store(const ShiftScenario& scenario,
                                   GeneratedMeta* meta = nullptr);

}  // namespace commshift::synthgen
