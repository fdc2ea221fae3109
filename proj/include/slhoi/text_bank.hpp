#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "slhoi/mat.hpp"

namespace slhoi {

struct CategoryEntry {
  int id = 0;               // dense bank row
  std::string action;       // verb lemma, multiword joined by spaces
  std::string object;       // noun phrase
  std::string seen = "seen";       // "seen" | "unseen"
  std::string rarity = "n/a";      // "rare" | "non_rare" | "n/a"
};

// Immutable after load; one embedding row per entry, width 2D.
struct TextBank {
  std::vector<CategoryEntry> entries;
  Mat embeddings;  // |R| x 2D
  std::string provenance;

  int size() const { return static_cast<int>(entries.size()); }
  int dim() const { return embeddings.cols(); }
  int find(const std::string& action, const std::string& object) const;  // -1 if absent
  void validate() const;  // unique (action, object), rows match entries
  std::vector<int> all_rows() const;
};

// Irregular-form tables; shipped as a repo asset, loaded from JSON with keys
// "gerunds" and "articles".
struct InflectionOverrides {
  std::map<std::string, std::string> gerunds;   // lemma -> gerund
  std::map<std::string, std::string> articles;  // noun -> "a" | "an"
};

InflectionOverrides load_overrides(const std::filesystem::path& file);

// Ruleset: override table first; keep a final "ee"; drop a final silent "e";
// double the final consonant of a one-vowel-group word with a single vowel
// letter before a final consonant other than w/x/y; otherwise plain +ing.
// Multiword verbs inflect their first word only.
std::string gerund(const std::string& verb, const InflectionOverrides& ov);

// "an" before a vowel letter, "a" otherwise, with per-noun overrides for
// sound/letter mismatches. Uses the first word of the noun phrase.
std::string article(const std::string& noun, const InflectionOverrides& ov);

// "a photo of a person <gerund> <a/an> <object>"
std::string build_prompt(const std::string& action, const std::string& object,
                         const InflectionOverrides& ov);

// Deterministic stand-in for the text encoder: a hash-seeded unit vector whose
// two halves are drawn from independent streams.
std::vector<double> stub_encode(const std::string& prompt, int dim, std::uint64_t seed);

// Categories CSV: "action,object[,seen[,rarity]]" per line; a "action,object"
// header row and blank/# lines are skipped.
std::vector<CategoryEntry> load_categories_csv(const std::filesystem::path& file);

TextBank build_stub_bank(const std::vector<CategoryEntry>& entries, int dim,
                         std::uint64_t seed, const InflectionOverrides& ov);

// bank.json (header) + bank.bin (raw little-endian f32 rows) in `dir`.
// Embeddings round-trip bit-exactly: build/save/load all pass through f32.
void save_bank(const TextBank& bank, const std::filesystem::path& dir);
TextBank load_bank(const std::filesystem::path& dir);

// Category ids grouped per reporting split. Axes: full, seen, unseen, rare,
// non_rare ("n/a" rarity joins neither rarity group).
std::map<std::string, std::vector<int>> split_groups(const TextBank& bank);

}  // namespace slhoi
