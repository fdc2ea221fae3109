#include "slhoi/text_bank.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "slhoi/errors.hpp"
#include "slhoi/rng.hpp"

namespace slhoi {

using nlohmann::json;

int TextBank::find(const std::string& action, const std::string& object) const {
  for (const CategoryEntry& e : entries) {
    if (e.action == action && e.object == object) return e.id;
  }
  return -1;
}

void TextBank::validate() const {
  if (static_cast<int>(entries.size()) != embeddings.rows()) {
    throw DataError("text bank has " + std::to_string(entries.size()) + " entries but " +
                    std::to_string(embeddings.rows()) + " embedding rows");
  }
  std::set<std::pair<std::string, std::string>> seen_pairs;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const CategoryEntry& e = entries[i];
    if (e.id != static_cast<int>(i)) {
      throw DataError("text bank entry ids must be dense 0..N-1; entry " + std::to_string(i) +
                      " has id " + std::to_string(e.id));
    }
    if (!seen_pairs.insert({e.action, e.object}).second) {
      throw DataError("duplicate category (" + e.action + ", " + e.object + ") in text bank");
    }
    if (e.seen != "seen" && e.seen != "unseen") {
      throw DataError("category (" + e.action + ", " + e.object + ") has invalid seen label '" +
                      e.seen + "'");
    }
    if (e.rarity != "rare" && e.rarity != "non_rare" && e.rarity != "n/a") {
      throw DataError("category (" + e.action + ", " + e.object + ") has invalid rarity '" +
                      e.rarity + "'");
    }
  }
}

std::vector<int> TextBank::all_rows() const {
  std::vector<int> rows(entries.size());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = static_cast<int>(i);
  return rows;
}

InflectionOverrides load_overrides(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw DataError("cannot open override table " + file.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError("override table " + file.string() + " is not valid JSON: " + e.what());
  }
  InflectionOverrides ov;
  if (j.contains("gerunds")) {
    for (auto& [k, v] : j.at("gerunds").items()) ov.gerunds[k] = v.get<std::string>();
  }
  if (j.contains("articles")) {
    for (auto& [k, v] : j.at("articles").items()) ov.articles[k] = v.get<std::string>();
  }
  return ov;
}

namespace {

bool is_vowel(char c) { return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u'; }

std::vector<std::string> split_words(const std::string& phrase) {
  std::vector<std::string> words;
  std::string cur;
  for (char c : phrase) {
    if (c == ' ' || c == '_') {
      if (!cur.empty()) words.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) words.push_back(cur);
  return words;
}

int vowel_group_count(const std::string& w) {
  int groups = 0;
  bool in_group = false;
  for (char c : w) {
    if (is_vowel(c)) {
      if (!in_group) ++groups;
      in_group = true;
    } else {
      in_group = false;
    }
  }
  return groups;
}

std::string gerund_word(const std::string& w, const InflectionOverrides& ov) {
  auto it = ov.gerunds.find(w);
  if (it != ov.gerunds.end()) return it->second;
  const std::size_t n = w.size();
  if (n >= 2 && w[n - 1] == 'e' && w[n - 2] == 'e') return w + "ing";
  if (n >= 2 && w[n - 1] == 'e') return w.substr(0, n - 1) + "ing";
  const char last = w[n - 1];
  if (n >= 2 && !is_vowel(last) && last != 'w' && last != 'x' && last != 'y' &&
      is_vowel(w[n - 2]) && (n == 2 || !is_vowel(w[n - 3])) && vowel_group_count(w) == 1) {
    return w + last + "ing";
  }
  return w + "ing";
}

}  // namespace

std::string gerund(const std::string& verb, const InflectionOverrides& ov) {
  if (verb.empty()) throw DataError("cannot inflect an empty verb");
  auto it = ov.gerunds.find(verb);
  if (it != ov.gerunds.end()) return it->second;  // whole-phrase override wins
  std::vector<std::string> words = split_words(verb);
  if (words.empty()) throw DataError("cannot inflect an empty verb");
  words[0] = gerund_word(words[0], ov);
  std::string out = words[0];
  for (std::size_t i = 1; i < words.size(); ++i) out += " " + words[i];
  return out;
}

std::string article(const std::string& noun, const InflectionOverrides& ov) {
  if (noun.empty()) throw DataError("cannot choose an article for an empty noun");
  auto it = ov.articles.find(noun);
  if (it != ov.articles.end()) return it->second;
  std::vector<std::string> words = split_words(noun);
  if (words.empty()) throw DataError("cannot choose an article for an empty noun");
  auto first_it = ov.articles.find(words[0]);
  if (first_it != ov.articles.end()) return first_it->second;
  return is_vowel(words[0][0]) ? "an" : "a";
}

std::string build_prompt(const std::string& action, const std::string& object,
                         const InflectionOverrides& ov) {
  if (action.empty() || object.empty()) {
    throw DataError("build_prompt requires a non-empty action and object");
  }
  std::vector<std::string> obj_words = split_words(object);
  std::string obj;
  for (std::size_t i = 0; i < obj_words.size(); ++i) {
    if (i) obj += " ";
    obj += obj_words[i];
  }
  return "a photo of a person " + gerund(action, ov) + " " + article(obj, ov) + " " + obj;
}

std::vector<double> stub_encode(const std::string& prompt, int dim, std::uint64_t seed) {
  if (dim <= 0 || dim % 2 != 0) {
    throw ConfigError("stub encoder dim must be positive and even, got " + std::to_string(dim));
  }
  const std::uint64_t base = fnv1a64(prompt.data(), prompt.size(), seed ^ 0xcbf29ce484222325ull);
  std::vector<double> v(dim);
  const int half = dim / 2;
  // Independent streams per half, mirroring the class-aligned / patch-aligned
  // halves of the real encoder's output space.
  for (int h = 0; h < 2; ++h) {
    Rng rng(base + static_cast<std::uint64_t>(h) * 0x9e3779b97f4a7c15ull);
    for (int i = 0; i < half; ++i) v[h * half + i] = rng.normal();
  }
  double norm = 0.0;
  for (double x : v) norm += x * x;
  norm = std::sqrt(norm);
  for (double& x : v) x = x / norm;
  // Quantize through f32 so in-memory values equal the persisted bank exactly.
  for (double& x : v) x = static_cast<double>(static_cast<float>(x));
  return v;
}

std::vector<CategoryEntry> load_categories_csv(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw DataError("cannot open categories file " + file.string());
  std::vector<CategoryEntry> entries;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() >= 2 && fields[0] == "action" && fields[1] == "object") continue;
    if (fields.size() < 2) {
      throw DataError("categories file " + file.string() + " line " + std::to_string(lineno) +
                      ": expected at least action,object");
    }
    CategoryEntry e;
    e.id = static_cast<int>(entries.size());
    e.action = fields[0];
    e.object = fields[1];
    if (fields.size() > 2 && !fields[2].empty()) e.seen = fields[2];
    if (fields.size() > 3 && !fields[3].empty()) e.rarity = fields[3];
    entries.push_back(e);
  }
  return entries;
}

TextBank build_stub_bank(const std::vector<CategoryEntry>& entries, int dim,
                         std::uint64_t seed, const InflectionOverrides& ov) {
  TextBank bank;
  bank.entries = entries;
  bank.embeddings = Mat(static_cast<int>(entries.size()), dim);
  bank.provenance = "stub-encoder seed=" + std::to_string(seed);
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const std::string prompt = build_prompt(entries[i].action, entries[i].object, ov);
    const std::vector<double> e = stub_encode(prompt, dim, seed);
    for (int c = 0; c < dim; ++c) bank.embeddings(static_cast<int>(i), c) = e[c];
  }
  bank.validate();
  return bank;
}

void save_bank(const TextBank& bank, const std::filesystem::path& dir) {
  bank.validate();
  std::filesystem::create_directories(dir);
  json header;
  header["format"] = "slhoi-bank-v1";
  header["dim"] = bank.dim();
  header["data"] = "bank.bin";
  header["provenance"] = bank.provenance;
  json entries = json::array();
  for (const CategoryEntry& e : bank.entries) {
    entries.push_back({{"id", e.id},
                       {"action", e.action},
                       {"object", e.object},
                       {"seen", e.seen},
                       {"rarity", e.rarity}});
  }
  header["entries"] = entries;
  std::ofstream jf(dir / "bank.json");
  if (!jf) throw DataError("cannot write " + (dir / "bank.json").string());
  jf << header.dump(2) << "\n";

  std::ofstream bf(dir / "bank.bin", std::ios::binary);
  if (!bf) throw DataError("cannot write " + (dir / "bank.bin").string());
  for (int r = 0; r < bank.embeddings.rows(); ++r) {
    for (int c = 0; c < bank.embeddings.cols(); ++c) {
      const float f = static_cast<float>(bank.embeddings(r, c));
      bf.write(reinterpret_cast<const char*>(&f), sizeof(float));
    }
  }
}

TextBank load_bank(const std::filesystem::path& dir) {
  const std::filesystem::path header_path =
      std::filesystem::is_directory(dir) ? dir / "bank.json" : dir;
  std::ifstream jf(header_path);
  if (!jf) throw DataError("cannot open text bank header " + header_path.string());
  json header;
  try {
    jf >> header;
  } catch (const json::exception& e) {
    throw DataError("text bank header " + header_path.string() + " is not valid JSON: " +
                    e.what());
  }
  if (header.value("format", "") != "slhoi-bank-v1") {
    throw DataError("text bank header " + header_path.string() + " has unsupported format '" +
                    header.value("format", "") + "'");
  }
  TextBank bank;
  const int dim = header.at("dim").get<int>();
  bank.provenance = header.value("provenance", "");
  for (const json& e : header.at("entries")) {
    CategoryEntry entry;
    entry.id = e.at("id").get<int>();
    entry.action = e.at("action").get<std::string>();
    entry.object = e.at("object").get<std::string>();
    entry.seen = e.value("seen", "seen");
    entry.rarity = e.value("rarity", "n/a");
    bank.entries.push_back(entry);
  }

  const std::filesystem::path data_path =
      header_path.parent_path() / header.value("data", "bank.bin");
  std::ifstream bf(data_path, std::ios::binary);
  if (!bf) throw DataError("cannot open text bank data " + data_path.string());
  bank.embeddings = Mat(static_cast<int>(bank.entries.size()), dim);
  for (int r = 0; r < bank.embeddings.rows(); ++r) {
    for (int c = 0; c < dim; ++c) {
      float f = 0.0f;
      if (!bf.read(reinterpret_cast<char*>(&f), sizeof(float))) {
        throw DataError("text bank data " + data_path.string() + " truncated at row " +
                        std::to_string(r));
      }
      bank.embeddings(r, c) = static_cast<double>(f);
    }
  }
  bank.validate();
  return bank;
}

std::map<std::string, std::vector<int>> split_groups(const TextBank& bank) {
  std::map<std::string, std::vector<int>> groups;
  groups["full"];
  groups["seen"];
  groups["unseen"];
  groups["rare"];
  groups["non_rare"];
  for (const CategoryEntry& e : bank.entries) {
    groups["full"].push_back(e.id);
    groups[e.seen].push_back(e.id);
    if (e.rarity != "n/a") groups[e.rarity].push_back(e.id);
  }
  return groups;
}

}  // namespace slhoi
