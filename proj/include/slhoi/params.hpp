#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "slhoi/mat.hpp"

namespace slhoi {

struct Parameter {
  std::string name;
  Mat value;
  Mat grad;
  bool frozen = false;
};

// Name-keyed parameter registry. Names are dotted paths ("det.adapter.0.attn.wq");
// the leading component is the module namespace used for freeze checks,
// checksums, and optimizer grouping.
class ParamStore {
 public:
  Parameter& create(const std::string& name, int rows, int cols, bool frozen);
  Parameter& get(const std::string& name);
  const Parameter& get(const std::string& name) const;
  bool has(const std::string& name) const { return params_.count(name) > 0; }

  std::vector<Parameter*> with_prefix(const std::string& prefix);
  std::vector<const Parameter*> with_prefix(const std::string& prefix) const;
  std::vector<Parameter*> all();

  void zero_grads();

  // FNV-1a over the value bytes of every parameter whose name starts with
  // prefix, in lexicographic name order.
  std::uint64_t checksum(const std::string& prefix = "") const;

 private:
  std::map<std::string, Parameter> params_;
};

// Weight archive: a directory holding manifest.json plus one raw little-endian
// .bin per named array. dtype is per-array: "f32" is the interchange default,
// "f64" is used by training checkpoints so resume is bit-exact.
enum class DType { f32, f64 };

void write_archive(const std::filesystem::path& dir,
                   const std::vector<std::pair<std::string, const Mat*>>& arrays,
                   DType dtype);

struct ArchiveReader {
  explicit ArchiveReader(const std::filesystem::path& dir);
  bool has(const std::string& name) const;
  Mat read(const std::string& name) const;                        // any shape
  Mat read(const std::string& name, int rows, int cols) const;    // shape-checked
  std::vector<std::string> names() const;

 private:
  std::filesystem::path dir_;
  struct Entry {
    std::vector<int> shape;
    DType dtype;
  };
  std::map<std::string, Entry> entries_;
};

// Store-level convenience: save every parameter with the given prefix filter
// (empty = all); load populates existing parameters and validates shapes.
void save_params(const std::filesystem::path& dir, const ParamStore& store, DType dtype);
void load_params(const std::filesystem::path& dir, ParamStore& store);

}  // namespace slhoi
