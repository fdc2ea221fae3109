#include "slhoi/params.hpp"

#include <fstream>

#include <json.hpp>

#include "slhoi/errors.hpp"

namespace slhoi {

using nlohmann::json;
namespace fs = std::filesystem;

Parameter& ParamStore::create(const std::string& name, int rows, int cols, bool frozen) {
  if (params_.count(name))
    throw ConfigError("duplicate parameter name: " + name);
  Parameter p;
  p.name = name;
  p.value = Mat(rows, cols, 0.0);
  p.grad = Mat(rows, cols, 0.0);
  p.frozen = frozen;
  auto [it, ok] = params_.emplace(name, std::move(p));
  (void)ok;
  return it->second;
}

Parameter& ParamStore::get(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw ConfigError("unknown parameter: " + name);
  return it->second;
}

const Parameter& ParamStore::get(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw ConfigError("unknown parameter: " + name);
  return it->second;
}

std::vector<Parameter*> ParamStore::with_prefix(const std::string& prefix) {
  std::vector<Parameter*> out;
  for (auto& [name, p] : params_)
    if (name.rfind(prefix, 0) == 0) out.push_back(&p);
  return out;
}

std::vector<const Parameter*> ParamStore::with_prefix(const std::string& prefix) const {
  std::vector<const Parameter*> out;
  for (const auto& [name, p] : params_)
    if (name.rfind(prefix, 0) == 0) out.push_back(&p);
  return out;
}

std::vector<Parameter*> ParamStore::all() { return with_prefix(""); }

void ParamStore::zero_grads() {
  for (auto& [name, p] : params_) p.grad.zero();
}

std::uint64_t ParamStore::checksum(const std::string& prefix) const {
  // std::map iteration is already name-sorted.
  std::uint64_t h = 14695981039346656037ull;
  for (const auto& [name, p] : params_) {
    if (name.rfind(prefix, 0) != 0) continue;
    h = fnv1a64(name.data(), name.size(), h);
    h = mat_checksum(p.value, h);
  }
  return h;
}

// --------------------------------------------------------------------------
// Archive I/O

namespace {

const char* dtype_name(DType d) { return d == DType::f32 ? "f32" : "f64"; }

DType dtype_from(const std::string& s) {
  if (s == "f32") return DType::f32;
  if (s == "f64") return DType::f64;
  throw DataError("unsupported dtype in manifest: " + s);
}

void write_bin(const fs::path& file, const Mat& m, DType dtype) {
  std::ofstream os(file, std::ios::binary);
  if (!os) throw DataError("cannot write " + file.string());
  if (dtype == DType::f32) {
    std::vector<float> buf(m.size());
    for (std::size_t i = 0; i < m.size(); ++i) buf[i] = static_cast<float>(m.data()[i]);
    os.write(reinterpret_cast<const char*>(buf.data()),
             static_cast<std::streamsize>(buf.size() * sizeof(float)));
  } else {
    os.write(reinterpret_cast<const char*>(m.data()),
             static_cast<std::streamsize>(m.size() * sizeof(double)));
  }
  if (!os) throw DataError("short write to " + file.string());
}

}  // namespace

void write_archive(const fs::path& dir,
                   const std::vector<std::pair<std::string, const Mat*>>& arrays,
                   DType dtype) {
  fs::create_directories(dir);
  json manifest;
  manifest["format"] = "slhoi-archive-v1";
  json entries = json::object();
  for (const auto& [name, mat] : arrays) {
    entries[name] = {{"shape", {mat->rows(), mat->cols()}}, {"dtype", dtype_name(dtype)}};
    write_bin(dir / (name + ".bin"), *mat, dtype);
  }
  manifest["arrays"] = entries;
  std::ofstream os(dir / "manifest.json");
  os << manifest.dump(2) << "\n";
  if (!os) throw DataError("cannot write manifest in " + dir.string());
}

ArchiveReader::ArchiveReader(const fs::path& dir) : dir_(dir) {
  std::ifstream is(dir / "manifest.json");
  if (!is) throw DataError("missing manifest.json in " + dir.string());
  json manifest;
  try {
    is >> manifest;
  } catch (const json::exception& e) {
    throw DataError("malformed manifest.json in " + dir.string() + ": " + e.what());
  }
  if (!manifest.contains("arrays"))
    throw DataError("manifest.json has no 'arrays' section: " + dir.string());
  for (const auto& [name, entry] : manifest["arrays"].items()) {
    Entry e;
    for (const auto& d : entry.at("shape")) e.shape.push_back(d.get<int>());
    e.dtype = dtype_from(entry.at("dtype").get<std::string>());
    entries_[name] = e;
  }
}

bool ArchiveReader::has(const std::string& name) const { return entries_.count(name) > 0; }

std::vector<std::string> ArchiveReader::names() const {
  std::vector<std::string> out;
  for (const auto& [name, e] : entries_) out.push_back(name);
  return out;
}

Mat ArchiveReader::read(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end())
    throw DataError("archive is missing array '" + name + "'");
  const Entry& e = it->second;
  if (e.shape.size() != 2)
    throw DataError("array '" + name + "' is not 2-D in manifest");
  const int rows = e.shape[0], cols = e.shape[1];
  Mat m(rows, cols);
  std::ifstream is(dir_ / (name + ".bin"), std::ios::binary);
  if (!is) throw DataError("missing data file for array '" + name + "'");
  if (e.dtype == DType::f32) {
    std::vector<float> buf(m.size());
    is.read(reinterpret_cast<char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(float)));
    if (static_cast<std::size_t>(is.gcount()) != buf.size() * sizeof(float))
      throw DataError("truncated data for array '" + name + "'");
    for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = buf[i];
  } else {
    is.read(reinterpret_cast<char*>(m.data()),
            static_cast<std::streamsize>(m.size() * sizeof(double)));
    if (static_cast<std::size_t>(is.gcount()) != m.size() * sizeof(double))
      throw DataError("truncated data for array '" + name + "'");
  }
  return m;
}

Mat ArchiveReader::read(const std::string& name, int rows, int cols) const {
  auto it = entries_.find(name);
  if (it == entries_.end())
    throw DataError("archive is missing array '" + name + "'");
  const Entry& e = it->second;
  if (e.shape.size() != 2 || e.shape[0] != rows || e.shape[1] != cols)
    throw DataError("shape mismatch for array '" + name + "': expected " +
                    std::to_string(rows) + "x" + std::to_string(cols));
  return read(name);
}

void save_params(const fs::path& dir, const ParamStore& store, DType dtype) {
  std::vector<std::pair<std::string, const Mat*>> arrays;
  for (const Parameter* p : store.with_prefix(""))
    arrays.push_back({p->name, &p->value});
  write_archive(dir, arrays, dtype);
}

void load_params(const fs::path& dir, ParamStore& store) {
  ArchiveReader reader(dir);
  for (Parameter* p : store.with_prefix("")) {
    p->value = reader.read(p->name, p->value.rows(), p->value.cols());
  }
}

}  // namespace slhoi
