#pragma once

// On-disk field format and run-report writers.
//
// A field is stored as two files sharing a base name: <base>.raw holds the
// payload as little-endian float32 (row-major, axis 0 slowest; vector fields
// are component-major: all of component 0, then component 1, ...), and
// <base>.json is a sidecar of the form
//   {"dims": [...], "spacing": [...], "kind": "scalar"|"vector"|"labels",
//    "components": n}.

#include <bit>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "core.hpp"
#include "optimizer.hpp"

namespace lddmm {

static_assert(std::endian::native == std::endian::little,
              "field payloads are little-endian float32; big-endian hosts are unsupported");

enum class FieldKind { scalar, vector, labels };

inline const char* to_string(FieldKind k) {
  switch (k) {
    case FieldKind::scalar: return "scalar";
    case FieldKind::vector: return "vector";
    case FieldKind::labels: return "labels";
  }
  return "scalar";
}

namespace iodetail {

inline std::string strip_raw_suffix(const std::string& path) {
  const std::string suffix = ".raw";
  if (path.size() > suffix.size() && path.compare(path.size() - suffix.size(), suffix.size(), suffix) == 0)
    return path.substr(0, path.size() - suffix.size());
  return path;
}

inline void ensure_parent_dir(const std::string& path) {
  std::filesystem::path p(path);
  if (p.has_parent_path() && !p.parent_path().empty())
    std::filesystem::create_directories(p.parent_path());
}

inline void write_payload(const std::string& path, const std::vector<float>& data) {
  ensure_parent_dir(path);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open for writing: " + path);
  f.write(reinterpret_cast<const char*>(data.data()),
          static_cast<std::streamsize>(data.size() * sizeof(float)));
  if (!f) throw Error("write failed: " + path);
}

inline std::vector<float> read_payload(const std::string& path, std::size_t expected) {
  std::ifstream f(path, std::ios::binary | std::ios::ate);
  if (!f) throw Error("cannot open: " + path);
  const auto bytes = static_cast<std::size_t>(f.tellg());
  if (bytes != expected * sizeof(float))
    throw ShapeError("payload size mismatch for " + path + ": got " + std::to_string(bytes) +
                     " bytes, sidecar implies " + std::to_string(expected * sizeof(float)));
  f.seekg(0);
  std::vector<float> data(expected);
  f.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(bytes));
  if (!f) throw Error("read failed: " + path);
  return data;
}

inline void write_sidecar(const std::string& base, const GridSpec& g, FieldKind kind,
                          int components) {
  nlohmann::json j;
  j["dims"] = std::vector<int>(g.dims.begin(), g.dims.begin() + g.d);
  j["spacing"] = std::vector<double>(g.spacing.begin(), g.spacing.begin() + g.d);
  j["kind"] = to_string(kind);
  j["components"] = components;
  ensure_parent_dir(base + ".json");
  std::ofstream f(base + ".json");
  if (!f) throw Error("cannot open for writing: " + base + ".json");
  f << j.dump(2) << "\n";
}

}  // namespace iodetail

inline void write_field(const std::string& path, const ScalarField& field,
                        FieldKind kind = FieldKind::scalar) {
  detail::require(kind != FieldKind::vector, "scalar payload cannot carry kind \"vector\"");
  const std::string base = iodetail::strip_raw_suffix(path);
  std::vector<float> data(field.size());
  for (std::size_t i = 0; i < field.size(); ++i) data[i] = static_cast<float>(field.v[i]);
  iodetail::write_payload(base + ".raw", data);
  iodetail::write_sidecar(base, field.grid, kind, 1);
}

inline void write_field(const std::string& path, const VectorField& field) {
  const std::string base = iodetail::strip_raw_suffix(path);
  const std::size_t n = field.size();
  std::vector<float> data(static_cast<std::size_t>(field.grid.d) * n);
  for (int a = 0; a < field.grid.d; ++a)
    for (std::size_t i = 0; i < n; ++i)
      data[static_cast<std::size_t>(a) * n + i] = static_cast<float>(field.comp[a][i]);
  iodetail::write_payload(base + ".raw", data);
  iodetail::write_sidecar(base, field.grid, FieldKind::vector, field.grid.d);
}

struct LoadedField {
  GridSpec grid;
  FieldKind kind = FieldKind::scalar;
  int components = 1;
  ScalarField scalar;  // filled when components == 1
  VectorField vector;  // filled when components == d
};

inline LoadedField load_field(const std::string& path) {
  const std::string base = iodetail::strip_raw_suffix(path);
  std::ifstream sf(base + ".json");
  if (!sf) throw Error("cannot open sidecar: " + base + ".json");
  nlohmann::json j;
  try {
    sf >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error("bad sidecar " + base + ".json: " + e.what());
  }
  LoadedField out;
  try {
    std::vector<int> dims = j.at("dims").get<std::vector<int>>();
    std::vector<double> spacing = j.at("spacing").get<std::vector<double>>();
    out.grid = GridSpec(dims, spacing);
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "scalar") out.kind = FieldKind::scalar;
    else if (kind == "vector") out.kind = FieldKind::vector;
    else if (kind == "labels") out.kind = FieldKind::labels;
    else throw Error("bad sidecar " + base + ".json: unknown kind \"" + kind + "\"");
    out.components = j.at("components").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw Error("bad sidecar " + base + ".json: " + e.what());
  }
  const bool want_vector = out.kind == FieldKind::vector;
  detail::require(out.components == (want_vector ? out.grid.d : 1),
                  "sidecar components inconsistent with kind for " + base);
  const std::size_t n = out.grid.size();
  std::vector<float> data =
      iodetail::read_payload(base + ".raw", n * static_cast<std::size_t>(out.components));
  if (want_vector) {
    out.vector = VectorField(out.grid);
    for (int a = 0; a < out.grid.d; ++a)
      for (std::size_t i = 0; i < n; ++i)
        out.vector.comp[a][i] = data[static_cast<std::size_t>(a) * n + i];
  } else {
    out.scalar = ScalarField(out.grid);
    for (std::size_t i = 0; i < n; ++i) out.scalar.v[i] = data[i];
  }
  return out;
}

// Min-max rescale to [0, 1]; constant images map to zero.
inline ScalarField rescale_unit(const ScalarField& f) {
  double lo = f.v.empty() ? 0.0 : f.v[0], hi = lo;
  for (double x : f.v) {
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
  ScalarField out(f.grid);
  if (hi > lo) {
    const double s = 1.0 / (hi - lo);
    for (std::size_t i = 0; i < f.size(); ++i) out.v[i] = (f.v[i] - lo) * s;
  }
  return out;
}

// ---------------------------------------------------------------------------
// run reports

inline void write_json(const std::string& path, const nlohmann::json& j) {
  iodetail::ensure_parent_dir(path);
  std::ofstream f(path);
  if (!f) throw Error("cannot open for writing: " + path);
  f << j.dump(2) << "\n";
}

inline void write_convergence_csv(const std::string& path,
                                  const std::vector<IterationRecord>& history) {
  iodetail::ensure_parent_dir(path);
  std::ofstream f(path);
  if (!f) throw Error("cannot open for writing: " + path);
  f << "iter,energy,mse_rel,rel_grad,pcg_iters,epsilon,wall_ms\n";
  char buf[512];
  for (const auto& r : history) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%d,%.17g,%.17g\n", r.iter, r.energy,
                  r.mse_rel, r.rel_grad, r.pcg_iters, r.epsilon, r.wall_ms);
    f << buf;
  }
}

inline void write_text(const std::string& path, const std::string& text) {
  iodetail::ensure_parent_dir(path);
  std::ofstream f(path);
  if (!f) throw Error("cannot open for writing: " + path);
  f << text;
}

}  // namespace lddmm
