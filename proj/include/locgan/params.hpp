#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "locgan/errors.hpp"
#include "locgan/tensor.hpp"

namespace locgan {

/**
 * @brief Named map of model parameters with per-parameter optimizer state.
 *
 * Names are unique and shapes are fixed at creation. Entries flagged
 * trainable take part in optimizer steps; the rest (running statistics and
 * similar buffers) are carried along and serialized but never updated by
 * the optimizer.
 */
class ParameterSet {
 public:
  struct Entry {
    Tensor tensor;
    bool trainable = true;
    std::vector<float> m;  // first moment
    std::vector<float> v;  // second moment
    int64_t step = 0;
  };

  Tensor& create(const std::string& name, std::vector<int> shape,
                 bool trainable = true) {
    if (entries_.count(name))
      throw ContractError("parameter '" + name + "' already exists");
    Entry e;
    e.tensor = Tensor(std::move(shape), trainable);
    e.trainable = trainable;
    auto [it, ok] = entries_.emplace(name, std::move(e));
    (void)ok;
    return it->second.tensor;
  }

  bool contains(const std::string& name) const { return entries_.count(name) > 0; }

  Tensor& at(const std::string& name) {
    auto it = entries_.find(name);
    if (it == entries_.end())
      throw ContractError("unknown parameter '" + name + "'");
    return it->second.tensor;
  }
  const Tensor& at(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end())
      throw ContractError("unknown parameter '" + name + "'");
    return it->second.tensor;
  }

  std::map<std::string, Entry>& entries() { return entries_; }
  const std::map<std::string, Entry>& entries() const { return entries_; }

  size_t size() const { return entries_.size(); }

  int64_t trainable_count() const {
    int64_t n = 0;
    for (const auto& [name, e] : entries_)
      if (e.trainable) n += e.tensor.numel();
    return n;
  }

  void zero_grads() {
    for (auto& [name, e] : entries_) e.tensor.clear_grad();
  }

  /// Copy parameter values (not optimizer state) from another set with the
  /// same names and shapes.
  void load_values_from(const ParameterSet& other) {
    for (auto& [name, e] : entries_) {
      const auto it = other.entries_.find(name);
      if (it == other.entries_.end())
        throw ContractError("checkpoint is missing parameter '" + name + "'");
      if (!e.tensor.same_shape(it->second.tensor))
        throw DimensionError("checkpoint shape mismatch for '" + name + "': " +
                             e.tensor.shape_str() + " vs " +
                             it->second.tensor.shape_str());
      std::memcpy(e.tensor.data(), it->second.tensor.data(),
                  sizeof(float) * e.tensor.numel());
    }
  }

 private:
  std::map<std::string, Entry> entries_;
};

/// One Adam update over every trainable entry that has a gradient.
/// Gradients are consumed: they are cleared after the step, so a second call
/// without an intervening backward pass is a contract error.
inline void adam_step(ParameterSet& params, float lr, float beta1 = 0.9f,
                      float beta2 = 0.999f, float eps = 1e-8f) {
  for (auto& [name, e] : params.entries()) {
    if (!e.trainable) continue;
    if (!e.tensor.has_grad())
      throw ContractError("adam_step: missing gradient for parameter '" +
                          name + "'");
    const int64_t n = e.tensor.numel();
    if (e.m.empty()) {
      e.m.assign(static_cast<size_t>(n), 0.0f);
      e.v.assign(static_cast<size_t>(n), 0.0f);
    }
    e.step += 1;
    const double bc1 = 1.0 - std::pow(static_cast<double>(beta1), static_cast<double>(e.step));
    const double bc2 = 1.0 - std::pow(static_cast<double>(beta2), static_cast<double>(e.step));
    float* w = e.tensor.data();
    const float* g = e.tensor.grad();
    for (int64_t i = 0; i < n; ++i) {
      e.m[static_cast<size_t>(i)] =
          beta1 * e.m[static_cast<size_t>(i)] + (1.0f - beta1) * g[i];
      e.v[static_cast<size_t>(i)] =
          beta2 * e.v[static_cast<size_t>(i)] + (1.0f - beta2) * g[i] * g[i];
      const double mhat = e.m[static_cast<size_t>(i)] / bc1;
      const double vhat = e.v[static_cast<size_t>(i)] / bc2;
      w[i] -= static_cast<float>(lr * mhat / (std::sqrt(vhat) + eps));
    }
  }
  for (auto& [name, e] : params.entries())
    if (e.trainable) e.tensor.clear_grad();
}

// ---------------------------------------------------------------------------
// Checkpoint file format "LGT1": magic, then one record per parameter in
// name order: name length (u32 LE), UTF-8 name, rank (u32 LE), dims
// (u32 LE each), row-major f32 LE payload.
// ---------------------------------------------------------------------------

namespace detail {

inline void write_u32(std::ostream& os, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline uint32_t read_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw IoError("checkpoint truncated while reading u32");
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) |
         (static_cast<uint32_t>(b[3]) << 24);
}

}  // namespace detail

inline void save_checkpoint(const ParameterSet& params, std::ostream& os) {
  os.write("LGT1", 4);
  for (const auto& [name, e] : params.entries()) {
    detail::write_u32(os, static_cast<uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    const auto& shape = e.tensor.shape();
    detail::write_u32(os, static_cast<uint32_t>(shape.size()));
    for (int d : shape) detail::write_u32(os, static_cast<uint32_t>(d));
    os.write(reinterpret_cast<const char*>(e.tensor.data()),
             static_cast<std::streamsize>(sizeof(float) * e.tensor.numel()));
  }
  if (!os) throw IoError("failed to write checkpoint stream");
}

inline void save_checkpoint(const ParameterSet& params,
                            const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open checkpoint for writing: " + path);
  save_checkpoint(params, os);
}

inline ParameterSet load_checkpoint(std::istream& is) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "LGT1", 4) != 0)
    throw IoError("not a checkpoint file (bad magic)");
  ParameterSet params;
  while (true) {
    const int peek = is.peek();
    if (peek == std::char_traits<char>::eof()) break;
    const uint32_t name_len = detail::read_u32(is);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    const uint32_t rank = detail::read_u32(is);
    std::vector<int> shape(rank);
    for (uint32_t i = 0; i < rank; ++i)
      shape[i] = static_cast<int>(detail::read_u32(is));
    Tensor& t = params.create(name, shape, /*trainable=*/true);
    is.read(reinterpret_cast<char*>(t.data()),
            static_cast<std::streamsize>(sizeof(float) * t.numel()));
    if (!is) throw IoError("checkpoint truncated while reading '" + name + "'");
  }
  return params;
}

inline ParameterSet load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint: " + path);
  return load_checkpoint(is);
}

}  // namespace locgan
