#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "interprior/nn.hpp"

namespace interprior {

/// Row-major f32 tensor as stored on disk.
struct NamedTensor {
  std::string name;
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  std::vector<float> data;
};

/// Named-tensor file: magic "IPCKPT01", u32 version, u32 meta length + UTF-8
/// JSON meta, u32 tensor count, per tensor (u16 name length, name, u32 rows,
/// u32 cols), then every payload in table order as little-endian f32,
/// row-major. See docs/FORMATS.md.
struct Checkpoint {
  static constexpr char kMagic[8] = {'I', 'P', 'C', 'K', 'P', 'T', '0', '1'};
  static constexpr std::uint32_t kVersion = 1;

  nlohmann::json meta = nlohmann::json::object();
  std::vector<NamedTensor> tensors;

  bool has_group(const std::string& group) const;
  const NamedTensor& find(const std::string& name) const;

  void save(const std::filesystem::path& path) const;
  static Checkpoint load(const std::filesystem::path& path);

  std::vector<std::uint8_t> serialize() const;
  static Checkpoint deserialize(const std::vector<std::uint8_t>& bytes);

  /// Stores every parameter of `store` as "<group>/<name>".
  template <typename Scalar>
  void put_group(const std::string& group, const nn::ParamStore<Scalar>& store) {
    for (const auto& e : store.entries()) {
      NamedTensor t;
      t.name = group + "/" + e.name;
      t.rows = static_cast<std::uint32_t>(e.value.rows());
      t.cols = static_cast<std::uint32_t>(e.value.cols());
      t.data.resize(static_cast<std::size_t>(e.value.size()));
      for (Eigen::Index r = 0; r < e.value.rows(); ++r) {
        for (Eigen::Index c = 0; c < e.value.cols(); ++c) {
          t.data[static_cast<std::size_t>(r * e.value.cols() + c)] = static_cast<float>(e.value(r, c));
        }
      }
      tensors.push_back(std::move(t));
    }
  }

  /// Rebuilds a store from every tensor under "<group>/", in file order.
  template <typename Scalar>
  nn::ParamStore<Scalar> get_group(const std::string& group) const {
    nn::ParamStore<Scalar> store;
    const std::string prefix = group + "/";
    for (const auto& t : tensors) {
      if (t.name.compare(0, prefix.size(), prefix) != 0) continue;
      const std::size_t i = store.add(t.name.substr(prefix.size()), t.rows, t.cols);
      auto& v = store.mutable_value(i);
      for (std::uint32_t r = 0; r < t.rows; ++r) {
        for (std::uint32_t c = 0; c < t.cols; ++c) v(r, c) = static_cast<Scalar>(t.data[r * t.cols + c]);
      }
    }
    return store;
  }
};

}  // namespace interprior
