#include "interprior/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "interprior/errors.hpp"

namespace interprior {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

namespace {

template <typename T>
void put(std::vector<std::uint8_t>& out, T value) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
  out.insert(out.end(), p, p + sizeof(T));
}

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    T value;
    take(&value, sizeof(T));
    return value;
  }

  void take(void* dst, std::size_t n) {
    if (pos_ + n > bytes_.size()) throw Error(ErrorCode::Format, "checkpoint truncated");
    std::memcpy(dst, bytes_.data() + pos_, n);
    pos_ += n;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

bool Checkpoint::has_group(const std::string& group) const {
  const std::string prefix = group + "/";
  for (const auto& t : tensors) {
    if (t.name.compare(0, prefix.size(), prefix) == 0) return true;
  }
  return false;
}

const NamedTensor& Checkpoint::find(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return t;
  }
  throw Error(ErrorCode::Format, "checkpoint has no tensor " + name);
}

std::vector<std::uint8_t> Checkpoint::serialize() const {
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put<std::uint32_t>(out, kVersion);
  const std::string meta_text = meta.dump();
  put<std::uint32_t>(out, static_cast<std::uint32_t>(meta_text.size()));
  out.insert(out.end(), meta_text.begin(), meta_text.end());
  put<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    if (t.name.size() > 0xFFFF) throw Error(ErrorCode::Format, "tensor name too long");
    if (t.data.size() != static_cast<std::size_t>(t.rows) * t.cols) {
      throw Error(ErrorCode::Format, "tensor payload size mismatch for " + t.name);
    }
    put<std::uint16_t>(out, static_cast<std::uint16_t>(t.name.size()));
    out.insert(out.end(), t.name.begin(), t.name.end());
    put<std::uint32_t>(out, t.rows);
    put<std::uint32_t>(out, t.cols);
  }
  for (const auto& t : tensors) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(t.data.data());
    out.insert(out.end(), p, p + t.data.size() * sizeof(float));
  }
  return out;
}

Checkpoint Checkpoint::deserialize(const std::vector<std::uint8_t>& bytes) {
  Reader in(bytes);
  char magic[8];
  in.take(magic, sizeof magic);
  if (std::memcmp(magic, kMagic, sizeof magic) != 0) throw Error(ErrorCode::Format, "bad checkpoint magic");
  if (in.get<std::uint32_t>() != kVersion) throw Error(ErrorCode::Format, "unsupported checkpoint version");
  Checkpoint ck;
  std::string meta_text(in.get<std::uint32_t>(), '\0');
  in.take(meta_text.data(), meta_text.size());
  ck.meta = nlohmann::json::parse(meta_text);
  const auto count = in.get<std::uint32_t>();
  ck.tensors.resize(count);
  for (auto& t : ck.tensors) {
    t.name.resize(in.get<std::uint16_t>());
    in.take(t.name.data(), t.name.size());
    t.rows = in.get<std::uint32_t>();
    t.cols = in.get<std::uint32_t>();
  }
  for (auto& t : ck.tensors) {
    t.data.resize(static_cast<std::size_t>(t.rows) * t.cols);
    in.take(t.data.data(), t.data.size() * sizeof(float));
  }
  if (!in.done()) throw Error(ErrorCode::Format, "trailing bytes after checkpoint payload");
  return ck;
}

void Checkpoint::save(const std::filesystem::path& path) const {
  const auto bytes = serialize();
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::Io, "cannot write " + path.string());
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::Io, "cannot read " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

}  // namespace interprior
