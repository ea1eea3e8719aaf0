#include "van/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace van {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

class Writer {
 public:
  explicit Writer(const std::filesystem::path& path) : out_(path, std::ios::binary), path_(path) {
    if (!out_) throw std::runtime_error("cannot write checkpoint " + path.string());
  }
  template <typename T>
  void put(T value) {
    out_.write(reinterpret_cast<const char*>(&value), sizeof value);
  }
  void bytes(const void* data, std::size_t n) { out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n)); }
  void finish() {
    out_.flush();
    if (!out_) throw std::runtime_error("failed writing checkpoint " + path_.string());
  }

 private:
  std::ofstream out_;
  std::filesystem::path path_;
};

class Reader {
 public:
  explicit Reader(const std::filesystem::path& path) : in_(path, std::ios::binary), path_(path) {
    if (!in_) throw std::runtime_error("cannot open checkpoint " + path.string());
  }
  template <typename T>
  T get() {
    T value;
    bytes(&value, sizeof value);
    return value;
  }
  void bytes(void* data, std::size_t n) {
    in_.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) throw std::runtime_error(path_.string() + ": truncated checkpoint");
  }
  std::string string(std::size_t n) {
    if (n > (1u << 26)) throw std::runtime_error(path_.string() + ": corrupt checkpoint (string length)");
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
  }

 private:
  std::ifstream in_;
  std::filesystem::path path_;
};

}  // namespace

const nn::Tensor* Checkpoint::find(const std::string& name) const {
  for (const auto& [n, t] : tensors)
    if (n == name) return &t;
  return nullptr;
}

void save_checkpoint(const std::filesystem::path& path, const ParameterStore& store, const std::string& config_echo,
                     std::uint64_t seed, StoredType type) {
  Writer w(path);
  w.bytes(kCheckpointMagic, 7);
  w.put(kCheckpointVersion);
  for (const auto& [name, var] : store.items()) {
    if (name.empty()) throw std::invalid_argument("save_checkpoint: empty parameter name");
    const nn::Tensor& t = var.value();
    w.put(static_cast<std::uint32_t>(name.size()));
    w.bytes(name.data(), name.size());
    w.put(static_cast<std::uint8_t>(type));
    w.put(static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) w.put(static_cast<std::uint64_t>(d));
    if (type == StoredType::Float64) {
      w.bytes(t.data().data(), t.size() * sizeof(double));
    } else {
      for (std::size_t i = 0; i < t.size(); ++i) w.put(static_cast<float>(t[i]));
    }
  }
  w.put(std::uint32_t{0});
  w.put(static_cast<std::uint32_t>(config_echo.size()));
  w.bytes(config_echo.data(), config_echo.size());
  w.put(seed);
  w.finish();
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  Reader r(path);
  char magic[7];
  r.bytes(magic, 7);
  if (std::memcmp(magic, kCheckpointMagic, 7) != 0) throw std::runtime_error(path.string() + ": not a VAN checkpoint");
  const auto version = r.get<std::uint8_t>();
  if (version != kCheckpointVersion) {
    throw std::runtime_error(path.string() + ": unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ckpt;
  for (;;) {
    const auto name_length = r.get<std::uint32_t>();
    if (name_length == 0) break;
    std::string name = r.string(name_length);
    const auto dtype = r.get<std::uint8_t>();
    if (dtype > 1) throw std::runtime_error(path.string() + ": unknown dtype for " + name);
    const auto rank = r.get<std::uint32_t>();
    if (rank == 0 || rank > 8) throw std::runtime_error(path.string() + ": bad rank for " + name);
    nn::Shape shape(rank);
    std::size_t count = 1;
    for (auto& d : shape) {
      d = static_cast<std::size_t>(r.get<std::uint64_t>());
      count *= d;
    }
    if (count == 0 || count > (std::size_t{1} << 32)) throw std::runtime_error(path.string() + ": bad shape for " + name);
    std::vector<double> values(count);
    if (dtype == static_cast<std::uint8_t>(StoredType::Float64)) {
      r.bytes(values.data(), count * sizeof(double));
    } else {
      for (auto& v : values) v = r.get<float>();
    }
    ckpt.tensors.emplace_back(std::move(name), nn::Tensor(std::move(shape), std::move(values)));
  }
  ckpt.config_echo = r.string(r.get<std::uint32_t>());
  ckpt.seed = r.get<std::uint64_t>();
  return ckpt;
}

void apply_checkpoint(const Checkpoint& checkpoint, ParameterStore& store) {
  std::vector<std::string> problems;
  for (const auto& [name, var] : store.items()) {
    const nn::Tensor* t = checkpoint.find(name);
    if (!t) {
      problems.push_back(name + " (missing)");
    } else if (t->shape() != var.shape()) {
      problems.push_back(name + " (" + nn::shape_string(t->shape()) + " vs " + nn::shape_string(var.shape()) + ")");
    }
  }
  if (!problems.empty()) {
    std::string msg = "checkpoint does not match the model:";
    for (const auto& p : problems) msg += " " + p + ";";
    throw std::invalid_argument(msg);
  }
  for (const auto& [name, var] : store.items()) {
    nn::Var target = var;
    target.mutable_value() = *checkpoint.find(name);
  }
}

}  // namespace van
