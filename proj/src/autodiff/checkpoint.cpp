#include "hpf/autodiff/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>

#include "hpf/kv_file.hpp"

namespace hpf::ad {
namespace {

static_assert(sizeof(float) == 4);

std::uint32_t byteswap32(std::uint32_t v) {
  return (v >> 24) | ((v >> 8) & 0xff00u) | ((v << 8) & 0xff0000u) | (v << 24);
}

void write_floats(const std::filesystem::path& path, std::span<const float> data) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  for (float x : data) {
    std::uint32_t bits = std::bit_cast<std::uint32_t>(x);
    if constexpr (std::endian::native == std::endian::big) bits = byteswap32(bits);
    f.write(reinterpret_cast<const char*>(&bits), sizeof bits);
  }
}

void read_floats(const std::filesystem::path& path, std::span<float> out) {
  std::ifstream f(path, std::ios::binary | std::ios::ate);
  if (!f) throw std::runtime_error("cannot read " + path.string());
  const auto bytes = static_cast<std::size_t>(f.tellg());
  if (bytes != out.size() * sizeof(float))
    throw std::runtime_error(path.string() + ": expected " + std::to_string(out.size() * 4) + " bytes, found " +
                             std::to_string(bytes));
  f.seekg(0);
  for (float& x : out) {
    std::uint32_t bits = 0;
    f.read(reinterpret_cast<char*>(&bits), sizeof bits);
    if constexpr (std::endian::native == std::endian::big) bits = byteswap32(bits);
    x = std::bit_cast<float>(bits);
  }
}

std::string encode_shape(const Shape& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += 'x';
    out += std::to_string(s[i]);
  }
  return out;
}

Shape decode_shape(const std::string& text) {
  Shape s;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto next = text.find('x', pos);
    s.push_back(std::stoi(text.substr(pos, next - pos)));
    if (next == std::string::npos) break;
    pos = next + 1;
  }
  return s;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& dir, std::span<const Parameter* const> params) {
  std::filesystem::create_directories(dir);
  std::ofstream manifest(dir / "manifest.txt");
  if (!manifest) throw std::runtime_error("cannot write manifest in " + dir.string());
  manifest << "format = hpf-checkpoint\nversion = 1\ncount = " << params.size() << "\n";
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Parameter& p = *params[i];
    std::string file = "p" + std::to_string(i) + "_" + p.name + ".bin";
    std::replace(file.begin(), file.end(), '/', '_');
    write_floats(dir / file, p.value.data());
    manifest << "param." << i << ".name = " << p.name << "\n"
             << "param." << i << ".shape = " << encode_shape(p.value.shape()) << "\n"
             << "param." << i << ".file = " << file << "\n";
  }
}

void load_checkpoint(const std::filesystem::path& dir, std::span<Parameter* const> params) {
  const KeyValues kv = read_key_values(dir / "manifest.txt");
  auto get = [&](const std::string& key) -> const std::string& {
    const auto it = kv.find(key);
    if (it == kv.end()) throw std::runtime_error("checkpoint manifest missing key '" + key + "'");
    return it->second;
  };
  if (get("format") != "hpf-checkpoint") throw std::runtime_error("not an hpf checkpoint: " + dir.string());
  const int count = std::stoi(get("count"));
  for (Parameter* p : params) {
    bool found = false;
    for (int i = 0; i < count && !found; ++i) {
      const std::string prefix = "param." + std::to_string(i) + ".";
      if (get(prefix + "name") != p->name) continue;
      const Shape shape = decode_shape(get(prefix + "shape"));
      if (shape != p->value.shape())
        throw std::runtime_error("checkpoint shape " + shape_str(shape) + " for " + p->name + " does not match " +
                                 shape_str(p->value.shape()));
      read_floats(dir / get(prefix + "file"), p->value.data());
      p->zero_grad();
      found = true;
    }
    if (!found) throw std::runtime_error("checkpoint has no parameter named " + p->name);
  }
}

}  // namespace hpf::ad
