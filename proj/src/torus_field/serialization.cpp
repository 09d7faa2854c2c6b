#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <stdexcept>

#include "hallci/torus_field.hpp"
#include "json.hpp"

namespace hallci {

namespace {

constexpr int kFormatVersion = 1;
constexpr const char* kLayout = "t-major/component-major/row-major-x1-fastest";

std::uint64_t to_le(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::little) return v;
  return __builtin_bswap64(v);
}

}  // namespace

SerializedField serialize(const TorusField& f) {
  nlohmann::json h;
  h["version"] = kFormatVersion;
  h["n_x"] = f.grid().n_x;
  h["n_t"] = f.grid().n_t;
  h["rank"] = to_string(f.rank());
  h["symmetry_tag"] = to_string(f.symmetry());
  h["layout"] = kLayout;
  h["dtype"] = "f64-le";
  SerializedField out;
  out.header = h.dump(2);
  out.payload.resize(f.size() * 8);
  for (std::size_t i = 0; i < f.size(); ++i) {
    std::uint64_t bits = to_le(std::bit_cast<std::uint64_t>(f.samples()[i]));
    std::memcpy(out.payload.data() + 8 * i, &bits, 8);
  }
  return out;
}

TorusField deserialize(const std::string& header, const std::vector<std::uint8_t>& payload) {
  nlohmann::json h;
  try {
    h = nlohmann::json::parse(header);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("malformed header: ") + e.what());
  }
  if (!h.contains("version") || h["version"].get<int>() != kFormatVersion)
    throw std::runtime_error("unknown version");
  if (h.value("dtype", "") != "f64-le") throw std::runtime_error("unsupported dtype");
  if (h.value("layout", "") != kLayout) throw std::runtime_error("unsupported layout");
  GridSpec g = make_grid(h.at("n_x").get<int>(), h.at("n_t").get<int>());
  TorusField f(g, rank_from_string(h.at("rank").get<std::string>()),
               symmetry_from_string(h.at("symmetry_tag").get<std::string>()));
  if (payload.size() != f.size() * 8) throw std::runtime_error("payload size mismatch");
  for (std::size_t i = 0; i < f.size(); ++i) {
    std::uint64_t bits;
    std::memcpy(&bits, payload.data() + 8 * i, 8);
    f.samples()[i] = std::bit_cast<double>(to_le(bits));
  }
  return f;
}

void write_snapshot(const TorusField& f, const std::string& path_without_ext) {
  SerializedField s = serialize(f);
  std::ofstream hdr(path_without_ext + ".tfd.json");
  std::ofstream bin(path_without_ext + ".tfd", std::ios::binary);
  if (!hdr || !bin) throw std::runtime_error("cannot write snapshot " + path_without_ext);
  hdr << s.header << "\n";
  bin.write(reinterpret_cast<const char*>(s.payload.data()), static_cast<std::streamsize>(s.payload.size()));
}

TorusField read_snapshot(const std::string& path_without_ext) {
  std::ifstream hdr(path_without_ext + ".tfd.json");
  std::ifstream bin(path_without_ext + ".tfd", std::ios::binary);
  if (!hdr || !bin) throw std::runtime_error("snapshot not found: " + path_without_ext);
  std::string header((std::istreambuf_iterator<char>(hdr)), std::istreambuf_iterator<char>());
  std::vector<std::uint8_t> payload((std::istreambuf_iterator<char>(bin)), std::istreambuf_iterator<char>());
  return deserialize(header, payload);
}

}  // namespace hallci
