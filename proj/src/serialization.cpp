#include "qbeb/serialization.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <json.hpp>
#include <ostream>
#include <string>

#include "qbeb/errors.hpp"

namespace qbeb {

static_assert(std::endian::native == std::endian::little, "state format assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'Q', 'B', 'E', 'B', 'S', 'T', 'A', 'T'};
constexpr std::size_t kHeaderBytes = 48;

template <class T>
void put(std::vector<std::byte>& out, T value) {
  const auto* p = reinterpret_cast<const std::byte*>(&value);
  out.insert(out.end(), p, p + sizeof(T));
}

template <class T>
T get(std::span<const std::byte> bytes, std::size_t& pos) {
  if (pos + sizeof(T) > bytes.size()) throw FormatError("state file truncated");
  T value;
  std::memcpy(&value, bytes.data() + pos, sizeof(T));
  pos += sizeof(T);
  return value;
}

std::uint32_t crc(std::span<const std::byte> bytes) {
  return static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size())));
}

std::uint64_t checked_pow(std::uint64_t d, std::uint32_t k) {
  std::uint64_t total = 1;
  for (std::uint32_t i = 0; i < k; ++i) {
    if (d != 0 && total > (std::uint64_t{1} << 40) / d) throw FormatError("state dimensions overflow");
    total *= d;
  }
  return total;
}

}  // namespace

std::vector<std::byte> encode_state(const StateRecord& r) {
  const std::uint64_t d = r.base_grid.size();
  if (r.weights.size() != checked_pow(d, r.k))
    throw ConfigError("weight count does not match d^k");
  std::vector<std::byte> out;
  out.reserve(kHeaderBytes + 8 * (d + r.weights.size()) + 4);
  for (char c : kMagic) out.push_back(static_cast<std::byte>(c));
  put<std::uint32_t>(out, kStateFormatVersion);
  put<std::uint32_t>(out, r.k);
  put<std::uint64_t>(out, d);
  put<std::uint64_t>(out, r.n);
  put<double>(out, r.alpha);
  put<double>(out, r.gamma);
  for (double t : r.base_grid) put<double>(out, t);
  for (double w : r.weights) put<double>(out, w);
  put<std::uint32_t>(out, crc(out));
  return out;
}

StateRecord decode_state(std::span<const std::byte> bytes) {
  if (bytes.size() < kHeaderBytes + 4) throw FormatError("state file truncated");
  if (std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0)
    throw FormatError("not a state file (bad magic)");
  std::size_t pos = sizeof kMagic;
  const auto version = get<std::uint32_t>(bytes, pos);
  if (version != kStateFormatVersion)
    throw FormatError("state format version " + std::to_string(version) + " is not supported (expected " +
                      std::to_string(kStateFormatVersion) + ")");
  StateRecord r;
  r.k = get<std::uint32_t>(bytes, pos);
  if (r.k == 0) throw FormatError("state has k = 0");
  const auto d = get<std::uint64_t>(bytes, pos);
  r.n = get<std::uint64_t>(bytes, pos);
  r.alpha = get<double>(bytes, pos);
  r.gamma = get<double>(bytes, pos);
  const std::uint64_t total = checked_pow(d, r.k);
  const std::uint64_t expected = kHeaderBytes + 8 * (d + total) + 4;
  if (bytes.size() != expected)
    throw FormatError("state file has " + std::to_string(bytes.size()) + " bytes, expected " +
                      std::to_string(expected));
  const std::size_t body = bytes.size() - 4;
  std::size_t crc_pos = body;
  if (get<std::uint32_t>(bytes, crc_pos) != crc(bytes.first(body)))
    throw FormatError("state file checksum mismatch");
  r.base_grid.resize(d);
  for (auto& t : r.base_grid) t = get<double>(bytes, pos);
  r.weights.resize(total);
  for (auto& w : r.weights) w = get<double>(bytes, pos);
  return r;
}

std::vector<std::byte> serialize_state(const NewtonState& state) {
  const auto& power = state.rate().power();
  if (!power) throw ConfigError("only power-schedule states can be serialized");
  StateRecord r;
  r.k = 1;
  r.base_grid.assign(state.grid().points().begin(), state.grid().points().end());
  r.n = state.n();
  r.alpha = power->alpha();
  r.gamma = power->gamma();
  r.weights.assign(state.weights().begin(), state.weights().end());
  return encode_state(r);
}

NewtonState deserialize_state(std::span<const std::byte> bytes) {
  StateRecord r = decode_state(bytes);
  if (r.k != 1) throw ConfigError("state file holds a " + std::to_string(r.k) + "-dimensional state");
  try {
    auto grid = make_grid(std::move(r.base_grid));
    return NewtonState(std::move(grid), LearningRate(r.alpha, r.gamma), std::move(r.weights), r.n);
  } catch (const Error& e) {
    throw FormatError(std::string("state file content invalid: ") + e.what());
  }
}

std::vector<std::byte> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::vector<std::byte> out(raw.size());
  std::memcpy(out.data(), raw.data(), raw.size());
  return out;
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::byte> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("write failed for " + path.string());
}

void save_state(const NewtonState& state, const std::filesystem::path& path) {
  write_file_bytes(path, serialize_state(state));
}

NewtonState load_state(const std::filesystem::path& path) {
  return deserialize_state(read_file_bytes(path));
}

void dump_weights_jsonl(const MixingWeights& g, std::ostream& out) {
  const auto pts = g.grid().points();
  const auto w = g.weights();
  for (std::size_t j = 0; j < w.size(); ++j) {
    nlohmann::json line{{"j", j}, {"theta", pts[j]}, {"weight", w[j]}};
    out << line.dump() << '\n';
  }
}

}  // namespace qbeb
