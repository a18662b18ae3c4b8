#include "rmn/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <sstream>

namespace rmn {

namespace {

constexpr std::array<char, 8> kMagic{'R', 'M', 'N', 'C', 'K', 'P', 'T', '\0'};

template <typename T>
void put(std::ostream& out, T value) {
  static_assert(std::is_integral_v<T>);
  for (std::size_t i = 0; i < sizeof(T); ++i) out.put(static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xff));
}

void put_f64(std::ostream& out, double v) { put(out, std::bit_cast<std::uint64_t>(v)); }

template <typename T>
T get(std::istream& in) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    const int c = in.get();
    if (c == std::char_traits<char>::eof()) throw FormatError("checkpoint: unexpected end of file");
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * i);
  }
  return static_cast<T>(v);
}

std::string get_bytes(std::istream& in, std::size_t n) {
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n) throw FormatError("checkpoint: unexpected end of file");
  return s;
}

}  // namespace

void save_checkpoint(std::ostream& out, const ModelStack& model, const Checkpoint& meta) {
  RunConfig config = meta.config;
  config.model = model.config();
  KeyValues header = to_key_values(config);
  header["epochs_completed"] = std::to_string(meta.epochs_completed);
  std::string text;
  for (const auto& [k, v] : header) text += k + "=" + v + "\n";

  out.write(kMagic.data(), kMagic.size());
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(text.size()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  put<std::uint64_t>(out, meta.vocab_hash);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(model.params().size()));
  for (const auto& e : model.params()) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(e.name.size()));
    out.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
    const Mat& m = e.tensor->value;
    put<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
    put<std::uint64_t>(out, static_cast<std::uint64_t>(m.cols()));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) put_f64(out, m(r, c));
    }
  }
  if (!out) throw Error("checkpoint: write failed");
}

std::string checkpoint_bytes(const ModelStack& model, const Checkpoint& meta) {
  std::ostringstream out(std::ios::binary);
  save_checkpoint(out, model, meta);
  return out.str();
}

LoadedCheckpoint load_checkpoint(std::istream& in) {
  const std::string magic = get_bytes(in, kMagic.size());
  if (std::memcmp(magic.data(), kMagic.data(), kMagic.size()) != 0) throw FormatError("checkpoint: bad magic");
  const auto version = get<std::uint32_t>(in);
  if (version != kCheckpointVersion) throw FormatError("checkpoint: unsupported version " + std::to_string(version));
  const auto header_len = get<std::uint32_t>(in);
  std::istringstream header_stream(get_bytes(in, header_len));
  KeyValues header = parse_key_values(header_stream);

  Checkpoint meta;
  if (auto it = header.find("epochs_completed"); it != header.end()) {
    meta.epochs_completed = std::stoi(it->second);
    header.erase(it);
  }
  try {
    apply_key_values(meta.config, header);
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("checkpoint header: ") + e.what());
  }
  meta.vocab_hash = get<std::uint64_t>(in);

  ModelStack model(meta.config.model);
  const auto count = get<std::uint32_t>(in);
  if (count != model.params().size()) throw FormatError("checkpoint: parameter count does not match architecture");
  for (const auto& e : model.params()) {
    const std::string name = get_bytes(in, get<std::uint32_t>(in));
    if (name != e.name) throw FormatError("checkpoint: expected parameter " + e.name + ", found " + name);
    const auto rows = get<std::uint64_t>(in);
    const auto cols = get<std::uint64_t>(in);
    Mat& m = e.tensor->value;
    if (rows != static_cast<std::uint64_t>(m.rows()) || cols != static_cast<std::uint64_t>(m.cols())) {
      throw FormatError("checkpoint: shape mismatch for " + name);
    }
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = std::bit_cast<double>(get<std::uint64_t>(in));
    }
  }
  return {meta, std::move(model)};
}

}  // namespace rmn
