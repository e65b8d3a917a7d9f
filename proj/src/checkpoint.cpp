#include "sentiment/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace sentiment {

using nlohmann::json;

namespace {

template <typename T>
T to_little_endian(T value) {
  if constexpr (std::endian::native == std::endian::little) {
    return value;
  } else {
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
    std::memcpy(&value, bytes, sizeof(T));
    return value;
  }
}

void write_u32(std::ostream& out, std::uint32_t v) {
  v = to_little_endian(v);
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint32_t read_u32(std::istream& in) {
  std::uint32_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw std::runtime_error("checkpoint truncated in header");
  return to_little_endian(v);
}

json config_json(const EncoderConfig& c) {
  return json{{"vocab_size", c.vocab_size}, {"d_model", c.d_model}, {"n_heads", c.n_heads},
              {"n_layers", c.n_layers},     {"d_ff", c.d_ff},       {"max_len", c.max_len},
              {"n_classes", EncoderConfig::n_classes}};
}

}  // namespace

std::filesystem::path sidecar_path(const std::filesystem::path& checkpoint) {
  return std::filesystem::path(checkpoint.string() + ".json");
}

void save_checkpoint(const std::filesystem::path& path, const EncoderParams& params, const Vocabulary& vocab) {
  const auto& c = params.config;
  if (vocab.size() != c.vocab_size)
    throw std::invalid_argument("vocabulary size " + std::to_string(vocab.size()) + " differs from model's " +
                                std::to_string(c.vocab_size));
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out.write(kCheckpointMagic, sizeof kCheckpointMagic);
  write_u32(out, kCheckpointVersion);
  for (std::size_t v : {c.vocab_size, c.d_model, c.n_heads, c.n_layers, c.d_ff, c.max_len, EncoderConfig::n_classes})
    write_u32(out, static_cast<std::uint32_t>(v));

  json tensors = json::array();
  params.for_each([&](const std::string& name, ParamGroup, const Matrix& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      const double v = to_little_endian(m.data()[i]);
      out.write(reinterpret_cast<const char*>(&v), sizeof v);
    }
    tensors.push_back(json{{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}});
  });
  if (!out) throw std::runtime_error("write failed for " + path.string());

  const json side{{"format_version", kCheckpointVersion},
                  {"config", config_json(c)},
                  {"vocab", vocab.tokens()},
                  {"tensors", tensors}};
  std::ofstream sidecar(sidecar_path(path), std::ios::trunc);
  if (!sidecar) throw std::runtime_error("cannot write " + sidecar_path(path).string());
  sidecar << side.dump(2) << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  char magic[sizeof kCheckpointMagic];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0)
    throw std::runtime_error(path.string() + " is not an encoder checkpoint");
  if (const auto version = read_u32(in); version != kCheckpointVersion)
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));

  EncoderConfig c;
  c.vocab_size = read_u32(in);
  c.d_model = read_u32(in);
  c.n_heads = read_u32(in);
  c.n_layers = read_u32(in);
  c.d_ff = read_u32(in);
  c.max_len = read_u32(in);
  if (read_u32(in) != EncoderConfig::n_classes) throw std::runtime_error("checkpoint is not a binary classifier");

  EncoderParams params = EncoderParams::zeros(c);
  params.for_each([&](const std::string& name, ParamGroup, Matrix& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      double v = 0;
      if (!in.read(reinterpret_cast<char*>(&v), sizeof v))
        throw std::runtime_error("checkpoint truncated in tensor " + name);
      m.data()[i] = to_little_endian(v);
    }
  });
  if (in.peek() != std::char_traits<char>::eof()) throw std::runtime_error("trailing bytes in checkpoint");

  std::ifstream side_in(sidecar_path(path));
  if (!side_in) throw std::runtime_error("missing sidecar " + sidecar_path(path).string());
  const json side = json::parse(side_in);
  if (side.at("config") != config_json(c))
    throw std::runtime_error("sidecar config does not match checkpoint header");
  auto vocab = Vocabulary::from_tokens(side.at("vocab").get<std::vector<std::string>>());
  if (vocab.size() != c.vocab_size) throw std::runtime_error("sidecar vocabulary size mismatch");
  return {std::move(params), std::move(vocab)};
}

}  // namespace sentiment
