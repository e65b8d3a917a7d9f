#pragma once

#include <filesystem>

#include "sentiment/encoder.hpp"
#include "sentiment/vocabulary.hpp"

namespace sentiment {

/// Binary layout (all integers and floats little-endian):
///
///   bytes 0-7   magic "SENTENC\0"
///   u32         format version (1)
///   u32 x 7     vocab_size, d_model, n_heads, n_layers, d_ff, max_len, n_classes
///   f64 ...     every tensor of EncoderParams::for_each order, row-major
///
/// A sidecar "<path>.json" holds the config, the id-ordered vocabulary and the
/// tensor names and shapes.
inline constexpr char kCheckpointMagic[8] = {'S', 'E', 'N', 'T', 'E', 'N', 'C', '\0'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  EncoderParams params;
  Vocabulary vocab;
};

void save_checkpoint(const std::filesystem::path& path, const EncoderParams& params, const Vocabulary& vocab);
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::filesystem::path sidecar_path(const std::filesystem::path& checkpoint);

}  // namespace sentiment
