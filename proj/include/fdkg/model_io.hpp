#pragma once

#include <filesystem>

#include "fdkg/features.hpp"
#include "fdkg/neuralnet.hpp"

// FDKG-NN model files: magic "FDKG-NN", u32 version, u32 layer count, u32 dims
// (layer count + 1 entries), then per layer the row-major weights followed by
// the biases, then the input normalizer's col_min and col_max. All numbers are
// little-endian; reals are f64. The output layer is always a sigmoid.
namespace fdkg::model_io {

inline constexpr std::uint32_t kModelFormatVersion = 1;

struct StoredModel {
  nn::Network network;
  features::Normalizer normalizer;  // applied to raw inputs before forward
};

/// Throws ConfigError for a linear-output network or a normalizer whose
/// dimension differs from the input layer.
void save_model(const nn::Network& net, const features::Normalizer& normalizer,
                const std::filesystem::path& path);

/// Throws FormatError on bad magic, unknown version or a truncated file.
StoredModel load_model(const std::filesystem::path& path);

/// Size in bytes of the file save_model writes for these dimensions.
std::uintmax_t model_file_size(std::span<const std::size_t> dims);

}  // namespace fdkg::model_io
