#include "fdkg/model_io.hpp"

#include <fstream>

#include "binary_io.hpp"
#include "fdkg/error.hpp"

namespace fdkg::model_io {

namespace {

constexpr std::string_view kModelMagic = "FDKG-NN";

}  // namespace

void save_model(const nn::Network& net, const features::Normalizer& normalizer,
                const std::filesystem::path& path) {
  if (net.layer_count() == 0) throw ConfigError("save_model: empty network");
  if (net.output_activation() != nn::OutputActivation::Sigmoid) {
    throw ConfigError("save_model: only sigmoid-output networks can be stored");
  }
  if (normalizer.dim() != net.input_dim()) throw ConfigError("save_model: normalizer dimension mismatch");

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  detail::write_magic(out, kModelMagic);
  detail::write_le<std::uint32_t>(out, kModelFormatVersion);
  detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(net.layer_count()));
  for (std::size_t d : net.dims()) detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(d));
  // The flat parameter vector already holds W (row-major) then b per layer.
  for (double v : net.parameters()) detail::write_f64(out, v);
  for (double v : normalizer.col_min()) detail::write_f64(out, v);
  for (double v : normalizer.col_max()) detail::write_f64(out, v);
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

StoredModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  detail::expect_magic(in, kModelMagic);
  const auto version = detail::read_le<std::uint32_t>(in);
  if (version != kModelFormatVersion) throw FormatError("unsupported model version " + std::to_string(version));
  const auto layers = detail::read_le<std::uint32_t>(in);
  if (layers == 0 || layers > 1024) throw FormatError("implausible layer count");
  std::vector<std::size_t> dims(layers + 1);
  for (std::size_t& d : dims) {
    d = detail::read_le<std::uint32_t>(in);
    if (d == 0) throw FormatError("zero layer width");
  }
  const auto expected = model_file_size(dims);
  std::error_code ec;
  const auto actual = std::filesystem::file_size(path, ec);
  if (!ec && actual < expected) throw FormatError("truncated model file");

  nn::Network net(dims, nn::OutputActivation::Sigmoid);
  for (double& v : net.parameters()) v = detail::read_f64(in);
  std::vector<double> col_min(dims.front());
  std::vector<double> col_max(dims.front());
  for (double& v : col_min) v = detail::read_f64(in);
  for (double& v : col_max) v = detail::read_f64(in);
  return {std::move(net), features::Normalizer(std::move(col_min), std::move(col_max))};
}

std::uintmax_t model_file_size(std::span<const std::size_t> dims) {
  std::uintmax_t reals = 0;
  for (std::size_t m = 0; m + 1 < dims.size(); ++m) reals += dims[m + 1] * (dims[m] + 1);
  reals += 2 * dims.front();
  return kModelMagic.size() + 4 + 4 + 4 * dims.size() + 8 * reals;
}

}  // namespace fdkg::model_io
