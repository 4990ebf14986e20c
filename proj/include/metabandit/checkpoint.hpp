#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include "metabandit/nn.hpp"

namespace metabandit::checkpoint {

inline constexpr int kFormatVersion = 1;
inline constexpr const char* kManifestName = "manifest.json";
inline constexpr const char* kParamsBlobName = "params.bin";
inline constexpr const char* kOptimizerBlobName = "optimizer.bin";

/// A checkpoint directory holds manifest.json plus params.bin, a raw
/// little-endian float64 blob of NetParams::flat() in the manifest's tensor
/// order (each tensor column-major). optimizer.bin, when present, holds the
/// Adam first moments followed by the second moments in the same order.
struct Checkpoint {
  nn::NetParams params;
  std::optional<nn::OptimizerState> optimizer;
  long long episodes_seen = 0;
  long long updates = 0;
  double beta_e = 0.0;
  double gamma = 0.0;
  std::map<std::string, std::string> config;  ///< resolved run configuration
};

void save(const std::filesystem::path& dir, const Checkpoint& ckpt);

/// Throws FormatError on a missing file, a version or layout mismatch, or a
/// blob whose size disagrees with the manifest.
Checkpoint load(const std::filesystem::path& dir);

/// Little-endian float64 blob helpers, shared with other artifact writers.
void write_f64_blob(const std::filesystem::path& file, const double* data, std::size_t count);
std::vector<double> read_f64_blob(const std::filesystem::path& file);

}  // namespace metabandit::checkpoint
