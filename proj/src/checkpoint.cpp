#include "metabandit/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "json.hpp"
#include "metabandit/errors.hpp"

namespace metabandit::checkpoint {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::uint64_t to_little(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::little) return v;
  std::uint64_t r = 0;
  for (int k = 0; k < 8; ++k) r |= ((v >> (8 * k)) & 0xffu) << (8 * (7 - k));
  return r;
}

json dims_json(const nn::NetDims& d) {
  return {{"input_dim", d.input_dim}, {"hidden_dim", d.hidden_dim}, {"action_dim", d.action_dim}};
}

}  // namespace

void write_f64_blob(const fs::path& file, const double* data, std::size_t count) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write " + file.string());
  for (std::size_t k = 0; k < count; ++k) {
    const std::uint64_t bits = to_little(std::bit_cast<std::uint64_t>(data[k]));
    out.write(reinterpret_cast<const char*>(&bits), sizeof bits);
  }
  if (!out) throw FormatError("short write to " + file.string());
}

std::vector<double> read_f64_blob(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw FormatError("cannot read " + file.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() % 8 != 0) throw FormatError(file.string() + " is not a float64 blob");
  std::vector<double> values(bytes.size() / 8);
  for (std::size_t k = 0; k < values.size(); ++k) {
    std::uint64_t bits = 0;
    std::memcpy(&bits, bytes.data() + 8 * k, 8);
    values[k] = std::bit_cast<double>(to_little(bits));
  }
  return values;
}

void save(const fs::path& dir, const Checkpoint& ckpt) {
  fs::create_directories(dir);
  const nn::NetDims& dims = ckpt.params.dims();

  json tensors = json::array();
  for (const auto& t : nn::param_layout(dims))
    tensors.push_back({{"name", t.name}, {"shape", {t.rows, t.cols}}, {"offset", t.offset}});

  json manifest = {
      {"format", "metabandit-checkpoint"},
      {"format_version", kFormatVersion},
      {"gate_layout", nn::kGateLayout},
      {"dims", dims_json(dims)},
      {"dtype", "float64"},
      {"byte_order", "little"},
      {"storage", "column-major"},
      {"param_count", ckpt.params.flat().size()},
      {"tensors", tensors},
      {"blob", kParamsBlobName},
      {"episodes_seen", ckpt.episodes_seen},
      {"updates", ckpt.updates},
      {"schedule", {{"beta_e", ckpt.beta_e}, {"gamma", ckpt.gamma}}},
      {"config", ckpt.config},
  };
  write_f64_blob(dir / kParamsBlobName, ckpt.params.flat().data(), ckpt.params.flat().size());

  if (ckpt.optimizer) {
    const auto& o = *ckpt.optimizer;
    manifest["optimizer"] = {
        {"kind", "adam"},       {"lr", o.config.lr},
        {"beta1", o.config.beta1}, {"beta2", o.config.beta2},
        {"eps", o.config.eps},  {"weight_decay", o.config.weight_decay},
        {"grad_clip", o.config.grad_clip}, {"step", o.step},
        {"blob", kOptimizerBlobName},
    };
    std::vector<double> moments(o.m.data(), o.m.data() + o.m.size());
    moments.insert(moments.end(), o.v.data(), o.v.data() + o.v.size());
    write_f64_blob(dir / kOptimizerBlobName, moments.data(), moments.size());
  } else {
    fs::remove(dir / kOptimizerBlobName);
  }

  std::ofstream out(dir / kManifestName, std::ios::trunc);
  if (!out) throw FormatError("cannot write manifest in " + dir.string());
  out << manifest.dump(2) << '\n';
}

Checkpoint load(const fs::path& dir) {
  std::ifstream in(dir / kManifestName);
  if (!in) throw FormatError("no checkpoint manifest in " + dir.string());
  json manifest;
  try {
    manifest = json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError("unreadable checkpoint manifest: " + std::string(e.what()));
  }

  try {
    if (manifest.value("format", "") != "metabandit-checkpoint") throw FormatError("not a metabandit checkpoint");
    const int version = manifest.at("format_version").get<int>();
    if (version != kFormatVersion)
      throw FormatError("checkpoint format version " + std::to_string(version) + " unsupported (expected " +
                        std::to_string(kFormatVersion) + ")");
    if (manifest.at("gate_layout").get<std::string>() != nn::kGateLayout)
      throw FormatError("checkpoint gate layout " + manifest.at("gate_layout").get<std::string>() +
                        " does not match " + nn::kGateLayout);

    const auto& d = manifest.at("dims");
    nn::NetDims dims{d.at("input_dim").get<int>(), d.at("hidden_dim").get<int>(), d.at("action_dim").get<int>()};
    Checkpoint ckpt;
    ckpt.params = nn::NetParams(dims);

    const auto values = read_f64_blob(dir / manifest.value("blob", kParamsBlobName));
    if (values.size() != static_cast<std::size_t>(ckpt.params.flat().size()))
      throw FormatError("parameter blob has " + std::to_string(values.size()) + " values, manifest expects " +
                        std::to_string(ckpt.params.flat().size()));
    std::copy(values.begin(), values.end(), ckpt.params.flat().data());

    ckpt.episodes_seen = manifest.value("episodes_seen", 0LL);
    ckpt.updates = manifest.value("updates", 0LL);
    if (manifest.contains("schedule")) {
      ckpt.beta_e = manifest["schedule"].value("beta_e", 0.0);
      ckpt.gamma = manifest["schedule"].value("gamma", 0.0);
    }
    if (manifest.contains("config")) ckpt.config = manifest["config"].get<std::map<std::string, std::string>>();

    if (manifest.contains("optimizer")) {
      const auto& o = manifest["optimizer"];
      nn::AdamConfig cfg{o.at("lr").get<double>(),           o.at("beta1").get<double>(),
                         o.at("beta2").get<double>(),        o.at("eps").get<double>(),
                         o.at("weight_decay").get<double>(), o.at("grad_clip").get<double>()};
      nn::OptimizerState state(cfg, values.size());
      state.step = o.at("step").get<long long>();
      const auto moments = read_f64_blob(dir / o.value("blob", kOptimizerBlobName));
      if (moments.size() != 2 * values.size()) throw FormatError("optimizer blob size mismatch");
      std::copy(moments.begin(), moments.begin() + values.size(), state.m.data());
      std::copy(moments.begin() + values.size(), moments.end(), state.v.data());
      ckpt.optimizer = std::move(state);
    }
    return ckpt;
  } catch (const json::exception& e) {
    throw FormatError("malformed checkpoint manifest: " + std::string(e.what()));
  }
}

}  // namespace metabandit::checkpoint
