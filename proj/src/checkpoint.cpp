#include "ggtvae/checkpoint.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

namespace ggtvae {

namespace {

std::uint64_t to_le_bits(double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof(bits));
  if constexpr (std::endian::native == std::endian::big) {
    std::uint64_t r = 0;
    for (int i = 0; i < 8; ++i) r = (r << 8) | ((bits >> (8 * i)) & 0xff);
    bits = r;
  }
  return bits;
}

double from_le_bits(std::uint64_t bits) {
  if constexpr (std::endian::native == std::endian::big) {
    std::uint64_t r = 0;
    for (int i = 0; i < 8; ++i) r = (r << 8) | ((bits >> (8 * i)) & 0xff);
    bits = r;
  }
  double v;
  std::memcpy(&v, &bits, sizeof(v));
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelParams& params,
                     const CheckpointMeta& meta) {
  const auto named = params.named_parameters();
  nlohmann::json header;
  header["config"] = {
      {"layers", meta.config.layers},   {"heads", meta.config.heads},
      {"d_hid", meta.config.d_hid},     {"d_z", meta.config.d_z},
      {"pe_dim", meta.config.pe_dim},   {"ffn_mult", meta.config.ffn_mult},
      {"beta", meta.config.beta},       {"d_node", meta.d_node},
  };
  header["epoch"] = meta.epoch;
  header["seed"] = meta.seed;
  header["graph_hash"] = meta.graph_hash;
  header["metrics"] = {
      {"val_auc", meta.val_auc},
      {"val_ap", meta.val_ap},
      {"test_auc", meta.test_auc},
      {"test_ap", meta.test_ap},
  };
  nlohmann::json manifest = nlohmann::json::array();
  for (const auto& [name, t] : named) {
    manifest.push_back(
        {{"name", name}, {"rows", t.rows()}, {"cols", t.cols()}});
  }
  header["params"] = manifest;

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << header.dump() << '\n';
  for (const auto& [name, t] : named) {
    (void)name;
    for (double v : t.values()) {
      const std::uint64_t bits = to_le_bits(v);
      out.write(reinterpret_cast<const char*>(&bits), sizeof(bits));
    }
  }
  if (!out) throw IoError("write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path + ": missing header");

  Checkpoint ckpt;
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
    const auto& cfg = header.at("config");
    ckpt.meta.config.layers = cfg.at("layers").get<int>();
    ckpt.meta.config.heads = cfg.at("heads").get<int>();
    ckpt.meta.config.d_hid = cfg.at("d_hid").get<int>();
    ckpt.meta.config.d_z = cfg.at("d_z").get<int>();
    ckpt.meta.config.pe_dim = cfg.at("pe_dim").get<int>();
    ckpt.meta.config.ffn_mult = cfg.at("ffn_mult").get<int>();
    ckpt.meta.config.beta = cfg.at("beta").get<double>();
    ckpt.meta.d_node = cfg.at("d_node").get<int>();
    ckpt.meta.epoch = header.at("epoch").get<int>();
    ckpt.meta.seed = header.at("seed").get<std::uint64_t>();
    ckpt.meta.graph_hash = header.at("graph_hash").get<std::string>();
    const auto& m = header.at("metrics");
    ckpt.meta.val_auc = m.at("val_auc").get<double>();
    ckpt.meta.val_ap = m.at("val_ap").get<double>();
    ckpt.meta.test_auc = m.at("test_auc").get<double>();
    ckpt.meta.test_ap = m.at("test_ap").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": bad header: " + e.what());
  }

  ckpt.params = ModelParams::init(ckpt.meta.config, ckpt.meta.d_node, 0);
  const auto named = ckpt.params.named_parameters();
  const auto& manifest = header.at("params");
  if (!manifest.is_array() || manifest.size() != named.size())
    throw ParseError(path + ": parameter manifest size mismatch");
  for (std::size_t i = 0; i < named.size(); ++i) {
    const auto& entry = manifest[i];
    if (entry.at("name").get<std::string>() != named[i].first ||
        entry.at("rows").get<std::size_t>() != named[i].second.rows() ||
        entry.at("cols").get<std::size_t>() != named[i].second.cols())
      throw ParseError(path + ": manifest mismatch at " + named[i].first);
  }

  for (const auto& [name, t] : named) {
    Tensor tensor = t;
    auto tv = tensor.values();
    for (double& v : tv) {
      std::uint64_t bits;
      in.read(reinterpret_cast<char*>(&bits), sizeof(bits));
      if (!in)
        throw ParseError(path + ": blob truncated in parameter " + name);
      v = from_le_bits(bits);
      if (!std::isfinite(v))
        throw ParseError(path + ": non-finite value in parameter " + name);
    }
  }
  char extra;
  in.read(&extra, 1);
  if (!in.eof()) throw ParseError(path + ": trailing bytes after blob");
  return ckpt;
}

}  // namespace ggtvae
