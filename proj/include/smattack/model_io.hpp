#ifndef SMATTACK_MODEL_IO_HPP
#define SMATTACK_MODEL_IO_HPP

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "smattack/features.hpp"
#include "smattack/nn.hpp"

namespace smattack {

// Model file layout:
//   bytes 0..3   magic "SMDL"
//   bytes 4..7   format version, u32 little-endian
//   bytes 8..15  header length, u64 little-endian
//   header       JSON: network config, feature ledger, raster scales,
//                candidate capacity, normalization stats, loss mode
//   payload      all parameter tensors as little-endian fp32, visit order

inline constexpr char kModelMagic[4] = {'S', 'M', 'D', 'L'};
inline constexpr std::uint32_t kModelVersion = 1;

/// Everything needed to run the attack with a trained model.
struct ModelBundle {
  NetworkConfig config;
  NormalizationStats stats;
  std::vector<double> scales_um = {0.05, 0.1, 0.2};
  int candidates_n = 31;
  std::vector<std::string> ledger;
};

namespace model_detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_f32(std::string& out, float v) {
  static_assert(sizeof(float) == 4);
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(out, bits);
}

struct Reader {
  const std::string& buf;
  std::size_t pos = 0;

  void need(std::size_t n) const {
    if (pos + n > buf.size()) throw InputError("model file truncated");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
    pos += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
    pos += 8;
    return v;
  }
  float f32() {
    const std::uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
};

inline nlohmann::json config_json(const NetworkConfig& c) {
  return {{"feature_len", c.feature_len},
          {"m", c.m},
          {"num_scales", c.num_scales},
          {"image_px", c.image_px},
          {"conv_channels", c.conv_channels},
          {"conv_per_group", c.conv_per_group},
          {"vec_width", c.vec_width},
          {"vec_blocks", c.vec_blocks},
          {"fc3_out", c.fc3_out},
          {"embed", c.embed},
          {"merge_width", c.merge_width},
          {"merge_blocks", c.merge_blocks},
          {"fc6_out", c.fc6_out},
          {"two_class", c.two_class}};
}

inline NetworkConfig config_from_json(const nlohmann::json& j) {
  NetworkConfig c;
  try {
    c.feature_len = j.at("feature_len").get<int>();
    c.m = j.at("m").get<int>();
    c.num_scales = j.at("num_scales").get<int>();
    c.image_px = j.at("image_px").get<int>();
    auto ch = j.at("conv_channels").get<std::vector<int>>();
    if (ch.size() != 4) throw InputError("model header: conv_channels must have 4 entries");
    std::copy(ch.begin(), ch.end(), c.conv_channels.begin());
    c.conv_per_group = j.at("conv_per_group").get<int>();
    c.vec_width = j.at("vec_width").get<int>();
    c.vec_blocks = j.at("vec_blocks").get<int>();
    c.fc3_out = j.at("fc3_out").get<int>();
    c.embed = j.at("embed").get<int>();
    c.merge_width = j.at("merge_width").get<int>();
    c.merge_blocks = j.at("merge_blocks").get<int>();
    c.fc6_out = j.at("fc6_out").get<int>();
    c.two_class = j.at("two_class").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("model header: ") + e.what());
  }
  return c;
}

}  // namespace model_detail

inline std::string serialize_model(Network<float>& net, const ModelBundle& bundle) {
  nlohmann::json header = {
      {"config", model_detail::config_json(bundle.config)},
      {"feature_ledger", bundle.ledger},
      {"scales_um", bundle.scales_um},
      {"candidates_n", bundle.candidates_n},
      {"normalization", {{"mean", bundle.stats.mean}, {"std_dev", bundle.stats.std_dev}}},
      {"loss", bundle.config.two_class ? "two_class" : "softmax"}};
  const std::string hdr = header.dump();

  std::string out(kModelMagic, 4);
  model_detail::put_u32(out, kModelVersion);
  model_detail::put_u64(out, hdr.size());
  out += hdr;
  net.params().visit([&](const std::string&, std::vector<float>& t) {
    for (float v : t) model_detail::put_f32(out, v);
  });
  return out;
}

inline void save_model(const std::string& path, Network<float>& net,
                       const ModelBundle& bundle) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot open model file for writing: " + path);
  const std::string bytes = serialize_model(net, bundle);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw InputError("failed writing model file: " + path);
}

struct LoadedModel {
  Network<float> net;
  ModelBundle bundle;
};

inline LoadedModel deserialize_model(const std::string& bytes) {
  model_detail::Reader r{bytes};
  r.need(4);
  if (std::memcmp(bytes.data(), kModelMagic, 4) != 0)
    throw InputError("not a model file (bad magic)");
  r.pos = 4;
  const std::uint32_t version = r.u32();
  if (version != kModelVersion)
    throw InputError("unsupported model version " + std::to_string(version));
  const std::uint64_t hlen = r.u64();
  r.need(hlen);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(r.pos, hlen));
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("model header is not valid JSON: ") + e.what());
  }
  r.pos += hlen;

  ModelBundle bundle;
  try {
    bundle.config = model_detail::config_from_json(header.at("config"));
    bundle.ledger = header.at("feature_ledger").get<std::vector<std::string>>();
    bundle.scales_um = header.at("scales_um").get<std::vector<double>>();
    bundle.candidates_n = header.at("candidates_n").get<int>();
    bundle.stats.mean = header.at("normalization").at("mean").get<std::vector<double>>();
    bundle.stats.std_dev =
        header.at("normalization").at("std_dev").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("model header: ") + e.what());
  }

  LoadedModel lm{Network<float>(bundle.config), std::move(bundle)};
  std::size_t expected = 0;
  lm.net.params().visit(
      [&](const std::string&, std::vector<float>& t) { expected += t.size(); });
  const std::size_t remaining = bytes.size() - r.pos;
  if (remaining != expected * 4)
    throw InputError("model payload size mismatch: have " + std::to_string(remaining) +
                     " bytes, config needs " + std::to_string(expected * 4));
  lm.net.params().visit([&](const std::string&, std::vector<float>& t) {
    for (float& v : t) v = r.f32();
  });
  return lm;
}

inline LoadedModel load_model(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot open model file: " + path);
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return deserialize_model(bytes);
}

}  // namespace smattack

#endif
