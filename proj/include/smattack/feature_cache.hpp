#ifndef SMATTACK_FEATURE_CACHE_HPP
#define SMATTACK_FEATURE_CACHE_HPP

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "smattack/model_io.hpp"

namespace smattack {

// Feature cache layout, written by `extract` and consumed by `train`:
//   magic "SFEA", u32 version, u64 header length, JSON header
//   (feature_len, m, image_px, scales_um, candidates_n), u32 group count,
//   then per group: candidate records, feature vectors (f64), and the
//   packed image stacks (sink first), all little-endian.

inline constexpr char kCacheMagic[4] = {'S', 'F', 'E', 'A'};
inline constexpr std::uint32_t kCacheVersion = 1;

struct FeatureCache {
  int feature_len = 27;
  int m = 3;
  int image_px = 99;
  std::vector<double> scales_um = {0.05, 0.1, 0.2};
  int candidates_n = 31;
  std::vector<GroupFeatures> groups;
};

namespace cache_detail {

using model_detail::put_u32;
using model_detail::put_u64;

inline void put_i32(std::string& out, std::int32_t v) {
  put_u32(out, static_cast<std::uint32_t>(v));
}
inline void put_i64(std::string& out, std::int64_t v) {
  put_u64(out, static_cast<std::uint64_t>(v));
}
inline void put_f64(std::string& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(out, bits);
}

struct Reader : model_detail::Reader {
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
  double f64() {
    const std::uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(buf[pos++]);
  }
};

inline void put_stack(std::string& out, const ImageStack& s) {
  for (const LayoutImage& img : s.images) {
    put_i64(out, img.center.x);
    put_i64(out, img.center.y);
    put_i64(out, img.pixel_dbu);
    for (std::uint32_t p : img.px) put_u32(out, p);
  }
}

inline ImageStack read_stack(Reader& r, const FeatureCache& c) {
  ImageStack s;
  for (double scale : c.scales_um) {
    LayoutImage img;
    img.size = c.image_px;
    img.scale_um = scale;
    img.center.x = r.i64();
    img.center.y = r.i64();
    img.pixel_dbu = r.i64();
    img.px.resize(static_cast<std::size_t>(c.image_px) * c.image_px);
    for (std::uint32_t& p : img.px) p = r.u32();
    s.images.push_back(std::move(img));
  }
  return s;
}

}  // namespace cache_detail

inline std::string serialize_cache(const FeatureCache& c) {
  nlohmann::json header = {{"feature_len", c.feature_len},
                           {"m", c.m},
                           {"image_px", c.image_px},
                           {"scales_um", c.scales_um},
                           {"candidates_n", c.candidates_n}};
  const std::string hdr = header.dump();
  std::string out(kCacheMagic, 4);
  cache_detail::put_u32(out, kCacheVersion);
  cache_detail::put_u64(out, hdr.size());
  out += hdr;
  cache_detail::put_u32(out, static_cast<std::uint32_t>(c.groups.size()));
  for (const GroupFeatures& g : c.groups) {
    cache_detail::put_i32(out, g.sink_fragment);
    out.push_back(g.contains_positive ? 1 : 0);
    cache_detail::put_u32(out, static_cast<std::uint32_t>(g.candidates.size()));
    for (const CandidateVpp& v : g.candidates) {
      cache_detail::put_i32(out, v.sink_vpin);
      cache_detail::put_i32(out, v.source_vpin);
      cache_detail::put_i32(out, v.sink_fragment);
      cache_detail::put_i32(out, v.source_fragment);
      cache_detail::put_i64(out, v.nonpref_dbu);
      cache_detail::put_i64(out, v.pref_dbu);
      cache_detail::put_f64(out, v.distance_nonpref);
      cache_detail::put_f64(out, v.distance_pref);
      out.push_back(v.label == Label::positive ? 0 : (v.label == Label::negative ? 1 : 2));
    }
    for (const VectorFeatures& v : g.vectors) {
      if (static_cast<int>(v.values.size()) != c.feature_len)
        throw InternalError("feature cache: vector width mismatch");
      for (double x : v.values) cache_detail::put_f64(out, x);
    }
    if (!g.candidates.empty()) {
      cache_detail::put_stack(out, g.sink_stack);
      for (const ImageStack& s : g.source_stacks) cache_detail::put_stack(out, s);
    }
  }
  return out;
}

inline FeatureCache deserialize_cache(const std::string& bytes) {
  cache_detail::Reader r{{bytes}};
  r.need(4);
  if (std::memcmp(bytes.data(), kCacheMagic, 4) != 0)
    throw InputError("not a feature cache file (bad magic)");
  r.pos = 4;
  const std::uint32_t version = r.u32();
  if (version != kCacheVersion)
    throw InputError("unsupported feature cache version " + std::to_string(version));
  const std::uint64_t hlen = r.u64();
  r.need(hlen);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(r.pos, hlen));
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("feature cache header is not valid JSON: ") + e.what());
  }
  r.pos += hlen;

  FeatureCache c;
  try {
    c.feature_len = header.at("feature_len").get<int>();
    c.m = header.at("m").get<int>();
    c.image_px = header.at("image_px").get<int>();
    c.scales_um = header.at("scales_um").get<std::vector<double>>();
    c.candidates_n = header.at("candidates_n").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("feature cache header: ") + e.what());
  }

  const std::uint32_t group_count = r.u32();
  c.groups.resize(group_count);
  for (GroupFeatures& g : c.groups) {
    g.capacity = c.candidates_n;
    g.sink_fragment = r.i32();
    g.contains_positive = r.u8() != 0;
    const std::uint32_t n = r.u32();
    g.candidates.resize(n);
    for (CandidateVpp& v : g.candidates) {
      v.sink_vpin = r.i32();
      v.source_vpin = r.i32();
      v.sink_fragment = r.i32();
      v.source_fragment = r.i32();
      v.nonpref_dbu = r.i64();
      v.pref_dbu = r.i64();
      v.distance_nonpref = r.f64();
      v.distance_pref = r.f64();
      const std::uint8_t lb = r.u8();
      if (lb > 2) throw InputError("feature cache: bad candidate label");
      v.label = lb == 0 ? Label::positive : (lb == 1 ? Label::negative : Label::unknown);
    }
    g.vectors.resize(n);
    for (VectorFeatures& v : g.vectors) {
      v.values.resize(c.feature_len);
      for (double& x : v.values) x = r.f64();
    }
    if (n > 0) {
      g.sink_stack = cache_detail::read_stack(r, c);
      g.source_stacks.resize(n);
      for (ImageStack& s : g.source_stacks) s = cache_detail::read_stack(r, c);
    }
  }
  if (r.pos != bytes.size()) throw InputError("feature cache: trailing bytes");
  return c;
}

inline void save_cache(const std::string& path, const FeatureCache& c) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot open feature cache for writing: " + path);
  const std::string bytes = serialize_cache(c);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw InputError("failed writing feature cache: " + path);
}

inline FeatureCache load_cache(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot open feature cache: " + path);
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return deserialize_cache(bytes);
}

}  // namespace smattack

#endif
