#ifndef SMATTACK_RASTER_HPP
#define SMATTACK_RASTER_HPP

#include <cmath>
#include <cstdint>
#include <vector>

#include "smattack/fragments.hpp"
#include "smattack/layout.hpp"

namespace smattack {

/// Square bit-plane raster of the split layout around one virtual pin.
/// Pixel value bits: bit (m + l - 1) marks the centered fragment's geometry
/// in metal layer l, bit (l - 1) marks everybody else's.
///
/// Pixel (i, j) covers the half-open region
///   [cx + (i - h) * s, cx + (i - h + 1) * s) x [cy + (j - h) * s, ...)
/// with h = size / 2 and s the pixel pitch in database units, so the pin
/// sits in pixel (h, h) and pixel grids of 2x scales nest exactly.
struct LayoutImage {
  int size = 99;
  double scale_um = 0.05;
  std::int64_t pixel_dbu = 50;
  Point center;
  std::vector<std::uint32_t> px;  // row-major, px[j * size + i]

  std::uint32_t at(int i, int j) const { return px[static_cast<std::size_t>(j) * size + i]; }
  std::uint32_t& at(int i, int j) { return px[static_cast<std::size_t>(j) * size + i]; }
};

struct ImageStack {
  std::vector<LayoutImage> images;  // one per scale, same center
};

struct RasterConfig {
  int image_px = 99;
  std::vector<double> scales_um = {0.05, 0.1, 0.2};
};

namespace detail {

inline std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b, r = a % b;
  return (r != 0 && (r < 0) != (b < 0)) ? q - 1 : q;
}

}  // namespace detail

inline LayoutImage rasterize(Point center, int own_fragment, const SplitLayout& layout,
                             const FragmentSet& frags, double scale_um, int image_px) {
  if (scale_um <= 0) throw InputError("rasterize: scale must be positive");
  LayoutImage img;
  img.size = image_px;
  img.scale_um = scale_um;
  img.pixel_dbu = std::llround(scale_um * static_cast<double>(layout.tech.dbu_per_micron));
  if (img.pixel_dbu <= 0) throw InputError("rasterize: pixel pitch below one dbu");
  img.center = center;
  img.px.assign(static_cast<std::size_t>(image_px) * image_px, 0);

  const int h = image_px / 2;
  const std::int64_t s = img.pixel_dbu;
  auto col_of = [&](std::int64_t x) { return detail::floor_div(x - center.x, s) + h; };
  auto row_of = [&](std::int64_t y) { return detail::floor_div(y - center.y, s) + h; };

  const int m = layout.split_layer;
  auto mark = [&](std::int64_t x0, std::int64_t x1, std::int64_t y0, std::int64_t y1,
                  int layer, bool own) {
    if (layer < 1 || layer > m) return;
    const std::uint32_t bit = std::uint32_t{1} << (own ? m + layer - 1 : layer - 1);
    int i0 = static_cast<int>(std::max<std::int64_t>(col_of(x0), 0));
    int i1 = static_cast<int>(std::min<std::int64_t>(col_of(x1), image_px - 1));
    int j0 = static_cast<int>(std::max<std::int64_t>(row_of(y0), 0));
    int j1 = static_cast<int>(std::min<std::int64_t>(row_of(y1), image_px - 1));
    for (int j = j0; j <= j1; ++j)
      for (int i = i0; i <= i1; ++i) img.at(i, j) |= bit;
  };

  for (std::size_t wi = 0; wi < layout.wires.size(); ++wi) {
    const Wire& w = layout.wires[wi];
    const bool own = frags.wire_owner[wi] == own_fragment;
    mark(w.seg.a.x, w.seg.b.x, w.seg.a.y, w.seg.b.y, w.layer, own);
  }
  for (std::size_t vi = 0; vi < layout.vias.size(); ++vi) {
    const ViaInst& v = layout.vias[vi];
    const bool own = frags.via_owner[vi] == own_fragment;
    mark(v.at.x, v.at.x, v.at.y, v.at.y, v.cut, own);      // lower layer bit
    mark(v.at.x, v.at.x, v.at.y, v.at.y, v.cut + 1, own);  // upper layer bit
  }
  return img;
}

inline ImageStack rasterize_stack(const VirtualPin& vpin, const SplitLayout& layout,
                                  const FragmentSet& frags, const RasterConfig& cfg) {
  ImageStack stack;
  const int own = frags.vpin_owner[vpin.id];
  for (double s : cfg.scales_um)
    stack.images.push_back(rasterize(vpin.loc, own, layout, frags, s, cfg.image_px));
  return stack;
}

/// Expands packed layer bits into 0/1 planes, channel index
/// scale * 2m + bit, for network input.
template <class Real>
void stack_to_planes(const ImageStack& stack, int m, std::vector<Real>& out) {
  const int planes_per_scale = 2 * m;
  out.clear();
  for (const LayoutImage& img : stack.images) {
    for (int b = 0; b < planes_per_scale; ++b) {
      const std::uint32_t bit = std::uint32_t{1} << b;
      for (std::uint32_t v : img.px) out.push_back((v & bit) ? Real(1) : Real(0));
    }
  }
}

}  // namespace smattack

#endif
