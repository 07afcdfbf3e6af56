#pragma once

// Progressive coding of hierarchy coefficients: the edge tree is laid out as
// an image quadtree and coded bitplane by bitplane with a set-partitioning
// zerotree coder.
//
// Layout. With g = ceil(E0/3), the root block is a x b with a = ceil(sqrt(g)),
// b = ceil(g/a). Level j occupies the L-shaped band
//   [0, 2a*2^j) x [0, 2b*2^j)  minus  [0, a*2^j) x [0, b*2^j)
// so the image is (a*2^J) x (b*2^J). Base edge t sits in root cell
// (t/3/b, t/3%b) at the right (t%3==0), below (1) or diagonal (2) offset.
// The child in slot k of the pixel (r, c) is (2r + k/2, 2c + k%2). Root-block
// pixels hold the mean of their right, lower and diagonal partners.

#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "bwr/binary_io.hpp"
#include "bwr/error.hpp"
#include "bwr/hierarchy.hpp"
#include "bwr/metrics.hpp"
#include "bwr/subdivision.hpp"

namespace bwr {

// ---------------------------------------------------------------------------
// Layout

class CoefficientLayout {
 public:
  static constexpr std::int64_t kFiller = -1;

  CoefficientLayout(const TriangleMesh& base, std::size_t levels) : base_edges_(base.edge_count()), levels_(levels) {
    const std::size_t groups = (base_edges_ + 2) / 3;
    block_rows_ = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(groups))));
    while (block_rows_ * block_rows_ < groups) ++block_rows_;
    while (block_rows_ > 1 && (block_rows_ - 1) * (block_rows_ - 1) >= groups) --block_rows_;
    if (block_rows_ == 0) block_rows_ = 1;
    block_cols_ = std::max<std::size_t>(1, (groups + block_rows_ - 1) / block_rows_);
    height_ = block_rows_ << levels_;
    width_ = block_cols_ << levels_;

    level_offset_.assign(levels_ + 1, 0);
    for (std::size_t j = 0; j < levels_; ++j) level_offset_[j + 1] = level_offset_[j] + (base_edges_ << (2 * j));
    position_.resize(level_offset_[levels_]);
    slot_.assign(height_ * width_, kFiller);

    // Tree position of each canonical edge, level by level.
    std::vector<std::uint64_t> tree(base_edges_);
    for (std::size_t e = 0; e < base_edges_; ++e) tree[e] = e;
    TriangleMesh mesh = base;
    for (std::size_t j = 0; j < levels_; ++j) {
      for (std::size_t e = 0; e < tree.size(); ++e) {
        const std::size_t flat = level_offset_[j] + e;
        const std::size_t pixel = pixel_of(j, tree[e]);
        position_[flat] = pixel;
        slot_[pixel] = static_cast<std::int64_t>(flat);
      }
      if (j + 1 == levels_) break;
      const SubdivisionStep step = midpoint_subdivide(mesh);
      std::vector<std::uint64_t> next(tree.size() * 4);
      for (std::size_t e = 0; e < tree.size(); ++e) {
        const auto& ch = step.child_edges(e);
        for (std::size_t k = 0; k < 4; ++k) next[ch[k]] = 4 * tree[e] + k;
      }
      tree = std::move(next);
      mesh = step.child();
    }
  }

  std::size_t base_edges() const { return base_edges_; }
  std::size_t levels() const { return levels_; }
  std::size_t block_rows() const { return block_rows_; }
  std::size_t block_cols() const { return block_cols_; }
  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t pixel_count() const { return height_ * width_; }
  std::size_t coefficient_count() const { return position_.size(); }
  std::size_t level_offset(std::size_t j) const { return level_offset_[j]; }

  /// Pixel index (row * width + col) of coefficient `edge` at level j.
  std::size_t position(std::size_t j, std::size_t edge) const { return position_[level_offset_[j] + edge]; }
  /// Flat coefficient index stored at a pixel, or kFiller.
  std::int64_t slot(std::size_t pixel) const { return slot_[pixel]; }
  bool is_filler(std::size_t pixel) const { return slot_[pixel] == kFiller; }

  /// -1 for the root block, else the level whose band contains the pixel.
  int pixel_level(std::size_t pixel) const {
    const std::size_t r = pixel / width_, c = pixel % width_;
    if (r < block_rows_ && c < block_cols_) return -1;
    int j = 0;
    while (r >= (2 * block_rows_) << j || c >= (2 * block_cols_) << j) ++j;
    return j;
  }

  /// Children exist for band pixels below the finest level.
  bool has_children(std::size_t pixel) const {
    const int j = pixel_level(pixel);
    return j >= 0 && static_cast<std::size_t>(j) + 1 < levels_;
  }
  std::array<std::size_t, 4> children(std::size_t pixel) const {
    const std::size_t r = pixel / width_, c = pixel % width_;
    return {(2 * r) * width_ + 2 * c, (2 * r) * width_ + 2 * c + 1, (2 * r + 1) * width_ + 2 * c,
            (2 * r + 1) * width_ + 2 * c + 1};
  }

  /// Pixels without a parent: the root block and the level-0 band, row-major.
  std::vector<std::size_t> roots() const {
    std::vector<std::size_t> out;
    const std::size_t rows = levels_ > 0 ? 2 * block_rows_ : block_rows_;
    const std::size_t cols = levels_ > 0 ? 2 * block_cols_ : block_cols_;
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) out.push_back(r * width_ + c);
    return out;
  }

  /// Places per-level arrays into image order (fillers get `fill`).
  template <typename T>
  std::vector<T> scatter(const std::vector<std::vector<T>>& levels, T fill = T{}) const {
    if (levels.size() != levels_) throw IncompatibleError("level count does not match the layout");
    std::vector<T> img(pixel_count(), fill);
    for (std::size_t j = 0; j < levels_; ++j) {
      if (levels[j].size() != (base_edges_ << (2 * j))) throw IncompatibleError("level size does not match the layout");
      for (std::size_t e = 0; e < levels[j].size(); ++e) img[position(j, e)] = levels[j][e];
    }
    return img;
  }

  template <typename T>
  std::vector<std::vector<T>> gather(const std::vector<T>& img) const {
    if (img.size() != pixel_count()) throw IncompatibleError("image size does not match the layout");
    std::vector<std::vector<T>> levels(levels_);
    for (std::size_t j = 0; j < levels_; ++j) {
      levels[j].resize(base_edges_ << (2 * j));
      for (std::size_t e = 0; e < levels[j].size(); ++e) levels[j][e] = img[position(j, e)];
    }
    return levels;
  }

 private:
  std::size_t pixel_of(std::size_t level, std::uint64_t tree_pos) const {
    const std::uint64_t root = tree_pos >> (2 * level);
    const std::uint64_t group = root / 3;
    std::size_t r = group / block_cols_, c = group % block_cols_;
    switch (root % 3) {
      case 0: c += block_cols_; break;
      case 1: r += block_rows_; break;
      default: r += block_rows_; c += block_cols_; break;
    }
    for (std::size_t i = 1; i <= level; ++i) {
      const std::uint64_t k = (tree_pos >> (2 * (level - i))) & 3;
      r = 2 * r + k / 2;
      c = 2 * c + k % 2;
    }
    return r * width_ + c;
  }

  std::size_t base_edges_;
  std::size_t levels_;
  std::size_t block_rows_ = 1;
  std::size_t block_cols_ = 1;
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<std::size_t> level_offset_;
  std::vector<std::size_t> position_;
  std::vector<std::int64_t> slot_;
};

// ---------------------------------------------------------------------------
// Quantization

/// Uniform quantizer step used when none is given: diagonal * 2^-16.
inline double default_quantizer_step(double diagonal) { return std::ldexp(diagonal, -16); }

/// Round-to-nearest (ties to even) of w / step.
inline std::int64_t quantize(double w, double step) {
  if (!(step > 0.0)) throw ValidationError("quantizer step must be positive");
  return static_cast<std::int64_t>(std::nearbyint(w / step));
}
inline double dequantize(std::int64_t q, double step) {
  if (!(step > 0.0)) throw ValidationError("quantizer step must be positive");
  return static_cast<double>(q) * step;
}
inline std::vector<std::int64_t> quantize(const std::vector<double>& w, double step) {
  std::vector<std::int64_t> q(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) q[i] = quantize(w[i], step);
  return q;
}
inline std::vector<double> dequantize(const std::vector<std::int64_t>& q, double step) {
  std::vector<double> w(q.size());
  for (std::size_t i = 0; i < q.size(); ++i) w[i] = dequantize(q[i], step);
  return w;
}

// ---------------------------------------------------------------------------
// Coefficient image

struct CoefficientImage {
  std::shared_ptr<const CoefficientLayout> layout;
  std::vector<std::int64_t> pixels;
  double step = 0.0;

  std::size_t height() const { return layout->height(); }
  std::size_t width() const { return layout->width(); }
  std::int64_t at(std::size_t r, std::size_t c) const { return pixels[r * width() + c]; }
};

namespace detail {

inline std::int64_t rounded_mean(std::int64_t sum, std::int64_t count) {
  return static_cast<std::int64_t>(std::nearbyint(static_cast<double>(sum) / static_cast<double>(count)));
}

}  // namespace detail

/// Band fillers take the mean of the coefficient pixels in their aligned 2x2
/// block (0 when there are none); root-block pixels then take the mean of
/// their right, lower and diagonal partners.
inline void fill_fillers(const CoefficientLayout& layout, std::vector<std::int64_t>& px) {
  const std::size_t w = layout.width();
  for (std::size_t p = 0; p < px.size(); ++p) {
    if (!layout.is_filler(p) || layout.pixel_level(p) < 0) continue;
    const std::size_t r0 = (p / w) & ~std::size_t{1}, c0 = (p % w) & ~std::size_t{1};
    std::int64_t sum = 0, count = 0;
    for (std::size_t dr = 0; dr < 2; ++dr)
      for (std::size_t dc = 0; dc < 2; ++dc) {
        const std::size_t q = (r0 + dr) * w + c0 + dc;
        if (!layout.is_filler(q)) {
          sum += px[q];
          ++count;
        }
      }
    px[p] = count > 0 ? detail::rounded_mean(sum, count) : 0;
  }
  if (layout.levels() == 0) return;
  const std::size_t a = layout.block_rows(), b = layout.block_cols();
  for (std::size_t r = 0; r < a; ++r)
    for (std::size_t c = 0; c < b; ++c) {
      const std::int64_t sum = px[r * w + c + b] + px[(r + a) * w + c] + px[(r + a) * w + c + b];
      px[r * w + c] = detail::rounded_mean(sum, 3);
    }
}

inline CoefficientImage map_to_image(const MultiresHierarchy& h, std::optional<double> step = std::nullopt) {
  CoefficientImage img;
  img.step = step.value_or(default_quantizer_step(h.reference_diagonal > 0 ? h.reference_diagonal : h.base.bbox().diagonal()));
  img.layout = std::make_shared<const CoefficientLayout>(h.base, h.level_count());
  std::vector<std::vector<std::int64_t>> q;
  for (const auto& lv : h.levels) q.push_back(quantize(lv.w, img.step));
  img.pixels = img.layout->scatter(q);
  fill_fillers(*img.layout, img.pixels);
  return img;
}

/// Quantized coefficients per level; fillers are dropped.
inline std::vector<std::vector<std::int64_t>> unmap(const CoefficientImage& img) {
  return img.layout->gather(img.pixels);
}

// ---------------------------------------------------------------------------
// Zerotree bitplane coder

namespace detail {

class BitWriter {
 public:
  void put(bool bit) {
    if ((count_ & 7) == 0) bytes_.push_back(0);
    if (bit) bytes_.back() |= static_cast<std::uint8_t>(0x80u >> (count_ & 7));
    ++count_;
  }
  std::uint64_t bit_count() const { return count_; }
  io::Bytes take() { return std::move(bytes_); }

 private:
  io::Bytes bytes_;
  std::uint64_t count_ = 0;
};

struct OutOfBits {};

class BitReader {
 public:
  BitReader(const io::Bytes& bytes, std::uint64_t limit) : bytes_(&bytes), limit_(limit) {}
  bool get() {
    if (pos_ >= limit_) throw OutOfBits{};
    const bool bit = ((*bytes_)[pos_ >> 3] >> (7 - (pos_ & 7))) & 1u;
    ++pos_;
    return bit;
  }
  std::uint64_t consumed() const { return pos_; }

 private:
  const io::Bytes* bytes_;
  std::uint64_t limit_;
  std::uint64_t pos_ = 0;
};

// Encoder side: knows the magnitudes, emits decisions.
class ZerotreeEncoderIo {
 public:
  ZerotreeEncoderIo(const CoefficientLayout& layout, const std::vector<std::int64_t>& px) : layout_(layout), px_(px) {
    const std::size_t n = px.size();
    mag_.resize(n);
    for (std::size_t p = 0; p < n; ++p) mag_[p] = static_cast<std::uint64_t>(px[p] < 0 ? -px[p] : px[p]);
    max_desc_.assign(n, 0);
    max_grand_.assign(n, 0);
    // Finest band first so children are final before their parents.
    for (int j = static_cast<int>(layout.levels()) - 2; j >= 0; --j) {
      for (std::size_t p = 0; p < n; ++p) {
        if (layout.pixel_level(p) != j) continue;
        std::uint64_t d = 0, g = 0;
        for (std::size_t ch : layout.children(p)) {
          d = std::max({d, mag_[ch], max_desc_[ch]});
          g = std::max(g, max_desc_[ch]);
        }
        max_desc_[p] = d;
        max_grand_[p] = g;
      }
    }
  }

  bool pixel(std::size_t p, int n) { return emit(mag_[p] >> n != 0); }
  void sign(std::size_t p) { out_.put(px_[p] < 0); }
  bool descendants(std::size_t p, int n) { return emit(max_desc_[p] >> n != 0); }
  bool grandchildren(std::size_t p, int n) { return emit(max_grand_[p] >> n != 0); }
  void refine(std::size_t p, int n) { out_.put((mag_[p] >> n) & 1u); }

  BitWriter& writer() { return out_; }

 private:
  bool emit(bool bit) {
    out_.put(bit);
    return bit;
  }
  const CoefficientLayout& layout_;
  const std::vector<std::int64_t>& px_;
  std::vector<std::uint64_t> mag_, max_desc_, max_grand_;
  BitWriter out_;
};

// Decoder side: reads decisions, tracks known magnitude bits.
class ZerotreeDecoderIo {
 public:
  ZerotreeDecoderIo(std::size_t pixels, BitReader& in) : in_(in), mag_(pixels, 0), low_(pixels, -1), negative_(pixels, 0) {}

  bool pixel(std::size_t, int n) {
    const bool s = in_.get();
    if (s) pending_ = n;
    return s;
  }
  // A pixel counts as significant only once its sign is known.
  void sign(std::size_t p) {
    negative_[p] = in_.get();
    mag_[p] = std::uint64_t{1} << pending_;
    low_[p] = pending_;
  }
  bool descendants(std::size_t, int) { return in_.get(); }
  bool grandchildren(std::size_t, int) { return in_.get(); }
  void refine(std::size_t p, int n) {
    if (in_.get()) mag_[p] |= std::uint64_t{1} << n;
    low_[p] = n;
  }

  /// Estimate of every pixel from the bits read so far.
  std::vector<double> reconstruction(bool mid_interval) const {
    std::vector<double> out(mag_.size(), 0.0);
    for (std::size_t p = 0; p < out.size(); ++p) {
      if (low_[p] < 0) continue;
      double v = static_cast<double>(mag_[p]);
      if (mid_interval) v += (std::ldexp(1.0, low_[p]) - 1.0) / 2.0;
      out[p] = negative_[p] ? -v : v;
    }
    return out;
  }

 private:
  BitReader& in_;
  std::vector<std::uint64_t> mag_;
  std::vector<int> low_;
  std::vector<char> negative_;
  int pending_ = 0;
};

// Set-partitioning pass structure shared by encoder and decoder.
template <typename Io>
void run_zerotree(const CoefficientLayout& layout, int planes, Io& io) {
  struct SetEntry {
    std::size_t pixel;
    bool grand;  // true: L(p) = descendants minus children; false: D(p)
    bool live;
  };
  std::vector<std::size_t> lip = layout.roots();
  std::vector<std::size_t> lsp;
  std::vector<SetEntry> lis;
  for (std::size_t p : lip)
    if (layout.has_children(p)) lis.push_back({p, false, true});

  for (int n = planes - 1; n >= 0; --n) {
    const std::size_t refine_count = lsp.size();

    std::vector<std::size_t> still;
    still.reserve(lip.size());
    for (std::size_t p : lip) {
      if (io.pixel(p, n)) {
        io.sign(p);
        lsp.push_back(p);
      } else {
        still.push_back(p);
      }
    }
    lip = std::move(still);

    for (std::size_t i = 0; i < lis.size(); ++i) {
      const SetEntry entry = lis[i];
      if (!entry.live) continue;
      if (!entry.grand) {
        if (!io.descendants(entry.pixel, n)) continue;
        lis[i].live = false;
        for (std::size_t ch : layout.children(entry.pixel)) {
          if (io.pixel(ch, n)) {
            io.sign(ch);
            lsp.push_back(ch);
          } else {
            lip.push_back(ch);
          }
        }
        bool has_grand = false;
        for (std::size_t ch : layout.children(entry.pixel)) has_grand = has_grand || layout.has_children(ch);
        if (has_grand) lis.push_back({entry.pixel, true, true});
      } else {
        if (!io.grandchildren(entry.pixel, n)) continue;
        lis[i].live = false;
        for (std::size_t ch : layout.children(entry.pixel))
          if (layout.has_children(ch)) lis.push_back({ch, false, true});
      }
    }
    std::erase_if(lis, [](const SetEntry& e) { return !e.live; });

    for (std::size_t i = 0; i < refine_count; ++i) io.refine(lsp[i], n);
  }
}

inline int bitplane_count(const std::vector<std::int64_t>& px) {
  std::uint64_t m = 0;
  for (std::int64_t v : px) m = std::max(m, static_cast<std::uint64_t>(v < 0 ? -v : v));
  return m == 0 ? 1 : static_cast<int>(std::bit_width(m));
}

}  // namespace detail

/// A retry direction that the decoder cannot infer.
struct RetryRecord {
  std::uint32_t level = 0;
  std::uint64_t index = 0;
  DirectionSource source = DirectionSource::RetryMidpointNormal;
  friend bool operator==(const RetryRecord&, const RetryRecord&) = default;
};

struct Bitstream {
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::uint32_t block_rows = 0;
  std::uint32_t block_cols = 0;
  double step = 0.0;
  std::uint32_t levels = 0;
  std::uint64_t base_edges = 0;
  std::uint32_t planes = 0;
  DirectionConfig config;
  double reference_diagonal = 0.0;
  io::Bytes base_mesh;
  std::vector<RetryRecord> retries;
  io::Bytes payload;
  std::uint64_t payload_bits = 0;
};

/// Base mesh block: varint V, varint F, V x 3 f64, zigzag deltas of the
/// flattened face indices.
inline io::Bytes encode_base_mesh(const TriangleMesh& mesh) {
  io::ByteWriter w;
  w.varint(mesh.vertex_count());
  w.varint(mesh.face_count());
  for (const Vec3& p : mesh.vertices()) {
    w.f64(p.x);
    w.f64(p.y);
    w.f64(p.z);
  }
  std::int64_t prev = 0;
  for (const Face& t : mesh.faces())
    for (Index i : t) {
      w.zigzag(static_cast<std::int64_t>(i) - prev);
      prev = i;
    }
  return w.take();
}

inline TriangleMesh decode_base_mesh(const io::Bytes& bytes) {
  io::ByteReader r(bytes);
  const std::uint64_t nv = r.varint(), nf = r.varint();
  if (nv * 24 > r.remaining() || nf > r.remaining()) throw FormatError("base mesh: implausible counts");
  std::vector<Vec3> v(nv);
  for (Vec3& p : v) p = {r.f64(), r.f64(), r.f64()};
  std::vector<Face> f(nf);
  std::int64_t prev = 0;
  for (Face& t : f)
    for (Index& i : t) {
      prev += r.zigzag();
      if (prev < 0 || prev >= static_cast<std::int64_t>(nv)) throw FormatError("base mesh: index out of range");
      i = static_cast<Index>(prev);
    }
  if (r.remaining() != 0) throw FormatError("base mesh: trailing bytes");
  try {
    return {std::move(v), std::move(f)};
  } catch (const ValidationError& e) {
    throw FormatError(std::string("base mesh: ") + e.what());
  }
}

/// Codes the image; header fields describing the hierarchy are left to the
/// caller except for the image geometry.
inline Bitstream encode(const CoefficientImage& image, io::Bytes base_mesh_bytes) {
  Bitstream bs;
  const CoefficientLayout& layout = *image.layout;
  bs.height = static_cast<std::uint32_t>(layout.height());
  bs.width = static_cast<std::uint32_t>(layout.width());
  bs.block_rows = static_cast<std::uint32_t>(layout.block_rows());
  bs.block_cols = static_cast<std::uint32_t>(layout.block_cols());
  bs.step = image.step;
  bs.levels = static_cast<std::uint32_t>(layout.levels());
  bs.base_edges = layout.base_edges();
  bs.planes = static_cast<std::uint32_t>(detail::bitplane_count(image.pixels));
  bs.base_mesh = std::move(base_mesh_bytes);
  detail::ZerotreeEncoderIo io(layout, image.pixels);
  detail::run_zerotree(layout, static_cast<int>(bs.planes), io);
  bs.payload_bits = io.writer().bit_count();
  bs.payload = io.writer().take();
  return bs;
}

inline Bitstream encode_hierarchy(const MultiresHierarchy& h, std::optional<double> step = std::nullopt) {
  Bitstream bs = encode(map_to_image(h, step), encode_base_mesh(h.base));
  bs.config = h.config;
  bs.reference_diagonal = h.reference_diagonal;
  for (std::size_t j = 0; j < h.level_count(); ++j) {
    const auto& src = h.levels[j].source;
    for (std::size_t i = 0; i < src.size(); ++i)
      if (is_retry(src[i])) bs.retries.push_back({static_cast<std::uint32_t>(j), i, src[i]});
  }
  return bs;
}

struct DecodedImage {
  TriangleMesh base;
  std::shared_ptr<const CoefficientLayout> layout;
  /// Reconstructed quantized values per pixel.
  std::vector<double> pixels;
  std::uint64_t bits_used = 0;
  bool complete = false;

  std::vector<std::vector<double>> quantized_levels() const { return layout->gather(pixels); }
};

/// Estimate for magnitude bits not yet decoded. MidInterval takes the centre
/// of the known interval; LowerBound keeps the decoded bits only, which makes
/// every coefficient's error non-increasing in the decoded prefix.
enum class FillRule : std::uint8_t { MidInterval, LowerBound };

/// Decodes at most `payload_bit_budget` payload bits.
inline DecodedImage decode(const Bitstream& bs, std::uint64_t payload_bit_budget, FillRule fill = FillRule::LowerBound) {
  DecodedImage out;
  out.base = decode_base_mesh(bs.base_mesh);
  out.layout = std::make_shared<const CoefficientLayout>(out.base, bs.levels);
  const CoefficientLayout& layout = *out.layout;
  if (layout.height() != bs.height || layout.width() != bs.width || layout.base_edges() != bs.base_edges) {
    throw FormatError("bitstream: image geometry does not match the base mesh");
  }
  detail::BitReader reader(bs.payload, std::min(payload_bit_budget, bs.payload_bits));
  detail::ZerotreeDecoderIo io(layout.pixel_count(), reader);
  try {
    detail::run_zerotree(layout, static_cast<int>(bs.planes), io);
    out.complete = true;
  } catch (const detail::OutOfBits&) {
    out.complete = false;
  }
  out.bits_used = reader.consumed();
  out.pixels = io.reconstruction(fill == FillRule::MidInterval);
  return out;
}

inline DecodedImage decode_all(const Bitstream& bs) { return decode(bs, bs.payload_bits); }

/// Hierarchy whose coefficients are the dequantized decoded values.
inline MultiresHierarchy to_hierarchy(const Bitstream& bs, const DecodedImage& img) {
  MultiresHierarchy h;
  h.base = img.base;
  h.config = bs.config;
  h.reference_diagonal = bs.reference_diagonal;
  const auto q = img.quantized_levels();
  for (const auto& lv : q) {
    LevelCoefficients c;
    c.w.resize(lv.size());
    for (std::size_t i = 0; i < lv.size(); ++i) c.w[i] = lv[i] * bs.step;
    h.levels.push_back(std::move(c));
  }
  for (const RetryRecord& r : bs.retries) {
    if (r.level >= h.levels.size() || r.index >= h.levels[r.level].w.size()) {
      throw FormatError("bitstream: retry record out of range");
    }
    auto& src = h.levels[r.level].source;
    if (src.empty()) src.assign(h.levels[r.level].w.size(), DirectionSource::NormalFallback);
    src[r.index] = r.source;
  }
  return h;
}

/// Hierarchy with the coefficients replaced by their quantized values: what
/// a lossless decode reproduces.
inline MultiresHierarchy quantized_hierarchy(const MultiresHierarchy& h, double step) {
  MultiresHierarchy q = h;
  for (auto& lv : q.levels)
    for (double& w : lv.w) w = dequantize(quantize(w, step), step);
  return q;
}

// ---------------------------------------------------------------------------
// Container: "BWRC" u32 version, u32 height, u32 width, u32 block_rows,
// u32 block_cols, f64 step, u32 J, u64 E0, u32 planes, 3 x f64 direction
// config, f64 reference diagonal, u64 base length + base bytes, u64 retry
// count + (u32 level, u64 index, u8 source) each, u64 payload bits + payload
// bytes (MSB-first), u32 CRC32.

inline constexpr std::uint32_t kBitstreamVersion = 1;

inline io::Bytes serialize_bitstream(const Bitstream& bs) {
  io::ByteWriter w;
  w.raw("BWRC");
  w.u32(kBitstreamVersion);
  w.u32(bs.height);
  w.u32(bs.width);
  w.u32(bs.block_rows);
  w.u32(bs.block_cols);
  w.f64(bs.step);
  w.u32(bs.levels);
  w.u64(bs.base_edges);
  w.u32(bs.planes);
  w.f64(bs.config.flat_epsilon);
  w.f64(bs.config.crease_angle_deg);
  w.f64(bs.config.tilt_angle_deg);
  w.f64(bs.reference_diagonal);
  w.u64(bs.base_mesh.size());
  w.bytes(bs.base_mesh);
  w.u64(bs.retries.size());
  for (const RetryRecord& r : bs.retries) {
    w.u32(r.level);
    w.u64(r.index);
    w.u8(static_cast<std::uint8_t>(r.source));
  }
  w.u64(bs.payload_bits);
  w.bytes(bs.payload);
  w.seal();
  return w.take();
}

inline Bitstream deserialize_bitstream(const io::Bytes& bytes) {
  const std::size_t body = io::check_crc(bytes, "bitstream");
  io::ByteReader r(bytes.data(), body);
  r.expect_magic("BWRC", "bitstream");
  const std::uint32_t version = r.u32();
  if (version != kBitstreamVersion) throw FormatError("bitstream: unsupported version " + std::to_string(version));
  Bitstream bs;
  bs.height = r.u32();
  bs.width = r.u32();
  bs.block_rows = r.u32();
  bs.block_cols = r.u32();
  bs.step = r.f64();
  bs.levels = r.u32();
  bs.base_edges = r.u64();
  bs.planes = r.u32();
  if (bs.levels > 16 || bs.planes > 64) throw FormatError("bitstream: implausible header");
  bs.config.flat_epsilon = r.f64();
  bs.config.crease_angle_deg = r.f64();
  bs.config.tilt_angle_deg = r.f64();
  bs.reference_diagonal = r.f64();
  const std::uint64_t base_len = r.u64();
  const std::uint8_t* base = r.take(base_len);
  bs.base_mesh.assign(base, base + base_len);
  const std::uint64_t nretry = r.u64();
  if (nretry > r.remaining()) throw FormatError("truncated data");
  bs.retries.resize(nretry);
  for (RetryRecord& rec : bs.retries) {
    rec.level = r.u32();
    rec.index = r.u64();
    const std::uint8_t s = r.u8();
    if (s < 2 || s > static_cast<std::uint8_t>(DirectionSource::RetryEndpointB)) throw FormatError("bitstream: bad retry source");
    rec.source = static_cast<DirectionSource>(s);
  }
  bs.payload_bits = r.u64();
  const std::uint64_t nbytes = (bs.payload_bits + 7) / 8;
  const std::uint8_t* payload = r.take(nbytes);
  bs.payload.assign(payload, payload + nbytes);
  if (r.remaining() != 0) throw FormatError("bitstream: trailing bytes");
  return bs;
}

inline void save_bitstream(const Bitstream& bs, const std::filesystem::path& path) {
  io::write_file(path, serialize_bitstream(bs));
}
inline Bitstream load_bitstream(const std::filesystem::path& path) { return deserialize_bitstream(io::read_file(path)); }

/// Bits of the serialized container that precede and frame the payload.
inline std::uint64_t overhead_bits(const Bitstream& bs) {
  return 8 * (serialize_bitstream(bs).size() - bs.payload.size());
}

/// Payload budget left from a total bit budget that must also carry the
/// header and base mesh.
inline std::uint64_t payload_budget_from_total(const Bitstream& bs, std::uint64_t total_bits) {
  const std::uint64_t overhead = overhead_bits(bs);
  if (total_bits < overhead) {
    throw BudgetError("budget of " + std::to_string(total_bits) + " bits cannot carry the " + std::to_string(overhead) +
                      "-bit header and base mesh");
  }
  return total_bits - overhead;
}

/// floor(bpv * vertex count), saturating for infinite rates.
inline std::uint64_t bit_budget(double bpv, std::size_t vertex_count) {
  if (!(bpv >= 0.0)) throw ValidationError("bpv must be non-negative");
  const double bits = std::floor(bpv * static_cast<double>(vertex_count));
  if (!(bits < 1.8e19)) return std::numeric_limits<std::uint64_t>::max();
  return static_cast<std::uint64_t>(bits);
}

struct Reconstruction {
  TriangleMesh mesh;
  std::size_t level = 0;
  std::uint64_t budget_bits = 0;
  std::uint64_t bits_used = 0;
  /// bits_used / vertex count of the reconstructed level.
  double achieved_bpv = 0.0;
  std::optional<DistanceReport> distance;
};

/// Decodes bpv * |V(M^level)| payload bits and synthesizes M^level; measures
/// against `reference` when given.
inline Reconstruction reconstruct_at_bpv(const Bitstream& bs, double bpv, std::size_t level,
                                         const TriangleMesh* reference = nullptr, const SamplingConfig& sampling = {},
                                         unsigned threads = 0, FillRule fill = FillRule::LowerBound) {
  if (level > bs.levels) throw ValidationError("level exceeds the coded hierarchy depth");
  const TriangleMesh base = decode_base_mesh(bs.base_mesh);
  const std::size_t vertices = refined_vertex_count(base.vertex_count(), base.edge_count(), level);
  Reconstruction out;
  out.level = level;
  out.budget_bits = bit_budget(bpv, vertices);
  const DecodedImage img = decode(bs, out.budget_bits, fill);
  out.bits_used = img.bits_used;
  out.achieved_bpv = static_cast<double>(img.bits_used) / static_cast<double>(vertices);
  out.mesh = synthesize(to_hierarchy(bs, img), level, {}, threads);
  if (reference) {
    out.distance = surface_distance(out.mesh, *reference, sampling);
    out.distance->bpv = out.achieved_bpv;
  }
  return out;
}

}  // namespace bwr
