#include "mtht/image_io.hpp"

#include <png.h>

#include <bit>
#include <cctype>
#include <cmath>
#include <csetjmp>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

namespace mtht {
namespace {

namespace fs = std::filesystem;

std::vector<unsigned char> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (in.bad()) throw std::runtime_error("read failed: " + path.string());
  return bytes;
}

void write_file(const fs::path& path, const std::vector<unsigned char>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::string lower_ext(const fs::path& path) {
  std::string ext = path.extension().string();
  for (char& c : ext) c = char(std::tolower(static_cast<unsigned char>(c)));
  return ext;
}

struct GrayImage {
  Eigen::Index width = 0, height = 0;
  std::vector<unsigned char> pixels;  // row-major, y * width + x
};

struct GrayVolume {
  Eigen::Index width = 0, height = 0, depth = 0;
  std::vector<unsigned char> voxels;  // x-fastest, page-major
};

unsigned char quantize(double v, double lo, double hi) {
  const double q = std::round((v - lo) / (hi - lo) * 255.0);
  return static_cast<unsigned char>(std::clamp(q, 0.0, 255.0));
}

// ---------------------------------------------------------------- PNG

bool has_png_magic(const std::vector<unsigned char>& b) {
  static const unsigned char magic[8] = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
  return b.size() >= 8 && std::memcmp(b.data(), magic, 8) == 0;
}

struct PngReadState {
  const unsigned char* data;
  size_t size;
  size_t pos;
};

extern "C" void png_read_cb(png_structp png, png_bytep out, png_size_t n) {
  auto* s = static_cast<PngReadState*>(png_get_io_ptr(png));
  if (s->pos + n > s->size) png_error(png, "truncated PNG stream");
  std::memcpy(out, s->data + s->pos, n);
  s->pos += n;
}

extern "C" void png_write_cb(png_structp png, png_bytep data, png_size_t n) {
  auto* out = static_cast<std::vector<unsigned char>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + n);
}

extern "C" void png_flush_cb(png_structp) {}

GrayImage decode_png(const std::vector<unsigned char>& bytes, const std::string& name) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw std::runtime_error("libpng read init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw std::runtime_error("libpng info init failed");
  }

  PngReadState state{bytes.data(), bytes.size(), 0};
  GrayImage img;
  std::vector<png_bytep> rows;

  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("PNG decode failed: " + name);
  }

  png_set_read_fn(png, &state, png_read_cb);
  png_read_info(png, info);
  const png_uint_32 width = png_get_image_width(png, info);
  const png_uint_32 height = png_get_image_height(png, info);
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);

  // coerce everything to 8-bit grayscale
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (depth == 16) png_set_strip_16(png);
  if (color & PNG_COLOR_MASK_COLOR) png_set_rgb_to_gray_fixed(png, 1, -1, -1);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);
  if (png_get_rowbytes(png, info) != width) png_error(png, "unexpected row size");

  img.width = Eigen::Index(width);
  img.height = Eigen::Index(height);
  img.pixels.resize(size_t(width) * height);
  rows.resize(height);
  for (png_uint_32 y = 0; y < height; ++y) rows[y] = img.pixels.data() + size_t(y) * width;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

std::vector<unsigned char> encode_png(const GrayImage& img) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw std::runtime_error("libpng write init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw std::runtime_error("libpng info init failed");
  }

  std::vector<unsigned char> out;
  std::vector<png_bytep> rows(size_t(img.height));
  for (Eigen::Index y = 0; y < img.height; ++y)
    rows[size_t(y)] = const_cast<png_bytep>(img.pixels.data() + size_t(y) * size_t(img.width));

  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("PNG encode failed");
  }

  png_set_write_fn(png, &out, png_write_cb, png_flush_cb);
  png_set_IHDR(png, info, png_uint_32(img.width), png_uint_32(img.height), 8,
               PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, info);
  png_destroy_write_struct(&png, &info);
  return out;
}

// ---------------------------------------------------------------- PGM

bool has_pgm_magic(const std::vector<unsigned char>& b) {
  return b.size() >= 2 && b[0] == 'P' && (b[1] == '5' || b[1] == '2');
}

struct PnmParser {
  const std::vector<unsigned char>& bytes;
  size_t pos = 0;

  void skip_space() {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  }
  long next_int(const std::string& what) {
    skip_space();
    if (pos >= bytes.size() || !std::isdigit(bytes[pos]))
      throw std::runtime_error("PGM: expected " + what);
    long v = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      v = v * 10 + (bytes[pos] - '0');
      if (v > 1'000'000'000L) throw std::runtime_error("PGM: " + what + " out of range");
      ++pos;
    }
    return v;
  }
};

Image2d decode_pgm(const std::vector<unsigned char>& bytes, const std::string& name) {
  if (!has_pgm_magic(bytes)) throw std::runtime_error("not a PGM file: " + name);
  const bool binary = bytes[1] == '5';
  PnmParser p{bytes, 2};
  const long width = p.next_int("width");
  const long height = p.next_int("height");
  const long maxval = p.next_int("maxval");
  if (width < 1 || height < 1) throw std::runtime_error("PGM: bad dimensions in " + name);
  if (maxval < 1 || maxval > 65535) throw std::runtime_error("PGM: bad maxval in " + name);

  Image2d img(Image2d::IndexVector(width, height));
  const size_t count = size_t(width) * size_t(height);
  if (binary) {
    ++p.pos;  // single whitespace byte after maxval
    const size_t per = maxval > 255 ? 2 : 1;
    if (bytes.size() - p.pos < count * per) throw std::runtime_error("PGM: truncated " + name);
    for (size_t i = 0; i < count; ++i) {
      if (per == 1) {
        img[Eigen::Index(i)] = double(bytes[p.pos + i]);
      } else {
        img[Eigen::Index(i)] =
            double((unsigned(bytes[p.pos + 2 * i]) << 8) | bytes[p.pos + 2 * i + 1]);
      }
    }
  } else {
    for (size_t i = 0; i < count; ++i) {
      const long v = p.next_int("pixel");
      if (v > maxval) throw std::runtime_error("PGM: pixel above maxval in " + name);
      img[Eigen::Index(i)] = double(v);
    }
  }
  return img;
}

std::vector<unsigned char> encode_pgm(const GrayImage& img) {
  const std::string header =
      "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  std::vector<unsigned char> out(header.begin(), header.end());
  out.insert(out.end(), img.pixels.begin(), img.pixels.end());
  return out;
}

// ---------------------------------------------------------------- TIFF

bool has_tiff_magic(const std::vector<unsigned char>& b) {
  if (b.size() < 8) return false;
  const bool le = b[0] == 'I' && b[1] == 'I' && b[2] == 42 && b[3] == 0;
  const bool be = b[0] == 'M' && b[1] == 'M' && b[2] == 0 && b[3] == 42;
  return le || be;
}

struct TiffReader {
  const std::vector<unsigned char>& b;
  bool big_endian;
  const std::string& name;

  [[noreturn]] void fail(const std::string& why) const {
    throw std::runtime_error("TIFF: " + why + " in " + name);
  }
  void need(size_t off, size_t n) const {
    if (off + n > b.size()) fail("truncated file");
  }
  std::uint16_t rd16(size_t off) const {
    need(off, 2);
    return big_endian ? std::uint16_t((b[off] << 8) | b[off + 1])
                      : std::uint16_t((b[off + 1] << 8) | b[off]);
  }
  std::uint32_t rd32(size_t off) const {
    need(off, 4);
    return big_endian ? (std::uint32_t(b[off]) << 24) | (std::uint32_t(b[off + 1]) << 16) |
                            (std::uint32_t(b[off + 2]) << 8) | b[off + 3]
                      : (std::uint32_t(b[off + 3]) << 24) | (std::uint32_t(b[off + 2]) << 16) |
                            (std::uint32_t(b[off + 1]) << 8) | b[off];
  }
  // BYTE/SHORT/LONG tag payload, inline when it fits in the 4 value bytes
  std::vector<std::uint32_t> values(std::uint16_t type, std::uint32_t count,
                                    size_t value_field) const {
    size_t per;
    switch (type) {
      case 1: per = 1; break;  // BYTE
      case 3: per = 2; break;  // SHORT
      case 4: per = 4; break;  // LONG
      default: fail("unsupported tag type " + std::to_string(type));
    }
    const size_t total = per * count;
    const size_t src = total <= 4 ? value_field : rd32(value_field);
    need(src, total);
    std::vector<std::uint32_t> out(count);
    for (std::uint32_t i = 0; i < count; ++i) {
      const size_t off = src + size_t(i) * per;
      out[i] = per == 1 ? b[off] : per == 2 ? rd16(off) : rd32(off);
    }
    return out;
  }
};

GrayVolume decode_tiff(const std::vector<unsigned char>& bytes, const std::string& name) {
  if (!has_tiff_magic(bytes)) throw std::runtime_error("not a TIFF file: " + name);
  TiffReader r{bytes, bytes[0] == 'M', name};

  GrayVolume vol;
  size_t ifd = r.rd32(4);
  while (ifd != 0) {
    const std::uint16_t n_entries = r.rd16(ifd);
    std::uint32_t width = 0, height = 0, bps = 8, compression = 1, photometric = 1, spp = 1;
    std::uint32_t rows_per_strip = 0xffffffffu;
    std::vector<std::uint32_t> strip_offsets, strip_counts;

    for (std::uint16_t i = 0; i < n_entries; ++i) {
      const size_t e = ifd + 2 + size_t(i) * 12;
      const std::uint16_t tag = r.rd16(e);
      const std::uint16_t type = r.rd16(e + 2);
      const std::uint32_t count = r.rd32(e + 4);
      const size_t value_field = e + 8;
      switch (tag) {
        case 256: width = r.values(type, count, value_field).at(0); break;
        case 257: height = r.values(type, count, value_field).at(0); break;
        case 258: bps = r.values(type, count, value_field).at(0); break;
        case 259: compression = r.values(type, count, value_field).at(0); break;
        case 262: photometric = r.values(type, count, value_field).at(0); break;
        case 273: strip_offsets = r.values(type, count, value_field); break;
        case 277: spp = r.values(type, count, value_field).at(0); break;
        case 278: rows_per_strip = r.values(type, count, value_field).at(0); break;
        case 279: strip_counts = r.values(type, count, value_field); break;
        default: break;  // ignore ancillary tags
      }
    }

    if (width == 0 || height == 0) r.fail("page without dimensions");
    if (bps != 8) r.fail("only 8 bits per sample supported");
    if (compression != 1) r.fail("only uncompressed data supported");
    if (spp != 1) r.fail("only single-sample grayscale supported");
    if (photometric > 1) r.fail("only grayscale photometric supported");
    if (strip_offsets.empty()) r.fail("page without strip offsets");
    if (strip_counts.size() != strip_offsets.size()) r.fail("strip table mismatch");

    if (vol.depth == 0) {
      vol.width = Eigen::Index(width);
      vol.height = Eigen::Index(height);
    } else if (vol.width != Eigen::Index(width) || vol.height != Eigen::Index(height)) {
      r.fail("pages differ in size");
    }

    const size_t page_base = vol.voxels.size();
    vol.voxels.resize(page_base + size_t(width) * height);
    std::uint32_t row = 0;
    for (size_t s = 0; s < strip_offsets.size(); ++s) {
      const std::uint32_t rows_here = std::min(rows_per_strip, height - row);
      const size_t expect = size_t(rows_here) * width;
      if (strip_counts[s] != expect) r.fail("unexpected strip byte count");
      r.need(strip_offsets[s], expect);
      std::memcpy(vol.voxels.data() + page_base + size_t(row) * width,
                  bytes.data() + strip_offsets[s], expect);
      row += rows_here;
    }
    if (row != height) r.fail("strips do not cover the page");
    if (photometric == 0)
      for (size_t i = page_base; i < vol.voxels.size(); ++i) vol.voxels[i] = 255 - vol.voxels[i];

    ++vol.depth;
    ifd = r.rd32(ifd + 2 + size_t(n_entries) * 12);
  }
  if (vol.depth == 0) r.fail("no pages");
  return vol;
}

void put16(std::vector<unsigned char>& out, std::uint16_t v) {
  out.push_back(v & 0xff);
  out.push_back((v >> 8) & 0xff);
}

void put32(std::vector<unsigned char>& out, std::uint32_t v) {
  out.push_back(v & 0xff);
  out.push_back((v >> 8) & 0xff);
  out.push_back((v >> 16) & 0xff);
  out.push_back((v >> 24) & 0xff);
}

// entry value goes in the low bytes of the 4-byte field
void put_entry(std::vector<unsigned char>& out, std::uint16_t tag, std::uint16_t type,
               std::uint32_t value) {
  put16(out, tag);
  put16(out, type);
  put32(out, 1);
  if (type == 3) {
    put16(out, std::uint16_t(value));
    put16(out, 0);
  } else {
    put32(out, value);
  }
}

std::vector<unsigned char> encode_tiff(const GrayVolume& vol) {
  constexpr std::uint16_t kShort = 3, kLong = 4;
  constexpr size_t kIfdSize = 2 + 9 * 12 + 4;
  const size_t page_bytes = size_t(vol.width) * size_t(vol.height);
  const size_t padded = page_bytes + (page_bytes & 1);  // keep offsets even

  std::vector<std::uint32_t> data_off(size_t(vol.depth)), ifd_off(size_t(vol.depth));
  size_t offset = 8;
  for (Eigen::Index p = 0; p < vol.depth; ++p) {
    data_off[size_t(p)] = std::uint32_t(offset);
    offset += padded;
    ifd_off[size_t(p)] = std::uint32_t(offset);
    offset += kIfdSize;
  }

  std::vector<unsigned char> out;
  out.reserve(offset);
  out.push_back('I');
  out.push_back('I');
  put16(out, 42);
  put32(out, ifd_off[0]);

  for (Eigen::Index p = 0; p < vol.depth; ++p) {
    const unsigned char* page = vol.voxels.data() + size_t(p) * page_bytes;
    out.insert(out.end(), page, page + page_bytes);
    if (page_bytes & 1) out.push_back(0);

    put16(out, 9);
    put_entry(out, 256, kLong, std::uint32_t(vol.width));
    put_entry(out, 257, kLong, std::uint32_t(vol.height));
    put_entry(out, 258, kShort, 8);
    put_entry(out, 259, kShort, 1);
    put_entry(out, 262, kShort, 1);
    put_entry(out, 273, kLong, data_off[size_t(p)]);
    put_entry(out, 277, kShort, 1);
    put_entry(out, 278, kLong, std::uint32_t(vol.height));
    put_entry(out, 279, kLong, std::uint32_t(page_bytes));
    put32(out, p + 1 < vol.depth ? ifd_off[size_t(p) + 1] : 0);
  }
  return out;
}

// ---------------------------------------------------------------- raw f32

fs::path raw_sidecar(const fs::path& path) {
  fs::path side = path;
  side.replace_extension(".json");
  return side;
}

Image3d load_raw(const fs::path& path) {
  const auto side = raw_sidecar(path);
  std::ifstream sin(side);
  if (!sin) throw std::runtime_error("raw volume has no sidecar: " + side.string());
  nlohmann::json meta;
  sin >> meta;
  if (meta.at("dtype").get<std::string>() != "f32")
    throw std::runtime_error("raw sidecar dtype must be f32: " + side.string());
  const auto dims = meta.at("dims").get<std::vector<Eigen::Index>>();
  if (dims.size() != 3 || dims[0] < 1 || dims[1] < 1 || dims[2] < 1)
    throw std::runtime_error("raw sidecar needs three positive dims: " + side.string());

  const auto bytes = read_file(path);
  const size_t count = size_t(dims[0]) * size_t(dims[1]) * size_t(dims[2]);
  if (bytes.size() != count * 4)
    throw std::runtime_error("raw volume size does not match sidecar dims: " + path.string());

  Image3d vol(Image3d::IndexVector(dims[0], dims[1], dims[2]));
  for (size_t i = 0; i < count; ++i) {
    const std::uint32_t u = std::uint32_t(bytes[4 * i]) | (std::uint32_t(bytes[4 * i + 1]) << 8) |
                            (std::uint32_t(bytes[4 * i + 2]) << 16) |
                            (std::uint32_t(bytes[4 * i + 3]) << 24);
    vol[Eigen::Index(i)] = double(std::bit_cast<float>(u));
  }
  return vol;
}

void save_raw(const fs::path& path, const Image3d& vol) {
  std::vector<unsigned char> bytes;
  bytes.reserve(size_t(vol.size()) * 4);
  for (Eigen::Index i = 0; i < vol.size(); ++i) {
    const std::uint32_t u = std::bit_cast<std::uint32_t>(float(vol[i]));
    bytes.push_back(u & 0xff);
    bytes.push_back((u >> 8) & 0xff);
    bytes.push_back((u >> 16) & 0xff);
    bytes.push_back((u >> 24) & 0xff);
  }
  write_file(path, bytes);

  const nlohmann::json meta{{"dims", {vol.dim(0), vol.dim(1), vol.dim(2)}}, {"dtype", "f32"}};
  const std::string text = meta.dump(2) + "\n";
  std::ofstream out(raw_sidecar(path), std::ios::binary);
  if (!out) throw std::runtime_error("cannot write sidecar: " + raw_sidecar(path).string());
  out << text;
  if (!out) throw std::runtime_error("sidecar write failed: " + raw_sidecar(path).string());
}

// ---------------------------------------------------------------- shared

Image2d to_image(const GrayImage& g) {
  Image2d img(Image2d::IndexVector(g.width, g.height));
  for (Eigen::Index i = 0; i < img.size(); ++i) img[i] = double(g.pixels[size_t(i)]);
  return img;
}

GrayImage to_gray(const Image2d& img, double lo, double hi) {
  if (!(hi > lo)) throw std::invalid_argument("save: hi must exceed lo");
  GrayImage g{img.dim(0), img.dim(1), std::vector<unsigned char>(size_t(img.size()))};
  for (Eigen::Index i = 0; i < img.size(); ++i) g.pixels[size_t(i)] = quantize(img[i], lo, hi);
  return g;
}

template <typename Img>
DenseImage<bool, Img::kDim> threshold_mask(const Img& img) {
  double max = 0.0;
  for (Eigen::Index i = 0; i < img.size(); ++i) max = std::max(max, double(img[i]));
  DenseImage<bool, Img::kDim> mask(img.dims());
  if (max <= 0.0) return mask;
  const double thr = max / 2.0;
  for (Eigen::Index i = 0; i < img.size(); ++i) mask[i] = double(img[i]) >= thr;
  return mask;
}

}  // namespace

Image2d load_image_2d(const fs::path& path) {
  const auto bytes = read_file(path);
  if (has_png_magic(bytes)) return to_image(decode_png(bytes, path.string()));
  if (has_pgm_magic(bytes)) return decode_pgm(bytes, path.string());
  throw std::runtime_error("unsupported 2D image format (need PNG or PGM): " + path.string());
}

void save_image_2d(const fs::path& path, const Image2d& img, double lo, double hi) {
  const std::string ext = lower_ext(path);
  if (ext == ".png") {
    write_file(path, encode_png(to_gray(img, lo, hi)));
  } else if (ext == ".pgm") {
    write_file(path, encode_pgm(to_gray(img, lo, hi)));
  } else {
    throw std::runtime_error("unsupported 2D save extension (use .png or .pgm): " + path.string());
  }
}

Mask2 load_mask_2d(const fs::path& path) { return threshold_mask(load_image_2d(path)); }

void save_mask_2d(const fs::path& path, const Mask2& mask) {
  Image2d img(mask.dims());
  for (Eigen::Index i = 0; i < mask.size(); ++i) img[i] = mask[i] ? 255.0 : 0.0;
  save_image_2d(path, img, 0.0, 255.0);
}

Image3d load_volume(const fs::path& path) {
  if (lower_ext(path) == ".raw") return load_raw(path);
  const auto bytes = read_file(path);
  if (has_tiff_magic(bytes)) {
    const GrayVolume g = decode_tiff(bytes, path.string());
    Image3d vol(Image3d::IndexVector(g.width, g.height, g.depth));
    for (Eigen::Index i = 0; i < vol.size(); ++i) vol[i] = double(g.voxels[size_t(i)]);
    return vol;
  }
  throw std::runtime_error("unsupported volume format (need .tif/.tiff or .raw): " +
                           path.string());
}

void save_volume(const fs::path& path, const Image3d& vol, double lo, double hi) {
  const std::string ext = lower_ext(path);
  if (ext == ".raw") {
    save_raw(path, vol);
    return;
  }
  if (ext != ".tif" && ext != ".tiff")
    throw std::runtime_error("unsupported volume save extension (use .tif/.tiff or .raw): " +
                             path.string());
  if (!(hi > lo)) throw std::invalid_argument("save: hi must exceed lo");
  GrayVolume g{vol.dim(0), vol.dim(1), vol.dim(2), std::vector<unsigned char>(size_t(vol.size()))};
  for (Eigen::Index i = 0; i < vol.size(); ++i) g.voxels[size_t(i)] = quantize(vol[i], lo, hi);
  write_file(path, encode_tiff(g));
}

Mask3 load_mask_3d(const fs::path& path) { return threshold_mask(load_volume(path)); }

void save_mask_3d(const fs::path& path, const Mask3& mask) {
  if (lower_ext(path) == ".raw") {
    Image3d img(mask.dims());
    for (Eigen::Index i = 0; i < mask.size(); ++i) img[i] = mask[i] ? 255.0 : 0.0;
    save_raw(path, img);
    return;
  }
  Image3d img(mask.dims());
  for (Eigen::Index i = 0; i < mask.size(); ++i) img[i] = mask[i] ? 255.0 : 0.0;
  save_volume(path, img, 0.0, 255.0);
}

}  // namespace mtht
