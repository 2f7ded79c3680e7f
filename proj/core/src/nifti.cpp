#include "atriaseg/nifti.hpp"

#include <zlib.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

namespace atriaseg {
namespace {

using Kind = NiftiError::Kind;

// Field offsets within the NIfTI-1 header.
constexpr std::size_t kOffSizeofHdr = 0;
constexpr std::size_t kOffDim = 40;
constexpr std::size_t kOffDatatype = 70;
constexpr std::size_t kOffBitpix = 72;
constexpr std::size_t kOffPixdim = 76;
constexpr std::size_t kOffVoxOffset = 108;
constexpr std::size_t kOffSclSlope = 112;
constexpr std::size_t kOffSclInter = 116;
constexpr std::size_t kOffXyztUnits = 123;
constexpr std::size_t kOffDescrip = 148;
constexpr std::size_t kOffMagic = 344;

constexpr std::size_t kMaxVoxOffset = std::size_t{1} << 30;

bool host_is_little() { return std::endian::native == std::endian::little; }

template <typename T>
T load(std::span<const std::byte> bytes, std::size_t off, ByteOrder order) {
  std::array<std::byte, sizeof(T)> raw{};
  std::memcpy(raw.data(), bytes.data() + off, sizeof(T));
  if ((order == ByteOrder::kLittle) != host_is_little()) {
    std::reverse(raw.begin(), raw.end());
  }
  T value;
  std::memcpy(&value, raw.data(), sizeof(T));
  return value;
}

template <typename T>
void store(std::span<std::byte> bytes, std::size_t off, T value, ByteOrder order) {
  std::array<std::byte, sizeof(T)> raw{};
  std::memcpy(raw.data(), &value, sizeof(T));
  if ((order == ByteOrder::kLittle) != host_is_little()) {
    std::reverse(raw.begin(), raw.end());
  }
  std::memcpy(bytes.data() + off, raw.data(), sizeof(T));
}

std::string field_name(const char* base, int i) {
  return std::string(base) + "[" + std::to_string(i) + "]";
}

int bitpix_for(NiftiDatatype dt) {
  switch (dt) {
    case NiftiDatatype::kUint8: return 8;
    case NiftiDatatype::kInt16: return 16;
    case NiftiDatatype::kFloat32: return 32;
  }
  return 0;
}

std::vector<std::byte> read_file_bytes(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) {
    throw NiftiError(Kind::kMissingFile, "path", "no such file " + path.string());
  }
  gzFile file = gzopen(path.c_str(), "rb");
  if (file == nullptr) throw NiftiError(Kind::kIo, "path", "cannot open " + path.string());
  std::vector<std::byte> out;
  constexpr unsigned kChunk = 1u << 20;
  for (;;) {
    const std::size_t old = out.size();
    out.resize(old + kChunk);
    const int got = gzread(file, out.data() + old, kChunk);
    if (got < 0) {
      int errnum = 0;
      const std::string msg = gzerror(file, &errnum);
      gzclose(file);
      throw NiftiError(Kind::kIo, "gzip stream", path.string() + ": " + msg);
    }
    out.resize(old + static_cast<std::size_t>(got));
    if (got == 0) break;
  }
  int errnum = 0;
  const char* msg = gzerror(file, &errnum);
  if (errnum != Z_OK && errnum != Z_STREAM_END) {
    const std::string text = msg;
    gzclose(file);
    throw NiftiError(errnum == Z_BUF_ERROR ? Kind::kTruncatedPayload : Kind::kIo,
                     "gzip stream", path.string() + ": " + text);
  }
  gzclose(file);
  return out;
}

void write_file_bytes(std::span<const std::byte> bytes, const std::filesystem::path& path,
                      bool gzip, int level) {
  if (gzip) {
    const std::string mode = "wb" + std::to_string(std::clamp(level, 0, 9));
    gzFile file = gzopen(path.c_str(), mode.c_str());
    if (file == nullptr) throw NiftiError(Kind::kIo, "path", "cannot create " + path.string());
    std::size_t done = 0;
    while (done < bytes.size()) {
      const auto chunk = static_cast<unsigned>(std::min<std::size_t>(bytes.size() - done, 1u << 24));
      if (gzwrite(file, bytes.data() + done, chunk) != static_cast<int>(chunk)) {
        gzclose(file);
        throw NiftiError(Kind::kIo, "path", "write failed: " + path.string());
      }
      done += chunk;
    }
    if (gzclose(file) != Z_OK) {
      throw NiftiError(Kind::kIo, "path", "write failed: " + path.string());
    }
    return;
  }
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw NiftiError(Kind::kIo, "path", "cannot create " + path.string());
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  os.flush();
  if (!os) throw NiftiError(Kind::kIo, "path", "write failed: " + path.string());
}

bool wants_gzip(const WriteOptions& options, const std::filesystem::path& path) {
  return options.gzip.value_or(path.extension() == ".gz");
}

// Decodes the payload to doubles after applying scl_slope / scl_inter.
template <typename Sink>
void for_each_scaled(const NiftiHeaderView& h, std::span<const std::byte> file, Sink&& sink) {
  const std::size_t n = h.dims.count();
  if (file.size() < h.vox_offset || file.size() - h.vox_offset < h.payload_bytes()) {
    throw NiftiError(Kind::kTruncatedPayload, "voxel payload",
                     "expected " + std::to_string(h.payload_bytes()) + " bytes at offset " +
                         std::to_string(h.vox_offset) + ", file has " +
                         std::to_string(file.size()));
  }
  const bool scaled = h.scl_slope != 0.0;
  const auto payload = file.subspan(h.vox_offset);
  for (std::size_t i = 0; i < n; ++i) {
    double raw = 0.0;
    switch (h.datatype) {
      case NiftiDatatype::kUint8:
        raw = static_cast<double>(std::to_integer<std::uint8_t>(payload[i]));
        break;
      case NiftiDatatype::kInt16:
        raw = load<std::int16_t>(payload, 2 * i, h.byte_order);
        break;
      case NiftiDatatype::kFloat32:
        raw = load<float>(payload, 4 * i, h.byte_order);
        break;
    }
    sink(i, scaled ? raw * h.scl_slope + h.scl_inter : raw);
  }
}

template <typename T>
std::vector<std::byte> encode_grid(const Grid<T>& grid, NiftiDatatype dt, ByteOrder order) {
  const std::size_t bpv = static_cast<std::size_t>(bitpix_for(dt)) / 8;
  for (int axis = 0; axis < 3; ++axis) {
    if (grid.dims()[axis] > std::numeric_limits<std::int16_t>::max()) {
      throw NiftiError(Kind::kMalformedHeader, field_name("dim", axis + 1),
                       "extent exceeds the int16 header field");
    }
  }
  std::vector<std::byte> out(kNiftiDataOffset + grid.size() * bpv, std::byte{0});
  std::span<std::byte> bytes(out);

  store<std::int32_t>(bytes, kOffSizeofHdr, 348, order);
  const std::array<std::int16_t, 8> dim = {
      3, static_cast<std::int16_t>(grid.dims().nx), static_cast<std::int16_t>(grid.dims().ny),
      static_cast<std::int16_t>(grid.dims().nz), 1, 1, 1, 1};
  for (int i = 0; i < 8; ++i) store<std::int16_t>(bytes, kOffDim + 2 * i, dim[i], order);
  store<std::int16_t>(bytes, kOffDatatype, static_cast<std::int16_t>(dt), order);
  store<std::int16_t>(bytes, kOffBitpix, static_cast<std::int16_t>(bitpix_for(dt)), order);
  const std::array<float, 8> pixdim = {1.0f,
                                       static_cast<float>(grid.spacing().dx),
                                       static_cast<float>(grid.spacing().dy),
                                       static_cast<float>(grid.spacing().dz),
                                       1.0f, 1.0f, 1.0f, 1.0f};
  for (int i = 0; i < 8; ++i) store<float>(bytes, kOffPixdim + 4 * i, pixdim[i], order);
  store<float>(bytes, kOffVoxOffset, static_cast<float>(kNiftiDataOffset), order);
  store<float>(bytes, kOffSclSlope, 1.0f, order);
  store<float>(bytes, kOffSclInter, 0.0f, order);
  bytes[kOffXyztUnits] = std::byte{2};  // millimetres
  constexpr char kDescrip[] = "atriaseg";
  std::memcpy(bytes.data() + kOffDescrip, kDescrip, sizeof(kDescrip) - 1);
  constexpr char kMagic[4] = {'n', '+', '1', '\0'};
  std::memcpy(bytes.data() + kOffMagic, kMagic, 4);

  auto payload = bytes.subspan(kNiftiDataOffset);
  const auto data = grid.data();
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double v = static_cast<double>(data[i]);
    switch (dt) {
      case NiftiDatatype::kUint8:
        if (v != std::floor(v) || v < 0.0 || v > 255.0) {
          throw NiftiError(Kind::kUnsupportedDatatype, "datatype",
                           "value " + std::to_string(v) + " does not fit uint8");
        }
        payload[i] = static_cast<std::byte>(static_cast<std::uint8_t>(v));
        break;
      case NiftiDatatype::kInt16:
        if (v != std::floor(v) || v < -32768.0 || v > 32767.0) {
          throw NiftiError(Kind::kUnsupportedDatatype, "datatype",
                           "value " + std::to_string(v) + " does not fit int16");
        }
        store<std::int16_t>(payload, 2 * i, static_cast<std::int16_t>(v), order);
        break;
      case NiftiDatatype::kFloat32:
        store<float>(payload, 4 * i, static_cast<float>(data[i]), order);
        break;
    }
  }
  return out;
}

}  // namespace

NiftiError::NiftiError(Kind kind, std::string field, const std::string& detail)
    : Error("NIfTI " + field + ": " + detail), kind_(kind), field_(std::move(field)) {}

std::size_t NiftiHeaderView::bytes_per_voxel() const {
  return static_cast<std::size_t>(bitpix_for(datatype)) / 8;
}

NiftiHeaderView parse_nifti_header(std::span<const std::byte> bytes) {
  if (bytes.size() < kNiftiHeaderSize) {
    throw NiftiError(Kind::kMalformedHeader, "sizeof_hdr",
                     "file holds " + std::to_string(bytes.size()) + " bytes, header needs 348");
  }
  NiftiHeaderView h;

  // dim[0] in 1..7 identifies the byte order.
  const auto dim0_le = load<std::int16_t>(bytes, kOffDim, ByteOrder::kLittle);
  const auto dim0_be = load<std::int16_t>(bytes, kOffDim, ByteOrder::kBig);
  if (dim0_le >= 1 && dim0_le <= 7) {
    h.byte_order = ByteOrder::kLittle;
  } else if (dim0_be >= 1 && dim0_be <= 7) {
    h.byte_order = ByteOrder::kBig;
  } else {
    throw NiftiError(Kind::kMalformedHeader, "dim[0]", "not in 1..7 in either byte order");
  }
  const ByteOrder order = h.byte_order;

  if (const auto sz = load<std::int32_t>(bytes, kOffSizeofHdr, order); sz != 348) {
    throw NiftiError(Kind::kMalformedHeader, "sizeof_hdr", "expected 348, got " + std::to_string(sz));
  }
  if (std::memcmp(bytes.data() + kOffMagic, "n+1\0", 4) != 0) {
    throw NiftiError(Kind::kMalformedHeader, "magic", "expected single-file magic \"n+1\"");
  }

  h.dim0 = load<std::int16_t>(bytes, kOffDim, order);
  if (h.dim0 != 2 && h.dim0 != 3) {
    throw NiftiError(Kind::kMalformedHeader, "dim[0]",
                     "only 2D/3D images are supported, got " + std::to_string(h.dim0));
  }
  std::array<int, 3> n = {1, 1, 1};
  for (int i = 1; i <= h.dim0; ++i) {
    n[i - 1] = load<std::int16_t>(bytes, kOffDim + 2 * i, order);
    if (n[i - 1] < 1) {
      throw NiftiError(Kind::kMalformedHeader, field_name("dim", i),
                       "must be >= 1, got " + std::to_string(n[i - 1]));
    }
  }
  h.dims = {n[0], n[1], n[2]};

  const auto code = load<std::int16_t>(bytes, kOffDatatype, order);
  if (code != 2 && code != 4 && code != 16) {
    throw NiftiError(Kind::kUnsupportedDatatype, "datatype",
                     "code " + std::to_string(code) + " (supported: 2, 4, 16)");
  }
  h.datatype = static_cast<NiftiDatatype>(code);
  if (const auto bitpix = load<std::int16_t>(bytes, kOffBitpix, order);
      bitpix != bitpix_for(h.datatype)) {
    throw NiftiError(Kind::kMalformedHeader, "bitpix",
                     std::to_string(bitpix) + " does not match datatype " + std::to_string(code));
  }

  std::array<double, 3> sp = {1.0, 1.0, 1.0};
  for (int i = 1; i <= 3; ++i) {
    const double v = load<float>(bytes, kOffPixdim + 4 * i, order);
    if (i > h.dim0 && !(std::isfinite(v) && v > 0.0)) continue;
    if (!std::isfinite(v) || v <= 0.0) {
      throw NiftiError(Kind::kMalformedHeader, field_name("pixdim", i),
                       "spacing must be finite and > 0");
    }
    sp[i - 1] = v;
  }
  h.spacing = {sp[0], sp[1], sp[2]};

  const double vox = load<float>(bytes, kOffVoxOffset, order);
  if (!std::isfinite(vox) || vox < static_cast<double>(kNiftiDataOffset) ||
      vox != std::floor(vox) || vox > static_cast<double>(kMaxVoxOffset)) {
    throw NiftiError(Kind::kMalformedHeader, "vox_offset",
                     "must be an integer >= 352, got " + std::to_string(vox));
  }
  h.vox_offset = static_cast<std::size_t>(vox);

  h.scl_slope = load<float>(bytes, kOffSclSlope, order);
  h.scl_inter = load<float>(bytes, kOffSclInter, order);
  if (!std::isfinite(h.scl_slope)) {
    throw NiftiError(Kind::kMalformedHeader, "scl_slope", "not finite");
  }
  if (!std::isfinite(h.scl_inter)) {
    throw NiftiError(Kind::kMalformedHeader, "scl_inter", "not finite");
  }
  return h;
}

Volume decode_volume(std::span<const std::byte> file) {
  const NiftiHeaderView h = parse_nifti_header(file);
  std::vector<float> data(0);
  // Size check happens inside for_each_scaled before any voxel is touched,
  // so a lying header cannot trigger a huge allocation here.
  if (file.size() >= h.vox_offset && file.size() - h.vox_offset >= h.payload_bytes()) {
    data.resize(h.dims.count());
  }
  for_each_scaled(h, file, [&](std::size_t i, double v) {
    const auto f = static_cast<float>(v);
    if (!std::isfinite(f)) {
      throw NiftiError(Kind::kNonFinite, "voxel payload",
                       "non-finite intensity at linear index " + std::to_string(i));
    }
    data[i] = f;
  });
  return Volume(h.dims, h.spacing, std::move(data));
}

Volume read_volume(const std::filesystem::path& path) {
  return decode_volume(read_file_bytes(path));
}

LabelMap read_labels(const std::filesystem::path& path, const LabelEncoding& encoding) {
  const auto file = read_file_bytes(path);
  const NiftiHeaderView h = parse_nifti_header(file);
  std::vector<std::uint8_t> data;
  if (file.size() >= h.vox_offset && file.size() - h.vox_offset >= h.payload_bytes()) {
    data.resize(h.dims.count());
  }
  for_each_scaled(h, file, [&](std::size_t i, double v) {
    if (!std::isfinite(v) || v != std::floor(v)) {
      throw NiftiError(Kind::kNonIntegralLabel, "voxel payload",
                       "non-integral label " + std::to_string(v) + " at linear index " +
                           std::to_string(i));
    }
    if (v < 0.0 || v > 255.0 || !encoding.allows(static_cast<std::uint8_t>(v))) {
      const Index3 at = unflatten(h.dims, i);
      throw NiftiError(Kind::kLabelOutOfSet, "voxel payload",
                       "label value " + std::to_string(static_cast<long long>(v)) +
                           " at voxel (" + std::to_string(at.x) + "," + std::to_string(at.y) +
                           "," + std::to_string(at.z) + ") is outside the label set");
    }
    data[i] = static_cast<std::uint8_t>(v);
  });
  return LabelMap(h.dims, h.spacing, std::move(data));
}

std::vector<std::byte> encode_nifti(const Volume& vol, const WriteOptions& options) {
  return encode_grid(vol, options.datatype, options.byte_order);
}

std::vector<std::byte> encode_nifti(const LabelMap& labels, const WriteOptions& options) {
  return encode_grid(labels, NiftiDatatype::kUint8, options.byte_order);
}

void write_volume(const Volume& vol, const std::filesystem::path& path,
                  const WriteOptions& options) {
  write_file_bytes(encode_nifti(vol, options), path, wants_gzip(options, path),
                   options.compression_level);
}

void write_volume(const LabelMap& labels, const std::filesystem::path& path,
                  const WriteOptions& options) {
  write_file_bytes(encode_nifti(labels, options), path, wants_gzip(options, path),
                   options.compression_level);
}

}  // namespace atriaseg
