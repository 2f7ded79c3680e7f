#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>

#include "atriaseg/labels.hpp"
#include "atriaseg/volume.hpp"

namespace atriaseg {

// Single-file NIfTI-1 (.nii, .nii.gz) subset: 3D scalar images stored as
// uint8, int16 or float32 in either byte order. Orientation fields are
// ignored beyond pixdim.

inline constexpr std::size_t kNiftiHeaderSize = 348;
inline constexpr std::size_t kNiftiDataOffset = 352;

enum class NiftiDatatype : std::int16_t {
  kUint8 = 2,
  kInt16 = 4,
  kFloat32 = 16,
};

enum class ByteOrder { kLittle, kBig };

struct NiftiHeaderView {
  NiftiDatatype datatype = NiftiDatatype::kFloat32;
  int dim0 = 3;
  Dims dims{};
  Spacing spacing{};
  double scl_slope = 0.0;
  double scl_inter = 0.0;
  std::size_t vox_offset = kNiftiDataOffset;
  ByteOrder byte_order = ByteOrder::kLittle;

  std::size_t bytes_per_voxel() const;
  std::size_t payload_bytes() const { return dims.count() * bytes_per_voxel(); }
};

class NiftiError : public Error {
 public:
  enum class Kind {
    kMissingFile,
    kIo,
    kMalformedHeader,
    kUnsupportedDatatype,
    kTruncatedPayload,
    kNonFinite,
    kNonIntegralLabel,
    kLabelOutOfSet,
  };

  NiftiError(Kind kind, std::string field, const std::string& detail);

  Kind kind() const { return kind_; }
  /// Header field or payload location the error refers to.
  const std::string& field() const { return field_; }

 private:
  Kind kind_;
  std::string field_;
};

/// Parses and validates the fixed 348-byte header. Never reads past `bytes`.
NiftiHeaderView parse_nifti_header(std::span<const std::byte> bytes);

Volume read_volume(const std::filesystem::path& path);

/// Reads a label image. Scaled values must be integral and members of
/// `encoding`; offending voxels are reported by index.
LabelMap read_labels(const std::filesystem::path& path, const LabelEncoding& encoding = {});

struct WriteOptions {
  /// Unset: gzip when the path ends in ".gz".
  std::optional<bool> gzip;
  ByteOrder byte_order = ByteOrder::kLittle;
  /// Storage type for intensity volumes; labels are always uint8. Integer
  /// types require integral in-range intensities.
  NiftiDatatype datatype = NiftiDatatype::kFloat32;
  int compression_level = 6;
};

/// Writes with scl_slope = 1 and scl_inter = 0.
void write_volume(const Volume& vol, const std::filesystem::path& path,
                  const WriteOptions& options = {});
void write_volume(const LabelMap& labels, const std::filesystem::path& path,
                  const WriteOptions& options = {});

/// Encodes a complete uncompressed file image (header, 4 extension bytes,
/// payload) in memory.
std::vector<std::byte> encode_nifti(const Volume& vol, const WriteOptions& options = {});
std::vector<std::byte> encode_nifti(const LabelMap& labels, const WriteOptions& options = {});

/// Decodes a complete uncompressed file image.
Volume decode_volume(std::span<const std::byte> file);

// Plain-text fixture format for hand-written test cases. A header file of
// "key value" lines:
//
//   dims 4 4 2
//   spacing 0.625 0.625 2.5
//   datatype uint8        # uint8 | int16 | float32
//   payload case01.raw    # relative to the header file
//
// with the payload holding raw little-endian voxels, x fastest.

Volume read_fixture_volume(const std::filesystem::path& header);
LabelMap read_fixture_labels(const std::filesystem::path& header,
                             const LabelEncoding& encoding = {});
void write_fixture(const Volume& vol, const std::filesystem::path& header,
                   NiftiDatatype datatype = NiftiDatatype::kFloat32);

}  // namespace atriaseg
