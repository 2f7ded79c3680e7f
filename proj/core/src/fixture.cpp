#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "atriaseg/nifti.hpp"

namespace atriaseg {
namespace {

using Kind = NiftiError::Kind;

struct FixtureHeader {
  Dims dims{};
  Spacing spacing{};
  NiftiDatatype datatype = NiftiDatatype::kFloat32;
  std::filesystem::path payload;
};

const char* datatype_name(NiftiDatatype dt) {
  switch (dt) {
    case NiftiDatatype::kUint8: return "uint8";
    case NiftiDatatype::kInt16: return "int16";
    case NiftiDatatype::kFloat32: return "float32";
  }
  return "?";
}

FixtureHeader parse_fixture(const std::filesystem::path& header) {
  std::ifstream in(header);
  if (!in) throw NiftiError(Kind::kMissingFile, "path", header.string());
  FixtureHeader h;
  bool have_dims = false;
  bool have_payload = false;
  std::string line;
  while (std::getline(in, line)) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string key;
    if (!(ls >> key)) continue;
    if (key == "dims") {
      if (!(ls >> h.dims.nx >> h.dims.ny >> h.dims.nz) || !h.dims.valid()) {
        throw NiftiError(Kind::kMalformedHeader, "dims", "expected three integers >= 1");
      }
      have_dims = true;
    } else if (key == "spacing") {
      if (!(ls >> h.spacing.dx >> h.spacing.dy >> h.spacing.dz) || !h.spacing.valid()) {
        throw NiftiError(Kind::kMalformedHeader, "spacing", "expected three reals > 0");
      }
    } else if (key == "datatype") {
      std::string dt;
      ls >> dt;
      if (dt == "uint8") {
        h.datatype = NiftiDatatype::kUint8;
      } else if (dt == "int16") {
        h.datatype = NiftiDatatype::kInt16;
      } else if (dt == "float32") {
        h.datatype = NiftiDatatype::kFloat32;
      } else {
        throw NiftiError(Kind::kUnsupportedDatatype, "datatype", "'" + dt + "'");
      }
    } else if (key == "payload") {
      std::string name;
      ls >> name;
      h.payload = header.parent_path() / name;
      have_payload = true;
    } else {
      throw NiftiError(Kind::kMalformedHeader, key, "unknown fixture key");
    }
  }
  if (!have_dims) throw NiftiError(Kind::kMalformedHeader, "dims", "missing");
  if (!have_payload) throw NiftiError(Kind::kMalformedHeader, "payload", "missing");
  return h;
}

std::vector<double> read_fixture_values(const FixtureHeader& h) {
  std::ifstream in(h.payload, std::ios::binary);
  if (!in) throw NiftiError(Kind::kMissingFile, "payload", h.payload.string());
  const std::size_t n = h.dims.count();
  const std::size_t bpv = h.datatype == NiftiDatatype::kUint8   ? 1
                          : h.datatype == NiftiDatatype::kInt16 ? 2
                                                                : 4;
  std::vector<unsigned char> raw(n * bpv);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(in.gcount()) != raw.size()) {
    throw NiftiError(Kind::kTruncatedPayload, "payload",
                     "expected " + std::to_string(raw.size()) + " bytes in " +
                         h.payload.string());
  }
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const unsigned char* p = raw.data() + i * bpv;
    switch (h.datatype) {
      case NiftiDatatype::kUint8:
        out[i] = p[0];
        break;
      case NiftiDatatype::kInt16:
        out[i] = static_cast<std::int16_t>(static_cast<std::uint16_t>(p[0] | (p[1] << 8)));
        break;
      case NiftiDatatype::kFloat32: {
        const std::uint32_t bits = static_cast<std::uint32_t>(p[0]) |
                                   (static_cast<std::uint32_t>(p[1]) << 8) |
                                   (static_cast<std::uint32_t>(p[2]) << 16) |
                                   (static_cast<std::uint32_t>(p[3]) << 24);
        float f;
        std::memcpy(&f, &bits, 4);
        out[i] = f;
        break;
      }
    }
  }
  return out;
}

}  // namespace

Volume read_fixture_volume(const std::filesystem::path& header) {
  const FixtureHeader h = parse_fixture(header);
  const auto values = read_fixture_values(h);
  std::vector<float> data(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    data[i] = static_cast<float>(values[i]);
    if (!std::isfinite(data[i])) {
      throw NiftiError(Kind::kNonFinite, "payload", "non-finite intensity at " + std::to_string(i));
    }
  }
  return Volume(h.dims, h.spacing, std::move(data));
}

LabelMap read_fixture_labels(const std::filesystem::path& header, const LabelEncoding& encoding) {
  const FixtureHeader h = parse_fixture(header);
  const auto values = read_fixture_values(h);
  std::vector<std::uint8_t> data(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double v = values[i];
    if (v != std::floor(v)) {
      throw NiftiError(Kind::kNonIntegralLabel, "payload", "non-integral label at " + std::to_string(i));
    }
    if (v < 0.0 || v > 255.0 || !encoding.allows(static_cast<std::uint8_t>(v))) {
      throw NiftiError(Kind::kLabelOutOfSet, "payload",
                       "label value " + std::to_string(static_cast<long long>(v)) +
                           " at linear index " + std::to_string(i) + " is outside the label set");
    }
    data[i] = static_cast<std::uint8_t>(v);
  }
  return LabelMap(h.dims, h.spacing, std::move(data));
}

void write_fixture(const Volume& vol, const std::filesystem::path& header,
                   NiftiDatatype datatype) {
  auto payload = header;
  payload.replace_extension(".raw");
  {
    std::ofstream os(header);
    os.precision(17);
    os << "dims " << vol.dims().nx << ' ' << vol.dims().ny << ' ' << vol.dims().nz << '\n'
       << "spacing " << vol.spacing().dx << ' ' << vol.spacing().dy << ' ' << vol.spacing().dz
       << '\n'
       << "datatype " << datatype_name(datatype) << '\n'
       << "payload " << payload.filename().string() << '\n';
    if (!os) throw NiftiError(Kind::kIo, "path", "cannot write " + header.string());
  }
  // Reuse the NIfTI encoder for the little-endian payload bytes.
  WriteOptions opts;
  opts.datatype = datatype;
  const auto encoded = encode_nifti(vol, opts);
  std::ofstream os(payload, std::ios::binary | std::ios::trunc);
  os.write(reinterpret_cast<const char*>(encoded.data() + kNiftiDataOffset),
           static_cast<std::streamsize>(encoded.size() - kNiftiDataOffset));
  if (!os) throw NiftiError(Kind::kIo, "path", "cannot write " + payload.string());
}

}  // namespace atriaseg
