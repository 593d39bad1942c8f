#include "scbm/synth/dataset_io.hpp"

#include <array>
#include <cstring>

#include "scbm/binary_io.hpp"
#include "scbm/error.hpp"

namespace scbm::synth {
namespace {

constexpr std::array<char, 8> kMagic = {'S', 'C', 'B', 'M', 'D', 'A', 'T', 'A'};
constexpr std::uint32_t kHasLogits = 1u << 0;
constexpr std::uint32_t kHasSigma = 1u << 1;

}  // namespace

std::vector<std::uint8_t> serialize(const Dataset& ds) {
  ds.validate();
  const auto n = static_cast<std::uint64_t>(ds.size());
  const auto p = static_cast<std::uint64_t>(ds.num_features());
  const auto c = static_cast<std::uint64_t>(ds.num_concepts());

  io::ByteWriter w;
  w.bytes(kMagic.data(), kMagic.size());
  w.pod<std::uint32_t>(kDatasetFormatVersion);
  std::uint32_t flags = 0;
  if (ds.logits) flags |= kHasLogits;
  if (ds.sigma) flags |= kHasSigma;
  w.pod<std::uint32_t>(flags);
  w.pod<std::uint64_t>(n);
  w.pod<std::uint64_t>(p);
  w.pod<std::uint64_t>(c);

  for (Split s : ds.split) w.pod<std::uint8_t>(static_cast<std::uint8_t>(s));
  for (int y : ds.labels) w.pod<std::int32_t>(y);
  w.doubles(ds.x);

  std::vector<std::uint8_t> bits((n * c + 7) / 8, 0);
  for (std::uint64_t r = 0; r < n; ++r)
    for (std::uint64_t i = 0; i < c; ++i)
      if (ds.concepts(static_cast<Index>(r), static_cast<Index>(i)) != 0) {
        const std::uint64_t k = r * c + i;
        bits[k / 8] |= static_cast<std::uint8_t>(1u << (k % 8));
      }
  w.bytes(bits.data(), bits.size());

  if (ds.logits) w.doubles(*ds.logits);
  if (ds.sigma) w.doubles(*ds.sigma);
  w.seal();
  return w.buffer();
}

Dataset deserialize(std::vector<std::uint8_t> bytes) {
  io::ByteReader r(std::move(bytes), "dataset file");
  std::array<char, 8> magic{};
  r.bytes(magic.data(), magic.size());
  if (magic != kMagic) throw IoError("not a dataset file (bad magic)");
  const auto version = r.pod<std::uint32_t>();
  if (version != kDatasetFormatVersion) throw VersionError(version, kDatasetFormatVersion);
  const auto flags = r.pod<std::uint32_t>();
  const auto n = r.pod<std::uint64_t>();
  const auto p = r.pod<std::uint64_t>();
  const auto c = r.pod<std::uint64_t>();

  // Refuse to allocate for a header that cannot match the file size.
  const std::uint64_t limit = r.data().size();
  if (n > limit || p > limit || c > limit || (p > 0 && n > limit / 8 / p) || (c > 0 && n > limit * 8 / c))
    throw IoError("truncated dataset file: header declares " + std::to_string(n) + "x" + std::to_string(p) +
                  " covariates and " + std::to_string(c) + " concepts, file has " + std::to_string(limit) + " bytes");

  Dataset ds;
  ds.split.resize(n);
  for (auto& s : ds.split) {
    const auto tag = r.pod<std::uint8_t>();
    if (tag > static_cast<std::uint8_t>(Split::Test)) throw IoError("dataset file: invalid split tag");
    s = static_cast<Split>(tag);
  }
  ds.labels.resize(n);
  for (auto& y : ds.labels) y = r.pod<std::int32_t>();
  ds.x = r.doubles(static_cast<Index>(n), static_cast<Index>(p));

  std::vector<std::uint8_t> bits((n * c + 7) / 8);
  r.bytes(bits.data(), bits.size());
  ds.concepts.resize(static_cast<Index>(n), static_cast<Index>(c));
  for (std::uint64_t row = 0; row < n; ++row)
    for (std::uint64_t i = 0; i < c; ++i) {
      const std::uint64_t k = row * c + i;
      ds.concepts(static_cast<Index>(row), static_cast<Index>(i)) = (bits[k / 8] >> (k % 8)) & 1u;
    }

  if (flags & kHasLogits) ds.logits = r.doubles(static_cast<Index>(n), static_cast<Index>(c));
  if (flags & kHasSigma) ds.sigma = r.doubles(static_cast<Index>(c), static_cast<Index>(c));
  r.expect_end();
  r.verify_checksum();
  ds.validate();
  return ds;
}

void save(const Dataset& ds, const std::string& path) {
  io::ByteWriter w;
  const auto bytes = serialize(ds);
  w.bytes(bytes.data(), bytes.size());
  w.write_file(path);
}

Dataset load(const std::string& path) {
  auto reader = io::ByteReader::from_file(path, "dataset file");
  return deserialize(reader.data());
}

}  // namespace scbm::synth
