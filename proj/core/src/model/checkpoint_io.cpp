#include "scbm/model/checkpoint_io.hpp"

#include <array>
#include <cstdio>

#include <nlohmann/json.hpp>

#include "scbm/binary_io.hpp"
#include "scbm/error.hpp"

namespace scbm {
namespace {

constexpr std::array<char, 8> kMagic = {'S', 'C', 'B', 'M', 'C', 'K', 'P', 'T'};

nlohmann::json history_json(const std::vector<EpochRecord>& history) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : history)
    arr.push_back({{"epoch", r.epoch},
                   {"train_loss", r.train_loss},
                   {"train_concept_nll", r.train_concept_nll},
                   {"train_target", r.train_target},
                   {"train_penalty", r.train_penalty},
                   {"val_target_accuracy", r.val_target_accuracy},
                   {"val_concept_accuracy", r.val_concept_accuracy},
                   {"val_concept_nll", r.val_concept_nll}});
  return arr;
}

std::vector<EpochRecord> history_from_json(const nlohmann::json& arr) {
  std::vector<EpochRecord> out;
  for (const auto& j : arr) {
    EpochRecord r;
    r.epoch = j.at("epoch").get<int>();
    r.train_loss = j.at("train_loss").get<double>();
    r.train_concept_nll = j.at("train_concept_nll").get<double>();
    r.train_target = j.at("train_target").get<double>();
    r.train_penalty = j.at("train_penalty").get<double>();
    r.val_target_accuracy = j.at("val_target_accuracy").get<double>();
    r.val_concept_accuracy = j.at("val_concept_accuracy").get<double>();
    r.val_concept_nll = j.at("val_concept_nll").get<double>();
    out.push_back(r);
  }
  return out;
}

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ck) {
  const ScbmModel& m = ck.model;
  nlohmann::json header;
  header["variant"] = to_string(m.variant());
  header["num_features"] = m.num_features();
  header["num_concepts"] = m.num_concepts();
  header["train_config"] = ck.config;
  header["arch"] = m.arch();
  nlohmann::json params = nlohmann::json::array();
  for (const auto& e : m.params().entries())
    params.push_back({{"name", e.name}, {"rows", e.value.rows()}, {"cols", e.value.cols()}, {"trainable", e.trainable}});
  header["params"] = params;
  header["history"] = history_json(ck.history);
  header["best_epoch"] = ck.best_epoch;

  io::ByteWriter w;
  w.bytes(kMagic.data(), kMagic.size());
  w.pod<std::uint32_t>(kCheckpointFormatVersion);
  w.string(header.dump());
  for (const auto& e : m.params().entries()) w.doubles(e.value);
  ck.percentiles.validate();
  w.pod<std::uint64_t>(static_cast<std::uint64_t>(ck.percentiles.dim()));
  w.doubles(ck.percentiles.low);
  w.doubles(ck.percentiles.high);
  w.seal();
  return w.buffer();
}

Checkpoint deserialize_checkpoint(std::vector<std::uint8_t> bytes) {
  io::ByteReader r(std::move(bytes), "checkpoint file");
  std::array<char, 8> magic{};
  r.bytes(magic.data(), magic.size());
  if (magic != kMagic) throw IoError("not a checkpoint file (bad magic)");
  const auto version = r.pod<std::uint32_t>();
  if (version != kCheckpointFormatVersion) throw VersionError(version, kCheckpointFormatVersion);
  r.verify_checksum();

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(r.string());
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("checkpoint header: ") + e.what());
  }

  Checkpoint ck;
  try {
    const Variant variant = parse_variant(header.at("variant").get<std::string>());
    const auto p = header.at("num_features").get<Index>();
    const auto c = header.at("num_concepts").get<Index>();
    ck.config = header.at("train_config").get<TrainConfig>();
    const auto arch = header.at("arch").get<ArchConfig>();
    const std::uint64_t limit = r.data().size();
    nn::ParamStore params;
    for (const auto& pj : header.at("params")) {
      const auto rows = pj.at("rows").get<Index>();
      const auto cols = pj.at("cols").get<Index>();
      if (rows < 0 || cols < 0 || static_cast<std::uint64_t>(rows) > limit ||
          static_cast<std::uint64_t>(cols) > limit / 8)
        throw IoError("checkpoint header: implausible parameter shape");
      params.add(pj.at("name").get<std::string>(), r.doubles(rows, cols), pj.at("trainable").get<bool>());
    }
    ck.model = ScbmModel::from_params(variant, p, c, arch, std::move(params));
    ck.history = history_from_json(header.at("history"));
    ck.best_epoch = header.at("best_epoch").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("checkpoint header: ") + e.what());
  }

  const auto dim = r.pod<std::uint64_t>();
  if (dim != static_cast<std::uint64_t>(ck.model.num_concepts()))
    throw IoError("checkpoint: percentile table length does not match the concept count");
  ck.percentiles.low = r.doubles(static_cast<Index>(dim), 1);
  ck.percentiles.high = r.doubles(static_cast<Index>(dim), 1);
  r.expect_end();
  ck.percentiles.validate();
  return ck;
}

void save_checkpoint(const Checkpoint& ck, const std::string& path) {
  io::ByteWriter w;
  const auto bytes = serialize_checkpoint(ck);
  w.bytes(bytes.data(), bytes.size());
  w.write_file(path);
}

Checkpoint load_checkpoint(const std::string& path) {
  auto reader = io::ByteReader::from_file(path, "checkpoint file");
  return deserialize_checkpoint(reader.data());
}

std::string checkpoint_hash(const std::vector<std::uint8_t>& bytes) {
  // The sealed file ends in its own crc32, and a crc over data plus its crc is a
  // constant, so hash only what precedes the trailer.
  const std::size_t n = bytes.size() >= 4 ? bytes.size() - 4 : bytes.size();
  char buf[9];
  std::snprintf(buf, sizeof buf, "%08x", io::crc32(bytes.data(), n));
  return buf;
}

std::string checkpoint_hash(const Checkpoint& ck) { return checkpoint_hash(serialize_checkpoint(ck)); }

}  // namespace scbm
