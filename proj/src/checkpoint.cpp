#include "biogan/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include <json.hpp>

#include "biogan/error.hpp"

namespace biogan {
namespace {

using nlohmann::json;

constexpr char kMagic[8] = {'B', 'G', 'C', 'K', 'P', 'T', '\x01', '\n'};

json describe(const std::vector<const nn::Parameter*>& params,
              const std::vector<const nn::Parameter*>& buffers) {
  json list = json::array();
  for (const auto* group : {&params, &buffers}) {
    for (const auto* p : *group) list.push_back({{"name", p->name}, {"shape", p->shape}});
  }
  return list;
}

void append_values(std::string& out, const std::vector<const nn::Parameter*>& list) {
  for (const auto* p : list) {
    for (double v : p->value) {
      std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
      for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
    }
  }
}

// Compares the stored tensor listing with the freshly built network.
void check_layout(const json& stored, const json& built, const std::string& network,
                  std::vector<std::string>& diffs) {
  if (stored.size() != built.size()) {
    diffs.push_back(network + ".tensors: stored " + std::to_string(stored.size()) +
                    " entries, network has " + std::to_string(built.size()));
  }
  const std::size_t n = std::min(stored.size(), built.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (stored[i] != built[i]) {
      diffs.push_back(network + ".tensors[" + std::to_string(i) + "]: stored " + stored[i].dump() +
                      ", network has " + built[i].dump());
    }
  }
}

class ValueReader {
 public:
  ValueReader(const std::string& bytes, std::size_t pos) : bytes_(bytes), pos_(pos) {}

  void fill(std::vector<nn::Parameter*>& list) {
    for (auto* p : list) {
      for (double& v : p->value) {
        if (pos_ + 8 > bytes_.size()) throw CheckpointError("checkpoint data section is truncated");
        std::uint64_t bits = 0;
        for (int i = 0; i < 8; ++i) {
          bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
        }
        v = std::bit_cast<double>(bits);
        pos_ += 8;
      }
    }
  }
  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  const std::string& bytes_;
  std::size_t pos_;
};

template <typename Net>
json layout_of(const Net& net) {
  std::vector<const nn::Parameter*> params;
  std::vector<const nn::Parameter*> buffers;
  net.collect(params, buffers);
  return describe(params, buffers);
}

}  // namespace

void write_file_atomic(const std::filesystem::path& path, const std::string& bytes) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw IoError("failed writing " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot move checkpoint into place at " + path.string());
  }
}

void save_checkpoint(const std::filesystem::path& path, int epoch, const Generator& g,
                     const Discriminator& d, const TrainingConfig& config) {
  std::vector<const nn::Parameter*> gp, gb, dp, db;
  g.collect(gp, gb);
  d.collect(dp, db);

  json config_json = json::array();
  for (const auto& [k, v] : config_entries(config)) config_json.push_back({k, v});

  const json header = {
      {"format", 1},
      {"epoch", epoch},
      {"generator",
       {{"kind", to_string(g.spec().kind)},
        {"width_multiplier", g.spec().width_multiplier},
        {"dropout", g.spec().dropout},
        {"seed", g.seed()},
        {"tensors", describe(gp, gb)}}},
      {"discriminator",
       {{"width_multiplier", d.spec().width_multiplier},
        {"seed", d.seed()},
        {"tensors", describe(dp, db)}}},
      {"config", config_json},
  };
  const std::string header_text = header.dump();
  std::string out(kMagic, sizeof kMagic);
  const auto len = static_cast<std::uint64_t>(header_text.size());
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((len >> (8 * i)) & 0xFF));
  out += header_text;
  append_values(out, gp);
  append_values(out, gb);
  append_values(out, dp);
  append_values(out, db);
  write_file_atomic(path, out);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    throw CheckpointError("not a checkpoint file: " + path.string());
  }
  std::uint64_t len = 0;
  for (int i = 0; i < 8; ++i) len |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[8 + i])) << (8 * i);
  if (16 + len > bytes.size()) throw CheckpointError("checkpoint header is truncated");

  json header;
  GeneratorSpec gspec;
  DiscriminatorSpec dspec;
  std::uint64_t gseed = 0;
  std::uint64_t dseed = 0;
  int epoch = 0;
  std::vector<std::pair<std::string, std::string>> config;
  try {
    header = json::parse(bytes.substr(16, len));
    epoch = header.at("epoch").get<int>();
    const json& gj = header.at("generator");
    gspec.kind = parse_generator_kind(gj.at("kind").get<std::string>());
    gspec.width_multiplier = gj.at("width_multiplier").get<double>();
    gspec.dropout = gj.at("dropout").get<bool>();
    gseed = gj.at("seed").get<std::uint64_t>();
    const json& dj = header.at("discriminator");
    dspec.width_multiplier = dj.at("width_multiplier").get<double>();
    dseed = dj.at("seed").get<std::uint64_t>();
    for (const auto& kv : header.at("config")) {
      config.emplace_back(kv.at(0).get<std::string>(), kv.at(1).get<std::string>());
    }
  } catch (const json::exception& e) {
    throw CheckpointError("malformed checkpoint header in " + path.string() + ": " + e.what());
  } catch (const ArgumentError& e) {
    throw CheckpointError("malformed checkpoint header in " + path.string() + ": " + e.what());
  }

  Checkpoint ck{epoch, Generator::build(gspec, gseed), Discriminator::build(dseed, dspec), config};
  std::vector<std::string> diffs;
  check_layout(header["generator"]["tensors"], layout_of(ck.generator), "generator", diffs);
  check_layout(header["discriminator"]["tensors"], layout_of(ck.discriminator), "discriminator",
               diffs);
  if (!diffs.empty()) {
    std::ostringstream msg;
    msg << "checkpoint " << path.string() << " does not match the network it describes:";
    for (const auto& d : diffs) msg << "\n  " << d;
    throw CheckpointError(msg.str());
  }

  ValueReader reader(bytes, 16 + len);
  auto gset = ck.generator.parameters();
  auto dset = ck.discriminator.parameters();
  reader.fill(gset.params);
  reader.fill(gset.buffers);
  reader.fill(dset.params);
  reader.fill(dset.buffers);
  if (!reader.at_end()) throw CheckpointError("trailing bytes after checkpoint data");
  return ck;
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const GeneratorSpec& expected) {
  Checkpoint ck = load_checkpoint(path);
  const GeneratorSpec& got = ck.generator.spec();
  std::vector<std::string> diffs;
  if (got.kind != expected.kind) {
    diffs.push_back(std::string("generator.kind: checkpoint ") + to_string(got.kind) +
                    ", expected " + to_string(expected.kind));
  }
  if (got.width_multiplier != expected.width_multiplier) {
    diffs.push_back("generator.width_multiplier: checkpoint " + std::to_string(got.width_multiplier) +
                    ", expected " + std::to_string(expected.width_multiplier));
  }
  if (got.dropout != expected.dropout) {
    diffs.push_back(std::string("generator.dropout: checkpoint ") + (got.dropout ? "true" : "false") +
                    ", expected " + (expected.dropout ? "true" : "false"));
  }
  if (!diffs.empty()) {
    std::string msg = "generator spec mismatch in " + path.string() + ":";
    for (const auto& d : diffs) msg += "\n  " + d;
    throw CheckpointError(msg);
  }
  return ck;
}

}  // namespace biogan
