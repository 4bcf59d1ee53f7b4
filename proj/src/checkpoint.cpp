#include "catn/checkpoint.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "catn/config.hpp"

namespace catn {

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'C', 'A', 'T', 'N', 'C', 'K', 'P', 'T'};

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <typename T>
void put_le(std::string& out, T value) {
  char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  out.append(bytes, sizeof(T));
}

template <typename T>
T get_le(const char* p) {
  T value;
  std::memcpy(&value, p, sizeof(T));
  return value;
}

json network_json(const char* name, const Mlp& mlp) {
  const auto& s = mlp.spec();
  return json{{"name", name},
              {"in_dim", s.in_dim},
              {"hidden", s.hidden},
              {"out_dim", s.out_dim},
              {"hidden_activation", std::string(to_string(s.hidden_activation))},
              {"output_activation", std::string(to_string(s.output_activation))}};
}

json networks_json(const ModelSuite& suite) {
  json nets = json::array();
  nets.push_back(network_json("F", suite.feature));
  nets.push_back(network_json("P", suite.predictor));
  if (suite.domain_disc) nets.push_back(network_json("D_d", *suite.domain_disc));
  if (suite.s2t) nets.push_back(network_json("T_s2t", *suite.s2t));
  if (suite.t2s) nets.push_back(network_json("T_t2s", *suite.t2s));
  if (suite.source_disc) nets.push_back(network_json("D_s", *suite.source_disc));
  if (suite.target_disc) nets.push_back(network_json("D_t", *suite.target_disc));
  return nets;
}

json header_json(const ModelSuite& suite, const TrainConfig& cfg, std::size_t step) {
  json h;
  h["format"] = "catn-checkpoint";
  h["version"] = kCheckpointVersion;
  h["arch"] = to_json(suite.arch);
  h["config"] = to_json(cfg);
  h["seed"] = cfg.seed;
  h["step"] = step;
  h["networks"] = networks_json(suite);
  h["conditioning_branch"] =
      std::string(to_string(select_branch(suite.arch.feature_dim, suite.arch.num_classes, suite.arch.conditioning)));
  if (suite.maps) {
    h["randomized_maps"] = json{{"seed", suite.maps->seed},
                                {"dim", suite.maps->dim},
                                {"feature_dim", suite.maps->feature_dim()},
                                {"prediction_dim", suite.maps->prediction_dim()}};
  } else {
    h["randomized_maps"] = nullptr;
  }
  json params = json::array();
  std::size_t total = 0;
  for (const auto& p : collect_params(suite)) {
    params.push_back(json{{"name", p.name}, {"shape", p.tensor.shape()}});
    total += p.tensor.numel();
  }
  h["parameters"] = params;
  h["scalar_count"] = total;
  return h;
}

}  // namespace

void save_checkpoint(const ModelSuite& suite, const TrainConfig& cfg, std::size_t step,
                     const std::filesystem::path& path) {
  const std::string header = header_json(suite, cfg, step).dump();
  std::string bytes(kMagic, sizeof kMagic);
  put_le<std::uint32_t>(bytes, kCheckpointVersion);
  put_le<std::uint64_t>(bytes, header.size());
  bytes += header;
  for (const auto& p : collect_params(suite))
    for (double v : p.tensor.data()) put_le<std::uint64_t>(bytes, std::bit_cast<std::uint64_t>(v));

  // Write next to the destination, then rename, so readers never see a
  // partial file.
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot open " + tmp.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FormatError("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::size_t prefix = sizeof kMagic + sizeof(std::uint32_t) + sizeof(std::uint64_t);
  if (bytes.size() < prefix || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0)
    throw FormatError(path.string() + ": not a checkpoint file");
  const auto version = get_le<std::uint32_t>(bytes.data() + sizeof kMagic);
  if (version != kCheckpointVersion)
    throw FormatError(path.string() + ": unsupported checkpoint version " + std::to_string(version));
  const auto header_len = get_le<std::uint64_t>(bytes.data() + sizeof kMagic + sizeof(std::uint32_t));
  if (header_len > bytes.size() - prefix) throw FormatError(path.string() + ": truncated header");

  json header;
  try {
    header = json::parse(bytes.substr(prefix, header_len));
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": malformed header: " + e.what());
  }

  Checkpoint ck;
  try {
    if (header.at("format") != "catn-checkpoint") throw FormatError(path.string() + ": wrong format tag");
    ck.config = config_from_json(header.at("config"));
    ck.suite = build_suite(arch_from_json(header.at("arch")));
    ck.step = header.at("step").get<std::size_t>();
    if (header.at("networks") != networks_json(ck.suite))
      throw FormatError(path.string() + ": network list does not match the stored architecture");
    if (header.at("arch") != to_json(ck.suite.arch))
      throw FormatError(path.string() + ": architecture block is inconsistent");
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": bad header: " + e.what());
  } catch (const ContractError& e) {
    throw FormatError(path.string() + ": bad header: " + e.what());
  }

  auto params = collect_params(ck.suite);
  const auto& described = header.at("parameters");
  if (described.size() != params.size()) throw FormatError(path.string() + ": parameter count mismatch");
  std::size_t total = 0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (described[i].at("name") != params[i].name || described[i].at("shape") != json(params[i].tensor.shape()))
      throw FormatError(path.string() + ": parameter " + std::to_string(i) + " does not match the architecture");
    total += params[i].tensor.numel();
  }
  const std::size_t payload = bytes.size() - prefix - header_len;
  if (payload != total * sizeof(double))
    throw FormatError(path.string() + ": expected " + std::to_string(total * sizeof(double)) +
                      " parameter bytes, found " + std::to_string(payload) + " (truncated or corrupt)");

  const char* p = bytes.data() + prefix + header_len;
  for (auto& param : params) {
    auto values = param.tensor.mutable_data();
    for (auto& v : values) {
      v = std::bit_cast<double>(get_le<std::uint64_t>(p));
      p += sizeof(double);
      if (!std::isfinite(v)) throw FormatError(path.string() + ": non-finite value in " + param.name);
    }
  }
  return ck;
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const ArchConfig& expected) {
  auto ck = load_checkpoint(path);
  if (!(ck.suite.arch == expected))
    throw FormatError(path.string() + ": architecture mismatch: checkpoint has " + to_json(ck.suite.arch).dump() +
                      ", expected " + to_json(expected).dump());
  return ck;
}

}  // namespace catn
