#include "psc/checkpoint.hpp"

#include <cstring>
#include <string>
#include <vector>

#include "json.hpp"
#include "psc/errors.hpp"
#include "psc/io.hpp"

namespace psc::checkpoint {

namespace {

constexpr char kMagic[4] = {'P', 'S', 'C', '1'};

void put_u64le(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64le(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

void put_f64le(std::string& out, double d) {
  std::uint64_t bits;
  std::memcpy(&bits, &d, sizeof(bits));
  put_u64le(out, bits);
}

double get_f64le(const unsigned char* p) {
  const std::uint64_t bits = get_u64le(p);
  double d;
  std::memcpy(&d, &bits, sizeof(d));
  return d;
}

nlohmann::json config_to_json(const nn::ModelConfig& cfg) {
  return {
      {"vocab_size", cfg.vocab_size},       {"embed_dim", cfg.embed_dim},
      {"conv1_filters", cfg.conv1_filters}, {"conv2_filters", cfg.conv2_filters},
      {"pool1_window", cfg.pool1_window},   {"conv3_filters", cfg.conv3_filters},
      {"pool2_window", cfg.pool2_window},   {"input_len", cfg.input_len},
  };
}

nn::ModelConfig config_from_json(const nlohmann::json& j) {
  nn::ModelConfig cfg;
  cfg.vocab_size = j.at("vocab_size").get<std::int32_t>();
  cfg.embed_dim = j.at("embed_dim").get<std::int32_t>();
  cfg.conv1_filters = j.at("conv1_filters").get<std::int32_t>();
  cfg.conv2_filters = j.at("conv2_filters").get<std::int32_t>();
  cfg.pool1_window = j.at("pool1_window").get<std::int32_t>();
  cfg.conv3_filters = j.at("conv3_filters").get<std::int32_t>();
  cfg.pool2_window = j.at("pool2_window").get<std::int32_t>();
  cfg.input_len = j.at("input_len").get<std::int32_t>();
  return cfg;
}

}  // namespace

void save(const std::filesystem::path& path, const Checkpoint& ckpt) {
  nlohmann::json header;
  header["format_version"] = 1;
  header["config"] = config_to_json(ckpt.config);
  nlohmann::json codes = nlohmann::json::array();
  for (const MonomerCode& c : ckpt.vocab.codes()) codes.push_back(c.str());
  header["vocab"] = std::move(codes);
  header["epoch"] = ckpt.epoch;
  header["val_acc"] = ckpt.val_acc;
  header["optimizer"] = {
      {"rho", ckpt.opt.rho}, {"lr", ckpt.opt.lr}, {"epsilon", ckpt.opt.epsilon}};
  const std::string header_text = header.dump();

  std::string blob;
  blob.reserve(16 + header_text.size() + ckpt.params.total_values() * 3 * 8);
  blob.append(kMagic, sizeof(kMagic));
  put_u64le(blob, header_text.size());
  blob += header_text;
  for (const nn::Parameters* group :
       {&ckpt.params, &ckpt.opt.eg2, &ckpt.opt.edx2}) {
    for (const Tensor* t : group->tensors())
      for (std::size_t i = 0; i < t->size(); ++i) put_f64le(blob, (*t)[i]);
  }

  io::FileSink sink(path, /*gzipped=*/false);
  sink.write(blob);
  sink.close();
}

Checkpoint load(const std::filesystem::path& path) {
  const std::string blob = io::read_file(path, /*gzipped=*/false);
  auto bad = [&](const std::string& what) {
    raise(ErrorKind::BadCheckpoint, path.string() + ": " + what);
  };
  if (blob.size() < 12 || std::memcmp(blob.data(), kMagic, sizeof(kMagic)) != 0)
    bad("not a checkpoint file (bad magic)");
  const auto* bytes = reinterpret_cast<const unsigned char*>(blob.data());
  const std::uint64_t header_len = get_u64le(bytes + 4);
  if (12 + header_len > blob.size()) bad("truncated header");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(blob.substr(12, header_len));
  } catch (const nlohmann::json::exception& e) {
    bad(std::string("bad JSON header: ") + e.what());
  }

  Checkpoint ckpt;
  try {
    if (header.at("format_version").get<int>() != 1) bad("unsupported format version");
    ckpt.config = config_from_json(header.at("config"));
    ckpt.vocab = Vocabulary::from_ordered(
        header.at("vocab").get<std::vector<std::string>>());
    ckpt.epoch = header.at("epoch").get<std::int64_t>();
    ckpt.val_acc = header.at("val_acc").get<double>();
    const auto& opt = header.at("optimizer");
    ckpt.opt.rho = opt.at("rho").get<double>();
    ckpt.opt.lr = opt.at("lr").get<double>();
    ckpt.opt.epsilon = opt.at("epsilon").get<double>();
  } catch (const nlohmann::json::exception& e) {
    bad(std::string("incomplete header: ") + e.what());
  }
  ckpt.config.validate();
  if (static_cast<std::int64_t>(ckpt.vocab.size()) != ckpt.config.vocab_size)
    bad("vocabulary size disagrees with config.vocab_size");

  ckpt.params = nn::Parameters::zeros(ckpt.config);
  ckpt.opt.eg2 = nn::Parameters::zeros(ckpt.config);
  ckpt.opt.edx2 = nn::Parameters::zeros(ckpt.config);

  const std::size_t values = ckpt.params.total_values() * 3;
  const std::size_t expect = 12 + header_len + values * 8;
  if (blob.size() != expect)
    bad("tensor payload is " + std::to_string(blob.size() - 12 - header_len) +
        " bytes, expected " + std::to_string(values * 8));

  const unsigned char* p = bytes + 12 + header_len;
  for (nn::Parameters* group : {&ckpt.params, &ckpt.opt.eg2, &ckpt.opt.edx2}) {
    for (Tensor* t : group->tensors())
      for (std::size_t i = 0; i < t->size(); ++i, p += 8) (*t)[i] = get_f64le(p);
  }
  return ckpt;
}

}  // namespace psc::checkpoint
