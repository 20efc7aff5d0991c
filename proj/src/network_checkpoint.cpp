#include "dnet/network.h"

#include <json.hpp>

#include <cstring>
#include <fstream>
#include <vector>

namespace dnet {

using nlohmann::json;

namespace {

constexpr char kMagic[] = "DNETCKPT";
constexpr int kFormatVersion = 1;

} // namespace

json network_config_to_json(const NetworkConfig& c) {
  return json{{"width", c.width},
              {"n_blocks", c.n_blocks},
              {"input_mode", c.input_mode},
              {"head", c.head},
              {"dropout", c.dropout},
              {"gradient_mode", c.gradient_mode},
              {"mlp_hidden_layers", c.mlp_hidden_layers},
              {"n_out", c.n_out},
              {"k", c.k},
              {"use_diffusion", c.use_diffusion},
              {"use_gradient_features", c.use_gradient_features},
              {"fixed_time", c.fixed_time},
              {"learn_A", c.learn_A}};
}

NetworkConfig network_config_from_json(const json& j) {
  NetworkConfig c;
  c.width = j.value("width", c.width);
  c.n_blocks = j.value("n_blocks", c.n_blocks);
  c.input_mode = j.value("input_mode", c.input_mode);
  c.head = j.value("head", c.head);
  c.dropout = j.value("dropout", c.dropout);
  c.gradient_mode = j.value("gradient_mode", c.gradient_mode);
  c.mlp_hidden_layers = j.value("mlp_hidden_layers", c.mlp_hidden_layers);
  c.n_out = j.value("n_out", c.n_out);
  c.k = j.value("k", c.k);
  c.use_diffusion = j.value("use_diffusion", c.use_diffusion);
  c.use_gradient_features = j.value("use_gradient_features", c.use_gradient_features);
  c.fixed_time = j.value("fixed_time", c.fixed_time);
  c.learn_A = j.value("learn_A", c.learn_A);
  c.validate();
  return c;
}

void save_checkpoint(const DiffusionNetParams& params, const std::string& path) {
  json plist = json::array();
  for (const auto& p : params.store.items)
    plist.push_back(json{{"name", p.name},
                         {"rows", p.value.rows()},
                         {"cols", p.value.cols()},
                         {"trainable", p.trainable}});
  json header = {{"format_version", kFormatVersion},
                 {"network", network_config_to_json(params.config)},
                 {"params", plist}};
  std::string hs = header.dump();

  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write checkpoint: " + path);
  os.write(kMagic, 8);
  uint64_t len = hs.size();
  os.write(reinterpret_cast<const char*>(&len), 8);
  os.write(hs.data(), static_cast<std::streamsize>(hs.size()));
  for (const auto& p : params.store.items) {
    // row-major blobs
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = p.value;
    os.write(reinterpret_cast<const char*>(rm.data()),
             static_cast<std::streamsize>(static_cast<size_t>(rm.size()) * 8));
  }
  if (!os) throw Error("short write to checkpoint: " + path);
}

DiffusionNetParams load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint: " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0)
    throw Error("not a checkpoint file: " + path);
  uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), 8);
  std::string hs(len, '\0');
  in.read(hs.data(), static_cast<std::streamsize>(len));
  if (!in) throw Error("truncated checkpoint header: " + path);

  json header;
  try {
    header = json::parse(hs);
  } catch (const json::exception& e) {
    throw Error("corrupt checkpoint header: " + std::string(e.what()));
  }
  if (header.value("format_version", -1) != kFormatVersion)
    throw Error("checkpoint format version mismatch in " + path);

  DiffusionNetParams params;
  params.config = network_config_from_json(header.at("network"));
  for (const auto& pj : header.at("params")) {
    int rows = pj.at("rows").get<int>();
    int cols = pj.at("cols").get<int>();
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(rows, cols);
    in.read(reinterpret_cast<char*>(rm.data()),
            static_cast<std::streamsize>(static_cast<size_t>(rows) * cols * 8));
    if (!in) throw Error("truncated checkpoint blob for " + pj.at("name").get<std::string>());
    ad::Param& p = params.store.add(pj.at("name").get<std::string>(), Eigen::MatrixXd(rm),
                                    pj.value("trainable", true));
    p.zero_grad();
  }
  return params;
}

} // namespace dnet
