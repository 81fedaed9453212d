#include "twa/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace twa {

std::string checkpoint_to_string(const Seq2SeqModel<double>& model) {
  nlohmann::ordered_json j;
  j["format"] = "twa-checkpoint";
  j["version"] = 1;
  const auto& c = model.config;
  j["config"] = {{"vocab_size", c.vocab_size}, {"embed_dim", c.embed_dim},     {"hidden_dim", c.hidden_dim},
                 {"num_heads", c.num_heads},   {"max_src_len", c.max_src_len}, {"max_tgt_len", c.max_tgt_len},
                 {"seed", c.seed}};
  auto tensors = nlohmann::ordered_json::array();
  model.params.for_each([&](const auto& name, const Matrix<double>& m) {
    nlohmann::ordered_json t;
    t["name"] = std::string(name);
    t["rows"] = m.rows();
    t["cols"] = m.cols();
    t["data"] = std::vector<double>(m.data(), m.data() + m.size());
    tensors.push_back(std::move(t));
  });
  j["tensors"] = std::move(tensors);
  return j.dump();
}

Seq2SeqModel<double> checkpoint_from_string(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.value("format", "") != "twa-checkpoint") throw DataError("not a checkpoint file");
    if (j.value("version", 0) != 1) throw DataError("unsupported checkpoint version");
    const auto& c = j.at("config");
    ModelConfig config;
    config.vocab_size = c.at("vocab_size").get<int>();
    config.embed_dim = c.at("embed_dim").get<int>();
    config.hidden_dim = c.at("hidden_dim").get<int>();
    config.num_heads = c.at("num_heads").get<int>();
    config.max_src_len = c.at("max_src_len").get<int>();
    config.max_tgt_len = c.at("max_tgt_len").get<int>();
    config.seed = c.at("seed").get<std::uint64_t>();
    auto model = make_model<double>(config);
    const auto& tensors = j.at("tensors");
    std::size_t i = 0;
    model.params.for_each([&](const auto& name, Matrix<double>& m) {
      if (i >= tensors.size()) throw DataError("checkpoint is missing tensor " + std::string(name));
      const auto& t = tensors[i++];
      if (t.at("name").get<std::string>() != std::string(name) || t.at("rows").get<Eigen::Index>() != m.rows() ||
          t.at("cols").get<Eigen::Index>() != m.cols()) {
        throw DataError("checkpoint tensor " + std::string(name) + " has the wrong name or shape");
      }
      const auto data = t.at("data").get<std::vector<double>>();
      if (static_cast<Eigen::Index>(data.size()) != m.size()) {
        throw DataError("checkpoint tensor " + std::string(name) + " has the wrong size");
      }
      m = Eigen::Map<const Matrix<double>>(data.data(), m.rows(), m.cols());
    });
    if (i != tensors.size()) throw DataError("checkpoint has unexpected extra tensors");
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed checkpoint: ") + e.what());
  } catch (const UsageError& e) {
    throw DataError(std::string("invalid checkpoint config: ") + e.what());
  }
}

void save_checkpoint(const std::string& path, const Seq2SeqModel<double>& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << checkpoint_to_string(model) << '\n';
}

Seq2SeqModel<double> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return checkpoint_from_string(buf.str());
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

}  // namespace twa
