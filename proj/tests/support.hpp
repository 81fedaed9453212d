#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "twa/annotations.hpp"
#include "twa/common.hpp"
#include "twa/model.hpp"

namespace twa::test {

/// Fresh directory under the system temp path, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& name) {
    path_ = std::filesystem::temp_directory_path() / ("twa_test_" + name);
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void spit(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

inline ModelConfig tiny_config(int vocab = 11, std::uint64_t seed = 7) {
  ModelConfig c;
  c.vocab_size = vocab;
  c.embed_dim = 8;
  c.hidden_dim = 8;
  c.num_heads = 2;
  c.max_src_len = 8;
  c.max_tgt_len = 8;
  c.seed = seed;
  return c;
}

/// Perturbs a fresh model so gradients are not dominated by the small init.
inline Seq2SeqModel<double> random_model(const ModelConfig& c, double scale = 0.5) {
  auto m = make_model<double>(c);
  Rng rng(derive_seed(c.seed, "perturb"));
  m.params.for_each([&](auto&&, Matrix<double>& t) {
    for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = rng.uniform(-scale, scale);
  });
  return m;
}

inline std::vector<int> random_ids(Rng& rng, int len, int vocab, bool bos_eos) {
  std::vector<int> ids;
  if (bos_eos) ids.push_back(1);
  for (int i = 0; i < len; ++i) ids.push_back(static_cast<int>(rng.between(4, vocab - 1)));
  if (bos_eos) ids.push_back(2);
  return ids;
}

inline AnnotatedExample make_example(std::string source_id, std::string system_id, std::string output,
                                     std::vector<ErrorSpan> spans = {}, bool reference = false) {
  AnnotatedExample ex;
  ex.source_id = std::move(source_id);
  ex.system_id = std::move(system_id);
  ex.source_text = "src";
  ex.output_text = std::move(output);
  ex.spans = std::move(spans);
  ex.is_reference = reference;
  return ex;
}

}  // namespace twa::test
