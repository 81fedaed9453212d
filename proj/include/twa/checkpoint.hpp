#pragma once

#include <string>

#include "twa/model.hpp"

namespace twa {

// Checkpoint container (JSON, version 1):
//   {"format": "twa-checkpoint", "version": 1,
//    "config": {"vocab_size", "embed_dim", "hidden_dim", "num_heads",
//               "max_src_len", "max_tgt_len", "seed"},
//    "tensors": [{"name": str, "rows": int, "cols": int,
//                 "data": [column-major values]}, ...]}
// Tensors appear in Parameters::for_each order. Values are written with
// round-trip precision, so save/load is exact for double models.
void save_checkpoint(const std::string& path, const Seq2SeqModel<double>& model);
Seq2SeqModel<double> load_checkpoint(const std::string& path);

std::string checkpoint_to_string(const Seq2SeqModel<double>& model);
Seq2SeqModel<double> checkpoint_from_string(const std::string& text);

}  // namespace twa
