#include "twa/tokenizer.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>

#include <json.hpp>

#include "twa/common.hpp"
#include "twa/unicode.hpp"

namespace twa {

namespace {

const std::vector<std::string> kReservedNames = {"<pad>", "<s>", "</s>", "<unk>"};

}  // namespace

Vocab::Vocab(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  if (tokens_.size() < static_cast<std::size_t>(kNumReserved)) {
    throw DataError("vocabulary needs the 4 reserved entries");
  }
  for (int i = kNumReserved; i < size(); ++i) {
    auto piece = utf8_decode(tokens_[static_cast<std::size_t>(i)]);
    if (piece.empty()) throw DataError("empty vocabulary entry");
    max_piece_length_ = std::max(max_piece_length_, static_cast<int>(piece.size()));
    if (!index_.emplace(std::move(piece), i).second) {
      throw DataError("duplicate vocabulary entry '" + tokens_[static_cast<std::size_t>(i)] + "'");
    }
  }
}

int Vocab::find(std::u32string_view piece) const {
  const auto it = index_.find(std::u32string(piece));
  return it == index_.end() ? -1 : it->second;
}

Vocab build_vocab(const std::vector<std::string>& corpus, int target_size) {
  if (corpus.empty()) throw UsageError("build_vocab: empty corpus");
  std::vector<std::u32string> texts;
  texts.reserve(corpus.size());
  std::set<char32_t> chars;
  for (const auto& s : corpus) {
    texts.push_back(utf8_decode(s));
    chars.insert(texts.back().begin(), texts.back().end());
  }
  const int minimum = static_cast<int>(chars.size()) + kNumReserved;
  if (target_size < minimum) {
    throw UsageError("vocabulary size " + std::to_string(target_size) + " below minimum " +
                     std::to_string(minimum) + " (distinct characters + 4 reserved)");
  }

  std::vector<std::string> tokens = kReservedNames;
  for (char32_t c : chars) tokens.push_back(utf8_encode(std::u32string(1, c)));

  // std::map keeps candidates in lexicographic (codepoint) order, which is the tie-break.
  std::map<std::u32string, long> counts;
  for (const auto& t : texts) {
    for (std::size_t n = 2; n <= static_cast<std::size_t>(kMaxNgram); ++n) {
      for (std::size_t i = 0; i + n <= t.size(); ++i) ++counts[t.substr(i, n)];
    }
  }
  std::vector<std::pair<std::u32string, long>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  for (const auto& [piece, count] : ranked) {
    if (static_cast<int>(tokens.size()) >= target_size) break;
    tokens.push_back(utf8_encode(piece));
  }
  return Vocab(std::move(tokens));
}

void save_vocab(const std::string& path, const Vocab& vocab) {
  nlohmann::ordered_json j;
  j["format"] = "twa-vocab";
  j["version"] = 1;
  j["tokens"] = vocab.tokens();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << j.dump(1) << '\n';
}

Vocab load_vocab(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open vocabulary " + path);
  try {
    const auto j = nlohmann::json::parse(in);
    if (j.value("format", "") != "twa-vocab" || j.value("version", 0) != 1) {
      throw DataError(path + ": not a version 1 vocabulary file");
    }
    auto tokens = j.at("tokens").get<std::vector<std::string>>();
    for (int i = 0; i < kNumReserved; ++i) {
      if (tokens.size() <= static_cast<std::size_t>(i) || tokens[static_cast<std::size_t>(i)] != kReservedNames[static_cast<std::size_t>(i)]) {
        throw DataError(path + ": reserved entries missing");
      }
    }
    return Vocab(std::move(tokens));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + ": " + e.what());
  }
}

TokenizedOutput encode(std::string_view text, const Vocab& vocab) {
  const auto chars = utf8_decode(text);
  const int n = static_cast<int>(chars.size());
  TokenizedOutput out;
  out.token_ids.push_back(kBos);
  out.char_ranges.push_back({0, 0});
  const std::u32string_view view(chars);
  int i = 0;
  while (i < n) {
    int id = kUnk;
    int len = 1;
    for (int l = std::min(vocab.max_piece_length(), n - i); l >= 1; --l) {
      const int found = vocab.find(view.substr(static_cast<std::size_t>(i), static_cast<std::size_t>(l)));
      if (found >= 0) {
        id = found;
        len = l;
        break;
      }
    }
    out.token_ids.push_back(id);
    out.char_ranges.push_back({i, i + len});
    i += len;
  }
  out.token_ids.push_back(kEos);
  out.char_ranges.push_back({n, n});
  return out;
}

std::vector<int> encode_ids(std::string_view text, const Vocab& vocab) {
  return encode(text, vocab).token_ids;
}

std::string decode(const std::vector<int>& ids, const Vocab& vocab) {
  std::string out;
  for (int id : ids) {
    if (id == kUnk) {
      out += "\xEF\xBF\xBD";
    } else if (id >= kNumReserved && id < vocab.size()) {
      out += vocab.token(id);
    }
  }
  return out;
}

std::vector<WeightSpan> group_weight_spans(const std::vector<double>& weights) {
  std::vector<WeightSpan> spans;
  for (int t = 0; t < static_cast<int>(weights.size()); ++t) {
    const double w = weights[static_cast<std::size_t>(t)];
    if (!spans.empty() && spans.back().weight == w) {
      spans.back().end = t + 1;
    } else {
      spans.push_back({t, t + 1, w});
    }
  }
  return spans;
}

TokenWeightVector uniform_weights(std::size_t n) {
  TokenWeightVector out;
  out.weights.assign(n, 1.0);
  out.spans = group_weight_spans(out.weights);
  return out;
}

namespace {

void check_spans(const TokenizedOutput& tok, const std::vector<ErrorSpan>& spans) {
  const int length = tok.text_length();
  for (const auto& s : spans) {
    if (s.start_char < 0 || s.start_char >= s.end_char || s.end_char > length) {
      throw DataError("error span [" + std::to_string(s.start_char) + "," +
                      std::to_string(s.end_char) + ") outside text of length " +
                      std::to_string(length));
    }
  }
}

// Highest-severity span overlapping [start, end) by at least one character;
// nullptr when none.
const ErrorSpan* strongest_overlap(const CharRange& range, const std::vector<ErrorSpan>& spans) {
  const ErrorSpan* best = nullptr;
  for (const auto& s : spans) {
    if (s.start_char < range.end && range.start < s.end_char) {
      if (best == nullptr || severity_rank(s.severity) > severity_rank(best->severity)) best = &s;
    }
  }
  return best;
}

}  // namespace

std::vector<bool> error_token_mask(const TokenizedOutput& tok, const std::vector<ErrorSpan>& spans) {
  check_spans(tok, spans);
  const std::size_t n = tok.token_ids.size();
  std::vector<bool> mask(n > 0 ? n - 1 : 0, false);
  // Positions 1..n-2 are text tokens; the final position is EOS.
  for (std::size_t i = 1; i + 1 < n; ++i) {
    mask[i - 1] = strongest_overlap(tok.char_ranges[i], spans) != nullptr;
  }
  return mask;
}

TokenWeightVector assign_token_weights(const TokenizedOutput& tok, const std::vector<ErrorSpan>& spans,
                                       bool ignore_off_trajectory) {
  check_spans(tok, spans);
  const std::size_t n = tok.token_ids.size();
  TokenWeightVector out;
  out.weights.assign(n > 0 ? n - 1 : 0, 1.0);
  bool seen_error = false;
  for (std::size_t i = 1; i < n; ++i) {
    const bool is_eos = i + 1 == n;
    const ErrorSpan* hit = is_eos ? nullptr : strongest_overlap(tok.char_ranges[i], spans);
    double& w = out.weights[i - 1];
    if (hit != nullptr) {
      w = -training_weight(hit->severity);
      seen_error = true;
    } else {
      w = (ignore_off_trajectory && seen_error) ? 0.0 : 1.0;
    }
  }
  out.spans = group_weight_spans(out.weights);
  return out;
}

StatsReport dataset_stats(const Dataset& dataset, const Vocab& vocab, int bins) {
  return dataset_stats(
      dataset,
      [&vocab](const AnnotatedExample& ex) {
        const auto tok = encode(ex.output_text, vocab);
        const auto mask = error_token_mask(tok, ex.spans);
        const int errors = static_cast<int>(std::count(mask.begin(), mask.end(), true));
        return std::pair<int, int>{tok.num_text_tokens(), errors};
      },
      bins);
}

}  // namespace twa
