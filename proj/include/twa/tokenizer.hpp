#pragma once

#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "twa/annotations.hpp"

namespace twa {

inline constexpr int kPad = 0;
inline constexpr int kBos = 1;
inline constexpr int kEos = 2;
inline constexpr int kUnk = 3;
inline constexpr int kNumReserved = 4;
inline constexpr int kMaxNgram = 6;

/// Subword vocabulary: reserved ids, every single character seen at build
/// time (codepoint order), then frequent character n-grams.
class Vocab {
 public:
  Vocab() = default;
  explicit Vocab(std::vector<std::string> tokens);

  int size() const { return static_cast<int>(tokens_.size()); }
  const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  /// -1 when absent. Reserved tokens are never matched.
  int find(std::u32string_view piece) const;
  int max_piece_length() const { return max_piece_length_; }

  friend bool operator==(const Vocab& a, const Vocab& b) { return a.tokens_ == b.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::u32string, int> index_;
  int max_piece_length_ = 1;
};

Vocab build_vocab(const std::vector<std::string>& corpus, int target_size);

/// Vocab JSON file: {"format":"twa-vocab","version":1,"tokens":[...]}.
void save_vocab(const std::string& path, const Vocab& vocab);
Vocab load_vocab(const std::string& path);

struct CharRange {
  int start = 0;
  int end = 0;

  friend bool operator==(const CharRange&, const CharRange&) = default;
};

struct TokenizedOutput {
  std::vector<int> token_ids;          // BOS ... EOS
  std::vector<CharRange> char_ranges;  // BOS/EOS carry empty ranges

  int text_length() const { return char_ranges.empty() ? 0 : char_ranges.back().start; }
  int num_text_tokens() const { return static_cast<int>(token_ids.size()) - 2; }
};

/// Greedy longest match, left to right. Unknown characters become UNK.
TokenizedOutput encode(std::string_view text, const Vocab& vocab);
/// Source-side token ids (BOS/EOS included) as fed to the encoder.
std::vector<int> encode_ids(std::string_view text, const Vocab& vocab);
/// Concatenates pieces, skipping reserved ids. UNK decodes to U+FFFD.
std::string decode(const std::vector<int>& ids, const Vocab& vocab);

struct WeightSpan {
  int start = 0;  // token index into TokenWeightVector::weights
  int end = 0;    // exclusive
  double weight = 0.0;

  friend bool operator==(const WeightSpan&, const WeightSpan&) = default;
};

/// Weights cover token_ids[1..] (BOS excluded, EOS included); entry t is the
/// weight for predicting token_ids[t + 1].
struct TokenWeightVector {
  std::vector<double> weights;
  std::vector<WeightSpan> spans;  // maximal runs of equal weight

  std::size_t size() const { return weights.size(); }
};

/// Negative weights mark tokens overlapping an error span (max severity wins).
/// Non-error tokens before the first error get 1; after it they get 0 when
/// ignore_off_trajectory is set, 1 otherwise.
TokenWeightVector assign_token_weights(const TokenizedOutput& tok, const std::vector<ErrorSpan>& spans,
                                       bool ignore_off_trajectory);

/// All weights 1 (plain cross-entropy weighting).
TokenWeightVector uniform_weights(std::size_t n);

std::vector<WeightSpan> group_weight_spans(const std::vector<double>& weights);

/// Error-token membership per weight position, independent of masking.
std::vector<bool> error_token_mask(const TokenizedOutput& tok, const std::vector<ErrorSpan>& spans);

/// dataset_stats with token counts from this vocabulary.
StatsReport dataset_stats(const Dataset& dataset, const Vocab& vocab, int bins = 10);

}  // namespace twa
