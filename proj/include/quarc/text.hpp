#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "quarc/tensor.hpp"

namespace quarc {

// Embedding rows are zero-padded to the next multiple of 4 with at least one
// zero lane: 100 -> 104 (26 quaternions), 8 -> 12.
constexpr std::size_t padded_width(std::size_t dim) { return 4 * (dim / 4 + 1); }

// Emoji codepoint -> replacement token.
class EmojiMap {
 public:
  EmojiMap() = default;

  // A small built-in table of common emoji.
  static EmojiMap builtin();
  // Text file, one `codepoint_hex<TAB>name_token` entry per line; '#'
  // starts a comment line.
  static EmojiMap load(const std::filesystem::path& path);
  static EmojiMap parse(std::string_view text);

  void set(char32_t cp, std::string name);
  const std::string* find(char32_t cp) const;
  std::size_t size() const noexcept { return names_.size(); }

 private:
  std::unordered_map<char32_t, std::string> names_;
};

bool is_emoji_codepoint(char32_t cp);

// Lowercases ASCII, removes http://, https:// and bare t.co/ links, turns
// each emoji into its name token (unknown emoji -> "emoji"), splits on
// whitespace and strips leading/trailing punctuation from every token.
std::vector<std::string> normalize_text(std::string_view raw, const EmojiMap& emoji);
std::vector<std::string> normalize_text(std::string_view raw);

// Frozen token embeddings. Tokens missing from the table get a vector drawn
// uniformly from (−0.25, 0.25), seeded by the token itself.
class EmbeddingTable {
 public:
  explicit EmbeddingTable(std::size_t dim = 100, std::uint64_t oov_seed = 0) : dim_(dim), oov_seed_(oov_seed) {}

  // Text file `token v1 ... vd` per line; dim is taken from the first line.
  static EmbeddingTable load(const std::filesystem::path& path, std::uint64_t oov_seed = 0);
  static EmbeddingTable parse(std::string_view text, std::uint64_t oov_seed = 0);

  void set(const std::string& token, std::vector<double> vec);
  bool contains(const std::string& token) const { return table_.count(token) != 0; }
  std::vector<double> lookup(const std::string& token) const;

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return table_.size(); }
  // Same OOV seed, no stored vectors.
  EmbeddingTable oov_only(std::size_t dim) const { return EmbeddingTable(dim, oov_seed_); }
  // Width after zero padding, see padded_width.
  std::size_t padded_dim() const noexcept { return padded_width(dim_); }

 private:
  std::size_t dim_;
  std::uint64_t oov_seed_;
  std::unordered_map<std::string, std::vector<double>> table_;
};

// Token rows of a text, truncated to max_len, each zero-padded to
// table.padded_dim(). Padding rows are not stored.
struct TextRows {
  std::vector<double> values;  // tokens × width
  std::size_t tokens = 0;
  std::size_t width = 0;
};

TextRows embed_rows(const std::vector<std::string>& tokens, const EmbeddingTable& table, std::size_t max_len);

// [max_len, width/4] quaternions (or [max_len, width] reals); rows past the
// text are zero.
Tensor rows_to_tensor(const TextRows& rows, std::size_t max_len, Algebra algebra);

Tensor embed(const std::vector<std::string>& tokens, const EmbeddingTable& table, std::size_t max_len = 150,
             Algebra algebra = Algebra::quaternion);

}  // namespace quarc
