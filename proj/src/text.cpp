#include "quarc/text.hpp"

#include <charconv>
#include <regex>

#include "quarc/error.hpp"
#include "quarc/io.hpp"
#include "quarc/rng.hpp"

namespace quarc {

namespace {

struct Decoded {
  char32_t cp;
  std::size_t len;
  bool valid;
};

Decoded decode_utf8(std::string_view s, std::size_t pos) {
  const auto b0 = static_cast<unsigned char>(s[pos]);
  if (b0 < 0x80) return {b0, 1, true};
  std::size_t len = b0 >= 0xF0 ? 4 : b0 >= 0xE0 ? 3 : b0 >= 0xC0 ? 2 : 0;
  if (len == 0 || pos + len > s.size()) return {0xFFFD, 1, false};
  char32_t cp = b0 & (0x7F >> len);
  for (std::size_t k = 1; k < len; ++k) {
    const auto b = static_cast<unsigned char>(s[pos + k]);
    if ((b & 0xC0) != 0x80) return {0xFFFD, 1, false};
    cp = (cp << 6) | (b & 0x3F);
  }
  return {cp, len, true};
}

bool is_ascii_punct(char c) {
  return (c >= '!' && c <= '/') || (c >= ':' && c <= '@') || (c >= '[' && c <= '`') || (c >= '{' && c <= '~');
}

bool is_ascii_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

// Codepoints that only modify a neighbouring emoji and are dropped.
bool is_emoji_modifier(char32_t cp) {
  return cp == 0x200D || cp == 0xFE0E || cp == 0xFE0F || (cp >= 0x1F3FB && cp <= 0x1F3FF);
}

// Replacement tokens must survive a second normalisation unchanged.
std::string sanitize_name(std::string_view raw) {
  std::string out;
  for (char c : raw) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    out += is_ascii_space(c) ? '_' : c;
  }
  std::size_t b = 0, e = out.size();
  while (b < e && is_ascii_punct(out[b])) ++b;
  while (e > b && is_ascii_punct(out[e - 1])) --e;
  out = out.substr(b, e - b);
  return out.empty() ? "emoji" : out;
}

const std::regex& url_pattern() {
  static const std::regex re(R"((https?://|t\.co/)[^ \t\n\r\f\v]*)");
  return re;
}

}  // namespace

EmojiMap EmojiMap::builtin() {
  static const char* const kTable = R"(1F602	face_with_tears_of_joy
1F923	rolling_on_the_floor_laughing
1F62D	loudly_crying_face
1F622	crying_face
1F60D	smiling_face_with_heart_eyes
1F60A	smiling_face_with_smiling_eyes
1F60E	smiling_face_with_sunglasses
1F612	unamused_face
1F620	angry_face
1F621	pouting_face
1F92C	face_with_symbols_on_mouth
1F644	face_with_rolling_eyes
1F914	thinking_face
1F921	clown_face
1F480	skull
1F4A9	pile_of_poo
1F595	middle_finger
1F44D	thumbs_up
1F44E	thumbs_down
1F44F	clapping_hands
1F64C	raising_hands
1F64F	folded_hands
1F44A	oncoming_fist
1F525	fire
1F4AF	hundred_points
1F440	eyes
1F437	pig_face
1F412	monkey
1F435	monkey_face
1F48B	kiss_mark
2764	red_heart
1F494	broken_heart
)";
  return parse(kTable);
}

EmojiMap EmojiMap::load(const std::filesystem::path& path) { return parse(read_text_file(path)); }

EmojiMap EmojiMap::parse(std::string_view text) {
  EmojiMap map;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    const std::size_t line_start = pos;
    pos = eol + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty() || line.front() == '#') continue;
    const std::size_t tab = line.find('\t');
    if (tab == std::string_view::npos) throw IngestionError("emoji map: expected codepoint<TAB>name", line_start);
    std::uint32_t cp = 0;
    auto hex = line.substr(0, tab);
    auto [ptr, ec] = std::from_chars(hex.data(), hex.data() + hex.size(), cp, 16);
    if (ec != std::errc() || ptr != hex.data() + hex.size() || cp > 0x10FFFF)
      throw IngestionError("emoji map: bad codepoint '" + std::string(hex) + "'", line_start);
    map.set(static_cast<char32_t>(cp), std::string(line.substr(tab + 1)));
  }
  return map;
}

void EmojiMap::set(char32_t cp, std::string name) { names_[cp] = sanitize_name(name); }

const std::string* EmojiMap::find(char32_t cp) const {
  auto it = names_.find(cp);
  return it == names_.end() ? nullptr : &it->second;
}

bool is_emoji_codepoint(char32_t cp) {
  return (cp >= 0x1F000 && cp <= 0x1FAFF) || (cp >= 0x2600 && cp <= 0x27BF) || (cp >= 0x2300 && cp <= 0x23FF) ||
         (cp >= 0x2B00 && cp <= 0x2BFF);
}

std::vector<std::string> normalize_text(std::string_view raw, const EmojiMap& emoji) {
  std::string lowered(raw);
  for (auto& c : lowered)
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');

  const std::string no_urls = std::regex_replace(lowered, url_pattern(), "");

  std::string spaced;
  spaced.reserve(no_urls.size());
  for (std::size_t pos = 0; pos < no_urls.size();) {
    const Decoded d = decode_utf8(no_urls, pos);
    if (d.valid && is_emoji_modifier(d.cp)) {
      // dropped
    } else if (const std::string* name = d.valid ? emoji.find(d.cp) : nullptr) {
      spaced += ' ';
      spaced += *name;
      spaced += ' ';
    } else if (d.valid && is_emoji_codepoint(d.cp)) {
      spaced += " emoji ";
    } else {
      spaced.append(no_urls, pos, d.len);
    }
    pos += d.len;
  }

  std::vector<std::string> tokens;
  std::size_t pos = 0;
  while (pos < spaced.size()) {
    while (pos < spaced.size() && is_ascii_space(spaced[pos])) ++pos;
    std::size_t end = pos;
    while (end < spaced.size() && !is_ascii_space(spaced[end])) ++end;
    std::size_t b = pos, e = end;
    while (b < e && is_ascii_punct(spaced[b])) ++b;
    while (e > b && is_ascii_punct(spaced[e - 1])) --e;
    if (e > b) tokens.emplace_back(spaced, b, e - b);
    pos = end;
  }
  return tokens;
}

std::vector<std::string> normalize_text(std::string_view raw) {
  static const EmojiMap kDefault = EmojiMap::builtin();
  return normalize_text(raw, kDefault);
}

EmbeddingTable EmbeddingTable::load(const std::filesystem::path& path, std::uint64_t oov_seed) {
  return parse(read_text_file(path), oov_seed);
}

EmbeddingTable EmbeddingTable::parse(std::string_view text, std::uint64_t oov_seed) {
  EmbeddingTable table(0, oov_seed);
  std::size_t pos = 0;
  bool first = true;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    const std::size_t line_start = pos;
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    const std::size_t sp = line.find(' ');
    if (sp == std::string_view::npos || sp == 0) throw IngestionError("embeddings: expected 'token v1 ... vd'", line_start);
    std::string token(line.substr(0, sp));
    std::vector<double> vec;
    const char* p = line.data() + sp;
    const char* end = line.data() + line.size();
    while (p < end) {
      while (p < end && *p == ' ') ++p;
      if (p == end) break;
      double v = 0.0;
      auto [next, ec] = std::from_chars(p, end, v);
      if (ec != std::errc())
        throw IngestionError("embeddings: bad number for token '" + token + "'",
                             line_start + static_cast<std::size_t>(p - line.data()));
      vec.push_back(v);
      p = next;
    }
    if (first) {
      if (vec.empty()) throw IngestionError("embeddings: first vector is empty", line_start);
      table.dim_ = vec.size();
      first = false;
    } else if (vec.size() != table.dim_) {
      throw IngestionError("embeddings: token '" + token + "' has " + std::to_string(vec.size()) +
                               " values, expected " + std::to_string(table.dim_),
                           line_start);
    }
    table.table_[std::move(token)] = std::move(vec);
  }
  if (first) throw IngestionError("embeddings: file holds no vectors", 0);
  return table;
}

void EmbeddingTable::set(const std::string& token, std::vector<double> vec) {
  if (vec.size() != dim_)
    throw DimensionError("embeddings: vector of " + std::to_string(vec.size()) + " for dim " + std::to_string(dim_));
  table_[token] = std::move(vec);
}

std::vector<double> EmbeddingTable::lookup(const std::string& token) const {
  if (auto it = table_.find(token); it != table_.end()) return it->second;
  Rng rng(mix_keys(oov_seed_, fnv1a(token)));
  std::vector<double> vec(dim_);
  for (auto& v : vec) v = rng.uniform(-0.25, 0.25);
  return vec;
}

TextRows embed_rows(const std::vector<std::string>& tokens, const EmbeddingTable& table, std::size_t max_len) {
  TextRows rows;
  rows.tokens = std::min(tokens.size(), max_len);
  rows.width = table.padded_dim();
  rows.values.assign(rows.tokens * rows.width, 0.0);
  for (std::size_t t = 0; t < rows.tokens; ++t) {
    const auto vec = table.lookup(tokens[t]);
    std::copy(vec.begin(), vec.end(), rows.values.begin() + static_cast<std::ptrdiff_t>(t * rows.width));
  }
  return rows;
}

Tensor rows_to_tensor(const TextRows& rows, std::size_t max_len, Algebra algebra) {
  if (rows.width % 4 != 0) throw PackingError("text rows of width " + std::to_string(rows.width) + " cannot be packed");
  if (rows.tokens > max_len) throw DimensionError("text rows exceed max_len");
  if (algebra == Algebra::real) {
    Tensor t = Tensor::real({max_len, rows.width});
    std::copy(rows.values.begin(), rows.values.end(), t.data().begin());
    return t;
  }
  const std::size_t q = rows.width / 4;
  Tensor t = Tensor::quaternion({max_len, q});
  for (std::size_t r = 0; r < rows.tokens; ++r)
    for (std::size_t e = 0; e < q; ++e)
      for (std::size_t c = 0; c < 4; ++c) t.channel(c)[r * q + e] = rows.values[r * rows.width + 4 * e + c];
  return t;
}

Tensor embed(const std::vector<std::string>& tokens, const EmbeddingTable& table, std::size_t max_len,
             Algebra algebra) {
  return rows_to_tensor(embed_rows(tokens, table, max_len), max_len, algebra);
}

}  // namespace quarc
