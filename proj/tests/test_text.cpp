#include "doctest.h"
#include "quarc/error.hpp"
#include "quarc/text.hpp"
#include "test_util.hpp"

using namespace quarc;
using Tokens = std::vector<std::string>;

namespace {

std::string join(const Tokens& t) {
  std::string s;
  for (const auto& w : t) s += w + " ";
  return s;
}

}  // namespace

TEST_CASE("normalize_text examples") {
  CHECK(normalize_text("Check https://t.co/abc now") == Tokens{"check", "now"});
  CHECK(normalize_text("").empty());
  CHECK(normalize_text("It's so hard being a nigga") == Tokens{"it's", "so", "hard", "being", "a", "nigga"});
  CHECK(normalize_text("see t.co/XyZ and http://a.b/c?d=1, ok") == Tokens{"see", "and", "ok"});
  CHECK(normalize_text("\"Hello,\" (world)... !!!") == Tokens{"hello", "world"});
  CHECK(normalize_text("  tabs\tand\nnewlines  ") == Tokens{"tabs", "and", "newlines"});
  CHECK(normalize_text("MiXeD CaSe") == Tokens{"mixed", "case"});
}

TEST_CASE("emoji become name tokens") {
  CHECK(normalize_text("lol\xF0\x9F\x98\x82\xF0\x9F\x98\x82") ==
        Tokens{"lol", "face_with_tears_of_joy", "face_with_tears_of_joy"});
  // red heart with variation selector
  CHECK(normalize_text("i \xE2\x9D\xA4\xEF\xB8\x8F you") == Tokens{"i", "red_heart", "you"});
  // thumbs up with a skin tone modifier
  CHECK(normalize_text("\xF0\x9F\x91\x8D\xF0\x9F\x8F\xBD") == Tokens{"thumbs_up"});
  // an emoji missing from the table
  CHECK(normalize_text("\xF0\x9F\xA6\x84!") == Tokens{"emoji"});

  const EmojiMap custom = EmojiMap::parse("# comment\n1F984\tUnicorn Face!\n");
  CHECK(custom.size() == 1);
  CHECK(normalize_text("\xF0\x9F\xA6\x84", custom) == Tokens{"unicorn_face"});
  CHECK(normalize_text("\xF0\x9F\x98\x82", custom) == Tokens{"emoji"});
  CHECK_THROWS_AS(EmojiMap::parse("1F984 no tab\n"), IngestionError);
  CHECK_THROWS_AS(EmojiMap::parse("zzz\tname\n"), IngestionError);
  CHECK(EmojiMap::builtin().size() >= 30);
}

TEST_CASE("shipped emoji map matches the built-in table") {
  const EmojiMap file = EmojiMap::load(std::filesystem::path(QUARC_SOURCE_DIR) / "data" / "emoji_map.tsv");
  const EmojiMap builtin = EmojiMap::builtin();
  REQUIRE(file.size() == builtin.size());
  for (char32_t cp = 0x2000; cp < 0x20000; ++cp) {
    const std::string* a = file.find(cp);
    const std::string* b = builtin.find(cp);
    REQUIRE((a == nullptr) == (b == nullptr));
    if (a) CHECK(*a == *b);
  }
}

TEST_CASE("normalize_text is idempotent") {
  const char* pieces[] = {"Hello",  "WORLD",  "it's", "...",       "!!",     "(x)",   "https://t.co/q", "t.co/zz",
                          "http://", "#tag", "@user", "\xF0\x9F\x98\x82", "\xE2\x9D\xA4\xEF\xB8\x8F", "\xF0\x9F\xA6\x84",
                          "a.b",    "\t",     "\n",   " ",         "-",      "caf\xC3\xA9", "\xFF",   "x/y"};
  Rng rng(17);
  for (int trial = 0; trial < 2000; ++trial) {
    std::string s;
    const std::size_t n = rng.below(12);
    for (std::size_t i = 0; i < n; ++i) {
      s += pieces[rng.below(std::size(pieces))];
      if (rng.uniform() < 0.5) s += ' ';
    }
    const Tokens once = normalize_text(s);
    INFO(s);
    CHECK(normalize_text(join(once)) == once);
  }
}

TEST_CASE("embedding table parsing") {
  const EmbeddingTable t = EmbeddingTable::parse("cat 1 2 3\ndog -0.5 1e-3 4\n\n");
  CHECK(t.dim() == 3);
  CHECK(t.size() == 2);
  CHECK(t.padded_dim() == 4);
  CHECK(t.lookup("dog") == std::vector<double>{-0.5, 1e-3, 4});

  try {
    EmbeddingTable::parse("cat 1 2 3\ndog 1 2\n");
    FAIL("expected an ingestion error");
  } catch (const IngestionError& e) {
    CHECK(e.offset() == 10);
  }
  CHECK_THROWS_AS(EmbeddingTable::parse("cat 1 x 3\n"), IngestionError);
  CHECK_THROWS_AS(EmbeddingTable::parse(""), IngestionError);
  CHECK_THROWS_AS(EmbeddingTable::parse("lonely\n"), IngestionError);
}

TEST_CASE("out-of-vocabulary vectors") {
  const EmbeddingTable t(100, 7);
  const auto a = t.lookup("zebra");
  REQUIRE(a.size() == 100);
  CHECK(t.lookup("zebra") == a);
  CHECK(EmbeddingTable(100, 7).lookup("zebra") == a);
  CHECK(t.lookup("zebras") != a);
  CHECK(EmbeddingTable(100, 8).lookup("zebra") != a);
  for (double v : a) {
    CHECK(v > -0.25);
    CHECK(v < 0.25);
  }
}

TEST_CASE("embed shape, padding and truncation") {
  EmbeddingTable t(100, 1);
  std::vector<double> row(100);
  for (std::size_t d = 0; d < 100; ++d) row[d] = double(d + 1);
  t.set("known", row);

  const Tensor empty = embed(Tokens{}, t);
  CHECK(empty.shape() == Shape{150, 26});
  for (double v : empty.data()) CHECK(v == 0.0);

  const Tensor k = embed(Tokens{"known", "other"}, t);
  CHECK(k.shape() == Shape{150, 26});
  const auto r0 = unpack_reals([&] {
    Tensor r = Tensor::quaternion({26});
    for (std::size_t q = 0; q < 26; ++q) r.set_q(q, k.q(q));
    return r;
  }());
  for (std::size_t d = 0; d < 100; ++d) CHECK(r0[d] == row[d]);
  for (std::size_t d = 100; d < 104; ++d) CHECK(r0[d] == 0.0);
  for (std::size_t e = 2 * 26; e < 150 * 26; ++e) CHECK(k.q(e) == Quaternion{});

  for (std::size_t n : {1, 149, 150, 151, 400}) {
    const Tokens many(n, "w");
    CHECK(embed(many, t).shape() == Shape{150, 26});
    CHECK(embed_rows(many, t, 150).tokens == std::min<std::size_t>(n, 150));
  }
  CHECK(embed(Tokens{"known"}, t, 150, Algebra::real).shape() == Shape{150, 104});
}
