#include "quarc/dataset.hpp"

#include <cstdio>

#include "json.hpp"
#include "quarc/error.hpp"
#include "quarc/io.hpp"
#include "quarc/rng.hpp"

namespace quarc {

namespace fs = std::filesystem;
using nlohmann::json;

Split split_of(std::string_view id) {
  const std::uint64_t bucket = fnv1a(id) % 10;
  return bucket < 8 ? Split::train : bucket == 8 ? Split::val : Split::test;
}

const char* split_name(Split s) {
  switch (s) {
    case Split::train:
      return "train";
    case Split::val:
      return "val";
    case Split::test:
      return "test";
  }
  return "?";
}

std::vector<std::size_t> Dataset::indices(Split s) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < samples.size(); ++i)
    if (split_of(samples[i].id) == s) out.push_back(i);
  return out;
}

namespace {

Sample parse_record(const std::string& line, std::size_t offset) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw IngestionError(std::string("manifest: ") + e.what(), offset + (e.byte > 0 ? e.byte - 1 : 0));
  }
  if (!j.is_object()) throw IngestionError("manifest: record is not an object", offset);
  auto text_field = [&](const char* key, bool required) -> std::string {
    auto it = j.find(key);
    if (it == j.end()) {
      if (required) throw IngestionError(std::string("manifest: missing field '") + key + "'", offset);
      return {};
    }
    if (!it->is_string()) throw IngestionError(std::string("manifest: field '") + key + "' must be a string", offset);
    return it->get<std::string>();
  };

  Sample s;
  s.id = text_field("id", true);
  if (s.id.empty()) throw IngestionError("manifest: empty id", offset);
  s.tweet_text = text_field("tweet_text", true);
  s.img_text = text_field("img_text", false);
  if (j.contains("image")) s.image_path = text_field("image", true);
  if (auto it = j.find("features"); it != j.end()) {
    if (!it->is_array()) throw IngestionError("manifest: 'features' must be an array", offset);
    std::vector<double> f;
    for (const auto& v : *it) {
      if (!v.is_number()) throw IngestionError("manifest: non-numeric feature in '" + s.id + "'", offset);
      f.push_back(v.get<double>());
    }
    if (f.size() % 4 != 0)
      throw IngestionError("manifest: " + std::to_string(f.size()) + " features in '" + s.id +
                               "' is not a multiple of 4",
                           offset);
    s.features = std::move(f);
  }
  auto label = j.find("label");
  if (label == j.end() || !label->is_number_integer()) throw IngestionError("manifest: 'label' must be 0 or 1", offset);
  const auto lv = label->get<std::int64_t>();
  if (lv != 0 && lv != 1) throw IngestionError("manifest: 'label' must be 0 or 1", offset);
  s.label = static_cast<int>(lv);
  return s;
}

json to_record(const Sample& s, const std::string& image_path) {
  json j;
  j["id"] = s.id;
  j["tweet_text"] = s.tweet_text;
  j["img_text"] = s.img_text;
  if (!image_path.empty()) j["image"] = image_path;
  if (s.features) j["features"] = *s.features;
  j["label"] = s.label;
  return j;
}

std::string default_image_path(const Sample& s) { return "img/" + s.id + ".ppm"; }

}  // namespace

Dataset read_dataset(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("dataset directory '" + dir.string() + "' not found");
  Dataset ds;
  const std::string manifest = read_text_file(dir / "manifest.jsonl");
  std::size_t pos = 0;
  while (pos < manifest.size()) {
    std::size_t eol = manifest.find('\n', pos);
    if (eol == std::string::npos) eol = manifest.size();
    std::string line = manifest.substr(pos, eol - pos);
    const std::size_t offset = pos;
    pos = eol + 1;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Sample s = parse_record(line, offset);
    if (s.image_path) s.image = load_image(dir / *s.image_path);
    ds.samples.push_back(std::move(s));
  }
  if (ds.samples.empty()) throw DataError("dataset '" + dir.string() + "' has no records");
  if (fs::exists(dir / "embeddings.txt")) ds.embeddings = EmbeddingTable::load(dir / "embeddings.txt");
  if (fs::exists(dir / "emoji_map.tsv")) ds.emoji = EmojiMap::load(dir / "emoji_map.tsv");
  return ds;
}

void write_dataset(const fs::path& dir, const std::vector<Sample>& samples) {
  std::string manifest;
  for (const auto& s : samples) {
    std::string image_path;
    if (s.image) {
      image_path = s.image_path.value_or(default_image_path(s));
      write_file_atomic(dir / image_path, encode_ppm(*s.image));
    } else if (s.image_path) {
      image_path = *s.image_path;
    }
    manifest += to_record(s, image_path).dump(-1, ' ', false, json::error_handler_t::replace);
    manifest += '\n';
  }
  write_file_atomic(dir / "manifest.jsonl", manifest);
}

SynthTask parse_synth_task(std::string_view name) {
  if (name == "separable") return SynthTask::separable;
  if (name == "xor") return SynthTask::xor_task;
  throw ConfigError("unknown synthetic task '" + std::string(name) + "' (expected separable or xor)");
}

namespace {

constexpr std::size_t kVocab = 200;
constexpr std::size_t kTriggerStride = 20;
constexpr std::size_t kSynthDim = 100;
constexpr std::uint64_t kEmbeddingSeed = 0x5eedULL;
constexpr std::size_t kPatch = 8;

SynthInfo make_info() {
  static const char* const kOnsets = "bdfgklmnprstvz";
  static const char* const kVowels = "aeiou";
  auto syllable = [&](std::size_t n) { return std::string{kOnsets[n / 5], kVowels[n % 5]}; };
  SynthInfo info;
  for (std::size_t i = 0; i < kVocab; ++i) {
    std::string word = syllable(i % 70) + syllable((i / 70) * 23 % 70);
    if (i % kTriggerStride == 0) info.triggers.push_back(word);
    info.vocabulary.push_back(std::move(word));
  }
  return info;
}

std::string filler(Rng& rng) {
  const auto& vocab = synth_info().vocabulary;
  for (;;) {
    const std::size_t w = rng.below(kVocab);
    if (w % kTriggerStride != 0) return vocab[w];
  }
}

}  // namespace

const SynthInfo& synth_info() {
  static const SynthInfo info = make_info();
  return info;
}

std::vector<Sample> synth_samples(SynthTask task, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw ConfigError("synth: n must be at least 1");
  const auto& info = synth_info();
  std::vector<Sample> out;
  out.reserve(n);
  for (std::size_t idx = 0; idx < n; ++idx) {
    Rng rng(mix_keys(seed, idx));
    char id[32];
    std::snprintf(id, sizeof id, "syn%06zu", idx);

    const bool trigger = rng.bernoulli(0.5);
    std::vector<std::string> words(4 + rng.below(9));
    for (auto& w : words) w = filler(rng);
    if (trigger) {
      const std::size_t hits = 1 + rng.below(2);
      for (std::size_t h = 0; h < hits; ++h) words[rng.below(words.size())] = info.triggers[rng.below(info.triggers.size())];
    }
    std::string tweet;
    for (std::size_t w = 0; w < words.size(); ++w) tweet += (w ? " " : "") + words[w];
    // some surface noise for the normaliser to undo
    if (rng.bernoulli(0.3)) tweet[0] = static_cast<char>(tweet[0] - 'a' + 'A');
    if (rng.bernoulli(0.3)) tweet += "!";

    std::string img_text;
    if (!rng.bernoulli(0.25)) {
      const std::size_t len = 1 + rng.below(8);
      for (std::size_t w = 0; w < len; ++w) img_text += (w ? " " : "") + filler(rng);
    }

    Image img;
    img.height = img.width = kImageSide;
    img.rgb.resize(kImageSide * kImageSide * 3);
    for (auto& v : img.rgb) v = static_cast<double>(rng.below(128)) / 255.0;
    const bool patch = task == SynthTask::xor_task && rng.bernoulli(0.5);
    if (patch)
      for (std::size_t y = 0; y < kPatch; ++y)
        for (std::size_t x = 0; x < kPatch; ++x)
          for (std::size_t c = 0; c < 3; ++c)
            img.rgb[(y * kImageSide + x) * 3 + c] = static_cast<double>(217 + rng.below(39)) / 255.0;

    Sample s;
    s.id = id;
    s.tweet_text = std::move(tweet);
    s.img_text = std::move(img_text);
    s.image_path = "img/" + s.id + ".ppm";
    s.image = std::move(img);
    s.label = (task == SynthTask::separable ? trigger : (trigger != patch)) ? 1 : 0;
    out.push_back(std::move(s));
  }
  return out;
}

std::string synth_embeddings_text() {
  Rng rng(kEmbeddingSeed);
  std::string out;
  char buf[32];
  for (const auto& word : synth_info().vocabulary) {
    out += word;
    for (std::size_t d = 0; d < kSynthDim; ++d) {
      std::snprintf(buf, sizeof buf, " %.17g", 0.3 * rng.normal());
      out += buf;
    }
    out += '\n';
  }
  return out;
}

void synth_generate(SynthTask task, std::size_t n, std::uint64_t seed, const fs::path& dir) {
  const auto samples = synth_samples(task, n, seed);
  write_file_atomic(dir / "embeddings.txt", synth_embeddings_text());
  write_dataset(dir, samples);
}

}  // namespace quarc
