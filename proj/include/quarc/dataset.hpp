#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "quarc/image.hpp"
#include "quarc/text.hpp"

namespace quarc {

struct Sample {
  std::string id;
  std::string tweet_text;
  std::string img_text;
  // Path relative to the dataset directory, as written in the manifest.
  std::optional<std::string> image_path;
  // Decoded and resized to 32×32 when image_path is set.
  std::optional<Image> image;
  std::optional<std::vector<double>> features;
  int label = 0;

  bool operator==(const Sample&) const = default;
};

enum class Split { train, val, test };

// 80/10/10 by hash of the id.
Split split_of(std::string_view id);
const char* split_name(Split s);

struct Dataset {
  std::vector<Sample> samples;
  EmbeddingTable embeddings;
  EmojiMap emoji = EmojiMap::builtin();

  std::vector<std::size_t> indices(Split s) const;
};

// Directory layout:
//   manifest.jsonl   {"id","tweet_text","img_text","image"?,"features"?,"label"}
//   img/*.ppm        images referenced by "image"
//   embeddings.txt   optional; without it every token is out of vocabulary
//   emoji_map.tsv    optional; replaces the built-in emoji table
Dataset read_dataset(const std::filesystem::path& dir);

// Writes manifest.jsonl and, for samples holding an image, the PPM under
// their image_path (img/<id>.ppm when unset).
void write_dataset(const std::filesystem::path& dir, const std::vector<Sample>& samples);

enum class SynthTask { separable, xor_task };
SynthTask parse_synth_task(std::string_view name);

struct SynthInfo {
  std::vector<std::string> vocabulary;
  std::vector<std::string> triggers;
};
const SynthInfo& synth_info();

// Labels: separable = tweet contains a trigger word; xor = trigger XOR a
// bright 8×8 patch in the top-left image corner. Both factors are fair
// coins drawn per sample.
std::vector<Sample> synth_samples(SynthTask task, std::size_t n, std::uint64_t seed);

// Text of the synthetic embedding file (dim 100), identical for every seed.
std::string synth_embeddings_text();

// Writes a complete dataset directory. Same arguments give byte-identical
// files.
void synth_generate(SynthTask task, std::size_t n, std::uint64_t seed, const std::filesystem::path& dir);

}  // namespace quarc
