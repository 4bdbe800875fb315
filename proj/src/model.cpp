#include "quarc/model.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <map>

#include "quarc/error.hpp"
#include "quarc/io.hpp"
#include "quarc/rng.hpp"

namespace quarc {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size())
    throw ConfigError("config: '" + key + "' expects a number, got '" + v + "'");
  return out;
}

// Shortest text that parses back to the same double.
std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

const char* encoder_name(ImageEncoder e) {
  return e == ImageEncoder::builtin_qcnn ? "builtin_qcnn" : "external_features";
}

}  // namespace

void ModelConfig::validate() const {
  if (variant < 1 || variant > 7) throw ConfigError("config: variant must be 1..7, got " + std::to_string(variant));
  if (embed_dim == 0 || max_len == 0 || conv_filters == 0 || conv_width == 0 || common_dim == 0 ||
      image_filters1 == 0 || image_filters2 == 0)
    throw ConfigError("config: dimensions must be positive");
  if (conv_width % 2 == 0) throw ConfigError("config: conv_width must be odd for same padding");
  if (feature_dim == 0 || feature_dim % 4 != 0) throw ConfigError("config: feature_dim must be a positive multiple of 4");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("config: dropout must lie in [0, 1)");
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("config: lr must be a finite value >= 0");
  if (epochs == 0) throw ConfigError("config: epochs must be at least 1");
  if (batch == 0) throw ConfigError("config: batch must be at least 1");
}

std::string ModelConfig::to_text() const {
  std::string s;
  auto put = [&](const char* k, const std::string& v) { s += std::string(k) + "=" + v + "\n"; };
  put("variant", std::to_string(variant));
  put("algebra", algebra == Algebra::quaternion ? "quaternion" : "real_mirror");
  put("seed", std::to_string(seed));
  put("embed_dim", std::to_string(embed_dim));
  put("max_len", std::to_string(max_len));
  put("conv_filters", std::to_string(conv_filters));
  put("conv_width", std::to_string(conv_width));
  put("common_dim", std::to_string(common_dim));
  put("image_encoder", encoder_name(image_encoder));
  put("image_filters1", std::to_string(image_filters1));
  put("image_filters2", std::to_string(image_filters2));
  put("feature_dim", std::to_string(feature_dim));
  put("dropout", format_double(dropout));
  put("lr", format_double(lr));
  put("epochs", std::to_string(epochs));
  put("batch", std::to_string(batch));
  return s;
}

ModelConfig parse_config(std::string_view text) {
  ModelConfig cfg;
  bool seed_given = false;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos <= text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    const std::string line = trim(text.substr(pos, eol - pos));
    pos = eol + 1;
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(line_no) + ": expected key=value");
    const std::string key = trim(line.substr(0, eq));
    const std::string v = trim(line.substr(eq + 1));
    if (key == "variant") {
      cfg.variant = parse_number<int>(key, v);
    } else if (key == "algebra") {
      if (v == "quaternion")
        cfg.algebra = Algebra::quaternion;
      else if (v == "real_mirror" || v == "real")
        cfg.algebra = Algebra::real;
      else
        throw ConfigError("config: algebra must be quaternion or real_mirror, got '" + v + "'");
    } else if (key == "seed") {
      cfg.seed = parse_number<std::uint64_t>(key, v);
      seed_given = true;
    } else if (key == "embed_dim") {
      cfg.embed_dim = parse_number<std::size_t>(key, v);
    } else if (key == "max_len") {
      cfg.max_len = parse_number<std::size_t>(key, v);
    } else if (key == "conv_filters") {
      cfg.conv_filters = parse_number<std::size_t>(key, v);
    } else if (key == "conv_width") {
      cfg.conv_width = parse_number<std::size_t>(key, v);
    } else if (key == "common_dim") {
      cfg.common_dim = parse_number<std::size_t>(key, v);
    } else if (key == "image_encoder") {
      if (v == "builtin_qcnn")
        cfg.image_encoder = ImageEncoder::builtin_qcnn;
      else if (v == "external_features")
        cfg.image_encoder = ImageEncoder::external_features;
      else
        throw ConfigError("config: image_encoder must be builtin_qcnn or external_features, got '" + v + "'");
    } else if (key == "image_filters1") {
      cfg.image_filters1 = parse_number<std::size_t>(key, v);
    } else if (key == "image_filters2") {
      cfg.image_filters2 = parse_number<std::size_t>(key, v);
    } else if (key == "feature_dim") {
      cfg.feature_dim = parse_number<std::size_t>(key, v);
    } else if (key == "dropout") {
      cfg.dropout = parse_number<double>(key, v);
    } else if (key == "lr") {
      cfg.lr = parse_number<double>(key, v);
    } else if (key == "epochs") {
      cfg.epochs = parse_number<std::size_t>(key, v);
    } else if (key == "batch") {
      cfg.batch = parse_number<std::size_t>(key, v);
    } else {
      throw ConfigError("config: unknown key '" + key + "'");
    }
  }
  if (!seed_given) {
    if (const char* env = std::getenv("QUARC_SEED"); env && *env) cfg.seed = parse_number<std::uint64_t>("QUARC_SEED", env);
  }
  cfg.validate();
  return cfg;
}

ModelConfig load_config(const std::filesystem::path& path) {
  try {
    return parse_config(read_text_file(path));
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }
}

namespace {

TextRows encode_text(const std::string& raw, const Dataset& ds, const ModelConfig& cfg) {
  const auto tokens = normalize_text(raw, ds.emoji);
  if (ds.embeddings.dim() == cfg.embed_dim) return embed_rows(tokens, ds.embeddings, cfg.max_len);
  // a table without stored vectors is pure OOV and takes any width
  if (ds.embeddings.size() == 0) return embed_rows(tokens, ds.embeddings.oov_only(cfg.embed_dim), cfg.max_len);
  throw ConfigError("embedding table has dim " + std::to_string(ds.embeddings.dim()) + " but embed_dim=" +
                    std::to_string(cfg.embed_dim));
}

}  // namespace

EncodedSample encode_sample(const Sample& s, const Dataset& ds, const ModelConfig& cfg) {
  EncodedSample e;
  e.label = s.label;
  e.key = fnv1a(s.id);
  if (cfg.uses_tweet()) e.tweet = encode_text(s.tweet_text, ds, cfg);
  if (cfg.uses_img_text()) e.img_text = encode_text(s.img_text, ds, cfg);
  if (cfg.uses_image()) {
    if (cfg.image_encoder == ImageEncoder::builtin_qcnn) {
      if (!s.image) throw IngestionError("sample '" + s.id + "' has no image for the builtin image encoder");
      e.image = image_tensor(*s.image, cfg.algebra);
    } else {
      if (!s.features) throw IngestionError("sample '" + s.id + "' has no features for external_features");
      if (s.features->size() != cfg.feature_dim)
        throw IngestionError("sample '" + s.id + "' has " + std::to_string(s.features->size()) +
                             " features, expected feature_dim=" + std::to_string(cfg.feature_dim));
      e.image = cfg.algebra == Algebra::quaternion ? pack_reals(*s.features) : Tensor::real({cfg.feature_dim});
      if (cfg.algebra == Algebra::real) std::copy(s.features->begin(), s.features->end(), e.image.data().begin());
    }
  }
  return e;
}

std::vector<EncodedSample> encode_samples(const Dataset& ds, const std::vector<std::size_t>& which,
                                          const ModelConfig& cfg) {
  std::vector<EncodedSample> out;
  out.reserve(which.size());
  for (std::size_t i : which) out.push_back(encode_sample(ds.samples.at(i), ds, cfg));
  return out;
}

namespace {

LayerSpec qspec(LayerKind kind, std::size_t n_in, std::size_t n_out, std::size_t kh = 1, std::size_t kw = 1) {
  return {kind, Algebra::quaternion, n_in, n_out, kh, kw, true};
}

}  // namespace

Model Model::build(const ModelConfig& cfg) {
  cfg.validate();
  Model m;
  m.cfg_ = cfg;
  const Algebra alg = cfg.algebra;
  auto& P = m.params_;
  const std::size_t text_q = padded_width(cfg.embed_dim) / 4;
  std::size_t parts = 0;

  auto make_text = [&](const std::string& name) {
    TextPathway t;
    t.conv = Layer::create(P, name + ".conv",
                           spec_in(alg, qspec(LayerKind::conv1d, text_q, cfg.conv_filters, 1, cfg.conv_width)), cfg.seed);
    t.mlp = Layer::create(P, name + ".mlp", spec_in(alg, qspec(LayerKind::dense, cfg.conv_filters, cfg.common_dim)),
                          cfg.seed);
    t.drop = DropoutSite(name + ".dropout", cfg.dropout);
    return t;
  };

  if (cfg.uses_tweet()) {
    m.tweet_ = make_text("tweet");
    ++parts;
  }
  if (cfg.uses_img_text()) {
    m.img_text_ = make_text("imgtext");
    ++parts;
  }
  std::size_t p_dim = 0;
  if (cfg.uses_image()) {
    ImagePathway im;
    if (cfg.image_encoder == ImageEncoder::builtin_qcnn) {
      im.conv1 = Layer::create(P, "image.conv1", spec_in(alg, qspec(LayerKind::conv2d, 1, cfg.image_filters1, 2, 2)),
                               cfg.seed);
      im.conv2 = Layer::create(P, "image.conv2",
                               spec_in(alg, qspec(LayerKind::conv2d, cfg.image_filters1, cfg.image_filters2, 3, 3)),
                               cfg.seed);
      p_dim = cfg.image_filters2;
    } else {
      p_dim = cfg.feature_dim / 4;
    }
    im.proj = Layer::create(P, "image.proj", spec_in(alg, qspec(LayerKind::dense, p_dim, cfg.common_dim)), cfg.seed);
    im.drop = DropoutSite("image.dropout", cfg.dropout);
    m.image_ = std::move(im);
    ++parts;
  }

  const int v = cfg.variant;
  const bool att_tt = v == 1 || v == 2 || v == 4;
  const bool att_tp = v == 1 || v == 3 || v == 4;
  if (att_tt) m.att_tt_ = AttentionBlock::create(P, "att_tt", alg, cfg.conv_filters, cfg.common_dim, cfg.seed);
  if (att_tp) m.att_tp_ = AttentionBlock::create(P, "att_tp", alg, cfg.conv_filters, cfg.common_dim, cfg.seed);
  auto gs = [&](const char* name) {
    ++parts;
    return GatedSumBlock::create(P, name, alg, cfg.conv_filters, p_dim, cfg.common_dim, cfg.seed);
  };
  if (v == 1 || v == 2) m.gs_tt_ = gs("gs_tt");
  if (v == 1 || v == 3) m.gs_tp_ = gs("gs_tp");
  if (v == 1 || v == 4) m.gs_tw_ = gs("gs_tw");

  m.head_ = ConcatHead::create(P, "head", alg, parts * cfg.common_dim, cfg.dropout, cfg.seed);
  return m;
}

Model::TextOut Model::run_text(Tape& tape, const TextPathway& path, const TextRows& rows, Mode mode,
                               std::uint64_t key) const {
  TextOut out;
  const NodeId x = tape.constant(rows_to_tensor(rows, cfg_.max_len, cfg_.algebra));
  out.c = path.conv.forward(tape, x);
  const NodeId pooled = ops::relu(tape, ops::global_max_pool(tape, out.c));
  const NodeId hidden = ops::relu(tape, path.mlp.forward(tape, pooled));
  out.t = path.drop.apply(tape, hidden, mode, key);
  // An empty text still attends to its first (padding) row.
  out.mask.assign(cfg_.max_len, false);
  for (std::size_t i = 0; i < std::max<std::size_t>(1, rows.tokens); ++i) out.mask[i] = true;
  return out;
}

Model::ImageOut Model::run_image(Tape& tape, const Tensor& image, Mode mode, std::uint64_t key) const {
  const ImagePathway& im = *image_;
  ImageOut out;
  NodeId x = tape.constant(image);
  if (im.conv1) {
    x = ops::max_pool2d(tape, ops::relu(tape, im.conv1->forward(tape, x)), 2);
    x = ops::relu(tape, im.conv2->forward(tape, x));
    const Shape& s = tape.value(x).shape();
    x = ops::reshape(tape, x, {s[0] * s[1], s[2]});
    out.p = ops::global_max_pool(tape, x);
  } else {
    out.p = x;
  }
  out.p_prime = im.proj.forward(tape, out.p);
  out.p_drop = im.drop.apply(tape, out.p_prime, mode, key);
  return out;
}

NodeId Model::logits(Tape& tape, const EncodedSample& x, Mode mode, std::uint64_t dropout_key) const {
  std::vector<NodeId> parts;
  std::optional<TextOut> tt, tp;
  std::optional<ImageOut> img;
  if (tweet_) {
    tt = run_text(tape, *tweet_, x.tweet, mode, dropout_key);
    parts.push_back(tt->t);
  }
  if (img_text_) {
    tp = run_text(tape, *img_text_, x.img_text, mode, dropout_key);
    parts.push_back(tp->t);
  }
  if (image_) {
    img = run_image(tape, x.image, mode, dropout_key);
    parts.push_back(img->p_drop);
  }
  NodeId a_tt = kNoNode, a_tp = kNoNode;
  if (att_tt_) a_tt = att_tt_->forward(tape, tt->c, img->p_prime, tt->mask);
  if (att_tp_) a_tp = att_tp_->forward(tape, tp->c, img->p_prime, tp->mask);
  if (gs_tt_) parts.push_back(gs_tt_->forward(tape, a_tt, img->p));
  if (gs_tp_) parts.push_back(gs_tp_->forward(tape, a_tp, img->p));
  if (gs_tw_) parts.push_back(gs_tw_->forward(tape, ops::add(tape, a_tt, a_tp), img->p));
  return head_.logits(tape, parts, mode, dropout_key);
}

std::array<double, 2> Model::predict(const EncodedSample& x) const {
  Tape tape(&params_);
  const NodeId z = logits(tape, x, Mode::eval, 0);
  const Tensor& zv = tape.value(z);
  const auto p = ops::softmax(zv.data());
  return {p[0], p[1]};
}

std::size_t count_params(const Model& model) { return model.params().trainable_scalars(); }

std::vector<RatioRow> ratio_report(const ModelConfig& cfg) {
  std::vector<RatioRow> rows;
  for (int v = 1; v <= 7; ++v) {
    ModelConfig c = cfg;
    c.variant = v;
    c.algebra = Algebra::quaternion;
    RatioRow r;
    r.variant = v;
    r.quaternion = count_params(Model::build(c));
    c.algebra = Algebra::real;
    r.real = count_params(Model::build(c));
    r.ratio = static_cast<double>(r.real) / static_cast<double>(r.quaternion);
    rows.push_back(r);
  }
  return rows;
}

}  // namespace quarc
