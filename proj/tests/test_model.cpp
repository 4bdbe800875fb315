#include <cstdlib>
#include <set>

#include "doctest.h"
#include "quarc/error.hpp"
#include "quarc/gradsuite.hpp"
#include "quarc/model.hpp"
#include "test_util.hpp"

using namespace quarc;

namespace {

ModelConfig tiny(int variant) {
  ModelConfig cfg;
  cfg.variant = variant;
  cfg.embed_dim = 8;
  cfg.max_len = 8;
  cfg.conv_filters = 4;
  cfg.common_dim = 2;
  cfg.image_filters1 = 2;
  cfg.image_filters2 = 3;
  cfg.seed = 5;
  return cfg;
}

Dataset tiny_dataset(std::size_t n = 6) {
  Dataset ds;
  ds.samples = synth_samples(SynthTask::xor_task, n, 3);
  ds.embeddings = EmbeddingTable(8, 1);
  return ds;
}

std::vector<std::size_t> all_indices(const Dataset& ds) {
  std::vector<std::size_t> v(ds.samples.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = i;
  return v;
}

std::set<std::string> names_of(const Model& m) {
  std::set<std::string> s;
  for (const auto& p : m.params()) s.insert(p.name);
  return s;
}

bool any_prefix(const std::set<std::string>& names, const std::string& prefix) {
  for (const auto& n : names)
    if (n.rfind(prefix, 0) == 0) return true;
  return false;
}

}  // namespace

TEST_CASE("every variant predicts a distribution") {
  const Dataset ds = tiny_dataset();
  for (int v = 1; v <= 7; ++v) {
    for (Algebra a : {Algebra::quaternion, Algebra::real}) {
      ModelConfig cfg = tiny(v);
      cfg.algebra = a;
      const Model m = Model::build(cfg);
      for (const auto& s : encode_samples(ds, all_indices(ds), cfg)) {
        const auto p = m.predict(s);
        CHECK(p[0] >= 0.0);
        CHECK(p[1] >= 0.0);
        CHECK(std::abs(p[0] + p[1] - 1.0) < 1e-12);
        CHECK(m.predict(s) == p);
      }
    }
  }
}

TEST_CASE("parameter sets follow the variant wiring") {
  const ModelConfig base;
  auto build = [&](int v) {
    ModelConfig c = base;
    c.variant = v;
    return Model::build(c);
  };
  const auto n1 = names_of(build(1)), n5 = names_of(build(5)), n6 = names_of(build(6)), n7 = names_of(build(7));
  for (const auto& n : n5) CHECK(n1.count(n) == 1);
  CHECK(n1.size() > n5.size());
  for (const char* extra : {"att_tt.", "att_tp.", "gs_tt.", "gs_tp.", "gs_tw."}) {
    CHECK(any_prefix(n1, extra));
    CHECK_FALSE(any_prefix(n5, extra));
  }
  CHECK_FALSE(any_prefix(n6, "image."));
  CHECK_FALSE(any_prefix(n6, "imgtext."));
  CHECK(any_prefix(n6, "tweet."));
  CHECK_FALSE(any_prefix(n7, "tweet."));
  CHECK_FALSE(any_prefix(n7, "imgtext."));
  CHECK(any_prefix(n7, "image."));

  const auto n2 = names_of(build(2)), n3 = names_of(build(3)), n4 = names_of(build(4));
  CHECK(any_prefix(n2, "gs_tt."));
  CHECK_FALSE(any_prefix(n2, "gs_tp."));
  CHECK(any_prefix(n3, "gs_tp."));
  CHECK_FALSE(any_prefix(n3, "att_tt."));
  CHECK(any_prefix(n4, "gs_tw."));
  CHECK(any_prefix(n4, "att_tt."));
  CHECK(any_prefix(n4, "att_tp."));
}

TEST_CASE("single-modality variants ignore the other inputs") {
  const Dataset ds = tiny_dataset();
  {
    const ModelConfig cfg = tiny(7);
    const Model m = Model::build(cfg);
    EncodedSample s = encode_sample(ds.samples[0], ds, cfg);
    const auto before = m.predict(s);
    for (double& v : s.tweet.values) v += 1.0;
    for (double& v : s.img_text.values) v -= 2.0;
    CHECK(m.predict(s) == before);
  }
  {
    const ModelConfig cfg = tiny(6);
    const Model m = Model::build(cfg);
    EncodedSample s = encode_sample(ds.samples[0], ds, cfg);
    const auto before = m.predict(s);
    for (double& v : s.image.data()) v = 1.0 - v;
    CHECK(m.predict(s) == before);
  }
  {
    // and the fused model does look at both
    const ModelConfig cfg = tiny(1);
    const Model m = Model::build(cfg);
    EncodedSample s = encode_sample(ds.samples[0], ds, cfg);
    const auto before = m.predict(s);
    EncodedSample t = s;
    for (double& v : t.image.data()) v = 1.0 - v;
    CHECK(m.predict(t) != before);
    for (double& v : s.tweet.values) v += 1.0;
    CHECK(m.predict(s) != before);
  }
}

TEST_CASE("parameter ratios for all variants") {
  const auto rows = ratio_report(ModelConfig{});
  REQUIRE(rows.size() == 7);
  for (const auto& r : rows) {
    INFO("variant ", r.variant);
    CHECK(r.ratio >= 3.7);
    CHECK(r.ratio <= 4.1);
    CHECK(r.ratio == doctest::Approx(double(r.real) / double(r.quaternion)));
  }
  CHECK(rows[1].quaternion == rows[2].quaternion);
  CHECK(rows[1].real == rows[2].real);

  ModelConfig c;
  c.variant = 6;
  CHECK(count_params(Model::build(c)) == rows[5].quaternion);
  c.algebra = Algebra::real;
  CHECK(count_params(Model::build(c)) == rows[5].real);
}

TEST_CASE("published reference ratios") {
  // trainable counts (real, quaternion) as published for the seven models
  struct Row {
    double real, quat, ratio;
  };
  const Row published[] = {{2810573, 719837, 3.904}, {1241545, 311353, 3.988}, {1241545, 311353, 3.988},
                           {2752305, 701553, 3.923}, {1219894, 301361, 4.048}, {530229, 132729, 3.995},
                           {131201, 32897, 3.988}};
  for (const auto& r : published) {
    CHECK(r.real / r.quat == doctest::Approx(r.ratio).epsilon(5e-4));
    CHECK(r.real / r.quat >= 3.7);
    CHECK(r.real / r.quat <= 4.1);
  }
}

TEST_CASE("config parsing") {
  const ModelConfig d = parse_config("seed=3\n");
  CHECK(d.variant == 1);
  CHECK(d.embed_dim == 100);
  CHECK(d.max_len == 150);
  CHECK(d.conv_filters == 128);
  CHECK(d.common_dim == 16);
  CHECK(d.dropout == 0.35);
  CHECK(d.epochs == 20);
  CHECK(d.batch == 128);

  const ModelConfig c = parse_config("# comment\nvariant=4\n\nalgebra=real_mirror\nlr=0.01\nseed=9\n");
  CHECK(c.variant == 4);
  CHECK(c.algebra == Algebra::real);
  CHECK(c.lr == 0.01);
  CHECK(parse_config(c.to_text()).to_text() == c.to_text());

  CHECK_THROWS_AS(parse_config("colour=blue\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("variant=8\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("variant=x\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("dropout=1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("just words\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("image_encoder=resnet\n"), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/quarc.cfg"), ConfigError);

  setenv("QUARC_SEED", "1234", 1);
  CHECK(parse_config("variant=2\n").seed == 1234);
  CHECK(parse_config("seed=7\n").seed == 7);
  unsetenv("QUARC_SEED");
}

TEST_CASE("external features replace the image encoder") {
  Dataset ds = tiny_dataset(4);
  ModelConfig cfg = tiny(7);
  cfg.image_encoder = ImageEncoder::external_features;
  cfg.feature_dim = 8;
  CHECK_THROWS_AS(encode_sample(ds.samples[0], ds, cfg), IngestionError);
  Rng rng(3);
  for (auto& s : ds.samples) {
    s.features = std::vector<double>(8);
    for (double& v : *s.features) v = rng.normal();
  }
  const Model m = Model::build(cfg);
  CHECK_FALSE(any_prefix(names_of(m), "image.conv"));
  const auto p = m.predict(encode_sample(ds.samples[0], ds, cfg));
  CHECK(std::abs(p[0] + p[1] - 1.0) < 1e-12);
  ds.samples[1].features->resize(12);
  CHECK_THROWS_AS(encode_sample(ds.samples[1], ds, cfg), IngestionError);

  ModelConfig wrong = tiny(6);
  wrong.embed_dim = 12;
  // an empty table is pure OOV and adapts to embed_dim
  CHECK(encode_sample(ds.samples[0], ds, wrong).tweet.width == 16);
  ds.embeddings.set("word", std::vector<double>(8, 0.5));
  CHECK_THROWS_AS(encode_sample(ds.samples[0], ds, wrong), ConfigError);
}

TEST_CASE("model gradients match finite differences") {
  for (int v : {1, 6}) {
    for (Algebra a : {Algebra::quaternion, Algebra::real}) {
      ModelConfig cfg = tiny(v);
      cfg.algebra = a;
      const GradCheckReport rep = model_grad_check(cfg, 11, 16);
      for (const auto& b : rep.blocks) {
        INFO(v, " ", algebra_name(a), " ", b.name);
        CHECK(b.max_rel_err < 1e-4);
      }
    }
  }
}
