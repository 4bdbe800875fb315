// quarc command line: gen-data, count-params, train, eval, grad-check.
// Exit codes: 0 ok, 1 usage or config, 2 data, 3 numeric failure.

#include <omp.h>

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "quarc/checkpoint.hpp"
#include "quarc/error.hpp"
#include "quarc/gradsuite.hpp"
#include "quarc/io.hpp"
#include "quarc/train.hpp"

namespace fs = std::filesystem;
using namespace quarc;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;
constexpr double kGradTol = 1e-4;

void echo_config(const ModelConfig& cfg) {
  std::string text = cfg.to_text();
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto eol = text.find('\n', pos);
    std::cout << "# " << text.substr(pos, eol - pos) << "\n";
    pos = eol + 1;
  }
}

ModelConfig config_or_default(const std::string& path) {
  return path.empty() ? parse_config("") : load_config(path);
}

fs::path sidecar(const fs::path& ckpt, const char* suffix) {
  fs::path p = ckpt;
  p += suffix;
  return p;
}

void print_metrics(const char* label, const EvalMetrics& m) {
  auto opt = [](const std::optional<double>& v) {
    char buf[32];
    if (!v) return std::string("n/a");
    std::snprintf(buf, sizeof buf, "%.17g", *v);
    return std::string(buf);
  };
  std::printf("%s loss=%.17g accuracy=%.17g roc_auc=%s average_precision=%s\n", label, m.loss, m.accuracy,
              opt(m.roc_auc).c_str(), opt(m.average_precision).c_str());
}

int cmd_gen_data(const std::string& task, std::size_t n, std::uint64_t seed, const std::string& out) {
  const SynthTask t = parse_synth_task(task);
  std::cout << "# task=" << task << "\n# n=" << n << "\n# seed=" << seed << "\n# out=" << out << "\n";
  synth_generate(t, n, seed, out);
  std::cout << "wrote " << n << " samples to " << out << "\n";
  return 0;
}

int cmd_count_params(const std::string& config, const std::string& format) {
  const ModelConfig cfg = config_or_default(config);
  echo_config(cfg);
  const auto rows = ratio_report(cfg);
  if (format == "tsv") {
    std::printf("variant\tquaternion\treal_mirror\tratio\n");
    for (const auto& r : rows) std::printf("%d\t%zu\t%zu\t%.4f\n", r.variant, r.quaternion, r.real, r.ratio);
  } else {
    std::printf("%-8s %12s %12s %8s\n", "variant", "quaternion", "real_mirror", "ratio");
    for (const auto& r : rows) std::printf("M%-7d %12zu %12zu %8.4f\n", r.variant, r.quaternion, r.real, r.ratio);
  }
  return 0;
}

int cmd_train(const std::string& data, const std::string& config, const std::string& out, int threads) {
  const ModelConfig cfg = config_or_default(config);
  echo_config(cfg);
  const Dataset ds = read_dataset(data);
  Model model = Model::build(cfg);
  TrainOptions opts;
  opts.threads = threads;
  opts.on_epoch = [&](std::size_t epoch, const EpochRecord& r) {
    std::printf("epoch %zu/%zu loss=%.6f val_auc=%s seconds=%.2f\n", epoch + 1, cfg.epochs, r.loss,
                r.val.roc_auc ? std::to_string(*r.val.roc_auc).c_str() : "n/a", r.seconds);
    std::fflush(stdout);
  };
  const TrainReport report = train_loop(model, ds, opts);
  save_checkpoint(model.params(), out);
  write_file_atomic(sidecar(out, ".cfg"), cfg.to_text());
  write_file_atomic(sidecar(out, ".report.json"), report.to_json());
  print_metrics("train", report.train);
  print_metrics("test", report.test);
  std::cout << "checkpoint " << out << "\n";
  return 0;
}

int cmd_eval(const std::string& data, const std::string& model_path, int threads) {
  const fs::path cfg_path = sidecar(model_path, ".cfg");
  if (!fs::exists(cfg_path)) throw DataError("missing model config '" + cfg_path.string() + "'");
  const ModelConfig cfg = parse_config(read_text_file(cfg_path));
  echo_config(cfg);
  const auto entries = load_checkpoint(model_path);
  const Dataset ds = read_dataset(data);
  Model model = Model::build(cfg);
  apply_checkpoint(model.params(), entries);
  const auto test = encode_samples(ds, ds.indices(Split::test), cfg);
  print_metrics("test", evaluate(model, test, threads));
  return 0;
}

int cmd_grad_check(const std::string& config, std::uint64_t seed) {
  ModelConfig cfg = config_or_default(config);
  cfg.seed = seed;
  echo_config(cfg);
  if (const char* f = std::getenv("QUARC_FAULT_INJECT"); f && std::string(f) == "1") {
    ops::debug::set_backward_fault(true);
    std::cout << "# fault injection: dense weight gradients scaled by 1.01\n";
  }
  GradCheckReport all = layer_grad_checks(cfg.algebra, seed);
  const GradCheckReport full = model_grad_check(cfg, seed, 64);
  for (auto b : full.blocks) {
    b.name = "model/" + b.name;
    all.blocks.push_back(std::move(b));
  }
  bool ok = true;
  for (const auto& b : all.blocks) {
    const bool pass = b.max_rel_err < kGradTol;
    ok = ok && pass;
    std::printf("%-44s scalars=%-5zu max_rel_err=%.3e %s\n", b.name.c_str(), b.scalars, b.max_rel_err,
                pass ? "ok" : "FAIL");
  }
  std::printf("max_rel_err=%.3e tolerance=%.0e %s\n", all.max_rel_err(), kGradTol, ok ? "PASS" : "FAIL");
  return ok ? 0 : kExitNumeric;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"quaternion multi-modal fusion kit"};
  app.require_subcommand(1);
  int threads = 1;
  app.add_option("--threads", threads, "worker threads for batch fan-out")->check(CLI::PositiveNumber);

  std::string task, out, data, config, model, format = "text";
  std::size_t n = 0;
  std::uint64_t seed = 0;

  auto* gen = app.add_subcommand("gen-data", "write a synthetic dataset");
  gen->add_option("--task", task, "separable or xor")->required()->check(CLI::IsMember({"separable", "xor"}));
  gen->add_option("--n", n, "number of samples")->required()->check(CLI::PositiveNumber);
  gen->add_option("--seed", seed, "generator seed")->required();
  gen->add_option("--out", out, "output directory")->required();

  auto* count = app.add_subcommand("count-params", "trainable scalars of every variant, quaternion vs real");
  count->add_option("--config", config, "model config file");
  count->add_option("--format", format, "text or tsv")->check(CLI::IsMember({"text", "tsv"}));

  auto* train = app.add_subcommand("train", "train a model and write a checkpoint");
  train->add_option("--data", data, "dataset directory")->required();
  train->add_option("--config", config, "model config file")->required();
  train->add_option("--out", out, "checkpoint path")->required();

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on the test split");
  eval->add_option("--data", data, "dataset directory")->required();
  eval->add_option("--model", model, "checkpoint path")->required();

  auto* grad = app.add_subcommand("grad-check", "finite-difference gradient checks");
  grad->add_option("--config", config, "model config file");
  grad->add_option("--seed", seed, "seed")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  omp_set_num_threads(threads);
  std::cout << "# threads=" << threads << "\n";
  try {
    if (*gen) return cmd_gen_data(task, n, seed, out);
    if (*count) return cmd_count_params(config, format);
    if (*train) return cmd_train(data, config, out, threads);
    if (*eval) return cmd_eval(data, model, threads);
    if (*grad) return cmd_grad_check(config, seed);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const Error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
