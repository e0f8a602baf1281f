#include <CLI11.hpp>

#include <pthread.h>
#include <signal.h>

#include <charconv>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "envlabel/autolabel.hpp"
#include "envlabel/errors.hpp"
#include "envlabel/focal_trainer.hpp"
#include "envlabel/metrics.hpp"
#include "envlabel/predictions_io.hpp"
#include "envlabel/service.hpp"
#include "envlabel/store.hpp"
#include "envlabel/toy_data.hpp"

namespace fs = std::filesystem;
using namespace envlabel;

namespace {

constexpr int kOk = 0;
constexpr int kFindings = 1;
constexpr int kUsage = 2;

void add_spec_flags(CLI::App* cmd, LidarSpec& spec) {
  cmd->add_option("--alpha", spec.alpha_deg, "horizontal angular resolution, degrees")->capture_default_str();
  cmd->add_option("--beta", spec.beta, "search radius multiplier")->capture_default_str();
  cmd->add_option("--min-neighbors", spec.min_neighbors, "neighbors needed to keep a point")->capture_default_str();
  cmd->add_option("--clutter-threshold", spec.clutter_threshold, "clutter fraction above which intensity is Heavy")
      ->capture_default_str();
  cmd->add_option("--min-radius", spec.min_radius, "search radius floor, meters")->capture_default_str();
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out.flush()) throw std::runtime_error("cannot write " + path.string());
}

// --- autolabel -------------------------------------------------------------

struct AutolabelArgs {
  fs::path manifest;
  fs::path store;
  LidarSpec spec;
  bool dry_run = false;
  std::string timestamp;
  unsigned threads = 1;
  fs::path report;
};

int run_autolabel(const AutolabelArgs& args) {
  args.spec.check();
  const auto manifest = DatasetManifest::load(args.manifest);
  BatchOptions options;
  options.now = args.timestamp.empty() ? now_utc() : parse_timestamp(args.timestamp);
  options.dry_run = args.dry_run;
  options.classify.threads = args.threads;

  BatchReport report;
  if (args.dry_run) {
    // Read the existing store (if any) without touching it.
    std::unique_ptr<AnnotationStore> store;
    if (fs::exists(args.store)) {
      store = std::make_unique<AnnotationStore>(args.store, AnnotationStore::Options{.read_only = true});
    } else {
      store = std::make_unique<AnnotationStore>();
    }
    report = run_batch(manifest, args.spec, *store, options);
  } else {
    AnnotationStore store(args.store);
    report = run_batch(manifest, args.spec, store, options);
  }
  const std::string records = report.to_records();
  if (!args.report.empty()) write_file(args.report, records);
  std::cout << records;
  return report.failed == 0 ? kOk : kFindings;
}

// --- validate --------------------------------------------------------------

int run_validate(const fs::path& store_path, bool final_mode) {
  if (!fs::exists(store_path)) {
    std::cerr << "error: store not found: " << store_path.string() << "\n";
    return kUsage;
  }
  AnnotationStore store(store_path, AnnotationStore::Options{.read_only = true});
  std::size_t problems = 0;
  for (const auto& issue : store.load_issues()) {
    std::cout << (issue.frame_id.empty() ? "-" : issue.frame_id) << "\tline " << issue.line << "\t"
              << issue.message << "\n";
    ++problems;
  }
  const auto mode = final_mode ? ValidationMode::Final : ValidationMode::Draft;
  for (const auto& a : store.all()) {
    for (const auto& v : validate(a, mode)) {
      std::cout << a.frame_id << "\t" << v.field << "\t" << v.message << "\n";
      ++problems;
    }
  }
  std::cerr << store.size() << " frames checked, " << problems << " problem(s)\n";
  return problems == 0 ? kOk : kFindings;
}

// --- stats -----------------------------------------------------------------

int run_stats(const fs::path& store_path, const std::string& format) {
  if (!fs::exists(store_path)) {
    std::cerr << "error: store not found: " << store_path.string() << "\n";
    return kUsage;
  }
  AnnotationStore store(store_path, AnnotationStore::Options{.read_only = true});
  const auto hist = stats(store);
  if (format == "table" || format == "both") std::cout << hist.to_table();
  if (format == "both") std::cout << "\n";
  if (format == "json" || format == "both") std::cout << hist.to_json() << "\n";
  return kOk;
}

// --- eval ------------------------------------------------------------------

int run_eval(const fs::path& predictions, const fs::path& store_path, const std::string& averaging,
             const fs::path& records) {
  if (!fs::exists(store_path)) {
    std::cerr << "error: store not found: " << store_path.string() << "\n";
    return kUsage;
  }
  const auto preds = parse_predictions(read_file(predictions));
  AnnotationStore store(store_path, AnnotationStore::Options{.read_only = true});
  const auto input = align_predictions(preds, store.all());
  if (input.matched == 0) {
    std::cerr << "error: no prediction matches a fully labeled frame\n";
    return kUsage;
  }
  metrics::Averaging avg = metrics::Averaging::Macro;
  if (averaging == "micro") avg = metrics::Averaging::Micro;
  if (averaging == "weighted") avg = metrics::Averaging::Weighted;
  const auto report = metrics::evaluate(input.categories, avg);
  std::cout << report.to_table();
  if (!input.unmatched.empty()) {
    std::cerr << input.unmatched.size() << " prediction(s) without a final ground-truth label skipped\n";
  }
  if (!records.empty()) write_file(records, report.to_records());
  return kOk;
}

// --- train-toy / synth-toy ---------------------------------------------------

struct TrainArgs {
  fs::path dataset;
  fs::path checkpoint;
  fs::path loss_log;
  focal::ToyModelConfig config;
  double gamma = 2.0;
  std::string weights = "uniform";
};

int run_train(TrainArgs args) {
  const auto data = focal::load_dataset(args.dataset);
  if (data.empty()) throw FormatError("dataset " + args.dataset.string() + " is empty");
  args.config.input_dim = data.front().features.size();
  const auto params = args.weights == "inverse-frequency"
                          ? focal::inverse_frequency_weights(data, args.config.class_counts, args.gamma)
                          : focal::FocalLossParams::uniform(args.config.class_counts, args.gamma);
  const auto result = focal::train(data, args.config, params);
  focal::save_checkpoint(result.model, args.checkpoint);
  if (!args.loss_log.empty()) {
    std::ostringstream log;
    for (std::size_t e = 0; e < result.epoch_loss.size(); ++e) {
      char buf[32];
      const auto r = std::to_chars(buf, buf + sizeof buf, result.epoch_loss[e]);
      log << e + 1 << '\t' << std::string_view(buf, static_cast<std::size_t>(r.ptr - buf)) << '\n';
    }
    write_file(args.loss_log, log.str());
  }
  const auto acc = focal::per_head_accuracy(result.model, data);
  std::cout << "epochs " << result.epoch_loss.size() << ", final loss " << result.epoch_loss.back() << "\n";
  for (std::size_t h = 0; h < focal::kHeads; ++h) {
    std::cout << category_key(kCategories[h]) << " accuracy " << acc[h] << "\n";
  }
  return kOk;
}

struct SynthArgs {
  fs::path out;
  focal::SeparableSpec spec;
  std::size_t input_dim = 16;
};

int run_synth(const SynthArgs& args) {
  focal::ToyModelConfig config;
  config.input_dim = args.input_dim;
  focal::save_dataset(focal::make_separable_dataset(config, args.spec), args.out);
  return kOk;
}

// --- serve -----------------------------------------------------------------

struct ServeArgs {
  std::string listen = "127.0.0.1:8080";
  fs::path store;
  fs::path manifest;
  LidarSpec spec;
  bool read_only = false;
};

int run_serve(const ServeArgs& args) {
  ServiceConfig config;
  const auto colon = args.listen.rfind(':');
  if (colon == std::string::npos) throw std::invalid_argument("--listen expects host:port");
  config.host = args.listen.substr(0, colon);
  config.port = std::stoi(args.listen.substr(colon + 1));
  config.spec = args.spec;
  config.read_only = args.read_only;

  AnnotationStore store(args.store, AnnotationStore::Options{.read_only = args.read_only});
  DatasetManifest manifest;
  if (!args.manifest.empty()) manifest = DatasetManifest::load(args.manifest);

  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  AnnotationService service(config, store, std::move(manifest));
  const int port = service.bind();
  std::cerr << "listening on " << config.host << ":" << port << "\n";
  std::thread waiter([&] {
    int sig = 0;
    sigwait(&signals, &sig);
    service.stop();
  });
  service.run();
  pthread_kill(waiter.native_handle(), SIGTERM);
  waiter.join();
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Environmental condition labeling toolkit"};
  app.require_subcommand(1);

  AutolabelArgs autolabel;
  auto* cmd_autolabel = app.add_subcommand("autolabel", "suggest precipitation intensity for every manifest frame");
  cmd_autolabel->add_option("--manifest", autolabel.manifest, "dataset manifest (TSV)")->required();
  cmd_autolabel->add_option("--store", autolabel.store, "annotation store")->required();
  add_spec_flags(cmd_autolabel, autolabel.spec);
  cmd_autolabel->add_flag("--dry-run", autolabel.dry_run, "report only; do not write the store");
  cmd_autolabel->add_option("--timestamp", autolabel.timestamp, "updated_at for written records (RFC 3339)");
  cmd_autolabel->add_option("--threads", autolabel.threads, "classification threads, 0 = auto")
      ->capture_default_str();
  cmd_autolabel->add_option("--report", autolabel.report, "also write the batch report here");

  fs::path validate_store;
  bool validate_final = false;
  auto* cmd_validate = app.add_subcommand("validate", "check every stored annotation");
  cmd_validate->add_option("--store", validate_store, "annotation store")->required();
  cmd_validate->add_flag("--final", validate_final, "require fully labeled frames");

  fs::path stats_store;
  std::string stats_format = "both";
  auto* cmd_stats = app.add_subcommand("stats", "label distribution of fully labeled frames");
  cmd_stats->add_option("--store", stats_store, "annotation store")->required();
  cmd_stats->add_option("--format", stats_format)
      ->check(CLI::IsMember({"table", "json", "both"}))
      ->capture_default_str();

  fs::path eval_predictions;
  fs::path eval_store;
  fs::path eval_records;
  std::string eval_averaging = "macro";
  auto* cmd_eval = app.add_subcommand("eval", "score predictions against stored labels");
  cmd_eval->add_option("--predictions", eval_predictions, "prediction records (one JSON object per line)")
      ->required();
  cmd_eval->add_option("--store", eval_store, "annotation store")->required();
  cmd_eval->add_option("--averaging", eval_averaging)
      ->check(CLI::IsMember({"macro", "micro", "weighted"}))
      ->capture_default_str();
  cmd_eval->add_option("--records", eval_records, "also write per-category records here");

  TrainArgs train;
  auto* cmd_train = app.add_subcommand("train-toy", "train the multi-head toy classifier with focal loss");
  cmd_train->add_option("--dataset", train.dataset, "training samples (one JSON object per line)")->required();
  cmd_train->add_option("--checkpoint", train.checkpoint, "output checkpoint")->required();
  cmd_train->add_option("--loss-log", train.loss_log, "per-epoch loss log");
  cmd_train->add_option("--seed", train.config.seed)->capture_default_str();
  cmd_train->add_option("--epochs", train.config.epochs)->capture_default_str();
  cmd_train->add_option("--learning-rate", train.config.learning_rate)->capture_default_str();
  cmd_train->add_option("--batch-size", train.config.batch_size)->capture_default_str();
  cmd_train->add_option("--trunk", train.config.trunk_widths, "hidden trunk widths")->delimiter(',');
  cmd_train->add_option("--head-hidden", train.config.head_hidden)->capture_default_str();
  cmd_train->add_option("--gamma", train.gamma, "focusing parameter")->capture_default_str();
  cmd_train->add_option("--weights", train.weights, "class weighting")
      ->check(CLI::IsMember({"uniform", "inverse-frequency"}))
      ->capture_default_str();

  SynthArgs synth;
  auto* cmd_synth = app.add_subcommand("synth-toy", "generate a separable toy dataset");
  cmd_synth->add_option("--out", synth.out, "output dataset")->required();
  cmd_synth->add_option("--samples", synth.spec.samples)->capture_default_str();
  cmd_synth->add_option("--seed", synth.spec.seed)->capture_default_str();
  cmd_synth->add_option("--noise", synth.spec.noise)->capture_default_str();
  cmd_synth->add_option("--input-dim", synth.input_dim)->capture_default_str();

  ServeArgs serve;
  auto* cmd_serve = app.add_subcommand("serve", "run the annotation HTTP service");
  cmd_serve->add_option("--listen", serve.listen, "host:port")->capture_default_str();
  cmd_serve->add_option("--store", serve.store, "annotation store")->required();
  cmd_serve->add_option("--manifest", serve.manifest, "dataset manifest (TSV)");
  cmd_serve->add_flag("--read-only", serve.read_only, "reject writes");
  add_spec_flags(cmd_serve, serve.spec);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*cmd_autolabel) return run_autolabel(autolabel);
    if (*cmd_validate) return run_validate(validate_store, validate_final);
    if (*cmd_stats) return run_stats(stats_store, stats_format);
    if (*cmd_eval) return run_eval(eval_predictions, eval_store, eval_averaging, eval_records);
    if (*cmd_train) return run_train(train);
    if (*cmd_synth) return run_synth(synth);
    if (*cmd_serve) return run_serve(serve);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}
