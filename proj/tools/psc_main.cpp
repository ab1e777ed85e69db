// Command-line front end: ingest, build, train, evaluate, predict, inspect.
// Machine-readable results go to stdout as single JSON lines; progress and
// diagnostics go to stderr. Exit status: 0 success, 2 data error, 3 numeric
// error, 64 usage error.

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <set>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "psc/checkpoint.hpp"
#include "psc/dataset.hpp"
#include "psc/errors.hpp"
#include "psc/io.hpp"
#include "psc/kernels.hpp"
#include "psc/nn.hpp"
#include "psc/pdbml.hpp"
#include "psc/seq.hpp"
#include "psc/train.hpp"

namespace {

using nlohmann::json;

// Flat config file mirroring the option names; command-line flags win.
class ConfigFile {
 public:
  explicit ConfigFile(const std::string& path) {
    if (path.empty()) return;
    const std::string text = psc::io::read_file(path, psc::io::has_suffix(path, ".gz"));
    try {
      values_ = json::parse(text);
    } catch (const json::exception& e) {
      psc::raise(psc::ErrorKind::BadConfig, path + ": " + e.what());
    }
    if (!values_.is_object())
      psc::raise(psc::ErrorKind::BadConfig, path + ": config must be a JSON object");
    static const std::set<std::string> known = {
        "max_len",       "mutation_frac_lo", "mutation_frac_hi", "train_ratio",
        "seed",          "vocab_size",       "embed_dim",        "conv1_filters",
        "conv2_filters", "pool1_window",     "conv3_filters",    "pool2_window",
        "input_len",     "batch_size",       "epochs",           "threshold",
        "jobs",          "rho",              "lr",               "epsilon",
        "kernels",
    };
    for (const auto& item : values_.items())
      if (known.find(item.key()) == known.end())
        psc::raise(psc::ErrorKind::BadConfig, path + ": unknown config key '" + item.key() + "'");
    path_ = path;
  }

  bool has(const char* key) const { return values_.contains(key); }

  /// Applies the file value unless the flag was given on the command line.
  template <class T>
  void apply(const char* key, T& target, const CLI::Option* opt) const {
    if (!values_.contains(key)) return;
    if (opt != nullptr && opt->count() > 0) return;
    try {
      target = values_.at(key).get<T>();
    } catch (const json::exception& e) {
      psc::raise(psc::ErrorKind::BadConfig, path_ + ": key '" + std::string(key) + "': " + e.what());
    }
  }

 private:
  json values_ = json::object();
  std::string path_;
};

void select_kernels(std::string name, const ConfigFile& cf, const CLI::Option* opt) {
  cf.apply("kernels", name, opt);
  if (name.empty()) return;  // keep the default (PSC_KERNELS or best supported)
  auto isa = psc::kernels::parse_isa(name);
  if (!isa)
    psc::raise(psc::ErrorKind::BadConfig,
               "unknown kernel set '" + name + "' (expected scalar, avx2 or neon)");
  if (!psc::kernels::isa_supported(*isa))
    psc::raise(psc::ErrorKind::BadConfig, "kernel set '" + name + "' is not supported on this CPU");
  psc::kernels::set_active(*isa);
}

std::uint64_t resolve_seed(std::uint64_t flag_value, const CLI::Option* opt,
                           const ConfigFile& cf) {
  std::uint64_t seed = flag_value;
  cf.apply("seed", seed, opt);
  if ((opt == nullptr || opt->count() == 0) && !cf.has("seed")) {
    if (const char* env = std::getenv("PSC_SEED"); env != nullptr && *env != '\0') {
      char* end = nullptr;
      const unsigned long long v = std::strtoull(env, &end, 10);
      if (end == env || *end != '\0')
        psc::raise(psc::ErrorKind::BadConfig, std::string("PSC_SEED is not an integer: ") + env);
      seed = v;
    }
  }
  return seed;
}

void emit(const json& j) { std::fputs((j.dump() + "\n").c_str(), stdout); }

json confusion_json(const psc::train::ConfusionMatrix& cm) {
  return {{"tp", cm.tp}, {"fp", cm.fp}, {"tn", cm.tn}, {"fn", cm.fn}};
}

json eval_json(const psc::train::EvalResult& res, double threshold, std::size_t samples) {
  json by_length = json::array();
  for (const auto& bucket : res.by_length) {
    if (bucket.confusion.total() == 0) continue;
    json b = confusion_json(bucket.confusion);
    b["length_lo"] = bucket.lo;
    b["length_hi"] = bucket.hi;
    b["accuracy"] = bucket.confusion.accuracy();
    by_length.push_back(std::move(b));
  }
  return {{"samples", samples},
          {"threshold", threshold},
          {"loss", res.loss},
          {"accuracy", res.accuracy},
          {"confusion", confusion_json(res.confusion)},
          {"by_length", std::move(by_length)}};
}

std::string default_sibling(const std::filesystem::path& anchor, const char* name) {
  std::filesystem::path p = anchor;
  p.replace_filename(name);
  return p.string();
}

int run_inspect(const std::string& path) {
  std::string head(4, '\0');
  {
    psc::io::FileSource probe(path);
    head.resize(probe.read(head.data(), 4));
  }
  if (head == "PSC1") {
    const psc::checkpoint::Checkpoint ckpt = psc::checkpoint::load(path);
    emit({{"kind", "checkpoint"},
          {"epoch", ckpt.epoch},
          {"val_acc", ckpt.val_acc},
          {"vocab_size", ckpt.vocab.size()},
          {"parameters", ckpt.config.count_parameters()},
          {"config",
           {{"vocab_size", ckpt.config.vocab_size},
            {"embed_dim", ckpt.config.embed_dim},
            {"conv1_filters", ckpt.config.conv1_filters},
            {"conv2_filters", ckpt.config.conv2_filters},
            {"pool1_window", ckpt.config.pool1_window},
            {"conv3_filters", ckpt.config.conv3_filters},
            {"pool2_window", ckpt.config.pool2_window},
            {"input_len", ckpt.config.input_len}}},
          {"optimizer",
           {{"rho", ckpt.opt.rho}, {"lr", ckpt.opt.lr}, {"epsilon", ckpt.opt.epsilon}}}});
    return 0;
  }

  // Line-oriented formats: sniff the header (through gzip when framed).
  std::string header;
  {
    psc::io::FileSource file(path);
    const bool gz = head.size() >= 2 && static_cast<unsigned char>(head[0]) == 0x1f &&
                    static_cast<unsigned char>(head[1]) == 0x8b;
    std::unique_ptr<psc::io::GzipSource> gzsrc;
    psc::io::ByteSource* src = &file;
    if (gz) {
      gzsrc = std::make_unique<psc::io::GzipSource>(file);
      src = gzsrc.get();
    }
    psc::io::LineReader lines(*src);
    lines.next(header);
    if (!header.empty() && header.back() == '\r') header.pop_back();
  }

  if (header == "id,tokens") {
    const auto rows = psc::pdbml::read_table(path);
    std::set<std::string> codes;
    std::size_t total_tokens = 0;
    for (const auto& row : rows) {
      total_tokens += row.tokens.size();
      for (const auto& tok : row.tokens) codes.insert(tok.str());
    }
    emit({{"kind", "table"},
          {"rows", rows.size()},
          {"total_tokens", total_tokens},
          {"distinct_codes", codes.size()}});
    return 0;
  }
  if (header == "id,label,indices") {
    const auto ds = psc::dataset::read_dataset(path);
    emit({{"kind", "dataset"},
          {"samples", ds.samples.size()},
          {"max_len", ds.max_len},
          {"positives", ds.count_label(1)},
          {"negatives", ds.count_label(0)}});
    return 0;
  }
  if (header == "epoch,train_loss,train_acc,val_loss,val_acc") {
    const auto records = psc::train::read_history_csv(path);
    emit({{"kind", "history"}, {"epochs", records.size()}});
    return 0;
  }
  if (header.find('\t') != std::string::npos) {
    const psc::Vocabulary vocab = psc::Vocabulary::load(path);
    json codes = json::array();
    for (const auto& code : vocab.codes()) codes.push_back(code.str());
    emit({{"kind", "vocabulary"}, {"size", vocab.size()}, {"codes", std::move(codes)}});
    return 0;
  }
  psc::raise(psc::ErrorKind::BadTableFormat, path + ": unrecognized file format");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"protein sequence classifier: PDBML ingestion, dataset preparation and a small "
               "convolutional network"};
  app.require_subcommand(1);

  struct {
    std::string config, kernels;
    // ingest
    std::string in_dir, out_table;
    std::size_t jobs = 0;
    // build
    std::string table, out_train, out_test, vocab_path;
    psc::dataset::BuildConfig build;
    // train / evaluate / predict
    std::string train_path, val_path, ckpt_path, metrics_csv, metrics_svg;
    std::string data_path, sequence;
    psc::nn::ModelConfig model;
    psc::train::TrainConfig tc;
    std::uint64_t seed = 0;
    double threshold = 0.5;
    // inspect
    std::string inspect_path;
  } o;
  o.model.input_len = 0;  // 0 = take the encoded length of the training data

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "JSON config file; flags override its values");
    return sub->add_option("--kernels", o.kernels, "force a kernel set: scalar, avx2 or neon");
  };

  CLI::App* c_ingest = app.add_subcommand("ingest", "parse PDBML files into a sequence table");
  c_ingest->add_option("--input", o.in_dir, "directory of .xml / .xml.gz files")->required();
  c_ingest->add_option("--output", o.out_table, "output sequence table (gzip CSV)")->required();
  c_ingest->add_option("--jobs", o.jobs, "parallel parser count (0 = all cores)");
  CLI::Option* ingest_kernels = add_common(c_ingest);

  CLI::App* c_build = app.add_subcommand("build", "turn a sequence table into train/test datasets");
  c_build->add_option("--input", o.table, "sequence table from ingest")->required();
  c_build->add_option("--out-train", o.out_train, "training dataset path (gzip CSV)")->required();
  c_build->add_option("--out-test", o.out_test, "test dataset path (gzip CSV)")->required();
  c_build->add_option("--vocab", o.vocab_path, "vocabulary TSV path (default: vocab.tsv next to --out-train)");
  CLI::Option* b_maxlen = c_build->add_option("--max-len", o.build.max_len, "length filter and padded length");
  CLI::Option* b_ratio = c_build->add_option("--train-ratio", o.build.train_ratio, "fraction of samples in the training split");
  CLI::Option* b_lo = c_build->add_option("--mutation-frac-lo", o.build.mutation_frac_lo, "smallest mutated fragment fraction");
  CLI::Option* b_hi = c_build->add_option("--mutation-frac-hi", o.build.mutation_frac_hi, "largest mutated fragment fraction");
  CLI::Option* b_seed = c_build->add_option("--seed", o.build.seed, "build RNG seed (PSC_SEED as fallback)");
  CLI::Option* build_kernels = add_common(c_build);

  CLI::App* c_train = app.add_subcommand("train", "train the network on built datasets");
  c_train->add_option("--train", o.train_path, "training dataset")->required();
  c_train->add_option("--val", o.val_path, "validation dataset")->required();
  c_train->add_option("--vocab", o.vocab_path, "vocabulary TSV")->required();
  c_train->add_option("--checkpoint", o.ckpt_path, "best-model checkpoint path")->required();
  c_train->add_option("--metrics-csv", o.metrics_csv, "per-epoch metrics CSV (default: metrics.csv next to the checkpoint)");
  c_train->add_option("--metrics-svg", o.metrics_svg, "metrics chart (default: metrics.svg next to the checkpoint)");
  CLI::Option* t_embed = c_train->add_option("--embed-dim", o.model.embed_dim, "embedding width");
  CLI::Option* t_f1 = c_train->add_option("--conv1-filters", o.model.conv1_filters, "filters in the first convolution");
  CLI::Option* t_f2 = c_train->add_option("--conv2-filters", o.model.conv2_filters, "filters in the second convolution");
  CLI::Option* t_p1 = c_train->add_option("--pool1-window", o.model.pool1_window, "first max-pooling window");
  CLI::Option* t_f3 = c_train->add_option("--conv3-filters", o.model.conv3_filters, "filters in the third convolution");
  CLI::Option* t_p2 = c_train->add_option("--pool2-window", o.model.pool2_window, "second max-pooling window");
  CLI::Option* t_len = c_train->add_option("--input-len", o.model.input_len, "model input length (default: dataset length)");
  CLI::Option* t_batch = c_train->add_option("--batch-size", o.tc.batch_size, "mini-batch size");
  CLI::Option* t_epochs = c_train->add_option("--epochs", o.tc.epochs, "training epochs");
  CLI::Option* t_seed = c_train->add_option("--seed", o.seed, "training RNG seed (PSC_SEED as fallback)");
  CLI::Option* t_thresh = c_train->add_option("--threshold", o.tc.threshold, "positive-class probability threshold");
  CLI::Option* t_jobs = c_train->add_option("--jobs", o.jobs, "worker threads (0 = all cores)");
  CLI::Option* t_rho = c_train->add_option("--rho", o.tc.rho, "Adadelta decay rate");
  CLI::Option* t_lr = c_train->add_option("--lr", o.tc.lr, "Adadelta learning-rate multiplier");
  CLI::Option* t_eps = c_train->add_option("--epsilon", o.tc.epsilon, "Adadelta stabilizer");
  CLI::Option* train_kernels = add_common(c_train);

  CLI::App* c_eval = app.add_subcommand("evaluate", "evaluate a checkpoint on a dataset");
  c_eval->add_option("--checkpoint", o.ckpt_path, "checkpoint file")->required();
  c_eval->add_option("--data", o.data_path, "dataset to evaluate")->required();
  c_eval->add_option("--vocab", o.vocab_path, "vocabulary TSV to cross-check against the checkpoint");
  CLI::Option* e_thresh = c_eval->add_option("--threshold", o.threshold, "positive-class probability threshold");
  c_eval->add_option("--jobs", o.jobs, "worker threads (0 = all cores)");
  CLI::Option* eval_kernels = add_common(c_eval);

  CLI::App* c_predict = app.add_subcommand("predict", "classify one sequence with a checkpoint");
  c_predict->add_option("--checkpoint", o.ckpt_path, "checkpoint file")->required();
  c_predict->add_option("--sequence", o.sequence, "tokens joined by '-' (default: read from stdin)");
  CLI::Option* p_thresh = c_predict->add_option("--threshold", o.threshold, "positive-class probability threshold");
  CLI::Option* predict_kernels = add_common(c_predict);

  CLI::App* c_inspect = app.add_subcommand("inspect", "print a summary of any pipeline file");
  c_inspect->add_option("path", o.inspect_path, "table, dataset, vocabulary, metrics or checkpoint file")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);  // --help and friends: status 0
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 64;
  }

  try {
    const ConfigFile cf(o.config);

    if (c_ingest->parsed()) {
      select_kernels(o.kernels, cf, ingest_kernels);
      cf.apply("jobs", o.jobs, c_ingest->get_option("--jobs"));
      psc::pdbml::IngestOptions opts;
      opts.jobs = o.jobs;
      const psc::pdbml::IngestReport report = psc::pdbml::ingest_corpus(o.in_dir, o.out_table, opts);
      emit({{"files_seen", report.files_seen},
            {"files_failed", report.files_failed},
            {"sequences_emitted", report.sequences_emitted},
            {"distinct_codes", report.distinct_codes}});
      return 0;
    }

    if (c_build->parsed()) {
      select_kernels(o.kernels, cf, build_kernels);
      cf.apply("max_len", o.build.max_len, b_maxlen);
      cf.apply("train_ratio", o.build.train_ratio, b_ratio);
      cf.apply("mutation_frac_lo", o.build.mutation_frac_lo, b_lo);
      cf.apply("mutation_frac_hi", o.build.mutation_frac_hi, b_hi);
      o.build.seed = resolve_seed(o.build.seed, b_seed, cf);
      o.build.validate();
      if (o.vocab_path.empty()) o.vocab_path = default_sibling(o.out_train, "vocab.tsv");

      const auto rows = psc::pdbml::read_table(o.table);
      const psc::dataset::LengthHistogram hist = psc::dataset::length_histogram(rows);
      // The vocabulary covers the whole table, so codes seen only in
      // filtered-out sequences still get homopolymer negatives.
      const psc::Vocabulary vocab = psc::build_vocabulary(rows);
      const auto retained = psc::dataset::filter_by_length(rows, o.build.max_len);
      if (retained.empty())
        psc::raise(psc::ErrorKind::TooFewPositives,
                   "no sequences of length <= " + std::to_string(o.build.max_len) + " in " + o.table);
      const auto positives = psc::dataset::augment_reverse(retained);
      const auto labeled = psc::dataset::build_balanced(positives, vocab, o.build);
      auto [train_ds, test_ds] = psc::dataset::split_and_encode(labeled, vocab, o.build);
      psc::dataset::write_dataset(o.out_train, train_ds);
      psc::dataset::write_dataset(o.out_test, test_ds);
      vocab.save(o.vocab_path);

      json hist_json = json::array();
      for (std::size_t i = 0; i < psc::dataset::LengthHistogram::kBuckets; ++i)
        hist_json.push_back({{"length_lo", psc::dataset::LengthHistogram::bounds()[i].first},
                             {"length_hi", psc::dataset::LengthHistogram::bounds()[i].second},
                             {"count", hist.counts[i]}});
      emit({{"table_rows", rows.size()},
            {"histogram", std::move(hist_json)},
            {"retained", retained.size()},
            {"retention", static_cast<double>(retained.size()) / static_cast<double>(rows.size())},
            {"vocab_size", vocab.size()},
            {"positives", positives.size()},
            {"negatives", labeled.size() - positives.size()},
            {"train_samples", train_ds.samples.size()},
            {"test_samples", test_ds.samples.size()},
            {"seed", o.build.seed}});
      return 0;
    }

    if (c_train->parsed()) {
      select_kernels(o.kernels, cf, train_kernels);
      cf.apply("embed_dim", o.model.embed_dim, t_embed);
      cf.apply("conv1_filters", o.model.conv1_filters, t_f1);
      cf.apply("conv2_filters", o.model.conv2_filters, t_f2);
      cf.apply("pool1_window", o.model.pool1_window, t_p1);
      cf.apply("conv3_filters", o.model.conv3_filters, t_f3);
      cf.apply("pool2_window", o.model.pool2_window, t_p2);
      cf.apply("input_len", o.model.input_len, t_len);
      cf.apply("batch_size", o.tc.batch_size, t_batch);
      cf.apply("epochs", o.tc.epochs, t_epochs);
      cf.apply("threshold", o.tc.threshold, t_thresh);
      cf.apply("jobs", o.jobs, t_jobs);
      cf.apply("rho", o.tc.rho, t_rho);
      cf.apply("lr", o.tc.lr, t_lr);
      cf.apply("epsilon", o.tc.epsilon, t_eps);
      o.tc.seed = resolve_seed(o.seed, t_seed, cf);
      o.tc.jobs = o.jobs;
      o.tc.checkpoint_path = o.ckpt_path;
      if (o.metrics_csv.empty()) o.metrics_csv = default_sibling(o.ckpt_path, "metrics.csv");
      if (o.metrics_svg.empty()) o.metrics_svg = default_sibling(o.ckpt_path, "metrics.svg");

      const psc::Vocabulary vocab = psc::Vocabulary::load(o.vocab_path);
      psc::dataset::LabeledDataset train_ds = psc::dataset::read_dataset(o.train_path);
      psc::dataset::LabeledDataset val_ds = psc::dataset::read_dataset(o.val_path);
      train_ds.vocab = vocab;
      train_ds.split_tag = "train";
      val_ds.vocab = vocab;
      val_ds.split_tag = "test";

      o.model.vocab_size = static_cast<std::int32_t>(vocab.size());
      if (cf.has("vocab_size")) {
        std::int32_t declared = o.model.vocab_size;
        cf.apply("vocab_size", declared, nullptr);
        if (declared != o.model.vocab_size)
          psc::raise(psc::ErrorKind::VocabularyMismatch,
                     "config vocab_size " + std::to_string(declared) + " != vocabulary size " +
                         std::to_string(vocab.size()));
      }
      if (o.model.input_len == 0) o.model.input_len = static_cast<std::int32_t>(train_ds.max_len);

      const auto observer = [&](const psc::train::EpochRecord& r) {
        std::fprintf(stderr,
                     "epoch %3lld/%lld  train_loss=%.4f train_acc=%.4f  val_loss=%.4f val_acc=%.4f\n",
                     static_cast<long long>(r.epoch), static_cast<long long>(o.tc.epochs),
                     r.train_loss, r.train_acc, r.val_loss, r.val_acc);
      };
      const psc::train::TrainOutcome outcome =
          psc::train::train(o.model, train_ds, val_ds, o.tc, observer);
      psc::train::export_history(outcome.history, o.metrics_csv, o.metrics_svg);

      const psc::train::EpochRecord& last = outcome.history.records.back();
      emit({{"epochs", outcome.history.records.size()},
            {"best_epoch", outcome.history.best_epoch},
            {"best_val_acc", outcome.history.best_val_acc},
            {"final_train_loss", last.train_loss},
            {"final_train_acc", last.train_acc},
            {"final_val_loss", last.val_loss},
            {"final_val_acc", last.val_acc},
            {"parameters", o.model.count_parameters()},
            {"seed", o.tc.seed},
            {"checkpoint", o.ckpt_path},
            {"metrics_csv", o.metrics_csv},
            {"metrics_svg", o.metrics_svg}});
      return 0;
    }

    if (c_eval->parsed()) {
      select_kernels(o.kernels, cf, eval_kernels);
      cf.apply("threshold", o.threshold, e_thresh);
      cf.apply("jobs", o.jobs, c_eval->get_option("--jobs"));
      const psc::checkpoint::Checkpoint ckpt = psc::checkpoint::load(o.ckpt_path);
      psc::dataset::LabeledDataset ds = psc::dataset::read_dataset(o.data_path);
      if (!o.vocab_path.empty()) ds.vocab = psc::Vocabulary::load(o.vocab_path);
      const psc::train::EvalResult res = psc::train::evaluate(ckpt, ds, o.threshold, o.jobs);
      emit(eval_json(res, o.threshold, ds.samples.size()));
      return 0;
    }

    if (c_predict->parsed()) {
      select_kernels(o.kernels, cf, predict_kernels);
      cf.apply("threshold", o.threshold, p_thresh);
      std::string text = o.sequence;
      if (text.empty()) {
        if (!std::getline(std::cin, text) || text.empty())
          psc::raise(psc::ErrorKind::InputTooShort, "no sequence given (use --sequence or stdin)");
      }
      std::vector<psc::MonomerCode> tokens;
      std::size_t start = 0;
      while (start <= text.size()) {
        const std::size_t dash = text.find('-', start);
        const std::size_t end = dash == std::string::npos ? text.size() : dash;
        tokens.emplace_back(text.substr(start, end - start));
        if (dash == std::string::npos) break;
        start = dash + 1;
      }
      const psc::checkpoint::Checkpoint ckpt = psc::checkpoint::load(o.ckpt_path);
      const psc::train::Prediction pred =
          psc::train::predict(ckpt, psc::ProteinSequence("input", std::move(tokens)), o.threshold);
      emit({{"probability", pred.probability}, {"label", pred.label}, {"threshold", o.threshold}});
      return 0;
    }

    if (c_inspect->parsed()) return run_inspect(o.inspect_path);
  } catch (const psc::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return e.exit_status();
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
