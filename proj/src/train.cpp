#include "psc/train.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <mutex>
#include <numeric>
#include <thread>

#include "psc/io.hpp"
#include "psc/rng.hpp"

namespace psc::train {

namespace {

std::size_t resolve_jobs(std::size_t jobs) {
  if (jobs != 0) return jobs;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

/// Runs fn(worker, i) for i in [0, n); any worker exception is rethrown
/// after all workers stop.
void parallel_for(std::size_t n, std::size_t jobs,
                  const std::function<void(std::size_t, std::size_t)>& fn) {
  if (jobs <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(0, i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex err_mu;
  std::exception_ptr err;
  const std::size_t nthreads = std::min(jobs, n);
  std::vector<std::thread> workers;
  workers.reserve(nthreads);
  for (std::size_t w = 0; w < nthreads; ++w) {
    workers.emplace_back([&, w] {
      try {
        for (;;) {
          const std::size_t i = next.fetch_add(1);
          if (i >= n) return;
          fn(w, i);
        }
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mu);
        if (!err) err = std::current_exception();
        next.store(n);  // stop the other workers promptly
      }
    });
  }
  for (std::thread& w : workers) w.join();
  if (err) std::rethrow_exception(err);
}

/// Tokens before the first padding index.
std::size_t unpadded_length(const std::vector<std::int32_t>& indices) {
  std::size_t n = 0;
  while (n < indices.size() && indices[n] != 0) ++n;
  return n;
}

std::string fmt(double v, const char* spec = "%.6g") {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

}  // namespace

void TrainConfig::validate() const {
  if (batch_size < 1) raise(ErrorKind::BadConfig, "batch_size must be at least 1");
  if (epochs < 1) raise(ErrorKind::BadConfig, "epochs must be at least 1");
  if (!(threshold >= 0.0 && threshold <= 1.0))
    raise(ErrorKind::BadConfig, "threshold must be in [0, 1]");
  if (!(rho >= 0.0 && rho < 1.0)) raise(ErrorKind::BadConfig, "rho must be in [0, 1)");
  if (!(lr > 0.0)) raise(ErrorKind::BadConfig, "lr must be positive");
  if (!(epsilon > 0.0)) raise(ErrorKind::BadConfig, "epsilon must be positive");
}

EvalResult evaluate(const nn::ModelConfig& model_cfg, const nn::Parameters& params,
                    const dataset::LabeledDataset& ds, double threshold, std::size_t jobs) {
  model_cfg.validate();
  if (ds.samples.empty()) raise(ErrorKind::BadConfig, "cannot evaluate an empty dataset");
  if (ds.vocab.size() != 0 &&
      static_cast<std::int32_t>(ds.vocab.size()) != model_cfg.vocab_size)
    raise(ErrorKind::VocabularyMismatch,
          "dataset vocabulary has " + std::to_string(ds.vocab.size()) + " codes, model expects " +
              std::to_string(model_cfg.vocab_size));

  const std::size_t n = ds.samples.size();
  jobs = resolve_jobs(jobs);
  std::vector<double> losses(n);
  std::vector<unsigned char> preds(n);
  std::vector<nn::ForwardCache> caches(std::min(jobs, n) > 0 ? std::min(jobs, n) : 1);

  parallel_for(n, jobs, [&](std::size_t w, std::size_t i) {
    const EncodedSample& s = ds.samples[i];
    const double p = nn::forward(model_cfg, params, s.indices, caches[w]);
    losses[i] = nn::bce_loss(p, s.label);
    preds[i] = p >= threshold ? 1 : 0;
  });

  EvalResult out;
  const auto& bounds = dataset::LengthHistogram::bounds();
  for (std::size_t b = 0; b < bounds.size(); ++b) {
    out.by_length[b].lo = bounds[b].first;
    out.by_length[b].hi = bounds[b].second;
  }
  double loss_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    loss_sum += losses[i];  // fixed order: result is independent of jobs
    const bool truth = ds.samples[i].label == 1;
    const bool pred = preds[i] != 0;
    ConfusionMatrix* cells[2] = {&out.confusion, nullptr};
    const std::size_t len = unpadded_length(ds.samples[i].indices);
    for (std::size_t b = 0; b < bounds.size(); ++b) {
      if (len >= bounds[b].first && len <= bounds[b].second) {
        cells[1] = &out.by_length[b].confusion;
        break;
      }
    }
    for (ConfusionMatrix* cm : cells) {
      if (cm == nullptr) continue;
      if (truth && pred) ++cm->tp;
      else if (truth && !pred) ++cm->fn;
      else if (!truth && pred) ++cm->fp;
      else ++cm->tn;
    }
  }
  out.loss = loss_sum / static_cast<double>(n);
  if (!std::isfinite(out.loss)) raise(ErrorKind::NonFiniteLoss, "mean evaluation loss is not finite");
  out.accuracy = out.confusion.accuracy();
  return out;
}

EvalResult evaluate(const checkpoint::Checkpoint& ckpt, const dataset::LabeledDataset& ds,
                    double threshold, std::size_t jobs) {
  if (ds.vocab.size() != 0 && !(ds.vocab == ckpt.vocab))
    raise(ErrorKind::VocabularyMismatch,
          "dataset vocabulary differs from the checkpoint vocabulary");
  return evaluate(ckpt.config, ckpt.params, ds, threshold, jobs);
}

TrainOutcome train(const nn::ModelConfig& model_cfg, const dataset::LabeledDataset& train_set,
                   const dataset::LabeledDataset& val_set, const TrainConfig& cfg,
                   const EpochObserver& observer) {
  model_cfg.validate();
  cfg.validate();
  if (train_set.samples.empty() || val_set.samples.empty())
    raise(ErrorKind::BadConfig, "training and validation datasets must be non-empty");
  if (train_set.vocab.size() != 0 && val_set.vocab.size() != 0 &&
      !(train_set.vocab == val_set.vocab))
    raise(ErrorKind::VocabularyMismatch, "train and validation vocabularies differ");
  const Vocabulary& vocab =
      train_set.vocab.size() != 0 ? train_set.vocab : val_set.vocab;
  if (vocab.size() != 0 && static_cast<std::int32_t>(vocab.size()) != model_cfg.vocab_size)
    raise(ErrorKind::VocabularyMismatch,
          "vocabulary has " + std::to_string(vocab.size()) + " codes, model expects " +
              std::to_string(model_cfg.vocab_size));
  for (const dataset::LabeledDataset* ds : {&train_set, &val_set}) {
    if (ds->max_len != 0 && ds->max_len != static_cast<std::size_t>(model_cfg.input_len))
      raise(ErrorKind::ShapeMismatch,
            "dataset encoded to length " + std::to_string(ds->max_len) + ", model expects " +
                std::to_string(model_cfg.input_len));
  }

  const std::size_t jobs = resolve_jobs(cfg.jobs);
  const std::size_t n = train_set.samples.size();
  const std::size_t batch = static_cast<std::size_t>(cfg.batch_size);

  nn::Parameters params = nn::Parameters::glorot(model_cfg, cfg.seed);
  nn::AdadeltaState state = nn::AdadeltaState::init(model_cfg, cfg.rho, cfg.lr, cfg.epsilon);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  // Per-sample gradient slots, merged in sample order after each batch; the
  // reduction (and so the whole run) does not depend on worker scheduling.
  const std::size_t slots = std::min(batch, n);
  std::vector<nn::Parameters> sample_grads;
  sample_grads.reserve(slots);
  for (std::size_t i = 0; i < slots; ++i) sample_grads.push_back(nn::Parameters::zeros(model_cfg));
  nn::Parameters total = nn::Parameters::zeros(model_cfg);

  const std::size_t workers = std::max<std::size_t>(1, std::min(jobs, slots));
  std::vector<nn::ForwardCache> caches(workers);
  std::vector<nn::BackwardScratch> scratch;
  scratch.reserve(workers);
  for (std::size_t i = 0; i < workers; ++i) scratch.emplace_back(model_cfg);

  TrainOutcome out;
  double best = -1.0;  // first epoch always checkpoints

  for (std::int64_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    Rng shuffle_rng = Rng::derive(cfg.seed, static_cast<std::uint64_t>(epoch));
    shuffle_rng.shuffle(order);

    for (std::size_t base = 0; base < n; base += batch) {
      const std::size_t bn = std::min(batch, n - base);
      parallel_for(bn, workers, [&](std::size_t w, std::size_t k) {
        const EncodedSample& s = train_set.samples[order[base + k]];
        sample_grads[k].fill(0.0);
        nn::forward(model_cfg, params, s.indices, caches[w]);
        nn::backward(model_cfg, params, caches[w], s.label, sample_grads[k], scratch[w]);
      });
      total.fill(0.0);
      for (std::size_t k = 0; k < bn; ++k) total.add(sample_grads[k]);
      total.scale(1.0 / static_cast<double>(bn));
      nn::adadelta_step(params, total, state);
    }

    const EvalResult tr = evaluate(model_cfg, params, train_set, cfg.threshold, jobs);
    const EvalResult va = evaluate(model_cfg, params, val_set, cfg.threshold, jobs);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = tr.loss;
    rec.train_acc = tr.accuracy;
    rec.val_loss = va.loss;
    rec.val_acc = va.accuracy;
    out.history.records.push_back(rec);
    if (observer) observer(rec);

    if (va.accuracy > best) {
      best = va.accuracy;
      out.history.best_epoch = epoch;
      out.history.best_val_acc = va.accuracy;
      out.best.config = model_cfg;
      out.best.vocab = vocab;
      out.best.epoch = epoch;
      out.best.val_acc = va.accuracy;
      out.best.params = params;
      out.best.opt = state;
      if (!cfg.checkpoint_path.empty()) checkpoint::save(cfg.checkpoint_path, out.best);
    }
  }
  return out;
}

void export_history(const TrainingHistory& history, const std::filesystem::path& csv_path,
                    const std::filesystem::path& svg_path) {
  const std::vector<EpochRecord>& recs = history.records;
  if (recs.empty()) raise(ErrorKind::BadConfig, "cannot export an empty history");

  {
    io::FileSink csv(csv_path, /*gzipped=*/false);
    csv.write("epoch,train_loss,train_acc,val_loss,val_acc\n");
    char buf[256];
    for (const EpochRecord& r : recs) {
      std::snprintf(buf, sizeof(buf), "%lld,%.17g,%.17g,%.17g,%.17g\n",
                    static_cast<long long>(r.epoch), r.train_loss, r.train_acc, r.val_loss,
                    r.val_acc);
      csv.write(buf);
    }
    csv.close();
  }

  struct Series {
    const char* label;
    const char* color;
    std::vector<double> values;
  };
  auto collect = [&recs](double EpochRecord::*field) {
    std::vector<double> v;
    v.reserve(recs.size());
    for (const EpochRecord& r : recs) v.push_back(r.*field);
    return v;
  };

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"960\" height=\"400\" "
         "viewBox=\"0 0 960 400\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg += "<rect width=\"960\" height=\"400\" fill=\"white\"/>\n";

  const std::size_t n = recs.size();
  auto draw_panel = [&](double ox, double oy, double w, double h, const char* title,
                        std::vector<Series> series, bool unit_range) {
    double lo = 0.0, hi = 1.0;
    if (!unit_range) {
      lo = series[0].values[0];
      hi = lo;
      for (const Series& s : series)
        for (double v : s.values) {
          lo = std::min(lo, v);
          hi = std::max(hi, v);
        }
      if (hi == lo) {  // degenerate range: pad so the line sits mid-panel
        hi = lo + (lo == 0.0 ? 1.0 : std::fabs(lo) * 0.5);
        lo = lo - (lo == 0.0 ? 1.0 : std::fabs(lo) * 0.5);
      }
    }
    auto px = [&](std::size_t i) {
      return n == 1 ? ox + w / 2
                    : ox + static_cast<double>(i) * w / static_cast<double>(n - 1);
    };
    auto py = [&](double v) { return oy + h - (v - lo) / (hi - lo) * h; };

    svg += "<rect x=\"" + fmt(ox) + "\" y=\"" + fmt(oy) + "\" width=\"" + fmt(w) +
           "\" height=\"" + fmt(h) + "\" fill=\"none\" stroke=\"#999\"/>\n";
    svg += "<text x=\"" + fmt(ox + w / 2) + "\" y=\"" + fmt(oy - 16) +
           "\" text-anchor=\"middle\" font-size=\"14\">" + title + "</text>\n";
    svg += "<text x=\"" + fmt(ox - 6) + "\" y=\"" + fmt(oy + h) +
           "\" text-anchor=\"end\">" + fmt(lo) + "</text>\n";
    svg += "<text x=\"" + fmt(ox - 6) + "\" y=\"" + fmt(oy + 10) +
           "\" text-anchor=\"end\">" + fmt(hi) + "</text>\n";
    svg += "<text x=\"" + fmt(ox) + "\" y=\"" + fmt(oy + h + 16) +
           "\" text-anchor=\"middle\">1</text>\n";
    svg += "<text x=\"" + fmt(ox + w) + "\" y=\"" + fmt(oy + h + 16) +
           "\" text-anchor=\"middle\">" + std::to_string(n) + "</text>\n";

    double legend_x = ox + 8;
    for (const Series& s : series) {
      std::string points;
      for (std::size_t i = 0; i < n; ++i) {
        if (i != 0) points += ' ';
        points += fmt(px(i)) + "," + fmt(py(s.values[i]));
      }
      svg += "<polyline fill=\"none\" stroke=\"";
      svg += s.color;
      svg += "\" stroke-width=\"1.5\" points=\"" + points + "\"/>\n";
      if (n == 1)
        svg += "<circle cx=\"" + fmt(px(0)) + "\" cy=\"" + fmt(py(s.values[0])) +
               "\" r=\"3\" fill=\"" + std::string(s.color) + "\"/>\n";
      svg += "<text x=\"" + fmt(legend_x) + "\" y=\"" + fmt(oy + h + 34) + "\" fill=\"" +
             std::string(s.color) + "\">" + s.label + "</text>\n";
      legend_x += 70;
    }
  };

  draw_panel(60, 40, 380, 300, "loss",
             {{"train", "#1f77b4", collect(&EpochRecord::train_loss)},
              {"validation", "#d62728", collect(&EpochRecord::val_loss)}},
             false);
  draw_panel(540, 40, 380, 300, "accuracy",
             {{"train", "#1f77b4", collect(&EpochRecord::train_acc)},
              {"validation", "#d62728", collect(&EpochRecord::val_acc)}},
             true);
  svg += "</svg>\n";

  io::FileSink sink(svg_path, /*gzipped=*/false);
  sink.write(svg);
  sink.close();
}

std::vector<EpochRecord> read_history_csv(const std::filesystem::path& path) {
  io::FileSource file(path);
  io::LineReader lines(file);
  std::string line;
  if (!lines.next(line) || line != "epoch,train_loss,train_acc,val_loss,val_acc")
    raise(ErrorKind::BadTableFormat, path.string() + ": missing metrics header");

  std::vector<EpochRecord> out;
  std::size_t lineno = 1;
  while (lines.next(line)) {
    ++lineno;
    if (line.empty()) continue;
    auto bad = [&] {
      raise(ErrorKind::BadTableFormat,
            path.string() + ":" + std::to_string(lineno) + ": expected 5 numeric fields");
    };
    EpochRecord r;
    const char* p = line.c_str();
    char* end = nullptr;
    r.epoch = std::strtoll(p, &end, 10);
    if (end == p || *end != ',') bad();
    double* fields[4] = {&r.train_loss, &r.train_acc, &r.val_loss, &r.val_acc};
    for (int i = 0; i < 4; ++i) {
      p = end + 1;
      *fields[i] = std::strtod(p, &end);
      if (end == p) bad();
      if (i < 3 && *end != ',') bad();
    }
    if (*end != '\0') bad();
    out.push_back(r);
  }
  return out;
}

Prediction predict(const checkpoint::Checkpoint& ckpt, const ProteinSequence& seq,
                   double threshold) {
  const std::vector<std::int32_t> indices =
      encode(seq, ckpt.vocab, static_cast<std::size_t>(ckpt.config.input_len));
  nn::ForwardCache cache;
  const double p = nn::forward(ckpt.config, ckpt.params, indices, cache);
  return Prediction{p, p >= threshold ? 1 : 0};
}

}  // namespace psc::train
