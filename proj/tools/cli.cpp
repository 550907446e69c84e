#include "cli.hpp"

#include <malloc.h>
#include <signal.h>

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "plot.hpp"
#include "wip/checkpoint.hpp"
#include "wip/dataset.hpp"
#include "wip/evaluator.hpp"
#include "wip/hash.hpp"
#include "wip/io.hpp"
#include "wip/service.hpp"
#include "wip/synthgen.hpp"
#include "wip/trainer.hpp"

namespace wip::cli {
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string env_name(const std::string& option) {
  std::string s = "WIP_";
  for (char c : option) s += c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

std::optional<nlohmann::json> config_value(const nlohmann::json& cfg, const std::string& command,
                                           const std::string& option) {
  std::string alt = option;
  std::replace(alt.begin(), alt.end(), '-', '_');
  auto find = [&](const nlohmann::json& j) -> std::optional<nlohmann::json> {
    if (!j.is_object()) return std::nullopt;
    if (j.contains(option)) return j.at(option);
    if (j.contains(alt)) return j.at(alt);
    return std::nullopt;
  };
  if (cfg.contains(command)) {
    if (auto v = find(cfg.at(command))) return v;
  }
  return find(cfg);
}

std::string scalar_string(const nlohmann::json& j, const std::string& option) {
  if (j.is_string()) return j.get<std::string>();
  if (j.is_boolean()) return j.get<bool>() ? "true" : "false";
  if (j.is_number()) return j.dump();
  if (j.is_array()) {
    std::string s;
    for (const auto& e : j) {
      if (!s.empty()) s += ',';
      s += scalar_string(e, option);
    }
    return s;
  }
  throw UsageError("config value for '" + option + "' must be a scalar or a list");
}

std::string long_name(const CLI::Option* o) {
  return o->get_lnames().empty() ? std::string() : o->get_lnames().front();
}

// Fills options that were not given on the command line from the
// environment, then from the config file.
void apply_fallbacks(CLI::App* sub, const nlohmann::json& cfg) {
  for (CLI::Option* o : sub->get_options()) {
    const std::string name = long_name(o);
    if (name.empty() || name == "help" || o->count() > 0) continue;
    std::optional<std::string> v;
    if (const char* e = std::getenv(env_name(name).c_str())) {
      v = e;
    } else if (auto j = config_value(cfg, sub->get_name(), name)) {
      v = scalar_string(*j, name);
    }
    if (!v) continue;
    o->add_result(*v);
    try {
      o->run_callback();
    } catch (const CLI::Error& e) {
      throw UsageError("--" + name + ": " + e.what());
    }
  }
}

nlohmann::json typed(const std::string& s) {
  if (s == "true") return true;
  if (s == "false") return false;
  try {
    std::size_t used = 0;
    const double d = std::stod(s, &used);
    if (used == s.size()) {
      auto j = nlohmann::json::parse(s, nullptr, false);
      if (!j.is_discarded()) return j;
      return d;
    }
  } catch (const std::exception&) {
  }
  return s;
}

nlohmann::json snapshot(const CLI::App* sub) {
  nlohmann::json opts = nlohmann::json::object();
  for (const CLI::Option* o : sub->get_options()) {
    const std::string name = long_name(o);
    if (name.empty() || name == "help" || name == "manifest") continue;
    if (o->count() > 0) {
      opts[name] = typed(o->as<std::string>());
    } else if (!o->get_default_str().empty()) {
      opts[name] = typed(o->get_default_str());
    }
  }
  return {{sub->get_name(), opts}};
}

void require(const CLI::App* sub, std::initializer_list<const char*> names) {
  for (const char* n : names) {
    const CLI::Option* o = sub->get_option(std::string("--") + n);
    if (o->count() == 0) {
      throw UsageError(sub->get_name() + ": --" + n + " is required (or set " + env_name(n) + ")");
    }
  }
}

bool given(const CLI::App* sub, const char* name) {
  return sub->get_option(std::string("--") + name)->count() > 0;
}

ArtifactHash hash_of(const fs::path& p) { return {p.string(), sha256_file(p)}; }

std::vector<ArtifactHash> hash_dir(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().filename() != "manifest.json") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end(),
            [](const fs::path& a, const fs::path& b) { return natural_less(a.string(), b.string()); });
  std::vector<ArtifactHash> out;
  for (const auto& f : files) out.push_back(hash_of(f));
  return out;
}

std::vector<ArtifactHash> hash_input(const fs::path& p) {
  if (fs::is_directory(p)) return hash_dir(p);
  return {hash_of(p)};
}

fs::path with_suffix(const fs::path& p, const std::string& suffix) {
  fs::path out = p;
  out.replace_extension();
  out += suffix;
  return out;
}

void write_manifest(const fs::path& path, RunManifest m, Clock::time_point t0) {
  m.wall_clock_seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  write_file_atomic(path, m.to_json().dump(2) + "\n");
  const auto back = nlohmann::json::parse(read_file(path));
  for (const auto& o : back.at("outputs")) {
    if (sha256_file(o.at("path").get<std::string>()) != o.at("sha256").get<std::string>()) {
      throw std::runtime_error("manifest hash mismatch for " + o.at("path").get<std::string>());
    }
  }
}

void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

std::vector<std::size_t> parse_sizes(const std::string& s) {
  std::vector<std::size_t> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t used = 0;
    long v = -1;
    try {
      v = std::stol(item, &used);
    } catch (const std::exception&) {
    }
    if (used != item.size() || v < 1) throw UsageError("bad window size '" + item + "'");
    out.push_back(static_cast<std::size_t>(v));
  }
  if (out.empty()) throw UsageError("--sizes is empty");
  return out;
}

// ---- shared option groups ----

struct WindowOpts {
  std::size_t window = 6;
  std::size_t step = 3;

  void add(CLI::App* c) {
    c->add_option("--window", window, "frames per window");
    c->add_option("--step", step, "frames between window starts");
  }
  WindowConfig config() const {
    WindowConfig w;
    w.window_frames = window;
    w.step_frames = step;
    w.validate();
    return w;
  }
};

struct TrainOpts {
  std::string mode = "mcd";
  int epochs = 250;
  double lr = 1e-3;
  double weight_decay = 1e-4;
  std::size_t batch_size = 64;
  int gen_steps = 1;
  std::string schedule = "cosine";
  std::string granularity = "per-batch";
  bool augment = true;
  std::uint64_t seed = 1;
  std::uint64_t split_seed = 1;
  std::string model_size = "full";
  double dropout = 0.5;

  void add(CLI::App* c) {
    c->add_option("--mode", mode, "mcd or source-only");
    c->add_option("--epochs", epochs);
    c->add_option("--lr", lr, "Adam learning rate");
    c->add_option("--weight-decay", weight_decay);
    c->add_option("--batch-size", batch_size);
    c->add_option("--gen-steps", gen_steps, "generator updates per batch in step C");
    c->add_option("--schedule", schedule, "cosine or none");
    c->add_option("--granularity", granularity, "per-batch or per-epoch");
    c->add_option("--augment", augment, "augment source windows (true/false)");
    c->add_option("--seed", seed, "initialisation, shuffling and augmentation seed");
    c->add_option("--split-seed", split_seed, "seed of the source/target split");
    c->add_option("--model-size", model_size, "full or compact");
    c->add_option("--dropout", dropout);
  }
  TrainConfig train_config() const {
    TrainConfig t;
    t.mode = parse_train_mode(mode);
    t.epochs = epochs;
    t.learning_rate = lr;
    t.weight_decay = weight_decay;
    t.batch_size = batch_size;
    t.generator_steps_per_batch = gen_steps;
    t.lr_schedule = parse_lr_schedule(schedule);
    t.granularity = parse_granularity(granularity);
    t.augment = augment;
    t.seed = seed;
    t.validate();
    return t;
  }
  ModelConfig model_config() const {
    ModelConfig m;
    if (model_size == "compact") {
      m = ModelConfig::compact();
    } else if (model_size != "full") {
      throw UsageError("--model-size must be full or compact, got '" + model_size + "'");
    }
    m.dropout_rate = dropout;
    m.init_seed = seed;
    return m;
  }
};

struct LoadedData {
  std::vector<SubjectWindows> subjects;
  std::vector<SubjectRecording> recordings;  // empty for an archive
  WindowConfig window;
};

LoadedData load_data(const fs::path& path, const WindowConfig& requested, bool window_given) {
  if (!fs::is_directory(path)) throw std::runtime_error("data directory not found: " + path.string());
  LoadedData d;
  if (is_dataset_archive(path)) {
    DatasetArchive a = read_dataset_archive(path);
    if (window_given && !(a.window == requested)) {
      throw UsageError("archive " + path.string() + " was built with window " +
                       std::to_string(a.window.window_frames) + "/" +
                       std::to_string(a.window.step_frames) + "; rebuild it or drop --window/--step");
    }
    d.window = a.window;
    d.subjects = std::move(a.subjects);
  } else {
    d.recordings = load_recordings(path);
    if (d.recordings.empty()) throw std::runtime_error("no recordings in " + path.string());
    d.window = requested;
    d.subjects = segment_subjects(d.recordings, d.window);
  }
  return d;
}

void check_subject(const LoadedData& d, const std::string& id) {
  std::string known;
  for (const auto& s : d.subjects) {
    if (s.subject_id == id) return;
    known += (known.empty() ? "" : ", ") + s.subject_id;
  }
  throw UsageError("unknown subject '" + id + "' (available: " + known + ")");
}

MetricsReport evaluate(const Model<float>& model, const NormalizationStats& stats,
                       std::span<const PointCloudSample> windows, ConfusionMatrix* confusion) {
  std::vector<PointCloudSample> xs;
  std::vector<Gesture> labels;
  for (const auto& s : windows) {
    xs.push_back(normalize(s, stats));
    labels.push_back(s.label);
  }
  *confusion = confusion_matrix(predict_labels(model, xs), labels);
  return metrics(*confusion);
}

// ---- commands ----

struct Context {
  CLI::App* sub;
  nlohmann::json config;
  std::ostream& out;
  std::ostream& err;
  bool quiet;
  Clock::time_point t0 = Clock::now();
  std::string started = utc_now();

  RunManifest manifest() const {
    RunManifest m;
    m.command = sub->get_name();
    m.config = snapshot(sub);
    m.started_at = started;
    return m;
  }
};

struct SynthCmd {
  int subjects = 14;
  std::uint64_t seed = 1;
  std::string out, script, manifest;

  void add(CLI::App* c) {
    c->add_option("--subjects", subjects, "number of synthetic subjects (>= 2)");
    c->add_option("--seed", seed);
    c->add_option("--out", out, "output directory");
    c->add_option("--script", script, "gesture script file ('label seconds' per line)");
    c->add_option("--manifest", manifest, "default: OUT/manifest.json");
  }

  int run(Context& ctx) {
    require(ctx.sub, {"out"});
    if (subjects < 2) {
      throw UsageError("--subjects must be at least 2: leave-one-subject-out evaluation needs a "
                       "held-out subject plus at least one source subject");
    }
    RunManifest m = ctx.manifest();
    m.seed = seed;
    GestureScript gs = GestureScript::default_script();
    if (!script.empty()) {
      gs = GestureScript::parse(read_file(script));
      m.inputs.push_back(hash_of(script));
    }
    const fs::path dir = out;
    fs::create_directories(dir);
    const auto recs = generate_dataset(subjects, gs, seed);
    for (const auto& r : recs) {
      const fs::path p = dir / (r.profile.subject_id + ".csv");
      write_recording(p, r);
      if (read_recording(p).frames.size() != r.frames.size()) {
        throw std::runtime_error("read-back of " + p.string() + " differs");
      }
      m.outputs.push_back(hash_of(p));
    }
    const fs::path sp = dir / "script.txt";
    write_file_atomic(sp, gs.to_text());
    m.outputs.push_back(hash_of(sp));
    m.results = {{"recordings", recs.size()}, {"frames_per_recording", recs.front().frames.size()}};
    write_manifest(manifest.empty() ? dir / "manifest.json" : fs::path(manifest), m, ctx.t0);
    ctx.out << "wrote " << recs.size() << " recordings to " << dir.string() << "\n";
    return 0;
  }
};

struct BuildDatasetCmd {
  std::string data, out, manifest;
  WindowOpts window;

  void add(CLI::App* c) {
    c->add_option("--data", data, "directory of recordings");
    c->add_option("--out", out, "archive directory");
    window.add(c);
    c->add_option("--manifest", manifest, "default: OUT/manifest.json");
  }

  int run(Context& ctx) {
    require(ctx.sub, {"data", "out"});
    RunManifest m = ctx.manifest();
    const auto recs = load_recordings(data);
    if (recs.empty()) throw std::runtime_error("no recordings in " + data);
    m.inputs = hash_dir(data);
    DatasetArchive a;
    a.window = window.config();
    a.subjects = segment_subjects(recs, a.window);
    std::vector<PointCloudSample> all;
    for (const auto& s : a.subjects) all.insert(all.end(), s.windows.begin(), s.windows.end());
    a.stats = compute_norm_stats(all);
    write_dataset_archive(out, a);
    const DatasetArchive back = read_dataset_archive(out);
    std::size_t n = 0;
    for (const auto& s : back.subjects) n += s.windows.size();
    if (n != all.size() || !(back.window == a.window)) {
      throw std::runtime_error("read-back of archive " + out + " differs");
    }
    m.outputs = hash_dir(out);
    m.results = {{"subjects", a.subjects.size()}, {"windows", n}};
    write_manifest(manifest.empty() ? fs::path(out) / "manifest.json" : fs::path(manifest), m,
                   ctx.t0);
    ctx.out << "wrote " << n << " windows from " << a.subjects.size() << " subjects to " << out
            << "\n";
    return 0;
  }
};

struct TrainCmd {
  std::string data, target, out, loss_csv, manifest;
  WindowOpts window;
  TrainOpts train;

  void add(CLI::App* c) {
    c->add_option("--data", data, "recordings directory or dataset archive");
    c->add_option("--target", target, "held-out subject id");
    c->add_option("--out", out, "checkpoint path");
    c->add_option("--loss-csv", loss_csv, "default: OUT with .loss.csv");
    window.add(c);
    train.add(c);
    c->add_option("--manifest", manifest, "default: OUT with .manifest.json");
  }

  int run(Context& ctx) {
    require(ctx.sub, {"data", "target", "out"});
    RunManifest m = ctx.manifest();
    m.seed = train.seed;
    const TrainConfig tcfg = train.train_config();
    const ModelConfig mcfg = train.model_config();
    const bool wgiven = given(ctx.sub, "window") || given(ctx.sub, "step");
    const LoadedData d = load_data(data, window.config(), wgiven);
    check_subject(d, target);
    m.inputs = hash_input(data);

    const DomainSplit split = make_loso_split(d.subjects, target, d.window, train.split_seed);
    if (!ctx.quiet) {
      ctx.err << "source " << split.source.size() << ", target train " << split.target_train.size()
              << ", target test " << split.target_test.size() << " windows\n";
    }
    TrainResult res = fit(split, mcfg, tcfg, [&](const EpochReport& e) {
      if (ctx.quiet) return;
      ctx.err << "epoch " << e.epoch + 1 << "/" << tcfg.epochs << " lr " << e.learning_rate
              << " class " << e.class_loss;
      if (e.disc_loss) ctx.err << " disc " << *e.disc_loss;
      ctx.err << "\n";
    });

    nlohmann::json meta = {{"target", target},
                           {"split_seed", train.split_seed},
                           {"train_config", to_json(tcfg)},
                           {"source_windows", split.source.size()},
                           {"target_train_windows", split.target_train.size()},
                           {"target_test_windows", split.target_test.size()}};
    if (!split.target_test.empty()) {
      ConfusionMatrix cm;
      const MetricsReport mr = evaluate(res.model, res.stats, split.target_test, &cm);
      meta["target_test"] = {{"overall_accuracy", mr.overall_accuracy},
                             {"mean_class_accuracy", mr.mean_class_accuracy}};
      ctx.out << "target " << target << " test overall " << mr.overall_accuracy << " mean class "
              << mr.mean_class_accuracy << "\n";
    }

    const fs::path ck = out;
    ensure_parent(ck);
    const std::string id = save_checkpoint(ck, res.model, res.stats, d.window, meta);
    if (load_checkpoint(ck).model_id != id) throw std::runtime_error("checkpoint read-back differs");
    const fs::path lc = loss_csv.empty() ? with_suffix(ck, ".loss.csv") : fs::path(loss_csv);
    ensure_parent(lc);
    const std::string csv = res.history.to_csv();
    write_file_atomic(lc, csv);
    if (read_file(lc) != csv) throw std::runtime_error("loss CSV read-back differs");

    m.outputs = {hash_of(ck), hash_of(lc)};
    m.results = meta;
    m.results["model_id"] = id;
    write_manifest(manifest.empty() ? with_suffix(ck, ".manifest.json") : fs::path(manifest), m,
                   ctx.t0);
    ctx.out << "wrote checkpoint " << ck.string() << " (model " << id << ")\n";
    return 0;
  }
};

struct EvalCmd {
  std::string ckpt, data, subject, out, csv, manifest, sizes = "3,6,10,16";
  bool loso = false, window_study = false, all_windows = false, nearest_neighbor = true;
  std::size_t latency = 0;
  int workers = 1;
  std::optional<std::uint64_t> split_seed;
  WindowOpts window;
  TrainOpts train;

  void add(CLI::App* c) {
    c->add_option("--ckpt", ckpt, "checkpoint (single-model evaluation)");
    c->add_option("--data", data, "recordings directory or dataset archive");
    c->add_option("--subject", subject, "default: the checkpoint's held-out subject");
    c->add_flag("--all-windows", all_windows, "every window of the subject, not just its test block");
    c->add_option("--latency", latency, "latency trials (0 = skip)");
    c->add_flag("--loso", loso, "train and evaluate one model per held-out subject");
    c->add_flag("--window-study", window_study, "LOSO at each of --sizes");
    c->add_option("--sizes", sizes, "window sizes for --window-study");
    c->add_option("--holdout", subjects_, "held-out subjects for --loso (default: all)");
    c->add_option("--workers", workers, "parallel LOSO folds");
    c->add_option("--nearest-neighbor", nearest_neighbor, "add the 1-NN baseline to LOSO folds");
    c->add_option("--out", out, "report JSON");
    c->add_option("--csv", csv, "default: OUT with .csv");
    window.add(c);
    train.add(c);
    c->add_option("--manifest", manifest, "default: OUT with .manifest.json");
  }
  std::vector<std::string> subjects_;

  LosoConfig loso_config(const WindowConfig& w) const {
    LosoConfig c;
    c.window = w;
    c.model = train.model_config();
    c.train = train.train_config();
    c.split_seed = train.split_seed;
    c.subjects = subjects_;
    c.nearest_neighbor = nearest_neighbor;
    c.workers = workers;
    return c;
  }

  int run(Context& ctx) {
    require(ctx.sub, {"data", "out"});
    if (loso && window_study) throw UsageError("--loso and --window-study are exclusive");
    RunManifest m = ctx.manifest();
    m.seed = train.seed;
    const bool wgiven = given(ctx.sub, "window") || given(ctx.sub, "step");
    nlohmann::json report;
    std::string csv_text;

    if (window_study) {
      if (is_dataset_archive(data)) {
        throw UsageError("--window-study re-segments recordings; pass a recordings directory");
      }
      const auto recs = load_recordings(data);
      m.inputs = hash_dir(data);
      const auto ws = parse_sizes(sizes);
      const auto rows = window_size_study(recs, ws, loso_config(window.config()),
                                          [&](const WindowStudyRow& r) {
                                            if (!ctx.quiet) {
                                              ctx.err << "window " << r.window_frames << ": overall "
                                                      << r.overall_accuracy << "\n";
                                            }
                                          });
      report = window_study_json(rows);
      csv_text = window_study_csv(rows);
    } else if (loso) {
      const LoadedData d = load_data(data, window.config(), wgiven);
      for (const auto& s : subjects_) check_subject(d, s);
      m.inputs = hash_input(data);
      const LosoReport rep =
          loso_suite(std::span<const SubjectWindows>(d.subjects), loso_config(d.window),
                     [&](const FoldResult& f) {
                       if (!ctx.quiet) {
                         ctx.err << f.subject << ": overall " << f.metrics.overall_accuracy
                                 << " mean class " << f.metrics.mean_class_accuracy << "\n";
                       }
                     });
      report = rep.to_json();
      csv_text = rep.to_csv();
    } else {
      require(ctx.sub, {"ckpt"});
      const Checkpoint ck = load_checkpoint(ckpt);
      m.inputs = hash_input(ckpt);
      const LoadedData d = load_data(data, ck.window, false);
      if (!(d.window == ck.window)) throw UsageError("data window differs from the checkpoint's");
      const auto ins = hash_input(data);
      m.inputs.insert(m.inputs.end(), ins.begin(), ins.end());
      std::string who = subject.empty() ? ck.metadata.value("target", "") : subject;
      if (who.empty()) throw UsageError("--subject is required: checkpoint names no target");
      check_subject(d, who);
      std::vector<PointCloudSample> windows;
      if (all_windows) {
        for (const auto& s : d.subjects) {
          if (s.subject_id == who) windows = s.windows;
        }
      } else {
        const std::uint64_t seed = given(ctx.sub, "split-seed")
                                       ? train.split_seed
                                       : ck.metadata.value("split_seed", train.split_seed);
        windows = make_loso_split(d.subjects, who, d.window, seed).target_test;
      }
      if (windows.empty()) throw std::runtime_error("no windows to evaluate for " + who);
      ConfusionMatrix cm;
      MetricsReport mr = evaluate(ck.model, ck.stats, windows, &cm);
      if (latency > 0) mr.latency = latency_benchmark(ck.model, ck.window, latency, train.seed);
      report = to_json(mr);
      report["kind"] = "metrics";
      report["subject"] = who;
      report["model_id"] = ck.model_id;
      report["windows"] = all_windows ? "all" : "target_test";
      report["confusion"] = to_json(cm);
      std::ostringstream c;
      c << "class,accuracy\n";
      for (std::size_t i = 0; i < kNumGestures; ++i) {
        c << kGestureNames[i] << ',';
        if (mr.per_class_accuracy[i]) c << *mr.per_class_accuracy[i];
        c << "\n";
      }
      c << "mean_class_accuracy," << mr.mean_class_accuracy << "\n";
      c << "overall_accuracy," << mr.overall_accuracy << "\n";
      csv_text = c.str();
    }

    const fs::path jp = out;
    ensure_parent(jp);
    const std::string body = report.dump(2) + "\n";
    write_file_atomic(jp, body);
    if (nlohmann::json::parse(read_file(jp)) != report) {
      throw std::runtime_error("report read-back differs");
    }
    const fs::path cp = csv.empty() ? with_suffix(jp, ".csv") : fs::path(csv);
    ensure_parent(cp);
    write_file_atomic(cp, csv_text);
    m.outputs = {hash_of(jp), hash_of(cp)};
    if (report.contains("average")) {
      m.results = report["average"];
    } else if (report.contains("overall_accuracy")) {
      m.results = {{"overall_accuracy", report["overall_accuracy"]},
                   {"mean_class_accuracy", report["mean_class_accuracy"]}};
    } else {
      m.results = report;
    }
    write_manifest(manifest.empty() ? with_suffix(jp, ".manifest.json") : fs::path(manifest), m,
                   ctx.t0);
    ctx.out << csv_text;
    return 0;
  }
};

struct ServeCmd {
  std::string ckpt, bind = "127.0.0.1:8080", port_file, manifest;

  void add(CLI::App* c) {
    c->add_option("--ckpt", ckpt, "checkpoint to serve");
    c->add_option("--bind-addr", bind, "host:port, port 0 picks a free one");
    c->add_option("--port-file", port_file, "write the bound port here");
    c->add_option("--manifest", manifest, "default: CKPT with .serve.manifest.json");
  }

  int run(Context& ctx) {
    require(ctx.sub, {"ckpt"});
    RunManifest m = ctx.manifest();
    auto svc = std::make_shared<const InferenceService>(load_checkpoint(ckpt));
    m.inputs = {hash_of(ckpt)};

    // handle SIGINT/SIGTERM synchronously; worker threads inherit the mask
    sigset_t set;
    sigemptyset(&set);
    sigaddset(&set, SIGINT);
    sigaddset(&set, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &set, nullptr);

    HttpServer server(svc);
    const BindAddress addr = parse_bind_address(bind);
    const int port = server.start(addr);
    if (!port_file.empty()) {
      write_file_atomic(port_file, std::to_string(port) + "\n");
      m.outputs.push_back(hash_of(port_file));
    }
    m.results = {{"host", addr.host}, {"port", port}, {"model_id", svc->model_id()}};
    write_manifest(manifest.empty() ? with_suffix(ckpt, ".serve.manifest.json") : fs::path(manifest),
                   m, ctx.t0);
    ctx.out << "serving " << svc->model_id() << " on " << addr.host << ":" << port << std::endl;
    int sig = 0;
    sigwait(&set, &sig);
    server.stop();
    pthread_sigmask(SIG_UNBLOCK, &set, nullptr);
    return 0;
  }
};

struct ReplayCmd {
  std::string recording, out, manifest, speed_mapping = "as-written";
  ReplayConfig cfg;

  void add(CLI::App* c) {
    c->add_option("--recording", recording, "recording CSV to stream");
    c->add_option("--bind-addr", cfg.address, "service address host:port");
    c->add_option("--cadence", cfg.cadence_frames, "frames between submitted windows");
    c->add_flag("--realtime", cfg.realtime, "pace frames at the recording's timestamps");
    c->add_option("--speed", cfg.speed, "pacing multiplier with --realtime");
    c->add_option("--retries", cfg.max_retries);
    c->add_option("--backoff-ms", cfg.backoff_ms, "first retry delay, doubled per attempt");
    c->add_option("--speed-mapping", speed_mapping, "as-written or inverted");
    c->add_option("--out", out, "session log (JSON lines)");
    c->add_option("--manifest", manifest, "default: OUT with .manifest.json");
  }

  int run(Context& ctx) {
    require(ctx.sub, {"recording", "out"});
    RunManifest m = ctx.manifest();
    cfg.locomotion.speed_mapping = parse_speed_mapping(speed_mapping);
    const SubjectRecording rec = read_recording(recording);
    m.inputs = {hash_of(recording)};
    const SessionReport rep = replay(rec, cfg);
    const fs::path op = out;
    ensure_parent(op);
    const std::string body = rep.to_jsonl();
    write_file_atomic(op, body);
    if (read_file(op) != body) throw std::runtime_error("session log read-back differs");
    m.outputs = {hash_of(op)};
    m.results = {{"windows", rep.windows.size()}, {"model_id", rep.model_id}};
    if (rep.windowed_accuracy) m.results["windowed_accuracy"] = *rep.windowed_accuracy;
    write_manifest(manifest.empty() ? with_suffix(op, ".manifest.json") : fs::path(manifest), m,
                   ctx.t0);
    ctx.out << "replayed " << rep.windows.size() << " windows";
    if (rep.windowed_accuracy) ctx.out << ", windowed accuracy " << *rep.windowed_accuracy;
    ctx.out << "\n";
    return 0;
  }
};

struct PlotCmd {
  std::string report, out, manifest;

  void add(CLI::App* c) {
    c->add_option("--report", report, "report JSON from eval");
    c->add_option("--out", out, "SVG path");
    c->add_option("--manifest", manifest, "default: OUT with .manifest.json");
  }

  int run(Context& ctx) {
    require(ctx.sub, {"report", "out"});
    RunManifest m = ctx.manifest();
    if (!fs::exists(report)) throw std::runtime_error("report not found: " + report);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(read_file(report));
    } catch (const nlohmann::json::parse_error& e) {
      throw std::runtime_error("malformed report " + report + ": " + e.what());
    }
    m.inputs = {hash_of(report)};
    const std::string svg = render_report_svg(j);
    const fs::path op = out;
    ensure_parent(op);
    write_file_atomic(op, svg);
    m.outputs = {hash_of(op)};
    write_manifest(manifest.empty() ? with_suffix(op, ".manifest.json") : fs::path(manifest), m,
                   ctx.t0);
    ctx.out << "wrote " << op.string() << "\n";
    return 0;
  }
};

}  // namespace

nlohmann::json RunManifest::to_json() const {
  auto list = [](const std::vector<ArtifactHash>& v) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& h : v) a.push_back({{"path", h.path}, {"sha256", h.sha256}});
    return a;
  };
  return {{"command", command},
          {"config", config},
          {"seed", seed},
          {"inputs", list(inputs)},
          {"outputs", list(outputs)},
          {"started_at", started_at},
          {"wall_clock_seconds", wall_clock_seconds},
          {"results", results}};
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"walking-in-place gesture recognition pipeline", "wip"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_path;
  bool quiet = false;
  app.add_option("--config", config_path, "JSON config file (or WIP_CONFIG)");
  app.add_flag("-q,--quiet", quiet, "no progress output");

  SynthCmd synth;
  BuildDatasetCmd build;
  TrainCmd train;
  EvalCmd eval;
  ServeCmd serve;
  ReplayCmd replay_cmd;
  PlotCmd plot;
  synth.add(app.add_subcommand("synth", "generate synthetic subject recordings"));
  build.add(app.add_subcommand("build-dataset", "segment recordings into a window archive"));
  train.add(app.add_subcommand("train", "train one model with a held-out target subject"));
  eval.add(app.add_subcommand("eval", "evaluate a checkpoint, or run LOSO / the window study"));
  serve.add(app.add_subcommand("serve", "serve a checkpoint over HTTP"));
  replay_cmd.add(app.add_subcommand("replay", "stream a recording against a running service"));
  plot.add(app.add_subcommand("plot", "render a report as SVG"));

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    // --help exits 0; every other parse failure is a usage error
    return app.exit(e, out, err) == 0 ? 0 : 2;
  }

  try {
    if (config_path.empty()) {
      if (const char* e = std::getenv("WIP_CONFIG")) config_path = e;
    }
    nlohmann::json config = nlohmann::json::object();
    if (!config_path.empty()) {
      try {
        config = nlohmann::json::parse(read_file(config_path));
      } catch (const nlohmann::json::parse_error& e) {
        throw UsageError("config file " + config_path + " is not valid JSON: " + e.what());
      }
      if (!config.is_object()) throw UsageError("config file must hold a JSON object");
    }
    CLI::App* sub = app.get_subcommands().front();
    apply_fallbacks(sub, config);
    Context ctx{sub, config, out, err, quiet};
    const std::string name = sub->get_name();
    if (name == "synth") return synth.run(ctx);
    if (name == "build-dataset") return build.run(ctx);
    if (name == "train") return train.run(ctx);
    if (name == "eval") return eval.run(ctx);
    if (name == "serve") return serve.run(ctx);
    if (name == "replay") return replay_cmd.run(ctx);
    if (name == "plot") return plot.run(ctx);
    throw UsageError("unknown command " + name);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

void tune_allocator() {
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
  mallopt(M_TOP_PAD, 256 << 20);
}

}  // namespace wip::cli
