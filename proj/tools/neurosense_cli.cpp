#include <pthread.h>
#include <signal.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <httplib.h>
#include <json.hpp>

#include "neurosense/http.hpp"
#include "neurosense/neurosense.hpp"
#include "neurosense/provenance.hpp"
#include "neurosense/service.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace neurosense;

namespace {

enum Exit : int { kOk = 0, kInput = 2, kValidation = 3, kRuntime = 4 };

// Everything a command may be configured with. Each command records the
// fields it uses into its artifacts.
struct RunConfig {
  std::string input;
  std::string label_col = "what";
  std::uint64_t seed = 42;
  double holdout = 0.2;
  double calib_fraction = 0.5;
  std::size_t k = 5;
  std::vector<std::string> drop;
  std::size_t min_class_count = 2;
  std::size_t trees = 100;
  std::size_t max_depth = 20;
  double l2 = 1e-3;
  std::size_t max_iters = 1000;
  std::string grid = "0.1:0.9:0.05";
  double percentile = 80.0;
  double tau = 0.4;
  std::string out;
  std::string bundle;
  std::vector<std::string> external;
  std::string normal_class = "Normal";
  std::size_t bins = 20;
  // simulate
  std::size_t classes = 3;
  std::size_t per_class = 1000;
  std::size_t dim = 8;
  double separation = 2.0;
  double sigma = 0.5;
  // serve
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string audit = "audit.log";
};

class Failure : public std::runtime_error {
 public:
  Failure(int code, const std::string& msg) : std::runtime_error(msg), code_(code) {}
  int code() const { return code_; }

 private:
  int code_;
};

int exit_code_for(Errc e) {
  switch (e) {
    case Errc::io_error:
    case Errc::parse_error:
    case Errc::unsupported_version:
    case Errc::not_found:
    case Errc::empty_input:
      return kInput;
    case Errc::not_converged:
    case Errc::insufficient_data:
    case Errc::bundle_not_loaded:
    case Errc::already_resolved:
      return kRuntime;
    default:
      return kValidation;
  }
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Failure(kInput, "cannot create directory " + dir + ": " + ec.message());
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Failure(kInput, "cannot write " + path);
  out << text;
}

void write_json(const std::string& path, const json& j) { write_text(path, j.dump(1) + "\n"); }

std::string require_file(const std::string& path, const std::string& what) {
  if (path.empty()) throw Failure(kInput, what + " path is required");
  if (!fs::is_regular_file(path)) throw Failure(kInput, what + " not found: " + path);
  return path;
}

// Records the run configuration and the hashes of every input and output.
class Provenance {
 public:
  Provenance(std::string command, json config) : command_(std::move(command)), config_(std::move(config)) {}

  void input(const std::string& path) { inputs_[path] = sha256_file(path); }

  json header() const { return {{"command", command_}, {"run_config", config_}, {"inputs", inputs_}}; }

  void artifact(const std::string& path) { artifacts_[fs::path(path).filename().string()] = sha256_file(path); }

  json manifest() const {
    auto j = header();
    j["artifacts"] = artifacts_;
    return j;
  }

 private:
  std::string command_;
  json config_;
  std::map<std::string, std::string> inputs_;
  std::map<std::string, std::string> artifacts_;
};

std::string class_counts_csv(const Dataset& ds) {
  const auto counts = ds.class_counts();
  std::vector<std::size_t> order(counts.size());
  for (std::size_t c = 0; c < order.size(); ++c) order[c] = c;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return counts[a] > counts[b]; });
  std::string out = "class,count\n";
  for (std::size_t c : order) out += csv::quote(ds.encoding.decode(c)) + "," + std::to_string(counts[c]) + "\n";
  return out;
}

Dataset read_labeled(const RunConfig& cfg, const std::string& path, const LabelEncoding* encoding = nullptr) {
  csv::ReadOptions opt;
  opt.label_col = cfg.label_col;
  opt.drop_cols = cfg.drop;
  auto ds = encoding ? csv::read_dataset(path, opt, *encoding) : csv::read_dataset(path, opt);
  return impute_zero(ds);
}

std::vector<ExternalProbabilities> load_externals(const std::vector<std::string>& paths, const LabelEncoding& enc,
                                                  Provenance* prov) {
  std::vector<ExternalProbabilities> all;
  for (const auto& p : paths) {
    require_file(p, "external probabilities");
    auto models = load_external_probabilities(p, enc);
    if (prov) prov->input(p);
    for (auto& m : models) all.push_back(std::move(m));
  }
  return all;
}

// ---------------------------------------------------------------------------

json prepare_config(const RunConfig& c) {
  return {{"input", c.input},         {"label_col", c.label_col}, {"seed", c.seed},
          {"holdout", c.holdout},     {"calib_fraction", c.calib_fraction},
          {"k", c.k},                 {"drop", c.drop},           {"min_class_count", c.min_class_count},
          {"out", c.out}};
}

int cmd_prepare(const RunConfig& cfg) {
  require_file(cfg.input, "input");
  if (!(cfg.holdout > 0.0 && cfg.holdout < 1.0)) throw Failure(kValidation, "--holdout must be in (0,1)");
  if (!(cfg.calib_fraction > 0.0 && cfg.calib_fraction < 1.0)) {
    throw Failure(kValidation, "--calib-fraction must be in (0,1)");
  }
  ensure_dir(cfg.out);
  Provenance prov("prepare", prepare_config(cfg));
  prov.input(cfg.input);

  auto data = filter_rare_classes(read_labeled(cfg, cfg.input), cfg.min_class_count);
  const auto split = stratified_split(data, cfg.holdout, cfg.seed);

  // Calibration/evaluation halves of the holdout. Classes with a single
  // holdout row go entirely to evaluation.
  const auto holdout_counts = split.holdout.class_counts();
  std::vector<std::size_t> splittable;
  for (std::size_t i = 0; i < split.holdout.rows(); ++i) {
    if (holdout_counts[split.holdout.labels[i]] >= 2) splittable.push_back(i);
  }
  std::set<std::string> calib_ids;
  if (!splittable.empty()) {
    const auto halves = stratified_split(split.holdout.select(splittable), cfg.calib_fraction, cfg.seed + 1);
    calib_ids.insert(halves.holdout.sample_ids.begin(), halves.holdout.sample_ids.end());
  }
  std::vector<std::size_t> calib_idx, eval_idx;
  for (std::size_t i = 0; i < split.holdout.rows(); ++i) {
    (calib_ids.count(split.holdout.sample_ids[i]) ? calib_idx : eval_idx).push_back(i);
  }

  const auto balanced = smote_balance(split.train, {cfg.k, cfg.seed});
  const auto standardizer = standardize_fit(balanced);

  const auto dir = fs::path(cfg.out);
  auto emit = [&](const std::string& name, const Dataset& ds) {
    const auto path = (dir / name).string();
    csv::write_dataset(path, ds, cfg.label_col);
    prov.artifact(path);
  };
  emit("train.csv", split.train);
  emit("holdout.csv", split.holdout);
  emit("calibration.csv", split.holdout.select(calib_idx));
  emit("evaluation.csv", split.holdout.select(eval_idx));
  emit("train_balanced.csv", balanced);

  const auto std_path = (dir / "standardizer.json").string();
  json sj = bundle_json::standardizer_to_json(standardizer);
  sj["feature_names"] = balanced.feature_names;
  sj["provenance"] = prov.header();
  write_json(std_path, sj);
  prov.artifact(std_path);

  const auto table = class_counts_csv(data);
  write_text((dir / "class_table.csv").string(), table);
  prov.artifact((dir / "class_table.csv").string());
  write_json((dir / "manifest.json").string(), prov.manifest());

  std::cout << table << "rows: " << data.rows() << " (train " << split.train.rows() << ", holdout "
            << split.holdout.rows() << ", calibration " << calib_idx.size() << ", evaluation " << eval_idx.size()
            << ", balanced train " << balanced.rows() << ")\n";
  return kOk;
}

// ---------------------------------------------------------------------------

int cmd_train(const RunConfig& cfg) {
  const auto dir = fs::path(cfg.input);
  const auto train_path = (dir / "train_balanced.csv").string();
  const auto std_path = (dir / "standardizer.json").string();
  if (!fs::is_directory(dir) || !fs::is_regular_file(train_path) || !fs::is_regular_file(std_path)) {
    throw Failure(kInput, "prepared artifacts not found in '" + cfg.input +
                              "' (expected train_balanced.csv and standardizer.json; run prepare first)");
  }
  if (cfg.out.empty()) throw Failure(kInput, "--out bundle path is required");

  json config = {{"input", cfg.input},   {"label_col", cfg.label_col}, {"seed", cfg.seed},
                 {"trees", cfg.trees},   {"max_depth", cfg.max_depth}, {"l2", cfg.l2},
                 {"max_iters", cfg.max_iters}, {"tau", cfg.tau},       {"external", cfg.external},
                 {"normal_class", cfg.normal_class}, {"out", cfg.out}};
  Provenance prov("train", config);
  prov.input(train_path);
  prov.input(std_path);

  const auto raw = read_labeled(cfg, train_path);
  const auto sj = json::parse(read_file(std_path));
  ModelBundle b;
  b.encoding = raw.encoding;
  b.feature_names = raw.feature_names;
  b.standardizer = bundle_json::standardizer_from_json(sj);
  b.normal_class = cfg.normal_class;
  const auto z = standardize_apply(b.standardizer, raw);
  b.logistic = train_logistic(z, {.l2_lambda = cfg.l2, .max_iters = cfg.max_iters});
  b.forest = train_forest(z, {.n_trees = cfg.trees, .max_depth = cfg.max_depth, .seed = cfg.seed});
  b.policy = ThresholdPolicy::global(cfg.tau);

  for (const auto& p : cfg.external) {
    require_file(p, "external probabilities");
    for (const auto& m : load_external_probabilities(p, b.encoding)) {
      b.external_models.push_back({m.model_id, p, sha256_file(p)});
    }
    prov.input(p);
  }

  const auto& d = b.logistic->diagnostics;
  b.metadata = {{"provenance", prov.header()},
                {"logistic_diagnostics",
                 {{"iterations", d.iterations}, {"converged", d.converged}, {"gradient_max_norm", d.gradient_max_norm}}}};
  if (!d.converged) {
    std::cerr << "warning: logistic regression stopped after " << d.iterations
              << " iterations without reaching the gradient tolerance (max |g| = " << d.gradient_max_norm << ")\n";
  }
  save_bundle(cfg.out, b);
  std::cout << "wrote " << cfg.out << " (" << b.class_count() << " classes, " << b.feature_count() << " features, "
            << b.forest->trees.size() << " trees, logistic iterations " << d.iterations << ")\n";
  return kOk;
}

// ---------------------------------------------------------------------------

struct Scored {
  ModelBundle bundle;
  Dataset data;
  std::vector<ScoredPrediction> preds;
  std::vector<EnsemblePrediction> ensemble;
};

Scored score_input(const RunConfig& cfg, Provenance& prov) {
  require_file(cfg.bundle, "bundle");
  require_file(cfg.input, "input");
  Scored s{load_bundle(cfg.bundle), {}, {}, {}};
  prov.input(cfg.bundle);
  prov.input(cfg.input);
  s.data = read_labeled(cfg, cfg.input, &s.bundle.encoding);
  if (s.data.rows() == 0) throw Failure(kInput, "input has no rows");
  const auto externals = load_externals(cfg.external, s.bundle.encoding, &prov);
  s.preds = score_dataset(s.bundle, s.data, externals, &s.ensemble);
  return s;
}

json report_json(const ClassReport& r, const LabelEncoding& enc, const json& provenance) {
  json rows = json::array();
  for (std::size_t c = 0; c < r.per_class.size(); ++c) {
    const auto& m = r.per_class[c];
    rows.push_back({{"class", enc.decode(c)},
                    {"precision", m.precision},
                    {"recall", m.recall},
                    {"f1", m.f1},
                    {"support", m.support}});
  }
  auto avg = [](const AverageMetrics& a) { return json{{"precision", a.precision}, {"recall", a.recall}, {"f1", a.f1}}; };
  return {{"classes", rows},
          {"macro_avg", avg(r.macro_avg)},
          {"weighted_avg", avg(r.weighted_avg)},
          {"accuracy", r.accuracy},
          {"total", r.total},
          {"provenance", provenance}};
}

std::string confusion_csv(const ConfusionMatrix& m, const LabelEncoding& enc) {
  std::string out = "true\\predicted";
  for (std::size_t c = 0; c < enc.size(); ++c) out += "," + csv::quote(enc.decode(c));
  out += "\n";
  for (std::size_t t = 0; t < m.size(); ++t) {
    out += csv::quote(enc.decode(t));
    for (std::size_t v : m[t]) out += "," + std::to_string(v);
    out += "\n";
  }
  return out;
}

int cmd_evaluate(const RunConfig& cfg) {
  if (cfg.out.empty()) throw Failure(kInput, "--out directory is required");
  if (cfg.bins == 0) throw Failure(kValidation, "--bins must be positive");
  json config = {{"bundle", cfg.bundle}, {"input", cfg.input},   {"label_col", cfg.label_col},
                 {"external", cfg.external}, {"tau", cfg.tau}, {"bins", cfg.bins}, {"out", cfg.out}};
  Provenance prov("evaluate", config);
  const auto s = score_input(cfg, prov);
  ensure_dir(cfg.out);
  const auto dir = fs::path(cfg.out);
  const auto& enc = s.bundle.encoding;
  const std::size_t C = enc.size();

  auto emit = [&](const std::string& name, const std::string& text) {
    const auto path = (dir / name).string();
    write_text(path, text);
    prov.artifact(path);
  };

  // Per-member and ensemble reports.
  std::vector<std::string> member_order;
  std::map<std::string, std::pair<std::vector<ClassIndex>, std::vector<ClassIndex>>> by_member;
  for (std::size_t i = 0; i < s.preds.size(); ++i) {
    for (const auto& [name, p] : s.ensemble[i].member_probs) {
      if (!by_member.count(name)) member_order.push_back(name);
      auto& [yt, yp] = by_member[name];
      yt.push_back(s.data.labels[i]);
      yp.push_back(p.argmax());
    }
    auto& [yt, yp] = by_member["ensemble"];
    yt.push_back(s.data.labels[i]);
    yp.push_back(s.preds[i].predicted_class);
  }
  member_order.push_back("ensemble");
  json summary = {{"accuracy", json::object()}};
  for (const auto& name : member_order) {
    const auto& [yt, yp] = by_member[name];
    const auto cm = confusion_matrix(yt, yp, C);
    const auto rep = classification_report(cm);
    emit("report_" + name + ".txt", render_report(rep, enc));
    emit("report_" + name + ".json", report_json(rep, enc, prov.header()).dump(1) + "\n");
    emit("confusion_" + name + ".csv", confusion_csv(cm, enc));
    summary["accuracy"][name] = rep.accuracy;
    std::cout << "== " << name << " (accuracy " << csv::format_fixed(rep.accuracy, 4) << ", n = " << yt.size()
              << ")\n"
              << render_report(rep, enc) << "\n";
  }

  // Indeterminacy histogram.
  std::vector<std::size_t> hist_ok(cfg.bins, 0), hist_bad(cfg.bins, 0);
  for (const auto& p : s.preds) {
    auto b = static_cast<std::size_t>(p.score.indeterminacy * static_cast<double>(cfg.bins));
    b = std::min(b, cfg.bins - 1);
    (p.correct() ? hist_ok : hist_bad)[b]++;
  }
  std::string hist = "bin_lo,bin_hi,count,correct,incorrect\n";
  for (std::size_t b = 0; b < cfg.bins; ++b) {
    const double lo = static_cast<double>(b) / static_cast<double>(cfg.bins);
    const double hi = static_cast<double>(b + 1) / static_cast<double>(cfg.bins);
    hist += csv::format_fixed(lo, 6) + "," + csv::format_fixed(hi, 6) + "," + std::to_string(hist_ok[b] + hist_bad[b]) +
            "," + std::to_string(hist_ok[b]) + "," + std::to_string(hist_bad[b]) + "\n";
  }
  emit("indeterminacy_histogram.csv", hist);

  // Classes among high-indeterminacy predictions (I > tau).
  std::vector<std::size_t> flagged_true(C, 0), flagged_pred(C, 0), predicted(C, 0);
  std::size_t flagged = 0;
  for (const auto& p : s.preds) {
    predicted[p.predicted_class]++;
    if (abstains(p.score.indeterminacy, cfg.tau)) {
      ++flagged;
      flagged_true[*p.true_class]++;
      flagged_pred[p.predicted_class]++;
    }
  }
  std::string high = "class,flagged_by_true_class,flagged_by_predicted_class,predicted,flagged_fraction\n";
  for (std::size_t c = 0; c < C; ++c) {
    const double frac = predicted[c] ? static_cast<double>(flagged_pred[c]) / static_cast<double>(predicted[c]) : 0.0;
    high += csv::quote(enc.decode(c)) + "," + std::to_string(flagged_true[c]) + "," + std::to_string(flagged_pred[c]) +
            "," + std::to_string(predicted[c]) + "," + csv::format_fixed(frac, 6) + "\n";
  }
  emit("high_indeterminacy_classes.csv", high);

  // Mean indeterminacy for correct vs incorrect predictions.
  const auto split = indeterminacy_by_correctness(s.preds);
  auto mean_or_empty = [](const std::optional<double>& v) { return v ? csv::format_fixed(*v, 6) : std::string(); };
  emit("indeterminacy_by_correctness.csv", "group,count,mean_indeterminacy\ncorrect," + std::to_string(split.n_correct) +
                                               "," + mean_or_empty(split.mean_correct) + "\nincorrect," +
                                               std::to_string(split.n_incorrect) + "," +
                                               mean_or_empty(split.mean_incorrect) + "\n");

  // Per predicted class indeterminacy distribution.
  std::vector<std::vector<double>> per_class(C);
  for (const auto& p : s.preds) per_class[p.predicted_class].push_back(p.score.indeterminacy);
  std::string dist = "class,count,mean,min,p25,median,p75,p80,max\n";
  for (std::size_t c = 0; c < C; ++c) {
    auto& v = per_class[c];
    dist += csv::quote(enc.decode(c)) + "," + std::to_string(v.size());
    if (v.empty()) {
      dist += ",,,,,,,\n";
      continue;
    }
    double sum = 0.0;
    for (double x : v) sum += x;
    const auto [mn, mx] = std::minmax_element(v.begin(), v.end());
    dist += "," + csv::format_fixed(sum / static_cast<double>(v.size()), 6) + "," + csv::format_fixed(*mn, 6);
    for (double q : {25.0, 50.0, 75.0, 80.0}) dist += "," + csv::format_fixed(nearest_rank_percentile(v, q), 6);
    dist += "," + csv::format_fixed(*mx, 6) + "\n";
  }
  emit("class_indeterminacy.csv", dist);

  // Per-sample predictions under the bundle's policy.
  std::string rows = "sample_id,true_class,predicted_class,T,I,F,abstained,applied_threshold\n";
  for (const auto& p : s.preds) {
    const auto d = decide(p.predicted_class, p.score, s.bundle.policy, p.sample_id);
    rows += csv::quote(p.sample_id) + "," + csv::quote(enc.decode(*p.true_class)) + "," +
            csv::quote(enc.decode(p.predicted_class)) + "," + csv::format_number(p.score.truth) + "," +
            csv::format_number(p.score.indeterminacy) + "," + csv::format_number(p.score.falsity) + "," +
            (d.abstained ? "true" : "false") + "," + csv::format_number(d.applied_threshold) + "\n";
  }
  emit("predictions.csv", rows);

  summary["samples"] = s.preds.size();
  summary["flagged_at_tau"] = flagged;
  summary["tau"] = cfg.tau;
  summary["mean_indeterminacy_correct"] = split.mean_correct ? json(*split.mean_correct) : json(nullptr);
  summary["mean_indeterminacy_incorrect"] = split.mean_incorrect ? json(*split.mean_incorrect) : json(nullptr);
  summary["provenance"] = prov.header();
  emit("summary.json", summary.dump(1) + "\n");
  write_json((dir / "manifest.json").string(), prov.manifest());

  std::cout << "mean I: correct " << mean_or_empty(split.mean_correct) << ", incorrect "
            << mean_or_empty(split.mean_incorrect) << "; flagged at tau " << cfg.tau << ": " << flagged << "/"
            << s.preds.size() << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------

int cmd_sweep(const RunConfig& cfg) {
  if (cfg.out.empty()) throw Failure(kInput, "--out csv path is required");
  json config = {{"bundle", cfg.bundle}, {"input", cfg.input},       {"label_col", cfg.label_col},
                 {"grid", cfg.grid},     {"external", cfg.external}, {"out", cfg.out}};
  Provenance prov("sweep", config);
  const auto grid = parse_grid(cfg.grid);
  const auto s = score_input(cfg, prov);
  const auto rows = sweep_thresholds(s.preds, grid);
  const double best = best_youden(rows);

  std::string out = "tau,accuracy,coverage,youden\n";
  for (const auto& r : rows) {
    out += csv::format_fixed(r.tau, 6) + "," + csv::format_fixed(r.accuracy_retained, 6) + "," +
           csv::format_fixed(r.coverage, 6) + "," + csv::format_fixed(r.youden, 6) + "\n";
  }
  if (const auto parent = fs::path(cfg.out).parent_path(); !parent.empty()) ensure_dir(parent.string());
  write_text(cfg.out, out);
  prov.artifact(cfg.out);
  auto manifest = prov.manifest();
  manifest["recommended_tau"] = best;
  write_json(cfg.out + ".provenance.json", manifest);
  std::cout << out << "recommended_tau=" << csv::format_fixed(best, 6) << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------

int cmd_calibrate(const RunConfig& cfg) {
  if (cfg.out.empty()) throw Failure(kInput, "--out bundle path is required");
  json config = {{"bundle", cfg.bundle},         {"input", cfg.input}, {"label_col", cfg.label_col},
                 {"percentile", cfg.percentile}, {"external", cfg.external}, {"out", cfg.out}};
  Provenance prov("calibrate", config);
  auto s = score_input(cfg, prov);
  auto fitted = fit_class_thresholds(s.preds, cfg.percentile, s.bundle.class_count(), s.bundle.policy);
  const auto rates = flag_rates(s.preds, fitted);
  s.bundle.policy = fitted;

  json rate_json = json::object();
  for (const auto& [c, r] : rates) rate_json[s.bundle.encoding.decode(c)] = r;
  s.bundle.metadata["calibration"] = {{"provenance", prov.header()}, {"calibration_flag_rates", rate_json}};
  save_bundle(cfg.out, s.bundle);

  std::cout << "policy version " << fitted.version << " (percentile " << cfg.percentile << ")\n"
            << "class,threshold,calibration_flag_rate\n";
  for (std::size_t c = 0; c < s.bundle.class_count(); ++c) {
    std::cout << s.bundle.encoding.decode(c) << "," << csv::format_fixed(fitted.threshold_for(c), 6) << ",";
    if (rates.count(c)) std::cout << csv::format_fixed(rates.at(c), 6);
    std::cout << "\n";
  }
  return kOk;
}

// ---------------------------------------------------------------------------

int cmd_simulate(const RunConfig& cfg) {
  if (cfg.out.empty()) throw Failure(kInput, "--out csv path is required");
  SyntheticConfig sc;
  sc.class_count = cfg.classes;
  sc.samples_per_class = cfg.per_class;
  sc.feature_dim = cfg.dim;
  sc.class_means = axis_means(cfg.classes, cfg.dim, cfg.separation);
  sc.overlap_sigma = cfg.sigma;
  sc.seed = cfg.seed;
  const auto ds = generate_synthetic(sc);
  if (const auto parent = fs::path(cfg.out).parent_path(); !parent.empty()) ensure_dir(parent.string());
  csv::write_dataset(cfg.out, ds, cfg.label_col);

  Provenance prov("simulate", {{"classes", cfg.classes},
                               {"per_class", cfg.per_class},
                               {"dim", cfg.dim},
                               {"separation", cfg.separation},
                               {"sigma", cfg.sigma},
                               {"seed", cfg.seed},
                               {"label_col", cfg.label_col},
                               {"out", cfg.out}});
  prov.artifact(cfg.out);
  write_json(cfg.out + ".provenance.json", prov.manifest());
  std::cout << "wrote " << ds.rows() << " rows to " << cfg.out << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------

int cmd_serve(const RunConfig& cfg) {
  ModelBundle bundle;
  try {
    bundle = load_bundle(require_file(cfg.bundle, "bundle"));
  } catch (const std::exception& e) {
    throw Failure(kInput, std::string("BUNDLE_LOAD_FAILURE: ") + e.what());
  }

  // Signals are taken synchronously on a dedicated thread.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  DecisionService service(std::move(bundle), cfg.audit);
  httplib::Server server;
  // The library default (SO_REUSEPORT) lets a second process share the port
  // silently; plain SO_REUSEADDR makes an occupied port fail to bind.
  server.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
  });
  http::register_routes(server, service);
  if (!server.bind_to_port(cfg.host, cfg.port)) {
    throw Failure(kRuntime, "PORT_IN_USE: cannot bind " + cfg.host + ":" + std::to_string(cfg.port));
  }

  std::thread waiter([&] {
    int sig = 0;
    sigwait(&signals, &sig);
    server.stop();
  });
  std::cout << "listening on http://" << cfg.host << ":" << cfg.port << " (audit log " << cfg.audit << ", "
            << service.review_count() << " review items restored)" << std::endl;
  server.listen_after_bind();
  if (server.is_running()) server.stop();
  pthread_kill(waiter.native_handle(), SIGTERM);
  waiter.join();
  std::cout << "stopped" << std::endl;
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Indeterminacy-aware intrusion detection pipeline"};
  app.require_subcommand(1);
  RunConfig cfg;

  auto common_input = [&](CLI::App* sub, const std::string& help) {
    sub->add_option("--input", cfg.input, help)->required();
    sub->add_option("--label-col", cfg.label_col, "label column name")->capture_default_str();
    sub->add_option("--drop", cfg.drop, "columns to ignore");
  };
  auto scoring = [&](CLI::App* sub) {
    common_input(sub, "labeled dataset CSV");
    sub->add_option("--bundle", cfg.bundle, "model bundle")->required();
    sub->add_option("--external", cfg.external, "external probabilities CSV (repeatable)");
  };

  auto* prepare = app.add_subcommand("prepare", "filter, split, balance and standardize a dataset");
  common_input(prepare, "raw dataset CSV");
  prepare->add_option("--out", cfg.out, "output directory")->required();
  prepare->add_option("--seed", cfg.seed)->capture_default_str();
  prepare->add_option("--holdout", cfg.holdout, "holdout fraction")->capture_default_str();
  prepare->add_option("--calib-fraction", cfg.calib_fraction, "share of the holdout used for calibration")
      ->capture_default_str();
  prepare->add_option("--k", cfg.k, "SMOTE neighbours")->capture_default_str();
  prepare->add_option("--min-class-count", cfg.min_class_count)->capture_default_str();

  auto* train = app.add_subcommand("train", "train the ensemble into a model bundle");
  train->add_option("--input", cfg.input, "prepared directory")->required();
  train->add_option("--label-col", cfg.label_col)->capture_default_str();
  train->add_option("--out", cfg.out, "bundle path")->required();
  train->add_option("--seed", cfg.seed)->capture_default_str();
  train->add_option("--trees", cfg.trees)->capture_default_str();
  train->add_option("--max-depth", cfg.max_depth)->capture_default_str();
  train->add_option("--l2", cfg.l2)->capture_default_str();
  train->add_option("--max-iters", cfg.max_iters)->capture_default_str();
  train->add_option("--tau", cfg.tau, "initial global threshold")->capture_default_str();
  train->add_option("--normal-class", cfg.normal_class, "class reported as 'normal' in the binary view")
      ->capture_default_str();
  train->add_option("--external", cfg.external, "external probabilities CSV to reference (repeatable)");

  auto* evaluate = app.add_subcommand("evaluate", "classification and indeterminacy reports");
  scoring(evaluate);
  evaluate->add_option("--out", cfg.out, "output directory")->required();
  evaluate->add_option("--tau", cfg.tau)->capture_default_str();
  evaluate->add_option("--bins", cfg.bins, "histogram bins")->capture_default_str();

  auto* sweep = app.add_subcommand("sweep", "threshold sweep with Youden index");
  scoring(sweep);
  sweep->add_option("--grid", cfg.grid, "start:stop:step")->capture_default_str();
  sweep->add_option("--out", cfg.out, "sweep CSV path")->required();

  auto* calibrate = app.add_subcommand("calibrate", "fit per-class thresholds into a new bundle");
  scoring(calibrate);
  calibrate->add_option("--percentile", cfg.percentile)->capture_default_str();
  calibrate->add_option("--out", cfg.out, "output bundle path")->required();

  auto* simulate = app.add_subcommand("simulate", "generate a synthetic Gaussian dataset");
  simulate->add_option("--out", cfg.out, "output CSV path")->required();
  simulate->add_option("--classes", cfg.classes)->capture_default_str();
  simulate->add_option("--per-class", cfg.per_class)->capture_default_str();
  simulate->add_option("--dim", cfg.dim)->capture_default_str();
  simulate->add_option("--separation", cfg.separation, "distance between class means")->capture_default_str();
  simulate->add_option("--sigma", cfg.sigma, "per-feature standard deviation")->capture_default_str();
  simulate->add_option("--seed", cfg.seed)->capture_default_str();
  simulate->add_option("--label-col", cfg.label_col)->capture_default_str();

  auto* serve = app.add_subcommand("serve", "run the HTTP decision service");
  serve->add_option("--bundle", cfg.bundle)->required();
  serve->add_option("--port", cfg.port)->capture_default_str();
  serve->add_option("--host", cfg.host)->capture_default_str();
  serve->add_option("--audit", cfg.audit, "audit log path")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kInput;
  }

  try {
    if (*prepare) return cmd_prepare(cfg);
    if (*train) return cmd_train(cfg);
    if (*evaluate) return cmd_evaluate(cfg);
    if (*sweep) return cmd_sweep(cfg);
    if (*calibrate) return cmd_calibrate(cfg);
    if (*simulate) return cmd_simulate(cfg);
    if (*serve) return cmd_serve(cfg);
  } catch (const Failure& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code();
  } catch (const Error& e) {
    std::cerr << "error: " << to_string(e.code()) << ": " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const json::exception& e) {
    std::cerr << "error: PARSE_ERROR: " << e.what() << "\n";
    return kInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return kRuntime;
}
