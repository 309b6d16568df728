#include "cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "trimodal/errors.hpp"
#include "trimodal/fusion.hpp"
#include "trimodal/metrics.hpp"

namespace trimodal::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr std::array<double, 3> kSplitRatios{0.70, 0.15, 0.15};
const char* const kModalityNames[3] = {"image", "cognitive", "biomarker"};
const char* const kRowNames[3] = {"MRI (CNN)", "Cognitive (LSTM)",
                                  "Biomarkers (LSTM)"};

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void parse_train_section(const json& j, TrainConfig& tc) {
  if (j.contains("epochs")) tc.epochs = j["epochs"].get<std::size_t>();
  if (j.contains("batch_size")) tc.batch_size = j["batch_size"].get<std::size_t>();
  if (j.contains("lr")) tc.lr = j["lr"].get<double>();
  if (j.contains("patience")) tc.patience = j["patience"].get<std::size_t>();
}

}  // namespace

RunConfig load_config(const std::optional<std::string>& path) {
  RunConfig cfg;
  if (!path) return cfg;
  std::ifstream in(*path);
  if (!in) throw UsageError("cannot open config file: " + *path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw UsageError("config parse error in " + *path + ": " + e.what());
  }
  try {
    if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("dataset")) {
      const json& d = j["dataset"];
      if (d.contains("n_subjects")) cfg.n_subjects = d["n_subjects"].get<std::size_t>();
      if (d.contains("image_side")) cfg.geometry.image_side = d["image_side"].get<std::size_t>();
      if (d.contains("cognitive_T")) cfg.geometry.cognitive_T = d["cognitive_T"].get<std::size_t>();
      if (d.contains("cognitive_features"))
        cfg.geometry.cognitive_features = d["cognitive_features"].get<std::size_t>();
      if (d.contains("biomarker_T")) cfg.geometry.biomarker_T = d["biomarker_T"].get<std::size_t>();
      if (d.contains("biomarker_features"))
        cfg.geometry.biomarker_features = d["biomarker_features"].get<std::size_t>();
      if (d.contains("prevalence")) cfg.prevalence = d["prevalence"].get<double>();
      if (d.contains("corruption_rate"))
        cfg.corruption_rate = d["corruption_rate"].get<double>();
    }
    if (j.contains("train")) {
      const json& t = j["train"];
      if (t.contains("image")) parse_train_section(t["image"], cfg.train_image);
      if (t.contains("cognitive")) parse_train_section(t["cognitive"], cfg.train_cognitive);
      if (t.contains("biomarker")) parse_train_section(t["biomarker"], cfg.train_biomarker);
    }
    if (j.contains("fusion")) {
      const json& f = j["fusion"];
      if (f.contains("strategy")) cfg.strategy = f["strategy"].get<std::string>();
      if (f.contains("prior")) cfg.prior = f["prior"].get<double>();
      if (f.contains("weights") && !f["weights"].is_null()) {
        auto w = f["weights"].get<std::vector<double>>();
        if (w.size() != 3) throw UsageError("fusion.weights must have 3 entries");
        cfg.manual_weights = std::array<double, 3>{w[0], w[1], w[2]};
      }
    }
    if (j.contains("paths")) {
      const json& p = j["paths"];
      if (p.contains("workdir")) cfg.workdir = p["workdir"].get<std::string>();
      if (p.contains("checkpoint_dir"))
        cfg.checkpoint_dir = p["checkpoint_dir"].get<std::string>();
      if (p.contains("report")) cfg.report_path = p["report"].get<std::string>();
    }
  } catch (const json::exception& e) {
    throw UsageError("config field error in " + *path + ": " + e.what());
  }
  return cfg;
}

namespace {

void finalize_paths(RunConfig& cfg) {
  if (cfg.checkpoint_dir.empty())
    cfg.checkpoint_dir = (fs::path(cfg.workdir) / "checkpoints").string();
  if (cfg.report_path.empty())
    cfg.report_path = (fs::path(cfg.workdir) / "report").string();
  const std::array<std::string, 4> strategies{"weighted", "majority", "bayes",
                                              "stacked"};
  if (std::find(strategies.begin(), strategies.end(), cfg.strategy) ==
      strategies.end())
    throw UsageError("unknown fusion strategy '" + cfg.strategy +
                     "' (expected weighted|majority|bayes|stacked)");
  for (const auto& m : cfg.drop_modalities)
    modality_from_name(m);  // validates the name
}

bool is_dropped(const RunConfig& cfg, ModalityKind kind) {
  for (const auto& m : cfg.drop_modalities)
    if (modality_from_name(m) == kind) return true;
  return false;
}

const TrainConfig& train_config_for(const RunConfig& cfg, ModalityKind kind) {
  switch (kind) {
    case ModalityKind::image: return cfg.train_image;
    case ModalityKind::cognitive: return cfg.train_cognitive;
    default: return cfg.train_biomarker;
  }
}

std::uint64_t branch_seed(const RunConfig& cfg, ModalityKind kind) {
  return cfg.seed + 1 + static_cast<std::uint64_t>(kind);
}

fs::path checkpoint_path(const RunConfig& cfg, ModalityKind kind) {
  return fs::path(cfg.checkpoint_dir) /
         (std::string(kModalityNames[static_cast<int>(kind)]) + ".tmf1");
}

const Tensor* modality_tensor(const dataio::SubjectRecord& rec,
                              ModalityKind kind) {
  switch (kind) {
    case ModalityKind::image: return rec.image ? &*rec.image : nullptr;
    case ModalityKind::cognitive: return rec.cognitive ? &*rec.cognitive : nullptr;
    default: return rec.biomarker ? &*rec.biomarker : nullptr;
  }
}

struct SplitContext {
  dataio::TrimodalDataset ds;
  dataio::SplitIndices split;
};

SplitContext load_context(const RunConfig& cfg) {
  SplitContext ctx{dataio::load_trimodal(cfg.workdir, cfg.seed), {}};
  ctx.split = dataio::split_dataset(ctx.ds, kSplitRatios, cfg.seed);
  return ctx;
}

LabeledSamples gather_samples(const dataio::TrimodalDataset& ds,
                              const std::vector<std::size_t>& indices,
                              ModalityKind kind,
                              const dataio::NormalizationStats* stats) {
  LabeledSamples out;
  for (std::size_t idx : indices) {
    const Tensor* t = modality_tensor(ds.subjects[idx], kind);
    if (!t) continue;
    out.x.push_back(stats ? dataio::apply_normalization(*t, *stats) : *t);
    out.y.push_back(ds.subjects[idx].label);
  }
  return out;
}

struct Branch {
  ModalityKind kind;
  dataio::LoadedCheckpoint ckpt;
};

std::vector<Branch> load_branches(const RunConfig& cfg, std::ostream& log) {
  std::vector<Branch> branches;
  for (int k = 0; k < 3; ++k) {
    const auto kind = static_cast<ModalityKind>(k);
    if (is_dropped(cfg, kind)) {
      log << "fuse: modality " << kModalityNames[k] << " dropped by flag\n";
      continue;
    }
    const fs::path path = checkpoint_path(cfg, kind);
    if (!fs::exists(path)) {
      log << "fuse: checkpoint " << path.string()
          << " not found, treating modality as missing\n";
      continue;
    }
    branches.push_back({kind, dataio::load_checkpoint(path)});
  }
  if (branches.empty())
    throw DataError("no modality checkpoints available for fusion");
  return branches;
}

// Per-subject positive-class probabilities, aligned with `indices`;
// nullopt where the subject lacks the modality.
std::vector<std::optional<std::array<double, 2>>> branch_predictions(
    Branch& branch, const dataio::TrimodalDataset& ds,
    const std::vector<std::size_t>& indices) {
  std::vector<Tensor> samples;
  std::vector<std::size_t> where;
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const Tensor* t = modality_tensor(ds.subjects[indices[i]], branch.kind);
    if (!t) continue;
    samples.push_back(dataio::apply_normalization(*t, branch.ckpt.stats));
    where.push_back(i);
  }
  std::vector<std::optional<std::array<double, 2>>> out(indices.size());
  if (samples.empty()) return out;
  const std::vector<double> scores = predict_scores(branch.ckpt.model, samples);
  for (std::size_t i = 0; i < where.size(); ++i)
    out[where[i]] = std::array<double, 2>{1.0 - scores[i], scores[i]};
  return out;
}

double branch_val_auc(Branch& branch, const SplitContext& ctx) {
  auto preds = branch_predictions(branch, ctx.ds, ctx.split.val);
  std::vector<double> scores;
  std::vector<int> labels;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (!preds[i]) continue;
    scores.push_back((*preds[i])[1]);
    labels.push_back(ctx.ds.subjects[ctx.split.val[i]].label);
  }
  return metrics::auc_score(scores, labels);
}

struct FusionRun {
  std::vector<fusion::FusionResult> results;           // per test subject
  std::vector<std::optional<std::array<double, 2>>> branch_probs[3];
  fusion::FusionWeights weights;
  std::string strategy_name;
  std::array<bool, 3> branch_loaded{false, false, false};
};

FusionRun run_fusion(const RunConfig& cfg, SplitContext& ctx,
                     std::vector<Branch>& branches) {
  FusionRun run;
  for (int k = 0; k < 3; ++k)
    run.branch_probs[k].assign(ctx.split.test.size(), std::nullopt);

  // An unavailable branch keeps a chance-level AUC in the weight
  // derivation so its weight mass is renormalized away per subject and
  // fused confidence stays below 1.
  std::array<double, 3> aucs{0.5, 0.5, 0.5};
  for (auto& branch : branches) {
    const int k = static_cast<int>(branch.kind);
    run.branch_loaded[k] = true;
    aucs[k] = branch_val_auc(branch, ctx);
    run.branch_probs[k] = branch_predictions(branch, ctx.ds, ctx.split.test);
  }
  run.weights = cfg.manual_weights ? fusion::manual_weights(*cfg.manual_weights)
                                   : fusion::derive_weights(aucs);

  fusion::StackerModel stacker;
  if (cfg.strategy == "stacked") {
    std::vector<std::array<double, 3>> feats;
    std::vector<int> labels;
    std::vector<std::vector<std::optional<std::array<double, 2>>>> val_preds(3);
    for (auto& branch : branches)
      val_preds[static_cast<int>(branch.kind)] =
          branch_predictions(branch, ctx.ds, ctx.split.val);
    for (std::size_t i = 0; i < ctx.split.val.size(); ++i) {
      std::array<double, 3> f{0.5, 0.5, 0.5};
      for (int k = 0; k < 3; ++k)
        if (!val_preds[k].empty() && val_preds[k][i]) f[k] = (*val_preds[k][i])[1];
      feats.push_back(f);
      labels.push_back(ctx.ds.subjects[ctx.split.val[i]].label);
    }
    stacker = fusion::train_stacker(feats, labels);
  }

  for (std::size_t i = 0; i < ctx.split.test.size(); ++i) {
    fusion::Predictions preds;
    for (int k = 0; k < 3; ++k) {
      if (run.branch_probs[k][i]) {
        preds[k] = fusion::ModalityPrediction::of(
            kModalityNames[k], (*run.branch_probs[k][i])[0],
            (*run.branch_probs[k][i])[1]);
      } else {
        preds[k] = fusion::ModalityPrediction::missing(kModalityNames[k]);
      }
    }
    fusion::FusionResult r;
    if (cfg.strategy == "weighted") {
      r = fusion::fuse_weighted_average(preds, run.weights);
    } else if (cfg.strategy == "majority") {
      r = fusion::fuse_majority_vote(preds, run.weights);
    } else if (cfg.strategy == "bayes") {
      r = fusion::fuse_logit_pool(preds, cfg.prior);
    } else {
      r = fusion::fuse_stacked(stacker, preds);
    }
    run.results.push_back(std::move(r));
  }
  run.strategy_name = run.results.empty() ? cfg.strategy
                                          : run.results.front().strategy;
  return run;
}

// --- subcommands ---------------------------------------------------------

int cmd_generate(const RunConfig& cfg) {
  auto ds = dataio::generate_trimodal(cfg.seed, cfg.n_subjects, cfg.geometry,
                                      cfg.prevalence, cfg.corruption_rate);
  dataio::export_dataset(ds, cfg.workdir);
  std::size_t positives = 0;
  for (const auto& rec : ds.subjects) positives += rec.label;
  std::cout << "generated " << ds.subjects.size() << " subjects ("
            << positives << " AD) under " << cfg.workdir << "\n";
  return 0;
}

int cmd_train(const RunConfig& cfg, const std::string& modality) {
  const ModalityKind kind = modality_from_name(modality);
  SplitContext ctx = load_context(cfg);

  LabeledSamples train_raw = gather_samples(ctx.ds, ctx.split.train, kind, nullptr);
  if (train_raw.size() == 0)
    throw DataError("no " + modality + " samples in the training split");
  const dataio::NormalizationStats stats = dataio::fit_normalization(train_raw.x);
  LabeledSamples train = gather_samples(ctx.ds, ctx.split.train, kind, &stats);
  LabeledSamples val = gather_samples(ctx.ds, ctx.split.val, kind, &stats);

  const std::uint64_t bseed = branch_seed(cfg, kind);
  nn::Model model = [&] {
    switch (kind) {
      case ModalityKind::image:
        return build_mri_cnn(ctx.ds.geometry.image_side,
                             ctx.ds.geometry.channels, bseed);
      case ModalityKind::cognitive:
        return build_cognitive_lstm(ctx.ds.geometry.cognitive_T,
                                    ctx.ds.geometry.cognitive_features, bseed);
      default:
        return build_biomarker_lstm(ctx.ds.geometry.biomarker_T,
                                    ctx.ds.geometry.biomarker_features, bseed);
    }
  }();

  TrainConfig tc = train_config_for(cfg, kind);
  tc.seed = bseed;
  const TrainHistory hist = train_modality(model, train, val, tc);

  fs::create_directories(cfg.checkpoint_dir);
  dataio::save_checkpoint(model, stats, bseed, checkpoint_path(cfg, kind));

  const fs::path hist_path =
      fs::path(cfg.workdir) / ("history_" + modality + ".csv");
  std::ofstream out(hist_path);
  out << "epoch,train_loss,val_loss,val_acc\n" << std::setprecision(10);
  for (std::size_t e = 0; e < hist.train_loss.size(); ++e)
    out << (e + 1) << ',' << hist.train_loss[e] << ',' << hist.val_loss[e]
        << ',' << hist.val_accuracy[e] << '\n';

  std::cout << "trained " << modality << ": " << hist.train_loss.size()
            << " epochs, best epoch " << (hist.best_epoch + 1)
            << ", val_loss " << hist.val_loss[hist.best_epoch] << ", val_acc "
            << hist.val_accuracy[hist.best_epoch] << "\n";
  return 0;
}

int cmd_eval(const RunConfig& cfg, const std::string& modality,
             const std::string& split_name) {
  const ModalityKind kind = modality_from_name(modality);
  SplitContext ctx = load_context(cfg);
  const std::vector<std::size_t>* indices = &ctx.split.test;
  if (split_name == "train") indices = &ctx.split.train;
  else if (split_name == "val") indices = &ctx.split.val;
  else if (split_name != "test")
    throw UsageError("unknown split '" + split_name + "'");

  Branch branch{kind, dataio::load_checkpoint(checkpoint_path(cfg, kind))};
  auto preds = branch_predictions(branch, ctx.ds, *indices);
  metrics::ScoredSet set;
  set.name = kRowNames[static_cast<int>(kind)];
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (!preds[i]) continue;
    set.scores.push_back((*preds[i])[1]);
    set.labels.push_back(ctx.ds.subjects[(*indices)[i]].label);
  }
  const auto report =
      metrics::build_report({set}, 0.5, ctx.ds.provenance, cfg.seed);
  std::cout << metrics::format_report_table(report);
  return 0;
}

int cmd_fuse(const RunConfig& cfg) {
  SplitContext ctx = load_context(cfg);
  std::vector<Branch> branches = load_branches(cfg, std::cout);
  FusionRun run = run_fusion(cfg, ctx, branches);

  fs::create_directories(cfg.workdir);
  const fs::path out_path =
      fs::path(cfg.workdir) / ("fusion_" + cfg.strategy + ".csv");
  std::ofstream out(out_path);
  out << "subject_id,image_prob,cognitive_prob,biomarker_prob,fused_prob,"
         "label,confidence\n"
      << std::setprecision(10);
  for (std::size_t i = 0; i < ctx.split.test.size(); ++i) {
    const auto& rec = ctx.ds.subjects[ctx.split.test[i]];
    out << rec.id;
    for (int k = 0; k < 3; ++k) {
      if (run.branch_probs[k][i])
        out << ',' << (*run.branch_probs[k][i])[1];
      else
        out << ",MISSING";
    }
    out << ',' << run.results[i].probs[1] << ',' << rec.label << ','
        << run.results[i].confidence << '\n';
  }
  std::cout << "fused " << ctx.split.test.size() << " test subjects with "
            << run.strategy_name << " -> " << out_path.string() << "\n";
  return 0;
}

int cmd_report(const RunConfig& cfg) {
  SplitContext ctx = load_context(cfg);
  std::vector<Branch> branches = load_branches(cfg, std::cout);
  FusionRun run = run_fusion(cfg, ctx, branches);

  std::vector<metrics::ScoredSet> sets;
  std::vector<std::string> roc_names;
  for (auto& branch : branches) {
    const int k = static_cast<int>(branch.kind);
    metrics::ScoredSet set;
    set.name = kRowNames[k];
    for (std::size_t i = 0; i < ctx.split.test.size(); ++i) {
      if (!run.branch_probs[k][i]) continue;
      set.scores.push_back((*run.branch_probs[k][i])[1]);
      set.labels.push_back(ctx.ds.subjects[ctx.split.test[i]].label);
    }
    sets.push_back(std::move(set));
    roc_names.push_back(kModalityNames[k]);
  }
  {
    metrics::ScoredSet set;
    set.name = "Aggregated (" + run.strategy_name + ")";
    for (std::size_t i = 0; i < ctx.split.test.size(); ++i) {
      set.scores.push_back(run.results[i].probs[1]);
      set.labels.push_back(ctx.ds.subjects[ctx.split.test[i]].label);
    }
    sets.push_back(std::move(set));
    roc_names.push_back("aggregated");
  }

  const auto report =
      metrics::build_report(sets, 0.5, ctx.ds.provenance, cfg.seed);

  fs::create_directories(fs::path(cfg.report_path).parent_path().empty()
                             ? fs::path(".")
                             : fs::path(cfg.report_path).parent_path());
  std::ofstream txt(cfg.report_path + ".txt");
  txt << metrics::format_report_table(report);

  json doc;
  doc["dataset"] = {{"id", report.dataset_id},
                    {"seed", report.seed},
                    {"n_subjects", ctx.ds.subjects.size()},
                    {"split", {{"train", ctx.split.train.size()},
                               {"val", ctx.split.val.size()},
                               {"test", ctx.split.test.size()}}}};
  doc["threshold"] = 0.5;
  doc["rows"] = json::array();
  for (const auto& row : report.rows) {
    doc["rows"].push_back({{"model", row.model},
                           {"accuracy", row.accuracy},
                           {"precision", row.precision},
                           {"recall", row.recall},
                           {"f1", row.f1},
                           {"auc_roc", row.auc}});
  }
  double mean_conf = 0.0;
  for (const auto& r : run.results) mean_conf += r.confidence;
  if (!run.results.empty()) mean_conf /= run.results.size();
  json used = json::array();
  for (int k = 0; k < 3; ++k)
    if (run.branch_loaded[k]) used.push_back(kModalityNames[k]);
  doc["fusion"] = {{"strategy", run.strategy_name},
                   {"weights", {run.weights.w[0], run.weights.w[1],
                                run.weights.w[2]}},
                   {"prior", cfg.prior},
                   {"modalities", used},
                   {"mean_confidence", mean_conf}};
  std::ofstream jout(cfg.report_path + ".json");
  jout << doc.dump(2) << '\n';

  for (std::size_t s = 0; s < sets.size(); ++s) {
    const auto points = metrics::roc_points(sets[s].scores, sets[s].labels);
    std::ofstream roc(fs::path(cfg.workdir) / ("roc_" + roc_names[s] + ".csv"));
    roc << "fpr,tpr\n" << std::setprecision(10);
    for (const auto& p : points) roc << p.fpr << ',' << p.tpr << '\n';
  }

  std::cout << metrics::format_report_table(report);
  std::cout << "report written to " << cfg.report_path << ".{txt,json}\n";
  return 0;
}

int cmd_pipeline(const RunConfig& cfg) {
  cmd_generate(cfg);
  for (const char* m : kModalityNames) {
    if (is_dropped(cfg, modality_from_name(m))) continue;
    cmd_train(cfg, m);
  }
  cmd_fuse(cfg);
  return cmd_report(cfg);
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Multimodal Alzheimer's detection pipeline: three modality "
               "models fused by pluggable aggregation strategies"};
  app.require_subcommand(1);
  app.fallthrough();

  std::optional<std::string> config_path;
  app.add_option("--config", config_path, "JSON run configuration");
  std::uint64_t seed_flag = 0;
  auto* seed_opt = app.add_option("--seed", seed_flag, "Run seed");
  std::string workdir_flag;
  auto* workdir_opt = app.add_option("--workdir", workdir_flag, "Working directory");
  std::size_t n_flag = 0;
  auto* n_opt = app.add_option("--n-subjects", n_flag, "Synthetic cohort size");
  std::string strategy_flag;
  auto* strategy_opt = app.add_option(
      "--strategy", strategy_flag,
      "Fusion strategy: weighted|majority|bayes|stacked");
  double prior_flag = 0.5;
  auto* prior_opt = app.add_option("--prior", prior_flag,
                                   "Positive-class prior for bayes fusion");
  std::vector<std::string> drop_flags;
  app.add_option("--drop-modality", drop_flags,
                 "Treat a modality as missing (image|cognitive|biomarker)");
  std::size_t epochs_flag = 0;
  auto* epochs_opt =
      app.add_option("--epochs", epochs_flag, "Override epochs for all branches");

  auto* generate = app.add_subcommand("generate", "Write a synthetic dataset");
  auto* train = app.add_subcommand("train", "Train one modality model");
  std::string train_modality;
  train->add_option("modality", train_modality, "image|cognitive|biomarker")
      ->required();
  auto* eval = app.add_subcommand("eval", "Evaluate one checkpoint on a split");
  std::string eval_modality, eval_split = "test";
  eval->add_option("modality", eval_modality, "image|cognitive|biomarker")
      ->required();
  eval->add_option("--split", eval_split, "train|val|test");
  auto* fuse = app.add_subcommand("fuse", "Fuse available checkpoints");
  auto* report = app.add_subcommand("report", "Write the metrics report");
  auto* pipeline = app.add_subcommand("pipeline", "Run every stage in order");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }

  try {
    RunConfig cfg = load_config(config_path);
    if (*seed_opt) cfg.seed = seed_flag;
    if (*workdir_opt) cfg.workdir = workdir_flag;
    if (*n_opt) cfg.n_subjects = n_flag;
    if (*strategy_opt) cfg.strategy = strategy_flag;
    if (*prior_opt) cfg.prior = prior_flag;
    if (*epochs_opt) {
      cfg.train_image.epochs = epochs_flag;
      cfg.train_cognitive.epochs = epochs_flag;
      cfg.train_biomarker.epochs = epochs_flag;
    }
    for (const auto& m : drop_flags) cfg.drop_modalities.push_back(m);
    finalize_paths(cfg);

    if (generate->parsed()) return cmd_generate(cfg);
    if (train->parsed()) return cmd_train(cfg, train_modality);
    if (eval->parsed()) return cmd_eval(cfg, eval_modality, eval_split);
    if (fuse->parsed()) return cmd_fuse(cfg);
    if (report->parsed()) return cmd_report(cfg);
    if (pipeline->parsed()) return cmd_pipeline(cfg);
    std::cerr << "error: no subcommand given\n";
    return 2;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const ParameterError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace trimodal::cli
