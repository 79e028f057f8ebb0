// Copyright 2026 The negprompt Authors
// SPDX-License-Identifier: Apache-2.0

#include "negprompt/cli.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "negprompt/errors.hpp"
#include "negprompt/evalkit.hpp"
#include "negprompt/service.hpp"

namespace negprompt {

namespace {

namespace fs = std::filesystem;

struct Shared {
  std::uint64_t seed = 0;
  std::string out;
};

struct Options {
  Shared shared;
  DataConfig data;
  std::string data_dir;
  std::string checkpoint;
  ModelConfig model;
  TrainConfig train;
  std::string mode_policy = "bernoulli(0.5)";
  EvalOptions eval;
  std::string mode = "auto_suggested";
  std::string axis = "beta";
  std::vector<std::string> grid;
  std::vector<int> scenes;
  std::string bind = "127.0.0.1:8080";
};

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot write " + p.string());
  f << text;
}

void add_shared(CLI::App* app, Shared& s, bool needs_out) {
  app->add_option("--seed", s.seed, "Seed of every random stream");
  auto* o = app->add_option("--out", s.out, "Output directory")->configurable(false);
  if (needs_out) o->required();
}

void add_model(CLI::App* app, ModelConfig& m) {
  app->add_option("--image-size", m.image_size, "Image side in pixels")->check(CLI::PositiveNumber);
  app->add_option("--channels", m.channels, "Backbone channels")->check(CLI::PositiveNumber);
  app->add_option("--dim", m.dim, "Embedding width D")->check(CLI::PositiveNumber);
  app->add_option("--levels", m.levels, "Pyramid levels")->check(CLI::PositiveNumber);
  app->add_option("--queries", m.num_queries, "Decoder queries")->check(CLI::PositiveNumber);
  app->add_option("--layers", m.decoder_layers, "Decoder layers")->check(CLI::PositiveNumber);
  app->add_option("--ffn-hidden", m.ffn_hidden, "Hidden width of feed-forward blocks")->check(CLI::PositiveNumber);
  app->add_option("--k", m.k, "Negative prompts per category during training");
  app->add_option("--sample-grid", m.grid, "Sampling grid side of the prompt encoder")->check(CLI::PositiveNumber);
  app->add_option("--locality", m.locality, "Locality prior strength of cross-attention");
  app->add_option("--embed-scale", m.embed_scale, "Norm of query class embeddings");
}

void add_train(CLI::App* app, Options& o) {
  TrainConfig& t = o.train;
  app->add_option("--steps", t.steps, "Optimisation steps")->check(CLI::PositiveNumber);
  app->add_option("--batch", t.batch_size, "Images per step")->check(CLI::PositiveNumber);
  app->add_option("--lr-backbone", t.lr_backbone, "Backbone learning rate");
  app->add_option("--lr-others", t.lr_others, "Learning rate of all other parameters");
  app->add_option("--weight-decay", t.weight_decay, "AdamW weight decay");
  app->add_option("--grad-clip", t.grad_clip, "Global gradient-norm clip (0 disables)");
  app->add_option("--lr-drop", t.lr_drop_fraction, "Fraction of steps after which learning rates drop tenfold");
  app->add_option("--train-beta", t.nnc.beta, "Suppression strength used in training");
  app->add_option("--eta", t.nnh.eta, "Hinge margin");
  app->add_option("--mode-policy", o.mode_policy, "fixed_0, fixed_1 or bernoulli(p)");
  app->add_option("--alpha", t.focal.alpha, "Focal alpha");
  app->add_option("--gamma", t.focal.gamma, "Focal gamma");
  app->add_option("--w-cls", t.weights.cls, "Classification loss weight");
  app->add_option("--w-hinge", t.weights.hinge, "Hinge loss weight");
  app->add_option("--w-l1", t.weights.l1, "L1 box loss weight");
  app->add_option("--w-giou", t.weights.giou, "GIoU loss weight");
}

void add_eval(CLI::App* app, Options& o) {
  app->add_option("--mode", o.mode, "positive_only, auto_suggested or user_curated");
  app->add_option("--beta", o.eval.beta, "Suppression strength at inference");
  app->add_option("--eval-k", o.eval.k, "Negative rows per category in the prompt bank");
  app->add_option("--n-pos", o.eval.n_pos, "Training images per category for the prompt bank")->check(CLI::PositiveNumber);
  app->add_option("--score-threshold", o.eval.score_threshold, "Minimum detection probability");
  app->add_option("--max-dets", o.eval.ap.max_detections, "Detections kept per image")->check(CLI::PositiveNumber);
}

Dataset load_data(const Options& o) {
  if (o.data_dir.empty()) throw ValidationError("--data is required");
  return load_dataset(o.data_dir);
}

Checkpoint load_ckpt(const Options& o) {
  if (o.checkpoint.empty()) throw ValidationError("--checkpoint is required");
  return load_checkpoint(o.checkpoint);
}

void finish_eval_options(Options& o) {
  o.eval.mode = parse_inference_mode(o.mode);
  o.eval.seed = o.shared.seed;
}

void finish_train_options(Options& o) {
  o.train.nnc.policy = ModePolicy::parse(o.mode_policy);
  o.train.seed = o.shared.seed;
  o.model.validate();
  o.train.validate();
}

fs::path prepare_out(const Options& o, const CLI::App& root) {
  const fs::path dir = o.shared.out;
  fs::create_directories(dir);
  write_file(dir / "resolved_config.ini", root.config_to_str(true, true));
  return dir;
}

int cmd_gen_data(Options& o, const CLI::App& root, std::ostream& out) {
  o.data.seed = o.shared.seed;
  const Dataset d = synthesize_dataset(o.data);
  const fs::path dir = prepare_out(o, root);
  save_dataset(d, dir);
  out << "wrote " << d.scenes.size() << " scenes with " << d.categories.size() << " categories to " << dir.string()
      << "\n";
  return kExitOk;
}

int cmd_train(Options& o, const CLI::App& root, std::ostream& out) {
  finish_train_options(o);
  const Dataset d = load_data(o);
  const fs::path dir = prepare_out(o, root);
  std::ofstream log(dir / "metrics.jsonl", std::ios::trunc);
  const TrainResult r = train(d, o.model, o.train, [&](const StepLog& s) { log << step_log_json(s) << "\n"; });
  save_checkpoint({o.model, r.params}, (dir / "checkpoint.bin").string());
  out << "trained " << o.train.steps << " steps, final loss " << format_number(r.log.back().loss) << "\n";
  return kExitOk;
}

int cmd_eval(Options& o, const CLI::App& root, std::ostream& out) {
  finish_eval_options(o);
  const Dataset d = load_data(o);
  const Checkpoint c = load_ckpt(o);
  const EvalOutput r = evaluate_checkpoint(d, c, o.eval);
  const fs::path dir = prepare_out(o, root);
  const std::string label = std::string(to_string(o.eval.mode)) + "@" + format_number(o.eval.beta);
  write_file(dir / "eval.csv", eval_csv(r.result, o.shared.seed, label));
  write_file(dir / "detections.json", detections_json(r.detections));
  nlohmann::json per_cat = nlohmann::json::object();
  for (const auto& [cat, ap] : r.result.per_category) per_cat[std::to_string(cat)] = ap;
  write_file(dir / "per_category.json", per_cat.dump(1));
  out << label << " AP " << format_number(r.result.ap) << " confusable FP " << r.confusable_fp << "\n";
  return kExitOk;
}

int cmd_sweep(Options& o, const CLI::App& root, std::ostream& out) {
  finish_eval_options(o);
  finish_train_options(o);
  const SweepAxis axis = parse_sweep_axis(o.axis);
  const Dataset d = load_data(o);
  std::optional<Checkpoint> ckpt;
  if (!o.checkpoint.empty()) ckpt = load_checkpoint(o.checkpoint);
  const SweepReport rep = run_sweep(axis, o.grid, {o.model, o.train, o.eval}, d, o.shared.seed, ckpt);
  const fs::path dir = prepare_out(o, root);
  write_file(dir / "sweep.csv", sweep_csv(rep));
  write_file(dir / "summary.txt", sweep_summary(rep));
  out << sweep_summary(rep);
  return kExitOk;
}

int cmd_infer(Options& o, const CLI::App& root, std::ostream& out) {
  finish_eval_options(o);
  const Dataset d = load_data(o);
  const Checkpoint c = load_ckpt(o);
  EvalOptions e = o.eval;
  if (!o.scenes.empty()) e.image_ids = o.scenes;
  const std::vector<int> ids = e.image_ids.empty() ? d.val_ids() : e.image_ids;
  const EvalOutput r = evaluate(d, predict_images(d, c, ids), build_eval_bank(d, c, e), e);
  const fs::path dir = prepare_out(o, root);
  write_file(dir / "detections.json", detections_json(r.detections));
  out << "wrote " << r.detections.size() << " detections for " << ids.size() << " images\n";
  return kExitOk;
}

int cmd_serve(Options& o, std::ostream& out) {
  serve(o.checkpoint, o.data_dir, o.bind, [&](int port) {
    out << "listening on port " << port << "\n";
    out.flush();
  });
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Detection with positive and negative visual prompts", "negprompt"};
  app.config_formatter(std::make_shared<CLI::ConfigINI>());
  app.set_config("--config", "", "INI file of flag values; explicit flags take precedence");
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();

  auto* gen = app.add_subcommand("gen-data", "Synthesize a dataset directory");
  add_shared(gen, o.shared, true);
  gen->add_option("--scenes", o.data.num_scenes, "Number of scenes")->check(CLI::PositiveNumber);
  gen->add_option("--categories", o.data.num_categories, "Number of categories")->check(CLI::PositiveNumber);
  gen->add_option("--pairs", o.data.num_pairs, "Confusable category pairs");
  gen->add_option("--zipf", o.data.zipf_exponent, "Zipf exponent of category frequencies");
  gen->add_option("--image-size", o.data.image_size, "Image side in pixels")->check(CLI::PositiveNumber);
  gen->add_option("--max-instances", o.data.max_instances, "Instance cap per scene")->check(CLI::PositiveNumber);
  gen->add_option("--max-others", o.data.max_other_categories, "Largest number of further categories per scene");
  gen->add_option("--partner-prob", o.data.partner_adjacent_prob, "Probability of an adjacent confusable partner");
  gen->add_option("--val-fraction", o.data.val_fraction, "Validation split fraction");
  gen->add_option("--rare-max", o.data.buckets.rare_max, "Largest training count of a rare category");
  gen->add_option("--common-max", o.data.buckets.common_max, "Largest training count of a common category");

  auto* tr = app.add_subcommand("train", "Train a detector checkpoint");
  add_shared(tr, o.shared, true);
  tr->add_option("--data", o.data_dir, "Dataset directory")->required();
  add_model(tr, o.model);
  add_train(tr, o);

  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint on the validation split");
  add_shared(ev, o.shared, true);
  ev->add_option("--data", o.data_dir, "Dataset directory")->required();
  ev->add_option("--checkpoint", o.checkpoint, "Checkpoint file")->required();
  add_eval(ev, o);

  auto* sw = app.add_subcommand("sweep", "Ablation sweep over one axis");
  add_shared(sw, o.shared, true);
  sw->add_option("--data", o.data_dir, "Dataset directory")->required();
  sw->add_option("--checkpoint", o.checkpoint, "Checkpoint for inference-only axes (trained when absent)");
  sw->add_option("--axis", o.axis, "beta, eta, K, N_pos or mode_policy");
  sw->add_option("--grid", o.grid, "Comma-separated grid values")->delimiter(',')->required();
  add_model(sw, o.model);
  add_train(sw, o);
  add_eval(sw, o);

  auto* in = app.add_subcommand("infer", "Write detections for scenes");
  add_shared(in, o.shared, true);
  in->add_option("--data", o.data_dir, "Dataset directory")->required();
  in->add_option("--checkpoint", o.checkpoint, "Checkpoint file")->required();
  in->add_option("--scenes", o.scenes, "Scene ids (default: validation split)")->delimiter(',');
  add_eval(in, o);

  auto* sv = app.add_subcommand("serve", "Serve the HTTP inference API");
  sv->add_option("--checkpoint", o.checkpoint, "Checkpoint file")->required();
  sv->add_option("--data", o.data_dir, "Dataset directory")->required();
  sv->add_option("--bind", o.bind, "host:port to listen on");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help(e.get_name() == "--help" && app.get_subcommands().size() == 1
                        ? app.get_subcommands().front()->get_name()
                        : "");
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    if (*gen) return cmd_gen_data(o, app, out);
    if (*tr) return cmd_train(o, app, out);
    if (*ev) return cmd_eval(o, app, out);
    if (*sw) return cmd_sweep(o, app, out);
    if (*in) return cmd_infer(o, app, out);
    if (*sv) return cmd_serve(o, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace negprompt
