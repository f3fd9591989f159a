// Copyright 2026 The unifl Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Command-line front end for the unifl library.

#include <CLI11.hpp>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "unifl/capacity.hpp"
#include "unifl/dataset.hpp"
#include "unifl/error.hpp"
#include "unifl/frequency.hpp"
#include "unifl/heatmap.hpp"
#include "unifl/losses.hpp"
#include "unifl/metrics.hpp"
#include "unifl/nn/gradcheck.hpp"
#include "unifl/nn/network.hpp"
#include "unifl/nn/optim.hpp"
#include "unifl/protocol.hpp"
#include "unifl/train.hpp"

namespace fs = std::filesystem;
using namespace unifl;

namespace {

std::string num(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

ProtocolTable load_protocol(const std::string& path, bool standard = true) {
  if (path.empty()) return ProtocolTable::standard();
  return ProtocolTable::load_file(path, {standard});
}

DatasetId parse_dataset(const std::string& name) {
  const auto ds = dataset_from_name(name);
  if (!ds) throw Error("unknown dataset '" + name + "' (expected AFLW, WFLW, COFW or 300W)");
  return *ds;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------------------

int cmd_weights(double beta, const std::string& protocol) {
  const ProtocolTable table = load_protocol(protocol);
  const WeightTable w = weights_for_beta(table, beta);
  std::cout << "unified_id,count,capacity,weight\n";
  for (int p = 0; p < table.unified_count(); ++p)
    std::cout << p << ',' << table.count({p}) << ',' << num(w.capacity[static_cast<std::size_t>(p)]) << ','
              << num(w.weight[static_cast<std::size_t>(p)]) << '\n';
  return 0;
}

int cmd_protocol_check(const std::string& protocol, bool minimal, bool dump) {
  const std::string text = protocol.empty() ? std::string(default_protocol_text()) : read_file(protocol);
  const ProtocolTable table = ProtocolTable::load(text, {!minimal});
  if (dump) {
    std::cout << table.serialize();
    return 0;
  }
  int total = 0;
  std::map<int, int> histogram;
  for (const auto& d : table.datasets()) {
    std::cout << "dataset " << d.name << ' ' << d.size << '\n';
    total += d.size;
  }
  for (int p = 0; p < table.unified_count(); ++p) ++histogram[table.count({p})];
  std::cout << "unified " << table.unified_count() << '\n' << "map_lines " << total << '\n';
  for (const auto& [count, n] : histogram) std::cout << "count " << count << ' ' << n << '\n';
  std::cout << "ok\n";
  return 0;
}

int cmd_hf(double sigma, const std::string& in, const std::string& out, bool no_normalize) {
  const Image img = read_pnm(in);
  Image result;
  for (const auto& ch : img.channels) {
    const ImagePlane hf = extract_hf(ch, sigma);
    result.channels.push_back(no_normalize ? hf : normalize_display(hf));
  }
  write_pnm(out, result);
  return 0;
}

int cmd_synth(const std::string& out, int size, int count, std::uint64_t seed) {
  SynthConfig sc;
  sc.image_size = size;
  sc.samples_per_dataset = count;
  sc.seed = seed;
  write_synthetic(out, generate_synthetic(ProtocolTable::standard(), sc));
  std::cout << "wrote " << count << " samples per dataset to " << out << '\n';
  return 0;
}

// Heatmap dumps under <root>/<DATASET>/<id>.hm.
std::map<std::string, std::pair<DatasetId, fs::path>> list_dumps(const std::string& root) {
  std::map<std::string, std::pair<DatasetId, fs::path>> out;
  if (!fs::is_directory(root)) throw Error("'" + root + "' is not a directory");
  for (DatasetId ds : kAllDatasets) {
    const fs::path dir = fs::path(root) / std::string(dataset_name(ds));
    if (!fs::is_directory(dir)) continue;
    for (const auto& e : fs::directory_iterator(dir))
      if (e.path().extension() == ".hm")
        out[std::string(dataset_name(ds)) + "/" + e.path().stem().string()] = {ds, e.path()};
  }
  return out;
}

int cmd_loss(const std::string& protocol, double beta, const std::string& pred_dir, const std::string& gt_dir) {
  const ProtocolTable table = load_protocol(protocol);
  const WeightTable w = weights_for_beta(table, beta);
  const auto gts = list_dumps(gt_dir);
  const auto preds = list_dumps(pred_dir);
  if (gts.empty()) throw Error("no .hm ground-truth dumps under '" + gt_dir + "'");
  std::vector<LossTarget> targets;
  std::vector<HeatmapStack> pred_stacks;
  for (const auto& [key, entry] : gts) {
    const auto it = preds.find(key);
    if (it == preds.end()) throw Error("prediction missing for '" + key + "'");
    targets.push_back({entry.first, read_heatmap_dump(entry.second.string())});
    pred_stacks.push_back(read_heatmap_dump(it->second.second.string()));
  }
  const LossBreakdown lb = fmb_batch_loss(targets, pred_stacks, table, w);
  std::cout << "metric,value\n" << "total," << num(lb.total) << '\n' << "samples," << lb.samples << '\n';
  for (DatasetId ds : kAllDatasets) std::cout << dataset_name(ds) << ',' << num(lb.dataset_loss(ds)) << '\n';
  std::cout << "\nunified_id,count,weight,raw_sum,weighted_sum,contribution,pixel_count,occurrences\n";
  for (int p = 0; p < table.unified_count(); ++p) {
    const auto& s = lb.per_unified_landmark[static_cast<std::size_t>(p)];
    std::cout << p << ',' << table.count({p}) << ',' << num(w.weight_of({p})) << ',' << num(s.raw_sum) << ','
              << num(s.weighted_sum) << ',' << num(s.contribution) << ',' << s.pixel_count << ',' << s.occurrences
              << '\n';
  }
  return 0;
}

NormalizationRule parse_rule(const std::string& rule, DatasetId ds) {
  if (rule == "inter-ocular") return NormalizationRule::inter_ocular(ds);
  if (rule == "inter-pupil") return NormalizationRule::inter_pupil(ds);
  if (rule == "face-size") return NormalizationRule::face_size();
  if (rule == "standard") return NormalizationRule::standard_for(ds);
  throw Error("unknown normalization '" + rule + "' (inter-ocular, inter-pupil, face-size, standard)");
}

DatasetId dataset_for_dir(const std::string& dir, const std::string& name) {
  if (!name.empty()) return parse_dataset(name);
  std::string base = fs::path(dir).filename().string();
  if (base.empty()) base = fs::path(dir).parent_path().filename().string();
  const auto ds = dataset_from_name(base);
  if (!ds) throw Error("cannot infer the dataset from '" + dir + "'; pass --dataset");
  return *ds;
}

// Prediction file: one line per image, `source_id x0 y0 x1 y1 ...` in source-image pixels.
std::map<std::string, LandmarkSet> read_predictions(const std::string& path, DatasetId ds) {
  std::map<std::string, LandmarkSet> out;
  std::istringstream in(read_file(path));
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream ls(line);
    std::string id;
    if (!(ls >> id)) continue;
    std::vector<Point> pts;
    double x, y;
    while (ls >> x >> y) pts.push_back({x, y});
    if (!ls.eof()) throw ParseError("non-numeric coordinate in prediction file", line_no);
    if (static_cast<int>(pts.size()) != dataset_size(ds))
      throw ParseError("expected " + std::to_string(dataset_size(ds)) + " points, found " + std::to_string(pts.size()),
                       line_no);
    out[id] = LandmarkSet::all_visible(ds, std::move(pts));
  }
  return out;
}

int cmd_eval(const std::string& gt_dir, const std::string& pred_file, const std::string& rule_name, double tau,
             const std::string& dataset) {
  const DatasetId ds = dataset_for_dir(gt_dir, dataset);
  const NormalizationRule rule = parse_rule(rule_name, ds);
  const auto raw = load_dataset_dir(gt_dir, ds);
  const auto preds = read_predictions(pred_file, ds);
  std::vector<LandmarkSet> gt_sets, pred_sets;
  std::vector<std::string> ids;
  for (const auto& r : raw) {
    const auto it = preds.find(r.source_id);
    if (it == preds.end()) throw Error("no prediction for '" + r.source_id + "'");
    gt_sets.push_back(r.landmarks);
    pred_sets.push_back(it->second);
    ids.push_back(r.source_id);
  }
  if (gt_sets.empty()) throw Error("no ground-truth samples in '" + gt_dir + "'");
  const EvaluationSummary s = evaluate(gt_sets, pred_sets, rule, tau);
  std::cout << "image,nme\n";
  for (std::size_t i = 0; i < ids.size(); ++i) std::cout << ids[i] << ',' << num(s.per_image[i]) << '\n';
  std::cout << "mean_nme," << num(s.mean_nme) << '\n' << "failure_rate," << num(s.failure_rate) << '\n';
  return 0;
}


int cmd_predict(const std::string& checkpoint_path, const std::string& data_dir, const std::string& dataset,
                const std::string& out_file, const std::string& heatmap_dir, const std::string& protocol) {
  const ProtocolTable table = load_protocol(protocol);
  nn::Checkpoint ckpt = nn::load_checkpoint(checkpoint_path);
  nn::Network net(network_from_metadata(ckpt.metadata));
  nn::restore_checkpoint(ckpt, net.params());
  const DatasetId ds = dataset_for_dir(data_dir, dataset);
  const auto raw = load_dataset_dir(data_dir, ds);
  std::ofstream out(out_file, std::ios::binary);
  if (!out) throw Error("cannot write '" + out_file + "'");
  if (!heatmap_dir.empty()) fs::create_directories(fs::path(heatmap_dir) / std::string(dataset_name(ds)));
  for (const auto& r : raw) {
    const Sample s = preprocess(r, ds, net.config().input_size);
    const BatchTensors bt = make_batch({s}, table, net.config(), kDefaultKernelSigma);
    const nn::Tensor y = net.forward(bt.image, bt.hf, false);
    net.clear_recording();
    const HeatmapStack hs = nn::to_heatmaps(y, net.config().stages[0].downsample).front();
    if (!heatmap_dir.empty())
      write_heatmap_dump((fs::path(heatmap_dir) / std::string(dataset_name(ds)) / (r.source_id + ".hm")).string(), hs);
    const LandmarkSet local = to_dataset(decode(hs).landmarks, table, ds);
    const Affine2 back = s.from_source.inverse();
    out << r.source_id;
    for (const auto& p : local.coords) {
      const Point q = back.apply(p);
      out << ' ' << num(q.x) << ' ' << num(q.y);
    }
    out << '\n';
  }
  std::cout << "wrote predictions for " << raw.size() << " images to " << out_file << '\n';
  return 0;
}

int cmd_gradcheck(const TrainConfig& cfg, int samples, double tol, std::uint64_t seed, double step, bool no_freeze) {
  nn::GradCheckOptions opt;
  opt.samples = samples;
  opt.seed = seed;
  opt.step = step;
  const NetworkGradCheck check = network_gradcheck(cfg, opt, !no_freeze);
  const nn::GradCheckResult& result = check.result;
  std::cout << "parameter,index,analytic,numeric,rel_error\n";
  for (const auto& e : result.entries)
    std::cout << e.name << ',' << e.index << ',' << num(e.analytic) << ',' << num(e.numeric) << ','
              << num(e.rel_error) << '\n';
  std::cout << "trainable_parameters," << check.trainable_parameters << '\n'
            << "max_rel_error," << num(result.max_rel_error) << '\n';
  const bool ok = result.max_rel_error < tol;
  std::cout << (ok ? "PASS" : "FAIL") << '\n';
  return ok ? 0 : 1;
}

int cmd_train(TrainConfig cfg) {
  std::cout << "iterations " << cfg.iterations << ", lr " << num(cfg.learning_rate) << ", beta " << num(cfg.beta)
            << ", seed " << cfg.seed << ", fgsa " << (cfg.network.fgsa ? "on" : "off") << '\n';
  const TrainResult r = train(cfg);
  if (!r.log.empty()) {
    const auto& first = r.log.front();
    const auto& last = r.log.back();
    std::cout << "loss " << num(first.total) << " -> " << num(last.total) << " over " << r.log.size()
              << " iterations (" << num(last.wall_time) << " s)\n";
  }
  if (!cfg.checkpoint_path.empty()) std::cout << "checkpoint " << cfg.checkpoint_path << '\n';
  if (!cfg.log_path.empty()) std::cout << "log " << cfg.log_path << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"unifl: unified facial landmark protocol, losses, frequency features and a desk-scale trainer"};
  app.require_subcommand(1);

  // weights
  double w_beta = kDefaultBeta;
  std::string w_protocol;
  auto* weights = app.add_subcommand("weights", "Per-landmark counts, effective capacities and weights as CSV");
  weights->add_option("--beta", w_beta, "Overlap factor in [0, 1]; 1 selects the limit")->check(CLI::Range(0.0, 1.0));
  weights->add_option("--protocol", w_protocol, "Mapping file (default: built-in)");

  // protocol-check
  std::string pc_protocol;
  bool pc_minimal = false, pc_dump = false;
  auto* pcheck = app.add_subcommand("protocol-check", "Validate a mapping file and print its aggregates");
  pcheck->add_option("--protocol", pc_protocol, "Mapping file (default: built-in)");
  pcheck->add_flag("--minimal", pc_minimal, "Skip the four-dataset aggregate checks");
  pcheck->add_flag("--dump", pc_dump, "Print the normalized mapping text");

  // hf
  double hf_sigma = kDefaultHfSigma;
  std::string hf_in, hf_out;
  bool hf_raw = false;
  auto* hf = app.add_subcommand("hf", "High-frequency image of a PGM/PPM file");
  hf->add_option("--sigma", hf_sigma, "Gaussian mask width")->check(CLI::PositiveNumber);
  hf->add_option("--in", hf_in, "Input image")->required();
  hf->add_option("--out", hf_out, "Output image")->required();
  hf->add_flag("--no-normalize", hf_raw, "Write values clamped to [0, 255] instead of min-max scaling");

  // synth
  std::string sy_out;
  int sy_size = 96, sy_count = 8;
  std::uint64_t sy_seed = 7;
  auto* synth = app.add_subcommand("synth", "Write synthetic stand-in datasets");
  synth->add_option("--out", sy_out, "Output directory")->required();
  synth->add_option("--size", sy_size, "Image side in pixels")->check(CLI::Range(16, 4096));
  synth->add_option("--count", sy_count, "Samples per dataset")->check(CLI::Range(1, 100000));
  synth->add_option("--seed", sy_seed, "Generator seed");

  // loss
  std::string lo_protocol, lo_pred, lo_gt;
  double lo_beta = kDefaultBeta;
  auto* loss = app.add_subcommand("loss", "Weighted batch loss over heatmap dumps <dir>/<DATASET>/<id>.hm");
  loss->add_option("--protocol", lo_protocol, "Mapping file (default: built-in)");
  loss->add_option("--beta", lo_beta, "Overlap factor in [0, 1]; 1 selects the limit")->check(CLI::Range(0.0, 1.0));
  loss->add_option("--pred", lo_pred, "Prediction dump directory")->required();
  loss->add_option("--gt", lo_gt, "Ground-truth dump directory")->required();

  // eval
  std::string ev_gt, ev_pred, ev_norm = "standard", ev_dataset;
  double ev_tau = kDefaultFailureThreshold;
  auto* eval = app.add_subcommand("eval", "Per-image NME and failure rate");
  eval->add_option("--gt", ev_gt, "Dataset directory (list.txt or .pts files)")->required();
  eval->add_option("--pred", ev_pred, "Prediction file: `source_id x0 y0 ...` per line")->required();
  eval->add_option("--norm", ev_norm, "inter-ocular | inter-pupil | face-size | standard");
  eval->add_option("--tau", ev_tau, "Failure threshold")->check(CLI::PositiveNumber);
  eval->add_option("--dataset", ev_dataset, "Dataset name when the directory name is not one");

  // predict
  std::string pr_ckpt, pr_data, pr_dataset, pr_out, pr_heatmaps, pr_protocol;
  auto* predict = app.add_subcommand("predict", "Run a checkpoint over a dataset directory");
  predict->add_option("--checkpoint", pr_ckpt, "Checkpoint file")->required();
  predict->add_option("--data", pr_data, "Dataset directory")->required();
  predict->add_option("--dataset", pr_dataset, "Dataset name when the directory name is not one");
  predict->add_option("--out", pr_out, "Prediction file")->required();
  predict->add_option("--heatmaps", pr_heatmaps, "Also write heatmap dumps under this directory");
  predict->add_option("--protocol", pr_protocol, "Mapping file (default: built-in)");

  // train and gradcheck share configuration options
  std::string tr_config;
  std::optional<int> tr_iterations, tr_size;
  std::optional<std::uint64_t> tr_seed;
  std::optional<double> tr_beta, tr_lr, tr_sigma, tr_wd, tr_clip;
  std::optional<std::string> tr_log, tr_ckpt, tr_data, tr_protocol;
  bool tr_no_fgsa = false, tr_no_augment = false;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", tr_config, "key = value configuration file");
    sub->add_option("--seed", tr_seed, "Root seed (UNIFL_SEED overrides the config file)");
    sub->add_option("--beta", tr_beta, "Overlap factor; 0 disables reweighting")->check(CLI::Range(0.0, 1.0));
    sub->add_option("--sigma", tr_sigma, "High-frequency mask width")->check(CLI::PositiveNumber);
    sub->add_option("--input-size", tr_size, "Network input side")->check(CLI::PositiveNumber);
    sub->add_flag("--no-fgsa", tr_no_fgsa, "Disable the structure prompts");
  };
  auto* trainc = app.add_subcommand("train", "Desk-scale training run");
  add_common(trainc);
  trainc->add_option("--iterations", tr_iterations, "Iteration count")->check(CLI::PositiveNumber);
  trainc->add_option("--lr", tr_lr, "Initial learning rate")->check(CLI::PositiveNumber);
  trainc->add_option("--weight-decay", tr_wd, "L2 coefficient")->check(CLI::NonNegativeNumber);
  trainc->add_option("--clip-grad-norm", tr_clip, "Global gradient norm limit")->check(CLI::NonNegativeNumber);
  trainc->add_option("--log", tr_log, "CSV log path");
  trainc->add_option("--checkpoint", tr_ckpt, "Checkpoint output path; optimizer state is written to <path>.adam");
  trainc->add_option("--data", tr_data, "Dataset root with AFLW/WFLW/COFW/300W subdirectories");
  trainc->add_option("--protocol", tr_protocol, "Mapping file (default: built-in)");
  trainc->add_flag("--no-augment", tr_no_augment, "Disable augmentation");

  int gc_samples = 20;
  double gc_tol = 1e-4;
  std::uint64_t gc_pick_seed = 3;
  double gc_step = 1e-5;
  bool gc_no_freeze = false;
  auto* gradc = app.add_subcommand("gradcheck", "Finite-difference check of network gradients");
  add_common(gradc);
  gradc->add_option("--samples", gc_samples, "Parameters to check")->check(CLI::PositiveNumber);
  gradc->add_option("--tolerance", gc_tol, "Maximum relative error")->check(CLI::PositiveNumber);
  gradc->add_option("--pick-seed", gc_pick_seed, "Seed for parameter sampling");
  gradc->add_option("--step", gc_step, "Central-difference half width")->check(CLI::PositiveNumber);
  gradc->add_flag("--no-freeze", gc_no_freeze, "Let finite differences re-decide rectifier and max-pool branches");

  CLI11_PARSE(app, argc, argv);

  auto build_config = [&]() {
    TrainConfig cfg;
    if (!tr_config.empty()) cfg = load_train_config(tr_config);
    apply_environment(cfg);
    if (tr_seed) cfg.seed = *tr_seed;
    if (tr_beta) cfg.beta = *tr_beta;
    if (tr_sigma) cfg.network.hf_sigma = *tr_sigma;
    if (tr_size) cfg.network.input_size = *tr_size;
    if (tr_no_fgsa) cfg.network.fgsa = false;
    if (tr_iterations) cfg.iterations = *tr_iterations;
    if (tr_lr) cfg.learning_rate = *tr_lr;
    if (tr_wd) cfg.weight_decay = *tr_wd;
    if (tr_clip) cfg.clip_grad_norm = *tr_clip;
    if (tr_log) cfg.log_path = *tr_log;
    if (tr_ckpt) cfg.checkpoint_path = *tr_ckpt;
    if (tr_data) cfg.data_root = *tr_data;
    if (tr_protocol) cfg.protocol_path = *tr_protocol;
    if (tr_no_augment) cfg.augment = false;
    return cfg;
  };

  try {
    if (*weights) return cmd_weights(w_beta, w_protocol);
    if (*pcheck) return cmd_protocol_check(pc_protocol, pc_minimal, pc_dump);
    if (*hf) return cmd_hf(hf_sigma, hf_in, hf_out, hf_raw);
    if (*synth) return cmd_synth(sy_out, sy_size, sy_count, sy_seed);
    if (*loss) return cmd_loss(lo_protocol, lo_beta, lo_pred, lo_gt);
    if (*eval) return cmd_eval(ev_gt, ev_pred, ev_norm, ev_tau, ev_dataset);
    if (*predict) return cmd_predict(pr_ckpt, pr_data, pr_dataset, pr_out, pr_heatmaps, pr_protocol);
    if (*trainc) return cmd_train(build_config());
    if (*gradc) return cmd_gradcheck(build_config(), gc_samples, gc_tol, gc_pick_seed, gc_step, gc_no_freeze);
  } catch (const TrainingError& e) {
    std::cerr << "error: " << e.what() << " (iteration " << e.iteration() << ")\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
