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

#include "unifl/train.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "unifl/error.hpp"
#include "unifl/frequency.hpp"
#include "util.hpp"

namespace unifl {

namespace {

std::vector<std::string> split_commas(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = s.find(',', start);
    out.push_back(detail::trim(s.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

struct ValueParser {
  int line;
  std::string key;

  long long integer(const std::string& v, long long lo, long long hi) const {
    const auto x = detail::parse_int(v);
    if (!x || *x < lo || *x > hi) throw ParseError("'" + key + "' expects an integer in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]", line);
    return *x;
  }
  double real(const std::string& v) const {
    const auto x = detail::parse_double(v);
    if (!x || !std::isfinite(*x)) throw ParseError("'" + key + "' expects a number", line);
    return *x;
  }
  bool boolean(const std::string& v) const {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ParseError("'" + key + "' expects true or false", line);
  }
  std::array<int, 4> four(const std::string& v) const {
    const auto parts = split_commas(v);
    if (parts.size() != 4) throw ParseError("'" + key + "' expects four comma-separated integers", line);
    std::array<int, 4> out{};
    for (std::size_t i = 0; i < 4; ++i) out[i] = static_cast<int>(integer(parts[i], 1, 1 << 16));
    return out;
  }
};

std::string join4(const std::array<nn::StageConfig, 4>& stages, int nn::StageConfig::*field) {
  std::string s;
  for (std::size_t i = 0; i < 4; ++i) s += (i ? "," : "") + std::to_string(stages[i].*field);
  return s;
}

std::string real_text(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

}  // namespace

TrainConfig parse_train_config(std::string_view text, TrainConfig cfg) {
  const auto lines = detail::split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const int line_no = static_cast<int>(i + 1);
    const std::string line = detail::trim(detail::strip_comment(lines[i]));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("expected key = value", line_no);
    const std::string key = detail::trim(std::string_view(line).substr(0, eq));
    const std::string value = detail::trim(std::string_view(line).substr(eq + 1));
    const ValueParser p{line_no, key};
    auto& net = cfg.network;
    auto set_stage = [&](int nn::StageConfig::*field) {
      const auto v = p.four(value);
      for (std::size_t s = 0; s < 4; ++s) net.stages[s].*field = v[s];
    };

    if (key == "iterations") cfg.iterations = static_cast<int>(p.integer(value, 1, 1'000'000'000));
    else if (key == "learning_rate") cfg.learning_rate = p.real(value);
    else if (key == "milestones") {
      cfg.milestone_fractions.clear();
      if (!value.empty())
        for (const auto& part : split_commas(value)) {
          const double f = p.real(part);
          if (f <= 0.0 || f >= 1.0) throw ParseError("milestone fractions must lie in (0, 1)", line_no);
          cfg.milestone_fractions.push_back(f);
        }
    } else if (key == "lr_decay") cfg.lr_decay = p.real(value);
    else if (key == "beta") cfg.beta = p.real(value);
    else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(p.integer(value, 0, (1LL << 62)));
    else if (key == "per_dataset") cfg.per_dataset = static_cast<int>(p.integer(value, 1, 1024));
    else if (key == "augment") cfg.augment = p.boolean(value);
    else if (key == "kernel_sigma") cfg.kernel_sigma = p.real(value);
    else if (key == "weight_decay") cfg.weight_decay = p.real(value);
    else if (key == "clip_grad_norm") cfg.clip_grad_norm = p.real(value);
    else if (key == "data_root") cfg.data_root = value;
    else if (key == "synthetic_samples") cfg.synthetic_samples = static_cast<int>(p.integer(value, 1, 1'000'000));
    else if (key == "synthetic_image_size") cfg.synthetic_image_size = static_cast<int>(p.integer(value, 16, 8192));
    else if (key == "protocol") cfg.protocol_path = value;
    else if (key == "log") cfg.log_path = value;
    else if (key == "checkpoint") cfg.checkpoint_path = value;
    else if (key == "input_size") net.input_size = static_cast<int>(p.integer(value, 1, 8192));
    else if (key == "in_channels") net.in_channels = static_cast<int>(p.integer(value, 1, 3));
    else if (key == "widths") set_stage(&nn::StageConfig::width);
    else if (key == "depths") set_stage(&nn::StageConfig::depth);
    else if (key == "reductions") set_stage(&nn::StageConfig::reduction);
    else if (key == "downsample") set_stage(&nn::StageConfig::downsample);
    else if (key == "structure_channels") set_stage(&nn::StageConfig::structure_channels);
    else if (key == "image_channels") set_stage(&nn::StageConfig::image_channels);
    else if (key == "heads") net.heads = static_cast<int>(p.integer(value, 1, 64));
    else if (key == "mlp_ratio") net.mlp_ratio = static_cast<int>(p.integer(value, 1, 16));
    else if (key == "ca_reduction") net.ca_reduction = static_cast<int>(p.integer(value, 1, 1024));
    else if (key == "decoder_channels") net.decoder_channels = static_cast<int>(p.integer(value, 1, 4096));
    else if (key == "planes") net.planes = static_cast<int>(p.integer(value, 1, 4096));
    else if (key == "fgsa") net.fgsa = p.boolean(value);
    else if (key == "inject_before_attention") net.inject_before_attention = p.boolean(value);
    else if (key == "sigma") net.hf_sigma = p.real(value);
    else if (key == "net_seed") net.seed = static_cast<std::uint64_t>(p.integer(value, 0, (1LL << 62)));
    else throw ParseError("unknown key '" + key + "'", line_no);
  }
  if (cfg.learning_rate <= 0) throw Error("learning_rate must be positive");
  if (cfg.lr_decay <= 0) throw Error("lr_decay must be positive");
  if (cfg.beta < 0 || cfg.beta > 1) throw Error("beta must lie in [0, 1]");
  return cfg;
}

TrainConfig load_train_config(const std::string& path, TrainConfig base) {
  return parse_train_config(detail::read_text_file(path), std::move(base));
}

void apply_environment(TrainConfig& cfg) {
  if (const char* s = std::getenv("UNIFL_SEED")) {
    const auto v = detail::parse_int(detail::trim(s));
    if (!v || *v < 0) throw Error("UNIFL_SEED must be a non-negative integer");
    cfg.seed = static_cast<std::uint64_t>(*v);
  }
}

std::string network_metadata(const nn::NetworkConfig& net) {
  std::ostringstream o;
  o << "input_size = " << net.input_size << '\n'
    << "in_channels = " << net.in_channels << '\n'
    << "widths = " << join4(net.stages, &nn::StageConfig::width) << '\n'
    << "depths = " << join4(net.stages, &nn::StageConfig::depth) << '\n'
    << "reductions = " << join4(net.stages, &nn::StageConfig::reduction) << '\n'
    << "downsample = " << join4(net.stages, &nn::StageConfig::downsample) << '\n'
    << "structure_channels = " << join4(net.stages, &nn::StageConfig::structure_channels) << '\n'
    << "image_channels = " << join4(net.stages, &nn::StageConfig::image_channels) << '\n'
    << "heads = " << net.heads << '\n'
    << "mlp_ratio = " << net.mlp_ratio << '\n'
    << "ca_reduction = " << net.ca_reduction << '\n'
    << "decoder_channels = " << net.decoder_channels << '\n'
    << "planes = " << net.planes << '\n'
    << "fgsa = " << (net.fgsa ? "true" : "false") << '\n'
    << "inject_before_attention = " << (net.inject_before_attention ? "true" : "false") << '\n'
    << "sigma = " << real_text(net.hf_sigma) << '\n'
    << "net_seed = " << net.seed << '\n';
  return o.str();
}

nn::NetworkConfig network_from_metadata(std::string_view metadata) { return parse_train_config(metadata).network; }

std::string format_train_config(const TrainConfig& cfg) {
  std::ostringstream o;
  o << "iterations = " << cfg.iterations << '\n' << "learning_rate = " << real_text(cfg.learning_rate) << '\n';
  o << "milestones = ";
  for (std::size_t i = 0; i < cfg.milestone_fractions.size(); ++i) o << (i ? "," : "") << real_text(cfg.milestone_fractions[i]);
  o << '\n'
    << "lr_decay = " << real_text(cfg.lr_decay) << '\n'
    << "beta = " << real_text(cfg.beta) << '\n'
    << "seed = " << cfg.seed << '\n'
    << "per_dataset = " << cfg.per_dataset << '\n'
    << "augment = " << (cfg.augment ? "true" : "false") << '\n'
    << "kernel_sigma = " << real_text(cfg.kernel_sigma) << '\n'
    << "weight_decay = " << real_text(cfg.weight_decay) << '\n'
    << "clip_grad_norm = " << real_text(cfg.clip_grad_norm) << '\n'
    << "synthetic_samples = " << cfg.synthetic_samples << '\n'
    << "synthetic_image_size = " << cfg.synthetic_image_size << '\n';
  if (!cfg.data_root.empty()) o << "data_root = " << cfg.data_root << '\n';
  if (!cfg.protocol_path.empty()) o << "protocol = " << cfg.protocol_path << '\n';
  if (!cfg.log_path.empty()) o << "log = " << cfg.log_path << '\n';
  if (!cfg.checkpoint_path.empty()) o << "checkpoint = " << cfg.checkpoint_path << '\n';
  o << network_metadata(cfg.network);
  return o.str();
}

std::vector<int> lr_milestones(const TrainConfig& cfg) {
  std::vector<int> out;
  for (double f : cfg.milestone_fractions) out.push_back(static_cast<int>(std::lround(f * cfg.iterations)));
  std::sort(out.begin(), out.end());
  return out;
}

double learning_rate_at(const TrainConfig& cfg, int iteration) {
  double lr = cfg.learning_rate;
  for (int m : lr_milestones(cfg))
    if (iteration >= m) lr *= cfg.lr_decay;
  return lr;
}

std::string log_header() { return "iteration,total,AFLW,WFLW,COFW,300W,lr,wall_time"; }

std::string format_log_record(const TrainLogRecord& r) {
  std::string s = std::to_string(r.iteration) + "," + real_text(r.total);
  for (double v : r.per_dataset) s += "," + real_text(v);
  s += "," + real_text(r.learning_rate);
  char wall[32];
  std::snprintf(wall, sizeof wall, "%.3f", r.wall_time);
  return s + "," + wall;
}

WeightTable weights_for_beta(const ProtocolTable& table, double beta) {
  if (beta >= 1.0) return build_limit_weight_table(table);
  return build_weight_table(table, Beta(beta));
}

std::array<std::vector<Sample>, kDatasetCount> load_training_data(const TrainConfig& cfg, const ProtocolTable& table) {
  std::array<std::vector<RawSample>, kDatasetCount> raw;
  if (cfg.data_root.empty()) {
    SynthConfig sc;
    sc.image_size = cfg.synthetic_image_size;
    sc.samples_per_dataset = cfg.synthetic_samples;
    sc.seed = cfg.seed;
    raw = generate_synthetic(table, sc);
  } else {
    for (std::size_t d = 0; d < kDatasetCount; ++d) {
      const auto ds = static_cast<DatasetId>(d);
      raw[d] = load_dataset_dir((std::filesystem::path(cfg.data_root) / std::string(dataset_name(ds))).string(), ds);
    }
  }
  std::array<std::vector<Sample>, kDatasetCount> out;
  for (std::size_t d = 0; d < kDatasetCount; ++d)
    for (const auto& r : raw[d]) out[d].push_back(preprocess(r, static_cast<DatasetId>(d), cfg.network.input_size));
  return out;
}

BatchTensors make_batch(const std::vector<Sample>& samples, const ProtocolTable& table, const nn::NetworkConfig& net,
                        double kernel_sigma) {
  if (samples.empty()) throw Error("empty batch");
  std::vector<Image> converted;
  converted.reserve(samples.size());
  for (const auto& s : samples) {
    if (s.image.channel_count() == net.in_channels) {
      converted.push_back(s.image);
    } else if (net.in_channels == 1) {
      converted.push_back(Image{{to_gray(s.image)}});
    } else {
      throw ShapeError("sample '" + s.source_id + "' has " + std::to_string(s.image.channel_count()) +
                       " channels, network expects " + std::to_string(net.in_channels));
    }
  }
  std::vector<const Image*> ptrs;
  for (const auto& img : converted) ptrs.push_back(&img);

  BatchTensors b;
  b.image = nn::images_to_tensor(ptrs);
  b.hf = net.fgsa ? nn::hf_to_tensor(ptrs, net.hf_sigma) : nn::Tensor(b.image.shape());
  const int stride = net.stages[0].downsample;
  for (const auto& s : samples) {
    const auto geom = HeatmapGeometry::for_input(s.image.height(), s.image.width(), stride);
    b.targets.push_back({s.dataset, encode(s.landmarks, table, geom, kernel_sigma)});
  }
  return b;
}

LossBreakdown batch_loss(nn::Network& network, const BatchTensors& batch, const ProtocolTable& table,
                         const WeightTable& weights, bool training, bool backward) {
  const nn::Tensor out = network.forward(batch.image, batch.hf, training);
  const auto preds = nn::to_heatmaps(out, network.config().stages[0].downsample);
  std::vector<HeatmapStack> grads;
  LossBreakdown lb = fmb_batch_loss(batch.targets, preds, table, weights, {}, backward ? &grads : nullptr);
  if (backward) network.backward(nn::from_heatmaps(grads));
  return lb;
}

TrainResult train(const TrainConfig& cfg, const ProtocolTable& table, nn::Network& network,
                  const std::array<std::vector<Sample>, kDatasetCount>& data,
                  const std::function<void(const TrainLogRecord&)>& on_record) {
  const WeightTable weights = weights_for_beta(table, cfg.beta);
  nn::AdamConfig ac;
  ac.weight_decay = cfg.weight_decay;
  ac.clip_grad_norm = cfg.clip_grad_norm;
  nn::Adam adam(ac);
  MixedBatchSampler sampler(data, cfg.seed, cfg.per_dataset);
  const auto start = std::chrono::steady_clock::now();
  const std::size_t batch_size = kDatasetCount * static_cast<std::size_t>(cfg.per_dataset);

  TrainResult result;
  for (int it = 0; it < cfg.iterations; ++it) {
    MixedBatch batch = sampler.next_batch();
    if (cfg.augment)
      for (std::size_t k = 0; k < batch.samples.size(); ++k) {
        std::mt19937_64 rng(derive_seed(cfg.seed, 0xA116, static_cast<std::uint64_t>(it) * batch_size + k));
        batch.samples[k] = augment(batch.samples[k], rng, table);
      }
    const BatchTensors bt = make_batch(batch.samples, table, network.config(), cfg.kernel_sigma);
    network.params().zero_grad();
    const LossBreakdown lb = batch_loss(network, bt, table, weights, true, true);
    if (!std::isfinite(lb.total))
      throw TrainingError("non-finite loss at iteration " + std::to_string(it), it);
    const double lr = learning_rate_at(cfg, it);
    adam.step(network.params().trainable(), lr);

    TrainLogRecord r;
    r.iteration = it;
    r.total = lb.total;
    r.per_dataset = lb.per_dataset;
    r.learning_rate = lr;
    r.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (on_record) on_record(r);
    result.log.push_back(r);
  }
  network.clear_recording();
  result.checkpoint = nn::make_checkpoint(network.params(), network_metadata(network.config()));
  result.optimizer = adam.state();
  return result;
}

NetworkGradCheck network_gradcheck(const TrainConfig& cfg, const nn::GradCheckOptions& options, bool freeze_kinks) {
  const ProtocolTable& table = ProtocolTable::standard();
  SynthConfig sc;
  sc.image_size = cfg.synthetic_image_size;
  sc.samples_per_dataset = cfg.per_dataset;
  sc.seed = cfg.seed;
  const auto raw = generate_synthetic(table, sc);
  std::vector<Sample> samples;
  for (std::size_t d = 0; d < kDatasetCount; ++d)
    for (const auto& r : raw[d]) samples.push_back(preprocess(r, static_cast<DatasetId>(d), cfg.network.input_size));
  nn::Network net(cfg.network);
  const BatchTensors bt = make_batch(samples, table, net.config(), cfg.kernel_sigma);
  const WeightTable w = weights_for_beta(table, cfg.beta);
  nn::KinkPattern pattern;
  if (freeze_kinks) net.set_kink_pattern(&pattern);
  NetworkGradCheck out;
  out.result = nn::gradcheck(
      net.params(),
      [&](bool with_backward) {
        pattern.start(with_backward ? nn::KinkPattern::Mode::Record : nn::KinkPattern::Mode::Replay);
        return batch_loss(net, bt, table, w, true, with_backward).total;
      },
      options);
  out.trainable_parameters = net.params().trainable_count();
  return out;
}

TrainResult train(const TrainConfig& cfg_in) {
  TrainConfig cfg = cfg_in;
  const ProtocolTable table =
      cfg.protocol_path.empty() ? ProtocolTable::standard() : ProtocolTable::load_file(cfg.protocol_path);
  const auto data = load_training_data(cfg, table);
  nn::Network network(cfg.network);

  std::ofstream log;
  if (!cfg.log_path.empty()) {
    log.open(cfg.log_path, std::ios::binary);
    if (!log) throw Error("cannot write '" + cfg.log_path + "'");
    log << log_header() << '\n';
  }
  auto on_record = [&](const TrainLogRecord& r) {
    if (log.is_open()) log << format_log_record(r) << '\n' << std::flush;
  };
  TrainResult result;
  try {
    result = train(cfg, table, network, data, on_record);
  } catch (const TrainingError& e) {
    if (log.is_open()) log << "# aborted at iteration " << e.iteration() << ": " << e.what() << '\n';
    throw;
  }
  if (!cfg.checkpoint_path.empty()) {
    nn::save_checkpoint(cfg.checkpoint_path, result.checkpoint);
    detail::write_text_file(cfg.checkpoint_path + ".adam", nn::encode_adam_state(result.optimizer));
  }
  return result;
}

}  // namespace unifl
