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

#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "unifl/capacity.hpp"
#include "unifl/dataset.hpp"
#include "unifl/error.hpp"
#include "unifl/losses.hpp"
#include "unifl/nn/gradcheck.hpp"
#include "unifl/nn/network.hpp"
#include "unifl/nn/optim.hpp"
#include "unifl/protocol.hpp"

namespace unifl {

inline constexpr double kDefaultLearningRate = 2.5e-4;
inline constexpr double kDefaultLrDecay = 0.8;
inline constexpr double kDefaultBeta = 0.9;

struct TrainConfig {
  int iterations = 500;
  double learning_rate = kDefaultLearningRate;
  std::vector<double> milestone_fractions{0.4, 0.7, 0.9};
  double lr_decay = kDefaultLrDecay;
  double beta = kDefaultBeta;  // 1 selects the limit weighting
  std::uint64_t seed = 7;
  int per_dataset = 2;
  bool augment = true;
  double kernel_sigma = kDefaultKernelSigma;
  double weight_decay = 0.0;
  double clip_grad_norm = 0.0;

  // Data: an empty root selects synthetic data. Otherwise <root>/<NAME> per dataset.
  std::string data_root;
  int synthetic_samples = 8;     // per dataset
  int synthetic_image_size = 96;

  std::string protocol_path;  // empty = built-in table
  std::string log_path;
  std::string checkpoint_path;  // optimizer state goes to <checkpoint_path>.adam

  nn::NetworkConfig network;  // hf_sigma doubles as the structure-branch sigma
};

/// Line-oriented `key = value` text; '#' starts a comment. Unknown keys are errors.
TrainConfig parse_train_config(std::string_view text, TrainConfig base = {});
TrainConfig load_train_config(const std::string& path, TrainConfig base = {});
/// Applies UNIFL_SEED when set.
void apply_environment(TrainConfig& cfg);
std::string format_train_config(const TrainConfig& cfg);

/// Iterations at which the rate is multiplied by lr_decay, from the fractions.
std::vector<int> lr_milestones(const TrainConfig& cfg);
/// Rate used at 0-based iteration `it`.
double learning_rate_at(const TrainConfig& cfg, int iteration);

struct TrainLogRecord {
  int iteration = 0;
  double total = 0.0;
  std::array<double, kDatasetCount> per_dataset{};
  double learning_rate = 0.0;
  double wall_time = 0.0;  // seconds since training started
};

std::string log_header();
std::string format_log_record(const TrainLogRecord& r);

/// Datasets cropped to the network input size.
std::array<std::vector<Sample>, kDatasetCount> load_training_data(const TrainConfig& cfg, const ProtocolTable& table);

struct BatchTensors {
  nn::Tensor image;
  nn::Tensor hf;
  std::vector<LossTarget> targets;
};

/// Converts samples to network inputs and heatmap targets. Colour images are averaged to gray
/// when the network takes one channel.
BatchTensors make_batch(const std::vector<Sample>& samples, const ProtocolTable& table, const nn::NetworkConfig& net,
                        double kernel_sigma);

/// Forward, loss and optionally backward for one batch.
LossBreakdown batch_loss(nn::Network& network, const BatchTensors& batch, const ProtocolTable& table,
                         const WeightTable& weights, bool training, bool backward);

WeightTable weights_for_beta(const ProtocolTable& table, double beta);

class TrainingError : public Error {
 public:
  TrainingError(const std::string& what, int iteration) : Error(what), iteration_(iteration) {}
  int iteration() const { return iteration_; }

 private:
  int iteration_;
};

struct TrainResult {
  std::vector<TrainLogRecord> log;
  nn::Checkpoint checkpoint;
  nn::AdamState optimizer;
};

/// Runs the full loop. `on_record` sees every record as it is produced.
TrainResult train(const TrainConfig& cfg, const ProtocolTable& table, nn::Network& network,
                  const std::array<std::vector<Sample>, kDatasetCount>& data,
                  const std::function<void(const TrainLogRecord&)>& on_record = {});
/// Convenience: loads data, builds the network, writes log and checkpoint when paths are set.
TrainResult train(const TrainConfig& cfg);

/// Finite differences against backward for the training-mode loss of one synthetic batch
/// (cfg.per_dataset faces per dataset). With `freeze_kinks` the difference quotients keep the
/// rectifier and max-pool branches of the analytic pass.
struct NetworkGradCheck {
  nn::GradCheckResult result;
  std::size_t trainable_parameters = 0;
};
NetworkGradCheck network_gradcheck(const TrainConfig& cfg, const nn::GradCheckOptions& options,
                                   bool freeze_kinks = true);

/// Checkpoint metadata describing the network configuration.
std::string network_metadata(const nn::NetworkConfig& net);
nn::NetworkConfig network_from_metadata(std::string_view metadata);

}  // namespace unifl
