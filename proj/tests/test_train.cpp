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

#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <limits>

#include "unifl/error.hpp"
#include "unifl/train.hpp"

using namespace unifl;

namespace {

TrainConfig tiny_config() {
  TrainConfig c;
  c.iterations = 4;
  c.synthetic_samples = 2;
  c.synthetic_image_size = 48;
  c.network.input_size = 32;
  c.network.stages = {{{4, 1, 2, 4, 2, 2}, {8, 1, 2, 2, 2, 2}, {8, 1, 1, 2, 2, 2}, {8, 1, 1, 2, 2, 2}}};
  c.network.decoder_channels = 4;
  return c;
}

TrainResult run(const TrainConfig& cfg) {
  const ProtocolTable& t = ProtocolTable::standard();
  nn::Network net(cfg.network);
  return train(cfg, t, net, load_training_data(cfg, t));
}

}  // namespace

TEST_CASE("configuration text") {
  const TrainConfig d;
  CHECK(d.learning_rate == 2.5e-4);
  CHECK(d.lr_decay == 0.8);
  CHECK(d.beta == 0.9);
  CHECK(d.network.hf_sigma == 20.0);
  CHECK(d.per_dataset == 2);

  const TrainConfig c = parse_train_config(
      "# comment\niterations = 50\nlearning_rate=1e-3\nbeta = 0\nwidths = 4,8,8,16\nfgsa = false\nsigma = 12.5\n");
  CHECK(c.iterations == 50);
  CHECK(c.learning_rate == 1e-3);
  CHECK(c.beta == 0.0);
  CHECK(c.network.stages[3].width == 16);
  CHECK_FALSE(c.network.fgsa);
  CHECK(c.network.hf_sigma == 12.5);
  CHECK(parse_train_config(format_train_config(c)).network.stages[3].width == 16);
  CHECK(format_train_config(parse_train_config(format_train_config(c))) == format_train_config(c));

  CHECK_THROWS_AS(parse_train_config("unknown_key = 3\n"), ParseError);
  CHECK_THROWS_AS(parse_train_config("iterations = many\n"), ParseError);
  CHECK_THROWS_AS(parse_train_config("widths = 1,2\n"), ParseError);

  TrainConfig env = c;
  setenv("UNIFL_SEED", "4242", 1);
  apply_environment(env);
  unsetenv("UNIFL_SEED");
  CHECK(env.seed == 4242);

  const nn::NetworkConfig back = network_from_metadata(network_metadata(c.network));
  CHECK(back.stages[3].width == 16);
  CHECK_FALSE(back.fgsa);
}

TEST_CASE("learning-rate schedule") {
  TrainConfig c;
  c.iterations = 500;
  CHECK(lr_milestones(c) == std::vector<int>{200, 350, 450});
  CHECK(learning_rate_at(c, 0) == 2.5e-4);
  CHECK(learning_rate_at(c, 199) == 2.5e-4);
  CHECK(learning_rate_at(c, 200) == 0.8 * 2.5e-4);
  CHECK(learning_rate_at(c, 200) == doctest::Approx(2.0e-4).epsilon(1e-15));
  CHECK(learning_rate_at(c, 350) == doctest::Approx(2.5e-4 * 0.64).epsilon(1e-15));
  CHECK(learning_rate_at(c, 499) == doctest::Approx(2.5e-4 * 0.512).epsilon(1e-15));
  c.iterations = 100000;
  CHECK(lr_milestones(c) == std::vector<int>{40000, 70000, 90000});
}

TEST_CASE("log format") {
  CHECK(log_header() == "iteration,total,AFLW,WFLW,COFW,300W,lr,wall_time");
  TrainLogRecord r;
  r.iteration = 3;
  r.total = 0.5;
  r.learning_rate = 2e-4;
  const std::string line = format_log_record(r);
  CHECK(line.rfind("3,0.5,", 0) == 0);
  CHECK(std::count(line.begin(), line.end(), ',') == 7);
}

TEST_CASE("seeded runs are reproducible") {
  TrainConfig cfg = tiny_config();
  const TrainResult a = run(cfg), b = run(cfg);
  REQUIRE(a.log.size() == 4);
  for (std::size_t i = 0; i < a.log.size(); ++i) {
    CHECK(a.log[i].iteration == static_cast<int>(i));
    CHECK(a.log[i].total == b.log[i].total);
    CHECK(a.log[i].per_dataset == b.log[i].per_dataset);
    CHECK(a.log[i].learning_rate == b.log[i].learning_rate);
    CHECK(std::isfinite(a.log[i].total));
    double sum = 0.0;
    for (double v : a.log[i].per_dataset) sum += v;
    CHECK(sum == doctest::Approx(a.log[i].total).epsilon(1e-12));
  }
  CHECK(nn::encode_checkpoint(a.checkpoint) == nn::encode_checkpoint(b.checkpoint));
  CHECK(a.optimizer == b.optimizer);

  cfg.seed = 8;
  CHECK_FALSE(run(cfg).log[0].total == a.log[0].total);
}

TEST_CASE("ablation switches") {
  TrainConfig cfg = tiny_config();
  cfg.iterations = 2;
  cfg.network.fgsa = false;
  cfg.beta = 0.0;
  const TrainResult r = run(cfg);
  for (const auto& e : r.checkpoint.entries) CHECK(e.name.find("structure") == std::string::npos);
  CHECK(std::isfinite(r.log.back().total));
  cfg.beta = 1.0;
  CHECK(weights_for_beta(ProtocolTable::standard(), 1.0).limit);
  CHECK(std::isfinite(run(cfg).log.back().total));
}

TEST_CASE("non-finite loss aborts with the iteration") {
  TrainConfig cfg = tiny_config();
  const ProtocolTable& t = ProtocolTable::standard();
  auto data = load_training_data(cfg, t);
  for (auto& ds : data)
    for (auto& s : ds) s.image.channels[0].at(3, 3) = std::numeric_limits<double>::quiet_NaN();
  nn::Network net(cfg.network);
  try {
    train(cfg, t, net, data);
    FAIL("expected a TrainingError");
  } catch (const TrainingError& e) {
    CHECK(e.iteration() == 0);
  }
}
