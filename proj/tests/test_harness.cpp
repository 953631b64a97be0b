#include <doctest.h>

#include <random>
#include <sstream>

#include "evlc/harness.hpp"
#include "evlc/json_io.hpp"

using namespace evlc;

namespace {

ExperimentConfig quiet_config() {
  ExperimentConfig c;
  c.sensor.background_noise_rate = 0;
  c.sensor.jitter_sigma_us = 0;
  return c;
}

}  // namespace

TEST_SUITE("harness_cli") {

TEST_CASE("latency model: one packet") {
  FrameLayout layout;
  const auto b = latency_model(1, layout, 1000, 2000, 13000);
  CHECK(b.t_blink_us == 27400);
  CHECK(b.total_us == 43400);
}

TEST_CASE("latency model: three packets with and without the gap") {
  FrameLayout layout;
  const auto b = latency_model(3, layout, 1000, 2000, 16000);
  CHECK(b.t_blink_us == 3 * 27400 + 2 * 1000);
  CHECK(b.total_us == 1000 + 84200 + 2000 + 16000);
  layout.inter_packet_gap_slots = 0;
  const auto g = latency_model(3, layout, 1000, 2000, 16000);
  CHECK(g.t_blink_us == 82200);
  CHECK(g.total_us == 101200);
  CHECK(latency_model(3, layout, 0, 0, 16000).total_us == 98200);
}

TEST_CASE("latency model rejects zero packets and negative parts") {
  FrameLayout layout;
  CHECK_THROWS_AS(latency_model(0, layout, 1000, 2000, 0), std::invalid_argument);
  CHECK_THROWS_AS(latency_model(1, layout, -1, 2000, 0), std::invalid_argument);
}

TEST_CASE("latency total is the sum of its parts") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> part(0, 50000);
  std::uniform_int_distribution<int> packets(1, 8), gap(0, 40);
  for (int i = 0; i < 200; ++i) {
    FrameLayout layout;
    layout.inter_packet_gap_slots = gap(rng);
    const int n = packets(rng);
    const auto b = latency_model(n, layout, part(rng), part(rng), part(rng));
    CHECK(b.total_us == doctest::Approx(b.t_cmd_us + b.t_blink_us + b.t_transfer_us + b.t_proc_us));
    CHECK(b.t_blink_us == n * 27400.0 + (n - 1) * layout.inter_packet_gap_slots * 100.0);
  }
}

TEST_CASE("ETSI check examples") {
  LatencyBreakdown b;
  b.total_us = 98200;
  const auto ok = etsi_check(b, 288);
  CHECK(ok.pass);
  CHECK(ok.payload_margin_bytes == 88);
  CHECK(ok.latency_margin_us == 1800);
  b.total_us = 43400;
  const auto small = etsi_check(b, 96);
  CHECK_FALSE(small.pass);
  CHECK_FALSE(small.payload_ok);
  CHECK(small.latency_ok);
  b.total_us = 110000;
  const auto slow = etsi_check(b, 288);
  CHECK_FALSE(slow.pass);
  CHECK(slow.payload_ok);
  CHECK(slow.summary().rfind("FAIL", 0) == 0);
}

TEST_CASE("noiseless static single transmitter: BER 0, PER 0") {
  auto c = quiet_config();
  c.trials_per_point = 2;
  const auto row = run_point(c, 0.0, 5);
  CHECK(row.packets == 2);
  CHECK(row.ber == 0.0);
  CHECK(row.per == 0.0);
  CHECK(row.failed_trials == 0);
  CHECK(row.min_iou >= 0.5);
}

TEST_CASE("sweep values reshape the experiment") {
  ExperimentConfig c;
  c.sweep.variable = SweepVariable::kTransmitters;
  auto t = apply_sweep_value(c, 3);
  REQUIRE(t.scenario.transmitters.size() == 3);
  CHECK(t.scenario.transmitters[2].lateral_offset_m == doctest::Approx(3.0));
  c.sweep.variable = SweepVariable::kPayloadPackets;
  CHECK(apply_sweep_value(c, 2).packets_per_transmitter == 2);
  c.sweep.variable = SweepVariable::kDistance;
  CHECK(apply_sweep_value(c, 35).scenario.transmitters[0].longitudinal_m == 35);
  CHECK_THROWS(apply_sweep_value(c, 0));
  c.sweep.variable = SweepVariable::kSpeed;
  CHECK(apply_sweep_value(c, 30).scenario.vehicle_speed_kmh == 30);
}

TEST_CASE("payload sweep: blink time strictly increases") {
  auto c = quiet_config();
  c.sweep.variable = SweepVariable::kPayloadPackets;
  c.sweep.values = {1, 2, 3};
  const auto rows = run_sweep(c);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].latency_model.t_blink_us < rows[1].latency_model.t_blink_us);
  CHECK(rows[1].latency_model.t_blink_us < rows[2].latency_model.t_blink_us);
  for (const auto& r : rows) CHECK(r.per == 0.0);
}

TEST_CASE("sweep CSV is deterministic apart from wall-clock columns") {
  ExperimentConfig c;
  c.sweep.variable = SweepVariable::kSpeed;
  c.sweep.values = {0, 45};
  std::ostringstream a, b;
  write_metrics_csv(a, run_sweep(c));
  write_metrics_csv(b, run_sweep(c));
  CHECK(deterministic_csv(a.str()) == deterministic_csv(b.str()));
  CHECK(a.str().find("wall_t_proc_mean_us") != std::string::npos);
  CHECK(deterministic_csv(a.str()).find("wall_") == std::string::npos);
  c.seed = 2;
  std::ostringstream d;
  write_metrics_csv(d, run_sweep(c));
  CHECK(deterministic_csv(d.str()).find("variable,value") == 0);
}

TEST_CASE("experiment config JSON round trip") {
  ExperimentConfig c;
  c.sweep.variable = SweepVariable::kDistance;
  c.sweep.values = {10, 20};
  c.sensor.polarity_mode = PolarityMode::kBipolar;
  c.sensor.bandwidth_cap = 1.5e6;
  c.trials_per_point = 4;
  const nlohmann::json j = c;
  const auto back = j.get<ExperimentConfig>();
  CHECK(nlohmann::json(back) == j);
  CHECK(back.sensor.bandwidth_cap == 1.5e6);
  ExperimentConfig inf;
  CHECK(nlohmann::json(inf)["sensor"]["bandwidth_cap"].is_null());
  CHECK(std::isinf(nlohmann::json(inf).get<ExperimentConfig>().sensor.bandwidth_cap));
  CHECK(nlohmann::json::parse("{}").get<ExperimentConfig>().trials_per_point == 1);
  CHECK_THROWS(nlohmann::json::parse(R"({"sweep": {"variable": "colour"}})").get<ExperimentConfig>());
  CHECK_THROWS(nlohmann::json::parse(R"({"trials_per_point": 0})").get<ExperimentConfig>());
}

TEST_CASE("bipolar baseline decodes a clean bipolar capture") {
  auto c = quiet_config();
  c.sensor.polarity_mode = PolarityMode::kBipolar;
  c.bipolar_baseline = true;
  const auto trial = run_trial(c, 4);
  CHECK(trial.error.empty());
  CHECK(trial.packet_errors() == 0);
  CHECK(trial.bit_errors() == 0);
}

TEST_CASE("a cap far below the signal rate loses the packet") {
  auto c = quiet_config();
  c.sensor.bandwidth_cap = 10.0;
  const auto trial = run_trial(c, 4);
  CHECK(trial.packet_errors() == trial.packets());
  CHECK(trial.bits() == 640);
}

}  // TEST_SUITE
