#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "evlc/receiver.hpp"

namespace evlc {

enum class SweepVariable { kDistance, kSpeed, kTransmitters, kPayloadPackets };

std::string to_string(SweepVariable v);
SweepVariable sweep_variable_from_string(const std::string& name);

struct SweepSpec {
  SweepVariable variable = SweepVariable::kSpeed;
  std::vector<double> values = {0.0};
};

struct ExperimentConfig {
  ScenarioConfig scenario;
  SensorConfig sensor;
  FrameLayout layout;
  PolarCodeConfig fec;
  RegionParams regions;
  DemapOptions demap;
  SweepSpec sweep;
  int trials_per_point = 1;
  std::uint64_t seed = 1;
  int packets_per_transmitter = 1;
  // Lateral spacing and start stagger when the transmitter count is swept.
  double transmitter_spacing_m = 1.5;
  std::int64_t transmitter_stagger_us = 3000;
  // Placeholder constants; the split between command and transfer time is
  // not measured anywhere.
  double t_cmd_us = 1000.0;
  double t_transfer_us = 2000.0;
  // Stand-in for t_proc in the deterministic latency columns.
  double t_proc_model_us = 13000.0;
  bool bipolar_baseline = false;
  bool parallel_regions = true;

  void validate() const;
  ReceiverConfig receiver() const;
};

struct LatencyBreakdown {
  double t_cmd_us = 0.0;
  double t_blink_us = 0.0;
  double t_transfer_us = 0.0;
  double t_proc_us = 0.0;
  double total_us = 0.0;
};

// t_blink = n frames plus the n - 1 gaps between them.
LatencyBreakdown latency_model(int n_packets, const FrameLayout& layout, double t_cmd_us,
                               double t_transfer_us, double t_proc_us);

struct EtsiReport {
  bool pass = false;
  bool payload_ok = false;
  bool latency_ok = false;
  int payload_bytes = 0;
  double total_us = 0.0;
  int payload_margin_bytes = 0;  // payload - minimum
  double latency_margin_us = 0.0;  // budget - total

  std::string summary() const;
};

EtsiReport etsi_check(const LatencyBreakdown& breakdown, int payload_bytes, int min_payload_bytes = 200,
                      double budget_us = 100000.0);

// Per-transmitter outcome of one trial.
struct TransmitterOutcome {
  int packets = 0;
  int packets_ok = 0;       // found, every cluster CRC passed
  std::size_t bits = 0;
  std::size_t bit_errors = 0;
  double best_iou = 0.0;    // best detected region against the swept footprint
};

struct TrialResult {
  std::uint64_t seed = 0;
  std::vector<TransmitterOutcome> transmitters;
  int regions_detected = 0;
  std::size_t events_generated = 0;
  std::size_t events_delivered = 0;
  std::size_t peak_events_per_ms = 0;
  int packets_per_transmitter = 0;
  double wall_t_proc_us = 0.0;  // critical path over the region workers
  std::string error;

  int packets() const;
  int packet_errors() const;
  std::size_t bits() const;
  std::size_t bit_errors() const;
  double min_iou() const;
};

// Applies a sweep value to a copy of the configuration.
ExperimentConfig apply_sweep_value(const ExperimentConfig& config, double value);

// Random payloads, per transmitter, drawn from the trial seed.
std::vector<std::vector<Packet>> make_payloads(const ExperimentConfig& config, std::uint64_t trial_seed);

struct Capture {
  ScenarioConfig scenario;  // duration fitted to the transmissions
  std::vector<TransmitterSignal> signals;
  SimulationResult events;
};

// Transmitter i starts transmitter_stagger_us * i after the first, which
// starts at 1 ms.
Capture make_capture(const ExperimentConfig& config, const std::vector<std::vector<Packet>>& payloads,
                     std::uint64_t trial_seed);

// One transmit -> simulate -> cap -> receive pass; config already carries the
// sweep value.
TrialResult run_trial(const ExperimentConfig& config, std::uint64_t trial_seed);

struct MetricsRow {
  std::string variable;
  double value = 0.0;
  int trials = 0;
  int failed_trials = 0;
  int packets = 0;
  int packet_errors = 0;
  std::size_t bits = 0;
  std::size_t bit_errors = 0;
  double ber = 0.0;
  double per = 0.0;
  double regions_mean = 0.0;
  double min_iou = 0.0;
  double events_generated_mean = 0.0;
  double events_delivered_mean = 0.0;
  LatencyBreakdown latency_model;  // with the constant t_proc
  LatencyBreakdown wall_mean;      // with measured t_proc
  LatencyBreakdown wall_max;
  std::vector<TrialResult> trial_results;
};

std::uint64_t trial_seed(std::uint64_t base_seed, std::size_t point_index, int trial);

MetricsRow run_point(const ExperimentConfig& config, double sweep_value, std::uint64_t point_seed);

std::vector<MetricsRow> run_sweep(const ExperimentConfig& config);

// Columns prefixed with "wall_" depend on the machine and are left out of
// determinism comparisons.
std::vector<std::string> metrics_csv_columns();
void write_metrics_csv(std::ostream& out, const std::vector<MetricsRow>& rows);
std::string deterministic_csv(const std::string& csv);
nlohmann::json sweep_summary(const ExperimentConfig& config, const std::vector<MetricsRow>& rows);

// Minimal bipolar comparator: positive events drive detection, sync and
// weights as usual, and each bit is read from the polarity of its mid-bit
// transition.
Reception receive_bipolar(std::span<const Event> events, int width, int height,
                          const ReceiverConfig& config);

ExperimentConfig load_experiment_config(const std::string& path);

}  // namespace evlc
