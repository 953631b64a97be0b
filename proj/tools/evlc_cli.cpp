#include <CLI11.hpp>

#include <bit>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "evlc/harness.hpp"
#include "evlc/json_io.hpp"

using namespace evlc;

namespace {

ExperimentConfig config_or_default(const std::string& path) {
  return path.empty() ? ExperimentConfig{} : load_experiment_config(path);
}

std::string hex(std::span<const std::uint8_t> bytes) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string s;
  for (auto b : bytes) {
    s.push_back(kDigits[b >> 4]);
    s.push_back(kDigits[b & 0xf]);
  }
  return s;
}

std::vector<std::uint8_t> unhex(const std::string& s) {
  if (s.size() % 2) throw std::runtime_error("odd-length hex payload");
  std::vector<std::uint8_t> out;
  for (std::size_t i = 0; i < s.size(); i += 2) {
    out.push_back(static_cast<std::uint8_t>(std::stoul(s.substr(i, 2), nullptr, 16)));
  }
  return out;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << text;
  if (!out) throw std::runtime_error("failed writing " + path);
}

int cmd_simulate(const std::string& config_path, const std::string& out_path, const std::string& truth_path,
                 std::uint64_t seed, bool has_seed, const std::optional<double>& value) {
  auto config = config_or_default(config_path);
  if (value) config = apply_sweep_value(config, *value);
  if (!has_seed) seed = config.seed;
  const auto payloads = make_payloads(config, seed);
  const auto capture = make_capture(config, payloads, seed);
  write_events_csv(out_path, capture.events.delivered);

  nlohmann::json truth;
  truth["width"] = capture.scenario.width;
  truth["height"] = capture.scenario.height;
  truth["events_generated"] = capture.events.generated.size();
  truth["events_delivered"] = capture.events.delivered.size();
  auto& txs = truth["transmitters"];
  txs = nlohmann::json::array();
  for (std::size_t i = 0; i < payloads.size(); ++i) {
    nlohmann::json tx;
    const auto fp = swept_footprint(capture.scenario, capture.scenario.transmitters[i],
                                    capture.signals[i].start_us, capture.signals[i].end_us());
    tx["footprint"] = {fp.x_min, fp.y_min, fp.x_max, fp.y_max};
    tx["packets"] = nlohmann::json::array();
    for (std::size_t k = 0; k < payloads[i].size(); ++k) {
      const auto t_sync = frame_start_us(config.layout, capture.signals[i].start_us, static_cast<int>(k)) +
                          config.layout.last_sync_slot() * config.layout.chip_period_us;
      tx["packets"].push_back({{"payload_hex", hex(payloads[i][k].payload)}, {"t_sync_us", t_sync}});
    }
    txs.push_back(tx);
  }
  if (!truth_path.empty()) write_text(truth_path, truth.dump(2) + "\n");
  std::cerr << capture.events.delivered.size() << " events written to " << out_path << "\n";
  return 0;
}

int cmd_decode(const std::string& events_path, const std::string& config_path, const std::string& truth_path,
               const std::string& out_path, int width, int height, bool bipolar) {
  const auto config = config_or_default(config_path);
  if (width <= 0) width = config.scenario.width;
  if (height <= 0) height = config.scenario.height;
  const auto events = read_events_csv(events_path);

  std::vector<std::vector<std::uint8_t>> truth;
  if (!truth_path.empty()) {
    std::ifstream in(truth_path);
    if (!in) throw std::runtime_error("cannot open " + truth_path);
    const auto j = nlohmann::json::parse(in);
    for (const auto& tx : j.at("transmitters")) {
      for (const auto& p : tx.at("packets")) truth.push_back(unhex(p.at("payload_hex").get<std::string>()));
    }
  }

  const auto rc = config.receiver();
  const auto rx = bipolar ? receive_bipolar(events, width, height, rc) : receive(events, width, height, rc);
  std::ostringstream lines;
  for (const auto& region : rx.per_region) {
    if (!region.error.empty()) {
      std::cerr << "region [" << region.region.x_min << "," << region.region.y_min << "," << region.region.x_max
                << "," << region.region.y_max << "]: " << region.error << "\n";
    }
    for (auto packet : region.packets) {
      if (!truth.empty()) {
        std::size_t best = std::numeric_limits<std::size_t>::max();
        for (const auto& t : truth) {
          std::size_t errors = 0;
          for (std::size_t i = 0; i < t.size(); ++i) {
            const std::uint8_t got = i < packet.payload.size() ? packet.payload[i] : 0;
            errors += static_cast<std::size_t>(std::popcount(static_cast<unsigned>(t[i] ^ got)));
          }
          best = std::min(best, errors);
        }
        packet.bit_errors_vs_truth = best;
      }
      lines << packet_to_json_line(packet) << "\n";
    }
  }
  if (out_path.empty()) {
    std::cout << lines.str();
  } else {
    write_text(out_path, lines.str());
  }
  std::cerr << rx.regions.size() << " region(s) detected\n";
  return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& csv_path, const std::string& summary_path) {
  const auto config = load_experiment_config(config_path);
  const auto rows = run_sweep(config);
  std::ostringstream csv;
  write_metrics_csv(csv, rows);
  if (csv_path.empty()) {
    std::cout << csv.str();
  } else {
    write_text(csv_path, csv.str());
  }
  if (!summary_path.empty()) write_text(summary_path, sweep_summary(config, rows).dump(2) + "\n");
  return 0;
}

nlohmann::json breakdown_json(const LatencyBreakdown& b) {
  return {{"t_cmd_us", b.t_cmd_us},
          {"t_blink_us", b.t_blink_us},
          {"t_transfer_us", b.t_transfer_us},
          {"t_proc_us", b.t_proc_us},
          {"total_us", b.total_us}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Event-camera LED bar link: simulator, receiver and experiment harness"};
  app.require_subcommand(1);

  std::string config_path, out_path, truth_path, events_path, csv_path, summary_path;
  std::uint64_t seed = 0;
  int width = 0, height = 0;
  bool bipolar = false;

  auto* sim = app.add_subcommand("simulate", "Render a scenario and write its event stream as CSV");
  sim->add_option("-c,--config", config_path, "Experiment config (JSON)");
  sim->add_option("-o,--out", out_path, "Event CSV output")->required();
  sim->add_option("--truth", truth_path, "Write transmitted payloads and footprints (JSON)");
  auto* seed_opt = sim->add_option("--seed", seed, "Trial seed (defaults to the config seed)");
  std::optional<double> value;
  sim->add_option("--value", value, "Apply one value of the config's sweep variable");

  auto* dec = app.add_subcommand("decode", "Decode an event CSV into packet JSON lines");
  dec->add_option("-e,--events", events_path, "Event CSV input")->required();
  dec->add_option("-c,--config", config_path, "Experiment config (JSON) for layout and receiver settings");
  dec->add_option("--truth", truth_path, "Truth JSON from simulate, fills bit_errors_vs_truth");
  dec->add_option("-o,--out", out_path, "Output file (default stdout)");
  dec->add_option("--width", width, "Sensor width (default from config)");
  dec->add_option("--height", height, "Sensor height (default from config)");
  dec->add_flag("--bipolar", bipolar, "Use the bipolar comparator");

  auto* swp = app.add_subcommand("sweep", "Run a parameter sweep and write metrics CSV");
  swp->add_option("-c,--config", config_path, "Experiment config (JSON)")->required();
  swp->add_option("-o,--csv", csv_path, "Metrics CSV output (default stdout)");
  swp->add_option("-s,--summary", summary_path, "JSON summary output");

  int packets = 1;
  int gap = -1;
  double t_cmd = 1000, t_transfer = 2000, t_proc = 13000;
  auto* lat = app.add_subcommand("latency", "Evaluate the latency model");
  lat->add_option("-n,--packets", packets, "Packets per message")->capture_default_str();
  lat->add_option("--gap", gap, "Inter-packet gap in chips (default from layout)");
  lat->add_option("--t-cmd", t_cmd, "Command time, us")->capture_default_str();
  lat->add_option("--t-transfer", t_transfer, "Camera-to-host transfer time, us")->capture_default_str();
  lat->add_option("--t-proc", t_proc, "Processing time, us")->capture_default_str();

  int payload_bytes = -1;
  double total_us = -1;
  bool strict = false;
  auto* etsi = app.add_subcommand("etsi-check", "Check a message against the 100 ms / 200 byte budget");
  etsi->add_option("-n,--packets", packets, "Packets per message")->capture_default_str();
  etsi->add_option("--gap", gap, "Inter-packet gap in chips (default from layout)");
  etsi->add_option("--t-cmd", t_cmd, "Command time, us")->capture_default_str();
  etsi->add_option("--t-transfer", t_transfer, "Camera-to-host transfer time, us")->capture_default_str();
  etsi->add_option("--t-proc", t_proc, "Processing time, us")->capture_default_str();
  etsi->add_option("--total-us", total_us, "Use this total latency instead of the model");
  etsi->add_option("--payload-bytes", payload_bytes, "Payload size (default: packets x bytes on air)");
  etsi->add_flag("--strict", strict, "Exit with status 1 when the check fails");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) return cmd_simulate(config_path, out_path, truth_path, seed, seed_opt->count() > 0, value);
    if (dec->parsed()) return cmd_decode(events_path, config_path, truth_path, out_path, width, height, bipolar);
    if (swp->parsed()) return cmd_sweep(config_path, csv_path, summary_path);

    FrameLayout layout;
    PolarCodeConfig fec;
    if (gap >= 0) layout.inter_packet_gap_slots = gap;
    layout.validate();
    const auto breakdown = latency_model(packets, layout, t_cmd, t_transfer, t_proc);
    if (lat->parsed()) {
      auto j = breakdown_json(breakdown);
      j["packets"] = packets;
      j["payload_bytes_on_air"] = packets * frame_payload_bytes(layout, fec);
      std::cout << j.dump(2) << "\n";
      return 0;
    }
    if (etsi->parsed()) {
      LatencyBreakdown b = breakdown;
      if (total_us >= 0) b.total_us = total_us;
      if (payload_bytes < 0) payload_bytes = packets * frame_payload_bytes(layout, fec);
      const auto report = etsi_check(b, payload_bytes);
      std::cout << report.summary() << "\n";
      return (strict && !report.pass) ? 1 : 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
