#include "evlc/json_io.hpp"

#include <cmath>
#include <limits>

namespace evlc {

namespace {

// Missing keys keep their defaults.
template <typename T>
void read(const nlohmann::json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) it->get_to(out);
}

}  // namespace

void to_json(nlohmann::json& j, const FrameLayout& layout) {
  j = {{"chip_period_us", layout.chip_period_us},
       {"sync_pulse_slots", layout.sync_pulse_slots},
       {"pilot_chips", layout.pilot_chips},
       {"pilot_positions", layout.pilot_positions},
       {"data_chips_per_cluster", layout.data_chips_per_cluster},
       {"cluster_count", layout.cluster_count},
       {"inter_packet_gap_slots", layout.inter_packet_gap_slots}};
}

void from_json(const nlohmann::json& j, FrameLayout& layout) {
  read(j, "chip_period_us", layout.chip_period_us);
  read(j, "sync_pulse_slots", layout.sync_pulse_slots);
  read(j, "pilot_chips", layout.pilot_chips);
  read(j, "pilot_positions", layout.pilot_positions);
  read(j, "data_chips_per_cluster", layout.data_chips_per_cluster);
  read(j, "cluster_count", layout.cluster_count);
  read(j, "inter_packet_gap_slots", layout.inter_packet_gap_slots);
  layout.validate();
}

void to_json(nlohmann::json& j, const CrcSpec& crc) {
  j = {{"width", crc.width}, {"polynomial", crc.polynomial}};
}

void from_json(const nlohmann::json& j, CrcSpec& crc) {
  read(j, "width", crc.width);
  read(j, "polynomial", crc.polynomial);
}

void to_json(nlohmann::json& j, const PolarCodeConfig& config) {
  j = {{"block_length", config.block_length},
       {"info_length", config.info_length},
       {"list_size", config.list_size},
       {"crc", config.crc},
       {"frozen_set", config.frozen_set}};
}

void from_json(const nlohmann::json& j, PolarCodeConfig& config) {
  read(j, "block_length", config.block_length);
  read(j, "info_length", config.info_length);
  read(j, "list_size", config.list_size);
  read(j, "crc", config.crc);
  read(j, "frozen_set", config.frozen_set);
  config.validate();
}

void to_json(nlohmann::json& j, const Transmitter& tx) {
  j = {{"longitudinal_m", tx.longitudinal_m}, {"lateral_offset_m", tx.lateral_offset_m},
       {"height_m", tx.height_m},             {"bar_height_m", tx.bar_height_m},
       {"bar_width_m", tx.bar_width_m},       {"cluster_count", tx.cluster_count},
       {"leds_per_cluster", tx.leds_per_cluster}};
}

void from_json(const nlohmann::json& j, Transmitter& tx) {
  read(j, "longitudinal_m", tx.longitudinal_m);
  read(j, "lateral_offset_m", tx.lateral_offset_m);
  read(j, "height_m", tx.height_m);
  read(j, "bar_height_m", tx.bar_height_m);
  read(j, "bar_width_m", tx.bar_width_m);
  read(j, "cluster_count", tx.cluster_count);
  read(j, "leds_per_cluster", tx.leds_per_cluster);
}

void to_json(nlohmann::json& j, const ScenarioConfig& s) {
  j = {{"width", s.width},
       {"height", s.height},
       {"transmitters", s.transmitters},
       {"vehicle_speed_kmh", s.vehicle_speed_kmh},
       {"lateral_distance_m", s.lateral_distance_m},
       {"focal_px", s.focal_px},
       {"camera_yaw_deg", s.camera_yaw_deg},
       {"duration_us", s.duration_us},
       {"ambient_log_intensity", s.ambient_log_intensity},
       {"led_log_contrast", s.led_log_contrast},
       {"render_step_us", s.render_step_us}};
}

void from_json(const nlohmann::json& j, ScenarioConfig& s) {
  read(j, "width", s.width);
  read(j, "height", s.height);
  read(j, "transmitters", s.transmitters);
  read(j, "vehicle_speed_kmh", s.vehicle_speed_kmh);
  read(j, "lateral_distance_m", s.lateral_distance_m);
  read(j, "focal_px", s.focal_px);
  read(j, "camera_yaw_deg", s.camera_yaw_deg);
  read(j, "duration_us", s.duration_us);
  read(j, "ambient_log_intensity", s.ambient_log_intensity);
  read(j, "led_log_contrast", s.led_log_contrast);
  read(j, "render_step_us", s.render_step_us);
  s.validate();
}

void to_json(nlohmann::json& j, const SensorConfig& s) {
  j = {{"contrast_threshold", s.contrast_threshold},
       {"refractory_us", s.refractory_us},
       {"jitter_sigma_us", s.jitter_sigma_us},
       {"background_noise_rate", s.background_noise_rate},
       {"bandwidth_cap", nullptr},
       {"polarity_mode", s.polarity_mode == PolarityMode::kBipolar ? "bipolar" : "positive_only"}};
  if (std::isfinite(s.bandwidth_cap)) j["bandwidth_cap"] = s.bandwidth_cap;
}

void from_json(const nlohmann::json& j, SensorConfig& s) {
  read(j, "contrast_threshold", s.contrast_threshold);
  read(j, "refractory_us", s.refractory_us);
  read(j, "jitter_sigma_us", s.jitter_sigma_us);
  read(j, "background_noise_rate", s.background_noise_rate);
  if (auto it = j.find("bandwidth_cap"); it != j.end()) {
    s.bandwidth_cap = it->is_null() ? std::numeric_limits<double>::infinity() : it->get<double>();
  }
  if (auto it = j.find("polarity_mode"); it != j.end()) {
    const auto mode = it->get<std::string>();
    if (mode == "bipolar") {
      s.polarity_mode = PolarityMode::kBipolar;
    } else if (mode == "positive_only") {
      s.polarity_mode = PolarityMode::kPositiveOnly;
    } else {
      throw std::invalid_argument("unknown polarity_mode '" + mode + "'");
    }
  }
  s.validate();
}

void to_json(nlohmann::json& j, const RegionParams& p) {
  j = {{"sigma", p.sigma},
       {"count_threshold", p.count_threshold},
       {"merge_gap_px", p.merge_gap_px},
       {"min_area", p.min_area},
       {"max_area", p.max_area},
       {"hot_pixel_count", p.hot_pixel_count},
       {"min_hot_pixels", p.min_hot_pixels},
       {"edge_trim_fraction", p.edge_trim_fraction}};
}

void from_json(const nlohmann::json& j, RegionParams& p) {
  read(j, "sigma", p.sigma);
  read(j, "count_threshold", p.count_threshold);
  read(j, "merge_gap_px", p.merge_gap_px);
  read(j, "min_area", p.min_area);
  read(j, "max_area", p.max_area);
  read(j, "hot_pixel_count", p.hot_pixel_count);
  read(j, "min_hot_pixels", p.min_hot_pixels);
  read(j, "edge_trim_fraction", p.edge_trim_fraction);
}

void to_json(nlohmann::json& j, const DemapOptions& o) {
  j = {{"noise_floor", o.noise_floor},
       {"reference_window_bits", o.reference_window_bits},
       {"edge_mass", o.edge_mass}};
}

void from_json(const nlohmann::json& j, DemapOptions& o) {
  read(j, "noise_floor", o.noise_floor);
  read(j, "reference_window_bits", o.reference_window_bits);
  read(j, "edge_mass", o.edge_mass);
}

void to_json(nlohmann::json& j, const SweepSpec& s) {
  j = {{"variable", to_string(s.variable)}, {"values", s.values}};
}

void from_json(const nlohmann::json& j, SweepSpec& s) {
  if (auto it = j.find("variable"); it != j.end()) s.variable = sweep_variable_from_string(it->get<std::string>());
  read(j, "values", s.values);
}

void to_json(nlohmann::json& j, const ExperimentConfig& c) {
  j = {{"scenario", c.scenario},
       {"sensor", c.sensor},
       {"layout", c.layout},
       {"fec", c.fec},
       {"regions", c.regions},
       {"demap", c.demap},
       {"sweep", c.sweep},
       {"trials_per_point", c.trials_per_point},
       {"seed", c.seed},
       {"packets_per_transmitter", c.packets_per_transmitter},
       {"transmitter_spacing_m", c.transmitter_spacing_m},
       {"transmitter_stagger_us", c.transmitter_stagger_us},
       {"t_cmd_us", c.t_cmd_us},
       {"t_transfer_us", c.t_transfer_us},
       {"t_proc_model_us", c.t_proc_model_us},
       {"bipolar_baseline", c.bipolar_baseline},
       {"parallel_regions", c.parallel_regions}};
}

void from_json(const nlohmann::json& j, ExperimentConfig& c) {
  read(j, "scenario", c.scenario);
  read(j, "sensor", c.sensor);
  read(j, "layout", c.layout);
  read(j, "fec", c.fec);
  read(j, "regions", c.regions);
  read(j, "demap", c.demap);
  read(j, "sweep", c.sweep);
  read(j, "trials_per_point", c.trials_per_point);
  read(j, "seed", c.seed);
  read(j, "packets_per_transmitter", c.packets_per_transmitter);
  read(j, "transmitter_spacing_m", c.transmitter_spacing_m);
  read(j, "transmitter_stagger_us", c.transmitter_stagger_us);
  read(j, "t_cmd_us", c.t_cmd_us);
  read(j, "t_transfer_us", c.t_transfer_us);
  read(j, "t_proc_model_us", c.t_proc_model_us);
  read(j, "bipolar_baseline", c.bipolar_baseline);
  read(j, "parallel_regions", c.parallel_regions);
  c.validate();
}

std::string layout_to_json(const FrameLayout& layout) { return nlohmann::json(layout).dump(2); }

FrameLayout layout_from_json(const std::string& text) {
  return nlohmann::json::parse(text).get<FrameLayout>();
}

}  // namespace evlc
