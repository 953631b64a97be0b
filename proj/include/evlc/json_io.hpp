#pragma once

#include <json.hpp>

#include "evlc/frame.hpp"
#include "evlc/harness.hpp"
#include "evlc/polar.hpp"
#include "evlc/receiver.hpp"
#include "evlc/sensor.hpp"

namespace evlc {

void to_json(nlohmann::json& j, const FrameLayout& layout);
void from_json(const nlohmann::json& j, FrameLayout& layout);
void to_json(nlohmann::json& j, const CrcSpec& crc);
void from_json(const nlohmann::json& j, CrcSpec& crc);
void to_json(nlohmann::json& j, const PolarCodeConfig& config);
void from_json(const nlohmann::json& j, PolarCodeConfig& config);
void to_json(nlohmann::json& j, const Transmitter& tx);
void from_json(const nlohmann::json& j, Transmitter& tx);
void to_json(nlohmann::json& j, const ScenarioConfig& scenario);
void from_json(const nlohmann::json& j, ScenarioConfig& scenario);
// An infinite bandwidth cap is written as null.
void to_json(nlohmann::json& j, const SensorConfig& sensor);
void from_json(const nlohmann::json& j, SensorConfig& sensor);
void to_json(nlohmann::json& j, const RegionParams& params);
void from_json(const nlohmann::json& j, RegionParams& params);
void to_json(nlohmann::json& j, const DemapOptions& options);
void from_json(const nlohmann::json& j, DemapOptions& options);
void to_json(nlohmann::json& j, const SweepSpec& sweep);
void from_json(const nlohmann::json& j, SweepSpec& sweep);
void to_json(nlohmann::json& j, const ExperimentConfig& config);
void from_json(const nlohmann::json& j, ExperimentConfig& config);

}  // namespace evlc
