#pragma once

#include <random>
#include <vector>

#include "evlc/sensor.hpp"
#include "evlc/transmitter.hpp"

namespace evlc::testing {

struct Scene {
  ScenarioConfig scenario;
  std::vector<TransmitterSignal> signals;
  std::vector<std::vector<Packet>> packets;  // per transmitter
};

inline Packet random_packet(const FrameLayout& layout, const PolarCodeConfig& fec, std::mt19937_64& rng) {
  Packet p;
  p.payload.resize(static_cast<std::size_t>(packet_capacity_bytes(layout, fec)));
  for (auto& b : p.payload) b = static_cast<std::uint8_t>(rng());
  return p;
}

// Transmitters side by side, 1.5 m apart laterally, each starting 3 ms after
// the previous one.
inline Scene make_scene(int transmitters, int packets_each, double speed_kmh, std::uint64_t seed,
                        const FrameLayout& layout = {}, const PolarCodeConfig& fec = {}) {
  Scene s;
  std::mt19937_64 rng(seed);
  s.scenario.vehicle_speed_kmh = speed_kmh;
  s.scenario.transmitters.clear();
  for (int i = 0; i < transmitters; ++i) {
    Transmitter tx;
    tx.lateral_offset_m = 1.5 * i;
    s.scenario.transmitters.push_back(tx);
    std::vector<Packet> ps;
    for (int k = 0; k < packets_each; ++k) ps.push_back(random_packet(layout, fec, rng));
    s.signals.push_back(build_signal(ps, layout, fec, 1000 + 3000 * i));
    s.packets.push_back(std::move(ps));
  }
  s.scenario.duration_us = s.signals.back().end_us() + 2000;
  return s;
}

inline SensorConfig noiseless_sensor() {
  SensorConfig sensor;
  sensor.jitter_sigma_us = 0;
  sensor.background_noise_rate = 0;
  return sensor;
}

}  // namespace evlc::testing
