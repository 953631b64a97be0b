#include <doctest.h>

#include <cmath>
#include <random>

#include "evlc/receiver.hpp"
#include "scene.hpp"

using namespace evlc;
using evlc::testing::make_scene;
using evlc::testing::noiseless_sensor;

namespace {

ShiftRecord record_from_counts(int w, int h, const std::vector<PixelRect>& blocks, std::uint32_t count) {
  ShiftRecord rec;
  rec.width = w;
  rec.height = h;
  rec.last_timestamp.assign(static_cast<std::size_t>(w) * h, ShiftRecord::kNoEvent);
  rec.counts.assign(static_cast<std::size_t>(w) * h, 0);
  for (const auto& b : blocks) {
    for (int y = b.y_min; y <= b.y_max; ++y) {
      for (int x = b.x_min; x <= b.x_max; ++x) rec.counts[static_cast<std::size_t>(y) * w + x] = count;
    }
  }
  return rec;
}

RegionBox whole(int w, int h) { return {0, 0, w - 1, h - 1, 0.0}; }

// Final sync edge of frame k of a signal.
double sync_edge_us(const FrameLayout& layout, const TransmitterSignal& sig, int k) {
  return static_cast<double>(frame_start_us(layout, sig.start_us, k) +
                             layout.last_sync_slot() * layout.chip_period_us);
}

RegionBox footprint_region(const ScenarioConfig& sc, int tx) {
  const auto px = project_transmitter(sc, sc.transmitters[tx], 0).pixels;
  return {px.x_min, px.y_min, px.x_max, px.y_max, 0.0};
}

}  // namespace

TEST_SUITE("rx_pipeline") {

TEST_CASE("sync events at 0, 5T, 9T, 12T record at the final edge") {
  const std::vector<Event> ev{{0, 1, 1, 1}, {500, 1, 1, 1}, {900, 1, 1, 1}, {1200, 1, 1, 1}};
  const auto rec = time_shift_record(ev, 100, 25, 4, 4);
  REQUIRE(rec.aligned.size() == 3);
  for (const auto& a : rec.aligned) CHECK(a.t_aligned_us == 1200);
  CHECK(rec.count_at(1, 1) == 3);
  CHECK(rec.last_timestamp[1 * 4 + 1] == 1200);
}

TEST_CASE("shift table follows the layout") {
  FrameLayout layout;
  CHECK(sync_shift_table(layout) == std::vector<std::pair<int, int>>{{5, 7}, {4, 3}, {3, 0}});
}

TEST_CASE("empty stream gives an empty record") {
  const auto rec = time_shift_record(std::vector<Event>{}, 100, 25, 8, 8);
  CHECK(rec.aligned.empty());
  CHECK(std::all_of(rec.counts.begin(), rec.counts.end(), [](auto c) { return c == 0; }));
  CHECK(detect_regions(rec).empty());
  CHECK_THROWS_AS(time_shift_record(std::vector<Event>{}, 100, 50, 8, 8), std::invalid_argument);
}

TEST_CASE("negative events are ignored by the recorder") {
  const std::vector<Event> ev{{0, 0, 0, 1}, {500, 0, 0, -1}, {900, 0, 0, 1}};
  const auto rec = time_shift_record(ev, 100, 25, 1, 1);
  CHECK(rec.aligned.empty());
}

TEST_CASE("noise intervals are accidentally aligned at the expected rate") {
  // Geometric inter-event gaps: P(gap in [a, b]) = q^(a-1) - q^b.
  const double p = 1.0 / 300.0;
  const double q = 1.0 - p;
  const std::int64_t T = 100, tol = 25;
  double expected_fraction = 0.0;
  for (int k : {3, 4, 5}) expected_fraction += std::pow(q, k * T - tol - 1) - std::pow(q, k * T + tol);

  std::mt19937_64 rng(4);
  std::geometric_distribution<int> gap(p);
  const int pixels = 100, per_pixel = 2000;
  std::vector<Event> ev;
  for (int px = 0; px < pixels; ++px) {
    std::int64_t t = 0;
    for (int i = 0; i < per_pixel; ++i) {
      t += gap(rng) + 1;
      ev.push_back({t, px, 0, 1});
    }
  }
  std::sort(ev.begin(), ev.end(), event_before);
  const auto rec = time_shift_record(ev, T, tol, pixels, 1);
  const double n = pixels * (per_pixel - 1);
  const double sd = std::sqrt(n * expected_fraction * (1 - expected_fraction));
  CHECK(std::abs(static_cast<double>(rec.aligned.size()) - n * expected_fraction) < 4 * sd);
}

TEST_CASE("zero-jitter frames align exactly; default jitter stays within 3 sigma") {
  auto scene = make_scene(1, 1, 0.0, 21);
  FrameLayout layout;
  const double edge = sync_edge_us(layout, scene.signals[0], 0);
  const auto clean = simulate(scene.scenario, scene.signals, noiseless_sensor(), 1).delivered;
  const auto rec = time_shift_record(clean, layout, 25, scene.scenario.width, scene.scenario.height);
  std::size_t at_edge = 0;
  for (const auto& a : rec.aligned) at_edge += (a.t_aligned_us == static_cast<std::int64_t>(edge));
  const auto region = footprint_region(scene.scenario, 0);
  CHECK(at_edge == 3 * static_cast<std::size_t>(region.rect().area()));

  auto sensor = noiseless_sensor();
  sensor.jitter_sigma_us = 20.0;
  const auto jittered = simulate(scene.scenario, scene.signals, sensor, 1).delivered;
  const auto rj = time_shift_record(jittered, layout, 25, scene.scenario.width, scene.scenario.height);
  std::size_t near = 0, within = 0;
  for (const auto& a : rj.aligned) {
    const double err = std::abs(static_cast<double>(a.t_aligned_us) - edge);
    if (err > 2 * 100) continue;
    ++near;
    within += err <= 3 * 20.0;
  }
  CHECK(near > static_cast<std::size_t>(region.rect().area()));
  CHECK(static_cast<double>(within) >= 0.997 * static_cast<double>(near));
}

TEST_CASE("regions split by a 2-pixel gap merge into one box") {
  const auto rec = record_from_counts(64, 64, {{10, 10, 14, 25}, {17, 10, 21, 25}}, 5);
  const auto regions = detect_regions(rec);
  REQUIRE(regions.size() == 1);
  CHECK(regions[0].rect().x_min == 10);
  CHECK(regions[0].rect().x_max == 21);
  CHECK(regions[0].rect().y_min == 10);
  CHECK(regions[0].rect().y_max == 25);
}

TEST_CASE("distant regions stay separate and sort by score") {
  const auto rec = record_from_counts(96, 64, {{5, 5, 8, 30}, {60, 5, 70, 40}}, 4);
  const auto regions = detect_regions(rec);
  REQUIRE(regions.size() == 2);
  CHECK(regions[0].x_min == 60);
  CHECK(regions[0].score > regions[1].score);
}

TEST_CASE("tiny specks are filtered out") {
  const auto rec = record_from_counts(64, 64, {{10, 10, 11, 11}}, 9);
  CHECK(detect_regions(rec).empty());
}

TEST_CASE("merge rule on rectangles") {
  const auto merged = merge_rectangles({{0, 0, 4, 4}, {13, 0, 15, 4}, {30, 0, 32, 4}}, 8);
  REQUIRE(merged.size() == 2);
  CHECK(merged[0].x_max == 15);
  CHECK(merge_rectangles({}, 8).empty());
}

TEST_CASE("synchronize picks the largest bin, earliest on ties") {
  ShiftRecord rec = record_from_counts(4, 4, {}, 0);
  for (int i = 0; i < 10; ++i) rec.aligned.push_back({1210, 0, 0});
  for (int i = 0; i < 10; ++i) rec.aligned.push_back({5230, 1, 0});
  for (int i = 0; i < 3; ++i) rec.aligned.push_back({800, 2, 0});
  CHECK(synchronize(rec, whole(4, 4), 100, 8) == 1225);
  rec.aligned.push_back({5210, 1, 1});
  CHECK(synchronize(rec, whole(4, 4), 100, 8) == 5225);
  CHECK(find_sync_peaks(rec, whole(4, 4), 100, 8, 2000) == std::vector<std::int64_t>{1225, 5225});
  CHECK_THROWS_AS(synchronize(rec, whole(4, 4), 100, 20), NoPeakError);
}

TEST_CASE("noise only has no sync peak") {
  SensorConfig sensor;
  sensor.background_noise_rate = 5.0;
  const auto ev = generate_events({}, sensor, {200, 100, 40000}, 3);
  const auto rec = time_shift_record(ev, 100, 25, 200, 100);
  CHECK_THROWS_AS(synchronize(rec, whole(200, 100), 100, 8), NoPeakError);
}

TEST_CASE("noiseless frame synchronizes within half a chip") {
  auto scene = make_scene(1, 1, 0.0, 5);
  FrameLayout layout;
  auto sensor = noiseless_sensor();
  sensor.jitter_sigma_us = 20;
  const auto ev = simulate(scene.scenario, scene.signals, sensor, 5).delivered;
  const auto rec = time_shift_record(ev, layout, 25, scene.scenario.width, scene.scenario.height);
  const auto regions = detect_regions(rec);
  REQUIRE(regions.size() == 1);
  const auto t = synchronize(rec, regions[0], layout.chip_period_us);
  CHECK(std::abs(t - sync_edge_us(layout, scene.signals[0], 0)) <= 50);
}

TEST_CASE("a peak on the first pilot edge is moved back to the final sync edge") {
  auto scene = make_scene(1, 1, 0.0, 6);
  FrameLayout layout;
  const auto ev = simulate(scene.scenario, scene.signals, noiseless_sensor(), 6).delivered;
  const auto region = footprint_region(scene.scenario, 0);
  const double edge = sync_edge_us(layout, scene.signals[0], 0);
  CHECK(resolve_sync_alias(ev, region, edge, layout) == edge);
  CHECK(resolve_sync_alias(ev, region, edge + 3 * layout.chip_period_us, layout) == edge);

  // Drop the first three sync pulses: the 12 -> 15 interval now dominates.
  std::vector<Event> thinned;
  for (const auto& e : ev) {
    if (e.t_us < static_cast<std::int64_t>(edge) - 50) continue;
    thinned.push_back(e);
  }
  const auto rec = time_shift_record(thinned, layout, 25, scene.scenario.width, scene.scenario.height);
  const auto peak = synchronize(rec, region, layout.chip_period_us);
  CHECK(std::abs(peak - (edge + 3 * layout.chip_period_us)) <= 50);
  CHECK(resolve_sync_alias(ev, region, refine_sync(rec, region, peak, layout.chip_period_us), layout) ==
        doctest::Approx(edge).epsilon(1e-6));
}

TEST_CASE("pixel weights count matched preamble edges") {
  FrameLayout layout;
  const RegionBox region{0, 0, 3, 0, 0.0};
  const double t_sync = 5000;
  std::vector<Event> ev;
  for (int s : layout.known_edge_slots()) {
    const auto t = static_cast<std::int64_t>(t_sync) + (s - layout.last_sync_slot()) * 100;
    ev.push_back({t, 0, 0, 1});           // every edge
    ev.push_back({t + 30, 2, 0, 1});      // every edge, late but inside T/2
    if (s >= layout.last_sync_slot()) ev.push_back({t, 3, 0, 1});
  }
  // Spurious events between edges on pixel 0.
  for (std::int64_t t : {3960, 4170, 4420}) ev.push_back({t, 0, 0, 1});
  std::sort(ev.begin(), ev.end(), event_before);
  const auto w = pixel_weights(ev, region, t_sync, layout);
  const auto edges = static_cast<double>(layout.known_edge_slots().size());
  CHECK(w.at(0, 0) == 1.0);
  CHECK(w.at(1, 0) == 0.0);  // dead pixel
  CHECK(w.at(2, 0) == 1.0);
  CHECK(w.at(3, 0) == doctest::Approx(2.0 / edges));
  CHECK(w.at(9, 9) == 0.0);
}

TEST_CASE("noise pixels get low weights") {
  auto scene = make_scene(1, 1, 0.0, 6);
  SensorConfig sensor;
  sensor.background_noise_rate = 200.0;
  const auto ev = simulate(scene.scenario, scene.signals, sensor, 6).delivered;
  const RegionBox noise_box{100, 100, 199, 199, 0.0};
  FrameLayout layout;
  const auto w = pixel_weights(ev, noise_box, sync_edge_us(layout, scene.signals[0], 0), layout);
  double sum = 0;
  for (double x : w.weights) {
    CHECK((x >= 0.0 && x <= 1.0));
    sum += x;
  }
  CHECK(sum / static_cast<double>(w.weights.size()) < 0.3);
}

TEST_CASE("noiseless observations follow the expected edge pattern") {
  auto scene = make_scene(1, 1, 0.0, 7);
  // Side view with an 80-row bar: every band is exactly 5 pixel rows.
  scene.scenario.camera_yaw_deg = 90.0;
  scene.scenario.focal_px = 700.0;
  scene.scenario.transmitters[0].longitudinal_m = 0.0;
  scene.scenario.transmitters[0].bar_height_m = 80.0 * 2.0 / 700.0;
  FrameLayout layout;
  PolarCodeConfig fec;
  const auto ev = simulate(scene.scenario, scene.signals, noiseless_sensor(), 7).delivered;
  const auto region = footprint_region(scene.scenario, 0);
  const double t_sync = sync_edge_us(layout, scene.signals[0], 0);
  const auto w = pixel_weights(ev, region, t_sync, layout);
  const auto obs = accumulate_cluster_observations(ev, region, w, t_sync, layout);
  const auto coded = encode_packet(scene.packets[0][0], layout, fec);
  REQUIRE(obs.size() == 16);
  for (int c = 0; c < 16; ++c) {
    const auto expected = expected_positive_edges(coded[c], 0);
    REQUIRE(obs[c].size() == expected.size());
    for (std::size_t i = 0; i < expected.size(); ++i) {
      CHECK((obs[c][i].boundary_weight > 0) == (expected[i] == EdgePosition::kBoundary));
      CHECK((obs[c][i].mid_weight > 0) == (expected[i] == EdgePosition::kMid));
    }
  }
  PixelWeightMap zero = w;
  std::fill(zero.weights.begin(), zero.weights.end(), 0.0);
  for (const auto& band : accumulate_cluster_observations(ev, region, zero, t_sync, layout)) {
    for (const auto& o : band) CHECK((o.boundary_weight == 0.0 && o.mid_weight == 0.0));
  }
}

TEST_CASE("chip windows are half-open and centred on chip starts") {
  FrameLayout layout;
  const RegionBox region{0, 0, 0, 15, 0.0};
  PixelWeightMap w{region, std::vector<double>(16, 1.0)};
  const double t_sync = 10000;
  const double frame0 = t_sync - layout.last_sync_slot() * 100;
  const auto slots = layout.data_slot_indices();
  // Data chip 2 starts at slot slots[2]; its window opens half a chip earlier.
  const auto open = static_cast<std::int64_t>(frame0 + slots[2] * 100 - 50);
  const std::vector<Event> ev{{open, 0, 0, 1}, {open - 1, 0, 15, 1}};
  const auto obs = accumulate_cluster_observations(ev, region, w, t_sync, layout);
  CHECK(obs[0][1].boundary_weight == 1.0);
  CHECK(obs[15][0].mid_weight == 1.0);
}

TEST_CASE("band too thin is reported") {
  FrameLayout layout;
  const RegionBox region{0, 0, 5, 9, 0.0};
  PixelWeightMap w{region, std::vector<double>(60, 1.0)};
  CHECK_THROWS_AS(accumulate_cluster_observations({}, region, w, 0.0, layout), BandTooThinError);
}

TEST_CASE("noiseless single transmitter decodes exactly") {
  auto scene = make_scene(1, 1, 0.0, 9);
  const auto ev = simulate(scene.scenario, scene.signals, noiseless_sensor(), 9).delivered;
  ReceiverConfig config;
  const auto rec = time_shift_record(ev, config.layout, config.tolerance(), scene.scenario.width,
                                     scene.scenario.height);
  const auto regions = detect_regions(rec, config.regions);
  REQUIRE(regions.size() == 1);
  const auto packet = decode_region(ev, rec, regions[0], config);
  CHECK(packet.payload == scene.packets[0][0].payload);
  CHECK(packet.crc_ok.size() == 16);
  CHECK(packet.all_crc_ok());
}

TEST_CASE("a background region does not pass CRC") {
  auto scene = make_scene(1, 1, 0.0, 10);
  SensorConfig sensor;
  sensor.background_noise_rate = 100.0;
  const auto ev = simulate(scene.scenario, scene.signals, sensor, 10).delivered;
  ReceiverConfig config;
  const RegionBox background{40, 40, 79, 119, 0.0};
  const auto packet = decode_frame(ev, background, sync_edge_us(config.layout, scene.signals[0], 0), config);
  CHECK(packet.payload.size() == 80);
  CHECK(std::none_of(packet.crc_ok.begin(), packet.crc_ok.end(), [](bool b) { return b; }));
}

TEST_CASE("heavy noise breaks some clusters but still assembles a payload") {
  auto scene = make_scene(1, 1, 0.0, 11);
  scene.scenario.width = 200;
  scene.scenario.height = 160;
  SensorConfig sensor;
  sensor.background_noise_rate = 2000.0;
  sensor.jitter_sigma_us = 45.0;
  const auto ev = simulate(scene.scenario, scene.signals, sensor, 11).delivered;
  ReceiverConfig config;
  const auto packet =
      decode_frame(ev, footprint_region(scene.scenario, 0), sync_edge_us(config.layout, scene.signals[0], 0), config);
  CHECK(packet.payload.size() == 80);
  CHECK_FALSE(packet.all_crc_ok());
}

TEST_CASE("sequential and parallel region decoding agree") {
  auto scene = make_scene(3, 2, 45.0, 12);
  const auto ev = simulate(scene.scenario, scene.signals, SensorConfig{}, 12).delivered;
  ReceiverConfig config;
  const auto par = receive(ev, scene.scenario.width, scene.scenario.height, config);
  config.parallel_regions = false;
  const auto seq = receive(ev, scene.scenario.width, scene.scenario.height, config);
  REQUIRE(par.per_region.size() == 3);
  REQUIRE(seq.per_region.size() == par.per_region.size());
  for (std::size_t r = 0; r < par.per_region.size(); ++r) {
    const auto& a = par.per_region[r];
    const auto& b = seq.per_region[r];
    CHECK(a.error == b.error);
    REQUIRE(a.packets.size() == b.packets.size());
    for (std::size_t k = 0; k < a.packets.size(); ++k) {
      CHECK(a.packets[k].payload == b.packets[k].payload);
      CHECK(a.packets[k].crc_ok == b.packets[k].crc_ok);
      CHECK(a.packets[k].t_sync_us == b.packets[k].t_sync_us);
    }
  }
}

TEST_CASE("decoded packets serialise as one JSON line") {
  DecodedPacket p;
  p.payload = {0xde, 0xad};
  p.crc_ok = {true, false};
  const auto line = packet_to_json_line(p);
  CHECK(line.find('\n') == std::string::npos);
  CHECK(line.find("\"payload_hex\":\"dead\"") != std::string::npos);
}

}  // TEST_SUITE
