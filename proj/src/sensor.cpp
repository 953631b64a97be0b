#include "evlc/sensor.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <deque>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>
#include <random>
#include <stdexcept>

namespace evlc {

bool event_before(const Event& a, const Event& b) {
  if (a.t_us != b.t_us) return a.t_us < b.t_us;
  if (a.y != b.y) return a.y < b.y;
  if (a.x != b.x) return a.x < b.x;
  return a.polarity < b.polarity;
}

void ScenarioConfig::validate() const {
  if (width <= 0 || height <= 0) throw std::invalid_argument("resolution must be positive");
  if (transmitters.empty()) throw std::invalid_argument("scenario needs at least one transmitter");
  if (vehicle_speed_kmh < 0) throw std::invalid_argument("vehicle speed must be >= 0");
  if (focal_px <= 0) throw std::invalid_argument("focal length must be positive");
  if (duration_us <= 0) throw std::invalid_argument("duration must be positive");
  if (render_step_us <= 0) throw std::invalid_argument("render step must be positive");
  for (const auto& tx : transmitters) {
    if (tx.cluster_count < 1 || tx.bar_height_m <= 0 || tx.bar_width_m <= 0) {
      throw std::invalid_argument("invalid transmitter geometry");
    }
  }
}

void SensorConfig::validate() const {
  if (!(contrast_threshold > 0)) throw std::invalid_argument("contrast threshold must be positive");
  if (refractory_us < 0 || jitter_sigma_us < 0 || background_noise_rate < 0) {
    throw std::invalid_argument("sensor parameters must be non-negative");
  }
  if (!(bandwidth_cap > 0)) throw std::invalid_argument("bandwidth cap must be positive");
}

PixelRect PixelRect::united(const PixelRect& o) const {
  if (empty()) return o;
  if (o.empty()) return *this;
  return {std::min(x_min, o.x_min), std::min(y_min, o.y_min), std::max(x_max, o.x_max),
          std::max(y_max, o.y_max)};
}

PixelRect PixelRect::intersected(const PixelRect& o) const {
  return {std::max(x_min, o.x_min), std::max(y_min, o.y_min), std::min(x_max, o.x_max),
          std::min(y_max, o.y_max)};
}

double iou(const PixelRect& a, const PixelRect& b) {
  const auto inter = a.intersected(b).area();
  const auto uni = a.area() + b.area() - inter;
  return uni > 0 ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
}

int Footprint::cluster_at(int x, int y) const {
  if (!visible || !pixels.contains(x, y)) return -1;
  const double rel = (y + 0.5 - y0) / (y1 - y0);
  const int c = static_cast<int>(std::floor(rel * cluster_count));
  return std::clamp(c, 0, cluster_count - 1);
}

std::pair<int, int> Footprint::band_rows(int cluster) const {
  const double band = (y1 - y0) / cluster_count;
  int first = static_cast<int>(std::ceil(y0 + cluster * band - 0.5));
  int last = static_cast<int>(std::ceil(y0 + (cluster + 1) * band - 0.5)) - 1;
  first = std::max(first, pixels.y_min);
  last = std::min(last, pixels.y_max);
  return {first, last};
}

namespace {

constexpr double kMinDepthM = 0.1;

struct CameraPoint {
  double depth;
  double right;  // horizontal camera coordinate
};

CameraPoint to_camera(const ScenarioConfig& scenario, const Transmitter& tx, std::int64_t t_us) {
  const double speed = scenario.vehicle_speed_kmh / 3.6;
  const double s = tx.longitudinal_m - speed * static_cast<double>(t_us) * 1e-6;
  const double d = scenario.lateral_distance_m + tx.lateral_offset_m;
  const double yaw = scenario.camera_yaw_deg * std::numbers::pi / 180.0;
  return {s * std::cos(yaw) + d * std::sin(yaw), -s * std::sin(yaw) + d * std::cos(yaw)};
}

}  // namespace

Footprint project_transmitter(const ScenarioConfig& scenario, const Transmitter& tx,
                              std::int64_t t_us) {
  Footprint fp;
  fp.cluster_count = tx.cluster_count;
  const auto cam = to_camera(scenario, tx, t_us);
  if (cam.depth < kMinDepthM) return fp;
  const double f = scenario.focal_px;
  const double cx = scenario.width / 2.0;
  const double cy = scenario.height / 2.0;
  const double u = cx + f * cam.right / cam.depth;
  const double v = cy - f * tx.height_m / cam.depth;
  const double half_w = f * tx.bar_width_m / (2.0 * cam.depth);
  const double half_h = f * tx.bar_height_m / (2.0 * cam.depth);
  fp.x0 = u - half_w;
  fp.x1 = u + half_w;
  fp.y0 = v - half_h;
  fp.y1 = v + half_h;
  PixelRect px{static_cast<int>(std::ceil(fp.x0 - 0.5)), static_cast<int>(std::ceil(fp.y0 - 0.5)),
               static_cast<int>(std::ceil(fp.x1 - 0.5)) - 1,
               static_cast<int>(std::ceil(fp.y1 - 0.5)) - 1};
  fp.pixels = px.intersected({0, 0, scenario.width - 1, scenario.height - 1});
  fp.visible = !fp.pixels.empty();
  return fp;
}

double horizontal_pixel_velocity(const ScenarioConfig& scenario, const Transmitter& tx,
                                 std::int64_t t_us) {
  const auto cam = to_camera(scenario, tx, t_us);
  if (cam.depth < kMinDepthM) return 0.0;
  const double speed = scenario.vehicle_speed_kmh / 3.6;
  const double d = scenario.lateral_distance_m + tx.lateral_offset_m;
  return scenario.focal_px * speed * d / (cam.depth * cam.depth);
}

PixelRect swept_footprint(const ScenarioConfig& scenario, const Transmitter& tx,
                          std::int64_t t0_us, std::int64_t t1_us) {
  PixelRect box;
  const std::int64_t step = scenario.vehicle_speed_kmh > 0 ? scenario.render_step_us
                                                            : std::max<std::int64_t>(1, t1_us - t0_us);
  for (std::int64_t t = t0_us;; t += step) {
    const auto fp = project_transmitter(scenario, tx, std::min(t, t1_us));
    if (fp.visible) box = box.united(fp.pixels);
    if (t >= t1_us) break;
  }
  return box;
}

std::vector<PixelTrace> render_traces(const ScenarioConfig& scenario,
                                      std::span<const TransmitterSignal> signals) {
  scenario.validate();
  if (signals.size() > scenario.transmitters.size()) {
    throw std::invalid_argument("more signals than transmitters");
  }
  const std::int64_t duration = scenario.duration_us;
  const bool moving = scenario.vehicle_speed_kmh > 0;

  struct Active {
    std::size_t tx;
    PixelRect box;
    std::vector<std::size_t> trace_index;  // row-major over box
  };
  std::vector<Active> active;
  std::vector<std::int64_t> ids;
  for (std::size_t i = 0; i < signals.size(); ++i) {
    const auto t0 = std::max<std::int64_t>(0, signals[i].start_us);
    const auto t1 = std::min(duration, signals[i].end_us());
    if (t1 <= t0) continue;
    const auto box = swept_footprint(scenario, scenario.transmitters[i], t0, t1);
    if (box.empty()) continue;
    active.push_back({i, box, {}});
    for (int y = box.y_min; y <= box.y_max; ++y) {
      for (int x = box.x_min; x <= box.x_max; ++x) {
        ids.push_back(static_cast<std::int64_t>(y) * scenario.width + x);
      }
    }
  }
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());

  std::vector<PixelTrace> traces(ids.size());
  for (std::size_t k = 0; k < ids.size(); ++k) {
    traces[k].x = static_cast<int>(ids[k] % scenario.width);
    traces[k].y = static_cast<int>(ids[k] / scenario.width);
    traces[k].initial_level = scenario.ambient_log_intensity;
  }
  for (auto& a : active) {
    a.trace_index.reserve(static_cast<std::size_t>(a.box.area()));
    for (int y = a.box.y_min; y <= a.box.y_max; ++y) {
      for (int x = a.box.x_min; x <= a.box.x_max; ++x) {
        const auto id = static_cast<std::int64_t>(y) * scenario.width + x;
        a.trace_index.push_back(
            static_cast<std::size_t>(std::lower_bound(ids.begin(), ids.end(), id) - ids.begin()));
      }
    }
  }

  // Instants where some pixel may change: chip boundaries, plus the motion grid.
  std::vector<std::int64_t> times{0};
  for (const auto& a : active) {
    const auto& sig = signals[a.tx];
    const std::size_t len = sig.cluster_chips.empty() ? 0 : sig.cluster_chips.front().size();
    for (std::size_t k = 0; k <= len; ++k) {
      const std::int64_t t = sig.start_us + static_cast<std::int64_t>(k) * sig.chip_period_us;
      if (t >= 0 && t < duration) times.push_back(t);
    }
    if (moving) {
      const auto t1 = std::min(duration, sig.end_us());
      for (std::int64_t t = std::max<std::int64_t>(0, sig.start_us); t < t1; t += scenario.render_step_us) {
        times.push_back(t);
      }
    }
  }
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());

  std::vector<double> current(traces.size(), scenario.ambient_log_intensity);
  std::vector<double> next(traces.size());
  std::vector<int> row_cluster;
  bool first = true;
  for (const std::int64_t t : times) {
    std::fill(next.begin(), next.end(), scenario.ambient_log_intensity);
    for (const auto& a : active) {
      const auto& sig = signals[a.tx];
      if (t < sig.start_us || t >= sig.end_us()) continue;
      const auto fp = project_transmitter(scenario, scenario.transmitters[a.tx], t);
      if (!fp.visible) continue;
      const int width = a.box.x_max - a.box.x_min + 1;
      row_cluster.assign(static_cast<std::size_t>(a.box.y_max - a.box.y_min + 1), -1);
      for (int y = std::max(fp.pixels.y_min, a.box.y_min); y <= std::min(fp.pixels.y_max, a.box.y_max); ++y) {
        row_cluster[y - a.box.y_min] = fp.cluster_at(fp.pixels.x_min, y);
      }
      const int x_lo = std::max(fp.pixels.x_min, a.box.x_min);
      const int x_hi = std::min(fp.pixels.x_max, a.box.x_max);
      for (int y = a.box.y_min; y <= a.box.y_max; ++y) {
        const int c = row_cluster[y - a.box.y_min];
        if (c < 0 || c >= static_cast<int>(sig.cluster_chips.size())) continue;
        if (!sig.chip_at(c, t)) continue;
        const std::size_t row = static_cast<std::size_t>(y - a.box.y_min) * width;
        for (int x = x_lo; x <= x_hi; ++x) {
          next[a.trace_index[row + (x - a.box.x_min)]] += scenario.led_log_contrast;
        }
      }
    }
    for (std::size_t k = 0; k < traces.size(); ++k) {
      if (first) {
        traces[k].initial_level = next[k];
      } else if (next[k] != current[k]) {
        traces[k].breakpoints.emplace_back(t, next[k]);
      }
    }
    current.swap(next);
    first = false;
  }
  return traces;
}

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  // splitmix64 finaliser
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace

EventStream generate_events(std::span<const PixelTrace> traces, const SensorConfig& sensor,
                            const SensorExtent& extent, std::uint64_t seed) {
  sensor.validate();
  const bool bipolar = sensor.polarity_mode == PolarityMode::kBipolar;
  EventStream events;

  for (const auto& trace : traces) {
    std::mt19937_64 rng(mix_seed(seed, static_cast<std::uint64_t>(trace.y) * 65536u + trace.x));
    std::normal_distribution<double> jitter(0.0, sensor.jitter_sigma_us);
    double reference = trace.initial_level;
    std::int64_t last_fire = std::numeric_limits<std::int64_t>::min() / 2;
    std::int64_t last_out = std::numeric_limits<std::int64_t>::min() / 2;
    for (const auto& [t, level] : trace.breakpoints) {
      const double delta = level - reference;
      int polarity = 0;
      if (delta >= sensor.contrast_threshold) {
        polarity = 1;
      } else if (delta <= -sensor.contrast_threshold) {
        polarity = -1;
      } else {
        continue;
      }
      // The comparator resets even when the event is suppressed, either by
      // the refractory period or by positive-only output.
      reference = level;
      if (t - last_fire < sensor.refractory_us) continue;
      if (polarity < 0 && !bipolar) continue;
      last_fire = t;
      std::int64_t out = t;
      if (sensor.jitter_sigma_us > 0) out += std::llround(jitter(rng));
      out = std::max({out, std::int64_t{0}, last_out + sensor.refractory_us});
      if (out >= extent.duration_us) continue;
      last_out = out;
      events.push_back({out, trace.x, trace.y, static_cast<std::int8_t>(polarity)});
    }
  }

  if (sensor.background_noise_rate > 0 && extent.width > 0 && extent.height > 0) {
    std::mt19937_64 rng(mix_seed(seed, 0xba5eba11ull));
    const double pixels = static_cast<double>(extent.width) * extent.height;
    const double mean = sensor.background_noise_rate * pixels * extent.duration_us * 1e-6;
    std::poisson_distribution<long long> count(mean);
    std::uniform_int_distribution<int> px(0, extent.width - 1);
    std::uniform_int_distribution<int> py(0, extent.height - 1);
    std::uniform_int_distribution<std::int64_t> pt(0, extent.duration_us - 1);
    std::bernoulli_distribution coin(0.5);
    const long long n = count(rng);
    events.reserve(events.size() + static_cast<std::size_t>(n));
    for (long long i = 0; i < n; ++i) {
      Event e;
      e.x = px(rng);
      e.y = py(rng);
      e.t_us = pt(rng);
      e.polarity = (bipolar && coin(rng)) ? -1 : 1;
      events.push_back(e);
    }
  }

  // Per-pixel refractory filter over signal and background together.
  std::sort(events.begin(), events.end(), [](const Event& a, const Event& b) {
    if (a.y != b.y) return a.y < b.y;
    if (a.x != b.x) return a.x < b.x;
    if (a.t_us != b.t_us) return a.t_us < b.t_us;
    return a.polarity < b.polarity;
  });
  EventStream kept;
  kept.reserve(events.size());
  for (const auto& e : events) {
    if (!kept.empty() && kept.back().x == e.x && kept.back().y == e.y &&
        e.t_us - kept.back().t_us < std::max<std::int64_t>(sensor.refractory_us, 1)) {
      continue;
    }
    kept.push_back(e);
  }
  std::sort(kept.begin(), kept.end(), event_before);
  return kept;
}

EventStream apply_bandwidth_cap(std::span<const Event> stream, double cap_events_per_s) {
  if (!(cap_events_per_s > 0)) throw std::invalid_argument("bandwidth cap must be positive");
  if (std::isinf(cap_events_per_s)) return EventStream(stream.begin(), stream.end());
  const double per_window = cap_events_per_s / 1000.0;
  EventStream out;
  out.reserve(stream.size());
  std::deque<std::int64_t> window;
  for (const auto& e : stream) {
    while (!window.empty() && window.front() <= e.t_us - 1000) window.pop_front();
    if (static_cast<double>(window.size()) >= per_window) continue;
    window.push_back(e.t_us);
    out.push_back(e);
  }
  return out;
}

std::size_t peak_events_per_ms(std::span<const Event> stream) {
  std::size_t best = 0;
  std::size_t lo = 0;
  for (std::size_t hi = 0; hi < stream.size(); ++hi) {
    while (stream[lo].t_us <= stream[hi].t_us - 1000) ++lo;
    best = std::max(best, hi - lo + 1);
  }
  return best;
}

SimulationResult simulate(const ScenarioConfig& scenario, std::span<const TransmitterSignal> signals,
                          const SensorConfig& sensor, std::uint64_t seed) {
  const auto traces = render_traces(scenario, signals);
  SimulationResult result;
  result.generated = generate_events(traces, sensor,
                                     {scenario.width, scenario.height, scenario.duration_us}, seed);
  result.delivered = apply_bandwidth_cap(result.generated, sensor.bandwidth_cap);
  return result;
}

void write_events_csv(std::ostream& out, std::span<const Event> events) {
  out << "t_us,x,y,polarity\n";
  for (const auto& e : events) {
    out << e.t_us << ',' << e.x << ',' << e.y << ',' << static_cast<int>(e.polarity) << '\n';
  }
}

EventStream read_events_csv(std::istream& in) {
  EventStream events;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line_no == 1 && line.rfind("t_us", 0) == 0) continue;
    Event e;
    long long fields[4];
    const char* p = line.data();
    const char* end = line.data() + line.size();
    for (int i = 0; i < 4; ++i) {
      auto [next, ec] = std::from_chars(p, end, fields[i]);
      if (ec != std::errc{}) throw std::runtime_error("bad event CSV line " + std::to_string(line_no));
      p = next;
      if (i < 3) {
        if (p == end || *p != ',') throw std::runtime_error("bad event CSV line " + std::to_string(line_no));
        ++p;
      }
    }
    if (fields[3] != 1 && fields[3] != -1) {
      throw std::runtime_error("bad polarity on event CSV line " + std::to_string(line_no));
    }
    e.t_us = fields[0];
    e.x = static_cast<std::int32_t>(fields[1]);
    e.y = static_cast<std::int32_t>(fields[2]);
    e.polarity = static_cast<std::int8_t>(fields[3]);
    events.push_back(e);
  }
  if (!std::is_sorted(events.begin(), events.end(), event_before)) {
    std::stable_sort(events.begin(), events.end(), event_before);
  }
  return events;
}

void write_events_csv(const std::string& path, std::span<const Event> events) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  write_events_csv(out, events);
  if (!out) throw std::runtime_error("failed writing " + path);
}

EventStream read_events_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return read_events_csv(in);
}

}  // namespace evlc
