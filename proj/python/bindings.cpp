#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <algorithm>
#include <optional>
#include <sstream>

#include "evlc/harness.hpp"
#include "evlc/json_io.hpp"

namespace py = pybind11;
using namespace evlc;

namespace {

ExperimentConfig parse_config(const std::string& text) {
  return text.empty() ? ExperimentConfig{} : nlohmann::json::parse(text).get<ExperimentConfig>();
}

py::dict events_to_arrays(const EventStream& events) {
  const auto n = static_cast<py::ssize_t>(events.size());
  const std::vector<py::ssize_t> shape{n};
  py::array_t<std::int64_t> t(shape);
  py::array_t<std::int32_t> x(shape), y(shape);
  py::array_t<std::int8_t> p(shape);
  auto tv = t.mutable_unchecked<1>();
  auto xv = x.mutable_unchecked<1>();
  auto yv = y.mutable_unchecked<1>();
  auto pv = p.mutable_unchecked<1>();
  for (py::ssize_t i = 0; i < n; ++i) {
    const auto& e = events[static_cast<std::size_t>(i)];
    tv(i) = e.t_us;
    xv(i) = e.x;
    yv(i) = e.y;
    pv(i) = e.polarity;
  }
  py::dict d;
  d["t_us"] = t;
  d["x"] = x;
  d["y"] = y;
  d["polarity"] = p;
  return d;
}

EventStream arrays_to_events(py::array_t<std::int64_t, py::array::forcecast> t,
                             py::array_t<std::int32_t, py::array::forcecast> x,
                             py::array_t<std::int32_t, py::array::forcecast> y,
                             py::array_t<std::int8_t, py::array::forcecast> p) {
  const auto n = t.size();
  if (x.size() != n || y.size() != n || p.size() != n) throw std::invalid_argument("event arrays differ in length");
  EventStream out(static_cast<std::size_t>(n));
  auto tv = t.unchecked<1>();
  auto xv = x.unchecked<1>();
  auto yv = y.unchecked<1>();
  auto pv = p.unchecked<1>();
  for (py::ssize_t i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = {tv(i), xv(i), yv(i), pv(i)};
  std::stable_sort(out.begin(), out.end(), event_before);
  return out;
}

std::string breakdown_json(const LatencyBreakdown& b) {
  return nlohmann::json{{"t_cmd_us", b.t_cmd_us},
                        {"t_blink_us", b.t_blink_us},
                        {"t_transfer_us", b.t_transfer_us},
                        {"t_proc_us", b.t_proc_us},
                        {"total_us", b.total_us}}
      .dump();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Event-camera LED bar link: encoder, simulator, receiver and harness";

  m.def("default_config", [] { return nlohmann::json(ExperimentConfig{}).dump(); });

  m.def("manchester_encode", [](const Bits& bits) { return manchester_encode(bits); }, py::arg("bits"));
  m.def("manchester_decode", [](const Chips& chips) { return manchester_decode(chips); }, py::arg("chips"));

  m.def(
      "polar_encode",
      [](const Bits& payload_bits, const std::string& config) {
        return polar_encode_payload(payload_bits, parse_config(config).fec);
      },
      py::arg("payload_bits"), py::arg("config") = "");
  m.def(
      "polar_decode",
      [](const std::vector<double>& llrs, const std::string& config) {
        const auto r = scl_decode({llrs}, parse_config(config).fec);
        return py::make_tuple(r.payload, r.crc_ok);
      },
      py::arg("llrs"), py::arg("config") = "");

  m.def(
      "latency",
      [](int n_packets, std::optional<int> gap_slots, double t_cmd_us, double t_transfer_us, double t_proc_us) {
        FrameLayout layout;
        if (gap_slots) layout.inter_packet_gap_slots = *gap_slots;
        layout.validate();
        return breakdown_json(latency_model(n_packets, layout, t_cmd_us, t_transfer_us, t_proc_us));
      },
      py::arg("n_packets"), py::arg("gap_slots") = py::none(), py::arg("t_cmd_us") = 1000.0,
      py::arg("t_transfer_us") = 2000.0, py::arg("t_proc_us") = 13000.0);

  m.def(
      "etsi_check",
      [](double total_us, int payload_bytes) {
        LatencyBreakdown b;
        b.total_us = total_us;
        const auto r = etsi_check(b, payload_bytes);
        return nlohmann::json{{"pass", r.pass},
                              {"payload_ok", r.payload_ok},
                              {"latency_ok", r.latency_ok},
                              {"payload_margin_bytes", r.payload_margin_bytes},
                              {"latency_margin_us", r.latency_margin_us},
                              {"summary", r.summary()}}
            .dump();
      },
      py::arg("total_us"), py::arg("payload_bytes"));

  m.def(
      "simulate",
      [](const std::string& config, std::uint64_t seed) {
        const auto c = parse_config(config);
        const auto payloads = make_payloads(c, seed);
        Capture capture;
        {
          py::gil_scoped_release release;
          capture = make_capture(c, payloads, seed);
        }
        py::list truth;
        for (const auto& tx : payloads) {
          py::list packets;
          for (const auto& p : tx) packets.append(py::bytes(reinterpret_cast<const char*>(p.payload.data()),
                                                            p.payload.size()));
          truth.append(packets);
        }
        py::dict d;
        d["events"] = events_to_arrays(capture.events.delivered);
        d["events_generated"] = capture.events.generated.size();
        d["width"] = capture.scenario.width;
        d["height"] = capture.scenario.height;
        d["payloads"] = truth;
        return d;
      },
      py::arg("config") = "", py::arg("seed") = 1);

  m.def(
      "receive",
      [](py::array_t<std::int64_t, py::array::forcecast> t, py::array_t<std::int32_t, py::array::forcecast> x,
         py::array_t<std::int32_t, py::array::forcecast> y, py::array_t<std::int8_t, py::array::forcecast> p,
         int width, int height, const std::string& config, bool bipolar) {
        const auto events = arrays_to_events(t, x, y, p);
        const auto rc = parse_config(config).receiver();
        std::vector<std::string> lines;
        {
          py::gil_scoped_release release;
          const auto rx = bipolar ? receive_bipolar(events, width, height, rc) : receive(events, width, height, rc);
          for (const auto& region : rx.per_region) {
            for (const auto& packet : region.packets) lines.push_back(packet_to_json_line(packet));
          }
        }
        return lines;
      },
      py::arg("t_us"), py::arg("x"), py::arg("y"), py::arg("polarity"), py::arg("width"), py::arg("height"),
      py::arg("config") = "", py::arg("bipolar") = false);

  m.def(
      "run_sweep",
      [](const std::string& config) {
        const auto c = parse_config(config);
        std::vector<MetricsRow> rows;
        {
          py::gil_scoped_release release;
          rows = run_sweep(c);
        }
        std::ostringstream csv;
        write_metrics_csv(csv, rows);
        return csv.str();
      },
      py::arg("config") = "");

  m.def("deterministic_csv", &deterministic_csv, py::arg("csv"));
}
