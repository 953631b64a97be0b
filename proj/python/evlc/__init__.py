"""Python bindings for the evlc event-camera LED bar link."""

import csv
import io
import json

from . import _core

__all__ = [
    "default_config",
    "manchester_encode",
    "manchester_decode",
    "polar_encode",
    "polar_decode",
    "latency",
    "etsi_check",
    "simulate",
    "receive",
    "run_sweep",
]


def _dump(config):
    if config is None:
        return ""
    return config if isinstance(config, str) else json.dumps(config)


def default_config():
    return json.loads(_core.default_config())


def manchester_encode(bits):
    return _core.manchester_encode(list(bits))


def manchester_decode(chips):
    return _core.manchester_decode(list(chips))


def polar_encode(payload_bits, config=None):
    return _core.polar_encode(list(payload_bits), _dump(config))


def polar_decode(llrs, config=None):
    """Returns (payload_bits, crc_ok)."""
    return _core.polar_decode(list(llrs), _dump(config))


def latency(n_packets, gap_slots=None, t_cmd_us=1000.0, t_transfer_us=2000.0, t_proc_us=13000.0):
    return json.loads(_core.latency(n_packets, gap_slots, t_cmd_us, t_transfer_us, t_proc_us))


def etsi_check(total_us, payload_bytes):
    return json.loads(_core.etsi_check(total_us, payload_bytes))


def simulate(config=None, seed=1):
    """Events as numpy arrays plus the transmitted payloads per transmitter."""
    return _core.simulate(_dump(config), seed)


def receive(events, width, height, config=None, bipolar=False):
    lines = _core.receive(
        events["t_us"], events["x"], events["y"], events["polarity"], width, height, _dump(config), bipolar
    )
    return [json.loads(line) for line in lines]


def run_sweep(config=None, deterministic=False):
    """Metrics rows as dicts of strings; wall-clock columns dropped when deterministic."""
    text = _core.run_sweep(_dump(config))
    if deterministic:
        text = _core.deterministic_csv(text)
    return list(csv.DictReader(io.StringIO(text)))
