import random

import pytest

import evlc


def test_manchester_round_trip():
    assert evlc.manchester_encode([1, 0]) == [0, 1, 1, 0]
    assert evlc.manchester_decode([1, 0, 1, 0]) == [0, 0]


def test_polar_round_trip():
    rng = random.Random(5)
    payload = [rng.randint(0, 1) for _ in range(40)]
    codeword = evlc.polar_encode(payload)
    assert len(codeword) == 128
    bits, crc_ok = evlc.polar_decode([4.0 if b == 0 else -4.0 for b in codeword])
    assert crc_ok
    assert bits == payload


def test_latency_and_etsi():
    one = evlc.latency(1)
    assert one["t_blink_us"] == 27400
    three = evlc.latency(3, gap_slots=0, t_cmd_us=0, t_transfer_us=0, t_proc_us=16000)
    assert three["total_us"] == 98200
    assert evlc.etsi_check(three["total_us"], 288)["pass"]
    assert not evlc.etsi_check(43400, 96)["pass"]
    with pytest.raises(ValueError):
        evlc.latency(0)


def test_simulate_and_receive():
    config = evlc.default_config()
    config["sensor"]["background_noise_rate"] = 0
    config["sensor"]["jitter_sigma_us"] = 0
    capture = evlc.simulate(config, seed=3)
    assert len(capture["events"]["t_us"]) > 0
    packets = evlc.receive(capture["events"], capture["width"], capture["height"], config)
    assert len(packets) == 1
    assert packets[0]["all_crc_ok"]
    assert bytes.fromhex(packets[0]["payload_hex"]) == capture["payloads"][0][0]


def test_sweep_is_deterministic():
    config = evlc.default_config()
    config["sweep"] = {"variable": "speed", "values": [0, 30]}
    a = evlc.run_sweep(config, deterministic=True)
    b = evlc.run_sweep(config, deterministic=True)
    assert a == b
    assert [row["value"] for row in a] == ["0", "30"]
    assert not any(key.startswith("wall_") for key in a[0])
