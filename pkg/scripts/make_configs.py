"""Regenerate the built-in instance configs under src/mecnc/configs.

Costs are given per second; everything here is converted to per-slot
units (multiply by tau) and compute capacities to CPU*slot per slot.
"""

import json
import math
from pathlib import Path

OUT = Path(__file__).resolve().parents[1] / "src" / "mecnc" / "configs"
TAU = 1e-3
NOISE_DBM = -174.0

SERVICES = [
    {"id": "s1", "scaling": [1.0, 2.0], "workload": [1 / 300, 1 / 400]},
    {"id": "s2", "scaling": [1 / 3, 1 / 2], "workload": [1 / 200, 1 / 100]},
]


def radio(bandwidth):
    return {
        "ue": {"power_budget": 0.2, "power_cost": 1.0},
        "server": {"power_budget": 10.0, "power_cost": 0.2},
        "bandwidth": bandwidth, "packet_size": 1e3, "carrier_freq": 30e9,
        "noise_psd_dbm": NOISE_DBM, "antenna_gain_db": 10.0, "shadow_sigma_db": 8.2,
        "slot_len": TAU, "mobility_var": 1e-2,
    }


def server_compute(cpus_per_level, levels=10):
    return {"capacity": [cpus_per_level * k for k in range(levels + 1)],
            "setup_cost": [cpus_per_level * k * TAU for k in range(levels + 1)],
            "unit_cost": 0.2 * TAU}


UE_COMPUTE = {"capacity": [0.0, 1.0], "setup_cost": [0.0, 5 * TAU], "unit_cost": 1.0 * TAU}

WIRED = {"capacity": [1e4 * k for k in range(6)],
         "setup_cost": [k * TAU for k in range(6)],
         "unit_cost": 1e-6}


def full():
    servers = [{"id": f"s{k}", "cluster": c} for k, c in enumerate([(1, 1), (1, 2), (2, 1), (2, 2)])]
    ring = [("s0", "s1"), ("s1", "s3"), ("s3", "s2"), ("s2", "s0")]
    edges = [list(e) for a, b in ring for e in ((a, b), (b, a))]
    return {
        "name": "full",
        "topology": {"area_side": 80.0, "num_ues": 100, "placement_seed": 7,
                     "servers": servers, "wired_edges": edges,
                     "coverage": {"rule": "clusters", "clusters_per_side": 4, "radius": 1}},
        "services": SERVICES,
        "compute": {"ue": UE_COMPUTE, "server": server_compute(5.0)},
        "wired": {"default": WIRED},
        "wireless": radio(1e8),
        "arrivals": {"rate": 100.0},
        "oracle": {"max_variables": 200000},
    }


def desk():
    servers = [{"id": "s0", "cluster": [1, 0]}, {"id": "s1", "cluster": [1, 2]}]
    return {
        "name": "desk",
        "topology": {"area_side": 60.0, "num_ues": 10, "placement_seed": 3,
                     "servers": servers, "wired_edges": [["s0", "s1"], ["s1", "s0"]],
                     "coverage": {"rule": "clusters", "clusters_per_side": 3, "radius": 1}},
        "services": SERVICES,
        "compute": {"ue": UE_COMPUTE, "server": server_compute(1.0)},
        # a thin backhaul: with the full ring capacity finished packets bounce
        # between the two servers at large V
        "wired": {"default": dict(WIRED, capacity=[1e2 * k for k in range(6)])},
        "wireless": radio(1e8),
        "arrivals": {"rate": 50.0},
    }


def tiny():
    # B*tau/F = 1 so a link carries log2(1 + SNR) packets per slot
    sigma2 = 10 ** ((NOISE_DBM - 30) / 10) * 1e6
    up = [snr * sigma2 / 0.1 for snr in (3, 15, 63)]
    down = [snr * sigma2 / 1.0 for snr in (255, 1023, 4095)]
    probs = [0.25, 0.5, 0.25]
    return {
        "name": "tiny",
        "topology": {"area_side": 10.0, "ues": [{"id": "ue0", "pos": [2.0, 5.0]}],
                     "servers": [{"id": "s0", "pos": [8.0, 5.0]}], "wired_edges": [],
                     "coverage": {"rule": "explicit", "map": {"ue0": ["s0"]}}},
        "services": [{"id": "f", "scaling": [2.0], "workload": [1.0]}],
        "compute": {"ue": {"capacity": [0.0, 2.0], "setup_cost": [0.0, 0.5], "unit_cost": 0.5},
                    "server": {"capacity": [0.0, 2.0, 4.0, 6.0, 8.0],
                               "setup_cost": [0.0, 0.1, 0.2, 0.3, 0.4], "unit_cost": 0.05}},
        "wireless": {
            "ue": {"power_budget": 0.1, "power_cost": 1000.0},
            "server": {"power_budget": 1.0, "power_cost": 100.0},
            "bandwidth": 1e6, "packet_size": 1e3, "carrier_freq": 3e9,
            "noise_psd_dbm": NOISE_DBM, "slot_len": TAU, "mobility_var": 0.0,
            "channel": {"model": "discrete", "links": {
                "ue0->s0": {"gains": up, "probs": probs},
                "s0->ue0": {"gains": down, "probs": probs}}},
        },
        "arrivals": {"rate": 3.0},
        "oracle": {"power_levels": 5},
    }


if __name__ == "__main__":
    OUT.mkdir(parents=True, exist_ok=True)
    for name, fn in (("full", full), ("desk", desk), ("tiny", tiny)):
        (OUT / f"{name}.json").write_text(json.dumps(fn(), indent=2) + "\n")
        print("wrote", name)
