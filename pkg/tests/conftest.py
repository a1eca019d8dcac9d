"""Small hand-built instances shared by the unit tests."""

import copy

import numpy as np
import pytest

from mecnc import build_instance, load_config

NOISE_DBM = -174.0


def noise_power(bandwidth: float) -> float:
    return 10 ** ((NOISE_DBM - 30) / 10) * bandwidth


def mini_config(n_ue=1, services=None, ue_cap=(0.0, 2.0), server_cap=(0.0, 4.0),
                wired=False, n_server=1, rate=1.0, discrete=True, mobility=0.0):
    """UEs on the left edge, servers on the right, every UE covered by every server."""
    services = services or [{"id": "f", "scaling": [2.0], "workload": [1.0]}]
    ues = [{"id": f"u{k}", "pos": [1.0, 1.0 + k]} for k in range(n_ue)]
    servers = [{"id": f"s{k}", "pos": [9.0, 1.0 + k]} for k in range(n_server)]
    edges = []
    if wired and n_server > 1:
        edges = [["s0", "s1"], ["s1", "s0"]]
    wl = {
        "ue": {"power_budget": 0.1, "power_cost": 1.0},
        "server": {"power_budget": 1.0, "power_cost": 0.1},
        "bandwidth": 1e6, "packet_size": 1e3, "carrier_freq": 3e9,
        "noise_psd_dbm": NOISE_DBM, "slot_len": 1e-3, "mobility_var": mobility,
        "antenna_gain_db": 0.0, "shadow_sigma_db": 0.0,
    }
    if discrete:
        s2 = noise_power(1e6)
        links = {}
        for u in ues:
            for s in servers:
                links[f"{u['id']}->{s['id']}"] = {"gains": [3 * s2 / 0.1, 15 * s2 / 0.1],
                                                  "probs": [0.5, 0.5]}
                links[f"{s['id']}->{u['id']}"] = {"gains": [15 * s2, 63 * s2],
                                                  "probs": [0.5, 0.5]}
        wl["channel"] = {"model": "discrete", "links": links}
    return {
        "name": "mini",
        "topology": {"area_side": 10.0, "ues": ues, "servers": servers, "wired_edges": edges,
                     "coverage": {"rule": "explicit",
                                  "map": {u["id"]: [s["id"] for s in servers] for u in ues}}},
        "services": services,
        "compute": {
            "ue": {"capacity": list(ue_cap), "setup_cost": [0.0] + [0.5] * (len(ue_cap) - 1),
                   "unit_cost": 0.5},
            "server": {"capacity": list(server_cap),
                       "setup_cost": [0.1 * k for k in range(len(server_cap))],
                       "unit_cost": 0.05},
        },
        "wired": {"default": {"capacity": [0.0, 10.0], "setup_cost": [0.0, 0.1],
                              "unit_cost": 0.01}},
        "wireless": wl,
        "arrivals": {"rate": rate},
    }


@pytest.fixture
def mini():
    return build_instance(mini_config())


@pytest.fixture(scope="session")
def tiny_config():
    return load_config("tiny")


@pytest.fixture(scope="session")
def desk_config():
    return load_config("desk")


@pytest.fixture
def fresh(desk_config):
    return copy.deepcopy(desk_config)


def rng(seed=0):
    return np.random.default_rng(seed)
