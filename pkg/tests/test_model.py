import copy

import pytest

from conftest import mini_config
from mecnc import ConfigError, build_instance, commodity_space, load_config, load_instance


def test_full_config_counts():
    inst = load_instance("full")
    topo = inst.topology
    assert len(topo.ue_nodes) == 100
    assert len(topo.server_nodes) == 4
    # 100 UEs x 2 services x 3 stages
    assert len(inst.commodities) == 600
    assert all(a in topo.server_nodes and b in topo.server_nodes for a, b in topo.wired_edges)


def test_commodity_order_two_ues():
    inst = build_instance(mini_config(n_ue=2))
    got = [(c.dest, c.service, c.stage) for c in inst.commodities]
    assert got == [("u0", "f", 1), ("u0", "f", 2), ("u1", "f", 1), ("u1", "f", 2)]


def test_commodity_count_two_three_stage_services():
    svcs = [{"id": "a", "scaling": [1.0, 2.0], "workload": [1.0, 1.0]},
            {"id": "b", "scaling": [0.5, 0.5], "workload": [2.0, 1.0]}]
    inst = build_instance(mini_config(services=svcs))
    comms = commodity_space(inst.services, inst.topology)
    assert len(comms) == 6
    assert len(set(comms)) == 6
    assert comms == inst.commodities


def test_self_loop_rejected():
    cfg = mini_config()
    cfg["topology"]["wired_edges"] = [["s0", "s0"]]
    with pytest.raises(ConfigError, match="self-loop"):
        build_instance(cfg)


def test_ue_in_wired_edge_rejected():
    cfg = mini_config()
    cfg["topology"]["wired_edges"] = [["u0", "s0"]]
    with pytest.raises(ConfigError, match="UE endpoint"):
        build_instance(cfg)


def test_duplicate_ids_rejected():
    cfg = mini_config(n_ue=2)
    cfg["topology"]["ues"][1]["id"] = "u0"
    with pytest.raises(ConfigError, match="duplicate"):
        build_instance(cfg)


def test_non_monotone_profile_rejected():
    cfg = mini_config(server_cap=(0.0, 4.0, 2.0))
    with pytest.raises(ConfigError, match="nondecreasing"):
        build_instance(cfg)


def test_level_zero_must_be_free():
    cfg = mini_config()
    cfg["compute"]["ue"]["setup_cost"][0] = 0.1
    with pytest.raises(ConfigError, match="level 0"):
        build_instance(cfg)


def test_empty_coverage_rejected():
    cfg = mini_config()
    cfg["topology"]["coverage"]["map"]["u0"] = []
    with pytest.raises(ConfigError, match="empty coverage"):
        build_instance(cfg)


def test_bad_service_rejected():
    cfg = mini_config(services=[{"id": "f", "scaling": [0.0], "workload": [1.0]}])
    with pytest.raises(ConfigError):
        build_instance(cfg)


def test_missing_section():
    cfg = mini_config()
    del cfg["services"]
    with pytest.raises(ConfigError, match="services"):
        build_instance(cfg)


def test_unknown_config_name():
    with pytest.raises(ConfigError):
        load_config("no-such-config")


def test_wireless_links_both_directions():
    inst = build_instance(mini_config(n_ue=2, n_server=2))
    links = set(inst.topology.wireless_links())
    for u in inst.topology.ue_nodes:
        for s in inst.topology.coverage[u]:
            assert (u, s) in links and (s, u) in links


def test_level_zero_capacity_is_zero():
    idx = load_instance("desk").index
    assert (idx.cap[:, 0] == 0).all()
    assert (idx.setup[:, 0] == 0).all()


def test_builtin_configs_build():
    for name in ("full", "desk", "tiny"):
        cfg = load_config(name)
        inst = build_instance(copy.deepcopy(cfg))
        assert inst.index.n_ue == len(inst.topology.ue_nodes)


def test_cluster_coverage_uses_3x3_neighbourhood():
    inst = load_instance("full")
    topo = inst.topology
    side = topo.area_side / 4
    for u in topo.ue_nodes:
        cu = [int(v // side) for v in topo.positions[u]]
        for s in topo.server_nodes:
            cs = [int(v // side) for v in topo.positions[s]]
            near = max(abs(a - b) for a, b in zip(cu, cs)) <= 1
            assert (s in topo.coverage[u]) == near
