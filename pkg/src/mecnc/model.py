"""Static problem instance: topology, service chains, resource profiles, commodities.

An instance is built once from a JSON-compatible config tree and is immutable
afterwards.  ``Instance.index`` compiles it into dense numpy index arrays that
the controller and the queue engine use in the slot loop.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources
from pathlib import Path
from typing import NamedTuple

import numpy as np


class ConfigError(ValueError):
    """Raised for any malformed or inconsistent instance configuration."""


class Commodity(NamedTuple):
    dest: str
    service: str
    stage: int


@dataclass(frozen=True)
class Topology:
    ue_nodes: tuple[str, ...]
    server_nodes: tuple[str, ...]
    wired_edges: tuple[tuple[str, str], ...]
    positions: dict[str, tuple[float, float]]
    coverage: dict[str, tuple[str, ...]]
    area_side: float

    @property
    def nodes(self) -> tuple[str, ...]:
        return self.ue_nodes + self.server_nodes

    def wireless_links(self) -> list[tuple[str, str]]:
        """Uplinks then downlinks, each in node order."""
        up = [(u, s) for u in self.ue_nodes for s in self.coverage[u]]
        down = []
        for s in self.server_nodes:
            down += [(s, u) for u in self.ue_nodes if s in self.coverage[u]]
        return up + down


@dataclass(frozen=True)
class ServiceSpec:
    id: str
    scaling: tuple[float, ...]
    workload: tuple[float, ...]

    @property
    def num_stages(self) -> int:
        return len(self.scaling) + 1


@dataclass(frozen=True)
class ComputeProfile:
    capacity: tuple[float, ...]
    setup_cost: tuple[float, ...]
    unit_cost: float

    @property
    def levels(self) -> range:
        return range(len(self.capacity))

    def check(self, where: str) -> None:
        c, s = self.capacity, self.setup_cost
        if len(c) != len(s) or not c:
            raise ConfigError(f"{where}: capacity/setup_cost length mismatch")
        if c[0] != 0 or s[0] != 0:
            raise ConfigError(f"{where}: level 0 must have zero capacity and zero setup cost")
        if any(b < a for a, b in zip(c, c[1:])) or any(b < a for a, b in zip(s, s[1:])):
            raise ConfigError(f"{where}: capacity and setup_cost must be nondecreasing in level")
        if self.unit_cost < 0:
            raise ConfigError(f"{where}: negative unit cost")


class WiredLinkProfile(ComputeProfile):
    """Same shape as a compute profile; capacity is in packets per slot."""


@dataclass(frozen=True)
class DiscreteChannel:
    """Finite per-link gain distribution used instead of the path-loss model."""

    gains: tuple[float, ...]
    probs: tuple[float, ...]


@dataclass(frozen=True)
class WirelessProfile:
    power_budget: dict[str, float]
    power_cost: dict[str, float]
    bandwidth: float
    packet_size: float
    carrier_freq: float
    noise_psd_dbm: float
    antenna_gain_db: float
    shadow_sigma_db: float
    slot_len: float
    mobility_var: float = 1e-2
    # None -> path loss + log-normal shadowing; otherwise one entry per link
    discrete: dict[tuple[str, str], DiscreteChannel] | None = None

    @property
    def noise_power(self) -> float:
        """sigma^2 = N0 * B in watts."""
        return 10 ** ((self.noise_psd_dbm - 30.0) / 10.0) * self.bandwidth

    @property
    def pkts_per_hz(self) -> float:
        return self.bandwidth / self.packet_size


@dataclass(frozen=True)
class Instance:
    topology: Topology
    services: tuple[ServiceSpec, ...]
    compute: dict[str, ComputeProfile]
    wired: dict[tuple[str, str], WiredLinkProfile]
    wireless: WirelessProfile
    arrival_rates: dict[tuple[str, str], float] = field(default_factory=dict)
    a_max_factor: float = 50.0
    oracle: dict = field(default_factory=dict)
    name: str = ""

    @cached_property
    def commodities(self) -> list[Commodity]:
        return commodity_space(self.services, self.topology)

    @cached_property
    def index(self) -> "CompiledIndex":
        return CompiledIndex.build(self)

    def rates_array(self, rates: dict[tuple[str, str], float] | None = None) -> np.ndarray:
        rates = self.arrival_rates if rates is None else rates
        out = np.zeros((len(self.topology.ue_nodes), len(self.services)))
        for a, u in enumerate(self.topology.ue_nodes):
            for b, s in enumerate(self.services):
                out[a, b] = rates.get((u, s.id), 0.0)
        return out

    def with_rate(self, lam: float | np.ndarray) -> dict[tuple[str, str], float]:
        """Per-(UE, service) rate map; a scalar applies to every pair."""
        lam = np.broadcast_to(np.asarray(lam, dtype=float),
                              (len(self.topology.ue_nodes), len(self.services)))
        return {(u, s.id): float(lam[a, b])
                for a, u in enumerate(self.topology.ue_nodes)
                for b, s in enumerate(self.services)}


def commodity_space(services, topology: Topology) -> list[Commodity]:
    """All (u, phi, m) triples ordered by UE, then service, then stage."""
    return [Commodity(u, s.id, m)
            for u in topology.ue_nodes
            for s in services
            for m in range(1, s.num_stages + 1)]


@dataclass
class CompiledIndex:
    """Dense index arrays; nodes are UEs first, then servers."""

    nodes: list[str]
    node_pos: dict[str, int]
    n_ue: int
    comms: list[Commodity]
    c_dest: np.ndarray
    c_svc: np.ndarray
    c_stage: np.ndarray
    c_final: np.ndarray
    c_work: np.ndarray        # r for non-final stages, 1.0 placeholder for final
    c_xi: np.ndarray          # scaling of the function consuming this stage, 0 for final
    c_next: np.ndarray        # index of stage m+1, -1 for final
    c_cumxi: np.ndarray       # prod_{z<m} xi
    first_stage: np.ndarray   # [ue, svc] -> commodity index of stage 1
    hold: np.ndarray          # [node, comm] node may ever store this commodity
    proc_mask: np.ndarray     # [node, comm] node may process it
    # compute, padded over levels
    cap: np.ndarray           # [node, K]
    setup: np.ndarray         # [node, K], +inf on padding
    c_pr: np.ndarray          # [node]
    # wired
    wired: list[tuple[int, int]]
    w_cap: np.ndarray
    w_setup: np.ndarray
    c_tr: np.ndarray
    wired_mask: np.ndarray    # [edge, comm]
    # wireless
    links: list[tuple[int, int]]
    l_src: np.ndarray
    l_dst: np.ndarray
    l_up: np.ndarray
    link_mask: np.ndarray     # [link, comm]
    up_table: np.ndarray      # [ue, max_cov] uplink index, -1 padded
    down_groups: list[np.ndarray]  # per server: downlink indices
    p_budget: np.ndarray      # [node]
    c_wt: np.ndarray          # [node]

    @classmethod
    def build(cls, inst: Instance) -> "CompiledIndex":
        topo = inst.topology
        nodes = list(topo.nodes)
        pos = {n: i for i, n in enumerate(nodes)}
        n_ue = len(topo.ue_nodes)
        comms = inst.commodities
        svc_pos = {s.id: b for b, s in enumerate(inst.services)}
        C = len(comms)
        c_dest = np.array([pos[c.dest] for c in comms], dtype=int)
        c_svc = np.array([svc_pos[c.service] for c in comms], dtype=int)
        c_stage = np.array([c.stage for c in comms], dtype=int)
        c_final = np.zeros(C, dtype=bool)
        c_work = np.ones(C)
        c_xi = np.zeros(C)
        c_next = -np.ones(C, dtype=int)
        c_cumxi = np.ones(C)
        first = np.zeros((n_ue, len(inst.services)), dtype=int)
        for k, c in enumerate(comms):
            s = inst.services[c_svc[k]]
            if c.stage == s.num_stages:
                c_final[k] = True
            else:
                c_work[k] = s.workload[c.stage - 1]
                c_xi[k] = s.scaling[c.stage - 1]
                c_next[k] = k + 1
            c_cumxi[k] = math.prod(s.scaling[: c.stage - 1])
            if c.stage == 1:
                first[c_dest[k], c_svc[k]] = k
        N = len(nodes)
        hold = np.ones((N, C), dtype=bool)
        hold[:n_ue] = c_dest[None, :] == np.arange(n_ue)[:, None]
        proc_mask = hold & ~c_final[None, :]

        K = max(len(inst.compute[n].capacity) for n in nodes)
        cap = np.zeros((N, K))
        setup = np.full((N, K), np.inf)
        c_pr = np.zeros(N)
        for i, n in enumerate(nodes):
            prof = inst.compute[n]
            cap[i, : len(prof.capacity)] = prof.capacity
            setup[i, : len(prof.setup_cost)] = prof.setup_cost
            c_pr[i] = prof.unit_cost

        wired = [(pos[a], pos[b]) for a, b in topo.wired_edges]
        KW = max([len(p.capacity) for p in inst.wired.values()] or [1])
        w_cap = np.zeros((len(wired), KW))
        w_setup = np.full((len(wired), KW), np.inf)
        c_tr = np.zeros(len(wired))
        for e, (a, b) in enumerate(topo.wired_edges):
            prof = inst.wired[(a, b)]
            w_cap[e, : len(prof.capacity)] = prof.capacity
            w_setup[e, : len(prof.setup_cost)] = prof.setup_cost
            c_tr[e] = prof.unit_cost
        wired_mask = np.ones((len(wired), C), dtype=bool)

        links = [(pos[a], pos[b]) for a, b in topo.wireless_links()]
        l_src = np.array([a for a, _ in links], dtype=int)
        l_dst = np.array([b for _, b in links], dtype=int)
        l_up = l_src < n_ue
        link_mask = np.zeros((len(links), C), dtype=bool)
        for l, (a, b) in enumerate(links):
            if a < n_ue:
                # uplink carries the UE's own unfinished packets
                link_mask[l] = (c_dest == a) & ~c_final
            else:
                # downlink carries only packets destined to the receiving UE
                link_mask[l] = c_dest == b
        max_cov = max(len(topo.coverage[u]) for u in topo.ue_nodes)
        up_table = -np.ones((n_ue, max_cov), dtype=int)
        fill = [0] * n_ue
        for l, (a, b) in enumerate(links):
            if a < n_ue:
                up_table[a, fill[a]] = l
                fill[a] += 1
        down_groups = [np.array([l for l, (a, _) in enumerate(links) if a == s], dtype=int)
                       for s in range(n_ue, N)]
        p_budget = np.array([inst.wireless.power_budget[n] for n in nodes])
        c_wt = np.array([inst.wireless.power_cost[n] for n in nodes])
        return cls(nodes, pos, n_ue, comms, c_dest, c_svc, c_stage, c_final, c_work,
                   c_xi, c_next, c_cumxi, first, hold, proc_mask, cap, setup, c_pr,
                   wired, w_cap, w_setup, c_tr, wired_mask, links, l_src, l_dst, l_up,
                   link_mask, up_table, down_groups, p_budget, c_wt)


# ---------------------------------------------------------------------------
# config ingestion

def _profile(raw: dict, cls, where: str):
    try:
        prof = cls(tuple(float(x) for x in raw["capacity"]),
                   tuple(float(x) for x in raw["setup_cost"]),
                   float(raw.get("unit_cost", 0.0)))
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"{where}: bad profile ({exc})") from None
    prof.check(where)
    return prof


def _edge_key(s: str) -> tuple[str, str]:
    a, _, b = s.partition("->")
    return a.strip(), b.strip()


def _place_ues(topo: dict) -> list[tuple[str, tuple[float, float]]]:
    side = float(topo["area_side"])
    if "ues" in topo:
        return [(u["id"], tuple(map(float, u["pos"]))) for u in topo["ues"]]
    n = int(topo["num_ues"])
    rng = np.random.default_rng(int(topo.get("placement_seed", 0)))
    xy = rng.uniform(0.0, side, size=(n, 2))
    return [(f"ue{i}", (float(x), float(y))) for i, (x, y) in enumerate(xy)]


def _cluster_of(p, side, n):
    w = side / n
    return min(int(p[1] // w), n - 1), min(int(p[0] // w), n - 1)


def build_instance(config: dict) -> Instance:
    """Validate a config tree and return an immutable ``Instance``."""
    for sec in ("topology", "services", "compute", "wireless"):
        if sec not in config:
            raise ConfigError(f"missing section '{sec}'")
    topo = config["topology"]
    side = float(topo["area_side"])
    if side <= 0:
        raise ConfigError("area_side must be positive")
    ues = _place_ues(topo)
    positions: dict[str, tuple[float, float]] = {}
    servers, radio_servers, server_cells = [], [], {}
    for s in topo.get("servers", []):
        sid = s["id"]
        if "pos" in s:
            p = tuple(map(float, s["pos"]))
        elif "cluster" in s:
            n = int(topo["coverage"]["clusters_per_side"])
            r, c = s["cluster"]
            w = side / n
            p = ((c + 0.5) * w, (r + 0.5) * w)
        else:
            raise ConfigError(f"server {sid}: needs 'pos' or 'cluster'")
        if sid in positions:
            raise ConfigError(f"duplicate node id '{sid}'")
        positions[sid] = p
        servers.append(sid)
        if s.get("wireless", True):
            radio_servers.append(sid)
    for uid, p in ues:
        if uid in positions:
            raise ConfigError(f"duplicate node id '{uid}'")
        positions[uid] = p
    ue_ids = tuple(u for u, _ in ues)
    if not ue_ids or not servers:
        raise ConfigError("need at least one UE and one server")
    for n, (x, y) in positions.items():
        if not (0 <= x <= side and 0 <= y <= side):
            raise ConfigError(f"node {n} at {(x, y)} lies outside [0, {side}]^2")

    cov_cfg = topo.get("coverage", {"rule": "explicit", "map": {}})
    rule = cov_cfg.get("rule", "explicit")
    coverage: dict[str, tuple[str, ...]] = {}
    if rule == "clusters":
        n = int(cov_cfg["clusters_per_side"])
        rad = int(cov_cfg.get("radius", 1))
        for s in radio_servers:
            server_cells[s] = _cluster_of(positions[s], side, n)
        for u in ue_ids:
            cu = _cluster_of(positions[u], side, n)
            coverage[u] = tuple(s for s in radio_servers
                                if max(abs(cu[0] - server_cells[s][0]),
                                       abs(cu[1] - server_cells[s][1])) <= rad)
    elif rule == "radius":
        r = float(cov_cfg["radius_m"])
        for u in ue_ids:
            coverage[u] = tuple(s for s in radio_servers
                                if math.dist(positions[u], positions[s]) <= r)
    elif rule == "explicit":
        m = cov_cfg.get("map", {})
        for u in ue_ids:
            coverage[u] = tuple(s for s in radio_servers if s in m.get(u, []))
            bad = set(m.get(u, [])) - set(servers)
            if bad:
                raise ConfigError(f"coverage of {u} names non-servers {sorted(bad)}")
    else:
        raise ConfigError(f"unknown coverage rule '{rule}'")
    for u in ue_ids:
        if not coverage[u]:
            raise ConfigError(f"UE {u} has empty coverage")

    edges = []
    for a, b in topo.get("wired_edges", []):
        if a not in positions or b not in positions:
            raise ConfigError(f"wired edge ({a}, {b}) references unknown node")
        if a in ue_ids or b in ue_ids:
            raise ConfigError(f"wired edge ({a}, {b}) has a UE endpoint")
        if a == b:
            raise ConfigError(f"wired edge ({a}, {b}) is a self-loop")
        if (a, b) in edges:
            raise ConfigError(f"duplicate wired edge ({a}, {b})")
        edges.append((a, b))
    edges.sort(key=lambda e: (servers.index(e[0]), servers.index(e[1])))

    topology = Topology(ue_ids, tuple(servers), tuple(edges), positions, coverage, side)

    services = []
    seen = set()
    for s in config["services"]:
        sid = s["id"]
        if sid in seen:
            raise ConfigError(f"duplicate service id '{sid}'")
        seen.add(sid)
        xi = tuple(float(x) for x in s["scaling"])
        r = tuple(float(x) for x in s["workload"])
        if not xi or len(xi) != len(r):
            raise ConfigError(f"service {sid}: scaling/workload must be non-empty and equal length")
        if min(xi) <= 0 or min(r) <= 0:
            raise ConfigError(f"service {sid}: scaling and workload must be positive")
        services.append(ServiceSpec(sid, xi, r))

    comp = config["compute"]
    compute = {}
    for n in topology.nodes:
        raw = comp.get("nodes", {}).get(n) or comp.get("ue" if n in ue_ids else "server")
        if raw is None:
            raise ConfigError(f"no compute profile for node {n}")
        compute[n] = _profile(raw, ComputeProfile, f"compute[{n}]")

    wcfg = config.get("wired", {})
    overrides = {_edge_key(k): v for k, v in wcfg.get("edges", {}).items()}
    wired = {}
    for e in edges:
        raw = overrides.get(e) or wcfg.get("default")
        if raw is None:
            raise ConfigError(f"no wired profile for edge {e}")
        wired[e] = _profile(raw, WiredLinkProfile, f"wired[{e[0]}->{e[1]}]")

    wl = config["wireless"]
    budget, pcost = {}, {}
    for n in topology.nodes:
        raw = wl.get("nodes", {}).get(n) or wl.get("ue" if n in ue_ids else "server", {})
        budget[n] = float(raw.get("power_budget", 0.0))
        pcost[n] = float(raw.get("power_cost", 0.0))
        if budget[n] <= 0 or pcost[n] < 0:
            raise ConfigError(f"wireless[{n}]: power_budget must be > 0 and power_cost >= 0")
    try:
        scal = {k: float(wl[k]) for k in ("bandwidth", "packet_size", "carrier_freq", "slot_len")}
    except KeyError as exc:
        raise ConfigError(f"wireless: missing {exc}") from None
    if min(scal.values()) <= 0:
        raise ConfigError("wireless: bandwidth, packet_size, carrier_freq, slot_len must be positive")
    sigma = float(wl.get("shadow_sigma_db", 0.0))
    mob = float(wl.get("mobility_var", 1e-2))
    if sigma < 0 or mob < 0:
        raise ConfigError("wireless: shadow_sigma_db and mobility_var must be nonnegative")
    discrete = None
    ch = wl.get("channel", {"model": "pathloss"})
    if ch.get("model") == "discrete":
        discrete = {}
        table = {_edge_key(k): v for k, v in ch["links"].items()}
        for link in topology.wireless_links():
            if link not in table:
                raise ConfigError(f"discrete channel: no states for link {link}")
            g = tuple(float(x) for x in table[link]["gains"])
            p = tuple(float(x) for x in table[link]["probs"])
            if len(g) != len(p) or min(g) <= 0 or min(p) < 0 or abs(sum(p) - 1) > 1e-9:
                raise ConfigError(f"discrete channel {link}: bad gains/probs")
            discrete[link] = DiscreteChannel(g, p)
    elif ch.get("model", "pathloss") != "pathloss":
        raise ConfigError(f"unknown channel model {ch.get('model')!r}")
    wireless = WirelessProfile(budget, pcost, scal["bandwidth"], scal["packet_size"],
                               scal["carrier_freq"], float(wl.get("noise_psd_dbm", -174.0)),
                               float(wl.get("antenna_gain_db", 0.0)), sigma,
                               scal["slot_len"], mob, discrete)

    arr = config.get("arrivals", {})
    rates = {}
    base = float(arr.get("rate", 0.0))
    for u in ue_ids:
        for s in services:
            rates[(u, s.id)] = float(arr.get("rates", {}).get(u, {}).get(s.id, base))
    if min(rates.values(), default=0.0) < 0:
        raise ConfigError("arrival rates must be nonnegative")
    return Instance(topology, tuple(services), compute, wired, wireless, rates,
                    float(arr.get("a_max_factor", 50.0)), dict(config.get("oracle", {})),
                    config.get("name", ""))


def builtin_configs() -> list[str]:
    return sorted(p.name[:-5] for p in resources.files("mecnc.configs").iterdir()
                  if p.name.endswith(".json") and not p.name.endswith(".schema.json"))


def load_config(ref: str | Path) -> dict:
    """Read a config from a path, or a built-in by name (``desk``, ``full`` ...)."""
    p = Path(ref)
    if p.exists():
        return json.loads(p.read_text())
    name = str(ref)
    res = resources.files("mecnc.configs") / f"{name}.json"
    if res.is_file():
        return json.loads(res.read_text())
    raise ConfigError(f"no config file or built-in named '{ref}'")


def load_instance(ref: str | Path) -> Instance:
    return build_instance(load_config(ref))
