"""Capacity-region / minimum-cost linear program on small discretized instances.

The stationary randomized policy is parameterized by level probabilities
alpha, CSI-conditional power-vector probabilities phi, and commodity shares
ell.  Products alpha*ell (and phi*ell) are replaced by joint variables beta
with sum_c beta <= alpha, which turns the characterization into an LP.
Shares are recovered as ell = beta / alpha on the support.
"""

from __future__ import annotations

import copy
import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.optimize import linprog
from scipy.stats import norm

from .controller import Decision
from .queues import FlowPlan
from .stochastic import path_loss_db


class OracleError(RuntimeError):
    pass


class OracleSizeError(OracleError):
    pass


@dataclass
class NodeRadio:
    links: np.ndarray          # wireless link indices transmitted by this node
    gains: np.ndarray          # [G, L] joint CSI states
    probs: np.ndarray          # [G]
    radix: np.ndarray          # per-link state counts (mixed radix, first link most significant)
    powers: np.ndarray         # [Z, L] feasible power vectors


@dataclass
class DiscreteInstance:
    inst: object
    radios: dict[int, NodeRadio]

    @classmethod
    def from_instance(cls, inst, power_levels: int | None = None,
                      csi_quantiles: int | None = None) -> "DiscreteInstance":
        """Finite CSI and power grids for every transmitting node.

        Discrete-channel instances reuse their configured states; path-loss
        instances use equal-probability shadowing quantiles at the build-time
        positions.
        """
        ocfg = inst.oracle or {}
        nz = int(power_levels or ocfg.get("power_levels", 5))
        nq = int(csi_quantiles or ocfg.get("csi_quantiles", 3))
        idx = inst.index
        wl = inst.wireless
        links = inst.topology.wireless_links()
        per_link = []
        for l, (a, b) in enumerate(links):
            if wl.discrete is not None:
                d = wl.discrete[(a, b)]
                per_link.append((np.array(d.gains), np.array(d.probs)))
            else:
                pa, pb = inst.topology.positions[a], inst.topology.positions[b]
                pl = path_loss_db(math.dist(pa, pb), wl.carrier_freq / 1e9)
                qs = (np.arange(nq) + 0.5) / nq
                shadow = norm.ppf(qs) * wl.shadow_sigma_db
                g = 10 ** ((wl.antenna_gain_db - pl - shadow) / 10)
                per_link.append((g, np.full(nq, 1.0 / nq)))
        radios = {}
        for i in range(len(idx.nodes)):
            ls = np.nonzero(idx.l_src == i)[0]
            if not len(ls):
                continue
            radix = np.array([len(per_link[l][0]) for l in ls])
            combos = list(itertools.product(*(range(n) for n in radix)))
            gains = np.array([[per_link[l][0][s] for l, s in zip(ls, cmb)] for cmb in combos])
            probs = np.array([math.prod(per_link[l][1][s] for l, s in zip(ls, cmb)) for cmb in combos])
            P = idx.p_budget[i]
            lv = np.linspace(0.0, P, nz)
            if i < idx.n_ue:
                vecs = [np.zeros(len(ls))]
                for k in range(len(ls)):
                    for p in lv[1:]:
                        v = np.zeros(len(ls))
                        v[k] = p
                        vecs.append(v)
            else:
                vecs = [np.array(v) for v in itertools.product(lv, repeat=len(ls))
                        if sum(v) <= P * (1 + 1e-12)]
            radios[i] = NodeRadio(ls, gains, probs, radix, np.array(vecs))
        return cls(inst, radios)

    def state_index(self, i: int, link_states: np.ndarray) -> int:
        r = self.radios[i]
        g = 0
        for l, n in zip(r.links, r.radix):
            g = g * n + int(link_states[l])
        return g


@dataclass
class PolicyProgram:
    c: np.ndarray
    A_ub: sparse.csr_matrix
    b_ub: np.ndarray
    A_eq: sparse.csr_matrix
    b_eq: np.ndarray
    objective: str
    keys: dict                 # variable groups -> {key: column}
    n_ub_groups: dict          # constraint family -> row count
    dinst: DiscreteInstance
    rates: np.ndarray

    @property
    def n_vars(self) -> int:
        return len(self.c)


@dataclass
class OracleSolution:
    status: str
    objective: float
    theta: float | None
    f_proc: dict = field(default_factory=dict)
    f_link: dict = field(default_factory=dict)
    alpha_proc: dict = field(default_factory=dict)    # node -> [K]
    beta_proc: dict = field(default_factory=dict)     # node -> [K, C]
    alpha_wired: dict = field(default_factory=dict)   # edge -> [K]
    beta_wired: dict = field(default_factory=dict)    # edge -> [K, C]
    phi: dict = field(default_factory=dict)           # node -> [G, Z]
    beta_radio: dict = field(default_factory=dict)    # node -> [G, Z, L, C]
    cost: float = float("nan")
    program: PolicyProgram | None = None

    @property
    def feasible(self) -> bool:
        return self.status == "optimal"

    def as_dict(self) -> dict:
        def arr(d):
            return {str(k): np.asarray(v).tolist() for k, v in d.items()}
        return {"status": self.status, "objective": self.objective, "theta": self.theta,
                "cost": self.cost,
                "f_proc": {str(k): v for k, v in self.f_proc.items() if v > 1e-12},
                "f_link": {str(k): v for k, v in self.f_link.items() if v > 1e-12},
                "alpha_proc": arr(self.alpha_proc), "alpha_wired": arr(self.alpha_wired),
                "phi": arr(self.phi)}


class _Builder:
    def __init__(self):
        self.n = 0
        self.rows_ub: list[dict] = []
        self.b_ub: list[float] = []
        self.rows_eq: list[dict] = []
        self.b_eq: list[float] = []
        self.cost: dict[int, float] = {}

    def var(self) -> int:
        self.n += 1
        return self.n - 1

    def le(self, row: dict, rhs: float = 0.0):
        self.rows_ub.append(row)
        self.b_ub.append(rhs)

    def eq(self, row: dict, rhs: float):
        self.rows_eq.append(row)
        self.b_eq.append(rhs)

    @staticmethod
    def _mat(rows, n):
        r, c, v = [], [], []
        for k, row in enumerate(rows):
            for j, x in row.items():
                r.append(k)
                c.append(j)
                v.append(x)
        return sparse.csr_matrix((v, (r, c)), shape=(len(rows), n))


def _add(row: dict, j: int, x: float):
    row[j] = row.get(j, 0.0) + x


def build_policy_program(dinst: DiscreteInstance, rates: np.ndarray, objective: str = "cost",
                         max_variables: int | None = None) -> PolicyProgram:
    """LP over flows and joint policy variables.

    ``objective``: ``feasibility``, ``theta`` (maximize theta with arrivals
    theta * rates) or ``cost`` (minimize expected cost at ``rates``).
    """
    if objective not in ("feasibility", "theta", "cost"):
        raise ValueError(f"unknown objective {objective!r}")
    inst = dinst.inst
    idx = inst.index
    tau = inst.wireless.slot_len
    bf = inst.wireless.pkts_per_hz
    noise = inst.wireless.noise_power
    rates = np.asarray(rates, dtype=float)
    limit = int(max_variables or inst.oracle.get("max_variables", 200_000))
    est = _estimate_vars(dinst)
    if est > limit:
        raise OracleSizeError(f"program needs about {est} variables, limit is {limit}; "
                              "shrink the instance or the CSI/power grids")
    N, C = len(idx.nodes), len(idx.comms)
    B = _Builder()
    keys = {"fin": {}, "fl": {}, "a_pr": {}, "b_pr": {}, "a_w": {}, "b_w": {},
            "phi": {}, "b_r": {}}
    groups = {}
    theta = B.var() if objective == "theta" else None

    for i in range(N):
        for c in np.nonzero(idx.proc_mask[i])[0]:
            keys["fin"][(i, int(c))] = B.var()
    link_cs = {}
    for e, (i, j) in enumerate(idx.wired):
        cs = np.nonzero(idx.wired_mask[e] & idx.hold[i] & idx.hold[j])[0]
        link_cs[(i, j)] = cs
        for c in cs:
            keys["fl"][(i, j, int(c))] = B.var()
    for l, (i, j) in enumerate(idx.links):
        cs = np.nonzero(idx.link_mask[l])[0]
        link_cs[(i, j)] = cs
        for c in cs:
            keys["fl"][(i, j, int(c))] = B.var()

    # flow conservation
    n0 = len(B.rows_ub)
    inflow = {}
    for (i, j, c), v in keys["fl"].items():
        inflow.setdefault((j, c), []).append(v)
    outflow = {}
    for (i, j, c), v in keys["fl"].items():
        outflow.setdefault((i, c), []).append(v)
    for i in range(N):
        for c in np.nonzero(idx.hold[i])[0]:
            c = int(c)
            if idx.c_final[c] and idx.c_dest[c] == i:
                continue
            row: dict = {}
            if idx.c_stage[c] > 1 and (i, c - 1) in keys["fin"]:
                _add(row, keys["fin"][(i, c - 1)], idx.c_xi[c - 1])
            for v in inflow.get((i, c), []):
                _add(row, v, 1.0)
            if (i, c) in keys["fin"]:
                _add(row, keys["fin"][(i, c)], -1.0)
            for v in outflow.get((i, c), []):
                _add(row, v, -1.0)
            lam = 0.0
            if idx.c_stage[c] == 1 and idx.c_dest[c] == i:
                lam = rates[i, idx.c_svc[c]]
            if theta is not None:
                if lam:
                    _add(row, theta, lam)
                B.le(row, 0.0)
            else:
                B.le(row, -lam)
    groups["conservation"] = len(B.rows_ub) - n0

    # computation
    n0 = len(B.rows_ub)
    for i in range(N):
        caps = idx.cap[i][np.isfinite(idx.setup[i])]
        a_vars = [B.var() for _ in caps]
        for k, v in enumerate(a_vars):
            keys["a_pr"][(i, k)] = v
            B.cost[v] = idx.setup[i, k]
        cs = [int(c) for c in np.nonzero(idx.proc_mask[i])[0]]
        for k, cap in enumerate(caps):
            if cap <= 0:
                continue
            row = {a_vars[k]: -1.0}
            for c in cs:
                v = keys["b_pr"][(i, k, c)] = B.var()
                B.cost[v] = idx.c_pr[i] * cap
                row[v] = 1.0
            B.le(row)
        for c in cs:
            row = {keys["fin"][(i, c)]: idx.c_work[c]}
            for k, cap in enumerate(caps):
                if cap > 0:
                    row[keys["b_pr"][(i, k, c)]] = -cap
            B.le(row)
        B.eq({v: 1.0 for v in a_vars}, 1.0)
    groups["compute"] = len(B.rows_ub) - n0

    # wired links
    n0 = len(B.rows_ub)
    for e, (i, j) in enumerate(idx.wired):
        caps = idx.w_cap[e][np.isfinite(idx.w_setup[e])]
        a_vars = [B.var() for _ in caps]
        for k, v in enumerate(a_vars):
            keys["a_w"][(e, k)] = v
            B.cost[v] = idx.w_setup[e, k]
        cs = [int(c) for c in link_cs[(i, j)]]
        for k, cap in enumerate(caps):
            if cap <= 0:
                continue
            row = {a_vars[k]: -1.0}
            for c in cs:
                v = keys["b_w"][(e, k, c)] = B.var()
                B.cost[v] = idx.c_tr[e] * cap
                row[v] = 1.0
            B.le(row)
        for c in cs:
            row = {keys["fl"][(i, j, c)]: 1.0}
            for k, cap in enumerate(caps):
                if cap > 0:
                    row[keys["b_w"][(e, k, c)]] = -cap
            B.le(row)
        B.eq({v: 1.0 for v in a_vars}, 1.0)
    groups["wired"] = len(B.rows_ub) - n0

    # wireless
    n0 = len(B.rows_ub)
    for i, rad in dinst.radios.items():
        G, Z = len(rad.probs), len(rad.powers)
        cap_rows = {}
        for pos, l in enumerate(rad.links):
            for c in link_cs[idx.links[l]]:
                cap_rows[(pos, int(c))] = {keys["fl"][(*idx.links[l], int(c))]: 1.0}
        for g in range(G):
            phis = []
            for z in range(Z):
                v = keys["phi"][(i, g, z)] = B.var()
                phis.append(v)
                B.cost[v] = idx.c_wt[i] * tau * rad.probs[g] * rad.powers[z].sum()
                for pos, l in enumerate(rad.links):
                    if rad.powers[z, pos] <= 0:
                        continue
                    R = bf * math.log2(1 + rad.gains[g, pos] * rad.powers[z, pos] / noise)
                    row = {v: -1.0}
                    for c in link_cs[idx.links[l]]:
                        b = keys["b_r"][(i, g, z, pos, int(c))] = B.var()
                        row[b] = 1.0
                        cap_rows[(pos, int(c))][b] = -tau * rad.probs[g] * R
                    B.le(row)
            B.eq({v: 1.0 for v in phis}, 1.0)
        for row in cap_rows.values():
            B.le(row)
    groups["wireless"] = len(B.rows_ub) - n0

    c = np.zeros(B.n)
    if objective == "theta":
        c[theta] = -1.0
    elif objective == "cost":
        for j, x in B.cost.items():
            c[j] = x
    keys["theta"] = theta
    return PolicyProgram(c, B._mat(B.rows_ub, B.n), np.array(B.b_ub), B._mat(B.rows_eq, B.n),
                         np.array(B.b_eq), objective, keys, groups, dinst, rates)


def _estimate_vars(dinst) -> int:
    idx = dinst.inst.index
    n = int(idx.proc_mask.sum()) * (1 + idx.cap.shape[1])
    n += len(idx.wired) * len(idx.comms) * (1 + idx.w_cap.shape[1])
    for i, r in dinst.radios.items():
        G, Z = len(r.probs), len(r.powers)
        n += G * Z * (1 + len(r.links) * len(idx.comms))
    return n


def solve(prog: PolicyProgram) -> OracleSolution:
    """Solve with HiGHS dual simplex (a basic, vertex solution)."""
    bounds = [(0, None)] * prog.n_vars
    res = linprog(prog.c, A_ub=prog.A_ub, b_ub=prog.b_ub, A_eq=prog.A_eq, b_eq=prog.b_eq,
                  bounds=bounds, method="highs-ds")
    if res.status == 2:
        return OracleSolution("infeasible", math.nan, None, program=prog)
    if res.status == 3:
        raise OracleError("program is unbounded; check the arrival direction")
    if res.status != 0:
        raise OracleError(f"LP solver failed: {res.message}")
    x = np.maximum(res.x, 0.0)
    return _unpack(prog, x, float(res.fun))


def _unpack(prog: PolicyProgram, x: np.ndarray, fun: float) -> OracleSolution:
    dinst = prog.dinst
    idx = dinst.inst.index
    k = prog.keys
    C = len(idx.comms)
    sol = OracleSolution("optimal", fun, float(x[k["theta"]]) if k["theta"] is not None else None)
    sol.f_proc = {key: float(x[v]) for key, v in k["fin"].items()}
    sol.f_link = {key: float(x[v]) for key, v in k["fl"].items()}
    for i in range(len(idx.nodes)):
        K = int(np.isfinite(idx.setup[i]).sum())
        a = np.array([x[k["a_pr"][(i, q)]] for q in range(K)])
        b = np.zeros((K, C))
        for (ii, q, c), v in k["b_pr"].items():
            if ii == i:
                b[q, c] = x[v]
        sol.alpha_proc[i], sol.beta_proc[i] = a, b
    for e in range(len(idx.wired)):
        K = int(np.isfinite(idx.w_setup[e]).sum())
        a = np.array([x[k["a_w"][(e, q)]] for q in range(K)])
        b = np.zeros((K, C))
        for (ee, q, c), v in k["b_w"].items():
            if ee == e:
                b[q, c] = x[v]
        sol.alpha_wired[e], sol.beta_wired[e] = a, b
    for i, rad in dinst.radios.items():
        G, Z, L = len(rad.probs), len(rad.powers), len(rad.links)
        ph = np.zeros((G, Z))
        br = np.zeros((G, Z, L, C))
        for (ii, g, z), v in k["phi"].items():
            if ii == i:
                ph[g, z] = x[v]
        for (ii, g, z, pos, c), v in k["b_r"].items():
            if ii == i:
                br[g, z, pos, c] = x[v]
        sol.phi[i], sol.beta_radio[i] = ph, br
    sol.cost = float(prog_cost(prog, x))
    sol.program = prog
    return sol


def prog_cost(prog: PolicyProgram, x: np.ndarray) -> float:
    """Expected per-slot cost of the policy encoded by ``x``."""
    if prog.objective == "cost":
        return float(prog.c @ x)
    cost_prog = build_policy_program(prog.dinst, prog.rates, "cost")
    # identical column layout apart from the theta column
    shift = 1 if prog.keys["theta"] is not None else 0
    return float(cost_prog.c @ x[shift:])


def check_certificate(sol: OracleSolution, tol: float = 1e-8) -> float:
    """Worst violation of the capacity conditions after recovering ell = beta/alpha.

    Rebuilds each capacity bound from (alpha, ell) products instead of the
    joint variables, so an inconsistent unpacking shows up here.
    """
    prog = sol.program
    dinst = prog.dinst
    inst = dinst.inst
    idx = inst.index
    tau, bf, noise = inst.wireless.slot_len, inst.wireless.pkts_per_hz, inst.wireless.noise_power
    lam = prog.rates * (sol.theta if sol.theta is not None else 1.0)
    worst = 0.0

    def ell(beta, alpha):
        with np.errstate(invalid="ignore", divide="ignore"):
            out = np.where(alpha[..., None] > 1e-15, beta / alpha[..., None], 0.0)
        return out

    for i, a in sol.alpha_proc.items():
        worst = max(worst, abs(a.sum() - 1.0), -a.min())
        L = ell(sol.beta_proc[i], a)
        worst = max(worst, float(L.sum(axis=1).max() - 1.0) if len(L) else 0.0)
        caps = idx.cap[i][: len(a)]
        for (ii, c), f in sol.f_proc.items():
            if ii == i:
                bound = float(np.sum(a * L[:, c] * caps)) / idx.c_work[c]
                worst = max(worst, f - bound)
    for e, a in sol.alpha_wired.items():
        worst = max(worst, abs(a.sum() - 1.0))
        L = ell(sol.beta_wired[e], a)
        caps = idx.w_cap[e][: len(a)]
        i, j = idx.wired[e]
        for (ii, jj, c), f in sol.f_link.items():
            if (ii, jj) == (i, j):
                worst = max(worst, f - float(np.sum(a * L[:, c] * caps)))
    for i, rad in dinst.radios.items():
        ph = sol.phi[i]
        worst = max(worst, float(np.abs(ph.sum(axis=1) - 1.0).max()))
        for pos, l in enumerate(rad.links):
            R = bf * np.log2(1 + rad.gains[:, pos][:, None] * rad.powers[:, pos][None, :] / noise)
            L = ell(sol.beta_radio[i][:, :, pos, :], ph)
            for (ii, jj, c), f in sol.f_link.items():
                if (ii, jj) == idx.links[l]:
                    bound = tau * float(np.sum(rad.probs[:, None] * ph * L[:, :, c] * R))
                    worst = max(worst, f - bound)
    # conservation with chaining
    N = len(idx.nodes)
    for i in range(N):
        for c in np.nonzero(idx.hold[i])[0]:
            c = int(c)
            if idx.c_final[c] and idx.c_dest[c] == i:
                continue
            inn = sum(f for (a_, b_, cc), f in sol.f_link.items() if b_ == i and cc == c)
            if idx.c_stage[c] > 1:
                inn += idx.c_xi[c - 1] * sol.f_proc.get((i, c - 1), 0.0)
            if idx.c_stage[c] == 1 and idx.c_dest[c] == i:
                inn += lam[i, idx.c_svc[c]]
            out = sol.f_proc.get((i, c), 0.0) + sum(
                f for (a_, b_, cc), f in sol.f_link.items() if a_ == i and cc == c)
            worst = max(worst, inn - out)
    return worst


def capacity_theta(inst, direction: np.ndarray | None = None, **grid) -> OracleSolution:
    """Max theta with arrivals theta * direction (default: the config's rates)."""
    d = inst.rates_array() if direction is None else np.asarray(direction, dtype=float)
    dinst = DiscreteInstance.from_instance(inst, **grid)
    return solve(build_policy_program(dinst, d, "theta"))


def min_cost(inst, rates: np.ndarray, **grid) -> OracleSolution:
    dinst = DiscreteInstance.from_instance(inst, **grid)
    return solve(build_policy_program(dinst, rates, "cost"))


def project_ue(config: dict, inst, ue: str) -> dict:
    """Config of ``inst`` reduced to the single UE ``ue`` (same servers and backhaul).

    The UE keeps its starting position and coverage; everything else is copied.
    """
    topo = inst.topology
    cfg = copy.deepcopy(config)
    t = cfg["topology"]
    t.pop("num_ues", None)
    t.pop("placement_seed", None)
    t["ues"] = [{"id": ue, "pos": list(map(float, topo.positions[ue]))}]
    for srv in t["servers"]:
        srv.pop("cluster", None)
        srv["pos"] = list(map(float, topo.positions[srv["id"]]))
    t["coverage"] = {"rule": "explicit", "map": {ue: list(topo.coverage[ue])}}
    cfg["name"] = f"{config.get('name', 'instance')}[{ue}]"
    return cfg


def projected_min_cost(config: dict, rates: np.ndarray, **grid) -> tuple[float, list[float]]:
    """Sum over UEs of the single-UE minimum cost at that UE's rates.

    With setup costs linear in capacity, any joint policy splits into per-UE
    policies whose costs add up to at most the joint cost, so the sum bounds the
    joint minimum from below (up to the CSI and power discretization).
    Returns ``(total, per_ue)``; ``inf`` entries mark infeasible projections.
    """
    from .model import build_instance
    inst = build_instance(config)
    rates = np.asarray(rates, dtype=float)
    per = []
    for u, ue in enumerate(inst.topology.ue_nodes):
        sub = build_instance(project_ue(config, inst, ue))
        sol = min_cost(sub, rates[u:u + 1], **grid)
        per.append(sol.cost if sol.feasible else math.inf)
    return float(sum(per)), per


def oracle_policy_for(inst, rates: np.ndarray, margin: float = 0.05) -> OracleSolution:
    """Min-cost policy for (1+margin)*rates, else the max-throughput policy."""
    rates = np.asarray(rates, dtype=float)
    dinst = DiscreteInstance.from_instance(inst)
    if rates.sum() == 0:
        return solve(build_policy_program(dinst, rates, "cost"))
    sol = solve(build_policy_program(dinst, rates * (1 + margin), "cost"))
    if sol.feasible:
        return sol
    sol = solve(build_policy_program(dinst, rates, "theta"))
    if not sol.feasible:
        raise OracleError("no feasible randomized policy")
    return sol


# ---------------------------------------------------------------------------
# sampling the stationary randomized policy

def _draw(rng, weights: np.ndarray) -> int:
    """Index drawn from nonnegative ``weights`` (mass < 1 leaves an empty outcome = -1)."""
    w = np.maximum(weights, 0.0)
    u = rng.random()
    acc = np.cumsum(w)
    k = int(np.searchsorted(acc, u, side="right"))
    return k if k < len(w) else -1


class RandomizedPolicy:
    name = "oracle"

    def __init__(self, inst, sol: OracleSolution, rng: np.random.Generator | None = None):
        if not sol.feasible:
            raise OracleError("cannot sample an infeasible solution")
        self.inst = inst
        self.sol = sol
        self.dinst = sol.program.dinst
        self.rng = rng or np.random.default_rng(0)
        wl = inst.wireless
        self.bf, self.noise, self.tau = wl.pkts_per_hz, wl.noise_power, wl.slot_len
        self.level_db = {}
        for i, rad in self.dinst.radios.items():
            self.level_db[i] = [10 * np.log10(np.unique(rad.gains[:, p])) for p in range(len(rad.links))]

    def _states(self, gains):
        st = np.zeros(len(gains), dtype=int)
        for i, rad in self.dinst.radios.items():
            for p, l in enumerate(rad.links):
                lv = self.level_db[i][p]
                st[l] = int(np.argmin(np.abs(lv - 10 * np.log10(gains[l]))))
        return st

    def decide(self, Q, gains, V=0.0, states=None) -> Decision:
        return sample_randomized_policy(self, self.rng, gains,
                                        self._states(gains) if states is None else states)


def sample_randomized_policy(policy: RandomizedPolicy, rng, gains: np.ndarray,
                             states: np.ndarray) -> Decision:
    """One slot of the stationary randomized policy given the observed CSI."""
    sol, dinst = policy.sol, policy.dinst
    idx = dinst.inst.index
    plan = FlowPlan()
    N = len(idx.nodes)
    klev = np.zeros(N, dtype=int)
    for i, a in sol.alpha_proc.items():
        k = max(_draw(rng, a / max(a.sum(), 1e-300)), 0)
        klev[i] = k
        cap = idx.cap[i, k]
        if cap <= 0 or a[k] <= 0:
            continue
        c = _draw(rng, sol.beta_proc[i][k] / a[k])
        if c >= 0:
            plan.to_proc[(i, c)] = cap / idx.c_work[c]
            plan.proc_cap[i] = cap
    wlev = np.zeros(len(idx.wired), dtype=int)
    for e, a in sol.alpha_wired.items():
        k = max(_draw(rng, a / max(a.sum(), 1e-300)), 0)
        wlev[e] = k
        cap = idx.w_cap[e, k]
        if cap <= 0 or a[k] <= 0:
            continue
        c = _draw(rng, sol.beta_wired[e][k] / a[k])
        if c >= 0:
            i, j = idx.wired[e]
            plan.link[(i, j, c)] = cap
            plan.link_cap[(i, j)] = cap
    power = np.zeros(len(idx.links))
    pk = np.zeros(len(idx.links))
    assoc: dict[int, int | None] = {u: None for u in range(idx.n_ue)}
    for i, rad in dinst.radios.items():
        g = dinst.state_index(i, states)
        ph = sol.phi[i][g]
        z = max(_draw(rng, ph / max(ph.sum(), 1e-300)), 0)
        if ph[z] <= 0:
            continue
        for pos, l in enumerate(rad.links):
            p = rad.powers[z, pos]
            if p <= 0:
                continue
            power[l] = p
            j = idx.links[l][1]
            if i < idx.n_ue:
                assoc[i] = j
            pk[l] = policy.bf * math.log2(1 + gains[l] * p / policy.noise) * policy.tau
            c = _draw(rng, sol.beta_radio[i][g, z, pos] / ph[z])
            if c >= 0 and pk[l] > 0:
                plan.link[(i, j, c)] = pk[l]
                plan.link_cap[(i, j)] = pk[l]
    return Decision(assoc, klev, wlev, power, plan, pk)
