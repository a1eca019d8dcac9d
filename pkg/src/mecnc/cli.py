"""Command line: run, sweep-lambda, sweep-v, oracle, validate."""

from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from . import harness
from .model import ConfigError, build_instance, load_config
from .stochastic import rate_from_mbps


def _grid(text: str) -> list[float]:
    """``a,b,c`` or ``start:stop:n`` (linear) or ``log:start:stop:n``."""
    if text.startswith("log:"):
        a, b, n = text[4:].split(":")
        return [float(x) for x in np.geomspace(float(a), float(b), int(n))]
    if ":" in text:
        a, b, n = text.split(":")
        return [float(x) for x in np.linspace(float(a), float(b), int(n))]
    return [float(x) for x in text.split(",")]


def _lambda(args, config: dict) -> float | None:
    if getattr(args, "mbps", None) is None:
        return args.lam
    inst = build_instance(config)
    wl = inst.wireless
    return rate_from_mbps(args.mbps, wl.packet_size, wl.slot_len, len(inst.topology.ue_nodes),
                          len(inst.services))


def _base(args) -> harness.RunConfig:
    config = load_config(args.config)
    return harness.RunConfig(instance=config, V=args.v, lam=_lambda(args, config),
                             slots=args.slots, warmup=args.warmup, seed=args.seed,
                             controller=args.controller, out=args.out, trace=args.trace)


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", required=True, help="config path or built-in name (tiny, desk, full)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--slots", type=int, default=10_000)
    p.add_argument("--warmup", type=float, default=0.1)
    p.add_argument("--v", type=float, default=0.0)
    rate = p.add_mutually_exclusive_group()
    rate.add_argument("--lambda", dest="lam", type=float, default=None,
                      help="packets per slot per UE per service (default: config rates)")
    rate.add_argument("--mbps", type=float, default=None,
                      help="network-aggregate Mb/s, split equally over UEs and services")
    p.add_argument("--out", default=None)
    p.add_argument("--controller", choices=("mecnc", "oracle", "local"), default="mecnc")
    p.add_argument("--trace", action="store_true", help="also write queues.csv and decisions.csv")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mecnc", description=__doc__)
    ap.add_argument("-q", "--quiet", action="store_true")
    sub = ap.add_subparsers(dest="verb", required=True)
    _common(sub.add_parser("run", help="simulate one configuration"))
    p = sub.add_parser("sweep-lambda", help="arrival-rate sweep and knee estimate")
    _common(p)
    p.add_argument("--grid", required=True, help="a,b,c | start:stop:n | log:start:stop:n")
    p.add_argument("--seeds", type=int, default=1)
    p = sub.add_parser("sweep-v", help="cost/delay trade-off over V")
    _common(p)
    p.add_argument("--grid", required=True)
    p.add_argument("--seeds", type=int, default=1)
    p = sub.add_parser("oracle", help="solve the randomized-policy LP")
    p.add_argument("--config", required=True)
    p.add_argument("--lambda", dest="lam", type=float, default=None)
    p.add_argument("--objective", choices=("theta", "cost", "feasibility"), default="theta")
    p.add_argument("--out", default=None, help="write the solution as JSON")
    p = sub.add_parser("validate", help="check a config and print its size")
    p.add_argument("--config", required=True)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(message)s")
    try:
        return _dispatch(args)
    except (ConfigError, ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def _dispatch(args) -> int:
    if args.verb == "validate":
        inst = build_instance(load_config(args.config))
        idx = inst.index
        print(json.dumps({"ues": idx.n_ue, "servers": len(idx.nodes) - idx.n_ue,
                          "commodities": len(idx.comms), "wired_edges": len(idx.wired),
                          "wireless_links": len(idx.links)}))
        return 0
    if args.verb == "oracle":
        from . import oracle
        inst = build_instance(load_config(args.config))
        rates = inst.rates_array()
        if args.lam is not None:
            rates = np.full_like(rates, args.lam)
        dinst = oracle.DiscreteInstance.from_instance(inst)
        sol = oracle.solve(oracle.build_policy_program(dinst, rates, args.objective))
        doc = sol.as_dict()
        if args.out:
            with open(args.out, "w") as fh:
                json.dump(doc, fh, indent=2)
        print(json.dumps({k: doc[k] for k in ("status", "objective", "theta", "cost")}))
        return 0 if sol.feasible else 1
    base = _base(args)
    if args.verb == "run":
        res = harness.run(base)
        print(json.dumps(res.summary(), default=float, sort_keys=True))
        return 0
    spec = harness.SweepSpec("lambda" if args.verb == "sweep-lambda" else "V", _grid(args.grid),
                             list(range(args.seed, args.seed + args.seeds)))
    if spec.variable == "lambda":
        rep = harness.sweep_lambda(spec, base)
        print(json.dumps({k: rep[k] for k in ("grid", "stable", "delay_ms", "knee",
                                              "monotone_violations")}, default=float))
    else:
        rep = harness.sweep_V(spec, base)
        print(json.dumps(rep["rows"], default=float, indent=1))
    return 0


if __name__ == "__main__":
    sys.exit(main())
