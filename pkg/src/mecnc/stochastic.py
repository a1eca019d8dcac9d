"""Randomness: UE mobility, channel gains, Poisson arrivals.

Each purpose draws from its own ``numpy.random.Generator`` spawned from one
seed, so switching a feature off never shifts another feature's sequence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass
class Streams:
    mobility: np.random.Generator
    channel: np.random.Generator
    arrivals: np.random.Generator
    policy: np.random.Generator

    @classmethod
    def from_seed(cls, seed: int) -> "Streams":
        ss = np.random.SeedSequence(seed)
        return cls(*(np.random.default_rng(s) for s in ss.spawn(4)))


@dataclass
class ChannelState:
    gains: np.ndarray                 # linear power gain per wireless link
    states: np.ndarray | None = None  # discrete state index per link, if discrete


def step_mobility(positions: np.ndarray, var: float, side: float,
                  rng: np.random.Generator) -> np.ndarray:
    """One slot of a Gaussian random walk reflected at the square's edges."""
    if var == 0:
        return positions.copy()
    step = rng.normal(0.0, math.sqrt(var), size=positions.shape)
    return reflect(positions + step, side)


def reflect(x: np.ndarray, side: float) -> np.ndarray:
    y = np.mod(x, 2 * side)
    return np.where(y > side, 2 * side - y, y)


def path_loss_db(distance_m, fc_ghz: float):
    """3GPP urban-microcell path loss; distances below 1 m are clamped."""
    d = np.maximum(np.asarray(distance_m, dtype=float), 1.0)
    out = 32.4 + 20.0 * math.log10(fc_ghz) + 31.9 * np.log10(d)
    return float(out) if out.ndim == 0 else out


class ChannelSampler:
    """Per-slot channel gains for every wireless link of an instance."""

    def __init__(self, inst):
        idx = inst.index
        wl = inst.wireless
        self.src = idx.l_src
        self.dst = idx.l_dst
        self.n_ue = idx.n_ue
        self.fc_ghz = wl.carrier_freq / 1e9
        self.gain_db = wl.antenna_gain_db
        self.sigma = wl.shadow_sigma_db
        self.discrete = None
        if wl.discrete is not None:
            links = inst.topology.wireless_links()
            tabs = [wl.discrete[l] for l in links]
            width = max(len(t.gains) for t in tabs)
            self.d_gain = np.ones((len(links), width))
            self.d_cdf = np.ones((len(links), width))
            for l, t in enumerate(tabs):
                self.d_gain[l, : len(t.gains)] = t.gains
                self.d_cdf[l, : len(t.probs)] = np.cumsum(t.probs)
            self.d_cdf[:, -1] = 1.0
            self.discrete = True

    def sample(self, positions: np.ndarray, rng: np.random.Generator) -> ChannelState:
        """``positions`` is the full node position array (UEs first)."""
        n = len(self.src)
        if self.discrete:
            u = rng.random(n)
            st = (u[:, None] >= self.d_cdf).sum(axis=1)
            st = np.minimum(st, self.d_gain.shape[1] - 1)
            return ChannelState(self.d_gain[np.arange(n), st], st)
        d = np.hypot(*(positions[self.src] - positions[self.dst]).T)
        shadow = rng.normal(0.0, self.sigma, size=n) if self.sigma > 0 else 0.0
        g_db = self.gain_db - path_loss_db(d, self.fc_ghz) - shadow
        return ChannelState(10.0 ** (g_db / 10.0))


def sample_channel_gains(inst, positions: np.ndarray, rng: np.random.Generator) -> ChannelState:
    return ChannelSampler(inst).sample(positions, rng)


def rate_from_mbps(mbps: float, packet_size: float, slot_len: float, n_ue: int,
                   n_services: int) -> float:
    """Network-aggregate Mb/s to packets/slot per UE per service, split equally."""
    if mbps < 0:
        raise ValueError("aggregate rate must be nonnegative")
    return mbps * 1e6 * slot_len / packet_size / (n_ue * n_services)


def a_max_for(rates: np.ndarray, factor: float = 50.0) -> np.ndarray:
    """Arrival truncation bound: ceil(factor * lambda), at least 1."""
    return np.maximum(np.ceil(factor * np.asarray(rates, dtype=float)), 1.0)


def sample_arrivals(rng: np.random.Generator, rates: np.ndarray,
                    a_max: np.ndarray | None = None) -> np.ndarray:
    """Truncated Poisson packet counts, same shape as ``rates``."""
    rates = np.asarray(rates, dtype=float)
    a = rng.poisson(rates)
    if a_max is None:
        a_max = a_max_for(rates)
    return np.minimum(a, a_max).astype(np.int64)


def link_rate(g, p, bandwidth: float, packet_size: float, noise_power: float):
    """Packets per second, (B/F) log2(1 + g p / sigma^2)."""
    return (bandwidth / packet_size) * np.log2(1.0 + np.asarray(g) * np.asarray(p) / noise_power)
