"""Slotted-time stochastic routing simulator.

Each slot, an active sensor generates a measurement message with probability
r_i * rbar_i; every backlogged node makes at most one transmission attempt,
choosing the destination from its routing row (with residual no-attempt
probability 1 - sum_p T_ip) and succeeding with the link reliability. Failed
attempts keep the message at the head of the FIFO queue. Messages reaching an
access point are terminal and feed a best-linear-unbiased estimate of the
sensed parameter.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .model import Scenario, SingularInformation, build_edges, _pd_inverse
from .selection import Solution


@dataclass(frozen=True)
class SimConfig:
    horizon: int = 20000
    drain: int = 5000
    seed: int = 0
    noiseless: bool = False
    theta: np.ndarray | None = None

    def __post_init__(self):
        if self.horizon < 1 or self.drain < 0:
            raise ValueError("need horizon >= 1 and drain >= 0")
        if self.theta is not None:
            object.__setattr__(self, "theta", np.asarray(self.theta, dtype=float))


@dataclass(frozen=True)
class Message:
    origin: int
    slot: int
    payload: float


@dataclass(frozen=True)
class SimReport:
    generated: int
    delivered: int
    delivery_ratio: float
    mean_queue: float
    max_queue: int
    frac_empty: np.ndarray  # (J,) fraction of slots with an empty queue
    final_queues: np.ndarray  # (J,)
    delivered_counts: np.ndarray  # (J,) messages delivered per origin
    theta_hat: np.ndarray | None
    scaled_mse: float | None  # horizon * tr(estimator covariance)

    def to_json(self) -> str:
        doc = {
            "generated": self.generated,
            "delivered": self.delivered,
            "delivery_ratio": self.delivery_ratio,
            "mean_queue": self.mean_queue,
            "max_queue": self.max_queue,
            "frac_empty": self.frac_empty.tolist(),
            "final_queues": self.final_queues.tolist(),
            "delivered_counts": self.delivered_counts.tolist(),
            "theta_hat": None if self.theta_hat is None else self.theta_hat.tolist(),
            "scaled_mse": self.scaled_mse,
        }
        return json.dumps(doc, indent=1)


def blue_estimate(
    s: Scenario,
    counts: np.ndarray,
    sums: np.ndarray,
    horizon: int,
) -> tuple[np.ndarray, float]:
    """Best linear unbiased estimate from per-sensor delivered counts and
    payload sums; also the scaled error horizon * tr(covariance).

    With exact counts n_i = H r_i rbar_i the scaled error equals the
    MSE-rate f(r) identically.
    """
    counts = np.asarray(counts, dtype=float)
    sums = np.asarray(sums, dtype=float)
    w = counts / s.noise_std**2
    M = (s.regressors * w[:, None]).T @ s.regressors
    Minv = _pd_inverse(M)
    theta_hat = Minv @ (s.regressors.T @ (sums / s.noise_std**2))
    return theta_hat, float(horizon * np.trace(Minv))


def simulate_routing(
    s: Scenario, sol: Solution, cfg: SimConfig, trace_file=None
) -> SimReport:
    """Run the slot loop; deterministic in cfg.seed.

    One RNG stream drives generation (arrivals and measurement noise) and one
    stream per sensor drives its routing choices, all derived from the master
    seed, so the report does not depend on iteration order. trace_file, when
    given, receives per-slot queue lengths as CSV rows (slot, node, queue_len).
    """
    J = s.num_sensors
    R = build_edges(s).reliability_matrix(J, s.num_nodes)
    theta = cfg.theta if cfg.theta is not None else np.ones(s.dim)
    gen_prob = sol.r * s.max_rates

    root = np.random.SeedSequence(cfg.seed)
    streams = root.spawn(J + 1)
    gen_rng = np.random.default_rng(streams[0])
    node_rng = [np.random.default_rng(ss) for ss in streams[1:]]

    # per-sensor routing rows as (destinations, cumulative probabilities)
    dests, cum = [], []
    for i in range(J):
        nz = np.flatnonzero(sol.T[i] > 0.0)
        dests.append(nz)
        cum.append(np.cumsum(sol.T[i, nz]))

    queues: list[list[Message]] = [[] for _ in range(J)]
    generated = delivered = 0
    del_counts = np.zeros(J, dtype=np.int64)
    del_sums = np.zeros(J)
    empty_slots = np.zeros(J, dtype=np.int64)
    tot_queue = 0
    max_queue = 0
    total_slots = cfg.horizon + cfg.drain

    if trace_file is not None:
        trace_file.write("slot,node,queue_len\n")

    for slot in range(total_slots):
        if slot < cfg.horizon:
            u = gen_rng.random(J)
            arrivals = np.flatnonzero(u < gen_prob)
            if cfg.noiseless:
                noise = np.zeros(len(arrivals))
            else:
                noise = gen_rng.standard_normal(len(arrivals)) * s.noise_std[arrivals]
            for i, n_i in zip(arrivals, noise):
                y = float(s.regressors[i] @ theta + n_i)
                queues[i].append(Message(int(i), slot, y))
                generated += 1
        # snapshot backlog so a message cannot hop twice in one slot
        backlogged = [i for i in range(J) if queues[i]]
        for i in backlogged:
            rng = node_rng[i]
            u = rng.random()
            k = int(np.searchsorted(cum[i], u, side="right"))
            if k >= len(dests[i]):
                continue  # residual probability: no attempt this slot
            p = int(dests[i][k])
            if rng.random() < R[i, p]:
                msg = queues[i].pop(0)
                if p >= J:
                    delivered += 1
                    del_counts[msg.origin] += 1
                    del_sums[msg.origin] += msg.payload
                else:
                    queues[p].append(msg)
        lens = [len(q) for q in queues]
        if __debug__:
            assert generated == delivered + sum(lens)
        for i, ln in enumerate(lens):
            if ln == 0:
                empty_slots[i] += 1
        tot_queue += sum(lens)
        max_queue = max(max_queue, max(lens, default=0))
        if trace_file is not None:
            for i, ln in enumerate(lens):
                trace_file.write(f"{slot},{i},{ln}\n")

    theta_hat, scaled_mse = None, None
    if delivered > 0:
        try:
            theta_hat, scaled_mse = blue_estimate(
                s, del_counts, del_sums, cfg.horizon
            )
        except SingularInformation:
            pass  # delivered regressors do not span; report without estimate
    return SimReport(
        generated=generated,
        delivered=delivered,
        delivery_ratio=(delivered / generated) if generated else 1.0,
        mean_queue=tot_queue / total_slots,
        max_queue=max_queue,
        frac_empty=empty_slots / total_slots,
        final_queues=np.array([len(q) for q in queues], dtype=float),
        delivered_counts=del_counts,
        theta_hat=theta_hat,
        scaled_mse=scaled_mse,
    )
