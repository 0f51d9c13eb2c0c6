"""Seeded slot-by-slot Monte Carlo simulation of the queue/energy process.

Gives an independent sample-path estimate of long-run throughput under any
stationary policy, for cross-checking the exact solver.  Reproducibility
contract: replication r draws from numpy's
``default_rng(SeedSequence(entropy=seed, spawn_key=(r,)))`` and every slot
consumes exactly four uniforms, in order: action, channel idle/busy,
transmit-or-harvest outcome, packet arrival.  The outcome draw is discarded
on slots where neither a transmission nor a harvest takes place, which
keeps the stream aligned regardless of the path taken.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from .model import ModelConfig, State
from .solver import Policy

__all__ = ["SimConfig", "SimReport", "simulate", "visit_frequencies"]

# Uniforms drawn per slot and per-chunk slot count for bulk generation.
_DRAWS_PER_SLOT = 4
_CHUNK = 1 << 16

# Column order of SimReport.to_csv_row().
REPORT_CSV_COLUMNS = (
    "slots",
    "replications",
    "seed",
    "throughput",
    "stderr",
    "attempts",
    "successes",
    "drops",
    "discards",
)


@dataclass(frozen=True)
class SimConfig:
    """Simulation run settings.

    burn_in slots are simulated before statistics collection starts and are
    excluded from every reported quantity (default none).
    """

    slots: int
    seed: int
    initial_state: State = State(0, 0)
    replications: int = 1
    burn_in: int = 0

    def __post_init__(self) -> None:
        if self.slots < 1:
            raise ValueError(f"slots must be >= 1, got {self.slots}")
        if self.replications < 1:
            raise ValueError(f"replications must be >= 1, got {self.replications}")
        if self.burn_in < 0:
            raise ValueError(f"burn_in must be >= 0, got {self.burn_in}")
        if not (0 <= self.seed < 2**64):
            raise ValueError("seed must fit in 64 bits")


@dataclass(frozen=True)
class SimReport:
    """Aggregated sample-path statistics.

    throughput_estimate is successful transmissions per counted slot,
    averaged over replications; visit_counts holds state-visit tallies in
    state-index order.  Counters are totals over all replications.
    """

    slots: int
    replications: int
    seed: int
    burn_in: int
    throughput_estimate: float
    replication_throughputs: Tuple[float, ...]
    standard_error: float
    visit_counts: np.ndarray
    tx_attempted: int
    tx_succeeded: int
    harvest_attempted: int
    harvest_succeeded: int
    packets_dropped: int
    harvest_discarded: int

    def to_text(self) -> str:
        """Flat key-value block, one `key: value` line per field."""
        lines = [
            f"slots: {self.slots}",
            f"replications: {self.replications}",
            f"seed: {self.seed}",
            f"burn_in: {self.burn_in}",
            f"throughput: {self.throughput_estimate:.12g}",
            f"stderr: {self.standard_error:.12g}",
            f"tx_attempted: {self.tx_attempted}",
            f"tx_succeeded: {self.tx_succeeded}",
            f"harvest_attempted: {self.harvest_attempted}",
            f"harvest_succeeded: {self.harvest_succeeded}",
            f"packets_dropped: {self.packets_dropped}",
            f"harvest_discarded: {self.harvest_discarded}",
        ]
        return "\n".join(lines) + "\n"

    def to_csv_row(self) -> str:
        """Comma-joined values in REPORT_CSV_COLUMNS order."""
        return ",".join(
            (
                str(self.slots),
                str(self.replications),
                str(self.seed),
                f"{self.throughput_estimate:.12g}",
                f"{self.standard_error:.12g}",
                str(self.tx_attempted),
                str(self.tx_succeeded),
                str(self.packets_dropped),
                str(self.harvest_discarded),
            )
        )


def visit_frequencies(report: SimReport) -> np.ndarray:
    """Empirical state occupancy (state-index order); sums to one."""
    total = report.visit_counts.sum()
    return report.visit_counts / total


def _replication_rng(seed: int, replication: int) -> np.random.Generator:
    """The documented per-replication generator: independent spawned stream."""
    return np.random.default_rng(
        np.random.SeedSequence(entropy=seed, spawn_key=(replication,))
    )


def _run_replication(
    config: ModelConfig,
    cum_rows: List[List[float]],
    sim: SimConfig,
    replication: int,
    visit_counts: List[int],
) -> Tuple[int, int, int, int, int, int]:
    """One replication's slot loop; returns the six raw counters."""
    rng = _replication_rng(sim.seed, replication)
    cap_e = config.energy_capacity
    cap_q = config.queue_capacity
    cost = config.tx_cost
    arrival = config.arrival_prob
    idle_p = [ch.idle_prob for ch in config.channels]
    tx_p = [ch.tx_success_prob for ch in config.channels]
    harvest_p = [ch.harvest_success_prob for ch in config.channels]
    qp1 = cap_q + 1

    e = sim.initial_state.energy
    q = sim.initial_state.queue
    tx_att = tx_succ = h_att = h_succ = drops = discards = 0
    burn = sim.burn_in
    total = burn + sim.slots
    slot = 0
    while slot < total:
        block = min(_CHUNK, total - slot)
        draws = rng.random((block, _DRAWS_PER_SLOT)).tolist()
        for u_act, u_idle, u_out, u_arr in draws:
            counting = slot >= burn
            idx = e * qp1 + q
            row = cum_rows[idx]
            action = 0
            while u_act >= row[action]:
                action += 1
            if counting:
                visit_counts[idx] += 1
            if u_idle < idle_p[action]:
                if e >= cost and q >= 1:
                    e -= cost
                    if counting:
                        tx_att += 1
                    if u_out < tx_p[action]:
                        q -= 1
                        if counting:
                            tx_succ += 1
            else:
                if counting:
                    h_att += 1
                if u_out < harvest_p[action]:
                    if counting:
                        h_succ += 1
                    if e == cap_e:
                        if counting:
                            discards += 1
                    else:
                        e += 1
            if u_arr < arrival:
                if q == cap_q:
                    if counting:
                        drops += 1
                else:
                    q += 1
            slot += 1
    return tx_att, tx_succ, h_att, h_succ, drops, discards


def simulate(config: ModelConfig, policy: Policy, sim: SimConfig) -> SimReport:
    """Monte Carlo sample-path run of the model under a stationary policy.

    Within each slot, in order: the action is sampled from the policy at the
    current state; the channel's idle/busy status is sampled; on an idle
    channel with energy >= tx_cost and a non-empty queue the transmitter
    spends tx_cost and samples transmission success (a success removes the
    head packet and scores one throughput unit); on a busy channel harvest
    success is sampled (a success adds one energy unit, clipped at capacity
    and counted as discarded when clipped); finally the arrival is sampled
    and admitted (clipped at queue capacity and counted as dropped when
    clipped).  Departure precedes arrival, matching the transition model.
    Fully deterministic given the seed.
    """
    config.validate_state(sim.initial_state)
    if policy.probabilities.shape != (config.n_states, config.n_channels):
        raise ValueError(
            f"policy shape {policy.probabilities.shape} does not match the "
            f"configuration ({config.n_states} states, {config.n_channels} channels)"
        )
    # Per-state cumulative action thresholds; last entry pinned to 1.0 so the
    # selection scan always terminates.
    cum_rows: List[List[float]] = []
    for s in range(config.n_states):
        cum = np.cumsum(policy.probabilities[s]).tolist()
        cum[-1] = 1.0
        cum_rows.append(cum)

    visit_counts = [0] * config.n_states
    throughputs: List[float] = []
    totals = [0, 0, 0, 0, 0, 0]
    for rep in range(sim.replications):
        counters = _run_replication(config, cum_rows, sim, rep, visit_counts)
        throughputs.append(counters[1] / sim.slots)
        for i, c in enumerate(counters):
            totals[i] += c

    reps = sim.replications
    estimate = float(np.mean(throughputs))
    if reps > 1:
        stderr = float(np.std(throughputs, ddof=1) / math.sqrt(reps))
    else:
        stderr = 0.0
    counts = np.asarray(visit_counts, dtype=np.int64)
    counts.setflags(write=False)
    return SimReport(
        slots=sim.slots,
        replications=reps,
        seed=sim.seed,
        burn_in=sim.burn_in,
        throughput_estimate=estimate,
        replication_throughputs=tuple(throughputs),
        standard_error=stderr,
        visit_counts=counts,
        tx_attempted=totals[0],
        tx_succeeded=totals[1],
        harvest_attempted=totals[2],
        harvest_succeeded=totals[3],
        packets_dropped=totals[4],
        harvest_discarded=totals[5],
    )
