"""Independent reference implementations used as test oracles.

Everything here is deliberately written from the slot dynamics directly,
without reusing the package's grouped-branch kernel code, so the two routes
can disagree when either is wrong.
"""

from __future__ import annotations

from typing import Dict, Tuple

import numpy as np

from rfcrn.model import ModelConfig, State
from rfcrn.simulate import SimConfig
from rfcrn.solver import Policy


def slot_step(
    config: ModelConfig, state: State, idle: bool, success: bool, arrival: bool
) -> State:
    """Next state for one realized slot (success = tx or harvest outcome)."""
    e, q = state.energy, state.queue
    if idle:
        if e >= config.tx_cost and q >= 1:
            e -= config.tx_cost
            if success:
                q -= 1
    else:
        if success:
            e = min(config.energy_capacity, e + 1)
    if arrival:
        q = min(config.queue_capacity, q + 1)
    return State(energy=e, queue=q)


def kernel_oracle(config: ModelConfig, state: State, action: int) -> Dict[State, float]:
    """Successor distribution by brute force over the 2x2x2 joint outcomes.

    The third coordinate is the conditional success draw: transmission
    success on an idle channel, harvest success on a busy one.
    """
    ch = config.channels[action]
    out: Dict[State, float] = {}
    for idle in (True, False):
        p_idle = ch.idle_prob if idle else 1.0 - ch.idle_prob
        p_base = ch.tx_success_prob if idle else ch.harvest_success_prob
        for success in (True, False):
            p_succ = p_base if success else 1.0 - p_base
            for arrival in (True, False):
                p_arr = config.arrival_prob if arrival else 1.0 - config.arrival_prob
                prob = p_idle * p_succ * p_arr
                if prob == 0.0:
                    continue
                succ_state = slot_step(config, state, idle, success, arrival)
                out[succ_state] = out.get(succ_state, 0.0) + prob
    return out


def reward_oracle(config: ModelConfig, state: State, action: int) -> float:
    """Expected packets delivered per slot, summed over the joint outcomes."""
    ch = config.channels[action]
    total = 0.0
    for idle in (True, False):
        p_idle = ch.idle_prob if idle else 1.0 - ch.idle_prob
        p_base = ch.tx_success_prob if idle else ch.harvest_success_prob
        for success in (True, False):
            p_succ = p_base if success else 1.0 - p_base
            for arrival in (True, False):
                p_arr = config.arrival_prob if arrival else 1.0 - config.arrival_prob
                departed = (
                    idle
                    and success
                    and state.energy >= config.tx_cost
                    and state.queue >= 1
                )
                if departed:
                    total += p_idle * p_succ * p_arr
    return total


def power_iteration_stationary(
    chain: np.ndarray, tol: float = 1e-13, max_iter: int = 1_000_000
) -> np.ndarray:
    """Stationary vector by damped power iteration (independent of GTH)."""
    n = chain.shape[0]
    mu = np.full(n, 1.0 / n)
    for _ in range(max_iter):
        nxt = 0.5 * (mu + mu @ chain)
        if np.abs(nxt - mu).sum() < tol:
            return nxt / nxt.sum()
        mu = nxt
    raise RuntimeError("power iteration did not converge")


def reference_simulate_counters(
    config: ModelConfig, policy: Policy, sim: SimConfig
) -> Tuple[int, int, int, int, int, int, np.ndarray]:
    """Slow re-derivation of the simulator from its documented contract.

    Draws four uniforms per slot, one at a time, from the documented
    per-replication generator; checks sample-path legality at every step.
    Returns the six counters plus visit counts, aggregated over
    replications.
    """
    E, Q, W = config.energy_capacity, config.queue_capacity, config.tx_cost
    visit = np.zeros(config.n_states, dtype=np.int64)
    tx_att = tx_succ = h_att = h_succ = drops = discards = 0
    for rep in range(sim.replications):
        rng = np.random.default_rng(
            np.random.SeedSequence(entropy=sim.seed, spawn_key=(rep,))
        )
        state = sim.initial_state
        for slot in range(sim.burn_in + sim.slots):
            counting = slot >= sim.burn_in
            u_act = rng.random()
            u_idle = rng.random()
            u_out = rng.random()
            u_arr = rng.random()
            cum = 0.0
            action = config.n_channels - 1
            for a in range(config.n_channels):
                cum += policy.probabilities[config.state_index(state), a]
                if u_act < cum:
                    action = a
                    break
            ch = config.channels[action]
            idle = u_idle < ch.idle_prob
            if counting:
                visit[config.state_index(state)] += 1
            can_tx = idle and state.energy >= W and state.queue >= 1
            if counting:
                if can_tx:
                    tx_att += 1
                if not idle:
                    h_att += 1
            success = u_out < (ch.tx_success_prob if idle else ch.harvest_success_prob)
            if counting:
                if can_tx and success:
                    tx_succ += 1
                if not idle and success:
                    h_succ += 1
                    if state.energy == E:
                        discards += 1
            arrival = u_arr < config.arrival_prob
            after_outcome = slot_step(config, state, idle, success, arrival=False)
            if counting and arrival and after_outcome.queue == Q:
                drops += 1
            nxt = slot_step(config, state, idle, success, arrival)
            # Sample-path legality: bounds and single-step increments.
            assert 0 <= nxt.energy <= E and 0 <= nxt.queue <= Q
            assert nxt.queue - state.queue <= 1
            assert nxt.queue >= state.queue - 1
            assert nxt.energy in (state.energy, min(E, state.energy + 1)) or (
                nxt.energy == state.energy - W
            )
            state = nxt
    return tx_att, tx_succ, h_att, h_succ, drops, discards, visit
