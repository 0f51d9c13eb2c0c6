"""Slot-level decision model of an energy-harvesting secondary transmitter.

A single unlicensed transmitter with a finite data queue and a finite energy
store picks one licensed channel per time slot.  On an idle channel it may
transmit the head-of-queue packet (spending stored energy); on a busy channel
it may harvest one unit of RF energy.  Packet arrivals, channel occupancy,
transmission success, and harvest success are independent Bernoulli events
per slot.  This module holds the domain types and builds the exact average
transition kernel and expected per-slot throughput for every (state, action)
pair.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np

__all__ = [
    "ChannelParams",
    "ModelConfig",
    "State",
    "TransitionModel",
    "enumerate_states",
    "successor_distribution",
    "immediate_reward",
    "build_model",
    "default_model",
]

# Numerical tolerance for "each transition row sums to one".
ROW_SUM_TOL = 1e-12


def _check_prob(value: float, name: str) -> None:
    if not (0.0 <= value <= 1.0):
        raise ValueError(f"{name} must lie in [0, 1], got {value!r}")


@dataclass(frozen=True)
class ChannelParams:
    """Per-channel statistics seen by the transmitter.

    idle_prob            probability the channel carries no licensed traffic
                         in a slot (transmission opportunity)
    tx_success_prob      probability a transmission on the idle channel is
                         received without error
    harvest_success_prob probability that one unit of energy is harvested
                         from the busy channel
    """

    idle_prob: float
    tx_success_prob: float
    harvest_success_prob: float

    def __post_init__(self) -> None:
        _check_prob(self.idle_prob, "idle_prob")
        _check_prob(self.tx_success_prob, "tx_success_prob")
        _check_prob(self.harvest_success_prob, "harvest_success_prob")


@dataclass(frozen=True)
class ModelConfig:
    """Global model: channel list, capacities, transmit cost, arrival rate.

    queue_capacity and energy_capacity bound the data queue (packets) and
    energy store (units).  tx_cost is the energy spent per transmission
    attempt.  arrival_prob is the per-slot packet arrival probability.
    """

    channels: Tuple[ChannelParams, ...]
    queue_capacity: int
    energy_capacity: int
    tx_cost: int
    arrival_prob: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "channels", tuple(self.channels))
        if len(self.channels) == 0:
            raise ValueError("channels must be non-empty")
        if self.queue_capacity < 0:
            raise ValueError(f"queue_capacity must be >= 0, got {self.queue_capacity}")
        if self.energy_capacity < 0:
            raise ValueError(f"energy_capacity must be >= 0, got {self.energy_capacity}")
        if self.tx_cost < 1:
            raise ValueError(f"tx_cost must be >= 1, got {self.tx_cost}")
        # energy_capacity == 0 is the documented degenerate family in which
        # transmission is never eligible; any larger store must cover tx_cost.
        if self.energy_capacity > 0 and self.tx_cost > self.energy_capacity:
            raise ValueError(
                f"tx_cost ({self.tx_cost}) must not exceed "
                f"energy_capacity ({self.energy_capacity})"
            )
        _check_prob(self.arrival_prob, "arrival_prob")

    @property
    def n_channels(self) -> int:
        return len(self.channels)

    @property
    def n_states(self) -> int:
        return (self.energy_capacity + 1) * (self.queue_capacity + 1)

    def state_index(self, state: "State") -> int:
        """Bijective index of a state: energy-major, queue-minor."""
        self.validate_state(state)
        return state.energy * (self.queue_capacity + 1) + state.queue

    def state_at(self, index: int) -> "State":
        """Inverse of state_index."""
        if not (0 <= index < self.n_states):
            raise ValueError(f"state index {index} out of range [0, {self.n_states})")
        qp1 = self.queue_capacity + 1
        return State(energy=index // qp1, queue=index % qp1)

    def validate_state(self, state: "State") -> None:
        if not (0 <= state.energy <= self.energy_capacity):
            raise ValueError(
                f"state energy {state.energy} out of range [0, {self.energy_capacity}]"
            )
        if not (0 <= state.queue <= self.queue_capacity):
            raise ValueError(
                f"state queue {state.queue} out of range [0, {self.queue_capacity}]"
            )

    def validate_action(self, action: int) -> None:
        if not (0 <= action < self.n_channels):
            raise ValueError(
                f"action {action} out of range [0, {self.n_channels}) "
                "(channel index)"
            )


@dataclass(frozen=True, order=True)
class State:
    """Combined (energy level, queue length) state of the transmitter."""

    energy: int
    queue: int


def default_model() -> ModelConfig:
    """The shipped two-channel reference configuration.

    Channel 0 is mostly busy (good for harvesting), channel 1 mostly idle
    (good for transmitting); capacities 10/10, unit transmit cost, arrival
    probability one half.
    """
    return ModelConfig(
        channels=(
            ChannelParams(idle_prob=0.1, tx_success_prob=0.95, harvest_success_prob=0.95),
            ChannelParams(idle_prob=0.9, tx_success_prob=0.95, harvest_success_prob=0.70),
        ),
        queue_capacity=10,
        energy_capacity=10,
        tx_cost=1,
        arrival_prob=0.5,
    )


def enumerate_states(config: ModelConfig) -> List[State]:
    """All (energy, queue) states in index order (energy-major, queue-minor)."""
    return [
        State(energy=e, queue=q)
        for e in range(config.energy_capacity + 1)
        for q in range(config.queue_capacity + 1)
    ]


def immediate_reward(config: ModelConfig, state: State, action: int) -> float:
    """Expected packets delivered in one slot from `state` on channel `action`.

    Equals idle_prob * tx_success_prob of the selected channel when the
    transmitter is eligible to send (energy >= tx_cost and a queued packet
    exists), else 0: a packet departs only when the channel turns out idle
    and the transmission succeeds.
    """
    config.validate_state(state)
    config.validate_action(action)
    if state.energy >= config.tx_cost and state.queue > 0:
        ch = config.channels[action]
        return ch.idle_prob * ch.tx_success_prob
    return 0.0


def successor_distribution(
    config: ModelConfig, state: State, action: int
) -> Dict[State, float]:
    """Exact one-slot successor distribution for (state, action).

    Mixes the independent per-slot events: channel idle (idle_prob), packet
    arrival (arrival_prob), and conditionally transmission success
    (tx_success_prob, only on an idle channel with energy >= tx_cost and a
    non-empty queue) or harvest success (harvest_success_prob, only on a
    busy channel).  A transmission attempt always spends tx_cost energy;
    the departing packet (on success) leaves before the arrival is
    admitted; queue and store are clipped at their capacities.  Outcomes
    landing on the same successor are merged; zero-probability outcomes
    are omitted.
    """
    config.validate_state(state)
    config.validate_action(action)
    ch = config.channels[action]
    cap_q = config.queue_capacity
    cap_e = config.energy_capacity
    e, q = state.energy, state.queue

    idle = ch.idle_prob
    busy = 1.0 - ch.idle_prob
    arrival_cases = ((config.arrival_prob, 1), (1.0 - config.arrival_prob, 0))

    dist: Dict[State, float] = {}

    def add(energy: int, queue: int, prob: float) -> None:
        if prob <= 0.0:
            return
        succ = State(energy=energy, queue=queue)
        dist[succ] = dist.get(succ, 0.0) + prob

    if idle > 0.0:
        if e >= config.tx_cost and q > 0:
            # Transmission attempted: energy drops by tx_cost either way.
            e_after = e - config.tx_cost
            sigma = ch.tx_success_prob
            for p_arr, arr in arrival_cases:
                add(e_after, min(cap_q, q - 1 + arr), idle * sigma * p_arr)
                add(e_after, min(cap_q, q + arr), idle * (1.0 - sigma) * p_arr)
        else:
            # Idle channel but nothing to send (or not enough energy):
            # the slot is wasted, only the arrival can change the state.
            for p_arr, arr in arrival_cases:
                add(e, min(cap_q, q + arr), idle * p_arr)
    if busy > 0.0:
        gamma = ch.harvest_success_prob
        for p_harv, harv in ((gamma, 1), (1.0 - gamma, 0)):
            if p_harv <= 0.0:
                continue
            e_after = min(cap_e, e + harv)
            for p_arr, arr in arrival_cases:
                add(e_after, min(cap_q, q + arr), busy * p_harv * p_arr)

    return dist


class TransitionModel:
    """Assembled kernel and rewards for every (state, action) pair.

    `successors(s, a)` gives the sparse successor row as (state index,
    probability) pairs sorted by index; `rewards` is the dense (n_states,
    n_actions) expected-throughput array; `kernel()` returns the dense
    stacked transition matrices, one per action.  Instances are immutable
    after construction and safe for concurrent read-only use.
    """

    def __init__(
        self,
        config: ModelConfig,
        rows: List[List[List[Tuple[int, float]]]],
        rewards: np.ndarray,
    ) -> None:
        self.config = config
        self.states = enumerate_states(config)
        self._rows = rows
        self.rewards = rewards
        self.rewards.setflags(write=False)
        self._kernel: np.ndarray | None = None

    @property
    def n_states(self) -> int:
        return self.config.n_states

    @property
    def n_actions(self) -> int:
        return self.config.n_channels

    def successors(self, state_index: int, action: int) -> List[Tuple[int, float]]:
        return self._rows[state_index][action]

    def reward(self, state_index: int, action: int) -> float:
        return float(self.rewards[state_index, action])

    def kernel(self) -> np.ndarray:
        """Dense (n_actions, n_states, n_states) transition stack, cached."""
        if self._kernel is None:
            p = np.zeros((self.n_actions, self.n_states, self.n_states))
            for s in range(self.n_states):
                for a in range(self.n_actions):
                    for succ, prob in self._rows[s][a]:
                        p[a, s, succ] = prob
            p.setflags(write=False)
            self._kernel = p
        return self._kernel


def build_model(config: ModelConfig) -> TransitionModel:
    """Build the full transition model; every row is checked to sum to one."""
    states = enumerate_states(config)
    n_actions = config.n_channels
    rewards = np.zeros((len(states), n_actions))
    rows: List[List[List[Tuple[int, float]]]] = []
    for s_idx, state in enumerate(states):
        per_action: List[List[Tuple[int, float]]] = []
        for a in range(n_actions):
            dist = successor_distribution(config, state, a)
            row = sorted(
                (config.state_index(succ), prob) for succ, prob in dist.items()
            )
            total = sum(prob for _, prob in row)
            if abs(total - 1.0) > ROW_SUM_TOL:
                raise ValueError(
                    f"transition row for state {state}, action {a} sums to "
                    f"{total!r}, expected 1"
                )
            per_action.append(row)
            rewards[s_idx, a] = immediate_reward(config, state, a)
        rows.append(per_action)
    return TransitionModel(config, rows, rewards)
