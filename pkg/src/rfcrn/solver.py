"""Average-throughput policy optimization for the channel-selection model.

Solves the long-run average-reward problem with relative value iteration
(optionally damped for aperiodicity), evaluates arbitrary stationary
policies exactly through the stationary distribution of the induced chain,
and provides an exhaustive enumeration oracle for desk-scale instances.
"""

from __future__ import annotations

import io
import itertools
from dataclasses import dataclass
from typing import IO, List, Sequence, Tuple, Union

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .model import ModelConfig, TransitionModel

__all__ = [
    "Policy",
    "SolveResult",
    "MultichainError",
    "PolicyFormatError",
    "solve_rvi",
    "stationary_distribution",
    "evaluate_policy",
    "oracle_enumerate",
    "best_static_policy",
    "save_policy",
    "load_policy",
]

# Per-state distributions must sum to one within this tolerance.
POLICY_SUM_TOL = 1e-12
# Actions whose lookahead value is within this of the best tie for greedy
# extraction; the lowest channel index wins.
TIE_TOL = 1e-10
# Stationary vectors must satisfy the balance equations to this residual.
BALANCE_TOL = 1e-12
# Row-sum slack accepted when reading policy files (covers printed rounding).
POLICY_FILE_SUM_TOL = 1e-6


class MultichainError(RuntimeError):
    """The policy-induced chain has more than one recurrent class."""


class PolicyFormatError(ValueError):
    """A policy file does not conform to the documented format."""


@dataclass(frozen=True)
class Policy:
    """Stationary channel-selection rule: one distribution over channels per state.

    `probabilities` has shape (n_states, n_channels); each row sums to one.
    Deterministic policies are the special case of unit rows.
    """

    probabilities: np.ndarray

    def __post_init__(self) -> None:
        probs = np.asarray(self.probabilities, dtype=float)
        if probs.ndim != 2:
            raise ValueError(f"policy array must be 2-D, got shape {probs.shape}")
        if np.any(probs < 0.0) or np.any(probs > 1.0):
            raise ValueError("policy probabilities must lie in [0, 1]")
        sums = probs.sum(axis=1)
        bad = np.nonzero(np.abs(sums - 1.0) > POLICY_SUM_TOL)[0]
        if bad.size:
            raise ValueError(
                f"policy row {bad[0]} sums to {sums[bad[0]]!r}, expected 1"
            )
        probs = probs.copy()
        probs.setflags(write=False)
        object.__setattr__(self, "probabilities", probs)

    @property
    def n_states(self) -> int:
        return self.probabilities.shape[0]

    @property
    def n_channels(self) -> int:
        return self.probabilities.shape[1]

    @property
    def is_deterministic(self) -> bool:
        return bool(np.all(np.max(self.probabilities, axis=1) == 1.0))

    def channel_indices(self) -> np.ndarray:
        """Most likely channel per state (the selected one if deterministic)."""
        return np.argmax(self.probabilities, axis=1)

    @classmethod
    def deterministic(cls, channel_indices: Sequence[int], n_channels: int) -> "Policy":
        idx = np.asarray(channel_indices, dtype=int)
        if idx.size and (idx.min() < 0 or idx.max() >= n_channels):
            raise ValueError("channel index out of range")
        probs = np.zeros((idx.size, n_channels))
        probs[np.arange(idx.size), idx] = 1.0
        return cls(probs)

    @classmethod
    def static(cls, weights: Sequence[float], n_states: int) -> "Policy":
        """State-independent randomized rule with the given channel weights."""
        w = np.asarray(weights, dtype=float)
        return cls(np.tile(w, (n_states, 1)))


@dataclass(frozen=True)
class SolveResult:
    """Outcome of a relative-value-iteration solve.

    gain           estimated long-run average throughput (packets/slot)
    bias           relative state values, anchored to zero at state index 0
    policy         greedy deterministic policy extracted at convergence
    iterations     value updates performed
    span_residual  span seminorm of the final update difference
    converged      whether span_residual fell below the requested tolerance
    """

    gain: float
    bias: np.ndarray
    policy: Policy
    iterations: int
    span_residual: float
    converged: bool


def solve_rvi(
    model: TransitionModel,
    tolerance: float = 1e-9,
    max_iterations: int = 1_000_000,
    damping: float = 0.5,
) -> SolveResult:
    """Optimal channel-selection policy by relative value iteration.

    Each update blends the identity with the Bellman lookahead operator:
    h <- (1 - damping) * h + damping * T(h), which keeps the iteration
    aperiodic for damping < 1 (damping = 1 is plain relative value
    iteration).  Iteration stops when the span seminorm of the update
    difference falls below `tolerance` or after `max_iterations` updates;
    non-convergence is reported in the result, not raised.  The gain
    estimate is the midpoint of the extreme per-state update differences,
    divided by the damping factor.  Ties in greedy extraction go to the
    lowest channel index, so results are reproducible bit for bit.
    """
    if not tolerance > 0.0:
        raise ValueError(f"tolerance must be > 0, got {tolerance}")
    if not (0.0 < damping <= 1.0):
        raise ValueError(f"damping must lie in (0, 1], got {damping}")
    if max_iterations < 1:
        raise ValueError(f"max_iterations must be >= 1, got {max_iterations}")

    kernel = model.kernel()  # (A, S, S)
    rewards = model.rewards  # (S, A)
    n_states, n_actions = rewards.shape

    h = np.zeros(n_states)
    gain = 0.0
    span = np.inf
    iterations = 0
    converged = False
    for iterations in range(1, max_iterations + 1):
        lookahead = rewards + np.einsum("ast,t->sa", kernel, h)
        best = lookahead.max(axis=1)
        delta = damping * (best - h)
        d_max = delta.max()
        d_min = delta.min()
        span = d_max - d_min
        gain = (d_max + d_min) / (2.0 * damping)
        h = h + delta
        h = h - h[0]  # anchor the bias at state index 0
        if span < tolerance:
            converged = True
            break

    lookahead = rewards + np.einsum("ast,t->sa", kernel, h)
    greedy = (lookahead >= lookahead.max(axis=1, keepdims=True) - TIE_TOL).argmax(axis=1)
    policy = Policy.deterministic(greedy, n_actions)
    return SolveResult(
        gain=float(gain),
        bias=h,
        policy=policy,
        iterations=iterations,
        span_residual=float(span),
        converged=converged,
    )


def _policy_kernel(model: TransitionModel, policy: Policy) -> np.ndarray:
    if policy.probabilities.shape != (model.n_states, model.n_actions):
        raise ValueError(
            f"policy shape {policy.probabilities.shape} does not match model "
            f"({model.n_states} states, {model.n_actions} channels)"
        )
    return np.einsum("sa,ast->st", policy.probabilities, model.kernel())


def _gth_stationary(chain: np.ndarray) -> np.ndarray:
    """Stationary vector of an irreducible row-stochastic matrix.

    Grassmann-Taksar-Heyman elimination: subtraction-free, so the result is
    nonnegative and accurate even for stiff chains.
    """
    t = chain.T.copy()  # work column-stochastic
    n = t.shape[0]
    for k in range(n - 1, 0, -1):
        s = t[:k, k].sum()
        t[k, :k] /= s
        t[:k, :k] += np.outer(t[:k, k], t[k, :k])
    pi = np.zeros(n)
    pi[0] = 1.0
    for k in range(1, n):
        pi[k] = t[k, 0] + pi[1:k] @ t[k, 1:k]
    return pi / pi.sum()


def stationary_distribution(model: TransitionModel, policy: Policy) -> np.ndarray:
    """Unique stationary distribution of the policy-induced chain.

    The chain's recurrent classes are found exactly via strongly connected
    components; a single recurrent class (unichain) is required, otherwise
    MultichainError is raised.  The balance equations are then solved by
    GTH elimination restricted to the recurrent class; transient states get
    probability zero.
    """
    chain = _policy_kernel(model, policy)
    n = chain.shape[0]
    n_comp, labels = connected_components(
        csr_matrix(chain > 0.0), directed=True, connection="strong"
    )
    # A component is transient iff any edge leaves it.
    transient = set()
    src, dst = np.nonzero(chain > 0.0)
    for i, j in zip(labels[src], labels[dst]):
        if i != j:
            transient.add(i)
    recurrent = [c for c in range(n_comp) if c not in transient]
    if len(recurrent) != 1:
        raise MultichainError(
            f"policy-induced chain has {len(recurrent)} recurrent classes; "
            "the long-run average depends on the initial state"
        )
    members = np.nonzero(labels == recurrent[0])[0]
    mu = np.zeros(n)
    mu[members] = _gth_stationary(chain[np.ix_(members, members)])
    residual = np.abs(mu @ chain - mu).max()
    if residual > BALANCE_TOL:
        raise RuntimeError(
            f"stationary solve residual {residual:.3e} exceeds {BALANCE_TOL:.0e}"
        )
    return mu


def evaluate_policy(model: TransitionModel, policy: Policy) -> float:
    """Exact long-run average throughput of a stationary policy.

    Weighs the expected per-slot reward by the stationary distribution of
    the induced chain; for a unichain policy this equals the limiting
    time-average from any initial state.
    """
    mu = stationary_distribution(model, policy)
    reward_per_state = (policy.probabilities * model.rewards).sum(axis=1)
    return float(mu @ reward_per_state)


def oracle_enumerate(
    model: TransitionModel, budget: int = 1_000_000
) -> Tuple[float, Policy]:
    """Exhaustive maximum over all deterministic stationary policies.

    Ground-truth oracle for desk-scale instances only: evaluates every one
    of n_channels ** n_states assignments exactly and returns the best.
    Refuses when the count exceeds `budget`.  Ties go to the first maximizer
    in lexicographic assignment order.
    """
    n_states, n_actions = model.n_states, model.n_actions
    count = n_actions**n_states
    if count > budget:
        raise ValueError(
            f"{n_actions}^{n_states} = {count} deterministic policies exceeds "
            f"the enumeration budget ({budget})"
        )
    best_gain = -np.inf
    best_assignment: Tuple[int, ...] | None = None
    for assignment in itertools.product(range(n_actions), repeat=n_states):
        policy = Policy.deterministic(assignment, n_actions)
        gain = evaluate_policy(model, policy)
        if gain > best_gain:
            best_gain = gain
            best_assignment = assignment
    assert best_assignment is not None
    return best_gain, Policy.deterministic(best_assignment, n_actions)


def best_static_policy(
    model: TransitionModel, grid: Sequence[Sequence[float]]
) -> Tuple[float, np.ndarray]:
    """Best state-independent randomized rule over a grid of mixing vectors.

    Each grid entry is a distribution over the channels; all are evaluated
    exactly and the maximizer returned (ties go to the first in grid order).
    """
    vectors = [np.asarray(w, dtype=float) for w in grid]
    if not vectors:
        raise ValueError("grid must contain at least one mixing vector")
    for w in vectors:
        if w.shape != (model.n_actions,):
            raise ValueError(
                f"mixing vector of length {w.size} does not match "
                f"{model.n_actions} channels"
            )
        if np.any(w < 0.0) or abs(w.sum() - 1.0) > POLICY_SUM_TOL:
            raise ValueError(f"mixing vector {w!r} is not a distribution")
    best_gain = -np.inf
    best_w = vectors[0]
    for w in vectors:
        gain = evaluate_policy(model, Policy.static(w, model.n_states))
        if gain > best_gain:
            best_gain = gain
            best_w = w
    return best_gain, best_w


# ---------------------------------------------------------------------------
# Policy file format: header "energy,queue,p_ch0,p_ch1,..."; one row per
# state in state-index order; probabilities printed with 13 significant
# digits.  Produced by save_policy, consumed by load_policy and the CLI.
# ---------------------------------------------------------------------------


def save_policy(config: ModelConfig, policy: Policy, dest: Union[str, IO[str]]) -> None:
    """Write a policy in the documented CSV format (deterministic bytes)."""
    if policy.probabilities.shape != (config.n_states, config.n_channels):
        raise ValueError("policy shape does not match the configuration")
    own = isinstance(dest, str)
    out = open(dest, "w", newline="") if own else dest
    try:
        header = "energy,queue," + ",".join(
            f"p_ch{a}" for a in range(config.n_channels)
        )
        out.write(header + "\n")
        for idx in range(config.n_states):
            state = config.state_at(idx)
            probs = ",".join(f"{p:.12e}" for p in policy.probabilities[idx])
            out.write(f"{state.energy},{state.queue},{probs}\n")
    finally:
        if own:
            out.close()


def load_policy(config: ModelConfig, source: Union[str, IO[str]]) -> Policy:
    """Read and validate a policy file for the given configuration.

    Rejects wrong headers, wrong row counts, out-of-order states, and rows
    whose probabilities do not sum to one within 1e-6, citing the offending
    data row number.  Accepted rows are renormalized to remove printing
    round-off.
    """
    own = isinstance(source, str)
    inp = open(source, "r", newline="") if own else source
    try:
        text = inp.read()
    finally:
        if own:
            inp.close()
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise PolicyFormatError("policy file is empty")
    expected_header = "energy,queue," + ",".join(
        f"p_ch{a}" for a in range(config.n_channels)
    )
    if lines[0].strip() != expected_header:
        raise PolicyFormatError(
            f"bad header {lines[0].strip()!r}, expected {expected_header!r}"
        )
    data = lines[1:]
    if len(data) != config.n_states:
        raise PolicyFormatError(
            f"expected {config.n_states} state rows, found {len(data)}"
        )
    probs = np.zeros((config.n_states, config.n_channels))
    for row_no, line in enumerate(data, start=1):
        parts = line.split(",")
        if len(parts) != 2 + config.n_channels:
            raise PolicyFormatError(
                f"row {row_no}: expected {2 + config.n_channels} fields, "
                f"found {len(parts)}"
            )
        try:
            energy, queue = int(parts[0]), int(parts[1])
            values = [float(p) for p in parts[2:]]
        except ValueError as exc:
            raise PolicyFormatError(f"row {row_no}: {exc}") from exc
        expected = config.state_at(row_no - 1)
        if (energy, queue) != (expected.energy, expected.queue):
            raise PolicyFormatError(
                f"row {row_no}: state ({energy},{queue}) out of order, "
                f"expected ({expected.energy},{expected.queue})"
            )
        total = sum(values)
        if any(v < 0.0 for v in values) or abs(total - 1.0) > POLICY_FILE_SUM_TOL:
            raise PolicyFormatError(
                f"row {row_no}: probabilities sum to {total!r}, expected 1"
            )
        probs[row_no - 1] = np.asarray(values) / total
    return Policy(probs)


def policy_to_string(config: ModelConfig, policy: Policy) -> str:
    """Policy file contents as a string (same bytes save_policy writes)."""
    buf = io.StringIO()
    save_policy(config, policy, buf)
    return buf.getvalue()
