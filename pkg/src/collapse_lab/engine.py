"""Stochastic amplitude transfer between branches, ending in whole-branch collapse.

The mechanism is a symmetric random walk on the interacting branch's Born
weight: every correlating step moves the weight by +/- delta, with the
direction fixed by the single global stream.  Once the weight leaves the
interior band the contest resolves through one exact Bernoulli(w) draw,
which keeps the expected outcome equal to the initial weight for any step
size.  Collapse projects the entire winning branch, entangled partners
included.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .constants import (
    ATOL_ACCUMULATED,
    ATOL_ALGEBRAIC,
    DEFAULT_DELTA,
    TAU_STEP,
)
from .dynamics import InteractionTrace, shift_magnitude
from .errors import EngineInvariantError, InputError, NullOutcomeError
from .foliation import GlobalStream
from .quantum import (
    Projector,
    StateVector,
    born_weight,
    project_and_renormalize,
)

_MAX_WALK_BLOCK = 4096

ABSORB_RULES = ("exact-bernoulli",)


@dataclass(frozen=True)
class CollapseParams:
    """Step size, reduction cadence, and boundary rule for the weight walk."""

    delta: float = DEFAULT_DELTA
    tau_step: float = TAU_STEP
    absorb: str = "exact-bernoulli"

    def __post_init__(self):
        if not 0.0 < self.delta < 0.5:
            raise InputError(f"delta must lie in (0, 0.5), got {self.delta}")
        if not self.tau_step > 0:
            raise InputError("tau_step must be positive")
        if self.absorb not in ABSORB_RULES:
            raise InputError(f"unknown boundary rule {self.absorb!r}")


@dataclass(frozen=True, eq=False)
class BranchPair:
    """Orthogonal (interacting, noninteracting) branch decomposition."""

    interacting_label: str
    noninteracting_label: str
    interacting: Projector
    noninteracting: Projector
    weight: float

    def __post_init__(self):
        if self.interacting_label == self.noninteracting_label:
            raise InputError("branch labels must differ")
        if not 0.0 <= self.weight <= 1.0:
            raise InputError(f"branch weight must lie in [0, 1], got {self.weight}")
        overlap = self.interacting.matrix @ self.noninteracting.matrix
        if float(np.max(np.abs(overlap))) > ATOL_ALGEBRAIC:
            raise InputError("branch projectors are not orthogonal")


def branch_decompose(
    s: StateVector,
    interacting: Projector,
    labels: tuple[str, str] = ("interacting", "noninteracting"),
) -> BranchPair:
    """Split a state into the interacting branch and its complement."""
    w = born_weight(s, interacting)
    return BranchPair(
        interacting_label=labels[0],
        noninteracting_label=labels[1],
        interacting=interacting,
        noninteracting=interacting.complement(),
        weight=w,
    )


def stochastic_step(w, delta, bit: bool):
    """One amplitude transfer: w + delta when the draw is up, w - delta otherwise.

    Plain arithmetic on purpose: with `fractions.Fraction` arguments the
    martingale identity (mean of the two successors equals w) holds exactly.
    """
    if not (0 < delta < w < 1 - delta):
        raise InputError(
            f"w={w} is outside the interior band (delta, 1 - delta); "
            "resolve it with terminal_resolution"
        )
    return w + delta if bit else w - delta


def terminal_resolution(w: float, stream: GlobalStream) -> bool:
    """Resolve a boundary weight with a single exact Bernoulli(w) draw.

    Returns True for collapse-to-interacting.  Exactness here is what keeps
    the overall win probability equal to the initial weight for any delta.
    """
    if not 0.0 <= w <= 1.0:
        raise InputError(f"terminal weight must lie in [0, 1], got {w}")
    return stream.draw_uniform() < w


def _walk_to_exit(
    w0: float, delta: float, stream: GlobalStream, record: list | None
) -> float:
    """Run the +/-delta weight walk until it leaves (delta, 1 - delta).

    Weights are evaluated as w0 + k * delta from the integer step offset k,
    so a trajectory is reproducible independent of internal block sizes.
    """
    lo, hi = delta, 1.0 - delta
    expected = w0 * (1.0 - w0) / (delta * delta)
    block = min(_MAX_WALK_BLOCK, max(128, int(4.0 * expected) + 16))
    k = 0
    while True:
        u = stream.peek(block)
        kpath = k + np.cumsum(np.where(u < 0.5, 1, -1))
        wpath = w0 + kpath * delta
        crossed = (wpath <= lo) | (wpath >= hi)
        hit = int(np.argmax(crossed))
        if crossed[hit]:
            stream.advance(hit + 1)
            if record is not None:
                record.extend(wpath[: hit + 1].tolist())
            return float(wpath[hit])
        stream.advance(block)
        if record is not None:
            record.extend(wpath.tolist())
        k = int(kpath[-1])
        block = _MAX_WALK_BLOCK


def _contest(w0: float, delta: float, stream: GlobalStream, record: list | None = None) -> bool:
    """Full gambler's-ruin contest from w0; True when the first side wins."""
    if w0 >= 1.0:
        return True
    if w0 <= 0.0:
        return False
    w = w0
    if delta < w < 1.0 - delta:
        w = _walk_to_exit(w, delta, stream, record)
    return terminal_resolution(w, stream)


@dataclass(frozen=True, eq=False)
class CollapseResult:
    winner: str
    state: StateVector
    trajectory: np.ndarray = field(repr=False)


def run_collapse(
    s: StateVector,
    pair: BranchPair,
    params: CollapseParams,
    stream: GlobalStream,
) -> CollapseResult:
    """Collapse one branch pair: walk the weight, resolve, project the winner.

    The projection acts on the full joint space, so every system entangled
    with the winning branch becomes definite in the same reduction.
    """
    w_now = born_weight(s, pair.interacting)
    if abs(w_now - pair.weight) > 1e-9:
        raise EngineInvariantError(
            f"branch pair weight {pair.weight:.12g} no longer matches the state "
            f"({w_now:.12g}); decompose again"
        )
    trajectory = [pair.weight]
    if pair.weight >= 1.0:
        interacting_wins = True
    elif pair.weight <= 0.0:
        interacting_wins = False
    else:
        interacting_wins = _contest(pair.weight, params.delta, stream, record=trajectory)

    projector = pair.interacting if interacting_wins else pair.noninteracting
    label = pair.interacting_label if interacting_wins else pair.noninteracting_label
    try:
        collapsed = project_and_renormalize(s, projector)
    except NullOutcomeError as exc:  # unreachable when the pair matches the state
        raise EngineInvariantError("a zero-weight branch won the contest") from exc
    return CollapseResult(winner=label, state=collapsed, trajectory=np.asarray(trajectory))


def multiway_collapse(
    branches: Sequence[tuple],
    stream: GlobalStream,
    params: CollapseParams | None = None,
):
    """Select one branch among many via sequential pairwise ruin contests.

    Contests run in the listed (foliation) order: the current champion meets
    the next branch at the conditional weight w_i / (w_i + w_j) and carries
    the combined weight forward.  The winner's marginal probability equals
    its listed weight for every contest order.
    """
    if params is None:
        params = CollapseParams()
    if not branches:
        raise InputError("need at least one branch")
    weights = [float(w) for _, w in branches]
    if any(w < 0 for w in weights):
        raise InputError("branch weights cannot be negative")
    if abs(sum(weights) - 1.0) > ATOL_ACCUMULATED:
        raise InputError(f"branch weights sum to {sum(weights):.12g}, not 1")

    champion_label = branches[0][0]
    champion_weight = weights[0]
    for (label, _), weight in zip(branches[1:], weights[1:]):
        combined = champion_weight + weight
        if combined <= 0.0:
            continue  # two dead branches; champion stays as placeholder
        conditional = champion_weight / combined
        if not _contest(conditional, params.delta, stream):
            champion_label = label
        champion_weight = combined
    return champion_label


def physical_mode_trajectory(
    initial_weight: float,
    trace: InteractionTrace,
    stream: GlobalStream,
    e_total_rel: float,
) -> tuple[float, list[float], bool | None]:
    """Demonstration mode: step sizes taken from the recorded interaction.

    Each reduction step flagged by the trace transfers weight by the shift
    magnitude of the instantaneous interaction energy.  Returns the final
    weight, the weight path, and the winner (None when the interaction ends
    before the walk reaches a boundary).
    """
    w = initial_weight
    path = [w]
    prev_tau = 0.0
    for sample in trace.samples:
        crossings = int(math.floor(sample.tau / trace.tau_step)) - int(
            math.floor(prev_tau / trace.tau_step)
        )
        prev_tau = sample.tau
        if crossings <= 0:
            continue
        g = shift_magnitude(sample.v_exp, e_total_rel)
        if g <= 0.0:
            continue
        for _ in range(crossings):
            if not g < w < 1.0 - g:
                return w, path, terminal_resolution(w, stream)
            w = stochastic_step(w, g, stream.draw_bit())
            path.append(w)
    return w, path, None
