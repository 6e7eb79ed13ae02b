"""Turnkey experiments: Bell factorization, CHSH, no-signaling, reduction-order
undetectability, Born convergence, and conservation via apparatus entanglement.

Measurement realization: an analyzer dialed to angle theta measures spin
along the direction theta in the x-z plane.  Outcomes are drawn through the
collapse engine (sequential pairwise ruin contests over the joint-outcome
branches, in foliation order), never by direct Born sampling; closed-form
correlations provide the independent oracle.
"""

from __future__ import annotations

import math
import multiprocessing
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .constants import DEFAULT_DELTA, SIGMA_MULTIPLIER
from .engine import (
    BranchPair,
    CollapseParams,
    branch_decompose,
    multiway_collapse,
    run_collapse,
)
from .errors import InputError, InsufficientDataError, ModelError
from .foliation import FoliationSchedule, GlobalStream, two_measurement_schedule
from .quantum import (
    Projector,
    StateVector,
    analyzer_projectors,
    born_weight,
)
from .reporting import ExperimentReport, canonical_fingerprint

COUNT_HEADER = ("a_setting", "b_setting", "outcome_a", "outcome_b", "count")
TRACE_HEADER = ("run_index", "step_index", "w")

A_SETTING_LABELS = ("a", "a_prime")
B_SETTING_LABELS = ("b", "b_prime")
OUTCOME_VALUES = (1, -1)  # outcome index 0 -> +1, index 1 -> -1

# Fixed ensemble chunking: results must not depend on the worker count, so
# the chunk size never does either.
CHUNK_RUNS = 4096


@dataclass(frozen=True)
class SettingsQuartet:
    """Analyzer angles (radians) for the two parties' two settings each."""

    a: float
    a_prime: float
    b: float
    b_prime: float

    def __post_init__(self):
        for name, value in self.__dict__.items():
            if not math.isfinite(value):
                raise InputError(f"angle {name} must be finite")

    def angle_a(self, index: int) -> float:
        return (self.a, self.a_prime)[index]

    def angle_b(self, index: int) -> float:
        return (self.b, self.b_prime)[index]


DEFAULT_QUARTET = SettingsQuartet(a=0.0, a_prime=math.pi / 2, b=math.pi / 4, b_prime=3 * math.pi / 4)


class CountTable:
    """Joint outcome counts indexed [a_setting, b_setting, outcome_a, outcome_b]."""

    def __init__(self, counts: np.ndarray | None = None):
        if counts is None:
            counts = np.zeros((2, 2, 2, 2), dtype=np.int64)
        counts = np.asarray(counts, dtype=np.int64)
        if counts.shape != (2, 2, 2, 2):
            raise InputError(f"count table must have shape (2,2,2,2), got {counts.shape}")
        if np.any(counts < 0):
            raise InputError("counts cannot be negative")
        self.counts = counts

    def add(self, ia: int, ib: int, oa: int, ob: int, n: int = 1) -> None:
        self.counts[ia, ib, oa, ob] += n

    def total(self, ia: int, ib: int) -> int:
        return int(self.counts[ia, ib].sum())

    def joint_probabilities(self, ia: int, ib: int) -> np.ndarray:
        total = self.total(ia, ib)
        if total == 0:
            raise InsufficientDataError(
                f"no counts for setting pair ({A_SETTING_LABELS[ia]}, {B_SETTING_LABELS[ib]})"
            )
        return self.counts[ia, ib] / total

    def correlator(self, ia: int, ib: int) -> float:
        """E = (N++ + N-- - N+- - N-+) / N."""
        p = self.joint_probabilities(ia, ib)
        return float(p[0, 0] + p[1, 1] - p[0, 1] - p[1, 0])

    def marginal_a_plus(self, ia: int, ib: int) -> float:
        p = self.joint_probabilities(ia, ib)
        return float(p[0, 0] + p[0, 1])

    def marginal_b_plus(self, ia: int, ib: int) -> float:
        p = self.joint_probabilities(ia, ib)
        return float(p[0, 0] + p[1, 0])

    def rows(self) -> tuple[tuple, ...]:
        out = []
        for ia in range(2):
            for ib in range(2):
                for oa in range(2):
                    for ob in range(2):
                        out.append(
                            (
                                A_SETTING_LABELS[ia],
                                B_SETTING_LABELS[ib],
                                OUTCOME_VALUES[oa],
                                OUTCOME_VALUES[ob],
                                int(self.counts[ia, ib, oa, ob]),
                            )
                        )
        return tuple(out)

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence]) -> "CountTable":
        table = cls()
        for a_label, b_label, outcome_a, outcome_b, count in rows:
            ia = A_SETTING_LABELS.index(a_label)
            ib = B_SETTING_LABELS.index(b_label)
            oa = OUTCOME_VALUES.index(int(outcome_a))
            ob = OUTCOME_VALUES.index(int(outcome_b))
            table.counts[ia, ib, oa, ob] = int(count)
        return table


# ---------------------------------------------------------------------------
# Local causality: factorized joints and hidden-variable models


def factorized_joint(p_a: float, p_b: float) -> np.ndarray:
    """Locally causal joint table Pr(A,B) = Pr(A) * Pr(B), outcomes (+, -)."""
    for name, p in (("p_a", p_a), ("p_b", p_b)):
        if not 0.0 <= p <= 1.0:
            raise InputError(f"{name} must lie in [0, 1], got {p}")
    pa = np.array([p_a, 1.0 - p_a])
    pb = np.array([p_b, 1.0 - p_b])
    return np.outer(pa, pb)


@dataclass(frozen=True)
class LhvModel:
    """Local hidden-variable model: responses see only their own setting and lambda.

    `context` describes any shared fixed arrangement; it conditions the run
    but plays no computational role.
    """

    lambda_sampler: Callable[[np.random.Generator], float]
    response_a: Callable[[float, float], int]
    response_b: Callable[[float, float], int]
    context: str = ""


def _checked_response(fn: Callable[[float, float], int], angle: float, lam: float, party: str) -> int:
    value = fn(angle, lam)
    if value not in (1, -1):
        raise ModelError(f"{party} response returned {value!r}; outcomes must be +1 or -1")
    return value


def lhv_run(
    model: LhvModel,
    quartet: SettingsQuartet,
    n_per_pair: int,
    seed: int,
) -> CountTable:
    """Sample a hidden-variable model: lambda fresh per trial, responses local."""
    if n_per_pair < 1:
        raise InputError("need at least one trial per setting pair")
    table = CountTable()
    root = GlobalStream(seed)
    for pair_index, (ia, ib) in enumerate(_setting_pairs()):
        angle_a = quartet.angle_a(ia)
        angle_b = quartet.angle_b(ib)
        rng = np.random.Generator(
            np.random.Philox(key=np.array([root.master_seed, pair_index + 1], dtype=np.uint64))
        )
        for _ in range(n_per_pair):
            lam = float(model.lambda_sampler(rng))
            oa = 0 if _checked_response(model.response_a, angle_a, lam, "A") == 1 else 1
            ob = 0 if _checked_response(model.response_b, angle_b, lam, "B") == 1 else 1
            table.add(ia, ib, oa, ob)
    return table


def sign_cos_model() -> LhvModel:
    """Deterministic analyzer-overlap responses with a uniform hidden angle."""

    def sampler(rng: np.random.Generator) -> float:
        return float(rng.uniform(0.0, 2.0 * math.pi))

    def resp_a(angle: float, lam: float) -> int:
        return 1 if math.cos(angle - lam) >= 0 else -1

    def resp_b(angle: float, lam: float) -> int:
        return -1 if math.cos(angle - lam) >= 0 else 1

    return LhvModel(sampler, resp_a, resp_b, context="sign-of-cosine analyzers")


def fair_coin_model() -> LhvModel:
    """Responses are independent fair coins carried by the hidden variable."""

    def sampler(rng: np.random.Generator) -> float:
        # two independent coins packed into one hidden value
        return float(rng.integers(0, 2) + 2 * rng.integers(0, 2))

    def resp_a(angle: float, lam: float) -> int:
        return 1 if int(lam) % 2 == 0 else -1

    def resp_b(angle: float, lam: float) -> int:
        return 1 if (int(lam) // 2) % 2 == 0 else -1

    return LhvModel(sampler, resp_a, resp_b, context="independent fair coins")


def constant_plus_model() -> LhvModel:
    """Both parties always answer +1 (saturates S = 2 exactly)."""
    return LhvModel(lambda rng: 0.0, lambda a, lam: 1, lambda b, lam: 1, context="constant +1")


def random_lhv_model(rng: np.random.Generator) -> LhvModel:
    """Random deterministic threshold model over a uniform hidden angle."""
    amp1, amp2 = rng.uniform(0.5, 2.0, size=2)
    phase_a, phase_b = rng.uniform(0.0, 2.0 * math.pi, size=2)
    bias_a, bias_b = rng.uniform(-0.3, 0.3, size=2)
    flip_b = -1 if rng.random() < 0.5 else 1

    def sampler(r: np.random.Generator) -> float:
        return float(r.uniform(0.0, 2.0 * math.pi))

    def resp_a(angle: float, lam: float) -> int:
        return 1 if amp1 * math.cos(angle - lam + phase_a) + bias_a >= 0 else -1

    def resp_b(angle: float, lam: float) -> int:
        value = amp2 * math.cos(angle - lam + phase_b) + bias_b
        return flip_b if value >= 0 else -flip_b

    return LhvModel(sampler, resp_a, resp_b, context="randomized threshold model")


LHV_MODELS: dict[str, Callable[[], LhvModel]] = {
    "sign-cos": sign_cos_model,
    "fair-coin": fair_coin_model,
    "constant-plus": constant_plus_model,
}


# ---------------------------------------------------------------------------
# CHSH statistic


def _setting_pairs() -> tuple[tuple[int, int], ...]:
    return ((0, 0), (0, 1), (1, 0), (1, 1))


def chsh_statistic(counts: CountTable, quartet: SettingsQuartet | None = None) -> float:
    """S = E(a,b) + E(a,b') + E(a',b) - E(a',b')."""
    return (
        counts.correlator(0, 0)
        + counts.correlator(0, 1)
        + counts.correlator(1, 0)
        - counts.correlator(1, 1)
    )


def chsh_sigma(counts: CountTable) -> float:
    """Propagated binomial standard deviation of the CHSH statistic."""
    var = 0.0
    for ia, ib in _setting_pairs():
        e = counts.correlator(ia, ib)
        var += max(0.0, 1.0 - e * e) / counts.total(ia, ib)
    return math.sqrt(var)


def no_signaling_check(counts: CountTable) -> float:
    """Max change of one party's outcome marginal when the other's setting flips."""
    deviations = []
    for ia in range(2):
        deviations.append(abs(counts.marginal_a_plus(ia, 0) - counts.marginal_a_plus(ia, 1)))
    for ib in range(2):
        deviations.append(abs(counts.marginal_b_plus(0, ib) - counts.marginal_b_plus(1, ib)))
    return max(deviations)


# ---------------------------------------------------------------------------
# Entangled-pair preparations

SINGLET = "singlet"
TSIRELSON = "tsirelson"
PRODUCT = "product"


def prepare_pair(name: str) -> StateVector:
    """Two-qubit preparations used by the harness.

    `tsirelson` is the maximally entangled state whose x-z-plane correlation
    is E(a,b) = sin(a+b); it attains S = 2*sqrt(2) at the default quartet
    under this module's sign convention for S.  `singlet` gives the textbook
    E(a,b) = -cos(a-b) with perfect anticorrelation at equal settings.
    """
    if name == SINGLET:
        amps = np.array([0.0, 1.0, -1.0, 0.0], dtype=np.complex128) / math.sqrt(2.0)
    elif name == TSIRELSON:
        amps = np.array([1.0, 1.0, 1.0, -1.0], dtype=np.complex128) / 2.0
    elif name == PRODUCT:
        amps = np.array([1.0, 1.0, 1.0, 1.0], dtype=np.complex128) / 2.0
    else:
        raise InputError(f"unknown preparation {name!r}")
    return StateVector((2, 2), amps)


def closed_form_correlation(preparation: str, angle_a: float, angle_b: float) -> float:
    """Analytic E(a,b) oracle for each preparation."""
    if preparation == SINGLET:
        return -math.cos(angle_a - angle_b)
    if preparation == TSIRELSON:
        return math.sin(angle_a + angle_b)
    if preparation == PRODUCT:
        return math.sin(angle_a) * math.sin(angle_b)
    raise InputError(f"unknown preparation {preparation!r}")


def joint_outcome_weights(state: StateVector, angle_a: float, angle_b: float) -> np.ndarray:
    """Born weights of the four joint analyzer outcomes, shape (2, 2)."""
    proj_a = analyzer_projectors(angle_a)
    proj_b = analyzer_projectors(angle_b)
    weights = np.empty((2, 2))
    for oa in range(2):
        for ob in range(2):
            joint = Projector((2, 2), np.kron(proj_a[oa].matrix, proj_b[ob].matrix))
            weights[oa, ob] = born_weight(state, joint)
    return weights


def _branch_list(weights: np.ndarray, order: str) -> list[tuple[int, float]]:
    """Joint-outcome branches enumerated in the foliation's measurement order.

    Labels are flat outcome indices oa * 2 + ob; the party measured first is
    the major axis, which is what the contest order inherits.
    """
    if order == "ab":
        pairs = ((0, 0), (0, 1), (1, 0), (1, 1))
    elif order == "ba":
        pairs = ((0, 0), (1, 0), (0, 1), (1, 1))
    else:
        raise InputError("order must be 'ab' or 'ba'")
    total = float(weights.sum())
    return [(oa * 2 + ob, float(weights[oa, ob]) / total) for oa, ob in pairs]


Resolver = Callable[[Sequence[tuple[int, float]], GlobalStream, CollapseParams], int]


def _joint_pair_chunk(args) -> np.ndarray:
    """Tally one chunk of joint-outcome trials (top level for pickling)."""
    (weights_flat, order, delta, master_seed, run_start, n_runs) = args
    weights = np.asarray(weights_flat).reshape(2, 2)
    branches = _branch_list(weights, order)
    params = CollapseParams(delta=delta)
    root = GlobalStream(master_seed)
    tally = np.zeros(4, dtype=np.int64)
    for j in range(n_runs):
        stream = root.substream(run_start + j)
        winner = multiway_collapse(branches, stream, params)
        tally[winner] += 1
    return tally


def _effective_workers(workers: int | None) -> int:
    env = os.environ.get("COLLAPSE_LAB_THREADS")
    cap = int(env) if env else (os.cpu_count() or 1)
    cap = max(1, cap)
    if workers is None:
        return cap
    return max(1, min(workers, cap))


def _map_chunks(fn, args_list, workers: int):
    if workers <= 1 or len(args_list) <= 1:
        return [fn(args) for args in args_list]
    ctx = multiprocessing.get_context("fork")
    with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
        return list(pool.map(fn, args_list))


def _run_joint_pair(
    weights: np.ndarray,
    order: str,
    n_runs: int,
    params: CollapseParams,
    master_seed: int,
    run_offset: int,
    resolver: Resolver | None,
    workers: int | None,
) -> np.ndarray:
    """Outcome tally (2, 2) for one setting pair; substreams indexed by run."""
    if resolver is not None:
        # Custom resolvers are not restricted to picklable functions.
        branches = _branch_list(weights, order)
        root = GlobalStream(master_seed)
        tally = np.zeros(4, dtype=np.int64)
        for j in range(n_runs):
            winner = resolver(branches, root.substream(run_offset + j), params)
            tally[winner] += 1
        return tally.reshape(2, 2)

    chunk_args = []
    start = 0
    while start < n_runs:
        size = min(CHUNK_RUNS, n_runs - start)
        chunk_args.append(
            (tuple(weights.ravel()), order, params.delta, master_seed, run_offset + start, size)
        )
        start += size
    tallies = _map_chunks(_joint_pair_chunk, chunk_args, _effective_workers(workers))
    return np.sum(tallies, axis=0).reshape(2, 2)


# ---------------------------------------------------------------------------
# Quantum CHSH experiment


def quantum_chsh_run(
    quartet: SettingsQuartet,
    n_per_pair: int,
    engine_params: CollapseParams | None = None,
    seed: int = 0,
    preparation: str = TSIRELSON,
    schedule: FoliationSchedule | None = None,
    workers: int | None = None,
    resolver: Resolver | None = None,
) -> ExperimentReport:
    """Bell test driven end-to-end through the collapse engine.

    Each trial prepares the entangled pair, schedules the two spacelike
    measurement events on the foliation, and resolves the four joint-outcome
    branches by sequential ruin contests in foliation order.
    """
    if n_per_pair < 1:
        raise InputError("need at least one run per setting pair")
    params = engine_params or CollapseParams()
    schedule = schedule or two_measurement_schedule("ab")
    order = _order_from_schedule(schedule)
    state = prepare_pair(preparation)

    table = CountTable()
    for pair_index, (ia, ib) in enumerate(_setting_pairs()):
        weights = joint_outcome_weights(state, quartet.angle_a(ia), quartet.angle_b(ib))
        tally = _run_joint_pair(
            weights,
            order,
            n_per_pair,
            params,
            seed,
            pair_index * n_per_pair,
            resolver,
            workers,
        )
        table.counts[ia, ib] = tally

    s_value = chsh_statistic(table, quartet)
    sigma = chsh_sigma(table)
    statistics = {
        "S": s_value,
        "sigma_S": sigma,
        "E_ab": table.correlator(0, 0),
        "E_ab_prime": table.correlator(0, 1),
        "E_a_prime_b": table.correlator(1, 0),
        "E_a_prime_b_prime": table.correlator(1, 1),
        "marginal_deviation": no_signaling_check(table),
    }
    fingerprint = canonical_fingerprint(
        {
            "experiment": "chsh-quantum",
            "seed": seed,
            "runs": n_per_pair,
            "chsh.a": quartet.a,
            "chsh.a_prime": quartet.a_prime,
            "chsh.b": quartet.b,
            "chsh.b_prime": quartet.b_prime,
            "chsh.preparation": preparation,
            "chsh.order": order,
            "engine.delta": params.delta,
        }
    )
    return ExperimentReport(
        experiment="chsh-quantum",
        seed=seed,
        fingerprint=fingerprint,
        statistics=statistics,
        counts_header=COUNT_HEADER,
        counts=table.rows(),
    )


def _order_from_schedule(schedule: FoliationSchedule) -> str:
    sites = schedule.measurement_order()
    if sites == (0, 1):
        return "ab"
    if sites == (1, 0):
        return "ba"
    raise InputError(
        "schedule must contain exactly two measurement events at sites 0 and 1"
    )


def lhv_chsh_run(
    model: LhvModel,
    quartet: SettingsQuartet,
    n_per_pair: int,
    seed: int = 0,
    model_name: str = "custom",
) -> ExperimentReport:
    """CHSH run of a local hidden-variable model, reported like the quantum one."""
    table = lhv_run(model, quartet, n_per_pair, seed)
    s_value = chsh_statistic(table, quartet)
    sigma = chsh_sigma(table)
    statistics = {
        "S": s_value,
        "sigma_S": sigma,
        "abs_S": abs(s_value),
        "lhv_bound": 2.0,
        "within_bound": 1.0 if abs(s_value) <= 2.0 + SIGMA_MULTIPLIER * sigma else 0.0,
        "marginal_deviation": no_signaling_check(table),
    }
    fingerprint = canonical_fingerprint(
        {
            "experiment": "chsh-lhv",
            "seed": seed,
            "runs": n_per_pair,
            "chsh.a": quartet.a,
            "chsh.a_prime": quartet.a_prime,
            "chsh.b": quartet.b,
            "chsh.b_prime": quartet.b_prime,
            "lhv.model": model_name,
        }
    )
    return ExperimentReport(
        experiment="chsh-lhv",
        seed=seed,
        fingerprint=fingerprint,
        statistics=statistics,
        counts_header=COUNT_HEADER,
        counts=table.rows(),
    )


def no_signaling_report(
    quartet: SettingsQuartet,
    n_per_pair: int,
    engine_params: CollapseParams | None = None,
    seed: int = 0,
    preparation: str = TSIRELSON,
    workers: int | None = None,
) -> ExperimentReport:
    """Marginal-deviation report over engine-generated counts."""
    base = quantum_chsh_run(
        quartet, n_per_pair, engine_params, seed, preparation, workers=workers
    )
    table = CountTable.from_rows(base.counts)
    deviation = no_signaling_check(table)
    statistics = {
        "marginal_deviation": deviation,
        "S": chsh_statistic(table, quartet),
    }
    fingerprint = canonical_fingerprint(
        {
            "experiment": "nosignal",
            "seed": seed,
            "runs": n_per_pair,
            "chsh.a": quartet.a,
            "chsh.a_prime": quartet.a_prime,
            "chsh.b": quartet.b,
            "chsh.b_prime": quartet.b_prime,
            "chsh.preparation": preparation,
            "engine.delta": (engine_params or CollapseParams()).delta,
        }
    )
    return ExperimentReport(
        experiment="nosignal",
        seed=seed,
        fingerprint=fingerprint,
        statistics=statistics,
        counts_header=COUNT_HEADER,
        counts=base.counts,
    )


# ---------------------------------------------------------------------------
# Reduction-order undetectability


@dataclass(frozen=True)
class OrderInvarianceConfig:
    """One setting pair with exactly two mutually spacelike measurements."""

    angle_a: float = math.pi / 4
    angle_b: float = math.pi / 4
    preparation: str = SINGLET
    delta: float = DEFAULT_DELTA


@dataclass(frozen=True)
class OrderInvarianceResult:
    tvd: float
    threshold: float
    passed: bool
    counts_ab: np.ndarray
    counts_ba: np.ndarray


def tvd_threshold(cells: int, n_runs: int) -> float:
    """Multinomial sampling-noise ceiling: 3 * sqrt(cells / runs)."""
    return SIGMA_MULTIPLIER * math.sqrt(cells / n_runs)


def order_invariance_test(
    config: OrderInvarianceConfig,
    n_runs: int,
    seed: int = 0,
    resolver: Resolver | None = None,
    workers: int | None = None,
) -> OrderInvarianceResult:
    """Compare A-first and B-first reduction orderings on the same substreams.

    The per-run substream seeds are identical for both orderings, so the only
    difference is the order in which the foliation presents the reduction
    events; total variation distance between the joint outcome distributions
    must stay within multinomial noise.
    """
    if n_runs < 1:
        raise InputError("need at least one run")
    params = CollapseParams(delta=config.delta)
    state = prepare_pair(config.preparation)
    weights = joint_outcome_weights(state, config.angle_a, config.angle_b)

    tallies = {}
    for order in ("ab", "ba"):
        schedule = two_measurement_schedule("ab")
        if order == "ba":
            schedule = _swap_measurements(schedule)
        tallies[order] = _run_joint_pair(
            weights,
            _order_from_schedule(schedule),
            n_runs,
            params,
            seed,
            0,
            resolver,
            workers,
        )

    p_ab = tallies["ab"].ravel() / n_runs
    p_ba = tallies["ba"].ravel() / n_runs
    tvd = 0.5 * float(np.abs(p_ab - p_ba).sum())
    threshold = tvd_threshold(cells=4, n_runs=n_runs)
    return OrderInvarianceResult(
        tvd=tvd,
        threshold=threshold,
        passed=tvd <= threshold,
        counts_ab=tallies["ab"],
        counts_ba=tallies["ba"],
    )


def _swap_measurements(schedule: FoliationSchedule) -> FoliationSchedule:
    from .foliation import reorder_schedule

    indices = [i for i, e in enumerate(schedule.events) if e.kind == "measurement"]
    if len(indices) != 2:
        raise InputError("schedule must contain exactly two measurement events")
    i, j = indices
    return reorder_schedule(schedule, {i: j, j: i})


def order_invariance_report(
    config: OrderInvarianceConfig,
    n_runs: int,
    seed: int = 0,
    workers: int | None = None,
) -> ExperimentReport:
    result = order_invariance_test(config, n_runs, seed, workers=workers)
    statistics = {
        "tvd": result.tvd,
        "threshold": result.threshold,
        "pass": 1.0 if result.passed else 0.0,
    }
    rows = []
    for order, tally in (("ab", result.counts_ab), ("ba", result.counts_ba)):
        for oa in range(2):
            for ob in range(2):
                rows.append((order, "-", OUTCOME_VALUES[oa], OUTCOME_VALUES[ob], int(tally[oa, ob])))
    fingerprint = canonical_fingerprint(
        {
            "experiment": "order-invariance",
            "seed": seed,
            "runs": n_runs,
            "order.angle_a": config.angle_a,
            "order.angle_b": config.angle_b,
            "order.preparation": config.preparation,
            "engine.delta": config.delta,
        }
    )
    return ExperimentReport(
        experiment="order-invariance",
        seed=seed,
        fingerprint=fingerprint,
        statistics=statistics,
        counts_header=COUNT_HEADER,
        counts=tuple(rows),
    )


# ---------------------------------------------------------------------------
# Conservation through apparatus entanglement

PHOTON_MOMENTUM = (1, -1)  # transmitted keeps +p, reflected carries -p
APPARATUS_MOMENTUM = (0, 2)  # beam-splitter recoil offsets the reflection
INITIAL_MOMENTUM = 1


def _beam_splitter_state(reflectivity: float, entangled: bool) -> StateVector:
    amp_t = math.sqrt(1.0 - reflectivity)
    amp_r = math.sqrt(reflectivity)
    amps = np.zeros(4, dtype=np.complex128)
    if entangled:
        amps[0] = amp_t  # |transmitted, no recoil>
        amps[3] = amp_r  # |reflected, recoil>
    else:
        amps[0] = amp_t  # apparatus stays |no recoil> in both branches
        amps[2] = amp_r
    return StateVector((2, 2), amps)


def _reflected_branch_pair(state: StateVector) -> BranchPair:
    reflected = Projector(
        (2, 2), np.kron(np.diag([0.0, 1.0]), np.eye(2)).astype(np.complex128)
    )
    return branch_decompose(state, reflected, labels=("reflected", "transmitted"))


def _conservation_chunk(args) -> np.ndarray:
    (reflectivity, entangled, delta, master_seed, run_start, n_runs) = args
    state = _beam_splitter_state(reflectivity, entangled)
    pair = _reflected_branch_pair(state)
    params = CollapseParams(delta=delta)
    root = GlobalStream(master_seed)
    # tally[photon_outcome, conserved(0) / violated(1)]
    tally = np.zeros((2, 2), dtype=np.int64)
    for j in range(n_runs):
        stream = root.substream(run_start + j)
        result = run_collapse(state, pair, params, stream)
        idx = int(np.argmax(np.abs(result.state.amplitudes)))
        photon_idx, apparatus_idx = divmod(idx, 2)
        total = PHOTON_MOMENTUM[photon_idx] + APPARATUS_MOMENTUM[apparatus_idx]
        tally[photon_idx, 0 if total == INITIAL_MOMENTUM else 1] += 1
    return tally


def conservation_experiment(
    n_runs: int,
    reflectivity: float,
    seed: int = 0,
    entangled: bool = True,
    delta: float = DEFAULT_DELTA,
    workers: int | None = None,
) -> ExperimentReport:
    """Beam-splitter toy: collapse with apparatus recoil entangled (or not).

    Momenta are integer multiples of p, so conservation per run is checked
    with zero tolerance.  The non-entangled preparation demonstrates the 2p
    violation that apparatus entanglement repairs.
    """
    if not 0.0 <= reflectivity <= 1.0:
        raise InputError(f"reflectivity must lie in [0, 1], got {reflectivity}")
    if n_runs < 1:
        raise InputError("need at least one run")

    chunk_args = []
    start = 0
    while start < n_runs:
        size = min(CHUNK_RUNS, n_runs - start)
        chunk_args.append((reflectivity, entangled, delta, seed, start, size))
        start += size
    tallies = _map_chunks(_conservation_chunk, chunk_args, _effective_workers(workers))
    tally = np.sum(tallies, axis=0)

    reflected_runs = int(tally[1].sum())
    violated_runs = int(tally[:, 1].sum())
    statistics = {
        "reflected_frequency": reflected_runs / n_runs,
        "violation_frequency": violated_runs / n_runs,
        "max_abs_violation_p": 0.0 if violated_runs == 0 else 2.0,
        "initial_momentum_p": float(INITIAL_MOMENTUM),
        "conserved": 1.0 if violated_runs == 0 else 0.0,
    }
    rows = []
    prep_label = "entangled" if entangled else "product"
    for photon_idx in range(2):
        for conserved_idx in range(2):
            rows.append(
                (
                    "beamsplitter",
                    prep_label,
                    OUTCOME_VALUES[photon_idx],
                    1 if conserved_idx == 0 else -1,
                    int(tally[photon_idx, conserved_idx]),
                )
            )
    fingerprint = canonical_fingerprint(
        {
            "experiment": "conservation",
            "seed": seed,
            "runs": n_runs,
            "conservation.reflectivity": reflectivity,
            "conservation.entangled": entangled,
            "engine.delta": delta,
        }
    )
    return ExperimentReport(
        experiment="conservation",
        seed=seed,
        fingerprint=fingerprint,
        statistics=statistics,
        counts_header=COUNT_HEADER,
        counts=tuple(rows),
    )


# ---------------------------------------------------------------------------
# Born convergence


def _born_chunk(args) -> np.ndarray:
    (w0, delta, master_seed, stream_offset, run_start, n_runs) = args
    amps = np.array([math.sqrt(w0), math.sqrt(1.0 - w0)], dtype=np.complex128)
    state = StateVector((2,), amps)
    pair = branch_decompose(
        state, Projector((2,), np.diag([1.0, 0.0])), labels=("interacting", "noninteracting")
    )
    params = CollapseParams(delta=delta)
    root = GlobalStream(master_seed)
    wins = 0
    for j in range(n_runs):
        stream = root.substream(stream_offset + run_start + j)
        result = run_collapse(state, pair, params, stream)
        wins += result.winner == "interacting"
    return np.array([wins, n_runs - wins], dtype=np.int64)


def born_convergence_experiment(
    weights: Sequence[float],
    n_runs: int,
    delta: float = DEFAULT_DELTA,
    seed: int = 0,
    workers: int | None = None,
) -> ExperimentReport:
    """Win-frequency sweep over initial weights against the 3-sigma binomial bound."""
    if not weights:
        raise InputError("need at least one initial weight")
    for w0 in weights:
        if not 0.0 < w0 < 1.0:
            raise InputError(f"initial weights must lie in (0, 1), got {w0}")
    if n_runs < 1:
        raise InputError("need at least one run")

    statistics: dict[str, float] = {}
    rows = []
    all_pass = True
    max_dev = 0.0
    for wi, w0 in enumerate(weights):
        chunk_args = []
        start = 0
        while start < n_runs:
            size = min(CHUNK_RUNS, n_runs - start)
            chunk_args.append((w0, delta, seed, wi * n_runs, start, size))
            start += size
        tallies = _map_chunks(_born_chunk, chunk_args, _effective_workers(workers))
        wins, losses = np.sum(tallies, axis=0)
        freq = wins / n_runs
        bound = SIGMA_MULTIPLIER * math.sqrt(w0 * (1.0 - w0) / n_runs)
        dev = abs(freq - w0)
        ok = dev <= bound
        all_pass &= ok
        max_dev = max(max_dev, dev)
        statistics[f"w_{wi}"] = w0
        statistics[f"frequency_{wi}"] = freq
        statistics[f"bound_{wi}"] = bound
        statistics[f"pass_{wi}"] = 1.0 if ok else 0.0
        label = f"w0={w0:g}"
        rows.append((label, "-", 1, 0, int(wins)))
        rows.append((label, "-", -1, 0, int(losses)))
    statistics["max_abs_deviation"] = max_dev
    statistics["all_pass"] = 1.0 if all_pass else 0.0

    fingerprint = canonical_fingerprint(
        {
            "experiment": "born",
            "seed": seed,
            "runs": n_runs,
            "born.weights": list(float(w) for w in weights),
            "engine.delta": delta,
        }
    )
    return ExperimentReport(
        experiment="born",
        seed=seed,
        fingerprint=fingerprint,
        statistics=statistics,
        counts_header=COUNT_HEADER,
        counts=tuple(rows),
    )


# ---------------------------------------------------------------------------
# Collapse trace dump


def collapse_trace_experiment(
    w0: float,
    n_runs: int,
    delta: float = DEFAULT_DELTA,
    seed: int = 0,
) -> ExperimentReport:
    """Record full weight trajectories: one row per reduction step."""
    if not 0.0 < w0 < 1.0:
        raise InputError(f"initial weight must lie in (0, 1), got {w0}")
    if n_runs < 1:
        raise InputError("need at least one run")
    amps = np.array([math.sqrt(w0), math.sqrt(1.0 - w0)], dtype=np.complex128)
    state = StateVector((2,), amps)
    pair = branch_decompose(state, Projector((2,), np.diag([1.0, 0.0])))
    params = CollapseParams(delta=delta)
    root = GlobalStream(seed)

    rows = []
    wins = 0
    total_steps = 0
    for j in range(n_runs):
        result = run_collapse(state, pair, params, root.substream(j))
        wins += result.winner == "interacting"
        total_steps += result.trajectory.size - 1
        for step_index, w in enumerate(result.trajectory):
            rows.append((j, step_index, float(w)))
    statistics = {
        "w0": w0,
        "win_frequency": wins / n_runs,
        "mean_steps": total_steps / n_runs,
    }
    fingerprint = canonical_fingerprint(
        {
            "experiment": "collapse-trace",
            "seed": seed,
            "runs": n_runs,
            "trace.w0": w0,
            "engine.delta": delta,
        }
    )
    return ExperimentReport(
        experiment="collapse-trace",
        seed=seed,
        fingerprint=fingerprint,
        statistics=statistics,
        counts_header=TRACE_HEADER,
        counts=tuple(rows),
    )
