"""Greedy per-element RIS state search plus exhaustive and random baselines.

An *evaluator* is any callable mapping a :class:`RisConfiguration` to a list
of per-UE :class:`UeServiceState` measurements. Each call stands for one
control step; whether it goes over the RIC bus or straight to the channel
model is the evaluator's business.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, List, Sequence

import numpy as np

from .channel import ConfigurationError, RisConfiguration
from .policy import UeServiceState, WeightPolicy, compute_weights, weighted_rsrp

Evaluator = Callable[[RisConfiguration], Sequence[UeServiceState]]

EXHAUSTIVE_LIMIT = 10**6


@dataclass
class OptimizerSettings:
    n_state: int = 4
    element_order_seed: int = 0
    sweeps: int = 1
    recompute_weights: bool = True
    step_ms: int = 10
    objective_domain: str = "db"

    def __post_init__(self):
        if self.n_state < 2:
            raise ConfigurationError("n_state must be >= 2")
        if self.sweeps < 1:
            raise ConfigurationError("sweeps must be >= 1")
        if self.step_ms < 1:
            raise ConfigurationError("step_ms must be >= 1")


@dataclass
class TraceRow:
    iteration: int
    sweep: int
    element: int
    candidate_state: int
    per_ue_rsrp_dbm: np.ndarray
    weights: np.ndarray
    cqi: np.ndarray
    rsrp_ws: float
    rsrp_ws_max: float  # running maximum after this row
    accepted: bool
    reverted: bool  # rejected candidate that differed from the incumbent
    sim_time_ms: int


@dataclass
class OptimizationTrace:
    initial_rsrp_dbm: np.ndarray = None
    initial_weights: np.ndarray = None
    initial_cqi: np.ndarray = None
    initial_rsrp_ws: float = float("nan")
    rows: List[TraceRow] = field(default_factory=list)

    def __len__(self):
        return len(self.rows)

    @property
    def final_rsrp_ws_max(self) -> float:
        return self.rows[-1].rsrp_ws_max if self.rows else self.initial_rsrp_ws

    @property
    def elapsed_ms(self) -> int:
        return self.rows[-1].sim_time_ms if self.rows else 0

    @property
    def n_accepted(self) -> int:
        return sum(r.accepted for r in self.rows)

    @property
    def n_reverted(self) -> int:
        return sum(r.reverted for r in self.rows)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows])


class OptimizationAborted(RuntimeError):
    """Evaluator failed mid-run; ``trace`` holds every completed row."""

    def __init__(self, message, trace, configuration):
        super().__init__(message)
        self.trace = trace
        self.configuration = configuration


def _unpack(measurement: Sequence[UeServiceState]):
    rsrp = np.array([m.last_rsrp_dbm for m in measurement], dtype=float)
    cqi = np.array([m.cqi for m in measurement], dtype=np.int64)
    return rsrp, cqi


def _zero_config(n_elements, n_state, grid, amplitude, polarization):
    n_x, n_y = grid if grid is not None else (1, n_elements)
    if n_x * n_y != n_elements:
        raise ConfigurationError(f"grid {n_x}x{n_y} does not hold {n_elements} elements")
    return RisConfiguration.zeros(n_x, n_y, n_state, amplitude, polarization)


def greedy_optimize(evaluator: Evaluator, policy: WeightPolicy, settings: OptimizerSettings,
                    n_elements: int, *, grid=None, amplitude: float = 1.0,
                    polarization: str = "single"):
    """Sequential per-element greedy search over discrete RIS states.

    Starts from the all-zero configuration, visits elements in a shuffled
    order and, for every element, tries each state in turn. A candidate is
    kept only if its weighted RSRP strictly beats the best value seen so far;
    otherwise the element goes back to its incumbent state before the next
    candidate is applied.

    Returns
    -------
    (RisConfiguration, OptimizationTrace)

    Raises
    ------
    OptimizationAborted
        If the evaluator raises; the partial trace is attached.
    """
    if n_elements < 1:
        raise ConfigurationError("n_elements must be >= 1")
    config = _zero_config(n_elements, settings.n_state, grid, amplitude, polarization)
    trace = OptimizationTrace()
    domain = settings.objective_domain

    def evaluate(cfg):
        try:
            return evaluator(cfg)
        except Exception as exc:
            raise OptimizationAborted(f"evaluator failed: {exc}", trace, config) from exc

    measurement = evaluate(config)
    rsrp, cqi = _unpack(measurement)
    weights = compute_weights(policy, measurement)
    best = weighted_rsrp(weights, rsrp, domain)
    trace.initial_rsrp_dbm, trace.initial_cqi = rsrp, cqi
    trace.initial_weights, trace.initial_rsrp_ws = weights, best
    frozen_weights = weights

    # Optional hook: lets a bus-backed evaluator issue the reversion command.
    revert = getattr(evaluator, "revert", None)
    order_rng = np.random.default_rng(settings.element_order_seed)
    iteration = 0
    for sweep in range(settings.sweeps):
        order = order_rng.permutation(n_elements)
        for element in order:
            element = int(element)
            for state in range(settings.n_state):
                iteration += 1
                incumbent = int(config.states[element])
                candidate = config.with_element(element, state)
                measurement = evaluate(candidate)
                rsrp, cqi = _unpack(measurement)
                weights = (compute_weights(policy, measurement)
                           if settings.recompute_weights else frozen_weights)
                value = weighted_rsrp(weights, rsrp, domain)
                accepted = value > best
                if accepted:
                    best = value
                    config = candidate
                reverted = not accepted and state != incumbent
                trace.rows.append(TraceRow(
                    iteration=iteration, sweep=sweep, element=element,
                    candidate_state=state, per_ue_rsrp_dbm=rsrp, weights=weights,
                    cqi=cqi, rsrp_ws=value, rsrp_ws_max=best, accepted=accepted,
                    reverted=reverted, sim_time_ms=iteration * settings.step_ms))
                if reverted and revert is not None:
                    try:
                        revert(config)
                    except Exception as exc:
                        raise OptimizationAborted(f"reversion failed: {exc}", trace,
                                                  config) from exc
    return config, trace


def _all_states(n_elements, n_state):
    total = n_state ** n_elements
    if total > EXHAUSTIVE_LIMIT:
        raise ConfigurationError(
            f"exhaustive search over {n_state}^{n_elements} = {total} configurations "
            f"exceeds the limit of {EXHAUSTIVE_LIMIT}")
    return itertools.product(range(n_state), repeat=n_elements)


def exhaustive_optimize(evaluator: Evaluator, policy: WeightPolicy, n_elements: int,
                        n_state: int, *, grid=None, amplitude: float = 1.0,
                        polarization: str = "single", objective_domain: str = "db"):
    """Brute-force optimum with weights frozen at the all-zero measurement.

    Configurations are visited in lexicographic order and only a strictly
    better objective replaces the incumbent, so ties resolve to the
    lexicographically smallest state vector.
    """
    states_iter = _all_states(n_elements, n_state)
    base = _zero_config(n_elements, n_state, grid, amplitude, polarization)
    measurement = evaluator(base)
    weights = compute_weights(policy, measurement)

    best_cfg, best_value = None, -np.inf
    for states in states_iter:
        cfg = base.with_states(states)
        rsrp, _ = _unpack(evaluator(cfg))
        value = weighted_rsrp(weights, rsrp, objective_domain)
        if best_cfg is None or value > best_value:
            best_cfg, best_value = cfg, value
    return best_cfg, best_value


def random_baseline(evaluator: Evaluator, trials: int, rng: np.random.Generator, *,
                    n_elements: int, n_state: int = 4, policy: WeightPolicy = None,
                    grid=None, amplitude: float = 1.0, polarization: str = "single",
                    objective_domain: str = "db") -> float:
    """Best objective over ``trials`` uniformly random configurations."""
    if trials < 1:
        raise ConfigurationError("trials must be >= 1")
    policy = policy or WeightPolicy.equal()
    base = _zero_config(n_elements, n_state, grid, amplitude, polarization)
    weights = compute_weights(policy, evaluator(base))
    best = -np.inf
    for _ in range(trials):
        cfg = base.with_states(rng.integers(0, n_state, n_elements))
        rsrp, _ = _unpack(evaluator(cfg))
        best = max(best, weighted_rsrp(weights, rsrp, objective_domain))
    return best
