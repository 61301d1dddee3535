"""Scenario configuration, calibration, multi-trial campaigns and CSV output."""

from __future__ import annotations

import csv
import dataclasses
import logging
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import List, Sequence

import numpy as np
import yaml

from .channel import (ConfigurationError, MeasurementConfig, RisConfiguration, draw_channel,
                      measure_ss_rsrp)
from .optimizer import OptimizerSettings, exhaustive_optimize, greedy_optimize
from .policy import CQI_SPECTRAL_EFFICIENCY, CQI_THRESHOLDS_DB, WeightPolicy
from .ric import DirectEvaluator, RanNode, ServiceModel, ro_xapp_run

log = logging.getLogger(__name__)

TRACE_COLUMNS = ("trial", "iteration", "sim_time_ms", "element", "candidate_state",
                 "accepted", "rsrp_ws", "ue_id", "rsrp_dbm", "weight", "cqi")
TRIAL_COLUMNS = ("trial", "ue_id", "initial_dbm", "final_dbm", "improvement_db")
SUMMARY_COLUMNS = ("case", "ue_id", "mean_initial_dbm", "mean_final_dbm",
                   "mean_improvement_db", "std_db", "trials")

CALIBRATION_TARGET_DBM = -110.0
CALIBRATION_DRAWS = 100


class CalibrationError(RuntimeError):
    pass


@dataclass
class ScenarioConfig:
    name: str = "custom"
    n_x: int = 4
    n_y: int = 19
    n_state: int = 4
    n_ue: int = 1
    path_gain_db: Sequence[float] = (0.0,)
    noise_floor_dbm: float = -120.0
    thermal_noise: bool = True
    policy: WeightPolicy = field(default_factory=WeightPolicy)
    meas: MeasurementConfig = field(default_factory=MeasurementConfig)
    trials: int = 300
    seed: int = 0
    step_ms: int = 10
    n_prb: int = 106
    carrier_hz: float = 4.9e9
    sweeps: int = 1
    recompute_weights: bool = True
    objective_domain: str = "db"
    amplitude: float = 1.0
    polarization: str = "single"
    h_los: Sequence[complex] | None = None
    link_adaptation: str = "fixed"
    fixed_cqi: int = 12
    bler_slope_db: float = 1.0
    slot_ms: float = 1.0
    ewma_beta: float = 0.1
    cqi_thresholds_db: Sequence[float] = CQI_THRESHOLDS_DB
    cqi_spectral_efficiency: Sequence[float] = CQI_SPECTRAL_EFFICIENCY
    calibrated: bool = False

    def __post_init__(self):
        if isinstance(self.policy, str):
            self.policy = WeightPolicy.parse(self.policy)
        if isinstance(self.meas, dict):
            self.meas = MeasurementConfig(**self.meas)
        self.path_gain_db = tuple(float(x) for x in np.broadcast_to(
            np.asarray(self.path_gain_db, dtype=float), (self.n_ue,)))
        if self.n_x < 1 or self.n_y < 1:
            raise ConfigurationError("n_x and n_y must be positive")
        if self.n_ue < 1:
            raise ConfigurationError("n_ue must be >= 1")
        if self.trials < 1:
            raise ConfigurationError("trials must be >= 1")
        if self.policy.kind == "reference_ue" and self.policy.index >= self.n_ue:
            raise ConfigurationError("reference UE index out of range")

    @property
    def n_elements(self) -> int:
        return self.n_x * self.n_y

    def noise_var(self) -> np.ndarray:
        """Per-UE noise variance in the dBFS domain implied by the noise floor."""
        if not self.thermal_noise:
            return np.zeros(self.n_ue)
        var = 10.0 ** ((self.noise_floor_dbm - self.meas.calibration_db) / 10.0)
        return np.full(self.n_ue, var)

    def service_model(self) -> ServiceModel:
        return ServiceModel(
            noise_floor_dbm=self.noise_floor_dbm, n_prb=self.n_prb, slot_ms=self.slot_ms,
            ewma_beta=self.ewma_beta, cqi_thresholds_db=tuple(self.cqi_thresholds_db),
            cqi_spectral_efficiency=tuple(self.cqi_spectral_efficiency),
            link_adaptation=self.link_adaptation, fixed_cqi=self.fixed_cqi,
            bler_slope_db=self.bler_slope_db)

    def optimizer_settings(self, element_order_seed: int = 0) -> OptimizerSettings:
        return OptimizerSettings(n_state=self.n_state, element_order_seed=element_order_seed,
                                 sweeps=self.sweeps, recompute_weights=self.recompute_weights,
                                 step_ms=self.step_ms, objective_domain=self.objective_domain)

    def zero_configuration(self) -> RisConfiguration:
        return RisConfiguration.zeros(self.n_x, self.n_y, self.n_state, self.amplitude,
                                      self.polarization)

    def trial_seeds(self, trial: int):
        """(channel, measurement, element-order) seeds for one trial."""
        ss = np.random.SeedSequence([self.seed, trial])
        return tuple(int(x) for x in ss.generate_state(3, dtype=np.uint32))

    def build_node(self, trial: int) -> RanNode:
        ch_seed, meas_seed, _ = self.trial_seeds(trial)
        ch = draw_channel(self, ch_seed)
        return RanNode(ch, self.zero_configuration(), self.meas, self.service_model(),
                       np.random.default_rng(meas_seed))

    def single_ue(self) -> "ScenarioConfig":
        return replace(self, n_ue=1, path_gain_db=(self.path_gain_db[0],),
                       policy=WeightPolicy.equal())

    def with_offset(self, offset_db: float) -> "ScenarioConfig":
        return replace(self, meas=replace(self.meas, dbfs_to_dbm_offset=offset_db))

    def to_dict(self) -> dict:
        out = {}
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if isinstance(value, WeightPolicy):
                value = str(value)
            elif isinstance(value, MeasurementConfig):
                value = dataclasses.asdict(value)
            elif isinstance(value, tuple):
                value = list(value)
            out[f.name] = value
        return out


def scenario_from_dict(data: dict) -> ScenarioConfig:
    known = {f.name for f in dataclasses.fields(ScenarioConfig)}
    unknown = set(data) - known
    if unknown:
        raise ConfigurationError(f"unknown scenario keys: {sorted(unknown)}")
    data = dict(data)
    meas = data.get("meas")
    if isinstance(meas, dict):
        meas_known = {f.name for f in dataclasses.fields(MeasurementConfig)}
        bad = set(meas) - meas_known
        if bad:
            raise ConfigurationError(f"unknown meas keys: {sorted(bad)}")
    return ScenarioConfig(**data)


def load_scenario(path) -> ScenarioConfig:
    """Read a YAML scenario file; a ``preset`` key starts from a built-in case."""
    with open(path, encoding="utf-8") as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, dict):
        raise ConfigurationError(f"{path}: scenario must be a mapping")
    preset = data.pop("preset", None)
    if preset is not None:
        base = CASES[preset]().to_dict() if preset in CASES else None
        if base is None:
            raise ConfigurationError(f"unknown preset {preset!r}")
        if isinstance(data.get("meas"), dict):
            data["meas"] = {**base["meas"], **data["meas"]}
        base.update(data)
        data = base
    return scenario_from_dict(data)


def save_scenario(scenario: ScenarioConfig, path):
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(scenario.to_dict(), fh, sort_keys=False)


# Built-in presets reproducing the five experiment cases.
WEAK_UE_OFFSET_DB = -8.0


def _base(**kw) -> ScenarioConfig:
    return ScenarioConfig(**kw)


def case1() -> ScenarioConfig:
    return _base(name="case1", n_ue=1, path_gain_db=(0.0,), policy=WeightPolicy.equal())


def case2() -> ScenarioConfig:
    return _base(name="case2", n_ue=2, path_gain_db=(0.0, 0.0),
                 policy=WeightPolicy.reference_ue(0))


def case3() -> ScenarioConfig:
    return _base(name="case3", n_ue=2, path_gain_db=(0.0, 0.0), policy=WeightPolicy.equal())


def case4() -> ScenarioConfig:
    return _base(name="case4", n_ue=2, path_gain_db=(0.0, WEAK_UE_OFFSET_DB),
                 policy=WeightPolicy.proportional_fair(), trials=100)


def case5() -> ScenarioConfig:
    return _base(name="case5", n_ue=2, path_gain_db=(0.0, WEAK_UE_OFFSET_DB),
                 policy=WeightPolicy.best_cqi(), trials=100)


CASES = {"case1": case1, "case2": case2, "case3": case3, "case4": case4, "case5": case5}

CASE_DESCRIPTIONS = {
    "case1": "single UE, RIS optimized for that UE",
    "case2": "two symmetric UEs, RIS optimized for reference UE 0 only",
    "case3": "two symmetric UEs, equal weights",
    "case4": "strong UE 0 and weak UE 1 (-8 dB), proportional-fair weights",
    "case5": "strong UE 0 and weak UE 1 (-8 dB), CQI-proportional weights",
}


def unoptimized_mean_rsrp(scenario: ScenarioConfig, draws: int = CALIBRATION_DRAWS) -> float:
    """Mean SS-RSRP of UE 0 with every element in state 0, over fixed-seed draws."""
    single = scenario.single_ue()
    cfg = single.zero_configuration()
    values = []
    for trial in range(draws):
        ch_seed, meas_seed, _ = single.trial_seeds(trial)
        ch = draw_channel(single, ch_seed)
        rng = np.random.default_rng(meas_seed)
        values.append(measure_ss_rsrp(ch, cfg, 0, single.meas, rng))
    return float(np.mean(values))


def calibrate(scenario: ScenarioConfig, target_dbm: float = CALIBRATION_TARGET_DBM,
              tol_db: float = 0.05, draws: int = CALIBRATION_DRAWS,
              max_iter: int = 60) -> ScenarioConfig:
    """Bisect ``dbfs_to_dbm_offset`` until the unoptimized single-UE mean hits the target."""
    lo, hi = -300.0, 100.0
    f_lo = unoptimized_mean_rsrp(scenario.with_offset(lo), draws) - target_dbm
    f_hi = unoptimized_mean_rsrp(scenario.with_offset(hi), draws) - target_dbm
    if f_lo > 0 or f_hi < 0:
        raise CalibrationError(f"target {target_dbm} dBm not bracketed by offsets [{lo}, {hi}]")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        err = unoptimized_mean_rsrp(scenario.with_offset(mid), draws) - target_dbm
        if abs(err) <= tol_db:
            log.debug("calibrated offset %.4f dB (residual %.4f dB)", mid, err)
            out = scenario.with_offset(mid)
            return replace(out, calibrated=True)
        if err < 0:
            lo = mid
        else:
            hi = mid
    raise CalibrationError(f"no convergence within {max_iter} bisection steps")


@dataclass
class CampaignResult:
    case: str
    n_ue: int
    initial_dbm: np.ndarray  # (trials, n_ue)
    final_dbm: np.ndarray
    initial_objective: np.ndarray  # (trials,)
    final_objective: np.ndarray
    elapsed_ms: np.ndarray
    traces: List = field(default_factory=list)

    @property
    def trials(self) -> int:
        return self.initial_dbm.shape[0]

    @property
    def improvement_db(self) -> np.ndarray:
        return self.final_dbm - self.initial_dbm

    @property
    def mean_improvement_db(self) -> np.ndarray:
        return self.improvement_db.mean(axis=0)

    @property
    def std_improvement_db(self) -> np.ndarray:
        if self.trials < 2:
            return np.zeros(self.n_ue)
        return self.improvement_db.std(axis=0, ddof=1)

    @classmethod
    def empty(cls, case="empty", n_ue=1):
        z = np.zeros((0, n_ue))
        return cls(case, n_ue, z, z.copy(), np.zeros(0), np.zeros(0),
                   np.zeros(0, dtype=int))


def run_trial(scenario: ScenarioConfig, trial: int, transport: str = "inproc"):
    """One channel draw and one full RIC optimization loop."""
    _, _, order_seed = scenario.trial_seeds(trial)
    node = scenario.build_node(trial)
    result = ro_xapp_run(node, scenario.policy, scenario.optimizer_settings(order_seed),
                         transport=transport)
    # Post-run confirmation measurement of the final configuration.
    final = np.array([measure_ss_rsrp(node.channel, result.config, ue, scenario.meas, node.rng)
                      for ue in range(node.channel.n_ue)])
    return result, final


def run_campaign(scenario: ScenarioConfig, keep_traces: bool = False,
                 transport: str = "inproc") -> CampaignResult:
    if not scenario.calibrated:
        log.warning("running campaign %s on an uncalibrated scenario", scenario.name)
    initial, final, obj0, obj1, elapsed, traces = [], [], [], [], [], []
    for trial in range(scenario.trials):
        res, final_rsrp = run_trial(scenario, trial, transport)
        trace = res.trace
        initial.append(trace.initial_rsrp_dbm)
        final.append(final_rsrp)
        obj0.append(trace.initial_rsrp_ws)
        obj1.append(trace.final_rsrp_ws_max)
        elapsed.append(res.elapsed_ms)
        if keep_traces:
            traces.append(trace)
    return CampaignResult(scenario.name, scenario.n_ue, np.array(initial), np.array(final),
                          np.array(obj0), np.array(obj1), np.array(elapsed), traces)


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def emit_csv(result: CampaignResult, out_dir) -> dict:
    """Write ``trace.csv`` (one row per UE per iteration) and ``trials.csv``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {"trace": out_dir / "trace.csv", "trials": out_dir / "trials.csv"}
    with open(paths["trace"], "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for trial, trace in enumerate(result.traces):
            for row in trace.rows:
                for ue in range(len(row.per_ue_rsrp_dbm)):
                    w.writerow([trial, row.iteration, row.sim_time_ms, row.element,
                                row.candidate_state, _fmt(row.accepted), _fmt(row.rsrp_ws),
                                ue, _fmt(row.per_ue_rsrp_dbm[ue]), _fmt(row.weights[ue]),
                                _fmt(row.cqi[ue])])
    with open(paths["trials"], "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRIAL_COLUMNS)
        for trial in range(result.trials):
            for ue in range(result.n_ue):
                w.writerow([trial, ue, _fmt(result.initial_dbm[trial, ue]),
                            _fmt(result.final_dbm[trial, ue]),
                            _fmt(result.improvement_db[trial, ue])])
    return paths


def emit_summary(result: CampaignResult, out_dir) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "summary.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_COLUMNS)
        if result.trials:
            mean_i = result.initial_dbm.mean(axis=0)
            mean_f = result.final_dbm.mean(axis=0)
            for ue in range(result.n_ue):
                w.writerow([result.case, ue, _fmt(mean_i[ue]), _fmt(mean_f[ue]),
                            _fmt(result.mean_improvement_db[ue]),
                            _fmt(result.std_improvement_db[ue]), result.trials])
    return path


def read_trials_csv(path) -> CampaignResult:
    """Rebuild per-trial initial/final RSRP from ``trials.csv``."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        return CampaignResult.empty()
    n_trials = max(int(r["trial"]) for r in rows) + 1
    n_ue = max(int(r["ue_id"]) for r in rows) + 1
    initial = np.full((n_trials, n_ue), np.nan)
    final = np.full((n_trials, n_ue), np.nan)
    for r in rows:
        t, u = int(r["trial"]), int(r["ue_id"])
        initial[t, u] = float(r["initial_dbm"])
        final[t, u] = float(r["final_dbm"])
    nan = np.full(n_trials, np.nan)
    return CampaignResult("parsed", n_ue, initial, final, nan, nan.copy(),
                          np.zeros(n_trials, dtype=int))


def read_summary_csv(path) -> list:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def oracle_check(scenario: ScenarioConfig, trial: int = 0):
    """Greedy vs exhaustive objective on one draw of a small scenario.

    Both searches run noiseless with weights frozen at the all-zero
    measurement, so the exhaustive value is a true upper bound.
    """
    scenario = replace(scenario, thermal_noise=False,
                       meas=replace(scenario.meas, rsrp_noise_std=0.0))
    node = scenario.build_node(trial)
    evaluator = DirectEvaluator(node)
    best_cfg, best = exhaustive_optimize(
        evaluator, scenario.policy, scenario.n_elements, scenario.n_state,
        grid=(scenario.n_x, scenario.n_y), amplitude=scenario.amplitude,
        polarization=scenario.polarization, objective_domain=scenario.objective_domain)
    _, _, order_seed = scenario.trial_seeds(trial)
    settings = replace(scenario.optimizer_settings(order_seed), recompute_weights=False)
    node = scenario.build_node(trial)
    cfg, trace = greedy_optimize(DirectEvaluator(node), scenario.policy, settings,
                                 scenario.n_elements, grid=(scenario.n_x, scenario.n_y),
                                 amplitude=scenario.amplitude,
                                 polarization=scenario.polarization)
    return {"exhaustive_objective": best, "exhaustive_states": best_cfg.states.tolist(),
            "greedy_objective": trace.final_rsrp_ws_max, "greedy_states": cfg.states.tolist()}


def seed_from_env(default: int) -> int:
    value = os.environ.get("RISRIC_SEED")
    return int(value) if value not in (None, "") else default
