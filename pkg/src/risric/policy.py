"""User weighting policies for the weighted-sum RSRP objective.

Also holds the service-state proxies the policies consume: CQI from SNR,
a table-based transport block size, and an EWMA of served throughput.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .channel import ConfigurationError, DimensionError

# 4-bit CQI table (QPSK .. 64QAM) spectral efficiency, bits per RE.
CQI_SPECTRAL_EFFICIENCY = (
    0.1523, 0.2344, 0.3770, 0.6016, 0.8770, 1.1758, 1.4766, 1.9141,
    2.4063, 2.7305, 3.3223, 3.9023, 4.5234, 5.1152, 5.5547,
)
# Minimum SNR (dB) for CQI k+1: -6, -4, ..., 22.
CQI_THRESHOLDS_DB = tuple(-6.0 + 2.0 * k for k in range(15))

SUBCARRIERS_PER_PRB = 12
SYMBOLS_PER_SLOT = 14
THROUGHPUT_FLOOR_BPS = 1e3


class InputError(ValueError):
    pass


@dataclass(frozen=True)
class UeServiceState:
    cqi: int
    tbs_bits: int
    throughput_ewma_bps: float
    last_rsrp_dbm: float = float("nan")

    def __post_init__(self):
        if not 1 <= self.cqi <= 15:
            raise InputError(f"cqi must be in [1, 15], got {self.cqi}")
        if self.tbs_bits <= 0:
            raise InputError("tbs_bits must be positive")
        if not self.throughput_ewma_bps > 0:
            raise InputError("throughput_ewma_bps must be positive")


@dataclass(frozen=True)
class WeightPolicy:
    """Operator weighting policy.

    ``kind`` is one of ``"equal"``, ``"proportional_fair"``, ``"best_cqi"``
    or ``"reference_ue"`` (with ``index`` naming the favoured UE).
    """

    kind: str = "equal"
    index: int = 0

    KINDS = ("equal", "proportional_fair", "best_cqi", "reference_ue")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ConfigurationError(f"unknown policy kind {self.kind!r}")
        if self.kind == "reference_ue" and self.index < 0:
            raise ConfigurationError("reference UE index must be non-negative")

    @classmethod
    def equal(cls):
        return cls("equal")

    @classmethod
    def proportional_fair(cls):
        return cls("proportional_fair")

    @classmethod
    def best_cqi(cls):
        return cls("best_cqi")

    @classmethod
    def reference_ue(cls, index: int):
        return cls("reference_ue", index)

    @classmethod
    def parse(cls, text: str) -> "WeightPolicy":
        """Parse ``"equal"``, ``"best_cqi"``, ``"reference_ue:1"`` etc."""
        kind, _, arg = str(text).partition(":")
        kind = kind.strip().lower().replace("-", "_")
        aliases = {"method1": "equal", "pf": "proportional_fair", "method2": "proportional_fair",
                   "method3": "best_cqi", "reference": "reference_ue"}
        kind = aliases.get(kind, kind)
        if kind == "reference_ue":
            return cls(kind, int(arg or 0))
        if arg:
            raise ConfigurationError(f"policy {kind!r} takes no argument")
        return cls(kind)

    def __str__(self):
        return f"reference_ue:{self.index}" if self.kind == "reference_ue" else self.kind


def compute_weights(policy: WeightPolicy, states: Sequence[UeServiceState]) -> np.ndarray:
    """Per-UE weights, non-negative and summing to one.

    ``proportional_fair`` uses TBS / throughput normalised over UEs,
    ``best_cqi`` uses CQI / sum(CQI).
    """
    n = len(states)
    if n == 0:
        raise ConfigurationError("at least one UE service state is required")
    if policy.kind == "equal":
        return np.full(n, 1.0 / n)
    if policy.kind == "reference_ue":
        if policy.index >= n:
            raise ConfigurationError(f"reference UE {policy.index} but only {n} UEs")
        w = np.zeros(n)
        w[policy.index] = 1.0
        return w
    if policy.kind == "best_cqi":
        raw = np.array([s.cqi for s in states], dtype=float)
    else:
        raw = np.array([s.tbs_bits / s.throughput_ewma_bps for s in states], dtype=float)
    return raw / raw.sum()


def weighted_rsrp(weights, rsrp_dbm, domain: str = "db") -> float:
    """Weighted sum of per-UE RSRP.

    ``domain="db"`` sums dBm values directly; ``"linear"`` sums milliwatts
    and returns the result in dBm.
    """
    weights = np.asarray(weights, dtype=float)
    rsrp_dbm = np.asarray(rsrp_dbm, dtype=float)
    if weights.shape != rsrp_dbm.shape:
        raise DimensionError(f"{weights.shape} weights vs {rsrp_dbm.shape} RSRP values")
    if domain == "db":
        # Zero-weight UEs must not leak in, even with non-finite RSRP.
        mask = weights != 0
        return float(np.sum(weights[mask] * rsrp_dbm[mask]))
    if domain == "linear":
        total = float(np.sum(weights * 10.0 ** (rsrp_dbm / 10.0)))
        return 10.0 * math.log10(total) if total > 0 else -math.inf
    raise ConfigurationError(f"unknown objective domain {domain!r}")


def cqi_from_rsrp(rsrp_dbm: float, noise_floor_dbm: float,
                  thresholds_db: Sequence[float] = CQI_THRESHOLDS_DB) -> int:
    """Quantise SNR to CQI. Intervals are lower-inclusive; result is in [1, 15]."""
    snr = rsrp_dbm - noise_floor_dbm
    count = int(np.searchsorted(np.asarray(thresholds_db, dtype=float), snr, side="right"))
    return min(max(count, 1), 15)


def tbs_proxy(cqi: int, n_prb: int,
              spectral_efficiency: Sequence[float] = CQI_SPECTRAL_EFFICIENCY) -> int:
    """Bits per slot: ``floor(SE(cqi) * n_prb * 12 * 14)``."""
    if not 1 <= cqi <= 15:
        raise InputError(f"cqi must be in [1, 15], got {cqi}")
    if n_prb < 1:
        raise InputError(f"n_prb must be >= 1, got {n_prb}")
    return int(math.floor(spectral_efficiency[cqi - 1] * n_prb
                          * SUBCARRIERS_PER_PRB * SYMBOLS_PER_SLOT))


def update_throughput_ewma(state: UeServiceState, served_bps: float,
                           beta: float = 0.1) -> UeServiceState:
    if not 0 < beta <= 1:
        raise InputError("beta must be in (0, 1]")
    if served_bps < 0:
        raise InputError("served_bps must be non-negative")
    ewma = (1.0 - beta) * state.throughput_ewma_bps + beta * served_bps
    return replace(state, throughput_ewma_bps=max(ewma, THROUGHPUT_FLOOR_BPS))
