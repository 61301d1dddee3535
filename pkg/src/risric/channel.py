"""Narrowband RIS-assisted downlink channel and SS-RSRP measurement model.

Each UE sees a single-tap cascaded channel ``g^H Theta h + h_los`` through an
N-element RIS whose elements take one of ``n_state`` discrete states. The
measurement side reproduces the sample-averaged power of a pilot over ``K``
samples and the per-resource-element averaging used for SS-RSRP.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

#: Floor returned instead of -inf when the measured power is exactly zero.
ZERO_POWER_DBFS = -200.0


class ConfigurationError(ValueError):
    """Invalid scenario or configuration parameters."""


class DimensionError(ValueError):
    """Array lengths that should agree do not."""


@dataclass(frozen=True)
class ChannelRealization:
    """One draw of the gNB->RIS and RIS->UE channels.

    ``h`` has shape ``(N,)`` and ``g`` has shape ``(n_ue, N)``. The optional
    ``h_v``/``g_v`` pair carries the vertical-polarization channels and is
    only populated for dual-polarization scenarios.
    """

    h: np.ndarray
    g: np.ndarray
    h_los: np.ndarray
    noise_var: np.ndarray
    seed: int = 0
    h_v: np.ndarray | None = None
    g_v: np.ndarray | None = None

    def __post_init__(self):
        h = np.asarray(self.h, dtype=complex)
        g = np.atleast_2d(np.asarray(self.g, dtype=complex))
        n_ue = g.shape[0]
        h_los = np.broadcast_to(np.asarray(self.h_los, dtype=complex), (n_ue,)).copy()
        noise_var = np.broadcast_to(np.asarray(self.noise_var, dtype=float), (n_ue,)).copy()
        if h.ndim != 1 or g.shape[1] != h.shape[0]:
            raise DimensionError(f"h has shape {h.shape}, g has shape {g.shape}")
        if np.any(noise_var < 0):
            raise ConfigurationError("noise_var must be non-negative")
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "h_los", h_los)
        object.__setattr__(self, "noise_var", noise_var)
        if (self.h_v is None) != (self.g_v is None):
            raise ConfigurationError("h_v and g_v must be given together")
        if self.h_v is not None:
            h_v = np.asarray(self.h_v, dtype=complex)
            g_v = np.atleast_2d(np.asarray(self.g_v, dtype=complex))
            if h_v.shape != h.shape or g_v.shape != g.shape:
                raise DimensionError("vertical-polarization channels must match h/g shapes")
            object.__setattr__(self, "h_v", h_v)
            object.__setattr__(self, "g_v", g_v)

    @property
    def n_elements(self) -> int:
        return self.h.shape[0]

    @property
    def n_ue(self) -> int:
        return self.g.shape[0]

    @property
    def dual_polarized(self) -> bool:
        return self.h_v is not None


@dataclass(frozen=True)
class RisConfiguration:
    """Discrete per-element RIS states.

    With ``polarization="single"`` only the horizontal diode bit matters:
    states in the upper half of ``[0, n_state)`` apply a 180 degree shift.
    With ``"dual"`` (``n_state == 4``) the state encodes two bits,
    ``horizontal = s // 2`` and ``vertical = s % 2``.
    """

    states: np.ndarray
    n_x: int
    n_y: int
    n_state: int = 4
    amplitude: float = 1.0
    polarization: str = "single"

    def __post_init__(self):
        states = np.asarray(self.states, dtype=np.int64).reshape(-1)
        if self.n_x < 1 or self.n_y < 1 or self.n_x * self.n_y != states.size:
            raise ConfigurationError(
                f"grid {self.n_x}x{self.n_y} does not match {states.size} states")
        if self.n_state < 2:
            raise ConfigurationError("n_state must be at least 2")
        if np.any(states < 0) or np.any(states >= self.n_state):
            raise ConfigurationError(f"states must lie in [0, {self.n_state})")
        if not 0.0 < self.amplitude <= 1.0:
            raise ConfigurationError("amplitude must be in (0, 1]")
        if self.polarization not in ("single", "dual"):
            raise ConfigurationError(f"unknown polarization {self.polarization!r}")
        if self.polarization == "dual" and self.n_state != 4:
            raise ConfigurationError("dual polarization needs n_state == 4")
        states.setflags(write=False)
        object.__setattr__(self, "states", states)

    @classmethod
    def zeros(cls, n_x, n_y, n_state=4, amplitude=1.0, polarization="single"):
        return cls(np.zeros(n_x * n_y, dtype=np.int64), n_x, n_y, n_state,
                   amplitude, polarization)

    @property
    def n_elements(self) -> int:
        return self.states.size

    def with_states(self, states) -> "RisConfiguration":
        return RisConfiguration(states, self.n_x, self.n_y, self.n_state,
                                self.amplitude, self.polarization)

    def with_element(self, index: int, state: int) -> "RisConfiguration":
        states = self.states.copy()
        states[index] = state
        return self.with_states(states)

    def phase_bits(self) -> np.ndarray:
        """Horizontal-polarization phase bit per element (1 means 180 degrees)."""
        if self.polarization == "dual":
            return self.states // 2
        return (self.states >= self.n_state // 2).astype(np.int64)

    def vertical_bits(self) -> np.ndarray:
        if self.polarization != "dual":
            raise ConfigurationError("vertical bits only exist for dual polarization")
        return self.states % 2

    def reflection(self) -> np.ndarray:
        """Diagonal of Theta. Binary phases are kept exact (+alpha / -alpha)."""
        return self.amplitude * (1.0 - 2.0 * self.phase_bits()).astype(complex)

    def reflection_vertical(self) -> np.ndarray:
        return self.amplitude * (1.0 - 2.0 * self.vertical_bits()).astype(complex)


@dataclass
class MeasurementConfig:
    """Sampling and calibration parameters of the SS-RSRP measurement."""

    k_samples: int = 8
    n_re: int = 12
    tx_power_dbm: float = 0.0
    dbfs_to_dbm_offset: float = -130.0
    rsrp_noise_std: float = 0.0
    rsrp_averaging: str = "db"

    def __post_init__(self):
        if self.k_samples < 1:
            raise ConfigurationError("k_samples must be >= 1")
        if self.n_re < 1:
            raise ConfigurationError("n_re must be >= 1")
        if self.rsrp_noise_std < 0:
            raise ConfigurationError("rsrp_noise_std must be >= 0")
        if self.rsrp_averaging not in ("db", "linear"):
            raise ConfigurationError("rsrp_averaging must be 'db' or 'linear'")

    @property
    def calibration_db(self) -> float:
        """Additive dBFS -> dBm constant."""
        return self.dbfs_to_dbm_offset + self.tx_power_dbm


def complex_gaussian(rng: np.random.Generator, size, var=1.0) -> np.ndarray:
    """Circularly-symmetric complex Gaussian samples with variance ``var``."""
    scale = np.sqrt(np.asarray(var, dtype=float) / 2.0)
    return scale * (rng.standard_normal(size) + 1j * rng.standard_normal(size))


def draw_channel(scenario, seed: int) -> ChannelRealization:
    """Draw an i.i.d. Rayleigh realization for ``scenario``.

    ``scenario`` needs ``n_elements``, ``n_ue``, ``path_gain_db`` (one entry
    per UE, mean power of each RIS->UE coefficient), ``noise_var()`` and
    optionally ``h_los`` and ``polarization``.
    """
    n = int(scenario.n_elements)
    n_ue = int(scenario.n_ue)
    if n < 1 or n_ue < 1:
        raise ConfigurationError(f"need N >= 1 and n_ue >= 1, got N={n}, n_ue={n_ue}")
    path_gain_db = np.broadcast_to(np.asarray(scenario.path_gain_db, dtype=float), (n_ue,))
    ue_var = 10.0 ** (path_gain_db / 10.0)

    rng = np.random.default_rng(seed)
    h = complex_gaussian(rng, n)
    g = complex_gaussian(rng, (n_ue, n)) * np.sqrt(ue_var)[:, None]
    h_v = g_v = None
    if getattr(scenario, "polarization", "single") == "dual":
        h_v = complex_gaussian(rng, n)
        g_v = complex_gaussian(rng, (n_ue, n)) * np.sqrt(ue_var)[:, None]

    h_los = getattr(scenario, "h_los", None)
    if h_los is None:
        h_los = np.zeros(n_ue, dtype=complex)
    return ChannelRealization(h=h, g=g, h_los=h_los, noise_var=scenario.noise_var(),
                              seed=seed, h_v=h_v, g_v=g_v)


def effective_channel(ch: ChannelRealization, cfg: RisConfiguration, ue: int) -> complex:
    """Return ``g_ue^H Theta h + h_los[ue]``."""
    if cfg.n_elements != ch.n_elements:
        raise DimensionError(
            f"configuration has {cfg.n_elements} elements, channel has {ch.n_elements}")
    if not 0 <= ue < ch.n_ue:
        raise IndexError(f"UE index {ue} out of range for {ch.n_ue} UEs")
    value = np.sum(np.conj(ch.g[ue]) * cfg.reflection() * ch.h)
    if cfg.polarization == "dual":
        if not ch.dual_polarized:
            raise ConfigurationError("dual-polarized configuration needs a dual-polarized channel")
        value += np.sum(np.conj(ch.g_v[ue]) * cfg.reflection_vertical() * ch.h_v)
    return complex(value + ch.h_los[ue])


def power_to_db(power) -> np.ndarray | float:
    """10*log10 with the zero-power floor applied."""
    power = np.asarray(power, dtype=float)
    with np.errstate(divide="ignore"):
        out = np.where(power > 0, 10.0 * np.log10(np.where(power > 0, power, 1.0)),
                       ZERO_POWER_DBFS)
    return float(out) if out.ndim == 0 else out


def _sample_power(effective: complex, noise_var: float, k: int, n_re: int,
                  rng: np.random.Generator) -> np.ndarray:
    # Noiseless: |x[k]| = 1 so every sample has power |effective|^2 exactly.
    if noise_var == 0.0:
        return np.full(n_re, abs(effective) ** 2)
    pilots = np.exp(2j * np.pi * rng.random((n_re, k)))
    r = effective * pilots + complex_gaussian(rng, (n_re, k), noise_var)
    return np.mean(np.abs(r) ** 2, axis=1)


def measure_power_dbfs(ch: ChannelRealization, cfg: RisConfiguration, ue: int,
                       meas: MeasurementConfig, rng: np.random.Generator) -> float:
    """Average received pilot power over ``K`` samples, in dBFS."""
    eff = effective_channel(ch, cfg, ue)
    power = _sample_power(eff, float(ch.noise_var[ue]), meas.k_samples, 1, rng)
    return power_to_db(power[0])


def measure_ss_rsrp(ch: ChannelRealization, cfg: RisConfiguration, ue: int,
                    meas: MeasurementConfig, rng: np.random.Generator) -> float:
    """SS-RSRP in dBm from ``n_re`` independent per-RE power measurements.

    Default ``rsrp_averaging="db"`` takes the arithmetic mean of the per-RE
    dBm values; ``"linear"`` averages milliwatts instead.
    """
    eff = effective_channel(ch, cfg, ue)
    power = _sample_power(eff, float(ch.noise_var[ue]), meas.k_samples, meas.n_re, rng)
    per_re_dbm = power_to_db(power) + meas.calibration_db
    rsrp = average_re_dbm(per_re_dbm, meas.rsrp_averaging)
    if meas.rsrp_noise_std > 0:
        rsrp += meas.rsrp_noise_std * rng.standard_normal()
    return rsrp


def average_re_dbm(per_re_dbm, averaging: str = "db") -> float:
    """Combine per-resource-element dBm values into one SS-RSRP figure."""
    per_re_dbm = np.asarray(per_re_dbm, dtype=float)
    if averaging == "db":
        return float(np.mean(per_re_dbm))
    return power_to_db(np.mean(10.0 ** (per_re_dbm / 10.0)))
