"""Lockstep emulation of a near-RT RIC with two xApps.

The pieces are a tiny ordered pub/sub bus, an E2-node stand-in (``RanNode``)
that owns the channel and the RIS, a channel-monitoring xApp that publishes
one KPM report per UE per control step, and a RIS-optimization xApp that runs
the greedy search through the bus. Time is simulated: one control step is
``step_ms`` milliseconds of logical time, however long it takes to compute.
"""

from __future__ import annotations

import json
import socket
from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import channel as chm
from .channel import ChannelRealization, MeasurementConfig, RisConfiguration
from .optimizer import OptimizerSettings, greedy_optimize
from .policy import (CQI_SPECTRAL_EFFICIENCY, CQI_THRESHOLDS_DB, THROUGHPUT_FLOOR_BPS,
                     UeServiceState, WeightPolicy, cqi_from_rsrp, tbs_proxy,
                     update_throughput_ewma)

KPM_TOPIC = "kpm"
CONTROL_TOPIC = "ris-ctl"
ALL_ELEMENTS = "ALL"

WIRE_FIELDS = ("topic", "seq", "sim_time_ms", "ue_id", "ss_rsrp_dbm", "cqi",
               "dl_throughput_bps", "tbs_bits", "config_epoch", "element_index", "state")


class BusError(RuntimeError):
    pass


class ProtocolError(RuntimeError):
    pass


@dataclass(frozen=True)
class KpmReport:
    sim_time_ms: int
    ue_id: int
    ss_rsrp_dbm: float
    cqi: int
    dl_throughput_bps: float
    tbs_bits: int
    config_epoch: int

    def service_state(self) -> UeServiceState:
        return UeServiceState(cqi=self.cqi, tbs_bits=self.tbs_bits,
                              throughput_ewma_bps=self.dl_throughput_bps,
                              last_rsrp_dbm=self.ss_rsrp_dbm)


@dataclass(frozen=True)
class RisControlCommand:
    """Set one element (``element_index``) or all of them (``ALL``)."""

    sim_time_ms: int
    config_epoch: int
    element_index: object
    state: object


@dataclass(frozen=True)
class BusMessage:
    topic: str
    payload: object
    seq: int


def encode_message(msg: BusMessage) -> str:
    """One newline-terminated JSON record with the wire field names."""
    record = dict.fromkeys(WIRE_FIELDS)
    record["topic"], record["seq"] = msg.topic, msg.seq
    p = msg.payload
    record["sim_time_ms"] = p.sim_time_ms
    record["config_epoch"] = p.config_epoch
    if isinstance(p, KpmReport):
        record.update(ue_id=p.ue_id, ss_rsrp_dbm=p.ss_rsrp_dbm, cqi=p.cqi,
                      dl_throughput_bps=p.dl_throughput_bps, tbs_bits=p.tbs_bits)
    elif isinstance(p, RisControlCommand):
        state = p.state
        if isinstance(state, np.ndarray):
            state = state.tolist()
        record.update(element_index=p.element_index, state=state)
    else:
        raise BusError(f"cannot encode payload of type {type(p).__name__}")
    return json.dumps(record, separators=(",", ":")) + "\n"


def decode_message(line: str) -> BusMessage:
    record = json.loads(line)
    missing = set(WIRE_FIELDS) - record.keys()
    if missing:
        raise BusError(f"wire record missing fields {sorted(missing)}")
    if record["ue_id"] is not None:
        payload = KpmReport(record["sim_time_ms"], record["ue_id"], record["ss_rsrp_dbm"],
                            record["cqi"], record["dl_throughput_bps"], record["tbs_bits"],
                            record["config_epoch"])
    else:
        state = record["state"]
        if isinstance(state, list):
            state = np.asarray(state, dtype=np.int64)
        payload = RisControlCommand(record["sim_time_ms"], record["config_epoch"],
                                    record["element_index"], state)
    return BusMessage(record["topic"], payload, record["seq"])


class _SocketLoop:
    """Round-trips every message through a local socket pair as a wire record."""

    def __init__(self):
        self._tx, self._rx = socket.socketpair()
        self._reader = self._rx.makefile("r", encoding="utf-8", newline="\n")

    def relay(self, msg: BusMessage) -> BusMessage:
        self._tx.sendall(encode_message(msg).encode("utf-8"))
        return decode_message(self._reader.readline())

    def close(self):
        self._reader.close()
        self._tx.close()
        self._rx.close()


class Subscription:
    """Per-subscriber FIFO of delivered messages."""

    def __init__(self, topic: str):
        self.topic = topic
        self._queue = deque()

    def _deliver(self, msg):
        self._queue.append(msg)

    def __len__(self):
        return len(self._queue)

    def __iter__(self):
        return self

    def __next__(self) -> BusMessage:
        if not self._queue:
            raise StopIteration
        return self._queue.popleft()

    def drain(self) -> list:
        out = list(self._queue)
        self._queue.clear()
        return out


class MessageBus:
    """Ordered in-process pub/sub with per-topic sequence numbers.

    ``transport="socket"`` pushes each message through a local socket as a
    newline-delimited record before delivery; observable behavior is the same.
    """

    def __init__(self, topics: Sequence[str] = (KPM_TOPIC, CONTROL_TOPIC),
                 transport: str = "inproc"):
        if transport not in ("inproc", "socket"):
            raise BusError(f"unknown transport {transport!r}")
        self._subs = {}
        self._seq = {}
        self._socket = _SocketLoop() if transport == "socket" else None
        self.transport = transport
        for topic in topics:
            self.register(topic)

    def register(self, topic: str):
        self._subs.setdefault(topic, [])
        self._seq.setdefault(topic, 0)

    def _check(self, topic):
        if topic not in self._subs:
            raise BusError(f"unknown topic {topic!r}")

    def subscribe(self, topic: str) -> Subscription:
        self._check(topic)
        sub = Subscription(topic)
        self._subs[topic].append(sub)
        return sub

    def publish(self, topic: str, payload) -> int:
        self._check(topic)
        self._seq[topic] += 1
        msg = BusMessage(topic, payload, self._seq[topic])
        if self._socket is not None:
            msg = self._socket.relay(msg)
        for sub in self._subs[topic]:
            sub._deliver(msg)
        return msg.seq

    def close(self):
        if self._socket is not None:
            self._socket.close()
            self._socket = None


class SimClock:
    def __init__(self, step_ms: int = 10, start_ms: int = 0):
        if step_ms < 1:
            raise ValueError("step_ms must be >= 1")
        self.step_ms = step_ms
        self.now_ms = start_ms

    def advance(self, steps: int = 1) -> int:
        if steps < 0:
            raise ValueError("cannot move the clock backwards")
        self.now_ms += steps * self.step_ms
        return self.now_ms


@dataclass
class ServiceModel:
    """How the node turns a measured RSRP into CQI, TBS and throughput.

    ``link_adaptation="cqi"`` sizes every transport block from the reported
    CQI and serves it in full each slot. ``"fixed"`` grants every UE the same
    transport block (sized by ``fixed_cqi``) and delivers it with probability
    ``1 / (1 + exp(-(snr - snr_required) / bler_slope_db))``, where
    ``snr_required`` is the CQI threshold of ``fixed_cqi``.
    """

    noise_floor_dbm: float = -120.0
    n_prb: int = 106
    slot_ms: float = 1.0
    ewma_beta: float = 0.1
    cqi_thresholds_db: Sequence[float] = CQI_THRESHOLDS_DB
    cqi_spectral_efficiency: Sequence[float] = CQI_SPECTRAL_EFFICIENCY
    link_adaptation: str = "fixed"
    fixed_cqi: int = 12
    bler_slope_db: float = 1.0

    def __post_init__(self):
        if self.link_adaptation not in ("cqi", "fixed"):
            raise chm.ConfigurationError(f"unknown link_adaptation {self.link_adaptation!r}")
        if len(self.cqi_thresholds_db) != 15 or len(self.cqi_spectral_efficiency) != 15:
            raise chm.ConfigurationError("CQI tables need exactly 15 entries")

    def cqi(self, rsrp_dbm: float) -> int:
        return cqi_from_rsrp(rsrp_dbm, self.noise_floor_dbm, self.cqi_thresholds_db)

    def tbs(self, cqi: int) -> int:
        if self.link_adaptation == "fixed":
            cqi = self.fixed_cqi
        return tbs_proxy(cqi, self.n_prb, self.cqi_spectral_efficiency)

    def served_bps(self, tbs_bits: int, rsrp_dbm: float) -> float:
        rate = tbs_bits / (self.slot_ms * 1e-3)
        if self.link_adaptation == "cqi":
            return rate
        margin = rsrp_dbm - self.noise_floor_dbm - self.cqi_thresholds_db[self.fixed_cqi - 1]
        return rate / (1.0 + np.exp(-margin / self.bler_slope_db))


class RanNode:
    """E2 node stand-in: holds the channel, applies RIS commands, measures UEs."""

    def __init__(self, ch: ChannelRealization, config: RisConfiguration,
                 meas: MeasurementConfig, service: ServiceModel | None = None,
                 rng: np.random.Generator | None = None):
        if config.n_elements != ch.n_elements:
            raise chm.DimensionError("RIS configuration does not match the channel")
        self.channel = ch
        self.config = config
        self.epoch = 0
        self.meas = meas
        self.service = service or ServiceModel()
        self.rng = rng if rng is not None else np.random.default_rng()
        self._ue_state: list = [None] * ch.n_ue
        self.commands_applied = 0

    def attach(self, bus: MessageBus):
        self._ctl = bus.subscribe(CONTROL_TOPIC)
        return self

    def apply(self, cmd: RisControlCommand):
        if cmd.config_epoch <= self.epoch:
            raise ProtocolError(
                f"command epoch {cmd.config_epoch} does not advance current epoch {self.epoch}")
        if cmd.element_index == ALL_ELEMENTS:
            self.config = self.config.with_states(cmd.state)
        else:
            self.config = self.config.with_element(int(cmd.element_index), int(cmd.state))
        self.epoch = cmd.config_epoch
        self.commands_applied += 1

    def process_commands(self):
        for msg in self._ctl:
            self.apply(msg.payload)

    def measure(self, sim_time_ms: int) -> list:
        """One KPM report per UE under the configuration currently in force."""
        reports = []
        for ue in range(self.channel.n_ue):
            rsrp = chm.measure_ss_rsrp(self.channel, self.config, ue, self.meas, self.rng)
            cqi = self.service.cqi(rsrp)
            tbs = self.service.tbs(cqi)
            served = self.service.served_bps(tbs, rsrp)
            prev = self._ue_state[ue]
            if prev is None:
                state = UeServiceState(cqi, tbs, max(served, THROUGHPUT_FLOOR_BPS), rsrp)
            else:
                state = update_throughput_ewma(
                    UeServiceState(cqi, tbs, prev.throughput_ewma_bps, rsrp),
                    served, self.service.ewma_beta)
            self._ue_state[ue] = state
            reports.append(KpmReport(sim_time_ms, ue, rsrp, cqi,
                                     state.throughput_ewma_bps, tbs, self.epoch))
        return reports


class ChannelMonitorXApp:
    """Publishes the node's per-UE KPM reports every control step."""

    def __init__(self, bus: MessageBus, node: RanNode):
        self.bus = bus
        self.node = node
        self.reports_sent = 0

    def step(self, clock: SimClock):
        for report in self.node.measure(clock.now_ms):
            self.bus.publish(KPM_TOPIC, report)
            self.reports_sent += 1


class LockstepLoop:
    """Single-threaded scheduler: node applies commands, CM reports, clock ticks.

    Reports produced during a step are stamped with the step's start time.
    """

    def __init__(self, bus: MessageBus, node: RanNode, cm: ChannelMonitorXApp,
                 clock: SimClock):
        self.bus, self.node, self.cm, self.clock = bus, node, cm, clock
        self.steps = 0

    def step(self):
        self.node.process_commands()
        self.cm.step(self.clock)
        self.clock.advance()
        self.steps += 1


class BusEvaluator:
    """Optimizer evaluator that measures through the RIC bus.

    Each call publishes the control command(s) that turn the last commanded
    configuration into the requested one, runs one lockstep control step and
    returns the report set carrying the new epoch.
    """

    def __init__(self, bus: MessageBus, loop: LockstepLoop, n_ue: int,
                 timeout_steps: int = 1):
        self.bus = bus
        self.loop = loop
        self.n_ue = n_ue
        self.timeout_steps = timeout_steps
        self._kpm = bus.subscribe(KPM_TOPIC)
        self.epoch = loop.node.epoch
        self.commanded = None
        self.commands_sent = 0
        self.epoch_violations = 0
        self.consumed: list = []

    def _send(self, element_index, state):
        self.epoch += 1
        self.bus.publish(CONTROL_TOPIC, RisControlCommand(
            self.loop.clock.now_ms, self.epoch, element_index, state))
        self.commands_sent += 1

    def _command(self, cfg: RisConfiguration):
        if self.commanded is None:
            self._send(ALL_ELEMENTS, cfg.states.copy())
        else:
            changed = np.flatnonzero(cfg.states != self.commanded.states)
            if changed.size == 1:
                self._send(int(changed[0]), int(cfg.states[changed[0]]))
            else:
                # Unchanged configurations still get a fresh epoch to measure under.
                self._send(ALL_ELEMENTS, cfg.states.copy())
        self.commanded = cfg

    def revert(self, cfg: RisConfiguration):
        """Restore a known configuration without taking a measurement."""
        self._command(cfg)

    def __call__(self, cfg: RisConfiguration):
        self._command(cfg)
        wanted = self.epoch
        reports = {}
        for _ in range(self.timeout_steps):
            self.loop.step()
            for msg in self._kpm.drain():
                rep = msg.payload
                if rep.config_epoch > wanted:
                    self.epoch_violations += 1
                if rep.config_epoch == wanted:
                    reports[rep.ue_id] = rep
            if len(reports) == self.n_ue:
                break
        if len(reports) != self.n_ue:
            raise ProtocolError(
                f"missing KPM reports for epoch {wanted}: got UEs {sorted(reports)} "
                f"of {self.n_ue} after {self.timeout_steps} step(s)")
        ordered = [reports[ue] for ue in range(self.n_ue)]
        self.consumed.extend(ordered)
        return [r.service_state() for r in ordered]


@dataclass
class RoResult:
    config: RisConfiguration
    trace: object
    elapsed_ms: int
    commands_sent: int
    reports_consumed: list = field(default_factory=list)
    epoch_violations: int = 0


class RisOptimizationXApp:
    """Runs the greedy search with measurements taken over the bus."""

    def __init__(self, bus: MessageBus, loop: LockstepLoop, timeout_steps: int = 1):
        self.bus = bus
        self.loop = loop
        self.timeout_steps = timeout_steps

    def run(self, policy: WeightPolicy, settings: OptimizerSettings) -> RoResult:
        node = self.loop.node
        evaluator = BusEvaluator(self.bus, self.loop, node.channel.n_ue, self.timeout_steps)
        start_ms = self.loop.clock.now_ms
        cfg = node.config
        final, trace = greedy_optimize(
            evaluator, policy, settings, cfg.n_elements, grid=(cfg.n_x, cfg.n_y),
            amplitude=cfg.amplitude, polarization=cfg.polarization)
        # A trailing reversion has been published but not yet applied; it takes
        # effect without a measurement step, so the clock does not move.
        node.process_commands()
        # Last report set was stamped at the start of the last step.
        elapsed = self.loop.clock.now_ms - self.loop.clock.step_ms - start_ms
        return RoResult(final, trace, elapsed, evaluator.commands_sent,
                        evaluator.consumed, evaluator.epoch_violations)


def ro_xapp_run(node: RanNode, policy: WeightPolicy, settings: OptimizerSettings,
                transport: str = "inproc", timeout_steps: int = 1) -> RoResult:
    """Wire a bus, clock, CM xApp and RO xApp around ``node`` and run one optimization."""
    bus = MessageBus(transport=transport)
    try:
        node.attach(bus)
        clock = SimClock(settings.step_ms)
        loop = LockstepLoop(bus, node, ChannelMonitorXApp(bus, node), clock)
        return RisOptimizationXApp(bus, loop, timeout_steps).run(policy, settings)
    finally:
        bus.close()


class DirectEvaluator:
    """Evaluator that bypasses the bus: apply the configuration, measure once."""

    def __init__(self, node: RanNode):
        self.node = node
        self.calls = 0

    def __call__(self, cfg: RisConfiguration):
        self.node.config = cfg
        self.node.epoch += 1
        self.calls += 1
        return [r.service_state() for r in self.node.measure(self.calls)]
