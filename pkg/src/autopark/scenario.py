"""Scenario files and the run harness that executes them.

A scenario is a plain-text schedule: optional ``config`` lines followed by
event lines sorted by time. The same parsed form drives batch runs, the
interactive console, and the seeded random corpus used for self-checks.

Line grammar (one record per line, ``#`` starts a comment):

    config floors=3 slots_per_floor=6 billing_rate_per_minute=0.05
    t=5 kind=arrival vehicle=v1 length_mm=4200 phone=+97455512345
    t=120.5 kind=sms_in phone=+97455512345 body=send my car please
    t=300 kind=payment ticket=1
    t=400 kind=irradiance w_per_m2=250
    t=500 kind=fault belt=slot:3
    t=560 kind=fault_cleared

Tokens are space-separated ``key=value`` pairs; a bare token (no ``=``)
continues the previous value, which is how message bodies carry spaces.
Values therefore cannot contain ``=``. Times are seconds and must be
non-decreasing; ``config`` lines must precede all events.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, fields
from decimal import Decimal, InvalidOperation

from .controller import ArrivalRecord, GarageController, check_invariants
from .devices import DeviceFleet, belt_roster, parse_belt_id
from .engine import (
    Arrival,
    BeltFault,
    DeviceDone,
    FaultCleared,
    InboundSms,
    IrradianceChange,
    Payload,
    PaymentConfirmed,
    SimEvent,
    Simulation,
)
from .model import (
    AutoparkError,
    GarageConfig,
    GarageState,
    KinematicsConfig,
    Vehicle,
    new_garage,
    occupancy_count,
)
from .power import BatteryState, PowerSystem
from .report import Aggregates, ReportRow, RunReport
from .sms import SmsGateway, SmsModem, SmsNetwork


class ScenarioParseError(AutoparkError):
    """A scenario line that does not follow the grammar."""

    def __init__(self, line_no: int, reason: str):
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no
        self.reason = reason


class UnsortedEventsError(ScenarioParseError):
    """Event times must be non-decreasing."""


@dataclass(frozen=True)
class SimSettings:
    """Run-level knobs that sit outside the garage geometry."""

    battery_capacity_ah: float = 7.0
    battery_initial_soc: float = 1.0
    irradiance_w_per_m2: float = 1000.0
    sms_delivery_delay_s: float = 1.0


@dataclass(frozen=True)
class ScenarioEvent:
    t_ms: int
    payload: Payload


@dataclass(frozen=True)
class Scenario:
    config: GarageConfig
    settings: SimSettings
    events: tuple[ScenarioEvent, ...]


_GARAGE_KEYS = ("floors", "slots_per_floor", "max_vehicle_length_mm")
_KINEMATIC_KEYS = tuple(f.name for f in fields(KinematicsConfig))
_SETTINGS_KEYS = tuple(f.name for f in fields(SimSettings))

_EVENT_FIELDS = {
    "arrival": ("vehicle", "length_mm", "phone"),
    "sms_in": ("phone", "body"),
    "payment": ("ticket",),
    "irradiance": ("w_per_m2",),
    "fault": ("belt",),
    "fault_cleared": (),
}


def _split_pairs(tokens: list[str], line_no: int) -> dict[str, str]:
    """key=value tokens; bare tokens extend the previous value with a space."""
    pairs: dict[str, str] = {}
    last_key = None
    for token in tokens:
        if "=" in token:
            key, value = token.split("=", 1)
            if key in pairs:
                raise ScenarioParseError(line_no, f"duplicate key {key!r}")
            pairs[key] = value
            last_key = key
        elif last_key is not None:
            pairs[last_key] += " " + token
        else:
            raise ScenarioParseError(line_no, f"stray token {token!r}")
    return pairs


def _number(pairs: dict[str, str], key: str, line_no: int, convert):
    try:
        return convert(pairs[key])
    except (ValueError, InvalidOperation) as exc:
        raise ScenarioParseError(line_no, f"bad value for {key}: {pairs[key]!r}") from exc


def parse_event_line(
    line: str, config: GarageConfig, line_no: int = 1
) -> ScenarioEvent:
    """One ``t=... kind=...`` record, validated against the garage config."""
    pairs = _split_pairs(line.split(), line_no)
    if "t" not in pairs or "kind" not in pairs:
        raise ScenarioParseError(line_no, "event needs t= and kind=")
    kind = pairs.pop("kind")
    t_s = _number(pairs, "t", line_no, float)
    del pairs["t"]
    if t_s < 0:
        raise ScenarioParseError(line_no, "t must be >= 0")
    t_ms = round(t_s * 1000)
    if kind not in _EVENT_FIELDS:
        raise ScenarioParseError(line_no, f"unknown event kind {kind!r}")
    allowed = _EVENT_FIELDS[kind]
    for key in pairs:
        if key not in allowed:
            raise ScenarioParseError(line_no, f"unknown field {key!r} for kind={kind}")
    for key in allowed:
        if key not in pairs:
            raise ScenarioParseError(line_no, f"kind={kind} needs {key}=")

    if kind == "arrival":
        length_mm = _number(pairs, "length_mm", line_no, int)
        try:
            vehicle = Vehicle(pairs["vehicle"], length_mm, pairs["phone"])
        except ValueError as exc:
            raise ScenarioParseError(line_no, str(exc)) from exc
        return ScenarioEvent(t_ms, Arrival(vehicle))
    if kind == "sms_in":
        return ScenarioEvent(t_ms, InboundSms(pairs["phone"], pairs["body"]))
    if kind == "payment":
        return ScenarioEvent(t_ms, PaymentConfirmed(_number(pairs, "ticket", line_no, int)))
    if kind == "irradiance":
        w = _number(pairs, "w_per_m2", line_no, float)
        if not 0 <= w <= 1000:
            raise ScenarioParseError(line_no, f"w_per_m2 out of range [0, 1000]: {w:g}")
        return ScenarioEvent(t_ms, IrradianceChange(w))
    if kind == "fault":
        try:
            belt = parse_belt_id(pairs["belt"])
        except ValueError as exc:
            raise ScenarioParseError(line_no, str(exc)) from exc
        if belt not in belt_roster(config.slots_per_floor):
            raise ScenarioParseError(line_no, f"no such belt: {pairs['belt']}")
        return ScenarioEvent(t_ms, BeltFault(str(belt)))
    return ScenarioEvent(t_ms, FaultCleared())


def _build_config(
    pairs: dict[str, str], line_no: int
) -> tuple[GarageConfig, SimSettings]:
    garage: dict = {}
    kin: dict = {}
    settings: dict = {}
    for key, raw in pairs.items():
        if key in _GARAGE_KEYS:
            garage[key] = _number(pairs, key, line_no, int)
        elif key == "billing_rate_per_minute":
            garage[key] = _number(pairs, key, line_no, Decimal)
        elif key == "bus_voltage_v":
            garage[key] = _number(pairs, key, line_no, float)
        elif key in _KINEMATIC_KEYS:
            kin[key] = _number(pairs, key, line_no, float)
        elif key in _SETTINGS_KEYS:
            settings[key] = _number(pairs, key, line_no, float)
        else:
            raise ScenarioParseError(line_no, f"unknown config key {key!r}")
    config = GarageConfig(**garage, kinematics=KinematicsConfig(**kin))
    return config, SimSettings(**settings)


def parse_scenario(text: str) -> Scenario:
    config_pairs: dict[str, str] = {}
    config_line_no = 0
    config: GarageConfig | None = None
    settings = SimSettings()
    events: list[ScenarioEvent] = []
    last_ms = 0
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("config"):
            if events:
                raise ScenarioParseError(line_no, "config lines must precede events")
            config_pairs.update(_split_pairs(line.split()[1:], line_no))
            config_line_no = line_no
            config = None
            continue
        if config is None:
            config, settings = _build_config(config_pairs, config_line_no or line_no)
            config.validate()
        event = parse_event_line(line, config, line_no)
        if event.t_ms < last_ms:
            raise UnsortedEventsError(
                line_no, f"t went backwards ({event.t_ms}ms after {last_ms}ms)"
            )
        last_ms = event.t_ms
        events.append(event)
    if config is None:
        config, settings = _build_config(config_pairs, config_line_no or 1)
        config.validate()
    return Scenario(config, settings, tuple(events))


def _format_t(t_ms: int) -> str:
    text = f"{t_ms / 1000:.3f}".rstrip("0").rstrip(".")
    return text or "0"


def render_event(event: ScenarioEvent) -> str:
    p = event.payload
    t = _format_t(event.t_ms)
    if isinstance(p, Arrival):
        v = p.vehicle
        return f"t={t} kind=arrival vehicle={v.vehicle_id} length_mm={v.length_mm} phone={v.phone}"
    if isinstance(p, InboundSms):
        return f"t={t} kind=sms_in phone={p.phone} body={p.body}"
    if isinstance(p, PaymentConfirmed):
        return f"t={t} kind=payment ticket={p.ticket_id}"
    if isinstance(p, IrradianceChange):
        return f"t={t} kind=irradiance w_per_m2={p.w_per_m2!r}"
    if isinstance(p, BeltFault):
        return f"t={t} kind=fault belt={p.belt_id}"
    if isinstance(p, FaultCleared):
        return f"t={t} kind=fault_cleared"
    raise AssertionError(f"unrenderable payload {p!r}")


def render_scenario(scenario: Scenario) -> str:
    cfg = scenario.config
    kin = cfg.kinematics
    lines = [
        "config "
        + " ".join(
            [
                f"floors={cfg.floors}",
                f"slots_per_floor={cfg.slots_per_floor}",
                f"max_vehicle_length_mm={cfg.max_vehicle_length_mm}",
                f"billing_rate_per_minute={cfg.billing_rate_per_minute}",
                f"bus_voltage_v={cfg.bus_voltage_v!r}",
            ]
            + [f"{name}={getattr(kin, name)!r}" for name in _KINEMATIC_KEYS]
        ),
        "config "
        + " ".join(
            f"{name}={getattr(scenario.settings, name)!r}" for name in _SETTINGS_KEYS
        ),
    ]
    lines.extend(render_event(event) for event in scenario.events)
    return "\n".join(lines) + "\n"


class GarageSession:
    """Fully wired garage: engine, devices, controller, modem, and power.

    Used by the batch runner and the interactive console alike. Battery
    integration rides the engine's advance hook, so energy is accounted
    piecewise-constant between event dispatches, and the invariant scan
    runs on every event boundary unless check=False.
    """

    def __init__(
        self,
        config: GarageConfig | None = None,
        settings: SimSettings | None = None,
        check: bool = True,
    ):
        self.config = config if config is not None else GarageConfig()
        self.settings = settings if settings is not None else SimSettings()
        self.garage: GarageState = new_garage(self.config)
        self.sim = Simulation()
        self.fleet = DeviceFleet(self.config, self._schedule_done)
        self.network = SmsNetwork(delivery_delay_s=self.settings.sms_delivery_delay_s)
        self.gateway = SmsGateway(SmsModem(), self.network)
        self.gateway.initialize()
        battery = BatteryState(
            capacity_ah=self.settings.battery_capacity_ah,
            soc=self.settings.battery_initial_soc,
            bus_voltage_v=self.config.bus_voltage_v,
        )
        self.power = PowerSystem(battery)
        self.power.set_irradiance(self.settings.irradiance_w_per_m2)
        self.controller = GarageController(
            self.garage, self.fleet, self.gateway, trace=self.sim.note
        )
        self.occupancy_peak = 0
        self.sim.handler = self._handle
        self.sim.advance = self._advance
        self.sim.check = self._check if check else None

    # -- engine hooks -------------------------------------------------------

    def _schedule_done(self, at_ms: int, device_id: str, action_id: int) -> None:
        self.sim.schedule(at_ms, DeviceDone(device_id, action_id))

    def _advance(self, dt_ms: int) -> None:
        self.power.advance(self.fleet.relays.total_load_w(), dt_ms / 1000)

    def _check(self) -> None:
        check_invariants(self.controller)

    def _handle(self, event: SimEvent) -> None:
        p = event.payload
        t = event.at_ms
        if isinstance(p, Arrival):
            self.controller.handle_arrival(p.vehicle, t)
        elif isinstance(p, InboundSms):
            self.controller.on_inbound_sms(p.phone, p.body, t)
        elif isinstance(p, PaymentConfirmed):
            self.controller.handle_payment(p.ticket_id, t)
        elif isinstance(p, DeviceDone):
            self.controller.on_device_done(p.device_id, p.action_id, t)
        elif isinstance(p, IrradianceChange):
            self.power.set_irradiance(p.w_per_m2)
        elif isinstance(p, BeltFault):
            self.controller.on_fault(parse_belt_id(p.belt_id), t)
        elif isinstance(p, FaultCleared):
            self.controller.on_fault_cleared(t)
        else:
            raise AssertionError(f"unhandled payload {p!r}")
        occupied, _ = occupancy_count(self.garage)
        self.occupancy_peak = max(self.occupancy_peak, occupied)

    # -- driving ------------------------------------------------------------

    def schedule(self, event: ScenarioEvent) -> None:
        self.sim.schedule(event.t_ms, event.payload)

    def run_until(self, t_ms: int) -> None:
        self.sim.run_until(t_ms)

    def run_until_idle(self) -> None:
        self.sim.run_until_idle()

    def build_report(self) -> RunReport:
        rows = [self._row_for(rec) for rec in self.controller.arrivals]
        parking = [r.parking_latency_ms for r in rows if r.parking_latency_ms is not None]
        retrieval = [
            r.retrieval_latency_ms for r in rows if r.retrieval_latency_ms is not None
        ]
        meters = self.power.meters
        aggregates = Aggregates(
            max_parking_latency_ms=max(parking) if parking else None,
            max_retrieval_latency_ms=max(retrieval) if retrieval else None,
            occupancy_peak=self.occupancy_peak,
            pv_wh=meters.pv_wh,
            grid_wh=meters.grid_wh,
            load_wh=meters.load_wh,
            min_soc=meters.min_soc,
            max_concurrent_motors=self.fleet.relays.max_concurrent,
        )
        return RunReport(tuple(rows), aggregates)

    def _row_for(self, rec: ArrivalRecord) -> ReportRow:
        if not rec.accepted:
            return ReportRow(
                vehicle_id=rec.vehicle.vehicle_id,
                status=f"rejected:{rec.reason}",
                entry_ms=rec.at_ms,
            )
        ticket = self.garage.tickets[rec.ticket_id]
        hist = self.controller.history[rec.ticket_id]
        parking_latency = (
            hist.parked_ms - ticket.entry_ms if hist.parked_ms is not None else None
        )
        retrieval_latency = (
            hist.ready_ms - hist.request_ms
            if hist.ready_ms is not None and hist.request_ms is not None
            else None
        )
        return ReportRow(
            vehicle_id=rec.vehicle.vehicle_id,
            status=ticket.phase.value,
            entry_ms=ticket.entry_ms,
            parked_ms=hist.parked_ms,
            request_ms=hist.request_ms,
            ready_ms=hist.ready_ms,
            exit_ms=hist.closed_ms,
            parking_latency_ms=parking_latency,
            retrieval_latency_ms=retrieval_latency,
            amount=ticket.amount_due,
        )


@dataclass(frozen=True)
class RunResult:
    report: RunReport
    trace: tuple[str, ...]
    session: GarageSession


def run_scenario(scenario: Scenario, check: bool = True) -> RunResult:
    session = GarageSession(scenario.config, scenario.settings, check=check)
    for event in scenario.events:
        session.schedule(event)
    session.run_until_idle()
    return RunResult(session.build_report(), tuple(session.sim.trace), session)


def random_scenario(seed: int, max_vehicles: int = 12) -> Scenario:
    """Seeded scenario generator for the self-check corpus.

    Payments are timed from a first pass without them: the dry run reveals
    when each ticket becomes payable, and the payment events are merged in
    for the final schedule. The result is a plain scenario that renders and
    parses like any hand-written one.
    """
    rng = random.Random(seed)
    config = GarageConfig()
    settings = SimSettings(
        battery_initial_soc=rng.choice([1.0, 0.6, 0.2]),
        irradiance_w_per_m2=rng.choice([0.0, 250.0, 1000.0]),
    )
    count = rng.randint(1, max_vehicles)
    window_s = rng.uniform(30.0, 600.0)

    events: list[ScenarioEvent] = []
    phones: list[str] = []
    for i in range(count):
        phone = f"+97455{seed % 1000:03d}{i:03d}"
        if phones and rng.random() < 0.1:
            phone = rng.choice(phones)
        phones.append(phone)
        if rng.random() < 0.15:
            length = rng.randint(
                config.max_vehicle_length_mm + 1, 2 * config.max_vehicle_length_mm
            )
        else:
            length = rng.randint(2000, config.max_vehicle_length_mm)
        t_ms = round(rng.uniform(0.0, window_s) * 1000)
        events.append(ScenarioEvent(t_ms, Arrival(Vehicle(f"v{i + 1}", length, phone))))
        if rng.random() < 0.8:
            t_req = t_ms + round(rng.uniform(60.0, 1800.0) * 1000)
            events.append(ScenarioEvent(t_req, InboundSms(phone, "retrieve")))

    if rng.random() < 0.25:
        belt = rng.choice(belt_roster(config.slots_per_floor))
        t_fault = round(rng.uniform(0.0, window_s) * 1000)
        events.append(ScenarioEvent(t_fault, BeltFault(str(belt))))
        t_clear = t_fault + round(rng.uniform(5.0, 120.0) * 1000)
        events.append(ScenarioEvent(t_clear, FaultCleared()))
    for _ in range(rng.randint(0, 2)):
        t_irr = round(rng.uniform(0.0, window_s * 2) * 1000)
        events.append(
            ScenarioEvent(t_irr, IrradianceChange(round(rng.uniform(0.0, 1000.0), 1)))
        )

    events.sort(key=lambda e: e.t_ms)
    dry = run_scenario(Scenario(config, settings, tuple(events)))
    payments: list[ScenarioEvent] = []
    for rec in dry.session.controller.arrivals:
        if rec.ticket_id is None:
            continue
        hist = dry.session.controller.history[rec.ticket_id]
        if hist.ready_ms is not None and rng.random() < 0.85:
            t_pay = hist.ready_ms + round(rng.uniform(30.0, 900.0) * 1000)
            payments.append(ScenarioEvent(t_pay, PaymentConfirmed(rec.ticket_id)))
    merged = sorted(events + payments, key=lambda e: e.t_ms)
    return Scenario(config, settings, tuple(merged))
