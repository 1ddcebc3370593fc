"""Core domain types for the garage.

Holds the static configuration (garage geometry, kinematic timings, billing
rate), the vehicle and ticket records, and the two grids the controller works
against: the slot occupancy matrix and the entry-timer matrix.

All timestamps are simulation time as non-negative integer milliseconds.
Money is carried as Decimal to keep billing exact.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from decimal import Decimal
from enum import Enum

MS_PER_SECOND = 1000
MS_PER_MINUTE = 60_000


class AutoparkError(Exception):
    """Base class for every error raised by this package."""


class InvalidConfigError(AutoparkError):
    """Garage or kinematics configuration violates a constraint."""


class NegativeDurationError(AutoparkError):
    """A stay was billed with an exit time before its entry time."""


def ms_from_s(seconds: float) -> int:
    """Convert seconds to the internal integer-millisecond clock unit."""
    return round(seconds * MS_PER_SECOND)


def s_from_ms(t_ms: int) -> float:
    return t_ms / MS_PER_SECOND


_PHONE_RE = re.compile(r"^\+?\d+$")


def is_valid_phone(number: str) -> bool:
    """A phone number is one or more digits with an optional leading '+'."""
    return bool(_PHONE_RE.match(number))


@dataclass(frozen=True)
class KinematicsConfig:
    """Motion timings and stepper geometry for every powered axis."""

    belt_transit_s: float = 10.0  # one full conveyor run
    platform_load_s: float = 5.0  # platform belt, car on/off the platform
    elevation_per_floor_s: float = 8.0  # vertical travel per floor
    rotation_per_slot_s: float = 3.0  # per slot face of rotation
    gate_actuation_s: float = 2.0  # 90 degree gate swing
    step_angle_main_deg: float = 1.8  # elevation and rotation motors
    step_angle_gate_deg: float = 7.5  # gate motors
    rotation_gear_ratio: float = 3.0  # motor degrees per platform degree

    def validate(self, slots_per_floor: int) -> None:
        for name in (
            "belt_transit_s",
            "platform_load_s",
            "elevation_per_floor_s",
            "rotation_per_slot_s",
            "gate_actuation_s",
        ):
            if getattr(self, name) <= 0:
                raise InvalidConfigError(f"{name} must be > 0")
        if self.step_angle_main_deg <= 0 or self.step_angle_gate_deg <= 0:
            raise InvalidConfigError("step angles must be > 0")
        if self.rotation_gear_ratio < 1:
            raise InvalidConfigError("rotation_gear_ratio must be >= 1")
        if not _divides(90.0, self.step_angle_gate_deg):
            raise InvalidConfigError(
                f"gate step angle {self.step_angle_gate_deg} does not divide 90"
            )
        # The platform ring is gear-driven, so one motor step turns the
        # platform by step_angle_main_deg / rotation_gear_ratio degrees.
        slot_angle = 360.0 / slots_per_floor
        platform_step = self.step_angle_main_deg / self.rotation_gear_ratio
        if not _divides(slot_angle, platform_step):
            raise InvalidConfigError(
                f"platform step {platform_step} deg does not divide the "
                f"{slot_angle} deg slot pitch"
            )


def _divides(angle: float, step: float, tol: float = 1e-9) -> bool:
    ratio = angle / step
    return abs(ratio - round(ratio)) <= tol


@dataclass(frozen=True)
class GarageConfig:
    """Static description of one garage installation."""

    floors: int = 3
    slots_per_floor: int = 6
    max_vehicle_length_mm: int = 5000
    billing_rate_per_minute: Decimal = Decimal("0.05")
    kinematics: KinematicsConfig = field(default_factory=KinematicsConfig)
    bus_voltage_v: float = 12.0

    def validate(self) -> None:
        if self.floors < 1:
            raise InvalidConfigError("floors must be >= 1")
        if self.slots_per_floor < 1:
            raise InvalidConfigError("slots_per_floor must be >= 1")
        if self.max_vehicle_length_mm <= 0:
            raise InvalidConfigError("max_vehicle_length_mm must be > 0")
        if self.billing_rate_per_minute < 0:
            raise InvalidConfigError("billing_rate_per_minute must be >= 0")
        if self.bus_voltage_v <= 0:
            raise InvalidConfigError("bus_voltage_v must be > 0")
        self.kinematics.validate(self.slots_per_floor)

    @property
    def slot_angle_deg(self) -> float:
        return 360.0 / self.slots_per_floor


@dataclass(frozen=True)
class Vehicle:
    """One customer car as seen at the entrance."""

    vehicle_id: str
    length_mm: int
    phone: str

    def __post_init__(self) -> None:
        if not self.vehicle_id:
            raise ValueError("vehicle_id must be non-empty")
        if self.length_mm <= 0:
            raise ValueError("length_mm must be > 0")
        if not is_valid_phone(self.phone):
            raise ValueError(f"invalid phone number: {self.phone!r}")


@dataclass(frozen=True, order=True)
class SlotAddress:
    """Zero-based (floor, slot) position in the garage."""

    floor: int
    slot: int

    def __str__(self) -> str:
        return f"{self.floor}/{self.slot}"


class SlotState(str, Enum):
    VACANT = "vacant"
    RESERVED = "reserved"
    OCCUPIED = "occupied"


class TicketPhase(str, Enum):
    AWAITING_ENTRY = "AwaitingEntry"
    PARKING = "Parking"
    PARKED = "Parked"
    RETRIEVING = "Retrieving"
    AWAITING_PAYMENT = "AwaitingPayment"
    CLOSED = "Closed"


_PHASE_ORDER = [
    TicketPhase.AWAITING_ENTRY,
    TicketPhase.PARKING,
    TicketPhase.PARKED,
    TicketPhase.RETRIEVING,
    TicketPhase.AWAITING_PAYMENT,
    TicketPhase.CLOSED,
]


@dataclass
class ParkingTicket:
    """Lifecycle record for one accepted vehicle."""

    ticket_id: int
    vehicle: Vehicle
    slot: SlotAddress
    entry_ms: int
    phase: TicketPhase = TicketPhase.AWAITING_ENTRY
    exit_ms: int | None = None  # set when the retrieval timer stops
    amount_due: Decimal | None = None

    def advance(self, phase: TicketPhase) -> None:
        """Move to the next lifecycle phase; phases never go backwards."""
        if _PHASE_ORDER.index(phase) <= _PHASE_ORDER.index(self.phase):
            raise ValueError(f"cannot move ticket from {self.phase} to {phase}")
        self.phase = phase

    @property
    def is_active(self) -> bool:
        return self.phase is not TicketPhase.CLOSED


class SlotMatrix:
    """Occupancy grid: every cell is vacant, reserved, or occupied.

    Reserved and occupied cells carry the owning ticket id; a ticket owns at
    most one cell at any time.
    """

    def __init__(self, floors: int, slots_per_floor: int):
        self.floors = floors
        self.slots_per_floor = slots_per_floor
        self._state = [
            [SlotState.VACANT] * slots_per_floor for _ in range(floors)
        ]
        self._ticket = [[None] * slots_per_floor for _ in range(floors)]

    def state_at(self, addr: SlotAddress) -> SlotState:
        return self._state[addr.floor][addr.slot]

    def ticket_at(self, addr: SlotAddress) -> int | None:
        return self._ticket[addr.floor][addr.slot]

    def addresses(self):
        """Yield every address in floor-major scan order."""
        for floor in range(self.floors):
            for slot in range(self.slots_per_floor):
                yield SlotAddress(floor, slot)

    def set_cell(self, addr: SlotAddress, state: SlotState, ticket_id: int | None) -> None:
        if state is SlotState.VACANT and ticket_id is not None:
            raise ValueError("vacant cells carry no ticket")
        if state is not SlotState.VACANT and ticket_id is None:
            raise ValueError(f"{state.value} cells need a ticket id")
        self._state[addr.floor][addr.slot] = state
        self._ticket[addr.floor][addr.slot] = ticket_id

    def counts(self) -> dict[SlotState, int]:
        out = {state: 0 for state in SlotState}
        for row in self._state:
            for state in row:
                out[state] += 1
        return out


class TimerMatrix:
    """Per-slot entry timestamps; a cell is set while its timer is running."""

    def __init__(self, floors: int, slots_per_floor: int):
        self._entry = [[None] * slots_per_floor for _ in range(floors)]

    def start(self, addr: SlotAddress, entry_ms: int) -> None:
        if entry_ms < 0:
            raise ValueError("entry_ms must be >= 0")
        if self._entry[addr.floor][addr.slot] is not None:
            raise ValueError(f"timer already running at {addr}")
        self._entry[addr.floor][addr.slot] = entry_ms

    def stop(self, addr: SlotAddress) -> None:
        self._entry[addr.floor][addr.slot] = None

    def entry_at(self, addr: SlotAddress) -> int | None:
        return self._entry[addr.floor][addr.slot]


@dataclass
class GarageState:
    """Everything that changes as the garage runs: grids, tickets, counters."""

    config: GarageConfig
    slots: SlotMatrix
    timers: TimerMatrix
    tickets: dict[int, ParkingTicket] = field(default_factory=dict)
    next_ticket_id: int = 1
    vehicles_entered: int = 0

    def issue_ticket(self, vehicle: Vehicle, slot: SlotAddress, entry_ms: int) -> ParkingTicket:
        ticket = ParkingTicket(self.next_ticket_id, vehicle, slot, entry_ms)
        self.tickets[ticket.ticket_id] = ticket
        self.next_ticket_id += 1
        self.vehicles_entered += 1
        return ticket

    def phase_counts(self) -> dict[TicketPhase, int]:
        out = {phase: 0 for phase in TicketPhase}
        for ticket in self.tickets.values():
            out[ticket.phase] += 1
        return out


def new_garage(config: GarageConfig) -> GarageState:
    """Build an empty garage after validating the configuration."""
    config.validate()
    return GarageState(
        config=config,
        slots=SlotMatrix(config.floors, config.slots_per_floor),
        timers=TimerMatrix(config.floors, config.slots_per_floor),
    )


def occupancy_count(garage: GarageState) -> tuple[int, int]:
    """Return (occupied, vacant) cell counts; reserved cells are neither."""
    counts = garage.slots.counts()
    return counts[SlotState.OCCUPIED], counts[SlotState.VACANT]


def billed_minutes(entry_ms: int, exit_ms: int) -> int:
    """Whole minutes charged for a stay: every started minute counts."""
    if exit_ms < entry_ms:
        raise NegativeDurationError(f"exit {exit_ms}ms is before entry {entry_ms}ms")
    duration_ms = exit_ms - entry_ms
    return -(-duration_ms // MS_PER_MINUTE)
