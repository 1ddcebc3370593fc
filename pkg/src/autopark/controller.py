"""Garage controller: the decision logic over the simulated hardware.

Arrivals, retrieval requests, payments, and device completions all funnel
through here. Each accepted vehicle gets a step program (a fixed sequence of
gate, belt, and platform motions); programs compete for three scarce things:
the entrance/exit bays, the single platform, and the two-motor relay budget.
Contention is resolved by a FIFO wait queue. A belt fault halts the issuing
of new motions garage-wide until the fault is cleared; motions already in
flight run to completion.

Billing charges every started minute between the entrance acceptance and the
retrieval request, both captured on the millisecond clock.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from enum import Enum
from typing import Callable

from .devices import (
    EXIT_BELT,
    ENTRANCE_BELT,
    PLATFORM_BELT,
    Action,
    BeltId,
    DeviceFleet,
    parse_belt_id,
    read_length_sensors,
)
from .model import (
    AutoparkError,
    GarageState,
    ParkingTicket,
    SlotAddress,
    SlotMatrix,
    SlotState,
    TicketPhase,
    Vehicle,
    billed_minutes,
)
from .sms import SmsGateway, compose_message


class NoVacancyError(AutoparkError):
    """Every slot is reserved or occupied."""


class UnknownActionError(AutoparkError):
    """A completion arrived for an action the controller is not tracking."""


class InvariantViolationError(AutoparkError):
    """A structural invariant of the garage state failed."""


class ControllerMode(str, Enum):
    NORMAL = "Normal"
    HALTED = "Halted"


class StepKind(str, Enum):
    OPEN_GATE = "open_gate"
    CLOSE_GATE = "close_gate"
    CONVEY = "convey"
    LOAD_PLATFORM = "load_platform"
    ELEVATE = "elevate"
    ROTATE = "rotate"
    TRANSFER_TO_SLOT = "transfer_to_slot"
    TRANSFER_FROM_SLOT = "transfer_from_slot"


@dataclass(frozen=True)
class Step:
    """One motion in a program plus the long-held locks it runs under."""

    kind: StepKind
    gate: str | None = None
    belt: BeltId | None = None
    target: int | None = None  # floor or slot index
    tag: str | None = None  # direction of the car over the belt
    bay: str | None = None  # entrance/exit bay lock held during this step
    platform: bool = False  # platform lock held during this step


@dataclass
class Program:
    """A ticket's remaining motion sequence and its lock bookkeeping."""

    label: str  # parking | retrieval | exit | homing
    steps: list[Step]
    ticket_id: int | None = None
    vehicle_id: str | None = None
    idx: int = 0
    requested_idx: int = -1

    def __post_init__(self) -> None:
        bay_steps = [i for i, s in enumerate(self.steps) if s.bay]
        platform_steps = [i for i, s in enumerate(self.steps) if s.platform]
        self.bay_name = self.steps[bay_steps[0]].bay if bay_steps else None
        self.bay_last = bay_steps[-1] if bay_steps else -1
        self.platform_last = platform_steps[-1] if platform_steps else -1

    @property
    def current(self) -> Step:
        return self.steps[self.idx]

    @property
    def done(self) -> bool:
        return self.idx >= len(self.steps)

    @property
    def ticket_label(self) -> str:
        return "-" if self.ticket_id is None else str(self.ticket_id)


@dataclass(frozen=True)
class ArrivalResult:
    accepted: bool
    ticket_id: int | None = None
    reason: str | None = None  # TooLong | NoVacancy | DuplicatePhone | Halted


@dataclass(frozen=True)
class RetrievalResult:
    status: str  # started | unknown_phone | already_retrieving | halted
    ticket_id: int | None = None


@dataclass(frozen=True)
class PaymentResult:
    status: str  # ok | wrong_phase | unknown_ticket
    ticket_id: int | None = None


@dataclass
class TicketHistory:
    """Millisecond milestones used by run reports."""

    parked_ms: int | None = None
    request_ms: int | None = None
    ready_ms: int | None = None
    closed_ms: int | None = None


@dataclass(frozen=True)
class ArrivalRecord:
    at_ms: int
    vehicle: Vehicle
    accepted: bool
    ticket_id: int | None
    reason: str | None


def allocate_slot(slots: SlotMatrix, ticket_id: int) -> SlotAddress:
    """Reserve the first vacant cell scanning floors bottom-up, slots in order."""
    for addr in slots.addresses():
        if slots.state_at(addr) is SlotState.VACANT:
            slots.set_cell(addr, SlotState.RESERVED, ticket_id)
            return addr
    raise NoVacancyError("no vacant slot")


def compute_bill(entry_ms: int, exit_ms: int, rate_per_minute: Decimal) -> Decimal:
    """Charge for every started minute; a zero-length stay costs nothing."""
    minutes = billed_minutes(entry_ms, exit_ms)
    return (rate_per_minute * minutes).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP)


def _slot_belt(face: int) -> BeltId:
    return BeltId("slot", face)


def _parking_steps(slot: SlotAddress) -> list[Step]:
    return [
        Step(StepKind.OPEN_GATE, gate="entrance", bay="entrance"),
        Step(StepKind.CONVEY, belt=ENTRANCE_BELT, tag="enter", bay="entrance"),
        Step(StepKind.CLOSE_GATE, gate="entrance", bay="entrance"),
        Step(StepKind.LOAD_PLATFORM, tag="board", platform=True),
        Step(StepKind.ELEVATE, target=slot.floor, platform=True),
        Step(StepKind.ROTATE, target=slot.slot, platform=True),
        Step(StepKind.TRANSFER_TO_SLOT, belt=_slot_belt(slot.slot), tag="store", platform=True),
    ]


def _retrieval_steps(slot: SlotAddress) -> list[Step]:
    return [
        Step(StepKind.ELEVATE, target=slot.floor, platform=True),
        Step(StepKind.ROTATE, target=slot.slot, platform=True),
        Step(StepKind.TRANSFER_FROM_SLOT, belt=_slot_belt(slot.slot), tag="fetch", platform=True),
        Step(StepKind.ELEVATE, target=0, platform=True),
        Step(StepKind.ROTATE, target=0, platform=True),
        Step(StepKind.LOAD_PLATFORM, tag="deposit", platform=True),
        Step(StepKind.CONVEY, belt=EXIT_BELT, tag="stage"),
    ]


def _exit_steps() -> list[Step]:
    return [
        Step(StepKind.OPEN_GATE, gate="exit", bay="exit"),
        Step(StepKind.CONVEY, belt=EXIT_BELT, tag="depart", bay="exit"),
        Step(StepKind.CLOSE_GATE, gate="exit", bay="exit"),
    ]


def _homing_steps() -> list[Step]:
    return [
        Step(StepKind.ELEVATE, target=0, platform=True),
        Step(StepKind.ROTATE, target=0, platform=True),
    ]


class GarageController:
    """Single-threaded controller reacting to simulation events."""

    def __init__(
        self,
        garage: GarageState,
        fleet: DeviceFleet,
        gateway: SmsGateway,
        trace: Callable[[str], None] | None = None,
    ):
        self.garage = garage
        self.fleet = fleet
        self.gateway = gateway
        self.mode = ControllerMode.NORMAL
        self.history: dict[int, TicketHistory] = {}
        self.arrivals: list[ArrivalRecord] = []
        self._trace = trace if trace is not None else lambda line: None
        self._wait_q: list[Program] = []
        self._action_owner: dict[int, Program] = {}
        self._bay_owner: dict[str, Program | None] = {"entrance": None, "exit": None}
        self._platform_owner: Program | None = None
        self._homing: Program | None = None
        self._faulted_belts: set[BeltId] = set()

    # -- event entry points ------------------------------------------------

    def handle_arrival(self, vehicle: Vehicle, now_ms: int) -> ArrivalResult:
        """Admit or reject a car waiting at the entrance.

        Acceptance reserves a slot, opens the gate, starts the billing timer,
        and queues the welcome message, in that order. The gate stays closed
        for every rejection.
        """
        result = self._screen_arrival(vehicle)
        if result is not None:
            self._trace(f"t={now_ms} reject={result.reason} vehicle={vehicle.vehicle_id}")
            self.arrivals.append(ArrivalRecord(now_ms, vehicle, False, None, result.reason))
            return result
        slot = allocate_slot(self.garage.slots, self.garage.next_ticket_id)
        ticket = self.garage.issue_ticket(vehicle, slot, now_ms)
        self.history[ticket.ticket_id] = TicketHistory()
        self.arrivals.append(ArrivalRecord(now_ms, vehicle, True, ticket.ticket_id, None))
        self._set_phase(ticket, TicketPhase.PARKING, now_ms)
        program = Program(
            "parking", _parking_steps(slot), ticket.ticket_id, vehicle.vehicle_id
        )
        self._request_step(program, now_ms)
        self.garage.timers.start(slot, now_ms)
        self._trace(f"t={now_ms} timer=start ticket={ticket.ticket_id}")
        self._send_sms("welcome", ticket, now_ms)
        self._pump(now_ms)
        return ArrivalResult(True, ticket.ticket_id)

    def _screen_arrival(self, vehicle: Vehicle) -> ArrivalResult | None:
        if self.mode is ControllerMode.HALTED:
            return ArrivalResult(False, reason="Halted")
        sensors = read_length_sensors(vehicle.length_mm, self.garage.config)
        if all(sensors):
            return ArrivalResult(False, reason="TooLong")
        for ticket in self.garage.tickets.values():
            if ticket.is_active and ticket.vehicle.phone == vehicle.phone:
                return ArrivalResult(False, reason="DuplicatePhone")
        try:
            probe = next(
                addr
                for addr in self.garage.slots.addresses()
                if self.garage.slots.state_at(addr) is SlotState.VACANT
            )
        except StopIteration:
            return ArrivalResult(False, reason="NoVacancy")
        return None

    def on_inbound_sms(self, phone: str, body: str, now_ms: int) -> list[RetrievalResult]:
        """Deliver a customer text to the modem, then poll and act on the inbox."""
        self.gateway.modem.receive(phone, body, now_ms)
        results = []
        for message in self.gateway.poll_inbox(now_ms):
            results.append(self.handle_retrieval_request(message.number, now_ms))
        return results

    def handle_retrieval_request(self, phone: str, now_ms: int) -> RetrievalResult:
        """Any text from a phone with a parked car asks for that car back."""
        if self.mode is ControllerMode.HALTED:
            self._trace(f"t={now_ms} reject=Halted phone={phone}")
            return RetrievalResult("halted")
        ticket = next(
            (
                t
                for t in self.garage.tickets.values()
                if t.is_active and t.vehicle.phone == phone
            ),
            None,
        )
        if ticket is None or ticket.phase in (
            TicketPhase.AWAITING_ENTRY,
            TicketPhase.PARKING,
        ):
            # A car still on its way in is not retrievable; same answer as an
            # unknown number.
            self._trace(f"t={now_ms} reject=UnknownPhone phone={phone}")
            return RetrievalResult("unknown_phone")
        if ticket.phase in (TicketPhase.RETRIEVING, TicketPhase.AWAITING_PAYMENT):
            self._trace(f"t={now_ms} retrieval=duplicate ticket={ticket.ticket_id}")
            return RetrievalResult("already_retrieving", ticket.ticket_id)
        ticket.exit_ms = now_ms
        self.garage.timers.stop(ticket.slot)
        self._trace(f"t={now_ms} timer=stop ticket={ticket.ticket_id}")
        self._set_phase(ticket, TicketPhase.RETRIEVING, now_ms)
        self.history[ticket.ticket_id].request_ms = now_ms
        program = Program(
            "retrieval",
            _retrieval_steps(ticket.slot),
            ticket.ticket_id,
            ticket.vehicle.vehicle_id,
        )
        self._request_step(program, now_ms)
        self._pump(now_ms)
        return RetrievalResult("started", ticket.ticket_id)

    def handle_payment(self, ticket_id: int, now_ms: int) -> PaymentResult:
        """Close the ticket and let the car out through the exit gate."""
        ticket = self.garage.tickets.get(ticket_id)
        if ticket is None:
            self._trace(f"t={now_ms} reject=UnknownTicket ticket={ticket_id}")
            return PaymentResult("unknown_ticket", ticket_id)
        if ticket.phase is not TicketPhase.AWAITING_PAYMENT:
            self._trace(f"t={now_ms} reject=WrongPhase ticket={ticket_id}")
            return PaymentResult("wrong_phase", ticket_id)
        self._set_phase(ticket, TicketPhase.CLOSED, now_ms)
        self.history[ticket_id].closed_ms = now_ms
        program = Program("exit", _exit_steps(), ticket_id, ticket.vehicle.vehicle_id)
        self._request_step(program, now_ms)
        self._pump(now_ms)
        return PaymentResult("ok", ticket_id)

    def on_fault(self, belt_id: BeltId, now_ms: int) -> None:
        """A belt malfunction raises the alarm: finish in-flight motions only."""
        self.fleet.set_belt_fault(belt_id, True)
        self._faulted_belts.add(belt_id)
        self.mode = ControllerMode.HALTED
        self._trace(f"t={now_ms} mode=Halted reason=belt:{belt_id}")

    def on_fault_cleared(self, now_ms: int) -> None:
        """Resume deferred work in request order; a no-op when not halted."""
        if self.mode is not ControllerMode.HALTED:
            return
        for belt_id in sorted(self._faulted_belts, key=str):
            self.fleet.set_belt_fault(belt_id, False)
        self._faulted_belts.clear()
        self.mode = ControllerMode.NORMAL
        self._trace(f"t={now_ms} mode=Normal")
        self._pump(now_ms)
        self._maybe_home(now_ms)

    def on_device_done(self, device_id: str, action_id: int, now_ms: int) -> None:
        """Advance the owning program past its completed motion."""
        program = self._action_owner.pop(action_id, None)
        if program is None:
            raise UnknownActionError(f"no program owns action {action_id} ({device_id})")
        action = self.fleet.complete_action(action_id)
        step = program.current
        self._step_completed(program, step, now_ms)
        if program.bay_name and program.idx == program.bay_last:
            self._bay_owner[program.bay_name] = None
        if step.platform and program.idx == program.platform_last:
            self._platform_owner = None
        program.idx += 1
        if program.done:
            self._finish_program(program, now_ms)
        else:
            self._request_step(program, now_ms)
        self._pump(now_ms)
        self._maybe_home(now_ms)

    # -- program machinery ---------------------------------------------------

    def _request_step(self, program: Program, now_ms: int) -> None:
        if program.requested_idx < program.idx:
            program.requested_idx = program.idx
            self._trace(
                f"t={now_ms} act=request device={self._device_hint(program.current)} "
                f"ticket={program.ticket_label}"
            )
        if program not in self._wait_q:
            self._wait_q.append(program)

    def _pump(self, now_ms: int) -> None:
        """Serve the wait queue in request order; launches never free anything,
        so one pass per wake-up is enough."""
        if self.mode is ControllerMode.HALTED:
            return
        for program in list(self._wait_q):
            if self._try_launch(program, now_ms):
                self._wait_q.remove(program)

    def _try_launch(self, program: Program, now_ms: int) -> bool:
        step = program.current
        # Long-held locks are claimed as soon as they are free even if the
        # motion itself cannot start yet; this keeps the platform and the bays
        # FIFO while motor power churns.
        if step.bay:
            if self._bay_owner[step.bay] not in (None, program):
                return False
            self._bay_owner[step.bay] = program
        if step.platform:
            if self._platform_owner not in (None, program):
                return False
            self._platform_owner = program
        if not self._resources_free(program, step):
            return False
        action = self._start_motion(program, step, now_ms)
        self._action_owner[action.action_id] = program
        self._trace(
            f"t={now_ms} act=start device={action.device_id} action={action.action_id} "
            f"op={action.op} ticket={program.ticket_label}"
        )
        return True

    def _resources_free(self, program: Program, step: Step) -> bool:
        fleet = self.fleet
        if step.kind in (StepKind.OPEN_GATE, StepKind.CLOSE_GATE):
            return not fleet.gates[step.gate].busy
        if step.kind in (StepKind.CONVEY, StepKind.TRANSFER_TO_SLOT, StepKind.TRANSFER_FROM_SLOT):
            belt = fleet.belt(step.belt)
            if belt.busy or belt.faulted:
                return False
            if step.tag == "enter" and belt.occupant is not None:
                return False
            # stage/depart ride a belt this program's car must already sit on
            if step.tag in ("stage", "depart") and belt.occupant != program.vehicle_id:
                return False
            return fleet.relays.available() >= 1
        if step.kind is StepKind.LOAD_PLATFORM:
            platform_belt = fleet.belt(PLATFORM_BELT)
            if platform_belt.busy or platform_belt.faulted:
                return False
            if step.tag == "deposit":
                exit_belt = fleet.belt(EXIT_BELT)
                if exit_belt.busy or exit_belt.occupant is not None:
                    return False
            return fleet.relays.available() >= 1
        if step.kind is StepKind.ELEVATE:
            if fleet.platform.busy:
                return False
            needed = 0 if fleet.platform.floor_pos == step.target else 1
            return fleet.relays.available() >= needed
        if step.kind is StepKind.ROTATE:
            if fleet.platform.busy:
                return False
            target_angle = (step.target * self.garage.config.slot_angle_deg) % 360.0
            needed = 0 if fleet.platform.angle_deg == target_angle else 2
            return fleet.relays.available() >= needed
        raise AssertionError(f"unhandled step kind {step.kind}")

    def _start_motion(self, program: Program, step: Step, now_ms: int) -> Action:
        fleet = self.fleet
        kin = self.garage.config.kinematics
        if step.kind is StepKind.OPEN_GATE:
            return fleet.gate_actuate(step.gate, "open", now_ms)
        if step.kind is StepKind.CLOSE_GATE:
            return fleet.gate_actuate(step.gate, "close", now_ms)
        if step.kind is StepKind.CONVEY:
            action = fleet.belt_start_convey(step.belt, now_ms)
            if step.tag == "enter":
                fleet.belt(step.belt).occupant = program.vehicle_id
            return action
        if step.kind is StepKind.LOAD_PLATFORM:
            action = fleet.belt_start_convey(PLATFORM_BELT, now_ms, kin.platform_load_s)
            if step.tag == "deposit":
                fleet.belt(EXIT_BELT).occupant = program.vehicle_id
            return action
        if step.kind is StepKind.ELEVATE:
            return fleet.elevator_goto_floor(step.target, now_ms)
        if step.kind is StepKind.ROTATE:
            return fleet.platform_rotate_to_slot(step.target, now_ms)
        if step.kind in (StepKind.TRANSFER_TO_SLOT, StepKind.TRANSFER_FROM_SLOT):
            return fleet.belt_start_convey(step.belt, now_ms)
        raise AssertionError(f"unhandled step kind {step.kind}")

    def _step_completed(self, program: Program, step: Step, now_ms: int) -> None:
        fleet = self.fleet
        if step.kind is StepKind.LOAD_PLATFORM and step.tag == "board":
            fleet.belt(ENTRANCE_BELT).occupant = None
        elif step.kind is StepKind.CONVEY and step.tag == "depart":
            fleet.belt(EXIT_BELT).occupant = None
        elif step.kind is StepKind.TRANSFER_TO_SLOT:
            ticket = self.garage.tickets[program.ticket_id]
            self.garage.slots.set_cell(ticket.slot, SlotState.OCCUPIED, ticket.ticket_id)
        elif step.kind is StepKind.TRANSFER_FROM_SLOT:
            ticket = self.garage.tickets[program.ticket_id]
            self.garage.slots.set_cell(ticket.slot, SlotState.VACANT, None)

    def _finish_program(self, program: Program, now_ms: int) -> None:
        if program is self._homing:
            self._homing = None
        if program.label == "parking":
            ticket = self.garage.tickets[program.ticket_id]
            self._set_phase(ticket, TicketPhase.PARKED, now_ms)
            self.history[ticket.ticket_id].parked_ms = now_ms
        elif program.label == "retrieval":
            ticket = self.garage.tickets[program.ticket_id]
            rate = self.garage.config.billing_rate_per_minute
            ticket.amount_due = compute_bill(ticket.entry_ms, ticket.exit_ms, rate)
            minutes = billed_minutes(ticket.entry_ms, ticket.exit_ms)
            self._trace(
                f"t={now_ms} bill ticket={ticket.ticket_id} minutes={minutes} "
                f"amount={ticket.amount_due}"
            )
            self._set_phase(ticket, TicketPhase.AWAITING_PAYMENT, now_ms)
            self.history[ticket.ticket_id].ready_ms = now_ms
            self._send_sms("bill", ticket, now_ms)

    def _maybe_home(self, now_ms: int) -> None:
        """Park the idle platform back at floor 0, angle 0."""
        if self.mode is ControllerMode.HALTED:
            return
        if self._platform_owner is not None or self._homing is not None:
            return
        platform = self.fleet.platform
        if platform.floor_pos == 0 and platform.angle_deg == 0.0:
            return
        self._homing = Program("homing", _homing_steps())
        self._request_step(self._homing, now_ms)
        self._pump(now_ms)

    def _set_phase(self, ticket: ParkingTicket, phase: TicketPhase, now_ms: int) -> None:
        old = ticket.phase
        ticket.advance(phase)
        self._trace(f"ticket={ticket.ticket_id} phase={old.value}->{phase.value} t={now_ms}")

    def _send_sms(self, kind: str, ticket: ParkingTicket, now_ms: int) -> None:
        body = compose_message(kind, ticket)
        ref = self.gateway.send_sms(ticket.vehicle.phone, body, now_ms)
        self._trace(
            f"t={now_ms} sms=out kind={kind} number={ticket.vehicle.phone} ref={ref}"
        )

    def _device_hint(self, step: Step) -> str:
        if step.kind in (StepKind.OPEN_GATE, StepKind.CLOSE_GATE):
            return f"gate:{step.gate}"
        if step.kind is StepKind.LOAD_PLATFORM:
            return f"belt:{PLATFORM_BELT}"
        if step.kind is StepKind.ELEVATE:
            return "elevator"
        if step.kind is StepKind.ROTATE:
            return "rotator"
        return f"belt:{step.belt}"


def check_invariants(controller: GarageController) -> None:
    """Structural scan run after every event dispatch.

    Verifies the ticket/slot bijection, timer consistency, the conservation
    count, the relay budget, belt exclusivity, and platform alignment.
    """
    garage = controller.garage
    fleet = controller.fleet
    slots = garage.slots

    owners: dict[int, SlotAddress] = {}
    for addr in slots.addresses():
        state = slots.state_at(addr)
        ticket_id = slots.ticket_at(addr)
        if state is SlotState.VACANT:
            continue
        if ticket_id in owners:
            raise InvariantViolationError(
                f"ticket {ticket_id} owns both {owners[ticket_id]} and {addr}"
            )
        owners[ticket_id] = addr
        ticket = garage.tickets.get(ticket_id)
        if ticket is None or not ticket.is_active:
            raise InvariantViolationError(f"cell {addr} held by dead ticket {ticket_id}")
        allowed = (
            (TicketPhase.AWAITING_ENTRY, TicketPhase.PARKING)
            if state is SlotState.RESERVED
            else (TicketPhase.PARKED, TicketPhase.RETRIEVING)
        )
        if ticket.phase not in allowed:
            raise InvariantViolationError(
                f"cell {addr} is {state.value} but ticket {ticket_id} is {ticket.phase.value}"
            )

    for ticket in garage.tickets.values():
        owns = ticket.ticket_id in owners
        if ticket.phase in (TicketPhase.AWAITING_ENTRY, TicketPhase.PARKING, TicketPhase.PARKED):
            if not owns or owners[ticket.ticket_id] != ticket.slot:
                raise InvariantViolationError(
                    f"ticket {ticket.ticket_id} ({ticket.phase.value}) does not hold its slot"
                )
        if ticket.phase in (TicketPhase.AWAITING_PAYMENT, TicketPhase.CLOSED) and owns:
            raise InvariantViolationError(
                f"ticket {ticket.ticket_id} ({ticket.phase.value}) still holds a cell"
            )

    for addr in slots.addresses():
        entry = garage.timers.entry_at(addr)
        ticket_id = slots.ticket_at(addr)
        ticket = garage.tickets.get(ticket_id) if ticket_id is not None else None
        running = (
            ticket is not None
            and ticket.phase
            in (TicketPhase.AWAITING_ENTRY, TicketPhase.PARKING, TicketPhase.PARKED)
        )
        if running and entry != ticket.entry_ms:
            raise InvariantViolationError(f"timer at {addr} should be {ticket.entry_ms}")
        if not running and entry is not None:
            raise InvariantViolationError(f"stale timer at {addr}")

    if garage.vehicles_entered != len(garage.tickets):
        raise InvariantViolationError(
            f"entered {garage.vehicles_entered} != tickets {len(garage.tickets)}"
        )
    counts = garage.phase_counts()
    in_transit = (
        counts[TicketPhase.AWAITING_ENTRY]
        + counts[TicketPhase.PARKING]
        + counts[TicketPhase.RETRIEVING]
        + counts[TicketPhase.AWAITING_PAYMENT]
    )
    if in_transit + counts[TicketPhase.PARKED] + counts[TicketPhase.CLOSED] != (
        garage.vehicles_entered
    ):
        raise InvariantViolationError("vehicle count does not split into transit/parked/exited")

    if len(fleet.relays.powered) > fleet.relays.budget:
        raise InvariantViolationError("relay budget exceeded")
    active_motors = [m for a in fleet.active_actions() for m in a.motors]
    if len(active_motors) != len(set(active_motors)):
        raise InvariantViolationError("a motor is held by two actions")
    if set(fleet.relays.powered) != set(active_motors):
        raise InvariantViolationError(
            f"powered {sorted(fleet.relays.powered)} != active {sorted(set(active_motors))}"
        )

    occupants = [b.occupant for b in fleet.belts.values() if b.occupant is not None]
    if len(occupants) != len(set(occupants)):
        raise InvariantViolationError(f"a vehicle sits on two belts: {occupants}")

    platform = fleet.platform
    if not 0 <= platform.floor_pos < garage.config.floors:
        raise InvariantViolationError(f"platform floor {platform.floor_pos} out of range")
    if not platform.busy:
        pitch = garage.config.slot_angle_deg
        if (platform.angle_deg % pitch) > 1e-9 or not 0 <= platform.angle_deg < 360:
            raise InvariantViolationError(f"platform angle {platform.angle_deg} misaligned")
