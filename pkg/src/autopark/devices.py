"""Simulated hardware: stepper kinematics, conveyor belts, the lifting and
rotating platform, the two gates, and the relay bank that limits how many
motors may draw power at once.

Every motion is an Action with a fixed duration; completion is reported back
through a scheduler callback so the event engine stays the single source of
time. Devices hold no policy: sequencing and queueing live in the controller.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

from .model import AutoparkError, GarageConfig, ms_from_s


class NonIntegralStepsError(AutoparkError):
    """The commanded angle is not a whole number of motor steps."""


class PowerBudgetExceededError(AutoparkError):
    """Granting the request would exceed the relay power budget."""


class BeltBusyError(AutoparkError):
    """The belt is already running an action."""


class BeltFaultedError(AutoparkError):
    """The belt is faulted and cannot start until the fault is cleared."""


class PlatformBusyError(AutoparkError):
    """The platform is already moving."""


class GateBusyError(AutoparkError):
    """The gate is mid-swing."""


@dataclass(frozen=True)
class StepperSpec:
    """Electrical and geometric rating of one stepper motor."""

    step_angle_deg: float
    step_rate_hz: float = 200.0
    rated_power_w: float = 10.0


def steps_for_angle(angle_deg: float, step_angle_deg: float) -> int:
    """Whole motor steps for a commanded angle.

    The angle must be an exact multiple of the step angle (within 1e-9 of a
    whole step); anything else would leave the axis between detent positions.
    """
    if step_angle_deg <= 0:
        raise ValueError("step_angle_deg must be > 0")
    ratio = angle_deg / step_angle_deg
    steps = round(ratio)
    if abs(ratio - steps) > 1e-9:
        raise NonIntegralStepsError(
            f"{angle_deg} deg is not a whole number of {step_angle_deg} deg steps"
        )
    return steps


def move_duration(steps: int, step_rate_hz: float) -> float:
    """Travel time in seconds for a step count at a fixed rate, ms resolution."""
    if step_rate_hz <= 0:
        raise ValueError("step_rate_hz must be > 0")
    if steps < 0:
        raise ValueError("steps must be >= 0")
    return round(steps * 1000 / step_rate_hz) / 1000


def read_length_sensors(vehicle_length_mm: int, config: GarageConfig) -> tuple[bool, bool, bool]:
    """Sensor tuple for a car aligned with its front bumper at position 0.

    Beams sit at 0, max/2, and max vehicle length; a beam trips while car
    body covers it, so the far beam trips only when the car is longer than
    the allowed maximum.
    """
    max_len = config.max_vehicle_length_mm
    positions = (0.0, max_len / 2, float(max_len))
    return tuple(pos < vehicle_length_mm for pos in positions)


@dataclass(frozen=True)
class BeltId:
    """Conveyor identity: entrance, exit, platform, or one slot face."""

    kind: str  # entrance | exit | platform | slot
    face: int | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("entrance", "exit", "platform", "slot"):
            raise ValueError(f"unknown belt kind: {self.kind!r}")
        if (self.kind == "slot") != (self.face is not None):
            raise ValueError("face is required exactly for slot belts")

    def __str__(self) -> str:
        return self.kind if self.face is None else f"{self.kind}:{self.face}"


ENTRANCE_BELT = BeltId("entrance")
EXIT_BELT = BeltId("exit")
PLATFORM_BELT = BeltId("platform")


def parse_belt_id(text: str) -> BeltId:
    if text.startswith("slot:"):
        return BeltId("slot", int(text.split(":", 1)[1]))
    return BeltId(text)


def belt_roster(slots_per_floor: int) -> list[BeltId]:
    """One entrance, one exit, one platform belt, and one belt per slot face."""
    return [ENTRANCE_BELT, EXIT_BELT, PLATFORM_BELT] + [
        BeltId("slot", face) for face in range(slots_per_floor)
    ]


class RelayBank:
    """Switches motor power and enforces the concurrent-motor budget.

    Also serves as the load ledger: the power model reads the total wattage
    currently switched on, and reports track the high-water motor count.
    """

    def __init__(self, budget: int = 2):
        if budget < 1:
            raise ValueError("budget must be >= 1")
        self.budget = budget
        self.powered: dict[str, float] = {}  # motor id -> watts drawn
        self.max_concurrent = 0

    def available(self) -> int:
        return self.budget - len(self.powered)

    def request_power(self, motor_id: str, watts: float = 10.0) -> None:
        if motor_id in self.powered:
            raise ValueError(f"motor {motor_id} is already powered")
        if len(self.powered) >= self.budget:
            raise PowerBudgetExceededError(
                f"power budget {self.budget} in use: {sorted(self.powered)}"
            )
        self.powered[motor_id] = watts
        self.max_concurrent = max(self.max_concurrent, len(self.powered))

    def release_power(self, motor_id: str) -> None:
        if motor_id not in self.powered:
            raise ValueError(f"motor {motor_id} is not powered")
        del self.powered[motor_id]

    def total_load_w(self) -> float:
        return sum(self.powered.values())


@dataclass
class Belt:
    belt_id: BeltId
    action_id: int | None = None  # running action, if any
    occupant: str | None = None  # vehicle currently sitting on the belt
    faulted: bool = False

    @property
    def busy(self) -> bool:
        return self.action_id is not None


@dataclass
class PlatformState:
    """The shared lift-and-turn platform the whole garage funnels through."""

    floor_pos: int = 0
    angle_deg: float = 0.0  # always in [0, 360)
    action_id: int | None = None

    @property
    def busy(self) -> bool:
        return self.action_id is not None


@dataclass
class GateState:
    name: str  # entrance | exit
    angle_deg: float = 0.0  # 0 closed, 90 open
    action_id: int | None = None
    target_deg: float = 0.0

    @property
    def busy(self) -> bool:
        return self.action_id is not None

    @property
    def is_open(self) -> bool:
        return self.angle_deg == 90.0 and not self.busy


@dataclass(frozen=True)
class Action:
    """One in-flight device motion and the motors it holds powered."""

    action_id: int
    device_id: str
    op: str
    started_ms: int
    duration_ms: int
    motors: tuple[str, ...]

    @property
    def done_ms(self) -> int:
        return self.started_ms + self.duration_ms


ELEVATOR_MOTOR = "elevator"
ROTATOR_MOTORS = ("rotator:a", "rotator:b")


class DeviceFleet:
    """All simulated hardware for one garage plus the relay bank.

    The scheduler callback receives (done_at_ms, device_id, action_id) for
    every started action; the caller is expected to feed the completion back
    into complete_action when that moment arrives.

    Callers power motors through the relay bank before starting a motion
    (zero-duration motions need no power); complete_action releases them.
    """

    def __init__(
        self,
        config: GarageConfig,
        schedule_done: Callable[[int, str, int], None],
        budget: int = 2,
    ):
        self.config = config
        self.schedule_done = schedule_done
        self.relays = RelayBank(budget)
        self.belts: dict[BeltId, Belt] = {
            belt_id: Belt(belt_id) for belt_id in belt_roster(config.slots_per_floor)
        }
        self.platform = PlatformState()
        self.gates = {"entrance": GateState("entrance"), "exit": GateState("exit")}
        self.main_stepper = StepperSpec(config.kinematics.step_angle_main_deg)
        self.gate_stepper = StepperSpec(config.kinematics.step_angle_gate_deg)
        self._next_action_id = 1
        self._active: dict[int, Action] = {}

    # -- internals ---------------------------------------------------------

    def _start(
        self, device_id: str, op: str, now_ms: int, duration_ms: int, motors: tuple[str, ...]
    ) -> Action:
        if duration_ms > 0:
            for motor in motors:
                self.relays.request_power(motor, self.main_stepper.rated_power_w)
        else:
            motors = ()
        action = Action(self._next_action_id, device_id, op, now_ms, duration_ms, motors)
        self._next_action_id += 1
        self._active[action.action_id] = action
        self.schedule_done(action.done_ms, device_id, action.action_id)
        return action

    def action(self, action_id: int) -> Action:
        return self._active[action_id]

    def active_actions(self) -> list[Action]:
        return list(self._active.values())

    # -- belts ---------------------------------------------------------------

    def belt(self, belt_id: BeltId) -> Belt:
        return self.belts[belt_id]

    def belt_start_convey(self, belt_id: BeltId, now_ms: int, duration_s: float | None = None) -> Action:
        """Run one conveyor for a full transit (or an explicit duration)."""
        belt = self.belts[belt_id]
        if belt.faulted:
            raise BeltFaultedError(f"belt {belt_id} is faulted")
        if belt.busy:
            raise BeltBusyError(f"belt {belt_id} is busy with action {belt.action_id}")
        seconds = self.config.kinematics.belt_transit_s if duration_s is None else duration_s
        action = self._start(
            f"belt:{belt_id}", "convey", now_ms, ms_from_s(seconds), (f"belt:{belt_id}",)
        )
        belt.action_id = action.action_id
        return action

    def set_belt_fault(self, belt_id: BeltId, faulted: bool) -> None:
        self.belts[belt_id].faulted = faulted

    # -- platform ------------------------------------------------------------

    def elevator_goto_floor(self, target_floor: int, now_ms: int) -> Action:
        """Drive the platform vertically; zero travel completes immediately."""
        if not 0 <= target_floor < self.config.floors:
            raise ValueError(f"floor {target_floor} out of range")
        if self.platform.busy:
            raise PlatformBusyError("platform is moving")
        travel = abs(target_floor - self.platform.floor_pos)
        duration_ms = ms_from_s(travel * self.config.kinematics.elevation_per_floor_s)
        motors = (ELEVATOR_MOTOR,) if duration_ms else ()
        action = self._start(
            ELEVATOR_MOTOR, f"lift floor={target_floor} travel={travel}", now_ms, duration_ms, motors
        )
        self.platform.action_id = action.action_id
        self._platform_target = ("floor", target_floor)
        return action

    def platform_rotate_to_slot(self, slot_index: int, now_ms: int) -> Action:
        """Turn the platform to a slot face by the shortest arc, ties clockwise.

        Rotation drives both ring motors, so it consumes two power grants.
        """
        slots = self.config.slots_per_floor
        if not 0 <= slot_index < slots:
            raise ValueError(f"slot {slot_index} out of range")
        if self.platform.busy:
            raise PlatformBusyError("platform is moving")
        slot_angle = self.config.slot_angle_deg
        current = self.platform.angle_deg / slot_angle
        cw_faces = (slot_index - current) % slots
        ccw_faces = (current - slot_index) % slots
        if cw_faces <= ccw_faces:
            direction, faces = "cw", cw_faces
        else:
            direction, faces = "ccw", ccw_faces
        duration_ms = ms_from_s(faces * self.config.kinematics.rotation_per_slot_s)
        motors = ROTATOR_MOTORS if duration_ms else ()
        action = self._start(
            "rotator",
            f"rotate slot={slot_index} dir={direction} faces={faces:g}",
            now_ms,
            duration_ms,
            motors,
        )
        self.platform.action_id = action.action_id
        self._platform_target = ("angle", (slot_index * slot_angle) % 360.0)
        return action

    # -- gates -----------------------------------------------------------------

    def gate_actuate(self, name: str, command: str, now_ms: int) -> Action:
        """Swing a gate open or closed; a gate already there completes at once.

        Gate motors run off the low-voltage control rail, not the relay bank.
        """
        if command not in ("open", "close"):
            raise ValueError(f"unknown gate command: {command!r}")
        gate = self.gates[name]
        if gate.busy:
            raise GateBusyError(f"gate {name} is mid-swing")
        target = 90.0 if command == "open" else 0.0
        duration_ms = 0 if gate.angle_deg == target else ms_from_s(
            self.config.kinematics.gate_actuation_s
        )
        action = self._start(f"gate:{name}", command, now_ms, duration_ms, ())
        gate.action_id = action.action_id
        gate.target_deg = target
        return action

    # -- completion --------------------------------------------------------------

    def complete_action(self, action_id: int) -> Action:
        """Apply the end state of a motion and release its power grants."""
        action = self._active.pop(action_id)
        for motor in action.motors:
            self.relays.release_power(motor)
        device = action.device_id
        if device.startswith("belt:"):
            belt = self.belts[parse_belt_id(device.removeprefix("belt:"))]
            belt.action_id = None
        elif device == ELEVATOR_MOTOR:
            kind, value = self._platform_target
            assert kind == "floor"
            self.platform.floor_pos = value
            self.platform.action_id = None
        elif device == "rotator":
            kind, value = self._platform_target
            assert kind == "angle"
            self.platform.angle_deg = value
            self.platform.action_id = None
        elif device.startswith("gate:"):
            gate = self.gates[device.removeprefix("gate:")]
            gate.angle_deg = gate.target_deg
            gate.action_id = None
        else:
            raise ValueError(f"unknown device: {device}")
        return action
