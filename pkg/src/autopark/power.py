"""Solar, battery, and load bookkeeping.

The PV panel is modeled from its measured voltage/current points rather than
the label values: current is piecewise linear between the measured anchors
and scales linearly with irradiance. The battery integrates amp-hours at the
bus voltage; a charge controller caps charging current, and a metered grid
backup covers any draw the battery cannot, so motors never stall for power.
"""

from __future__ import annotations

from dataclasses import dataclass, replace


@dataclass(frozen=True)
class PvModuleSpec:
    """Nameplate figures for the panel (standard 1000 W/m2 test conditions)."""

    pm_w: float = 10.0
    vmp_v: float = 18.0
    imp_a: float = 0.56
    voc_v: float = 21.24
    isc_a: float = 0.61


@dataclass(frozen=True)
class PvMeasuredCurve:
    """Measured V-I anchor points, ordered by voltage, current non-increasing."""

    points: tuple[tuple[float, float], ...] = (
        (0.0, 0.601),  # short circuit
        (18.36, 0.540),  # max power
        (22.31, 0.0),  # open circuit
    )

    def __post_init__(self) -> None:
        volts = [v for v, _ in self.points]
        amps = [i for _, i in self.points]
        if len(self.points) < 2 or volts != sorted(volts) or len(set(volts)) != len(volts):
            raise ValueError("curve points must have strictly increasing voltage")
        if any(b > a for a, b in zip(amps, amps[1:])):
            raise ValueError("curve current must be non-increasing with voltage")

    @property
    def voc_v(self) -> float:
        return self.points[-1][0]


DEFAULT_CURVE = PvMeasuredCurve()


@dataclass(frozen=True)
class BatteryState:
    capacity_ah: float = 7.0
    soc: float = 1.0  # state of charge, 0..1
    bus_voltage_v: float = 12.0


@dataclass(frozen=True)
class ChargeControllerSpec:
    max_charge_current_a: float = 3.0


def pv_current_at(
    voltage_v: float, irradiance_scale: float, curve: PvMeasuredCurve = DEFAULT_CURVE
) -> float:
    """Panel current at a terminal voltage, scaled linearly by irradiance.

    Anchor voltages return their measured current exactly; beyond open
    circuit the panel sources nothing.
    """
    if voltage_v < 0:
        raise ValueError("voltage_v must be >= 0")
    if not 0 <= irradiance_scale <= 1:
        raise ValueError("irradiance_scale must be in [0, 1]")
    points = curve.points
    if voltage_v >= curve.voc_v:
        return 0.0
    for v, i in points:
        if voltage_v == v:
            return i * irradiance_scale
    for (v0, i0), (v1, i1) in zip(points, points[1:]):
        if v0 < voltage_v < v1:
            i = i0 + (i1 - i0) * (voltage_v - v0) / (v1 - v0)
            return i * irradiance_scale
    # Below the first anchor only if the curve does not start at 0 V.
    return points[0][1] * irradiance_scale


def pv_max_power(
    irradiance_scale: float, curve: PvMeasuredCurve = DEFAULT_CURVE, scan_step_v: float = 0.01
) -> tuple[float, float]:
    """Locate the max power point by scanning the curve at a fixed voltage step.

    Returns (voltage_v, power_w) for the best scanned point.
    """
    steps = int(round(curve.voc_v / scan_step_v))
    best_v, best_p = 0.0, 0.0
    for k in range(steps + 1):
        v = k * scan_step_v
        p = v * pv_current_at(v, irradiance_scale, curve)
        if p > best_p:
            best_v, best_p = v, p
    return best_v, best_p


def required_battery_current(
    motor_count: int, motor_power_w: float = 10.0, bus_voltage_v: float = 12.0
) -> float:
    """Battery current needed to run motor_count motors at the bus voltage."""
    if motor_count < 0:
        raise ValueError("motor_count must be >= 0")
    if bus_voltage_v <= 0:
        raise ValueError("bus_voltage_v must be > 0")
    return motor_count * motor_power_w / bus_voltage_v


@dataclass(frozen=True)
class EnergyTick:
    """Energy flows over one integration interval, all in watt-hours."""

    pv_wh: float
    grid_wh: float
    load_wh: float
    battery_delta_wh: float
    soc_after: float


def power_tick(
    battery: BatteryState,
    irradiance_scale: float,
    load_w: float,
    dt_s: float,
    curve: PvMeasuredCurve = DEFAULT_CURVE,
    controller: ChargeControllerSpec = ChargeControllerSpec(),
) -> tuple[BatteryState, EnergyTick]:
    """Advance the battery by dt_s seconds under a constant load.

    The panel operates at the bus voltage and its current is capped by the
    charge controller. Surplus beyond a full battery is curtailed at the
    panel; shortfall below an empty battery is met from the grid and metered.
    """
    if dt_s < 0:
        raise ValueError("dt_s must be >= 0")
    if load_w < 0:
        raise ValueError("load_w must be >= 0")
    dt_h = dt_s / 3600.0
    bus_v = battery.bus_voltage_v
    pv_current = min(
        pv_current_at(bus_v, irradiance_scale, curve), controller.max_charge_current_a
    )
    pv_ah = pv_current * dt_h
    load_ah = (load_w / bus_v) * dt_h
    net_ah = pv_ah - load_ah

    if net_ah >= 0:
        headroom_ah = (1.0 - battery.soc) * battery.capacity_ah
        stored_ah = min(net_ah, headroom_ah)
        pv_used_ah = load_ah + stored_ah  # surplus beyond this is curtailed
        grid_ah = 0.0
        battery_delta_ah = stored_ah
    else:
        available_ah = battery.soc * battery.capacity_ah
        drawn_ah = min(-net_ah, available_ah)
        grid_ah = -net_ah - drawn_ah
        pv_used_ah = pv_ah
        battery_delta_ah = -drawn_ah

    soc = battery.soc + (battery_delta_ah / battery.capacity_ah if battery.capacity_ah else 0.0)
    soc = min(1.0, max(0.0, soc))
    tick = EnergyTick(
        pv_wh=pv_used_ah * bus_v,
        grid_wh=grid_ah * bus_v,
        load_wh=load_ah * bus_v,
        battery_delta_wh=battery_delta_ah * bus_v,
        soc_after=soc,
    )
    return replace(battery, soc=soc), tick


@dataclass
class EnergyMeters:
    pv_wh: float = 0.0
    grid_wh: float = 0.0
    load_wh: float = 0.0
    min_soc: float = 1.0


class PowerSystem:
    """Stateful wrapper integrating power_tick across a simulation run."""

    def __init__(
        self,
        battery: BatteryState | None = None,
        curve: PvMeasuredCurve = DEFAULT_CURVE,
        controller: ChargeControllerSpec = ChargeControllerSpec(),
        irradiance_scale: float = 1.0,
    ):
        self.battery = battery if battery is not None else BatteryState()
        self.curve = curve
        self.controller = controller
        self.irradiance_scale = irradiance_scale
        self.meters = EnergyMeters(min_soc=self.battery.soc)
        self.ticks: list[EnergyTick] = []

    def set_irradiance(self, w_per_m2: float) -> None:
        """Irradiance is given in W/m2 against the 1000 W/m2 rating point."""
        if w_per_m2 < 0:
            raise ValueError("w_per_m2 must be >= 0")
        self.irradiance_scale = min(w_per_m2 / 1000.0, 1.0)

    def advance(self, load_w: float, dt_s: float) -> EnergyTick:
        self.battery, tick = power_tick(
            self.battery, self.irradiance_scale, load_w, dt_s, self.curve, self.controller
        )
        self.meters.pv_wh += tick.pv_wh
        self.meters.grid_wh += tick.grid_wh
        self.meters.load_wh += tick.load_wh
        self.meters.min_soc = min(self.meters.min_soc, tick.soc_after)
        self.ticks.append(tick)
        return tick
