"""Circuit data model: element types, drive waveforms, and the netlist container.

All types are immutable value objects; a netlist is safe to share between
threads once constructed.  Sign conventions:

* An element with terminals ``(a, b)`` carries positive branch current from
  ``a`` to ``b`` through the element.
* For a mutual inductance ``M > 0``, positive branch current in inductor A
  induces positive flux in inductor B with the dot at each inductor's first
  terminal.
* A current source drives positive current from its first terminal through
  the source to its second terminal (SPICE convention: it injects into the
  second node).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterator, Sequence

from .constants import PHI0

GROUND = "0"


class CircuitError(ValueError):
    """Raised when an element or netlist is constructed from invalid values."""


def _require_positive(value: float, name: str) -> None:
    if not (value > 0.0) or not math.isfinite(value):
        raise CircuitError(f"{name} must be a positive finite number, got {value!r}")


# ---------------------------------------------------------------------------
# Junction and detector parameter bundles
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class JosephsonJunctionParams:
    """RCSJ junction parameters.

    The Stewart-McCumber parameter, critical current, shunt resistance, and
    capacitance are stored together and must satisfy
    ``beta_c == 2*pi * ic * r**2 * c / PHI0`` to 1e-9 relative.  Use
    :func:`make_junction` to derive the capacitance from ``beta_c``.
    """

    ic: float          # critical current, A
    beta_c: float      # Stewart-McCumber damping parameter
    shunt_r: float     # shunt resistance, ohm
    capacitance: float # junction capacitance, F

    def __post_init__(self) -> None:
        _require_positive(self.ic, "ic")
        _require_positive(self.beta_c, "beta_c")
        _require_positive(self.shunt_r, "shunt_r")
        _require_positive(self.capacitance, "capacitance")
        implied = 2.0 * math.pi * self.ic * self.shunt_r ** 2 * self.capacitance / PHI0
        if abs(implied - self.beta_c) > 1e-9 * self.beta_c:
            raise CircuitError(
                f"inconsistent junction parameters: beta_c={self.beta_c} but "
                f"2*pi*ic*r^2*c/PHI0={implied}"
            )


def make_junction(ic: float, beta_c: float, shunt_r: float) -> JosephsonJunctionParams:
    """Build junction parameters with the capacitance derived from ``beta_c``."""
    _require_positive(ic, "ic")
    _require_positive(beta_c, "beta_c")
    _require_positive(shunt_r, "shunt_r")
    c = beta_c * PHI0 / (2.0 * math.pi * ic * shunt_r ** 2)
    return JosephsonJunctionParams(ic=ic, beta_c=beta_c, shunt_r=shunt_r, capacitance=c)


@dataclass(frozen=True)
class SpdParams:
    """Single-photon detector model: a transient hotspot resistance.

    A photon arrival at time ``t`` turns the element into a resistor of
    ``hotspot_resistance`` for ``hotspot_duration``; otherwise the element is
    a perfect superconducting short.  Edges are smoothed over ``edge_time``
    to keep the transient solver off discontinuities.  The detector's kinetic
    inductance is modeled as a separate series inductor in the netlist.
    """

    hotspot_resistance: float
    hotspot_duration: float
    photon_arrival_times: tuple[float, ...] = ()
    edge_time: float = 1e-12

    def __post_init__(self) -> None:
        _require_positive(self.hotspot_resistance, "hotspot_resistance")
        _require_positive(self.hotspot_duration, "hotspot_duration")
        _require_positive(self.edge_time, "edge_time")
        times = tuple(float(t) for t in self.photon_arrival_times)
        object.__setattr__(self, "photon_arrival_times", times)
        if any(t1 >= t2 for t1, t2 in zip(times, times[1:])):
            raise CircuitError("photon_arrival_times must be strictly increasing")

    def resistance(self, t: float) -> float:
        """Hotspot resistance profile at time ``t`` (0 when superconducting)."""
        r = 0.0
        for t0 in self.photon_arrival_times:
            if t < t0 or t > t0 + self.hotspot_duration + self.edge_time:
                continue
            up = min(1.0, (t - t0) / self.edge_time)
            down = min(1.0, max(0.0, (t0 + self.hotspot_duration + self.edge_time - t))
                       / self.edge_time)
            r = max(r, self.hotspot_resistance * min(up, down))
        return r

    def breakpoints(self) -> list[float]:
        pts: list[float] = []
        for t0 in self.photon_arrival_times:
            pts.extend((t0, t0 + self.edge_time,
                        t0 + self.hotspot_duration,
                        t0 + self.hotspot_duration + self.edge_time))
        return pts


# ---------------------------------------------------------------------------
# Drive waveforms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Dc:
    """Constant drive level.  The engine ramps DC sources in from zero before
    the experiment clock starts, so circuits begin in a biased steady state."""

    level: float

    def value(self, t: float) -> float:
        return self.level

    def breakpoints(self) -> list[float]:
        return []


@dataclass(frozen=True)
class SquareTrain:
    """Train of trapezoidal pulses: ramp up, hold, ramp down, repeat."""

    amplitude: float
    rise_time: float
    fall_time: float
    high_duration: float
    period: float
    start: float = 0.0
    count: int = 1

    def __post_init__(self) -> None:
        _require_positive(self.rise_time, "rise_time")
        _require_positive(self.fall_time, "fall_time")
        if self.high_duration < 0.0:
            raise CircuitError("high_duration must be >= 0")
        if self.count < 1:
            raise CircuitError("count must be >= 1")
        if self.count > 1:
            if not self.period > self.rise_time + self.high_duration + self.fall_time:
                raise CircuitError(
                    "period must exceed rise_time + high_duration + fall_time "
                    "for a pulse train"
                )
        else:
            _require_positive(self.period, "period")

    def value(self, t: float) -> float:
        rel = t - self.start
        if rel < 0.0:
            return 0.0
        k = min(int(rel // self.period), self.count - 1)
        tau = rel - k * self.period
        if tau < self.rise_time:
            return self.amplitude * tau / self.rise_time
        tau -= self.rise_time
        if tau <= self.high_duration:
            return self.amplitude
        tau -= self.high_duration
        if tau < self.fall_time:
            return self.amplitude * (1.0 - tau / self.fall_time)
        return 0.0

    def breakpoints(self) -> list[float]:
        pts = []
        for k in range(self.count):
            t0 = self.start + k * self.period
            pts.extend((t0, t0 + self.rise_time,
                        t0 + self.rise_time + self.high_duration,
                        t0 + self.rise_time + self.high_duration + self.fall_time))
        return pts


@dataclass(frozen=True)
class PiecewiseLinear:
    """Piecewise-linear waveform through ``(time, value)`` points; endpoint
    values are held outside the specified interval."""

    points: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        pts = tuple((float(t), float(v)) for t, v in self.points)
        object.__setattr__(self, "points", pts)
        if len(pts) < 2:
            raise CircuitError("piecewise_linear needs at least two points")
        if any(t1 >= t2 for (t1, _), (t2, _) in zip(pts, pts[1:])):
            raise CircuitError("piecewise_linear times must be strictly increasing")

    def value(self, t: float) -> float:
        pts = self.points
        if t <= pts[0][0]:
            return pts[0][1]
        if t >= pts[-1][0]:
            return pts[-1][1]
        for (t1, v1), (t2, v2) in zip(pts, pts[1:]):
            if t <= t2:
                return v1 + (v2 - v1) * (t - t1) / (t2 - t1)
        return pts[-1][1]

    def breakpoints(self) -> list[float]:
        return [t for t, _ in self.points]


Waveform = Dc | SquareTrain | PiecewiseLinear


# ---------------------------------------------------------------------------
# Elements
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Junction:
    name: str
    a: str
    b: str
    params: JosephsonJunctionParams

    def nodes(self) -> tuple[str, ...]:
        return (self.a, self.b)


@dataclass(frozen=True)
class Inductor:
    name: str
    a: str
    b: str
    inductance: float

    def __post_init__(self) -> None:
        _require_positive(self.inductance, f"inductance of {self.name}")

    def nodes(self) -> tuple[str, ...]:
        return (self.a, self.b)


@dataclass(frozen=True)
class Resistor:
    name: str
    a: str
    b: str
    resistance: float

    def __post_init__(self) -> None:
        _require_positive(self.resistance, f"resistance of {self.name}")

    def nodes(self) -> tuple[str, ...]:
        return (self.a, self.b)


@dataclass(frozen=True)
class Mutual:
    """Mutual inductance between two named inductors.  ``mutual`` is signed
    and in henries; it does not occupy nodes of its own."""

    name: str
    inductor_a: str
    inductor_b: str
    mutual: float

    def __post_init__(self) -> None:
        if self.mutual == 0.0 or not math.isfinite(self.mutual):
            raise CircuitError(f"mutual of {self.name} must be nonzero and finite")

    def nodes(self) -> tuple[str, ...]:
        return ()


@dataclass(frozen=True)
class CurrentSource:
    name: str
    a: str
    b: str
    waveform: Waveform

    def nodes(self) -> tuple[str, ...]:
        return (self.a, self.b)


@dataclass(frozen=True)
class Spd:
    name: str
    a: str
    b: str
    params: SpdParams

    def nodes(self) -> tuple[str, ...]:
        return (self.a, self.b)


Element = Junction | Inductor | Resistor | Mutual | CurrentSource | Spd


# ---------------------------------------------------------------------------
# Netlist
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TransientSpec:
    """Transient analysis request: maximum step, stop time, and the output
    decimation factor (record every Nth accepted step)."""

    dt_max: float
    t_stop: float
    output_decimation: int = 1

    def __post_init__(self) -> None:
        _require_positive(self.dt_max, "dt_max")
        _require_positive(self.t_stop, "t_stop")
        if self.output_decimation < 1:
            raise CircuitError("output_decimation must be >= 1")


@dataclass(frozen=True)
class Netlist:
    """A circuit: declared nodes, ordered elements, optional analysis spec."""

    nodes: frozenset[str]
    elements: tuple[Element, ...]
    analysis: TransientSpec | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "nodes", frozenset(self.nodes) | {GROUND})
        object.__setattr__(self, "elements", tuple(self.elements))

    def element(self, name: str) -> Element:
        for el in self.elements:
            if el.name == name:
                return el
        raise KeyError(name)

    def of_type(self, cls: type) -> Iterator[Element]:
        return (el for el in self.elements if isinstance(el, cls))

    def with_analysis(self, analysis: TransientSpec) -> "Netlist":
        return replace(self, analysis=analysis)


def validate_netlist(netlist: Netlist) -> list[str]:
    """Collect every rule violation in ``netlist``; an empty list means valid.

    Checks: terminal references, duplicate names, mutual references and
    coupling bounds, and connectivity of every node to ground.  The result
    order is deterministic for identical inputs.
    """
    diags: list[str] = []
    seen: set[str] = set()
    inductors = {el.name: el for el in netlist.of_type(Inductor)}

    for el in netlist.elements:
        if el.name in seen:
            diags.append(f"duplicate element name {el.name}")
        seen.add(el.name)
        for node in el.nodes():
            if node not in netlist.nodes:
                diags.append(f"undeclared node {node} on element {el.name}")

    for el in netlist.of_type(Mutual):
        missing = [n for n in (el.inductor_a, el.inductor_b) if n not in inductors]
        for n in missing:
            diags.append(f"mutual {el.name} references unknown inductor {n}")
        if el.inductor_a == el.inductor_b:
            diags.append(f"mutual {el.name} couples inductor {el.inductor_a} to itself")
        if not missing and el.inductor_a != el.inductor_b:
            la = inductors[el.inductor_a].inductance
            lb = inductors[el.inductor_b].inductance
            if abs(el.mutual) > math.sqrt(la * lb) * (1.0 + 1e-12):
                diags.append(
                    f"unphysical coupling: mutual {el.name} has |M| > sqrt(La*Lb)"
                )

    # Every node must reach ground through element terminals.
    adjacency: dict[str, set[str]] = {n: set() for n in netlist.nodes}
    for el in netlist.elements:
        nn = el.nodes()
        if len(nn) == 2:
            adjacency[nn[0]].add(nn[1])
            adjacency[nn[1]].add(nn[0])
    reached = {GROUND}
    frontier = [GROUND]
    while frontier:
        node = frontier.pop()
        for other in adjacency.get(node, ()):
            if other not in reached:
                reached.add(other)
                frontier.append(other)
    for node in sorted(netlist.nodes - reached):
        diags.append(f"disconnected subgraph: node {node} has no path to ground")

    return diags


# ---------------------------------------------------------------------------
# Incremental construction helper used by the circuit builders
# ---------------------------------------------------------------------------

@dataclass
class NetlistBuilder:
    """Mutable accumulator for building a :class:`Netlist` element by element."""

    elements: list[Element] = field(default_factory=list)
    analysis: TransientSpec | None = None

    def add(self, element: Element) -> Element:
        self.elements.append(element)
        return element

    def junction(self, name: str, a: str, b: str,
                 params: JosephsonJunctionParams) -> Junction:
        return self.add(Junction(name, a, b, params))

    def inductor(self, name: str, a: str, b: str, inductance: float) -> Inductor:
        return self.add(Inductor(name, a, b, inductance))

    def resistor(self, name: str, a: str, b: str, resistance: float) -> Resistor:
        return self.add(Resistor(name, a, b, resistance))

    def mutual(self, name: str, inductor_a: str, inductor_b: str,
               mutual: float) -> Mutual:
        return self.add(Mutual(name, inductor_a, inductor_b, mutual))

    def source(self, name: str, a: str, b: str, waveform: Waveform) -> CurrentSource:
        return self.add(CurrentSource(name, a, b, waveform))

    def spd(self, name: str, a: str, b: str, params: SpdParams) -> Spd:
        return self.add(Spd(name, a, b, params))

    def coupled_pair(self, name: str, la: Inductor, lb: Inductor, k: float) -> Mutual:
        """Couple two already-added inductors with coupling coefficient ``k``."""
        m = k * math.sqrt(la.inductance * lb.inductance)
        return self.mutual(name, la.name, lb.name, m)

    def build(self, analysis: TransientSpec | None = None) -> Netlist:
        nodes = {n for el in self.elements for n in el.nodes()}
        return Netlist(nodes=frozenset(nodes), elements=tuple(self.elements),
                       analysis=analysis or self.analysis)
