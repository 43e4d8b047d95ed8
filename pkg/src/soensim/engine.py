"""Transient simulation in node-phase formulation.

Unknowns are the node phases ``phi`` (ground excluded; node voltage is
``PHI0_2PI * dphi/dt``) plus one branch current per inductor and per
single-photon detector.  In this formulation an inductor is an algebraic
element (``L*i = PHI0_2PI * dphi``), so flux conservation around
superconducting loops holds to solver precision and fluxon bookkeeping
reduces to integer winding counts of junction phases.

Integration is trapezoidal with analytic-Jacobian Newton iteration at each
step.  The step size shrinks when Newton fails or when any junction phase
advances more than pi/8 in one step, and recovers toward ``dt_max``
otherwise.  DC sources are ramped in smoothly over ``ramp_time`` before
t = 0 so experiments start from a biased steady state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .circuit import (
    GROUND,
    CurrentSource,
    Dc,
    Inductor,
    Junction,
    Mutual,
    Netlist,
    Resistor,
    Spd,
    validate_netlist,
)
from .constants import PHI0, PHI0_2PI

DT_MIN = 1e-18
PHASE_ADVANCE_LIMIT = math.pi / 8.0
# A junction is credited with a winding once its phase has come within pi/4
# of the next potential well; the wide hysteresis band prevents double
# counting from post-slip plasma ringing.
WINDING_THRESHOLD = 2.0 * math.pi - math.pi / 4.0

# Row/column scales used to equilibrate the Newton system (KCL rows in
# ampere, flux rows in weber, detector rows in volt; currents in ampere).
_SCALE_CURRENT = 1e-6
_SCALE_FLUX = PHI0
_SCALE_VOLT = 1e-6
_TOL_KCL = 1e-13       # A
_TOL_FLUX = 1e-6 * PHI0
_TOL_VOLT = 1e-13      # V
_TOL_DPHASE = 1e-9     # rad
_TOL_DCURRENT = 1e-15  # A
_MAX_NEWTON_ITER = 15


class AssemblyError(Exception):
    """Raised when a netlist cannot be turned into a solvable system."""


class IntegrationError(Exception):
    """Raised when the transient integration cannot proceed."""

    def __init__(self, message: str, time: float):
        super().__init__(f"{message} (t = {time:.6e} s)")
        self.time = time


@dataclass(frozen=True)
class FluxonEvent:
    element: str
    time: float
    polarity: int


class Trace:
    """Recorded time series of a transient run plus detected fluxon events."""

    def __init__(self, node_names, junction_names, inductor_names, spd_names,
                 times, phi, vnode, jdelta, jcurrent, i_inductor, i_spd, events):
        self.node_names = list(node_names)
        self.junction_names = list(junction_names)
        self.inductor_names = list(inductor_names)
        self.spd_names = list(spd_names)
        self.times = times
        self.phi = phi
        self.vnode = vnode
        self.jdelta = jdelta
        self.jcurrent = jcurrent
        self.i_inductor = i_inductor
        self.i_spd = i_spd
        self.events = list(events)
        self._node_idx = {n: i for i, n in enumerate(self.node_names)}
        self._junction_idx = {n: i for i, n in enumerate(self.junction_names)}
        self._inductor_idx = {n: i for i, n in enumerate(self.inductor_names)}
        self._spd_idx = {n: i for i, n in enumerate(self.spd_names)}

    # -- probe lookups ------------------------------------------------------

    def node_phase(self, node: str) -> np.ndarray:
        if node == GROUND:
            return np.zeros_like(self.times)
        return self.phi[:, self._node_idx[node]]

    def node_voltage(self, node: str) -> np.ndarray:
        if node == GROUND:
            return np.zeros_like(self.times)
        return self.vnode[:, self._node_idx[node]]

    def junction_phase(self, name: str) -> np.ndarray:
        return self.jdelta[:, self._junction_idx[name]]

    def junction_current(self, name: str) -> np.ndarray:
        return self.jcurrent[:, self._junction_idx[name]]

    def inductor_current(self, name: str) -> np.ndarray:
        return self.i_inductor[:, self._inductor_idx[name]]

    def spd_current(self, name: str) -> np.ndarray:
        return self.i_spd[:, self._spd_idx[name]]

    def branch_current(self, name: str) -> np.ndarray:
        if name in self._inductor_idx:
            return self.inductor_current(name)
        if name in self._junction_idx:
            return self.junction_current(name)
        if name in self._spd_idx:
            return self.spd_current(name)
        raise KeyError(f"no probed branch named {name}")

    def has_element(self, name: str) -> bool:
        return (name in self._inductor_idx or name in self._junction_idx
                or name in self._spd_idx)

    # -- quiescence ---------------------------------------------------------

    def quiescent_mask(self, v_threshold: float = 1e-9,
                       window: float = 1e-10) -> np.ndarray:
        """Samples where every node voltage stayed below ``v_threshold`` and
        no fluxon event occurred over the trailing ``window`` seconds."""
        calm = np.all(np.abs(self.vnode) < v_threshold, axis=1)
        bad_t = np.where(calm, -np.inf, self.times)
        last_bad = np.maximum.accumulate(bad_t)
        mask = (last_bad <= self.times - window)
        mask &= self.times - self.times[0] >= window
        if self.events:
            ev = np.sort(np.array([e.time for e in self.events]))
            idx = np.searchsorted(ev, self.times, side="right")
            last_ev = np.where(idx > 0, ev[np.maximum(idx - 1, 0)], -np.inf)
            mask &= last_ev <= self.times - window
        return mask

    def last_quiescent_value(self, series: np.ndarray,
                             v_threshold: float = 1e-9,
                             window: float = 1e-10) -> float:
        """Mean of ``series`` over the final quiescent stretch of the trace."""
        mask = self.quiescent_mask(v_threshold, window)
        if not mask.any():
            raise ValueError("trace has no quiescent window")
        idx = len(mask) - 1
        if not mask[idx]:
            idx = int(np.nonzero(mask)[0][-1])
        lo = idx
        while lo > 0 and mask[lo - 1]:
            lo -= 1
        return float(np.mean(series[lo:idx + 1]))

    # -- CSV export ---------------------------------------------------------

    def column_names(self) -> list[str]:
        cols = ["time"]
        cols += [f"phi({n})" for n in self.node_names]
        cols += [f"v({n})" for n in self.node_names]
        cols += [f"delta({n})" for n in self.junction_names]
        cols += [f"i({n})" for n in self.junction_names]
        cols += [f"i({n})" for n in self.inductor_names]
        cols += [f"i({n})" for n in self.spd_names]
        return cols

    def to_matrix(self) -> np.ndarray:
        return np.column_stack([self.times, self.phi, self.vnode,
                                self.jdelta, self.jcurrent,
                                self.i_inductor, self.i_spd])

    def write_csv(self, path) -> None:
        header = ",".join(self.column_names())
        np.savetxt(path, self.to_matrix(), fmt="%.9g", delimiter=",",
                   header=header, comments="")

    def write_events_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("element,time,polarity\n")
            for ev in self.events:
                fh.write(f"{ev.element},{ev.time:.9g},{ev.polarity:d}\n")


# ---------------------------------------------------------------------------
# Assembly
# ---------------------------------------------------------------------------

class SimSystem:
    """A netlist compiled to index arrays and incidence matrices.

    One phase unknown per non-ground node, one current unknown per inductor
    and per SPD.  Mutually-coupled inductors share a dense inductance matrix
    whose blocks are checked for positive definiteness at assembly.
    """

    def __init__(self, netlist: Netlist):
        diags = validate_netlist(netlist)
        if diags:
            raise AssemblyError("netlist does not validate: " + "; ".join(diags))
        self.netlist = netlist

        self.node_names = sorted(netlist.nodes - {GROUND})
        self.n_phi = len(self.node_names)
        node_index = {n: i for i, n in enumerate(self.node_names)}
        node_index[GROUND] = -1

        self.junctions = list(netlist.of_type(Junction))
        self.inductors = list(netlist.of_type(Inductor))
        self.resistors = list(netlist.of_type(Resistor))
        self.sources = list(netlist.of_type(CurrentSource))
        self.spds = list(netlist.of_type(Spd))
        self.junction_names = [el.name for el in self.junctions]
        self.inductor_names = [el.name for el in self.inductors]
        self.spd_names = [el.name for el in self.spds]

        self.n_j = len(self.junctions)
        self.n_l = len(self.inductors)
        self.n_s = len(self.spds)
        self.n_x = self.n_phi + self.n_l + self.n_s

        def incidence(elements) -> np.ndarray:
            a = np.zeros((self.n_phi, len(elements)))
            for j, el in enumerate(elements):
                ia, ib = node_index[el.a], node_index[el.b]
                if ia >= 0:
                    a[ia, j] += 1.0
                if ib >= 0:
                    a[ib, j] -= 1.0
            return a

        self.a_junction = incidence(self.junctions)
        self.a_resistor = incidence(self.resistors)
        self.a_inductor = incidence(self.inductors)
        self.a_source = incidence(self.sources)
        self.a_spd = incidence(self.spds)

        self.j_ic = np.array([el.params.ic for el in self.junctions])
        self.j_g = np.array([PHI0_2PI / el.params.shunt_r for el in self.junctions])
        self.j_c = np.array([PHI0_2PI * el.params.capacitance for el in self.junctions])
        self.r_g = np.array([PHI0_2PI / el.resistance for el in self.resistors])

        self.lmat = self._inductance_matrix(netlist)

        self.dc_mask = np.array([isinstance(el.waveform, Dc)
                                 for el in self.sources], dtype=bool)
        self.waveforms = [el.waveform for el in self.sources]
        self.spd_params = [el.params for el in self.spds]

        # Row and column equilibration for the Newton solve.
        self.row_scale = np.concatenate([
            np.full(self.n_phi, _SCALE_CURRENT),
            np.full(self.n_l, _SCALE_FLUX),
            np.full(self.n_s, _SCALE_VOLT)])
        self.col_scale = np.concatenate([
            np.ones(self.n_phi),
            np.full(self.n_l + self.n_s, _SCALE_CURRENT)])
        self.res_tol = np.concatenate([
            np.full(self.n_phi, _TOL_KCL),
            np.full(self.n_l, _TOL_FLUX),
            np.full(self.n_s, _TOL_VOLT)])
        self.dx_tol = np.concatenate([
            np.full(self.n_phi, _TOL_DPHASE),
            np.full(self.n_l + self.n_s, _TOL_DCURRENT)])

    def _inductance_matrix(self, netlist: Netlist) -> np.ndarray:
        idx = {el.name: i for i, el in enumerate(self.inductors)}
        lmat = np.zeros((self.n_l, self.n_l))
        for i, el in enumerate(self.inductors):
            lmat[i, i] = el.inductance
        neighbors: dict[int, set[int]] = {i: set() for i in range(self.n_l)}
        for el in netlist.of_type(Mutual):
            i, j = idx[el.inductor_a], idx[el.inductor_b]
            lmat[i, j] += el.mutual
            lmat[j, i] += el.mutual
            neighbors[i].add(j)
            neighbors[j].add(i)
        # Positive definiteness per coupled block.
        unvisited = set(range(self.n_l))
        while unvisited:
            seed = min(unvisited)
            block = {seed}
            frontier = [seed]
            while frontier:
                k = frontier.pop()
                for other in neighbors[k]:
                    if other not in block:
                        block.add(other)
                        frontier.append(other)
            unvisited -= block
            if len(block) > 1:
                sel = sorted(block)
                sub = lmat[np.ix_(sel, sel)]
                eigmin = float(np.linalg.eigvalsh(sub)[0])
                if eigmin <= 1e-12 * float(np.max(np.abs(sub))):
                    names = ", ".join(self.inductors[k].name for k in sel)
                    raise AssemblyError(f"singular inductance block: {names}")
        return lmat

    def source_currents(self, t: float, ramp_time: float) -> np.ndarray:
        vals = np.array([wf.value(t) for wf in self.waveforms])
        if ramp_time > 0.0 and t < 0.0 and self.dc_mask.any():
            u = min(1.0, max(0.0, (t + ramp_time) / ramp_time))
            vals[self.dc_mask] *= u * u * (3.0 - 2.0 * u)
        return vals

    def spd_resistances(self, t: float) -> np.ndarray:
        return np.array([p.resistance(t) for p in self.spd_params])

    def breakpoints(self, t_start: float, t_stop: float) -> np.ndarray:
        pts = {0.0, t_stop}
        for wf in self.waveforms:
            pts.update(wf.breakpoints())
        for p in self.spd_params:
            pts.update(p.breakpoints())
        arr = np.array(sorted(p for p in pts if t_start < p <= t_stop))
        return arr


def assemble(netlist: Netlist) -> SimSystem:
    """Compile a validated netlist into a simulation system."""
    return SimSystem(netlist)


# ---------------------------------------------------------------------------
# Time stepping
# ---------------------------------------------------------------------------

class _Recorder:
    """Row buffer that grows geometrically; avoids per-step list overhead."""

    def __init__(self, width: int):
        self.buf = np.empty((1024, width))
        self.n = 0

    def append(self, row: np.ndarray) -> None:
        if self.n == len(self.buf):
            self.buf = np.vstack([self.buf, np.empty_like(self.buf)])
        self.buf[self.n] = row
        self.n += 1

    def data(self) -> np.ndarray:
        return self.buf[:self.n].copy()


def run_transient(system: SimSystem, t_stop: float, dt_max: float, *,
                  ramp_time: float = 5e-9,
                  output_decimation: int = 1,
                  newton_max_iter: int = _MAX_NEWTON_ITER) -> Trace:
    """Integrate the system from a zero state through the DC ramp to ``t_stop``.

    Records every ``output_decimation``-th accepted step (plus the first and
    last).  Fluxon events are detected on every accepted step regardless of
    decimation.  Raises :class:`IntegrationError` if Newton iteration still
    fails at the minimum step size or the state leaves the finite range.
    """
    if not t_stop > 0.0:
        raise ValueError("t_stop must be positive")
    if not dt_max > 0.0:
        raise ValueError("dt_max must be positive")

    n_phi, n_l, n_s, n_j = system.n_phi, system.n_l, system.n_s, system.n_j
    n_x = system.n_x
    sl_phi = slice(0, n_phi)
    sl_il = slice(n_phi, n_phi + n_l)
    sl_is = slice(n_phi + n_l, n_x)

    a_j = system.a_junction
    a_jt = a_j.T
    a_r = system.a_resistor
    a_rt = a_r.T
    a_l = system.a_inductor
    a_lt = a_l.T
    a_s = system.a_spd
    a_st = a_s.T
    a_i = system.a_source
    lmat = system.lmat

    t = -abs(ramp_time)
    x = np.zeros(n_x)
    phid = np.zeros(n_phi)
    phidd = np.zeros(n_phi)
    jd_prev = np.zeros(n_j)
    winding = np.zeros(n_j, dtype=np.int64)
    events: list[FluxonEvent] = []

    bps = system.breakpoints(t, t_stop)
    bp_idx = 0

    width = 1 + 2 * n_phi + 2 * n_j + n_l + n_s
    rec = _Recorder(width)

    def record() -> None:
        phi = x[sl_phi]
        jd = a_jt @ phi
        jdd = a_jt @ phid
        jddd = a_jt @ phidd
        jcur = system.j_ic * np.sin(jd) + system.j_g * jdd + system.j_c * jddd
        row = np.concatenate(([t], phi, PHI0_2PI * phid, jd, jcur,
                              x[sl_il], x[sl_is]))
        rec.append(row)

    record()

    scale = np.outer(1.0 / system.row_scale, system.col_scale)
    res_tol = system.res_tol
    dx_tol = system.dx_tol

    h_nominal = dt_max
    jac_h = -1.0
    jac_const = np.empty((n_x, n_x))

    def build_const_jacobian(h: float) -> None:
        c1 = 2.0 / h
        jac_const.fill(0.0)
        wj = system.j_g * c1 + system.j_c * c1 * c1
        jac_const[sl_phi, sl_phi] = (a_j * wj) @ a_jt
        if a_r.shape[1]:
            jac_const[sl_phi, sl_phi] += (a_r * (system.r_g * c1)) @ a_rt
        jac_const[sl_phi, sl_il] = a_l
        jac_const[sl_phi, sl_is] = a_s
        jac_const[sl_il, sl_phi] = -PHI0_2PI * a_lt
        jac_const[sl_il, sl_il] = lmat
        if n_s:
            jac_const[sl_is, sl_phi] = PHI0_2PI * c1 * a_st

    steps_accepted = 0
    step_error_time = None
    t_end_eps = max(1e-21, 1e-6 * dt_max)

    while t < t_stop - t_end_eps:
        while bp_idx < len(bps) and bps[bp_idx] <= t + 1e-18:
            bp_idx += 1
        h = min(h_nominal, t_stop - t)
        if bp_idx < len(bps):
            h = min(h, bps[bp_idx] - t)
        dynamics_limited = False

        accepted = False
        while not accepted:
            if h < DT_MIN:
                raise IntegrationError("Newton iteration failed at minimum step",
                                       step_error_time if step_error_time is not None else t)
            t_new = t + h
            c1 = 2.0 / h
            if h != jac_h:
                build_const_jacobian(h)
                jac_h = h
            i_src = system.source_currents(t_new, ramp_time)
            b_src = a_i @ i_src
            r_spd = system.spd_resistances(t_new) if n_s else np.empty(0)

            phi_old = x[sl_phi]
            # Quadratic predictor for phases, last value for currents.
            x_new = x.copy()
            x_new[sl_phi] = phi_old + h * phid + 0.5 * h * h * phidd

            converged = False
            for _ in range(newton_max_iter):
                phi_n = x_new[sl_phi]
                phid_n = c1 * (phi_n - phi_old) - phid
                phidd_n = c1 * (phid_n - phid) - phidd

                jd = a_jt @ phi_n
                jdd = a_jt @ phid_n
                jddd = a_jt @ phidd_n
                jcur = system.j_ic * np.sin(jd) + system.j_g * jdd + system.j_c * jddd

                res = np.empty(n_x)
                kcl = a_j @ jcur + a_l @ x_new[sl_il] + b_src
                if n_s:
                    kcl += a_s @ x_new[sl_is]
                if a_r.shape[1]:
                    kcl += a_r @ (system.r_g * (a_rt @ phid_n))
                res[sl_phi] = kcl
                res[sl_il] = lmat @ x_new[sl_il] - PHI0_2PI * (a_lt @ phi_n)
                if n_s:
                    res[sl_is] = (PHI0_2PI * (a_st @ phid_n)
                                  - r_spd * x_new[sl_is])

                if not np.all(np.isfinite(res)):
                    break

                jac = jac_const.copy()
                jac[sl_phi, sl_phi] += (a_j * (system.j_ic * np.cos(jd))) @ a_jt
                if n_s:
                    jac[sl_is, sl_is] -= np.diag(r_spd)

                try:
                    dy = np.linalg.solve(jac * scale, -res / system.row_scale)
                except np.linalg.LinAlgError:
                    break
                dx = dy * system.col_scale
                x_new += dx

                if np.max(np.abs(res) / res_tol) < 1.0:
                    converged = True
                    break
                if np.max(np.abs(dx) / dx_tol) < 1.0 and np.all(np.isfinite(x_new)):
                    converged = True
                    break

            if not converged or not np.all(np.isfinite(x_new)):
                step_error_time = t_new
                h *= 0.25
                dynamics_limited = True
                continue

            jd_new = a_jt @ x_new[sl_phi]
            advance = float(np.max(np.abs(jd_new - jd_prev))) if n_j else 0.0
            if advance > PHASE_ADVANCE_LIMIT:
                h *= max(0.25, min(0.8, 0.8 * PHASE_ADVANCE_LIMIT / advance))
                dynamics_limited = True
                continue

            # Accept the step.
            phi_n = x_new[sl_phi]
            phid_new = c1 * (phi_n - phi_old) - phid
            phidd_new = c1 * (phid_new - phid) - phidd
            x = x_new
            phid = phid_new
            phidd = phidd_new
            t = t_new
            accepted = True

            if n_j:
                rel = jd_new - 2.0 * math.pi * winding
                stepped = np.where(rel > WINDING_THRESHOLD, 1,
                                   np.where(rel < -WINDING_THRESHOLD, -1, 0))
                if stepped.any():
                    for k in np.nonzero(stepped)[0]:
                        events.append(FluxonEvent(system.junction_names[k],
                                                  t, int(stepped[k])))
                    winding += stepped
            jd_prev = jd_new

            steps_accepted += 1
            if steps_accepted % output_decimation == 0:
                record()

            # Step-size recovery: a step shrunk by convergence or phase
            # advance resets the nominal size; one clipped to a breakpoint
            # does not.
            base = h if dynamics_limited else h_nominal
            if advance < 0.5 * PHASE_ADVANCE_LIMIT:
                h_nominal = min(dt_max, base * 1.25)
            else:
                h_nominal = base

    if rec.n == 0 or rec.buf[rec.n - 1, 0] < t:
        record()

    times = rec.data()
    # Layout must match record(): t | phi | v | jdelta | jcur | iL | iS
    o1 = 1
    o2 = o1 + n_phi
    o3 = o2 + n_phi
    o4 = o3 + n_j
    o5 = o4 + n_j
    o6 = o5 + n_l
    return Trace(
        node_names=system.node_names,
        junction_names=system.junction_names,
        inductor_names=system.inductor_names,
        spd_names=system.spd_names,
        times=times[:, 0],
        phi=times[:, o1:o2],
        vnode=times[:, o2:o3],
        jdelta=times[:, o3:o4],
        jcurrent=times[:, o4:o5],
        i_inductor=times[:, o5:o6],
        i_spd=times[:, o6:],
        events=events,
    )


def simulate(netlist: Netlist, t_stop: float | None = None,
             dt_max: float | None = None, **kwargs) -> Trace:
    """Assemble and run a netlist, defaulting to its own analysis spec."""
    if netlist.analysis is not None:
        t_stop = t_stop if t_stop is not None else netlist.analysis.t_stop
        dt_max = dt_max if dt_max is not None else netlist.analysis.dt_max
        kwargs.setdefault("output_decimation", netlist.analysis.output_decimation)
    if t_stop is None or dt_max is None:
        raise ValueError("t_stop and dt_max required (netlist has no analysis spec)")
    return run_transient(assemble(netlist), t_stop, dt_max, **kwargs)


# ---------------------------------------------------------------------------
# Trace-level measurements
# ---------------------------------------------------------------------------

def count_fluxons(trace: Trace, element: str) -> int:
    """Net number of 2*pi windings of a junction between trace endpoints."""
    try:
        jd = trace.junction_phase(element)
    except KeyError:
        raise KeyError(f"junction {element} is not probed in this trace") from None
    return int(round((jd[-1] - jd[0]) / (2.0 * math.pi)))


def loop_current(trace: Trace, inductor: str) -> np.ndarray:
    """Branch current through a named inductor versus time."""
    try:
        return trace.inductor_current(inductor)
    except KeyError:
        raise KeyError(f"inductor {inductor} is not probed in this trace") from None


def flux_quantization_report(system: SimSystem, trace: Trace,
                             sample: int = -1) -> list[dict]:
    """Fluxoid balance of every purely superconducting loop at one sample.

    Loops are fundamental cycles of the inductor+junction subgraph (branches
    through resistors, sources, or SPDs are not quantized).  Junction phases
    enter wrapped to their nearest potential well; inductor flux includes
    mutual contributions.  Each entry reports the nearest integer fluxon
    count and the deviation from perfect quantization in weber.
    """
    edges = []
    for i, el in enumerate(system.inductors):
        edges.append((el.a, el.b, ("L", i, el.name)))
    for i, el in enumerate(system.junctions):
        edges.append((el.a, el.b, ("J", i, el.name)))

    adjacency: dict[str, list[int]] = {}
    for k, (a, b, _) in enumerate(edges):
        adjacency.setdefault(a, []).append(k)
        adjacency.setdefault(b, []).append(k)

    node_parent: dict[str, tuple[str, int, int] | None] = {}
    tree_edges: set[int] = set()
    cycles: list[list[tuple[int, int]]] = []

    for root in adjacency:
        if root in node_parent:
            continue
        node_parent[root] = None
        stack = [root]
        while stack:
            node = stack.pop()
            for k in adjacency[node]:
                a, b, _ = edges[k]
                other = b if node == a else a
                sign = 1 if node == a else -1
                if other not in node_parent:
                    node_parent[other] = (node, k, sign)
                    tree_edges.add(k)
                    stack.append(other)

    def path_to_root(node: str) -> list[tuple[int, int]]:
        path = []
        while node_parent[node] is not None:
            parent, k, sign = node_parent[node]
            path.append((k, -sign))
            node = parent
        return path

    for k, (a, b, _) in enumerate(edges):
        if k in tree_edges:
            continue
        pa = path_to_root(a)
        pb = path_to_root(b)
        common = {e for e, _ in pa} & {e for e, _ in pb}
        pa = [(e, s) for e, s in pa if e not in common]
        pb = [(e, s) for e, s in pb if e not in common]
        # Traverse the chord a->b, climb from b to the common ancestor, then
        # descend (reversed, sign-flipped) to a.
        cycle = [(k, 1)] + pb + [(e, -s) for e, s in pa][::-1]
        cycles.append(cycle)

    lam = system.lmat @ trace.i_inductor[sample] if system.n_l else np.empty(0)
    jd = trace.jdelta[sample] if system.n_j else np.empty(0)
    jd_wrapped = jd - 2.0 * math.pi * np.round(jd / (2.0 * math.pi))

    report = []
    for cycle in cycles:
        flux = 0.0
        names = []
        for k, sign in cycle:
            kind, idx, name = edges[k][2]
            names.append(name)
            if kind == "L":
                flux += sign * lam[idx]
            else:
                flux += sign * PHI0_2PI * jd_wrapped[idx]
        n = int(round(flux / PHI0))
        report.append({
            "elements": names,
            "fluxons": n,
            "flux": flux,
            "deviation": abs(flux - n * PHI0),
        })
    return report
