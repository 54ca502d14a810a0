"""Pulse envelopes, time evolution (unitary and Lindblad), gate protocols.

All simulations here run on the effective two-qubit model (fluxonium x
transmon) in a truncated Fock space, with the time axis in ns and energies
in GHz; the 2*pi lives only in the propagator exponent.  The integrator is
a fixed-step midpoint exponential: deterministic, norm-preserving, exact on
piecewise-constant segments.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm
from scipy.special import erf

from .circuit import CircuitSpec
from .effective import EffectiveModel, effective_parameters, find_zero_coupling
from .errors import (
    CalibrationWarning,
    DimensionError,
    PhysicalityError,
    PositivityWarning,
    RootBracketError,
    StepSizeError,
)
from .hamiltonian import Operator, destroy

TWO_PI = 2.0 * math.pi
STEP_RULE = 0.1          # max 2*pi*||H||*dt allowed by the integrator
NORM_TOL = 1e-9

PULSE_KINDS = ("gaussian", "rectangular", "erf-square")
PULSE_TARGETS = ("fluxonium-drive", "transmon-drive", "coupler-flux", "fluxonium-flux", "readout")


@dataclass(frozen=True)
class PulseEnvelope:
    """Time-domain control pulse.

    amplitude in MHz (signed), carrier in GHz (0 for baseband flux pulses),
    phase in radians, start/duration in ns.  Gaussian pulses are truncated
    at the window edges (sigma defaults to duration/6); erf-square edges
    are centered on the window boundaries so the pulse area is exactly
    amplitude * duration.
    """

    kind: str
    amplitude_mhz: float
    duration_ns: float
    start_ns: float = 0.0
    carrier_ghz: float = 0.0
    phase: float = 0.0
    sigma_ns: float | None = None
    edge_ns: float = 1.0
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in PULSE_KINDS:
            raise ValueError(f"kind must be one of {PULSE_KINDS}")
        if self.duration_ns <= 0:
            raise ValueError("duration must be positive")
        if self.kind == "gaussian" and self.sigma <= 0:
            raise ValueError("gaussian sigma must be positive")

    @property
    def sigma(self) -> float:
        return self.sigma_ns if self.sigma_ns is not None else self.duration_ns / 6.0

    @property
    def end_ns(self) -> float:
        return self.start_ns + self.duration_ns

    def shape(self, t):
        """Dimensionless envelope s(t) in [0, 1]."""
        t = np.asarray(t, dtype=float)
        if self.kind == "rectangular":
            return np.where((t >= self.start_ns) & (t < self.end_ns), 1.0, 0.0)
        if self.kind == "gaussian":
            mid = self.start_ns + 0.5 * self.duration_ns
            s = np.exp(-0.5 * ((t - mid) / self.sigma) ** 2)
            return np.where((t >= self.start_ns) & (t <= self.end_ns), s, 0.0)
        w = self.edge_ns / math.sqrt(2.0)
        s = 0.5 * (erf((t - self.start_ns) / w) - erf((t - self.end_ns) / w))
        support = (t > self.start_ns - 5 * self.edge_ns) & (t < self.end_ns + 5 * self.edge_ns)
        return np.where(support, s, 0.0)

    def area_ns(self) -> float:
        """Integral of the dimensionless envelope over its support."""
        if self.kind == "rectangular":
            return self.duration_ns
        if self.kind == "erf-square":
            # antisymmetric edges centered on the boundaries cancel exactly
            return self.duration_ns
        ts = np.linspace(self.start_ns, self.end_ns, 4001)
        return float(np.trapezoid(self.shape(ts), ts))


def envelope_eval(e: PulseEnvelope, t) -> float | np.ndarray:
    """Pulse value in MHz at time t, carrier applied when carrier > 0."""
    v = e.amplitude_mhz * e.shape(t)
    if e.carrier_ghz > 0:
        v = v * np.cos(TWO_PI * e.carrier_ghz * np.asarray(t, dtype=float) + e.phase)
    return v


@dataclass(frozen=True)
class PulseSequence:
    """Ordered control schedule: (target, envelope) entries."""

    entries: tuple[tuple[str, PulseEnvelope], ...]
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        for target, _ in self.entries:
            if target not in PULSE_TARGETS:
                raise ValueError(f"unknown pulse target {target!r}")

    @property
    def duration_ns(self) -> float:
        return max((e.end_ns for _, e in self.entries), default=0.0)

    def targets(self):
        return tuple(t for t, _ in self.entries)


@dataclass(frozen=True)
class QubitDriveOps:
    """Two-level Pauli operators of one mode embedded in the tensor space."""

    sigma_x: np.ndarray
    sigma_y: np.ndarray
    dims: tuple[int, ...]
    labels: tuple[str, ...]


def two_level_ops(dims: tuple[int, ...], which: int, labels=None) -> QubitDriveOps:
    """sigma_x, sigma_y on the 0-1 subspace of mode `which`, embedded."""
    d = dims[which]
    sx = np.zeros((d, d), complex)
    sx[0, 1] = sx[1, 0] = 1.0
    sy = np.zeros((d, d), complex)
    sy[0, 1] = -1j
    sy[1, 0] = 1j
    left = int(np.prod(dims[:which])) if which > 0 else 1
    right = int(np.prod(dims[which + 1:])) if which + 1 < len(dims) else 1
    embed = lambda m: np.kron(np.kron(np.eye(left), m), np.eye(right))
    if labels is None:
        labels = tuple(f"mode{i}" for i in range(len(dims)))
    return QubitDriveOps(embed(sx), embed(sy), tuple(dims), tuple(labels))


def drive_hamiltonian(qubit_ops: QubitDriveOps, e: PulseEnvelope, t: float) -> Operator:
    """Rotating-frame drive term -A s(t) (cos(phi) sx + sin(phi) sy), in GHz."""
    amp = 1e-3 * e.amplitude_mhz * float(e.shape(t))
    h = -amp * (math.cos(e.phase) * qubit_ops.sigma_x + math.sin(e.phase) * qubit_ops.sigma_y)
    return Operator(h, qubit_ops.dims, qubit_ops.labels)


@dataclass(frozen=True)
class Trajectory:
    """Stored time evolution: kets (n, dim) or density matrices (n, dim, dim)."""

    times: np.ndarray
    states: np.ndarray
    dims: tuple[int, ...]
    kind: str            # "ket" or "density"

    def _diag_populations(self) -> np.ndarray:
        if self.kind == "ket":
            return np.abs(self.states) ** 2
        return np.real(np.einsum("tii->ti", self.states))

    def populations(self) -> dict[str, np.ndarray]:
        """Computational-state populations and total leakage against time."""
        d1, d2 = self.dims
        p = self._diag_populations()
        comp = {
            "00": p[:, 0 * d2 + 0],
            "01": p[:, 0 * d2 + 1],
            "10": p[:, 1 * d2 + 0],
            "11": p[:, 1 * d2 + 1],
        }
        comp["leakage"] = 1.0 - sum(comp[k] for k in ("00", "01", "10", "11"))
        return comp

    def mode_populations(self, mode: int) -> np.ndarray:
        """Reduced level populations of one mode, shape (n, dims[mode])."""
        d1, d2 = self.dims
        p = self._diag_populations().reshape(-1, d1, d2)
        return p.sum(axis=2) if mode == 0 else p.sum(axis=1)

    def norms(self) -> np.ndarray:
        if self.kind == "ket":
            return np.linalg.norm(self.states, axis=1)
        return np.real(np.einsum("tii->t", self.states))

    def rows(self):
        pops = self.populations()
        for i, t in enumerate(self.times):
            yield [t, pops["00"][i], pops["01"][i], pops["10"][i], pops["11"][i], pops["leakage"][i]]

    def header(self):
        return ["t_ns", "P_00", "P_01", "P_10", "P_11", "leakage"]


def _check_step_rule(h_of_t, grid):
    grid = np.asarray(grid, dtype=float)
    if grid.size < 2:
        raise ValueError("grid needs at least two points")
    dt = float(np.max(np.diff(grid)))
    samples = np.linspace(grid[0], grid[-1], min(33, grid.size))
    hmax = max(float(np.linalg.norm(h_of_t(float(t)), 2)) for t in samples)
    if TWO_PI * hmax * dt >= STEP_RULE:
        raise StepSizeError(
            f"2*pi*||H||*dt = {TWO_PI * hmax * dt:.3f} >= {STEP_RULE}; "
            f"need dt < {STEP_RULE / (TWO_PI * hmax):.3e} ns"
        )
    return dt, hmax


class _StepCache:
    """expm cache keyed by the generator bytes; piecewise-constant schedules
    reuse one exponential per plateau."""

    def __init__(self, maxsize=128):
        self._data = {}
        self._maxsize = maxsize

    def get(self, gen: np.ndarray):
        key = gen.tobytes()
        u = self._data.get(key)
        if u is None:
            u = expm(gen)
            if len(self._data) < self._maxsize:
                self._data[key] = u
        return u


def _propagate_stack(h_of_t, psi0: np.ndarray, grid, store_every=1, step_keys=None):
    """Midpoint-exponential propagation of a (dim, m) stack of kets.

    step_keys, when given, assigns each step an integer key; steps sharing
    (key, dt) are known to have identical Hamiltonians and reuse one
    exponential without re-evaluating h_of_t (piecewise-constant schedules
    then cost one expm per plateau).
    """
    grid = np.asarray(grid, dtype=float)
    _check_step_rule(h_of_t, grid)
    psi = np.array(psi0, dtype=complex)
    single = psi.ndim == 1
    if single:
        psi = psi[:, None]
    cache = _StepCache()
    keyed: dict = {}
    stored_t = [grid[0]]
    stored = [psi.copy()]
    for i in range(grid.size - 1):
        dt = grid[i + 1] - grid[i]
        tm = 0.5 * (grid[i] + grid[i + 1])
        if step_keys is not None:
            kk = (int(step_keys[i]), dt)
            u = keyed.get(kk)
            if u is None:
                h = np.asarray(h_of_t(float(tm)), dtype=complex)
                h = 0.5 * (h + h.conj().T)
                u = expm(-2j * math.pi * dt * h)
                keyed[kk] = u
        else:
            h = np.asarray(h_of_t(float(tm)), dtype=complex)
            h = 0.5 * (h + h.conj().T)
            u = cache.get(-2j * math.pi * dt * h)
        psi = u @ psi
        if (i + 1) % store_every == 0 or i == grid.size - 2:
            stored_t.append(grid[i + 1])
            stored.append(psi.copy())
    times = np.asarray(stored_t)
    states = np.stack(stored)
    norms = np.linalg.norm(states, axis=1)
    if np.abs(norms - 1.0).max() > NORM_TOL:
        raise RuntimeError(f"norm drifted by {np.abs(norms - 1.0).max():.2e}")
    return times, (states[:, :, 0] if single else states)


def evolve_unitary(h_of_t, psi0, grid, *, store_every: int = 1, dims=None) -> Trajectory:
    """Norm-preserving Schrodinger evolution of a ket on a fixed grid.

    h_of_t(t) returns the Hamiltonian matrix (GHz) at time t (ns); the step
    uses the midpoint sample, so the grid must satisfy
    2*pi*||H||*dt < 0.1 (checked up front).
    """
    times, states = _propagate_stack(h_of_t, np.asarray(psi0, complex), grid, store_every)
    if dims is None:
        dims = (states.shape[1], 1)
    return Trajectory(times, states, tuple(dims), "ket")


def _lindblad_generator(h: np.ndarray, c_ops) -> np.ndarray:
    dim = h.shape[0]
    eye = np.eye(dim)
    gen = -2j * math.pi * (np.kron(h, eye) - np.kron(eye, h.T))
    for L in c_ops:
        LdL = L.conj().T @ L
        gen += np.kron(L, L.conj())
        gen -= 0.5 * (np.kron(LdL, eye) + np.kron(eye, LdL.T))
    return gen


def evolve_lindblad(h_of_t, rho0, collapse_ops, grid, *, store_every: int = 1, dims=None) -> Trajectory:
    """Master-equation evolution in Lindblad form.

    Collapse operators carry their rates (L = sqrt(gamma) * op, gamma in
    1/ns).  Each step exponentiates the superoperator at the midpoint, so
    the map is completely positive and trace preserving per step; the
    density matrix is re-symmetrized after every step.
    """
    rho = np.asarray(rho0, dtype=complex)
    if rho.ndim == 1:
        rho = np.outer(rho, rho.conj())
    dim = rho.shape[0]
    if dim > 24:
        raise DimensionError(f"Lindblad superoperator path capped at dim 24, got {dim}")
    grid = np.asarray(grid, dtype=float)
    _check_step_rule(h_of_t, grid)
    c_ops = [np.asarray(L, dtype=complex) for L in collapse_ops]
    cache = _StepCache()
    vec = rho.reshape(-1)
    stored_t = [grid[0]]
    stored = [rho.copy()]
    for i in range(grid.size - 1):
        dt = grid[i + 1] - grid[i]
        tm = 0.5 * (grid[i] + grid[i + 1])
        h = np.asarray(h_of_t(float(tm)), dtype=complex)
        h = 0.5 * (h + h.conj().T)
        vec = cache.get(_lindblad_generator(h, c_ops) * dt) @ vec
        rho = vec.reshape(dim, dim)
        rho = 0.5 * (rho + rho.conj().T)
        vec = rho.reshape(-1)
        if (i + 1) % store_every == 0 or i == grid.size - 2:
            stored_t.append(grid[i + 1])
            stored.append(rho.copy())
    states = np.stack(stored)
    traces = np.real(np.einsum("tii->t", states))
    if np.abs(traces - 1.0).max() > NORM_TOL:
        raise RuntimeError(f"trace drifted by {np.abs(traces - 1.0).max():.2e}")
    lowest = float(np.linalg.eigvalsh(states[-1]).min())
    if lowest < -1e-7:
        warnings.warn(f"density matrix eigenvalue {lowest:.2e} below -1e-7", PositivityWarning)
    if dims is None:
        dims = (dim, 1)
    return Trajectory(np.asarray(stored_t), states, tuple(dims), "density")


def collapse_ops_from_T(times_by_mode, dims, labels) -> list[np.ndarray]:
    """Amplitude-damping and pure-dephasing operators from (T1, T2) pairs.

    times_by_mode maps a mode label to (T1, T2) in ns (math.inf allowed).
    Damping enters as sqrt(1/T1) * a and dephasing as sqrt(2/T_phi) * n
    with 1/T_phi = 1/T2 - 1/(2 T1); T2 > 2*T1 is unphysical.
    """
    ops = []
    for label, (t1, t2) in times_by_mode.items():
        if label not in labels:
            raise ValueError(f"unknown mode label {label!r}")
        which = labels.index(label)
        gamma1 = 0.0 if math.isinf(t1) else 1.0 / t1
        gamma2 = 0.0 if math.isinf(t2) else 1.0 / t2
        if t2 > 2.0 * t1:
            raise PhysicalityError(f"{label}: T2={t2} > 2*T1={2 * t1}")
        gamma_phi = gamma2 - 0.5 * gamma1
        d = dims[which]
        left = int(np.prod(dims[:which])) if which > 0 else 1
        right = int(np.prod(dims[which + 1:])) if which + 1 < len(dims) else 1
        embed = lambda m: np.kron(np.kron(np.eye(left), m), np.eye(right))
        if gamma1 > 1e-30:
            ops.append(math.sqrt(gamma1) * embed(destroy(d)))
        if gamma_phi > 1e-30:
            nop = np.diag(np.arange(d, dtype=float)).astype(complex)
            ops.append(math.sqrt(2.0 * gamma_phi) * embed(nop))
    return ops


def iswap_unitary(g_mhz: float, t_ns: float) -> np.ndarray:
    """Exchange-generated unitary on (|00>,|01>,|10>,|11>); theta = 2 pi g t."""
    theta = TWO_PI * 1e-3 * g_mhz * t_ns
    c, s = math.cos(theta), math.sin(theta)
    return np.array(
        [
            [1, 0, 0, 0],
            [0, c, -1j * s, 0],
            [0, -1j * s, c, 0],
            [0, 0, 0, 1],
        ],
        dtype=complex,
    )


ISWAP = iswap_unitary(1.0, 250.0)  # theta = pi/2
X_HALF_PI = np.array([[1, -1j], [-1j, 1]], dtype=complex) / math.sqrt(2.0)


def _as_density(state: np.ndarray) -> np.ndarray:
    state = np.asarray(state, dtype=complex)
    if state.ndim == 1:
        return np.outer(state, state.conj())
    return state


def state_fidelity(rho, sigma) -> float:
    """Uhlmann fidelity tr sqrt(sqrt(rho) sigma sqrt(rho)); kets promoted."""
    r = _as_density(rho)
    s = _as_density(sigma)
    if r.shape != s.shape:
        raise ValueError("states live on different spaces")
    for m in (r, s):
        if abs(np.trace(m).real - 1.0) > 1e-6:
            raise ValueError(f"trace {np.trace(m).real} deviates from 1 beyond 1e-6")
    r = 0.5 * (r + r.conj().T)
    s = 0.5 * (s + s.conj().T)
    w, v = np.linalg.eigh(r)
    sqrt_r = (v * np.sqrt(np.clip(w, 0.0, None))) @ v.conj().T
    m = sqrt_r @ s @ sqrt_r
    ev = np.linalg.eigvalsh(0.5 * (m + m.conj().T))
    f = float(np.sqrt(np.clip(ev, 0.0, None)).sum())
    return min(f, 1.0)


@dataclass(frozen=True)
class GateResult:
    """Outcome of a gate simulation."""

    fidelity: float
    gate_time_ns: float
    leakage: float
    per_state_fidelities: dict[str, float]
    target: np.ndarray
    diagnostics: dict


class _TwoQubitModel:
    """Operators of the effective fluxonium x transmon model."""

    def __init__(self, eff: EffectiveModel, dims=(3, 3)):
        self.eff = eff
        self.dims = tuple(dims)
        d1, d2 = self.dims
        a1 = np.kron(destroy(d1), np.eye(d2))
        a2 = np.kron(np.eye(d1), destroy(d2))
        self.n1 = (a1.conj().T @ a1).real
        self.n2 = (a2.conj().T @ a2).real
        self.kerr1 = a1.conj().T @ a1.conj().T @ a1 @ a1
        self.kerr2 = a2.conj().T @ a2.conj().T @ a2 @ a2
        self.exchange = a1.conj().T @ a2 + a1 @ a2.conj().T
        self.drive_ops = two_level_ops(self.dims, 0, ("fluxonium", "transmon"))
        self.comp = [0 * d2 + 0, 0 * d2 + 1, 1 * d2 + 0, 1 * d2 + 1]

    def static(self, w1: float, w2: float, g_ghz: float) -> np.ndarray:
        e = self.eff
        return (
            w1 * self.n1
            + 1e-3 * e.kerr_mhz * self.kerr1
            + w2 * self.n2
            + 0.5 * e.alpha_2 * self.kerr2
            + g_ghz * self.exchange
        )

    def basis_states(self):
        dim = self.n1.shape[0]
        cols = np.zeros((dim, 4), dtype=complex)
        for j, idx in enumerate(self.comp):
            cols[idx, j] = 1.0
        return cols


def _grid_for(total_ns: float, hmax: float, dt_scale: float, align: int = 1) -> np.ndarray:
    dt_limit = STEP_RULE / (TWO_PI * hmax)
    nsteps = int(math.ceil(total_ns / (dt_scale * dt_limit)))
    nsteps = int(math.ceil(nsteps / align)) * align
    return np.linspace(0.0, total_ns, nsteps + 1)


def _rotate_out(states: np.ndarray, phases: np.ndarray) -> np.ndarray:
    """Undo diagonal frame phases: states (dim, m), phases (dim,) in cycles."""
    return np.exp(2j * math.pi * phases)[:, None] * states


def _leakage(psi: np.ndarray, comp) -> float:
    p = np.abs(psi) ** 2
    return float(1.0 - p[comp].sum())


def simulate_x_half_pi(
    spec: CircuitSpec,
    *,
    duration_ns: float = 15.0,
    sigma_ns: float | None = None,
    phase: float = 0.0,
    amplitude_mhz: float | None = None,
    dims: tuple[int, int] = (3, 3),
    frame: str = "lab",
    noise=None,
    dt_scale: float = 0.5,
    store_points: int = 600,
):
    """Quarter X rotation on the fluxonium with the coupler parked at the
    zero-coupling point, driven by a truncated-gaussian pulse at the dressed
    fluxonium frequency.

    When amplitude_mhz is None the signed amplitude is calibrated by a
    bounded 1-D search maximizing the mean fidelity over the four
    computational initial states (the drive term carries a leading minus
    sign, so the +x quarter turn lands at negative amplitude for phase 0).
    Returns (GateResult, {state label: Trajectory}).
    """
    park = find_zero_coupling(spec)
    eff = effective_parameters(spec, park.omega_c_star)
    model = _TwoQubitModel(eff, dims)
    omega_d = eff.omega_1
    g_park_ghz = 1e-3 * eff.g_eff_mhz

    envelope = lambda amp: PulseEnvelope(
        "gaussian", amp, duration_ns, start_ns=0.0,
        carrier_ghz=omega_d if frame == "lab" else 0.0,
        phase=phase, sigma_ns=sigma_ns,
    )

    def h_of_t_for(e: PulseEnvelope):
        h0 = model.static(eff.omega_1, eff.omega_2, g_park_ghz)
        sx, sy = model.drive_ops.sigma_x, model.drive_ops.sigma_y
        amp_ghz = 1e-3 * e.amplitude_mhz
        if frame == "lab":
            def h(t):
                base = amp_ghz * float(e.shape(t))
                return h0 - 2.0 * base * math.cos(TWO_PI * omega_d * t + e.phase) * sx
            return h
        h0_rot = model.static(eff.omega_1 - omega_d, 0.0, 0.0)
        ex_half = np.kron(destroy(dims[0]), np.eye(dims[1])).conj().T @ np.kron(np.eye(dims[0]), destroy(dims[1]))
        dw = omega_d - eff.omega_2
        axis = math.cos(e.phase) * sx + math.sin(e.phase) * sy

        def h(t):
            base = amp_ghz * float(e.shape(t))
            ex = g_park_ghz * (ex_half * np.exp(2j * math.pi * dw * t))
            return h0_rot + ex + ex.conj().T - base * axis
        return h

    # step size from the worst-case Hamiltonian norm (peak drive)
    probe_amp = amplitude_mhz if amplitude_mhz is not None else 40.0
    hmax = float(np.linalg.norm(h_of_t_for(envelope(-abs(probe_amp)))(duration_ns / 2.0), 2)) + 0.05
    grid = _grid_for(duration_ns, hmax, dt_scale)

    basis = model.basis_states()
    target_gate = np.kron(X_HALF_PI, np.eye(2))

    def run(amp, coarse=False):
        e = envelope(amp)
        g = grid if not coarse else _grid_for(duration_ns, hmax, 0.9)
        times, states = _propagate_stack(h_of_t_for(e), basis, g,
                                         store_every=max(1, (g.size - 1) // store_points))
        if frame == "lab":
            phases = duration_ns * (omega_d * np.diag(model.n1) + eff.omega_2 * np.diag(model.n2))
            final = _rotate_out(states[-1], phases)
        else:
            final = states[-1]
        return times, states, final

    calibrated = amplitude_mhz
    if calibrated is None:
        area = envelope(1.0).area_ns()
        a_est = -1e3 / (8.0 * area)

        def objective(amp):
            _, _, final = run(amp, coarse=True)
            fids = [abs(np.vdot(target_gate[:, j], final[model.comp, j])) for j in range(4)]
            return -float(np.mean(fids))

        from scipy.optimize import minimize_scalar
        res = minimize_scalar(objective, bounds=(1.6 * a_est, 0.4 * a_est),
                              method="bounded", options={"xatol": 1e-6})
        calibrated = float(res.x)

    e = envelope(calibrated)
    collapse = _collapse_for(noise, dims)
    if collapse:
        result, trajs = _run_noisy_gate(h_of_t_for(e), model, grid, target_gate, collapse,
                                        duration_ns, frame, omega_d, eff)
    else:
        times, states, final = run(calibrated)
        result, trajs = _score_unitary_gate(model, times, states, final, target_gate, duration_ns)
    diag = dict(result.diagnostics)
    diag.update(
        amplitude_mhz=calibrated,
        omega_c_park=park.omega_c_star,
        drive_frequency_ghz=omega_d,
        frame=frame,
        transmon_pop_deviation=_spectator_deviation(trajs, mode=1),
    )
    result = GateResult(result.fidelity, result.gate_time_ns, result.leakage,
                        result.per_state_fidelities, result.target, diag)
    if result.fidelity < 0.99:
        warnings.warn(
            f"X pi/2 calibration landed at fidelity {result.fidelity:.4f}; "
            f"diagnostics: {diag}", CalibrationWarning)
    return result, trajs


def _slice_trajectories(model, times, states, labels=("00", "01", "10", "11")) -> dict:
    return {
        lab: Trajectory(times, states[:, :, j].copy(), model.dims, "ket")
        for j, lab in enumerate(labels)
    }


def _score_unitary_gate(model, times, states, final, target_gate, gate_time):
    labels = ("00", "01", "10", "11")
    per_state = {}
    for j, lab in enumerate(labels):
        tgt = np.zeros(final.shape[0], complex)
        tgt[model.comp] = target_gate[:, j]
        per_state[lab] = abs(np.vdot(tgt, final[:, j]))
    u_comp = final[model.comp][:, :4]
    trace_f = abs(np.trace(target_gate.conj().T @ u_comp)) / 4.0
    leak = max(_leakage(final[:, j], model.comp) for j in range(4))
    trajs = _slice_trajectories(model, times, states)
    result = GateResult(
        fidelity=float(np.mean(list(per_state.values()))),
        gate_time_ns=gate_time,
        leakage=leak,
        per_state_fidelities=per_state,
        target=target_gate,
        diagnostics={"gate_trace_fidelity": float(trace_f)},
    )
    return result, trajs


def _spectator_deviation(trajs: dict, mode: int) -> float:
    worst = 0.0
    for tr in trajs.values():
        pops = tr.mode_populations(mode)
        worst = max(worst, float(np.abs(pops - pops[0]).max()))
    return worst


def _collapse_for(noise, dims):
    if not noise:
        return []
    return collapse_ops_from_T(noise, dims, ["fluxonium", "transmon"])


def _run_noisy_gate(h_of_t, model, grid, target_gate, collapse, gate_time, frame, f1, eff):
    labels = ("00", "01", "10", "11")
    basis = model.basis_states()
    per_state, trajs, leaks = {}, {}, []
    for j, lab in enumerate(labels):
        traj = evolve_lindblad(h_of_t, basis[:, j], collapse, grid,
                               store_every=max(1, (grid.size - 1) // 400), dims=model.dims)
        rho = traj.states[-1]
        if frame == "lab":
            ph = np.exp(2j * math.pi * gate_time * (f1 * np.diag(model.n1) + eff.omega_2 * np.diag(model.n2)))
            rho = ph[:, None] * rho * ph.conj()[None, :]
        tgt = np.zeros(rho.shape[0], complex)
        tgt[model.comp] = target_gate[:, j]
        per_state[lab] = state_fidelity(rho, tgt)
        leaks.append(1.0 - np.real(np.diag(rho))[model.comp].sum())
        trajs[lab] = traj
    result = GateResult(
        fidelity=float(np.mean(list(per_state.values()))),
        gate_time_ns=gate_time,
        leakage=float(max(leaks)),
        per_state_fidelities=per_state,
        target=target_gate,
        diagnostics={},
    )
    return result, trajs


def _solve_operating_point(spec, eff_park, park_omega, gate_time_ns):
    """Coupler frequency on the positive branch with g_eff = 1/(4 t_gate)."""
    g_target = 1e3 / (4.0 * gate_time_ns)   # MHz
    from .effective import qubit_frequencies, _g_eff_ghz
    _, w2_bare = qubit_frequencies(spec)
    lo, hi = park_omega + 1e-9, w2_bare - 0.02
    if _g_eff_ghz(spec, hi) < 1e-3 * g_target:
        raise RootBracketError(f"g_eff target {g_target:.3f} MHz not reachable below the qubit pole")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if _g_eff_ghz(spec, mid) < 1e-3 * g_target:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-12:
            break
    return 0.5 * (lo + hi)


def simulate_iswap(
    spec: CircuitSpec,
    *,
    gate_time_ns: float | None = 103.0,
    omega_c_op: float | None = None,
    margin_ns: float = 6.0,
    edge_ns: float = 1.0,
    dims: tuple[int, int] = (3, 3),
    frame: str = "lab",
    noise=None,
    dt_scale: float = 0.5,
    store_points: int = 800,
):
    """Pulse-level iSWAP: an erf-edged square compensation pulse shifts the
    fluxonium onto the transmon while a rectangular coupler-flux pulse sets
    the exchange coupling; the flux window lasts 1/(4 g_eff).

    The compensation rising edge is placed so the inter-qubit phase
    accumulated before the flux window is an integer number of cycles
    (the schedule-level analog of frame calibration); without it the swap
    picks up local Z rotations.  Returns (GateResult, trajectories) with
    the four computational states and the two Bell states of interest.
    """
    park = find_zero_coupling(spec)
    eff_park = effective_parameters(spec, park.omega_c_star)
    if omega_c_op is None:
        if gate_time_ns is None:
            raise ValueError("give gate_time_ns or omega_c_op")
        omega_c_op = _solve_operating_point(spec, eff_park, park.omega_c_star, gate_time_ns)
    eff_op = effective_parameters(spec, omega_c_op)
    g_op_ghz = 1e-3 * eff_op.g_eff_mhz
    if g_op_ghz <= 0:
        raise RootBracketError(f"operating point has g_eff = {eff_op.g_eff_mhz:.3f} MHz <= 0")
    t_flux = 1.0 / (4.0 * g_op_ghz)
    total = t_flux + 2.0 * margin_ns
    t_c, t_d = margin_ns, margin_ns + t_flux
    w1p, w2p = eff_park.omega_1, eff_park.omega_2
    w1o, w2o = eff_op.omega_1, eff_op.omega_2
    delta = w2o - w1o
    g_park_ghz = 1e-3 * eff_park.g_eff_mhz

    c1 = _compensation_edge_time(w1p, w2p, delta, t_c, edge_ns)
    comp = PulseEnvelope("erf-square", 1e3 * delta, total - margin_ns / 2.0 - c1,
                         start_ns=c1, edge_ns=edge_ns,
                         metadata={"role": "compensation"})
    flux = PulseEnvelope("rectangular", 1e3 * (omega_c_op - park.omega_c_star), t_flux,
                         start_ns=t_c, metadata={"role": "coupler-flux"})
    sequence = PulseSequence(
        (("fluxonium-flux", comp), ("coupler-flux", flux)),
        metadata={
            "omega_c_park": park.omega_c_star, "omega_c_op": omega_c_op,
            "g_eff_mhz": eff_op.g_eff_mhz, "t_flux_ns": t_flux,
        },
    )

    model = _TwoQubitModel(eff_park, dims)

    def freqs(t):
        in_window = np.where((np.asarray(t) >= t_c) & (np.asarray(t) < t_d), 1.0, 0.0)
        s = comp.shape(t)
        f1 = w1p + (w1o - w1p) * in_window + delta * s
        f2 = w2p + (w2o - w2p) * in_window
        g = g_park_ghz + (g_op_ghz - g_park_ghz) * in_window
        return f1, f2, g

    if frame == "lab":
        def h_of_t(t):
            f1, f2, g = freqs(t)
            return model.static(f1, f2, g)
        hmax = float(np.linalg.norm(model.static(w2o + abs(delta), w2o, g_op_ghz), 2))
    else:
        ex_half = np.kron(destroy(dims[0]), np.eye(dims[1])).conj().T @ np.kron(np.eye(dims[0]), destroy(dims[1]))

        def h_of_t(t):
            f1, f2, g = freqs(t)
            dphi = _phase_integral(w1p, w1o, w2p, w2o, delta, comp, t_c, t_d, t)
            ex = g * ex_half * np.exp(2j * math.pi * dphi)
            return model.static(0.0, 0.0, 0.0) + ex + ex.conj().T
        hmax = float(np.linalg.norm(model.static(0.0, 0.0, g_op_ghz), 2)) + 0.1

    # pulse boundaries must land on step boundaries so the flux area is exact
    dt_limit = dt_scale * STEP_RULE / (TWO_PI * hmax)
    n_margin = int(math.ceil(margin_ns / dt_limit))
    n_flux = int(math.ceil(t_flux / dt_limit))
    grid = np.concatenate([
        np.linspace(0.0, t_c, n_margin + 1),
        np.linspace(t_c, t_d, n_flux + 1)[1:],
        np.linspace(t_d, total, n_margin + 1)[1:],
    ])

    bell_plus = np.zeros(model.n1.shape[0], complex)
    bell_plus[model.comp[1]] = bell_plus[model.comp[2]] = 1 / math.sqrt(2)
    bell_00_11 = np.zeros_like(bell_plus)
    bell_00_11[model.comp[0]] = bell_00_11[model.comp[3]] = 1 / math.sqrt(2)
    stack = np.concatenate([model.basis_states(), bell_plus[:, None], bell_00_11[:, None]], axis=1)

    labels = ("00", "01", "10", "11", "bell_01_10", "bell_00_11")
    target_gate = ISWAP
    collapse = _collapse_for(noise, dims)
    if collapse:
        return _iswap_noisy(h_of_t, model, grid, stack, labels, target_gate, t_flux,
                            frame, freqs, total, sequence, eff_op, store_points, collapse)

    mids = 0.5 * (grid[:-1] + grid[1:])
    dts = np.diff(grid)
    f1s, f2s, gs = freqs(mids)
    _, step_keys = np.unique(np.stack([f1s, f2s, gs], axis=1), axis=0, return_inverse=True)

    store_every = max(1, (grid.size - 1) // store_points)
    times, states = _propagate_stack(h_of_t, stack, grid, store_every=store_every,
                                     step_keys=step_keys)
    if frame == "lab":
        phi1 = float(np.sum(f1s * dts))
        phi2 = float(np.sum(f2s * dts))
        phases = phi1 * np.diag(model.n1) + phi2 * np.diag(model.n2)
        final = _rotate_out(states[-1], phases)
    else:
        final = states[-1]

    per_state = {}
    targets = {}
    for j, lab in enumerate(labels):
        tgt = np.zeros(final.shape[0], complex)
        tgt[model.comp] = target_gate @ stack[model.comp, j]
        targets[lab] = tgt
        per_state[lab] = abs(np.vdot(tgt, final[:, j]))
    u_comp = final[model.comp][:, :4]
    trace_f = abs(np.trace(target_gate.conj().T @ u_comp)) / 4.0
    leak = max(_leakage(final[:, j], model.comp) for j in range(len(labels)))
    trajs = {lab: Trajectory(times, states[:, :, j].copy(), model.dims, "ket")
             for j, lab in enumerate(labels)}
    flat = max(
        float(np.abs(np.abs(states[:, model.comp[0], 0]) ** 2 - 1.0).max()),
        float(np.abs(np.abs(states[:, model.comp[3], 3]) ** 2 - 1.0).max()),
    )
    result = GateResult(
        fidelity=float(np.mean([per_state[lab] for lab in labels[:4]])),
        gate_time_ns=t_flux,
        leakage=leak,
        per_state_fidelities=per_state,
        target=target_gate,
        diagnostics={
            "gate_trace_fidelity": float(trace_f),
            "omega_c_op": omega_c_op,
            "g_eff_mhz": eff_op.g_eff_mhz,
            "population_flatness_00_11": flat,
            "sequence": sequence,
            "frame": frame,
        },
    )
    return result, trajs


def _iswap_noisy(h_of_t, model, grid, stack, labels, target_gate, t_flux,
                 frame, freqs, total, sequence, eff_op, store_points, collapse):
    per_state, trajs, leaks = {}, {}, []
    if frame == "lab":
        phi1, phi2 = _accumulated_phases(freqs, grid)
    for j, lab in enumerate(labels):
        traj = evolve_lindblad(h_of_t, stack[:, j], collapse, grid,
                               store_every=max(1, (grid.size - 1) // store_points),
                               dims=model.dims)
        rho = traj.states[-1]
        if frame == "lab":
            ph = np.exp(2j * math.pi * (phi1 * np.diag(model.n1) + phi2 * np.diag(model.n2)))
            rho = ph[:, None] * rho * ph.conj()[None, :]
        tgt = np.zeros(rho.shape[0], complex)
        tgt[model.comp] = target_gate @ stack[model.comp, j]
        per_state[lab] = state_fidelity(rho, tgt)
        leaks.append(1.0 - np.real(np.diag(rho))[model.comp].sum())
        trajs[lab] = traj
    result = GateResult(
        fidelity=float(np.mean([per_state[lab] for lab in labels[:4]])),
        gate_time_ns=t_flux,
        leakage=float(max(leaks)),
        per_state_fidelities=per_state,
        target=target_gate,
        diagnostics={"sequence": sequence, "g_eff_mhz": eff_op.g_eff_mhz},
    )
    return result, trajs


def _accumulated_phases(freqs, grid):
    """Midpoint-summed frame phases, matching the propagator discretization."""
    phi1 = phi2 = 0.0
    for i in range(grid.size - 1):
        dt = grid[i + 1] - grid[i]
        f1, f2, _ = freqs(0.5 * (grid[i] + grid[i + 1]))
        phi1 += f1 * dt
        phi2 += f2 * dt
    return phi1, phi2


def _erf_rise_integral(t: float, center: float, width_ns: float) -> float:
    """Exact integral of 0.5*(1+erf((tau-center)/w)) from 0 to t."""
    w = width_ns / math.sqrt(2.0)
    F = lambda u: u + u * erf(u) + math.exp(-u * u) / math.sqrt(math.pi)
    return 0.5 * w * (F((t - center) / w) - F((0.0 - center) / w))


def _compensation_edge_time(w1p, w2p, delta, t_c, edge_ns, c1_min=1.2):
    """Rising-edge center making the pre-window inter-qubit phase integral."""
    raw = (w1p - w2p + delta) * t_c
    n_cycles = math.floor(raw - delta * c1_min)
    c1 = (raw - n_cycles) / delta
    while c1 < c1_min:
        n_cycles -= 1
        c1 = (raw - n_cycles) / delta
    # polish with the exact erf-edge integral (the asymptotic form ignores tails)
    for _ in range(4):
        phase = (w1p - w2p) * t_c + delta * _erf_rise_integral(t_c, c1, edge_ns)
        c1 += (phase - n_cycles) / delta
    return c1


def _phase_integral(w1p, w1o, w2p, w2o, delta, comp, t_c, t_d, t):
    """Phi_1(t) - Phi_2(t) for the iswap schedule, in cycles (analytic)."""
    win = max(0.0, min(t, t_d) - t_c)
    phi1 = w1p * t + (w1o - w1p) * win + delta * _erf_rise_integral(t, comp.start_ns, comp.edge_ns)
    phi2 = w2p * t + (w2o - w2p) * win
    return phi1 - phi2
