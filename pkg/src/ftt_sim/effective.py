"""Effective two-qubit model, fluxonium Kerr pipeline, operating points.

The coupler is removed perturbatively: dressed frequencies pick up g^2/Delta
shifts and the qubits acquire the net exchange coupling
g_eff = (g_1 g_2 / 2)(1/Delta_1 + 1/Delta_2) + g_12, with Delta_j =
omega_j - omega_c.  The fluxonium self-Kerr comes from the Taylor expansion
of its potential at the minimum through the three- and four-wave mixing
strengths.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh, expm

from .circuit import CircuitSpec, FluxoniumParams
from .errors import KerrRangeError, ResonanceError, RootBracketError
from .hamiltonian import (
    Operator,
    bare_frequency,
    bare_modes,
    destroy,
    eigensystem,
    full_hamiltonian,
    fluxonium_hamiltonian,
    _kron3,
    _label_index,
)

DISPERSIVE_RATIO = 0.1
RESONANCE_GUARD = 1e-3   # GHz


@dataclass(frozen=True)
class EffectiveModel:
    """Dressed two-qubit parameters at a given coupler frequency.

    omega_1, omega_2, alpha_2, delta_1, delta_2 in GHz; kerr_mhz and
    g_eff_mhz in MHz.  dispersive is False when either g_jc/|Delta_j|
    exceeds 0.1 and the perturbative reduction is suspect.
    """

    omega_1: float
    omega_2: float
    kerr_mhz: float
    alpha_2: float
    g_eff_mhz: float
    delta_1: float
    delta_2: float
    dispersive: bool


@dataclass(frozen=True)
class KerrPipelineResult:
    """Potential minimum, Taylor coefficients and wave-mixing strengths."""

    phi_min: float
    c2: float
    c3: float
    c4: float
    g3_mhz: float
    g4_mhz: float
    kerr_mhz: float


def _potential(p: FluxoniumParams, phi):
    return -p.beta * p.E_J * np.cos(phi) - p.E_J * np.cos(p.phi_ext - phi) + 0.5 * p.E_L * phi**2


def _potential_d1(p: FluxoniumParams, phi):
    return p.beta * p.E_J * np.sin(phi) - p.E_J * np.sin(p.phi_ext - phi) + p.E_L * phi


def _potential_d2(p: FluxoniumParams, phi):
    return p.beta * p.E_J * np.cos(phi) + p.E_J * np.cos(p.phi_ext - phi) + p.E_L


def potential_minimum(p: FluxoniumParams) -> float:
    """Global minimum of the fluxonium potential (radians).

    Coarse grid over the classically allowed range followed by Newton
    polish to |U'| < 1e-12.  Exactly degenerate double-well minima (half
    flux quantum) are broken toward non-negative phase.
    """
    span = (1.0 + p.beta) * p.E_J / p.E_L + 2.0 * math.pi
    grid = np.linspace(-span, span, 8001)
    u = _potential(p, grid)
    order = np.argsort(u)
    i0 = int(order[0])
    # degenerate mirror minimum: prefer the non-negative branch
    for i in order[1:3]:
        if abs(u[i] - u[i0]) < 1e-12 * max(abs(u[i0]), 1.0) and grid[i] > grid[i0]:
            i0 = int(i)
    phi = float(grid[i0])
    for _ in range(100):
        step = _potential_d1(p, phi) / _potential_d2(p, phi)
        phi -= step
        if abs(_potential_d1(p, phi)) < 1e-12:
            break
    if _potential_d2(p, phi) <= 0:
        raise ResonanceError("Newton polish landed on a non-minimum stationary point")
    return phi


def taylor_coefficients(p: FluxoniumParams, phi_min: float) -> tuple[float, float, float]:
    """(c2, c3, c4): potential derivatives at the minimum divided by E_J.

    Closed-form derivatives of the cosine potential; no finite differences.
    """
    s, c = math.sin(phi_min), math.cos(phi_min)
    su, cu = math.sin(p.phi_ext - phi_min), math.cos(p.phi_ext - phi_min)
    c2 = (p.beta * p.E_J * c + p.E_J * cu + p.E_L) / p.E_J
    c3 = (-p.beta * p.E_J * s + p.E_J * su) / p.E_J
    c4 = (-p.beta * p.E_J * c - p.E_J * cu) / p.E_J
    return c2, c3, c4


def kerr_pipeline(
    p: FluxoniumParams, omega_q1: float, charging_energy: float | None = None
) -> KerrPipelineResult:
    """Fluxonium Kerr coefficient from the wave-mixing strengths.

    g3 = (1/6)(c3/c2) sqrt(E_C omega_q1), g4 = (1/12)(c4/c2) E_C and
    K = 12 (g4 - 5 g3^2 / omega_q1).  charging_energy defaults to the
    fluxonium's own E_C; pass another value to reproduce alternative
    conventions for the energy scale entering the mixing strengths.
    """
    if omega_q1 <= 0:
        raise ValueError("omega_q1 must be positive")
    ec = p.E_C if charging_energy is None else charging_energy
    phi_min = potential_minimum(p)
    c2, c3, c4 = taylor_coefficients(p, phi_min)
    if c2 <= 0:
        raise ResonanceError("unstable minimum: c2 <= 0")
    g3 = (c3 / c2) * math.sqrt(ec * omega_q1) / 6.0
    g4 = (c4 / c2) * ec / 12.0
    kerr = 12.0 * (g4 - 5.0 * g3**2 / omega_q1)
    return KerrPipelineResult(phi_min, c2, c3, c4, 1e3 * g3, 1e3 * g4, 1e3 * kerr)


def kerr_flux_scan(
    p: FluxoniumParams, n: int = 2001, fluxonium_basis: int = 40
) -> tuple[np.ndarray, np.ndarray]:
    """K(phi_ext) on a uniform [0, 2*pi) grid (MHz), with the qubit
    frequency recomputed by exact diagonalization at every flux point."""
    from dataclasses import replace

    phis = np.linspace(0.0, 2.0 * math.pi, n, endpoint=False)
    ks = np.empty(n)
    for i, phix in enumerate(phis):
        q = replace(p, phi_ext=float(phix))
        w01 = bare_frequency(q)
        ks[i] = kerr_pipeline(q, w01).kerr_mhz
    return phis, ks


def find_flux_for_kerr(
    p: FluxoniumParams, kerr_target_mhz: float, n: int = 2001
) -> float:
    """Flux phase where K(phi_ext) crosses the target (linear interpolation).

    Raises KerrRangeError citing the scanned K range when no flux point
    reaches the target.
    """
    phis, ks = kerr_flux_scan(p, n)
    diff = ks - kerr_target_mhz
    sign_change = np.nonzero(np.diff(np.sign(diff)))[0]
    if sign_change.size == 0:
        raise KerrRangeError(kerr_target_mhz, float(ks.min()), float(ks.max()))
    i = int(sign_change[0])
    frac = diff[i] / (diff[i] - diff[i + 1])
    return float(phis[i] + frac * (phis[i + 1] - phis[i]))


def qubit_frequencies(spec: CircuitSpec) -> tuple[float, float]:
    """Bare qubit frequencies used by the dispersive formulas: the recorded
    design values when present, else exact diagonalization."""
    w1 = spec.fluxonium.omega
    w2 = spec.transmon.omega
    if w1 is None:
        w1 = bare_frequency(spec.fluxonium)
    if w2 is None:
        w2 = bare_frequency(spec.transmon)
    return float(w1), float(w2)


def _g_eff_ghz(spec: CircuitSpec, omega_c: float, counter_rotating: bool = False) -> float:
    w1, w2 = qubit_frequencies(spec)
    g1 = 1e-3 * spec.couplings.g_1c
    g2 = 1e-3 * spec.couplings.g_2c
    g12 = 1e-3 * spec.couplings.g_12
    d1, d2 = w1 - omega_c, w2 - omega_c
    if min(abs(d1), abs(d2)) < RESONANCE_GUARD:
        raise ResonanceError(
            f"omega_c={omega_c} GHz within {RESONANCE_GUARD*1e3:.0f} MHz of a qubit"
        )
    g = 0.5 * g1 * g2 * (1.0 / d1 + 1.0 / d2) + g12
    if counter_rotating:
        g -= 0.5 * g1 * g2 * (1.0 / (w1 + omega_c) + 1.0 / (w2 + omega_c))
    return g


def effective_parameters(
    spec: CircuitSpec, omega_c: float, counter_rotating: bool = False
) -> EffectiveModel:
    """Closed-form dressed two-qubit parameters at coupler frequency omega_c."""
    w1, w2 = qubit_frequencies(spec)
    g1 = 1e-3 * spec.couplings.g_1c
    g2 = 1e-3 * spec.couplings.g_2c
    d1, d2 = w1 - omega_c, w2 - omega_c
    if min(abs(d1), abs(d2)) < RESONANCE_GUARD:
        raise ResonanceError(
            f"omega_c={omega_c} GHz within {RESONANCE_GUARD*1e3:.0f} MHz of a qubit"
        )
    kerr = kerr_pipeline(spec.fluxonium, w1).kerr_mhz
    dispersive = max(g1 / abs(d1), g2 / abs(d2)) <= DISPERSIVE_RATIO
    return EffectiveModel(
        omega_1=w1 + g1**2 / d1,
        omega_2=w2 + g2**2 / d2,
        kerr_mhz=kerr,
        alpha_2=-spec.transmon.E_C,
        g_eff_mhz=1e3 * _g_eff_ghz(spec, omega_c, counter_rotating),
        delta_1=d1,
        delta_2=d2,
        dispersive=dispersive,
    )


@dataclass(frozen=True)
class CouplingCurve:
    """2*g_eff against coupler frequency, with sign-change brackets."""

    omega_c: np.ndarray
    two_g_mhz: np.ndarray
    brackets: list[tuple[float, float]]

    def rows(self):
        for x, y in zip(self.omega_c, self.two_g_mhz):
            yield [x, y]

    def header(self):
        return ["omega_c", "two_g_eff"]


def effective_coupling_curve(
    spec: CircuitSpec, omega_c_grid, counter_rotating: bool = False
) -> CouplingCurve:
    """Evaluate 2*g_eff (MHz) on a coupler-frequency grid.

    Grid points within the resonance guard of either qubit are dropped.
    Sign-change brackets are reported only between neighbors on the same
    continuous branch (no qubit pole in between).
    """
    w1, w2 = qubit_frequencies(spec)
    xs, ys = [], []
    for x in np.asarray(omega_c_grid, dtype=float):
        if min(abs(w1 - x), abs(w2 - x)) < RESONANCE_GUARD:
            continue
        xs.append(float(x))
        ys.append(1e3 * _g_eff_ghz(spec, float(x), counter_rotating))
    xs = np.asarray(xs)
    ys = np.asarray(ys)
    brackets = []
    for i in range(xs.size - 1):
        crosses_pole = any(xs[i] < w < xs[i + 1] for w in (w1, w2))
        if not crosses_pole and ys[i] * ys[i + 1] < 0:
            brackets.append((float(xs[i]), float(xs[i + 1])))
    return CouplingCurve(xs, ys, brackets)


@dataclass(frozen=True)
class ZeroCouplingResult:
    omega_c_star: float
    residual_mhz: float
    bracket: tuple[float, float]


def find_zero_coupling(
    spec: CircuitSpec,
    lo: float = 4.0,
    hi: float = 8.0,
    tol_mhz: float = 1e-3,
    counter_rotating: bool = False,
) -> ZeroCouplingResult:
    """Bisect g_eff(omega_c) to |g_eff| below tol (default 1 kHz).

    Searches the interval for a sign change on a continuous branch (the
    qubit poles split the interval); raises RootBracketError with a curve
    summary when none exists.
    """
    curve = effective_coupling_curve(
        spec, np.linspace(lo, hi, 401), counter_rotating=counter_rotating
    )
    if not curve.brackets:
        summary = (
            f"2g on [{lo}, {hi}] GHz spans "
            f"[{curve.two_g_mhz.min():.2f}, {curve.two_g_mhz.max():.2f}] MHz "
            "with no same-branch sign change"
        )
        raise RootBracketError("no zero-coupling point on the search interval", summary)
    a, b = curve.brackets[0]
    fa = _g_eff_ghz(spec, a, counter_rotating)
    tol = 1e-3 * tol_mhz   # GHz
    while True:
        mid = 0.5 * (a + b)
        fm = _g_eff_ghz(spec, mid, counter_rotating)
        if abs(fm) < tol or b - a < 1e-13:
            return ZeroCouplingResult(mid, 1e3 * fm, (a, b))
        if fa * fm < 0:
            b = mid
        else:
            a, fa = mid, fm


@dataclass(frozen=True)
class SwtReport:
    """Diagnostics of the perturbative coupler removal at one omega_c."""

    omega_c: float
    off_block_before: float      # max |H_ij| between coupler blocks 0 and >=1
    off_block_after: float       # same after the rotation
    spectral_mismatch: float     # max |effective - dressed| over the qubit lines (GHz)
    dressed_omega_1: float
    dressed_omega_2: float


def swt_generator(spec: CircuitSpec, omega_c: float, model: str = "targets") -> Operator:
    """Anti-Hermitian generator sum_j (g_j/Delta_j)(a_j^dag a_c - a_j a_c^dag)."""
    w1, w2 = qubit_frequencies(spec)
    d1, dc, d2 = spec.truncation.as_tuple()
    a1, ac, a2 = destroy(d1), destroy(dc), destroy(d2)
    i1, ic, i2 = np.eye(d1), np.eye(dc), np.eye(d2)
    lam1 = 1e-3 * spec.couplings.g_1c / (w1 - omega_c)
    lam2 = 1e-3 * spec.couplings.g_2c / (w2 - omega_c)
    s = lam1 * (_kron3(a1.conj().T, ac, i2) - _kron3(a1, ac.conj().T, i2))
    s += lam2 * (_kron3(i1, ac, a2.conj().T) - _kron3(i1, ac.conj().T, a2))
    return Operator(s, (d1, dc, d2), ("fluxonium", "coupler", "transmon"))


def _coupler_block_mask(dims: tuple[int, int, int]) -> np.ndarray:
    d1, dc, d2 = dims
    nc = np.kron(np.kron(np.ones(d1), np.arange(dc)), np.ones(d2))
    return nc == 0


def _max_off_block(h: np.ndarray, mask0: np.ndarray) -> float:
    return float(np.abs(h[np.ix_(mask0, ~mask0)]).max())


def swt_verify(spec: CircuitSpec, omega_c: float, model: str = "targets") -> SwtReport:
    """Apply the rotation numerically and report how well it decouples.

    (a) the largest matrix element connecting the zero- and
    one-or-more-coupler-excitation blocks, before and after;
    (b) the difference between the closed-form dressed qubit frequencies
    and the corresponding dressed levels of the full model.
    """
    h = full_hamiltonian(spec, model=model, omega_c=omega_c)
    s = swt_generator(spec, omega_c, model=model)
    u = expm(s.data)
    h2 = u @ h.data @ u.conj().T
    mask0 = _coupler_block_mask(h.dims)

    eff = effective_parameters(spec, omega_c)
    w, v = eigensystem(h, k=min(8, h.dim))
    p = np.abs(v) ** 2
    i100 = _label_index("100", h.dims)
    i001 = _label_index("001", h.dims)
    dressed1 = float(w[int(np.argmax(p[i100]))] - w[0])
    dressed2 = float(w[int(np.argmax(p[i001]))] - w[0])
    mismatch = max(abs(dressed1 - eff.omega_1), abs(dressed2 - eff.omega_2))
    return SwtReport(
        omega_c=omega_c,
        off_block_before=_max_off_block(h.data, mask0),
        off_block_after=_max_off_block(h2, mask0),
        spectral_mismatch=mismatch,
        dressed_omega_1=dressed1,
        dressed_omega_2=dressed2,
    )
