"""Coherent states, Kerr evolution to multi-component cats, Wigner maps.

The Kerr phase convention is linear-frequency: a Fock amplitude at level n
acquires exp(i 2*pi (K/2) n^2 t) with K in GHz and t in ns, so the full
revival period is tau0 = 1/|K|; the m-component cat appears at tau0/m.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .circuit import FluxoniumParams
from .dynamics import PulseEnvelope, PulseSequence
from .errors import TruncationError, TruncationWarning
from .hamiltonian import Operator, destroy

TWO_PI = 2.0 * math.pi
TAIL_TOL = 1e-8


@dataclass(frozen=True)
class FockState:
    """Ket over Fock levels 0..N-1 of a single oscillator mode."""

    amplitudes: np.ndarray

    def __post_init__(self):
        amp = np.ascontiguousarray(self.amplitudes, dtype=complex)
        if amp.ndim != 1:
            raise ValueError("amplitudes must be a vector")
        norm = float(np.linalg.norm(amp))
        if abs(norm - 1.0) > 1e-10:
            raise ValueError(f"state norm {norm} deviates from 1 beyond 1e-10")
        if abs(amp[-1]) ** 2 >= TAIL_TOL:
            warnings.warn(
                f"top Fock level holds {abs(amp[-1])**2:.2e} population; "
                "truncation may be inadequate", TruncationWarning)
        amp.setflags(write=False)
        object.__setattr__(self, "amplitudes", amp)

    @property
    def N(self) -> int:
        return self.amplitudes.size

    def mean_photon(self) -> float:
        return float(np.sum(np.arange(self.N) * np.abs(self.amplitudes) ** 2))

    def overlap(self, other: "FockState") -> complex:
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def density_matrix(self) -> np.ndarray:
        return np.outer(self.amplitudes, self.amplitudes.conj())


def required_truncation(alpha: complex) -> int:
    """Smallest N satisfying N > |alpha|^2 + 6 sqrt(|alpha|^2 + 1)."""
    nbar = abs(alpha) ** 2
    return int(math.floor(nbar + 6.0 * math.sqrt(nbar + 1.0))) + 1


def _check_truncation(alpha: complex, N: int):
    needed = required_truncation(alpha)
    if N < needed:
        raise TruncationError(N, needed)


def coherent_state(alpha: complex, N: int) -> FockState:
    """Normalized coherent state |alpha> truncated to N Fock levels."""
    _check_truncation(alpha, N)
    amp = np.zeros(N, dtype=complex)
    amp[0] = 1.0
    for k in range(1, N):
        amp[k] = amp[k - 1] * alpha / math.sqrt(k)
    amp *= math.exp(-0.5 * abs(alpha) ** 2)
    amp /= np.linalg.norm(amp)
    return FockState(amp)


def displacement_operator(alpha: complex, N: int) -> Operator:
    """D(alpha) = exp(alpha a^dag - alpha* a) on the truncated space."""
    _check_truncation(alpha, N)
    a = destroy(N)
    return Operator(expm(alpha * a.conj().T - np.conj(alpha) * a), (N,), ("mode",))


def tau0_ns(kerr_mhz: float) -> float:
    """Full cat-cycle period 1/|K| in ns for K in MHz."""
    return 1e3 / abs(kerr_mhz)


def kerr_phases(kerr_mhz: float, t_ns: float, N: int) -> np.ndarray:
    n = np.arange(N, dtype=float)
    return np.exp(1j * TWO_PI * 0.5e-3 * kerr_mhz * n**2 * t_ns)


def kerr_evolve(alpha: complex, kerr_mhz: float, t_ns: float, N: int) -> FockState:
    """Self-Kerr evolution of |alpha>: level n picks up phase pi K n^2 t."""
    start = coherent_state(alpha, N)
    return FockState(start.amplitudes * kerr_phases(kerr_mhz, t_ns, N))


def cat_component_coefficients(m: int, kerr_sign: int = -1) -> np.ndarray:
    """Coefficients f_k of the m-component cat decomposition.

    At t = tau0/m the Kerr phases exp(i sign pi n^2 / m) are periodic in n
    with period 2m, so the state is a superposition over coherent states at
    angles pi k / m, k = 0..2m-1; exactly m of the f_k are nonzero.
    """
    n = np.arange(2 * m)
    s = np.exp(1j * math.pi * kerr_sign * n**2 / m)
    k = np.arange(2 * m)
    # f_k = (1/2m) sum_n s_n exp(+i pi n k / m) inverts s_n = sum_k f_k e^{-i pi n k/m}
    f = (s[None, :] * np.exp(1j * math.pi * np.outer(k, n) / m)).sum(axis=1) / (2 * m)
    return f


def ideal_cat(alpha: complex, m: int, N: int, kerr_sign: int = -1) -> FockState:
    """Analytic m-component cat at t = tau0/m, independent of kerr_evolve.

    Built as the coefficient-weighted superposition of coherent states at
    angles pi k/m; serves as the oracle for the Kerr evolution route.
    """
    if m not in (2, 3, 4):
        raise ValueError("component count m must be 2, 3 or 4")
    _check_truncation(alpha, N)
    f = cat_component_coefficients(m, kerr_sign)
    amp = np.zeros(N, dtype=complex)
    for k, fk in enumerate(f):
        if abs(fk) < 1e-14:
            continue
        amp += fk * coherent_state(alpha * np.exp(-1j * math.pi * k / m), N).amplitudes
    amp /= np.linalg.norm(amp)
    return FockState(amp)


@dataclass(frozen=True)
class PhaseGrid:
    """Rectangular grid over complex phase space gamma = re + i*im."""

    re: np.ndarray
    im: np.ndarray

    @property
    def cell_area(self) -> float:
        return float((self.re[1] - self.re[0]) * (self.im[1] - self.im[0]))

    def matches(self, other: "PhaseGrid") -> bool:
        return (
            self.re.shape == other.re.shape
            and self.im.shape == other.im.shape
            and np.array_equal(self.re, other.re)
            and np.array_equal(self.im, other.im)
        )


def square_grid(extent: float, n: int) -> PhaseGrid:
    axis = np.linspace(-extent, extent, n)
    return PhaseGrid(axis, axis.copy())


@dataclass(frozen=True)
class WignerMap:
    """W(gamma) on a PhaseGrid, normalized so the map integrates to 1."""

    grid: PhaseGrid
    values: np.ndarray   # (n_im, n_re), real

    def normalization(self) -> float:
        return float(self.values.sum() * self.grid.cell_area)

    def rows(self):
        for i, y in enumerate(self.grid.im):
            for j, x in enumerate(self.grid.re):
                yield [x, y, self.values[i, j]]

    def header(self):
        return ["re_gamma", "im_gamma", "value"]


@dataclass(frozen=True)
class CorrelationMap:
    """Pointwise difference of two Wigner maps on a shared grid."""

    grid: PhaseGrid
    values: np.ndarray
    n_photon: int
    m: int

    rows = WignerMap.rows
    header = WignerMap.header


def wigner(state, grid: PhaseGrid) -> WignerMap:
    """Wigner function from the displaced-parity expansion.

    Accepts a FockState, a ket vector or a density matrix.  Uses the
    stable generalized-Laguerre recurrences over the density-matrix
    diagonals (naive factorial ratios overflow long before n = 170).
    """
    if isinstance(state, FockState):
        rho = state.density_matrix()
    else:
        arr = np.asarray(state, dtype=complex)
        rho = np.outer(arr, arr.conj()) if arr.ndim == 1 else arr
    N = rho.shape[0]
    X, Y = np.meshgrid(grid.re, grid.im)
    G = X + 1j * Y
    x = 4.0 * np.abs(G) ** 2
    W = np.zeros_like(x)
    tail = float(np.abs(np.diag(rho))[-1])
    if tail >= TAIL_TOL:
        warnings.warn(f"top Fock level holds {tail:.2e} population", TruncationWarning)
    for d in range(N):
        diag = np.diagonal(rho, offset=d)
        if not np.any(np.abs(diag) > 1e-16):
            continue
        # c_{m,d} = (-1)^m sqrt(m!/(m+d)!) (2 gamma)^d, built by recurrence
        c = np.ones_like(G, dtype=complex)
        for k in range(1, d + 1):
            c = c * (2.0 * G) / math.sqrt(k)
        lm1 = np.zeros_like(x)
        l = np.ones_like(x)
        acc = np.zeros_like(G, dtype=complex)
        for m in range(N - d):
            if m > 0:
                c = -c * math.sqrt(m / (m + d))
                lnew = ((2 * m - 1 + d - x) * l - (m - 1 + d) * lm1) / m
                lm1, l = l, lnew
            if diag[m] != 0:
                acc = acc + diag[m] * c * l
        W += (1.0 if d == 0 else 2.0) * np.real(acc)
    W = (2.0 / math.pi) * np.exp(-0.5 * x) * W
    return WignerMap(grid, W)


def cat_correlation(n_photon: int, m: int, grid: PhaseGrid, kerr_mhz: float = -5.95) -> CorrelationMap:
    """Difference of the m-component cat Wigner maps for alpha = sqrt(n+1)
    and alpha = sqrt(n), both taken at t = tau0/m."""
    if n_photon < 1:
        raise ValueError("photon number must be >= 1")
    t = tau0_ns(kerr_mhz) / m
    n_trunc = required_truncation(math.sqrt(n_photon + 1.0)) + 8
    w_hi = wigner(kerr_evolve(math.sqrt(n_photon + 1.0), kerr_mhz, t, n_trunc), grid)
    w_lo = wigner(kerr_evolve(math.sqrt(n_photon), kerr_mhz, t, n_trunc), grid)
    return CorrelationMap(grid, w_hi.values - w_lo.values, n_photon, m)


def fringe_period_imaginary_cut(wmap: WignerMap, y_max: float = 1.2) -> float:
    """Fringe period along the gamma = i*y axis from zero-crossing spacing.

    Zero crossings of the interference term are insensitive to the gaussian
    envelope, unlike peak-to-peak distances.
    """
    j0 = int(np.argmin(np.abs(wmap.grid.re)))
    ys = wmap.grid.im
    cut = wmap.values[:, j0]
    keep = np.abs(ys) <= y_max
    ys, cut = ys[keep], cut[keep]
    crossings = []
    for i in range(ys.size - 1):
        if cut[i] == 0.0:
            continue
        if cut[i] * cut[i + 1] < 0:
            frac = cut[i] / (cut[i] - cut[i + 1])
            crossings.append(ys[i] + frac * (ys[i + 1] - ys[i]))
    if len(crossings) < 3:
        raise ValueError("not enough fringe zero crossings on the cut")
    spacing = np.diff(crossings)
    return 2.0 * float(np.mean(spacing))


def tomography_sequence(
    alpha: complex,
    kerr_mhz: float,
    m: int,
    gamma: complex,
    *,
    parity_chi_ghz: float | None = None,
    fluxonium: FluxoniumParams | None = None,
    pump_duration_ns: float = 20.0,
    pi2_duration_ns: float = 15.0,
    readout_duration_ns: float = 200.0,
) -> PulseSequence:
    """Protocol-level Wigner-tomography schedule for the m-component cat.

    Pump displacement D(alpha) -> Kerr flux-bias window of width tau0/m ->
    readout displacement D(-gamma) -> two pi/2 probe pulses on the transmon
    separated by the parity interval 1/(2 chi) -> readout marker.  When
    fluxonium parameters are supplied, the requested Kerr value is checked
    against the flux scan and an unreachable target raises.
    """
    if m not in (2, 3, 4):
        raise ValueError("component count m must be 2, 3 or 4")
    if fluxonium is not None:
        from .effective import find_flux_for_kerr

        find_flux_for_kerr(fluxonium, kerr_mhz)   # raises KerrRangeError if out of range
    width = tau0_ns(kerr_mhz) / m
    if parity_chi_ghz is not None and parity_chi_ghz > 0:
        parity_interval = 1.0 / (2.0 * parity_chi_ghz)
    else:
        parity_interval = 0.0
    t = 0.0
    pump = PulseEnvelope("rectangular", 1.0, pump_duration_ns, start_ns=t,
                         metadata={"role": "pump", "displacement": repr(complex(alpha))})
    t += pump_duration_ns
    bias = PulseEnvelope("rectangular", 1.0, width, start_ns=t,
                         metadata={"role": "kerr-bias", "kerr_mhz": repr(kerr_mhz)})
    t += width
    probe_disp = PulseEnvelope("rectangular", 1.0, pump_duration_ns, start_ns=t,
                               metadata={"role": "displacement", "displacement": repr(complex(-gamma))})
    t += pump_duration_ns
    pi2a = PulseEnvelope("gaussian", 1.0, pi2_duration_ns, start_ns=t,
                         metadata={"role": "pi2", "modulation": "sinc"})
    t += pi2_duration_ns + parity_interval
    pi2b = PulseEnvelope("gaussian", 1.0, pi2_duration_ns, start_ns=t,
                         metadata={"role": "pi2", "modulation": "sinc"})
    t += pi2_duration_ns
    readout = PulseEnvelope("rectangular", 1.0, readout_duration_ns, start_ns=t,
                            metadata={"role": "readout"})
    return PulseSequence(
        (
            ("fluxonium-drive", pump),
            ("fluxonium-flux", bias),
            ("fluxonium-drive", probe_disp),
            ("transmon-drive", pi2a),
            ("transmon-drive", pi2b),
            ("readout", readout),
        ),
        metadata={
            "m": m,
            "kerr_mhz": kerr_mhz,
            "flux_width_ns": width,
            "parity_interval_ns": parity_interval,
            "alpha": repr(complex(alpha)),
            "gamma": repr(complex(gamma)),
        },
    )
