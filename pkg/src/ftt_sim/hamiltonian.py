"""Single-mode and three-mode Hamiltonians, diagonalization, spectrum scans.

Single modes are built exactly: the fluxonium in the harmonic basis of its
(E_C, E_L) oscillator with the junction cosines applied as exact matrix
functions, the transmon-style modes in the charge basis.  The full model
tensors truncated mode eigenbases (order: fluxonium x coupler x transmon)
and couples charge operators; a Duffing-oscillator variant pinned at the
recorded design frequencies is available for coupler-sweep figures.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import eigh

from .circuit import CircuitSpec, FluxoniumParams, TransmonParams
from .errors import (
    ConvergenceError,
    DimensionError,
    NotHermitianError,
    RootBracketError,
)

DEFAULT_FLUXONIUM_BASIS = 40
DEFAULT_CHARGE_CUTOFF = 30
HERMITICITY_RTOL = 1e-12
DIM_CAP = 20_000


@dataclass(frozen=True)
class Operator:
    """Dense complex square matrix with mode-dimension metadata."""

    data: np.ndarray
    dims: tuple[int, ...]
    labels: tuple[str, ...]

    def __post_init__(self):
        data = np.ascontiguousarray(self.data, dtype=complex)
        if data.ndim != 2 or data.shape[0] != data.shape[1]:
            raise ValueError("operator data must be a square matrix")
        if math.prod(self.dims) != data.shape[0]:
            raise ValueError(f"prod(dims)={math.prod(self.dims)} != size {data.shape[0]}")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    def hermiticity_defect(self) -> float:
        return float(np.abs(self.data - self.data.conj().T).max())

    def is_hermitian(self, rtol: float = HERMITICITY_RTOL) -> bool:
        scale = max(float(np.abs(self.data).max()), 1e-300)
        return self.hermiticity_defect() <= rtol * scale


def destroy(dim: int) -> np.ndarray:
    """Truncated lowering operator, a|k> = sqrt(k)|k-1>."""
    return np.diag(np.sqrt(np.arange(1, dim, dtype=float)), 1).astype(complex)


def mode_operators(dim: int, E_C: float, E_ind: float, label: str = "mode") -> dict[str, Operator]:
    """Ladder, number and phase operators of a harmonic mode.

    Zero-point factors follow phi = (2 E_C / E_ind)^(1/4) (a^dag + a) and
    n = (i/2)(E_ind / 2 E_C)^(1/4) (a^dag - a), with E_ind the Josephson
    energy for transmon-style modes or the inductive energy for the
    fluxonium basis.  On the truncated space [a, a^dag] = 1 everywhere
    except the top Fock level.
    """
    if dim < 2:
        raise ValueError("dim >= 2 required")
    a = destroy(dim)
    ad = a.conj().T
    phi_zpf = (2.0 * E_C / E_ind) ** 0.25
    n_zpf = 0.5 * (E_ind / (2.0 * E_C)) ** 0.25
    ops = {
        "a": a,
        "a_dagger": ad,
        "n": 1j * n_zpf * (ad - a),
        "phi": phi_zpf * (ad + a),
    }
    return {k: Operator(v, (dim,), (label,)) for k, v in ops.items()}


def _matrix_function(h: np.ndarray, f) -> np.ndarray:
    """Exact f(H) of a Hermitian matrix through its eigendecomposition."""
    w, v = eigh(h)
    return (v * f(w)) @ v.conj().T


def fluxonium_hamiltonian(
    p: FluxoniumParams, N: int = DEFAULT_FLUXONIUM_BASIS, check_convergence: bool = False
) -> Operator:
    """Fluxonium Hamiltonian in the harmonic (E_C, E_L) basis, N levels.

    Both junction cosines are evaluated exactly as matrix functions of the
    phase operator (never a truncated polynomial: the phase excursions are
    too large for that).
    """
    ops = mode_operators(N, p.E_C, p.E_L, "fluxonium")
    n = ops["n"].data
    phi = ops["phi"].data
    h = (
        4.0 * p.E_C * (n @ n)
        - p.beta * p.E_J * _matrix_function(phi, np.cos)
        - p.E_J * _matrix_function(phi, lambda x: np.cos(p.phi_ext - x))
        + 0.5 * p.E_L * (phi @ phi)
    )
    h = 0.5 * (h + h.conj().T)
    if check_convergence:
        shift = _convergence_shift(lambda m: fluxonium_hamiltonian(p, m).data, N)
        if shift > 1e-6:
            raise ConvergenceError(
                f"lowest levels move by {shift:.2e} GHz when N -> N+10; increase N"
            )
    return Operator(h, (N,), ("fluxonium",))


def transmon_hamiltonian(
    p: TransmonParams, n_cut: int = DEFAULT_CHARGE_CUTOFF, check_convergence: bool = False
) -> Operator:
    """Transmon Hamiltonian in the charge basis, dimension 2*n_cut + 1."""
    ns = np.arange(-n_cut, n_cut + 1, dtype=float)
    h = np.diag(4.0 * p.E_C * (ns - p.n_g) ** 2).astype(complex)
    hop = -0.5 * p.E_J * np.ones(2 * n_cut)
    h += np.diag(hop, 1) + np.diag(hop, -1)
    if check_convergence:
        shift = _convergence_shift(lambda m: transmon_hamiltonian(p, (m - 1) // 2).data, 2 * n_cut + 1)
        if shift > 1e-6:
            raise ConvergenceError(
                f"lowest levels move by {shift:.2e} GHz when n_cut grows; increase n_cut"
            )
    return Operator(h, (2 * n_cut + 1,), ("transmon",))


def charge_number_operator(n_cut: int) -> np.ndarray:
    return np.diag(np.arange(-n_cut, n_cut + 1, dtype=float)).astype(complex)


def _convergence_shift(builder, N: int, k: int = 4, dN: int = 10) -> float:
    w0 = np.sort(eigh(builder(N), eigvals_only=True))[:k]
    w1 = np.sort(eigh(builder(N + dN), eigvals_only=True))[:k]
    return float(np.abs((w0 - w0[0]) - (w1 - w1[0])).max())


def convergence_shift_fluxonium(p: FluxoniumParams, N: int = DEFAULT_FLUXONIUM_BASIS) -> float:
    """Max shift of the 4 lowest levels (GHz) when the basis grows by 10."""
    return _convergence_shift(lambda m: fluxonium_hamiltonian(p, m).data, N)


def convergence_shift_transmon(p: TransmonParams, n_cut: int = DEFAULT_CHARGE_CUTOFF) -> float:
    w0 = np.sort(eigh(transmon_hamiltonian(p, n_cut).data, eigvals_only=True))[:4]
    w1 = np.sort(eigh(transmon_hamiltonian(p, n_cut + 5).data, eigvals_only=True))[:4]
    return float(np.abs((w0 - w0[0]) - (w1 - w1[0])).max())


def eigensystem(H, k: int | None = None):
    """k lowest eigenpairs of a Hermitian operator.

    Returns (energies, states) with energies ascending (GHz) and states as
    columns.  Raises NotHermitianError with the max asymmetry otherwise.
    """
    h = H.data if isinstance(H, Operator) else np.asarray(H, dtype=complex)
    scale = max(float(np.abs(h).max()), 1e-300)
    defect = float(np.abs(h - h.conj().T).max())
    if defect > HERMITICITY_RTOL * scale * 10:
        raise NotHermitianError(defect)
    if k is None or k >= h.shape[0]:
        w, v = eigh(h)
    else:
        w, v = eigh(h, subset_by_index=[0, k - 1])
    return w, v


def bare_frequency(params) -> float:
    """Exact 0-1 transition frequency (GHz) of a single mode."""
    if isinstance(params, FluxoniumParams):
        w, _ = eigensystem(fluxonium_hamiltonian(params), 2)
    else:
        w, _ = eigensystem(transmon_hamiltonian(params), 2)
    return float(w[1] - w[0])


def coupler_ej_for_frequency(E_C: float, omega_c: float, tol: float = 1e-9) -> float:
    """Solve sqrt(8 E_C E_J) - E_C = omega_c for E_J by bisection."""
    f = lambda ej: math.sqrt(8.0 * E_C * ej) - E_C - omega_c
    lo, hi = 1e-6, 1.0
    while f(hi) < 0:
        hi *= 2.0
        if hi > 1e9:
            raise RootBracketError(f"no E_J reaches omega_c={omega_c} GHz")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if f(mid) < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _standardize_sign(vectors: np.ndarray) -> np.ndarray:
    """Fix eigenvector phases: largest-magnitude component real positive."""
    out = vectors.copy()
    for j in range(out.shape[1]):
        i = int(np.argmax(np.abs(out[:, j])))
        ph = out[i, j]
        if ph != 0:
            out[:, j] *= np.conj(ph) / abs(ph)
    return out


@dataclass(frozen=True)
class BareMode:
    """Truncated single-mode eigenbasis: energies, charge operator, n01."""

    label: str
    energies: np.ndarray          # (d,), referenced to the mode ground state
    n_op: np.ndarray              # (d, d) charge operator in the eigenbasis
    n01: float                    # |<0|n|1>|, used to normalize couplings


def _fluxonium_mode(p: FluxoniumParams, d: int, basis: int) -> BareMode:
    ops = mode_operators(basis, p.E_C, p.E_L, "fluxonium")
    w, v = eigensystem(fluxonium_hamiltonian(p, basis))
    v = _standardize_sign(v[:, :d])
    n_eig = v.conj().T @ ops["n"].data @ v
    return BareMode("fluxonium", w[:d] - w[0], n_eig, abs(n_eig[0, 1]))


def _transmon_mode(p: TransmonParams, d: int, n_cut: int, label: str) -> BareMode:
    w, v = eigensystem(transmon_hamiltonian(p, n_cut))
    v = _standardize_sign(v[:, :d])
    n_eig = v.conj().T @ charge_number_operator(n_cut) @ v
    return BareMode(label, w[:d] - w[0], n_eig, abs(n_eig[0, 1]))


def _duffing_mode(label: str, omega: float, alpha: float, d: int) -> BareMode:
    ks = np.arange(d, dtype=float)
    energies = omega * ks + 0.5 * alpha * ks * (ks - 1.0)
    a = destroy(d)
    n_op = 1j * (a.conj().T - a)   # quadrature normalized to |<0|n|1>| = 1
    return BareMode(label, energies, n_op, 1.0)


def fluxonium_anharmonicity(p: FluxoniumParams, basis: int = DEFAULT_FLUXONIUM_BASIS) -> float:
    """alpha = (E2 - E1) - (E1 - E0) from exact diagonalization (GHz)."""
    w, _ = eigensystem(fluxonium_hamiltonian(p, basis), 3)
    return float((w[2] - w[1]) - (w[1] - w[0]))


def bare_modes(
    spec: CircuitSpec,
    *,
    model: str = "exact",
    omega_c: float | None = None,
    coupler_ej: float | None = None,
    fluxonium_basis: int = DEFAULT_FLUXONIUM_BASIS,
    charge_cutoff: int = DEFAULT_CHARGE_CUTOFF,
) -> tuple[BareMode, BareMode, BareMode]:
    """Truncated bare modes (fluxonium, coupler, transmon).

    model="exact" diagonalizes each mode's exact Hamiltonian; "targets"
    builds Duffing oscillators pinned at the recorded design frequencies
    (the convention behind the tabulated qubit frequencies), with the
    transmon-style anharmonicity -E_C and the fluxonium anharmonicity from
    exact diagonalization.
    """
    d1, dc, d2 = spec.truncation.as_tuple()
    coupler = spec.coupler
    if omega_c is not None and coupler_ej is not None:
        raise ValueError("give omega_c or coupler_ej, not both")
    if omega_c is not None and model == "exact":
        coupler_ej = coupler_ej_for_frequency(coupler.E_C, omega_c)
    if coupler_ej is not None:
        coupler = replace(coupler, E_J=coupler_ej)

    if model == "exact":
        f = _fluxonium_mode(spec.fluxonium, d1, fluxonium_basis)
        c = _transmon_mode(coupler, dc, charge_cutoff, "coupler")
        t = _transmon_mode(spec.transmon, d2, charge_cutoff, "transmon")
    elif model == "targets":
        w1 = spec.fluxonium.omega
        w2 = spec.transmon.omega
        if w1 is None or w2 is None:
            raise ValueError('model="targets" needs recorded omega for both qubits')
        if omega_c is None:
            wc = math.sqrt(8.0 * coupler.E_C * coupler.E_J)
        else:
            wc = omega_c
        f = _duffing_mode("fluxonium", w1, fluxonium_anharmonicity(spec.fluxonium), d1)
        c = _duffing_mode("coupler", wc, -coupler.E_C, dc)
        t = _duffing_mode("transmon", w2, -spec.transmon.E_C, d2)
    else:
        raise ValueError(f"unknown model {model!r}")
    return f, c, t


def _kron3(A, B, C):
    return np.kron(np.kron(A, B), C)


def full_hamiltonian(
    spec: CircuitSpec,
    *,
    model: str = "exact",
    omega_c: float | None = None,
    coupler_ej: float | None = None,
    dim_cap: int = DIM_CAP,
    **mode_kwargs,
) -> Operator:
    """Three-mode Hamiltonian on fluxonium x coupler x transmon.

    Charge-charge couplings are built from each mode's charge operator,
    normalized by the 0-1 matrix elements so that the tabulated g is the
    0-1 transition coupling; the full n*n product keeps the
    counter-rotating terms.
    """
    dims = spec.truncation.as_tuple()
    if math.prod(dims) > dim_cap:
        raise DimensionError(f"product of dims {dims} exceeds cap {dim_cap}")
    f, c, t = bare_modes(
        spec, model=model, omega_c=omega_c, coupler_ej=coupler_ej, **mode_kwargs
    )
    d1, dc, d2 = dims
    i1, ic, i2 = np.eye(d1), np.eye(dc), np.eye(d2)
    h = (
        _kron3(np.diag(f.energies).astype(complex), ic, i2)
        + _kron3(i1, np.diag(c.energies).astype(complex), i2)
        + _kron3(i1, ic, np.diag(t.energies).astype(complex))
    )
    g = spec.couplings
    h += (1e-3 * g.g_1c / (f.n01 * c.n01)) * _kron3(f.n_op, c.n_op, i2)
    h += (1e-3 * g.g_2c / (c.n01 * t.n01)) * _kron3(i1, c.n_op, t.n_op)
    h += (1e-3 * g.g_12 / (f.n01 * t.n01)) * _kron3(f.n_op, ic, t.n_op)
    h = 0.5 * (h + h.conj().T)
    return Operator(h, dims, ("fluxonium", "coupler", "transmon"))


def bare_label(index: int, dims: tuple[int, ...]) -> str:
    """Tensor-basis index -> bare-state label, e.g. 37 -> "101"."""
    parts = []
    for d in reversed(dims):
        parts.append(index % d)
        index //= d
    return "".join(str(q) for q in reversed(parts))


@dataclass(frozen=True)
class SpectrumTable:
    """Eigenvalues (ground-referenced) and bare-state labels along a sweep."""

    param: str
    grid: np.ndarray              # (n,)
    energies: np.ndarray          # (n, k), E - E0 in GHz, ascending
    labels: list[list[str]]       # (n, k) max-overlap bare labels
    ambiguous: np.ndarray         # (n, k) bool, top-two overlaps within 1e-3
    overlaps: np.ndarray | None = None   # (n, k, k) |<bare_j|dressed_i>|^2

    def rows(self):
        for i, x in enumerate(self.grid):
            yield [x, *self.energies[i], *self.labels[i]]

    def header(self):
        k = self.energies.shape[1]
        return ["param", *[f"E{j}" for j in range(k)], *[f"label{j}" for j in range(k)]]


_SWEEPABLE = ("fluxonium.phi_ext", "transmon.n_g", "coupler.E_J", "coupler.omega_c")


def _spec_with(spec: CircuitSpec, param: str, value: float) -> CircuitSpec:
    section, fieldname = param.split(".")
    obj = replace(getattr(spec, section), **{fieldname: value})
    return replace(spec, **{section: obj})


def spectrum_scan(
    spec: CircuitSpec,
    param: str,
    grid,
    *,
    k: int = 6,
    model: str = "exact",
    bare: bool = False,
    keep_overlaps: bool = True,
) -> SpectrumTable:
    """Scan k lowest levels against one parameter.

    param is one of fluxonium.phi_ext, transmon.n_g, coupler.E_J,
    coupler.omega_c.  With bare=True only the swept mode's exact
    single-mode spectrum is scanned (for offset-charge / flux dispersion
    figures); otherwise the full three-mode model is used and dressed
    levels are labeled by maximum overlap with the bare tensor states.
    """
    if param not in _SWEEPABLE:
        raise ValueError(f"sweep parameter must be one of {_SWEEPABLE}")
    grid = np.asarray(grid, dtype=float)
    if bare:
        return _bare_scan(spec, param, grid, k)

    dims = spec.truncation.as_tuple()
    energies = np.empty((grid.size, k))
    labels: list[list[str]] = []
    ambiguous = np.zeros((grid.size, k), dtype=bool)
    overlaps = np.empty((grid.size, k, k)) if keep_overlaps else None
    for i, x in enumerate(grid):
        if param == "coupler.omega_c":
            h = full_hamiltonian(spec, model=model, omega_c=float(x))
        else:
            sp = _spec_with(spec, param, float(x))
            h = full_hamiltonian(sp, model=model)
        w, v = eigensystem(h, k)
        energies[i] = w - w[0]
        p = np.abs(v) ** 2
        row_labels = []
        for j in range(k):
            order = np.argsort(p[:, j])
            top, second = order[-1], order[-2]
            row_labels.append(bare_label(int(top), dims))
            ambiguous[i, j] = p[top, j] - p[second, j] < 1e-3
        labels.append(row_labels)
        if keep_overlaps:
            # overlap of each dressed level with the k lowest-index bare states
            bare_order = np.argsort(np.diag(h.data.real))[:k]
            overlaps[i] = p[bare_order, :].T
    return SpectrumTable(param, grid, energies, labels, ambiguous, overlaps)


def _bare_scan(spec: CircuitSpec, param: str, grid: np.ndarray, k: int) -> SpectrumTable:
    energies = np.empty((grid.size, k))
    labels = []
    for i, x in enumerate(grid):
        sp = _spec_with(spec, param, float(x))
        if param.startswith("fluxonium"):
            h = fluxonium_hamiltonian(sp.fluxonium)
        elif param.startswith("transmon"):
            h = transmon_hamiltonian(sp.transmon)
        else:
            h = transmon_hamiltonian(sp.coupler)
        w, _ = eigensystem(h, k)
        energies[i] = w - w[0]
        labels.append([str(j) for j in range(k)])
    return SpectrumTable(param, grid, energies, labels, np.zeros((grid.size, k), dtype=bool))


def minimum_gap(
    spec: CircuitSpec,
    grid,
    pair: tuple[str, str],
    *,
    model: str = "targets",
    k: int = 6,
    dominance: float = 1.5,
) -> tuple[float, float]:
    """Minimum avoided-crossing gap (GHz) between the dressed branches
    carrying the two bare labels, over a coupler-frequency sweep.

    At each grid point the two dressed states are picked by their combined
    weight on the bare pair; points where the pair does not dominate
    (combined weight below `dominance` out of 2) are skipped so the dip
    between neighboring crossings is not mistaken for the gap.
    Returns (gap, omega_c at the minimum).
    """
    dims = spec.truncation.as_tuple()
    size = math.prod(dims)
    ia = _label_index(pair[0], dims)
    ib = _label_index(pair[1], dims)
    if max(ia, ib) >= size:
        raise ValueError("pair labels outside the truncated space")
    best = None
    for x in np.asarray(grid, dtype=float):
        h = full_hamiltonian(spec, model=model, omega_c=float(x))
        w, v = eigensystem(h, k)
        p = np.abs(v) ** 2
        sa, sb = int(np.argmax(p[ia])), int(np.argmax(p[ib]))
        if sa == sb:
            continue
        weight = p[ia, sa] + p[ia, sb] + p[ib, sa] + p[ib, sb]
        if weight < dominance:
            continue
        gap = abs(w[sa] - w[sb])
        if best is None or gap < best[0]:
            best = (gap, float(x))
    if best is None:
        raise RootBracketError(f"no region where pair {pair} dominates on the sweep")
    return best


def _label_index(label: str, dims: tuple[int, ...]) -> int:
    idx = 0
    for q, d in zip(label, dims):
        idx = idx * d + int(q)
    return idx
