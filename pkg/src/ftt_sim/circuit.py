"""Circuit description: parameter sets, capacitance network, JSON config parsing.

Unit conventions used throughout the package: energies and frequencies are
linear frequencies (GHz), coupling strengths are MHz, capacitances are fF,
fluxes are phases in radians (2*pi*Phi/Phi0).  Factors of 2*pi appear only
inside time propagators.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field, asdict

import numpy as np

from .errors import ConfigError, InvariantError, IllConditionedError

TWO_PI = 2.0 * math.pi

# coupling capacitance comparable to a self capacitance: perturbative
# formulas (and the lumped-element picture itself) start to degrade
_CAP_RATIO_WARN = 0.1


@dataclass(frozen=True)
class FluxoniumParams:
    """Fluxonium qubit: small/big junction pair shunted by a linear inductor.

    E_C, E_J, E_L in GHz; beta is the small/big junction energy ratio;
    phi_ext is the external flux phase in radians, in [0, 2*pi).
    omega optionally records the design 0-1 frequency (GHz).
    """

    E_C: float
    E_J: float
    E_L: float
    beta: float
    phi_ext: float = 0.0
    omega: float | None = None

    def validate(self, path="fluxonium"):
        for name in ("E_C", "E_J", "E_L"):
            if getattr(self, name) <= 0:
                raise InvariantError(f"{path}.{name} > 0", f"got {getattr(self, name)}")
        if not 0.0 < self.beta < 1.0:
            raise InvariantError(f"{path}.beta in (0, 1)", f"got {self.beta}")
        if not 0.0 <= self.phi_ext < TWO_PI:
            raise InvariantError(f"{path}.phi_ext in [0, 2pi)", f"got {self.phi_ext}")
        return self


@dataclass(frozen=True)
class TransmonParams:
    """Transmon-style mode (also used for the coupler): E_C, E_J in GHz."""

    E_C: float
    E_J: float
    n_g: float = 0.0
    omega: float | None = None

    def validate(self, path="transmon"):
        if self.E_C <= 0:
            raise InvariantError(f"{path}.E_C > 0", f"got {self.E_C}")
        if not self.E_C < self.E_J:
            raise InvariantError(f"{path}.E_C < E_J", f"got E_C={self.E_C}, E_J={self.E_J}")
        return self


@dataclass(frozen=True)
class CapacitanceNetwork:
    """Self and coupling capacitances of the three-node network (fF)."""

    C_1: float
    C_2: float
    C_c: float
    C_1c: float
    C_2c: float
    C_12: float

    def validate(self, path="capacitances"):
        for name in ("C_1", "C_2", "C_c"):
            if getattr(self, name) <= 0:
                raise InvariantError(f"{path}.{name} > 0", f"got {getattr(self, name)}")
        for name in ("C_1c", "C_2c", "C_12"):
            if getattr(self, name) < 0:
                raise InvariantError(f"{path}.{name} >= 0", f"got {getattr(self, name)}")
        ratio = max(self.C_1c, self.C_2c, self.C_12) / min(self.C_1, self.C_2, self.C_c)
        if ratio > _CAP_RATIO_WARN:
            warnings.warn(
                f"coupling capacitance reaches {ratio:.2f} of a self capacitance; "
                "perturbative coupling formulas degrade",
                stacklevel=2,
            )
        return self

    @property
    def eta(self) -> float:
        """Indirect-path factor C_1c*C_2c/(C_12*C_c); inf when C_12 = 0."""
        if self.C_12 == 0:
            return math.inf
        return self.C_1c * self.C_2c / (self.C_12 * self.C_c)


@dataclass(frozen=True)
class CouplingSet:
    """Qubit-coupler and qubit-qubit coupling strengths (MHz)."""

    g_1c: float
    g_2c: float
    g_12: float

    def validate(self, path="couplings"):
        if not (self.g_12 < self.g_1c and self.g_12 < self.g_2c):
            warnings.warn(
                f"{path}: direct coupling g_12={self.g_12} is not far below "
                f"g_1c={self.g_1c}, g_2c={self.g_2c}",
                stacklevel=2,
            )
        return self


@dataclass(frozen=True)
class Truncation:
    """Per-mode basis sizes kept in the tensor product."""

    fluxonium: int = 8
    coupler: int = 8
    transmon: int = 8

    def validate(self, path="truncation"):
        for name in ("fluxonium", "coupler", "transmon"):
            if getattr(self, name) < 3:
                raise InvariantError(f"{path}.{name} >= 3", f"got {getattr(self, name)}")
        return self

    def as_tuple(self):
        return (self.fluxonium, self.coupler, self.transmon)


@dataclass(frozen=True)
class CircuitSpec:
    """Validated, immutable description of the full three-mode circuit."""

    fluxonium: FluxoniumParams
    transmon: TransmonParams
    coupler: TransmonParams
    couplings: CouplingSet
    truncation: Truncation = field(default_factory=Truncation)
    capacitances: CapacitanceNetwork | None = None


def capacitance_matrix(net: CapacitanceNetwork) -> np.ndarray:
    """3x3 node capacitance matrix, node order (qubit 1, coupler, qubit 2)."""
    return np.array(
        [
            [net.C_1 + net.C_1c + net.C_12, -net.C_1c, -net.C_12],
            [-net.C_1c, net.C_c + net.C_1c + net.C_2c, -net.C_2c],
            [-net.C_12, -net.C_2c, net.C_2 + net.C_2c + net.C_12],
        ]
    )


def invert_capacitance_matrix(net: CapacitanceNetwork) -> np.ndarray:
    """Exact inverse of the node capacitance matrix (1/fF), symmetrized."""
    C = capacitance_matrix(net)
    cond = np.linalg.cond(C)
    if not np.isfinite(cond) or cond > 1e12:
        raise IllConditionedError(cond)
    Cinv = np.linalg.inv(C)
    return 0.5 * (Cinv + Cinv.T)


def perturbative_inverse(net: CapacitanceNetwork) -> np.ndarray:
    """First-order inverse, valid for coupling capacitances small against the
    node totals.  Cross-check only; `invert_capacitance_matrix` is authoritative.
    """
    c1 = net.C_1 + net.C_1c + net.C_12
    cc = net.C_c + net.C_1c + net.C_2c
    c2 = net.C_2 + net.C_2c + net.C_12
    return np.array(
        [
            [1 / c1, net.C_1c / (c1 * cc), (net.C_12 + net.C_1c * net.C_2c / cc) / (c1 * c2)],
            [net.C_1c / (c1 * cc), 1 / cc, net.C_2c / (c2 * cc)],
            [(net.C_12 + net.C_1c * net.C_2c / cc) / (c1 * c2), net.C_2c / (c2 * cc), 1 / c2],
        ]
    )


def coupling_from_capacitances(
    net: CapacitanceNetwork, omega_1: float, omega_2: float, omega_c: float
) -> CouplingSet:
    """Coupling strengths (MHz) from the capacitance network and mode
    frequencies (GHz): g_jc = (C_jc / (2 sqrt(C_j C_c))) sqrt(w_j w_c), and the
    qubit-qubit coupling carries both the direct capacitance and the
    coupler-mediated C_1c*C_2c/C_c path.
    """
    if min(omega_1, omega_2, omega_c) <= 0:
        raise ValueError("mode frequencies must be positive")
    g_1c = 0.5 * net.C_1c / math.sqrt(net.C_1 * net.C_c) * math.sqrt(omega_1 * omega_c)
    g_2c = 0.5 * net.C_2c / math.sqrt(net.C_2 * net.C_c) * math.sqrt(omega_2 * omega_c)
    c12_eff = net.C_12 + net.C_1c * net.C_2c / net.C_c
    g_12 = 0.5 * c12_eff / math.sqrt(net.C_1 * net.C_2) * math.sqrt(omega_1 * omega_2)
    return CouplingSet(g_1c=1e3 * g_1c, g_2c=1e3 * g_2c, g_12=1e3 * g_12)


_SCHEMA = {
    "fluxonium": {"required": {"E_C", "E_J", "E_L", "beta", "phi_ext"}, "optional": {"omega"}},
    "transmon": {"required": {"E_C", "E_J", "n_g"}, "optional": {"omega"}},
    "coupler": {"required": {"E_C", "E_J"}, "optional": {"n_g", "omega"}},
    "couplings": {"required": {"g_1c", "g_2c", "g_12"}, "optional": set()},
    "capacitances": {"required": {"C_1", "C_2", "C_c", "C_1c", "C_2c", "C_12"}, "optional": set()},
    "truncation": {"required": set(), "optional": {"fluxonium", "transmon", "coupler"}},
}


def _check_section(doc, section, required_section=True):
    if section not in doc:
        if required_section:
            raise ConfigError("missing section", path=section)
        return None
    body = doc[section]
    if not isinstance(body, dict):
        raise ConfigError("expected an object", path=section)
    schema = _SCHEMA[section]
    for key in schema["required"]:
        if key not in body:
            raise ConfigError("missing required field", path=f"{section}.{key}")
    for key in body:
        if key not in schema["required"] | schema["optional"]:
            raise ConfigError("unknown field", path=f"{section}.{key}")
    for key, value in body.items():
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise ConfigError("expected a number", path=f"{section}.{key}")
    return body


def parse_config(text: str) -> CircuitSpec:
    """Parse and validate a JSON circuit config into a CircuitSpec.

    Couplings may be given directly (`couplings`, Table-style, the default
    route) or derived from a `capacitances` section; supplying both is an
    error.  Truncation sizes default to 8 per mode.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("top level must be an object")
    for key in doc:
        if key not in _SCHEMA:
            raise ConfigError("unknown section", path=key)

    flx = FluxoniumParams(**_check_section(doc, "fluxonium")).validate()
    tr = TransmonParams(**_check_section(doc, "transmon")).validate("transmon")
    cp_body = dict(_check_section(doc, "coupler"))
    cp_body.setdefault("n_g", 0.0)
    cp = TransmonParams(**cp_body).validate("coupler")

    has_g = "couplings" in doc
    has_c = "capacitances" in doc
    if has_g and has_c:
        raise ConfigError("give either couplings or capacitances, not both", path="couplings")
    if not has_g and not has_c:
        raise ConfigError("missing section: couplings or capacitances", path="couplings")

    caps = None
    if has_c:
        caps = CapacitanceNetwork(**_check_section(doc, "capacitances")).validate()
        couplings = resolve_couplings(caps, flx, tr, cp).validate()
    else:
        couplings = CouplingSet(**_check_section(doc, "couplings")).validate()

    trunc_body = _check_section(doc, "truncation", required_section=False) or {}
    trunc = Truncation(**{k: int(v) for k, v in trunc_body.items()}).validate()

    return CircuitSpec(
        fluxonium=flx, transmon=tr, coupler=cp,
        couplings=couplings, truncation=trunc, capacitances=caps,
    )


def resolve_couplings(
    net: CapacitanceNetwork,
    fluxonium: FluxoniumParams,
    transmon: TransmonParams,
    coupler: TransmonParams,
) -> CouplingSet:
    """Derive the coupling set from capacitances using each mode's exact
    0-1 transition frequency."""
    from .hamiltonian import bare_frequency  # deferred: avoids import cycle

    w1 = bare_frequency(fluxonium)
    w2 = bare_frequency(transmon)
    wc = bare_frequency(coupler)
    return coupling_from_capacitances(net, w1, w2, wc)


def spec_to_json(spec: CircuitSpec) -> str:
    """Serialize a CircuitSpec back to its JSON config form."""
    doc = {}
    for section in ("fluxonium", "transmon", "coupler"):
        body = asdict(getattr(spec, section))
        if body.get("omega") is None:
            body.pop("omega", None)
        doc[section] = body
    if spec.capacitances is not None:
        doc["capacitances"] = asdict(spec.capacitances)
    else:
        doc["couplings"] = asdict(spec.couplings)
    doc["truncation"] = asdict(spec.truncation)
    return json.dumps(doc, indent=2)
