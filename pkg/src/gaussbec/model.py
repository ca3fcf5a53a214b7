"""Physical parameters, normal modes and stability of the two-component double well.

All rates share one arbitrary frequency unit (hbar = 1); times are in the
inverse unit, commonly fixed by setting ``kappa_b = 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

# |mu_1 - mu_2| below this (relative) routes to the decoupled propagator
DEGENERACY_RTOL = 1e-9


@dataclass(frozen=True)
class ModelParams:
    """Inputs of the two-spin Hamiltonian.

    ``N_a``/``N_b`` are atom counts, ``Omega_*`` tunneling strengths,
    ``kappa_*`` intraspecies and ``kappa`` interspecies interaction strengths.
    """

    N_a: int
    N_b: int
    Omega_a: float
    Omega_b: float
    kappa_a: float
    kappa_b: float
    kappa: float

    @property
    def j_a(self) -> float:
        return self.N_a / 2

    @property
    def j_b(self) -> float:
        return self.N_b / 2

    @property
    def symmetric(self) -> bool:
        return (
            self.N_a == self.N_b
            and self.Omega_a == self.Omega_b
            and self.kappa_a == self.kappa_b
        )

    def replace(self, **changes) -> "ModelParams":
        d = self.to_dict()
        d.update(changes)
        return ModelParams(**d)

    def to_dict(self) -> dict:
        return {
            "N_a": self.N_a,
            "N_b": self.N_b,
            "Omega_a": self.Omega_a,
            "Omega_b": self.Omega_b,
            "kappa_a": self.kappa_a,
            "kappa_b": self.kappa_b,
            "kappa": self.kappa,
        }


@dataclass(frozen=True)
class NormalModes:
    """Normal-mode data of the linearized (oscillator) Hamiltonian.

    ``omega_2_imag`` is nonzero only for unstable parameters, where
    ``omega_2`` is then reported as 0.  ``mu_i`` is the ratio q_b/q_a of
    the amplitudes in mode i.
    """

    omega_1: float
    omega_2: float
    mu_1: float
    mu_2: float
    stable: bool
    degenerate: bool
    omega_2_imag: float = 0.0


@dataclass
class ValidationReport:
    errors: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors

    @property
    def status(self) -> str:
        if self.errors:
            return "errors"
        return "warnings" if self.warnings else "ok"


def validate(params: ModelParams) -> ValidationReport:
    """Check domain constraints without raising."""
    report = ValidationReport()
    if not (isinstance(params.N_a, (int, np.integer)) and params.N_a >= 1):
        report.errors.append("atom count must be positive (N_a)")
    if not (isinstance(params.N_b, (int, np.integer)) and params.N_b >= 1):
        report.errors.append("atom count must be positive (N_b)")
    if not params.Omega_a > 0:
        report.errors.append("tunneling strength must be positive (Omega_a)")
    if not params.Omega_b > 0:
        report.errors.append("tunneling strength must be positive (Omega_b)")
    if not params.kappa_a >= 0:
        report.errors.append("intraspecies interaction must be nonnegative (kappa_a)")
    if not params.kappa_b >= 0:
        report.errors.append("intraspecies interaction must be nonnegative (kappa_b)")
    values = (params.Omega_a, params.Omega_b, params.kappa_a, params.kappa_b, params.kappa)
    if not all(math.isfinite(float(v)) for v in values):
        report.errors.append("all strengths must be finite")
    if report.errors:
        return report

    kc = critical_coupling(params)
    ke = extended_space_limit(params)
    k = abs(params.kappa)
    if k >= kc:
        report.warnings.append(
            f"unstable: |kappa| >= kappa_c ({k:g} >= {kc:.6g}); oscillator approximation invalid"
        )
    elif k > ke:
        report.warnings.append(
            f"kappa_e < |kappa| < kappa_c ({ke:.6g} < {k:g} < {kc:.6g}): "
            "stable only because of the finite atom number"
        )
    weak = max(params.kappa_a * params.j_a, params.kappa_b * params.j_b, k * math.sqrt(params.j_a * params.j_b))
    if params.N_a < 10 or params.N_b < 10:
        report.warnings.append("low-occupation assumption cannot be presumed for N < 10")
    elif weak > 0 and min(params.Omega_a, params.Omega_b) < 0.1 * weak:
        report.warnings.append("interaction energies dominate tunneling; low occupation cannot be presumed")
    return report


def critical_coupling(params: ModelParams) -> float:
    """Largest |kappa| for which both normal-mode frequencies stay real."""
    return 0.5 * math.sqrt(
        (params.Omega_a / params.j_a + 2 * params.kappa_a)
        * (params.Omega_b / params.j_b + 2 * params.kappa_b)
    )


def extended_space_limit(params: ModelParams) -> float:
    """Large-N limit of :func:`critical_coupling` (phase-separation threshold)."""
    return math.sqrt(params.kappa_a * params.kappa_b)


def _stiffness(params: ModelParams) -> np.ndarray:
    # q_dd = -K q for q = (q_a, q_b)
    ja, jb = params.j_a, params.j_b
    Oa, Ob = params.Omega_a, params.Omega_b
    g = 2 * params.kappa * math.sqrt(ja * jb)
    return np.array(
        [
            [Oa * Oa + 2 * params.kappa_a * ja * Oa, g * Oa],
            [g * Ob, Ob * Ob + 2 * params.kappa_b * jb * Ob],
        ]
    )


def normal_modes(params: ModelParams) -> NormalModes:
    K = _stiffness(params)
    half_trace = 0.5 * (K[0, 0] + K[1, 1])
    half_diff = 0.5 * (K[0, 0] - K[1, 1])
    disc = math.sqrt(half_diff * half_diff + K[0, 1] * K[1, 0])
    w1_sq = float(half_trace + disc)
    # product form avoids cancellation in the lower root
    det = K[0, 0] * K[1, 1] - K[0, 1] * K[1, 0]
    w2_sq = float(det / w1_sq)
    stable = abs(params.kappa) < critical_coupling(params) and w2_sq > 0

    omega_1 = math.sqrt(w1_sq)
    if w2_sq > 0:
        omega_2, omega_2_imag = math.sqrt(w2_sq), 0.0
    else:
        omega_2, omega_2_imag = 0.0, math.sqrt(-w2_sq)

    if params.kappa == 0:
        # decoupled: each mode lives on one species
        return NormalModes(omega_1, omega_2, math.nan, math.nan, stable, True, omega_2_imag)

    mu_1 = _mode_ratio(K, w1_sq)
    mu_2 = _mode_ratio(K, w2_sq)
    scale = max(1.0, abs(mu_1), abs(mu_2))
    finite = math.isfinite(mu_1) and math.isfinite(mu_2)
    degenerate = bool(not finite or abs(mu_1 - mu_2) < DEGENERACY_RTOL * scale)
    return NormalModes(omega_1, omega_2, mu_1, mu_2, stable, degenerate, omega_2_imag)


def _mode_ratio(K: np.ndarray, w_sq: float) -> float:
    # two algebraically equal forms of q_b/q_a; take the better-conditioned one
    d1 = w_sq - K[0, 0]
    d2 = w_sq - K[1, 1]
    if abs(d2) >= abs(d1):
        return K[1, 0] / d2
    return d1 / K[0, 1]
