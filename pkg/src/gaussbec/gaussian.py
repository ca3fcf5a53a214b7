"""Two-mode Gaussian covariance-matrix toolkit.

Covariance matrices are plain ``(4, 4)`` float arrays over
``(q_a, p_a, q_b, p_b)`` with ``M_ij = <X_i X_j + X_j X_i> - 2 <X_i><X_j>``,
so the vacuum is the identity and a single quadrature variance is ``M_ii / 2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.optimize import brentq

from .propagator import SYMPLECTIC_FORM, Propagator

PHYSICAL_TOL = 1e-8
SYMMETRIC_STATE_RTOL = 1e-6
XI_PATH_TOL = 1e-8
# xi within this of 1 is the separable boundary (rounding of n = 1 states)
BOUNDARY_TOL = 1e-12


class UnphysicalCovarianceError(ValueError):
    """Input violates the uncertainty principle (a symplectic eigenvalue < 1)."""


class StandardFormError(RuntimeError):
    """The local squeezing search could not be bracketed."""


class BlockInvariants(NamedTuple):
    n_a: float
    n_b: float
    c: float
    detC: float


@dataclass(frozen=True)
class StandardForm:
    """Locally reduced covariance matrix.

    ``n1, n2`` are the q/p variances of mode a, ``m1, m2`` those of mode b
    and ``c1, c2`` the q-q and p-p correlations; ``a0`` is the positive root of
    ``a0**4 = (m1 - 1) / (n1 - 1)`` (1 when either mode is pure and uncorrelated).
    """

    n1: float
    n2: float
    m1: float
    m2: float
    c1: float
    c2: float
    a0: float

    def matrix(self) -> np.ndarray:
        return np.array(
            [
                [self.n1, 0, self.c1, 0],
                [0, self.n2, 0, self.c2],
                [self.c1, 0, self.m1, 0],
                [0, self.c2, 0, self.m2],
            ],
            dtype=float,
        )


@dataclass(frozen=True)
class EntanglementReport:
    xi: float
    eof: float | None
    epr: float
    entangled: bool
    symmetric_state: bool
    n: float
    c: float


def vacuum_covariance() -> np.ndarray:
    return np.eye(4)


def mean_occupation(omega_over_kT: float) -> float:
    """Bose occupation 1 / (exp(x) - 1) of a mode with x = Omega / k_B T."""
    if not omega_over_kT > 0:
        raise ValueError("Omega/k_BT must be positive")
    # e^-x / (1 - e^-x) stays finite for large x
    return math.exp(-omega_over_kT) / -math.expm1(-omega_over_kT)


def thermal_covariance(nbar_a: float, nbar_b: float) -> np.ndarray:
    if nbar_a < 0 or nbar_b < 0:
        raise ValueError("mean occupations must be nonnegative")
    a, b = 2 * nbar_a + 1, 2 * nbar_b + 1
    return np.diag([a, a, b, b]).astype(float)


def symplectic_eigenvalues(M: np.ndarray) -> np.ndarray:
    """The two symplectic eigenvalues of ``M``, ascending (vacuum gives 1, 1)."""
    ev = np.abs(np.linalg.eigvals(1j * SYMPLECTIC_FORM @ np.asarray(M, dtype=float)))
    return np.sort(ev)[::2]


def as_covariance(M, require_physical: bool = True) -> np.ndarray:
    """Validate and symmetrize a covariance matrix.

    Raises :class:`UnphysicalCovarianceError` for asymmetric matrices or, when
    ``require_physical`` is set, matrices with a symplectic eigenvalue below
    ``1 - 1e-8``.
    """
    M = np.asarray(M, dtype=float)
    if M.shape != (4, 4):
        raise ValueError(f"expected a 4x4 covariance matrix, got shape {M.shape}")
    scale = max(1.0, float(np.max(np.abs(M))))
    if np.max(np.abs(M - M.T)) > 1e-12 * scale:
        raise UnphysicalCovarianceError("covariance matrix is not symmetric")
    M = 0.5 * (M + M.T)
    if not require_physical:
        return M
    nu = symplectic_eigenvalues(M)
    if nu[0] < 1 - PHYSICAL_TOL:
        raise UnphysicalCovarianceError(
            f"symplectic eigenvalue {nu[0]:.10g} < 1: state violates the uncertainty principle"
        )
    return M


def evolve_covariance(M0: np.ndarray, U: Propagator | np.ndarray) -> np.ndarray:
    """Return ``U M0 U^T``."""
    U = U.U if isinstance(U, Propagator) else np.asarray(U, dtype=float)
    M = U @ np.asarray(M0, dtype=float) @ U.T
    return 0.5 * (M + M.T)


def block_invariants(M: np.ndarray) -> BlockInvariants:
    M = np.asarray(M, dtype=float)
    detA = np.linalg.det(M[:2, :2])
    detB = np.linalg.det(M[2:, 2:])
    detC = float(np.linalg.det(M[:2, 2:]))
    return BlockInvariants(
        math.sqrt(max(detA, 0.0)), math.sqrt(max(detB, 0.0)), math.sqrt(max(0.0, -detC)), detC
    )


def local_invariants(M: np.ndarray) -> tuple[float, float, float, float]:
    """``(det A, det B, det C, det M)``, unchanged by local symplectic maps."""
    M = np.asarray(M, dtype=float)
    return (
        float(np.linalg.det(M[:2, :2])),
        float(np.linalg.det(M[2:, 2:])),
        float(np.linalg.det(M[:2, 2:])),
        float(np.linalg.det(M)),
    )


def _normalize_mode(A: np.ndarray) -> tuple[float, np.ndarray]:
    # S A S^T = n I with S = sqrt(n) A^{-1/2}, det S = 1
    w, V = np.linalg.eigh(A)
    n = math.sqrt(w[0] * w[1])
    S = math.sqrt(n) * (V / np.sqrt(w)) @ V.T
    return n, S


def _rotation_svd(C: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    # C = R1 diag(s) R2^T with proper rotations R1, R2 and signed s
    W, s, Vt = np.linalg.svd(C)
    V = Vt.T
    s = s.copy()
    if np.linalg.det(W) < 0:
        W[:, 1] *= -1
        s[1] *= -1
    if np.linalg.det(V) < 0:
        V[:, 1] *= -1
        s[1] *= -1
    return W, s, V


def _form_one(M: np.ndarray) -> tuple[float, float, float, float]:
    """Local reduction to A = n I, B = m I, C = diag(c1, c2)."""
    n, Sa = _normalize_mode(M[:2, :2])
    m, Sb = _normalize_mode(M[2:, 2:])
    Cp = Sa @ M[:2, 2:] @ Sb.T
    _, s, _ = _rotation_svd(Cp)
    return n, m, float(s[0]), float(s[1])


def _partner_squeeze(u: float, n: float, m: float) -> float:
    # positive root v of (n u - 1)(m / v - 1) = (n / u - 1)(m v - 1)
    a = n * u - 1
    b = n / u - 1
    disc = math.sqrt((a - b) ** 2 + 4 * a * b * m * m)
    if a - b >= 0:
        return 2 * a * m / ((a - b) + disc) if a > 0 else 1.0
    return ((b - a) + disc) / (2 * b * m)


def standard_form(M: np.ndarray, require_physical: bool = True) -> StandardForm:
    """Reduce ``M`` by local symplectic maps to the two-constraint standard form.

    The first stage brings both diagonal blocks to multiples of the identity
    and the correlation block to diagonal form.  The second stage applies
    opposite local squeezings ``diag(sqrt(u), 1/sqrt(u))`` and
    ``diag(sqrt(v), 1/sqrt(v))``: the ratio constraint fixes ``v`` given ``u``
    and ``u`` is then found by a bracketed root search on the correlation
    constraint.

    ``require_physical=False`` admits second-moment matrices that are not
    valid Gaussian covariances, such as those of finite spins.
    """
    M = as_covariance(M, require_physical)
    n, m, k1, k2 = _form_one(M)
    if abs(k1) < abs(k2):
        # a quarter-turn on both modes swaps the q and p correlations
        k1, k2 = k2, k1
    c1a, c2a = abs(k1), abs(k2)

    if n - 1 < 1e-12 or m - 1 < 1e-12:
        return StandardForm(n, n, m, m, k1, k2, 1.0)

    def mismatch(log_u: float) -> float:
        u = math.exp(log_u)
        v = _partner_squeeze(u, n, m)
        r = math.sqrt(u * v)
        lhs = c1a * r - c2a / r
        rhs = math.sqrt(max(0.0, (n * u - 1) * (m * v - 1))) - math.sqrt(max(0.0, (n / u - 1) * (m / v - 1)))
        return lhs - rhs

    lo, hi = -math.log(n), math.log(n)
    f_lo, f_hi = mismatch(lo), mismatch(hi)
    scale = max(1.0, n, m)
    if abs(mismatch(0.0)) <= 1e-14 * scale:
        log_u = 0.0
    elif f_lo * f_hi > 0:
        raise StandardFormError(
            f"cannot bracket the local squeezing (n={n:.6g}, m={m:.6g}, c=({k1:.6g}, {k2:.6g}))"
        )
    else:
        log_u = brentq(mismatch, lo, hi, xtol=1e-15, rtol=1e-15, maxiter=500)

    u = math.exp(log_u)
    v = _partner_squeeze(u, n, m)
    r = math.sqrt(u * v)
    n1, n2, m1, m2 = n * u, n / u, m * v, m / v
    c1, c2 = k1 * r, k2 / r
    if n1 - 1 > 1e-12 and m1 - 1 > 1e-12:
        a0 = ((m1 - 1) / (n1 - 1)) ** 0.25
    else:
        a0 = 1.0
    return StandardForm(n1, n2, m1, m2, c1, c2, a0)


def entanglement_parameter(sf: StandardForm) -> float:
    """Weighted EPR-type uncertainty; below 1 iff the Gaussian state is entangled."""
    a2 = sf.a0**2
    num = a2 * (sf.n1 + sf.n2) - 2 * (abs(sf.c1) + abs(sf.c2)) + (sf.m1 + sf.m2) / a2
    return num / (2 * a2 + 2 / a2)


def eof(xi: float, symmetric_state: bool = True) -> float | None:
    """Entanglement of formation in ebits; ``None`` for non-symmetric states."""
    if not xi > 0:
        raise ValueError("entanglement parameter must be positive")
    if not symmetric_state:
        return None
    if xi >= 1 - BOUNDARY_TOL:
        return 0.0
    cp = (xi**-0.5 + xi**0.5) ** 2 / 4
    cm = (xi**-0.5 - xi**0.5) ** 2 / 4
    return cp * math.log2(cp) - (cm * math.log2(cm) if cm > 0 else 0.0)


def epr_uncertainty(M: np.ndarray) -> float:
    """(Var(q_a + q_b) + Var(p_a - p_b)) / 2; below 1 suffices for entanglement."""
    M = np.asarray(M, dtype=float)
    var_q = (M[0, 0] + M[2, 2] + 2 * M[0, 2]) / 2
    var_p = (M[1, 1] + M[3, 3] - 2 * M[1, 3]) / 2
    return 0.5 * (var_q + var_p)


def is_symmetric_state(sf: StandardForm) -> bool:
    return abs(sf.n1 - sf.m1) < SYMMETRIC_STATE_RTOL * max(sf.n1, sf.m1)


def analyze(M: np.ndarray, require_physical: bool = True) -> EntanglementReport:
    """Entanglement parameter, EOF and EPR uncertainty of one covariance matrix."""
    M = as_covariance(M, require_physical)
    sf = standard_form(M, require_physical=False)
    xi = entanglement_parameter(sf)
    inv = block_invariants(M)
    symmetric = is_symmetric_state(sf)
    if symmetric and inv.detC <= 0 and abs(sf.n1 - sf.n2) < SYMMETRIC_STATE_RTOL * sf.n1:
        direct = inv.n_a - inv.c
        if abs(direct - xi) > XI_PATH_TOL * max(1.0, inv.n_a):
            raise RuntimeError(f"standard-form and n - c paths disagree: {xi!r} vs {direct!r}")
    c = inv.c if inv.detC <= 1e-10 else math.sqrt(inv.detC)
    return EntanglementReport(
        xi=xi,
        eof=eof(xi, symmetric) if xi > 0 else None,
        epr=epr_uncertainty(M),
        entangled=xi < 1 - BOUNDARY_TOL,
        symmetric_state=symmetric,
        n=inv.n_a,
        c=c,
    )
