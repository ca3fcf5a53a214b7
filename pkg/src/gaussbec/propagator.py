"""Closed-form Heisenberg propagator of the coupled-oscillator Hamiltonian.

The quadrature vector is ``X = (q_a, p_a, q_b, p_b)`` and ``X(t) = U(t) X(0)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import ModelParams, NormalModes, normal_modes

SYMPLECTIC_FORM = np.array(
    [
        [0.0, 1.0, 0.0, 0.0],
        [-1.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 1.0],
        [0.0, 0.0, -1.0, 0.0],
    ]
)


class UnstableParametersError(ValueError):
    """Raised when the linearized dynamics has an imaginary normal mode."""


@dataclass(frozen=True)
class Propagator:
    t: float
    U: np.ndarray
    modes: NormalModes

    @property
    def C(self) -> np.ndarray:
        return self.U[:2, :2]

    @property
    def E1(self) -> np.ndarray:
        return self.U[:2, 2:]

    @property
    def E2(self) -> np.ndarray:
        return self.U[2:, :2]

    @property
    def D(self) -> np.ndarray:
        return self.U[2:, 2:]


def _require_stable(params: ModelParams) -> NormalModes:
    modes = normal_modes(params)
    if not modes.stable:
        raise UnstableParametersError(
            f"parameters are unstable (|kappa| >= kappa_c); omega_2 = {modes.omega_2_imag:g}i"
        )
    return modes


def propagator(params: ModelParams, t: float) -> Propagator:
    """Return U(t) for stable ``params``.

    Negative ``t`` is allowed and gives the inverse evolution.
    """
    modes = _require_stable(params)
    if modes.degenerate:
        U = _decoupled(params, t)
    else:
        U = _coupled(params, modes, modes.omega_1 * t, modes.omega_2 * t)
    U.setflags(write=False)
    return Propagator(float(t), U, modes)


def propagator_at_phases(params: ModelParams, theta_1: float, theta_2: float) -> np.ndarray:
    """U as a function of the normal-mode phases ``(omega_1 t, omega_2 t)``.

    Every U(t) is a point of this two-torus family; for incommensurate
    frequencies the trajectory is dense in it.
    """
    modes = _require_stable(params)
    if modes.degenerate:
        stiff_a = params.Omega_a + 2 * params.kappa_a * params.j_a
        stiff_b = params.Omega_b + 2 * params.kappa_b * params.j_b
        w_a = math.sqrt(params.Omega_a * stiff_a)
        w_b = math.sqrt(params.Omega_b * stiff_b)
        # omega_1 is the faster of the two species
        th_a, th_b = (theta_1, theta_2) if w_a >= w_b else (theta_2, theta_1)
        U = np.zeros((4, 4))
        U[:2, :2] = _single_mode(params.Omega_a, stiff_a, th_a / w_a)
        U[2:, 2:] = _single_mode(params.Omega_b, stiff_b, th_b / w_b)
        return U
    return _coupled(params, modes, theta_1, theta_2)


def _coupled(params: ModelParams, modes: NormalModes, theta_1: float, theta_2: float) -> np.ndarray:
    Oa, Ob = params.Omega_a, params.Omega_b
    w1, w2 = modes.omega_1, modes.omega_2
    m1, m2 = modes.mu_1, modes.mu_2
    c1, c2 = math.cos(theta_1), math.cos(theta_2)
    s1, s2 = math.sin(theta_1), math.sin(theta_2)
    dc = c1 - c2
    ds = s1 / w1 - s2 / w2
    dws = w1 * s1 - w2 * s2

    C = [
        [m2 * c1 - m1 * c2, Oa * (m2 * s1 / w1 - m1 * s2 / w2)],
        [-(w1 * m2 * s1 - w2 * m1 * s2) / Oa, m2 * c1 - m1 * c2],
    ]
    D = [
        [-m1 * c1 + m2 * c2, -Ob * (m1 * s1 / w1 - m2 * s2 / w2)],
        [(m1 * w1 * s1 - m2 * w2 * s2) / Ob, -m1 * c1 + m2 * c2],
    ]
    E1 = [
        [-dc, -Ob * ds],
        [dws / Oa, -Ob * dc / Oa],
    ]
    E2 = [
        [-Ob * dc / Oa, -Ob * ds],
        [dws / Oa, -dc],
    ]
    return np.block([[np.array(C), np.array(E1)], [np.array(E2), np.array(D)]]) / (m2 - m1)


def _single_mode(Omega: float, stiffness: float, t: float) -> np.ndarray:
    # q' = Omega p, p' = -stiffness q
    w = math.sqrt(Omega * stiffness)
    c, s = math.cos(w * t), math.sin(w * t)
    return np.array([[c, Omega * s / w], [-w * s / Omega, c]])


def _decoupled(params: ModelParams, t: float) -> np.ndarray:
    U = np.zeros((4, 4))
    U[:2, :2] = _single_mode(params.Omega_a, params.Omega_a + 2 * params.kappa_a * params.j_a, t)
    U[2:, 2:] = _single_mode(params.Omega_b, params.Omega_b + 2 * params.kappa_b * params.j_b, t)
    return U


@dataclass(frozen=True)
class SecondMoments:
    """Vacuum-initialized second moments at time ``t`` (hbar = 1).

    ``qp_ab`` is Re<q_a p_b>, ``qp_ba`` is Re<q_b p_a>.
    """

    t: float
    qq_a: float
    qq_b: float
    pp_a: float
    pp_b: float
    qq_ab: float
    pp_ab: float
    qp_ab: float
    qp_ba: float

    def as_array(self) -> np.ndarray:
        return np.array(
            [self.qq_a, self.qq_b, self.pp_a, self.pp_b, self.qq_ab, self.pp_ab, self.qp_ab, self.qp_ba]
        )


def moments_from_covariance(M: np.ndarray, t: float = 0.0) -> SecondMoments:
    """Read :class:`SecondMoments` off a covariance matrix (vacuum = identity)."""
    h = 0.5 * np.asarray(M)
    return SecondMoments(
        float(t), h[0, 0], h[2, 2], h[1, 1], h[3, 3], h[0, 2], h[1, 3], h[0, 3], h[2, 1]
    )


def series_coefficients(params: ModelParams, uncorrected: bool = False) -> dict[str, tuple[float, float]]:
    """Coefficients F_i, G_i, H_i of the cosine series for <q_a^2>.

    ``G[0]`` multiplies cos((w1 + w2) t) and ``G[1]`` cos((w1 - w2) t).
    With ``uncorrected=True`` the H_i term uses Omega_a / w_i**2 instead of
    Omega_a**2 / w_i**2 (see ``docs/variance_series.md``).
    """
    modes = _require_stable(params)
    if modes.degenerate:
        raise ValueError("closed-form variances need non-degenerate normal modes (kappa != 0)")
    Oa, Ob = params.Omega_a, params.Omega_b
    w = (modes.omega_1, modes.omega_2)
    mu = (modes.mu_1, modes.mu_2)
    mut = (mu[1], mu[0])
    den = (mu[0] - mu[1]) ** 2
    w12 = w[0] * w[1]
    F, G, H = [], [], []
    for i in range(2):
        sgn = (-1) ** (i + 1)  # (-1)^i with 1-based i
        m2, wi2 = mut[i] ** 2, w[i] ** 2
        F.append(m2 / (4 * den) * (1 + 1 / m2 - Oa**2 / wi2 - Ob**2 / (m2 * wi2)))
        G.append((Ob / Oa - 1 + sgn * Oa * Ob / w12 - sgn * Ob**2 / w12) / (2 * den))
        Oa_term = Oa / wi2 if uncorrected else Oa**2 / wi2
        H.append(m2 / (4 * den) * (1 + 1 / m2 + Oa_term + Ob**2 / (m2 * wi2)))
    return {"F": tuple(F), "G": tuple(G), "H": tuple(H)}


def variances_closed_form(params: ModelParams, t: float, uncorrected: bool = False) -> SecondMoments:
    """Explicit trigonometric series for the vacuum second moments.

    ``uncorrected=True`` reproduces the two known transcription slips (the
    H_i coefficient and the sign of the constant term in the three momentum
    moments); it exists only so the reconciliation can be re-run.
    """
    modes = normal_modes(params)
    coef = series_coefficients(params, uncorrected)
    F, G, H = coef["F"], coef["G"], coef["H"]
    Oa, Ob = params.Omega_a, params.Omega_b
    w = (modes.omega_1, modes.omega_2)
    mu = (modes.mu_1, modes.mu_2)
    w12 = w[0] * w[1]
    mu_sum = mu[0] + mu[1]

    # constant part of a momentum moment does not flip sign with the oscillating part
    hs = 1.0 if uncorrected else -1.0
    qq_a = qq_b = pp_a = pp_b = qq_ab = pp_ab = qp_ab = qp_ba = 0.0
    for i in range(2):
        s = (-1) ** i  # (-1)^(i+1) with 1-based i
        wi = w[i]
        c2 = math.cos(2 * wi * t)
        s2 = math.sin(2 * wi * t)
        beat = w[0] + s * w[1]
        cb = math.cos(beat * t)
        sb = math.sin(beat * t)
        m, m2 = mu[i], mu[i] ** 2
        qq_a += F[i] * c2 + G[i] * cb + H[i]
        qq_b += m2 * Oa * F[i] * c2 - Ob * G[i] * cb + m2 * Oa * H[i]
        pp_a += wi**2 * F[i] * c2 + s * w12 * G[i] * cb + hs * wi**2 * H[i]
        pp_b += m2 * wi**2 * Oa * F[i] * c2 - s * w12 * Ob * G[i] * cb + hs * m2 * wi**2 * Oa * H[i]
        qq_ab += 2 * m * F[i] * c2 + mu_sum * G[i] * cb + 2 * m * H[i]
        pp_ab += 2 * m * wi**2 * F[i] * c2 + s * w12 * mu_sum * G[i] * cb + hs * 2 * m * wi**2 * H[i]
        qp_ab += 2 * m * wi * F[i] * s2 + (mu[0] * w[0] + s * mu[1] * w[1]) * G[i] * sb
        qp_ba += 2 * m * wi * F[i] * s2 + (mu[1] * w[0] + s * mu[0] * w[1]) * G[i] * sb

    return SecondMoments(
        float(t),
        qq_a,
        qq_b / Oa,
        -pp_a / Oa**2,
        -pp_b / (Oa * Ob**2),
        0.5 * qq_ab,
        -pp_ab / (2 * Oa * Ob),
        -qp_ab / (2 * Ob),
        -qp_ba / (2 * Oa),
    )


CORRECTIONS = (
    "H_i: Omega_a / omega_i**2 replaced by Omega_a**2 / omega_i**2 (dimensional consistency with F_i)",
    "<p_a^2>, <p_b^2>, Re<p_a p_b>: the constant H_i term enters with the opposite sign "
    "to the cos(2 omega_i t) and beat terms (time derivative of the position series)",
)


def reconciliation_report(params: ModelParams, times) -> dict:
    """Compare the closed-form series with moments of U(t) U(t)^T.

    Returns the maximum absolute deviation for the corrected and uncorrected
    series along with the list of applied corrections.
    """
    worst = {"corrected": 0.0, "uncorrected": 0.0}
    for t in times:
        U = propagator(params, t).U
        ref = moments_from_covariance(U @ U.T, t).as_array()
        for key, flag in (("corrected", False), ("uncorrected", True)):
            dev = np.max(np.abs(variances_closed_form(params, t, flag).as_array() - ref))
            worst[key] = max(worst[key], float(dev))
    return {
        "max_deviation": worst["corrected"],
        "max_deviation_uncorrected": worst["uncorrected"],
        "corrections": list(CORRECTIONS),
    }
