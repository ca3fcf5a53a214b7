"""Exact evolution of the two-spin Hamiltonian in the |j_a m_a> |j_b m_b> basis.

This is the reference the oscillator solution is checked against.  Nothing
here requires stable parameters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Iterator

import numpy as np
import scipy.sparse as sp
from scipy.linalg import eigh_tridiagonal

from .model import ModelParams

DEFAULT_MAX_NNZ = 4_000_000
DENSE_MAX_DIM = 10_000
KRYLOV_DIM = 30
KRYLOV_TOL = 1e-10
OCCUPATION_WARN = 0.1


class KrylovConvergenceError(RuntimeError):
    def __init__(self, message: str, error_bound: float):
        super().__init__(message)
        self.error_bound = error_bound


@dataclass(frozen=True)
class SpinBasis:
    """Product basis, row-major in (m_a, m_b) with m ascending from -j."""

    j_a: float
    j_b: float

    @classmethod
    def for_params(cls, params: ModelParams) -> "SpinBasis":
        return cls(params.j_a, params.j_b)

    @property
    def dim_a(self) -> int:
        return int(round(2 * self.j_a)) + 1

    @property
    def dim_b(self) -> int:
        return int(round(2 * self.j_b)) + 1

    @property
    def dimension(self) -> int:
        return self.dim_a * self.dim_b

    def index(self, m_a: float, m_b: float) -> int:
        ia = int(round(m_a + self.j_a))
        ib = int(round(m_b + self.j_b))
        if not (0 <= ia < self.dim_a and 0 <= ib < self.dim_b):
            raise ValueError(f"(m_a, m_b) = ({m_a}, {m_b}) outside the basis")
        return ia * self.dim_b + ib

    def quantum_numbers(self, index: int) -> tuple[float, float]:
        ia, ib = divmod(index, self.dim_b)
        return ia - self.j_a, ib - self.j_b


@dataclass(frozen=True)
class SpinState:
    amplitudes: np.ndarray
    basis: SpinBasis
    time: float = 0.0

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))


@lru_cache(maxsize=32)
def spin_operators(j: float) -> dict[str, sp.csr_matrix]:
    """J_z, J_+, J_-, J_x, J_y for spin ``j`` (m ascending)."""
    d = int(round(2 * j)) + 1
    m = np.arange(d) - j
    up = np.sqrt(j * (j + 1) - m[:-1] * (m[:-1] + 1))  # <m+1|J+|m>
    Jp = sp.diags(up, -1, shape=(d, d), format="csr")
    Jm = Jp.T.tocsr()
    return {
        "z": sp.diags(m, 0, format="csr"),
        "+": Jp,
        "-": Jm,
        "x": ((Jp + Jm) * 0.5).tocsr(),
        "y": ((Jp - Jm) * (-0.5j)).tocsr(),
    }


def build_hamiltonian(params: ModelParams, max_nnz: int = DEFAULT_MAX_NNZ) -> sp.csr_matrix:
    """Sparse two-spin Hamiltonian (real symmetric)."""
    basis = SpinBasis.for_params(params)
    # at most 3 nonzeros per row in J_x^2 and 4 in J_ax J_bx
    estimate = 9 * basis.dimension
    if estimate > max_nnz:
        raise MemoryError(
            f"Hamiltonian would have ~{estimate} nonzeros (> cap {max_nnz}); raise max_nnz to proceed"
        )
    A = spin_operators(params.j_a)
    B = spin_operators(params.j_b)
    Ia = sp.identity(basis.dim_a, format="csr")
    Ib = sp.identity(basis.dim_b, format="csr")
    Jax, Jbx = A["x"], B["x"]
    H = (
        sp.kron(params.Omega_a * A["z"] + params.kappa_a * (Jax @ Jax), Ib)
        + sp.kron(Ia, params.Omega_b * B["z"] + params.kappa_b * (Jbx @ Jbx))
        + 2 * params.kappa * sp.kron(Jax, Jbx)
    )
    H = H.tocsr()
    H.eliminate_zeros()
    return H


def initial_state(basis: SpinBasis) -> SpinState:
    psi = np.zeros(basis.dimension, dtype=complex)
    psi[basis.index(-basis.j_a, -basis.j_b)] = 1.0
    return SpinState(psi, basis, 0.0)


def check_hermitian(H, tol: float = 1e-12) -> None:
    diff = H - H.conj().T
    scale = max(1.0, abs(H).max())
    err = abs(diff).max() if diff.nnz else 0.0
    if err > tol * scale:
        raise ValueError(f"operator is not Hermitian (max |H - H^dag| = {err:.3g})")


def evolve(H, psi0: SpinState, t: float, method: str = "auto") -> SpinState:
    """Return exp(-i H t) |psi0>."""
    return next(iter(evolve_many(H, psi0, [t], method)))


def evolve_many(
    H,
    psi0: SpinState,
    times: Iterable[float],
    method: str = "auto",
    dense_max_dim: int = DENSE_MAX_DIM,
) -> Iterator[SpinState]:
    """Yield the evolved state at each of ``times`` (ascending for Krylov).

    ``method`` is ``"dense"`` (one full diagonalization reused for all
    times), ``"krylov"`` (restarted Lanczos between consecutive times) or
    ``"auto"`` (dense up to ``dense_max_dim``).
    """
    check_hermitian(H)
    dim = H.shape[0]
    if method == "auto":
        method = "dense" if dim <= dense_max_dim else "krylov"
    times = [float(t) for t in times]

    if method == "dense":
        if dim > dense_max_dim:
            raise ValueError(f"dense evolution limited to dimension {dense_max_dim} (got {dim})")
        Hd = H.toarray() if sp.issparse(H) else np.asarray(H)
        if np.iscomplexobj(Hd) and not np.any(Hd.imag):
            Hd = Hd.real
        w, V = np.linalg.eigh(Hd)
        coeff = V.conj().T @ psi0.amplitudes
        for t in times:
            dt = t - psi0.time
            yield SpinState(V @ (np.exp(-1j * w * dt) * coeff), psi0.basis, t)
    elif method == "krylov":
        prop = LanczosPropagator(H)
        psi, now = psi0.amplitudes.astype(complex), psi0.time
        for t in times:
            psi = prop.propagate(psi, t - now)
            now = t
            yield SpinState(psi, psi0.basis, t)
    else:
        raise ValueError(f"unknown evolution method {method!r}")


class LanczosPropagator:
    """exp(-i H dt) v by restarted short-iterative Lanczos with adaptive substeps.

    Each substep builds a Krylov space of dimension ``krylov_dim`` and picks
    the largest substep whose a posteriori error estimate
    ``beta_m |e_m^T exp(-i T dt) e_1|`` stays below ``tol``.
    """

    def __init__(
        self,
        H,
        krylov_dim: int = KRYLOV_DIM,
        tol: float = KRYLOV_TOL,
        max_substeps: int = 1_000_000,
        full_reorthogonalization: bool = False,
    ):
        self.H = H
        self.full_reorthogonalization = full_reorthogonalization
        self.m = krylov_dim
        self.tol = tol
        self.max_substeps = max_substeps
        self.substeps = 0
        self.max_error = 0.0
        self._dt_guess = None
        self._real = not np.iscomplexobj(H.data if sp.issparse(H) else H)

    def _matvec(self, v: np.ndarray) -> np.ndarray:
        if self._real:
            return self.H @ v.real + 1j * (self.H @ v.imag)
        return self.H @ v

    def _krylov(self, v: np.ndarray):
        n = v.shape[0]
        m = min(self.m, n)
        V = np.empty((m + 1, n), dtype=complex)
        alpha = np.zeros(m)
        beta = np.zeros(m)
        beta0 = np.linalg.norm(v)
        V[0] = v / beta0
        k_used = m
        for k in range(m):
            w = self._matvec(V[k])
            alpha[k] = np.vdot(V[k], w).real
            w -= alpha[k] * V[k]
            if k > 0:
                w -= beta[k - 1] * V[k - 1]
            if self.full_reorthogonalization:
                basis = V[: k + 1]
                w -= (basis @ w.conj()).conj() @ basis
            else:
                # second Gram-Schmidt pass against the last two vectors
                for i in range(max(0, k - 1), k + 1):
                    w -= np.vdot(V[i], w) * V[i]
            beta[k] = np.linalg.norm(w)
            if beta[k] < 1e-14 * max(1.0, abs(alpha[k])):
                k_used = k + 1
                beta[k] = 0.0
                break
            V[k + 1] = w / beta[k]
        return V[:k_used], alpha[:k_used], beta[:k_used], beta0

    def propagate(self, psi: np.ndarray, t: float) -> np.ndarray:
        if t == 0:
            return psi.copy()
        sign = 1.0 if t > 0 else -1.0
        remaining = abs(t)
        psi = psi.astype(complex)
        while remaining > 0:
            V, alpha, beta, beta0 = self._krylov(psi)
            k = len(alpha)
            theta, S = eigh_tridiagonal(alpha, beta[: k - 1]) if k > 1 else (alpha, np.ones((1, 1)))
            s0 = S[0].conj()
            dt = remaining if self._dt_guess is None else min(remaining, self._dt_guess)

            def small_solution(h):
                y = S @ (np.exp(-1j * sign * theta * h) * s0)
                return y, beta[k - 1] * abs(y[-1])

            y, err = small_solution(dt)
            while err > self.tol:
                # error ~ dt^k; shrink conservatively
                shrink = 0.9 * (self.tol / err) ** (1.0 / k)
                dt *= min(0.5, max(shrink, 0.1))
                if dt < 1e-15 * abs(t):
                    raise KrylovConvergenceError(
                        f"Lanczos substep underflow at t remaining {remaining:g}", err
                    )
                y, err = small_solution(dt)
            grow = 2.0 if err == 0 else min(2.0, 0.9 * (self.tol / err) ** (1.0 / k))
            self._dt_guess = dt * max(grow, 1.0)
            psi = beta0 * (V.T @ y)
            remaining -= dt
            if remaining < 1e-15 * abs(t):
                remaining = 0.0
            self.substeps += 1
            self.max_error = max(self.max_error, err)
            if self.substeps > self.max_substeps:
                raise KrylovConvergenceError("Lanczos propagation exceeded the substep budget", self.max_error)
        return psi


@lru_cache(maxsize=8)
def _quadrature_operators(j_a: float, j_b: float) -> tuple:
    A, B = spin_operators(j_a), spin_operators(j_b)
    Ia = sp.identity(A["z"].shape[0], format="csr")
    Ib = sp.identity(B["z"].shape[0], format="csr")
    sa, sb = math.sqrt(j_a), math.sqrt(j_b)
    return (
        sp.kron(A["x"] / sa, Ib, format="csr"),
        sp.kron(-A["y"] / sa, Ib, format="csr"),
        sp.kron(Ia, B["x"] / sb, format="csr"),
        sp.kron(Ia, -B["y"] / sb, format="csr"),
    )


def spin_covariance(
    psi: SpinState, params: ModelParams | None = None, normalization: str = "j"
) -> np.ndarray:
    """Mean-subtracted covariance matrix of the spin quadratures.

    With ``normalization="j"`` the quadratures are q = J_x / sqrt(j) and
    p = -J_y / sqrt(j).  At finite j their commutator is -i J_z / j, so the
    result need not satisfy the Gaussian uncertainty bound.  With
    ``normalization="mean_spin"`` sqrt(j) is replaced by sqrt(|<J_z>|); then
    <[q, p]> = i exactly and the matrix is always a valid covariance.
    """
    basis = psi.basis
    if normalization not in ("j", "mean_spin"):
        raise ValueError(f"unknown normalization {normalization!r}")
    v = psi.amplitudes
    support = np.flatnonzero(v)
    if support.size == 1:
        return _eigenstate_covariance(*basis.quantum_numbers(int(support[0])), basis, normalization)
    ops = _quadrature_operators(basis.j_a, basis.j_b)
    Y = np.array([op @ v for op in ops])
    means = (v.conj()[None, :] * Y).sum(axis=1).real
    G = (Y.conj() @ Y.T).real
    M = 2 * G - 2 * np.outer(means, means)
    M = 0.5 * (M + M.T)
    if normalization == "mean_spin":
        f_a, f_b = occupation_fraction(psi)
        # |<J_z>| / j = 1 - 2 f
        scale = np.array([1 - 2 * f_a, 1 - 2 * f_a, 1 - 2 * f_b, 1 - 2 * f_b])
        if np.any(scale <= 0):
            raise ValueError("mean-spin normalization needs <J_z> < 0 for both spins")
        M = M / np.sqrt(np.outer(scale, scale))
    return M


def _eigenstate_covariance(m_a: float, m_b: float, basis: SpinBasis, normalization: str) -> np.ndarray:
    # closed form in |j_a, m_a>|j_b, m_b>: <J_x^2> = <J_y^2> = (j(j+1) - m^2)/2, all else zero
    diag = []
    for j, m in ((basis.j_a, m_a), (basis.j_b, m_b)):
        if normalization == "mean_spin" and m >= 0:
            raise ValueError("mean-spin normalization needs <J_z> < 0 for both spins")
        norm = j if normalization == "j" else -m
        diag += [(j * (j + 1) - m * m) / norm] * 2
    return np.diag(diag)


def occupation_fraction(psi: SpinState, params: ModelParams | None = None) -> tuple[float, float]:
    """Fraction (<J_z> + j) / 2j of each spin excited above the initial state."""
    basis = psi.basis
    prob = np.abs(psi.amplitudes.reshape(basis.dim_a, basis.dim_b)) ** 2
    prob /= prob.sum()
    ma = np.arange(basis.dim_a) - basis.j_a
    mb = np.arange(basis.dim_b) - basis.j_b
    jz_a = float(prob.sum(axis=1) @ ma)
    jz_b = float(prob.sum(axis=0) @ mb)
    return (jz_a + basis.j_a) / (2 * basis.j_a), (jz_b + basis.j_b) / (2 * basis.j_b)


def expectation(H, psi: SpinState) -> float:
    v = psi.amplitudes
    return float(np.vdot(v, H @ v).real)
