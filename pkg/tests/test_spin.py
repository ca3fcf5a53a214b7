import math

import numpy as np
import pytest
import scipy.sparse as sp
from scipy.sparse.linalg import expm_multiply

from gaussbec.gaussian import analyze, vacuum_covariance
from gaussbec.model import ModelParams
from gaussbec.runs import hpt_xi
from gaussbec.spin import (
    KrylovConvergenceError,
    LanczosPropagator,
    SpinBasis,
    SpinState,
    build_hamiltonian,
    check_hermitian,
    evolve,
    evolve_many,
    expectation,
    initial_state,
    occupation_fraction,
    spin_covariance,
    spin_operators,
)
from paramsets import random_stable


def setup(params):
    return build_hamiltonian(params), initial_state(SpinBasis.for_params(params))


def rescaled(N):
    # same kappa j / Omega ratios as the N = 400 symmetric set with kappa = 0.5
    j = N / 2
    return ModelParams(N, N, 50.0, 50.0, 200 / j, 200 / j, 100 / j)


def test_basis_dimension_and_index():
    b = SpinBasis(1.0, 1.0)
    assert b.dimension == 9
    for k in range(9):
        assert b.index(*b.quantum_numbers(k)) == k
    assert SpinBasis(1.5, 0.5).dimension == 8
    with pytest.raises(ValueError):
        b.index(2, 0)


def test_spin_algebra():
    for j in (0.5, 1.0, 3.5, 10.0):
        ops = spin_operators(j)
        Jx, Jy, Jz = (ops[k].toarray() for k in "xyz")
        assert np.allclose(Jx @ Jy - Jy @ Jx, 1j * Jz, atol=1e-12)
        casimir = Jx @ Jx + Jy @ Jy + Jz @ Jz
        assert np.allclose(casimir, j * (j + 1) * np.eye(int(2 * j + 1)), atol=1e-10)


def test_initial_energy():
    p = ModelParams(6, 10, 1.3, 0.7, 0.4, 0.9, 0.25)
    H, psi = setup(p)
    check_hermitian(H)
    # <J_z> = -j, <J_x^2> = j/2, <J_ax J_bx> = 0
    expected = -p.Omega_a * p.j_a - p.Omega_b * p.j_b + p.kappa_a * p.j_a / 2 + p.kappa_b * p.j_b / 2
    assert expectation(H, psi) == pytest.approx(expected, abs=1e-12)


def test_hamiltonian_against_dense_kron():
    p = ModelParams(3, 4, 1.1, 0.6, 0.3, 0.8, -0.45)
    A, B = spin_operators(p.j_a), spin_operators(p.j_b)
    a = {k: A[k].toarray() for k in "xz"}
    b = {k: B[k].toarray() for k in "xz"}
    Ia, Ib = np.eye(4), np.eye(5)
    ref = (
        p.Omega_a * np.kron(a["z"], Ib)
        + p.Omega_b * np.kron(Ia, b["z"])
        + p.kappa_a * np.kron(a["x"] @ a["x"], Ib)
        + p.kappa_b * np.kron(Ia, b["x"] @ b["x"])
        + 2 * p.kappa * np.kron(a["x"], b["x"])
    )
    assert np.allclose(build_hamiltonian(p).toarray(), ref, atol=1e-14)


def test_rejects_non_hermitian():
    H = sp.csr_matrix(np.array([[0.0, 1.0], [0.0, 0.0]]))
    with pytest.raises(ValueError):
        check_hermitian(H)
    psi = SpinState(np.array([1.0, 0.0], dtype=complex), SpinBasis(0.5, 0.0))
    with pytest.raises(ValueError):
        evolve(H, psi, 1.0)


def test_memory_cap():
    with pytest.raises(MemoryError):
        build_hamiltonian(ModelParams(400, 400, 50, 50, 1, 1, 0.5), max_nnz=1000)


def test_initial_covariance_is_identity():
    for N_a, N_b in ((2, 2), (7, 12), (400, 400)):
        p = ModelParams(N_a, N_b, 1, 1, 1, 1, 0.1)
        psi = initial_state(SpinBasis.for_params(p))
        assert np.array_equal(spin_covariance(psi, p), np.eye(4))
        assert np.array_equal(spin_covariance(psi, p, normalization="mean_spin"), np.eye(4))
        assert occupation_fraction(psi) == (0.0, 0.0)


def test_inverted_state_occupation():
    b = SpinBasis(2.0, 1.5)
    psi = np.zeros(b.dimension, dtype=complex)
    psi[b.index(2.0, 1.5)] = 1
    assert occupation_fraction(SpinState(psi, b)) == (1.0, 1.0)


def test_phase_invariance():
    p = ModelParams(8, 8, 1.0, 1.0, 0.3, 0.3, 0.2)
    H, psi0 = setup(p)
    s = evolve(H, psi0, 0.7)
    rotated = SpinState(s.amplitudes * np.exp(0.83j), s.basis, s.time)
    assert np.allclose(spin_covariance(s, p), spin_covariance(rotated, p), atol=1e-14)


def test_noninteracting_state_is_stationary():
    p = ModelParams(10, 6, 1.7, 0.9, 0.0, 0.0, 0.0)
    H, psi0 = setup(p)
    for method in ("dense", "krylov"):
        s = evolve(H, psi0, 3.3, method)
        assert abs(np.vdot(psi0.amplitudes, s.amplitudes)) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_dense_and_krylov_agree_small(seed):
    rng = np.random.default_rng(seed)
    p = random_stable(rng).replace(N_a=4, N_b=4)
    H, psi0 = setup(p)
    times = np.sort(rng.uniform(0, 2, 4))
    for d, k in zip(evolve_many(H, psi0, times, "dense"), evolve_many(H, psi0, times, "krylov")):
        assert abs(np.vdot(d.amplitudes, k.amplitudes)) > 1 - 1e-9


def test_dense_and_krylov_agree_n40():
    p = ModelParams(40, 40, 50.0, 50.0, 10.0, 10.0, 5.0)
    H, psi0 = setup(p)
    times = np.linspace(0, 0.2, 11)
    for d, k in zip(evolve_many(H, psi0, times, "dense"), evolve_many(H, psi0, times, "krylov")):
        assert abs(np.vdot(d.amplitudes, k.amplitudes)) > 1 - 1e-9


def test_krylov_matches_expm_multiply():
    p = ModelParams(12, 9, 2.0, 1.5, 0.5, 0.3, 0.2)
    H, psi0 = setup(p)
    ref = expm_multiply(-1j * 1.3 * H.astype(complex), psi0.amplitudes)
    got = evolve(H, psi0, 1.3, "krylov").amplitudes
    assert np.max(np.abs(got - ref)) < 1e-9


def test_norm_and_energy_conserved():
    p = ModelParams(10, 10, 50.0, 50.0, 1.0, 1.0, 0.5)
    H, psi0 = setup(p)
    E0 = expectation(H, psi0)
    scale = np.max(np.abs(np.linalg.eigvalsh(H.toarray())))
    for method in ("dense", "krylov"):
        for s in evolve_many(H, psi0, np.linspace(0, 5, 11), method):
            assert s.norm == pytest.approx(1.0, abs=1e-10)
            assert abs(expectation(H, s) - E0) < 1e-8 * scale


def test_negative_time_reverses():
    p = ModelParams(6, 6, 1.0, 1.0, 0.4, 0.4, 0.3)
    H, psi0 = setup(p)
    prop = LanczosPropagator(H)
    back = prop.propagate(prop.propagate(psi0.amplitudes, 2.0), -2.0)
    assert np.allclose(back, psi0.amplitudes, atol=1e-9)


def test_krylov_failure_reports_bound():
    p = ModelParams(20, 20, 50.0, 50.0, 10.0, 10.0, 5.0)
    H, psi0 = setup(p)
    prop = LanczosPropagator(H, krylov_dim=2, max_substeps=3)
    with pytest.raises(KrylovConvergenceError) as err:
        prop.propagate(psi0.amplitudes.astype(complex), 1.0)
    assert err.value.error_bound > 0


def test_label_exchange_symmetry():
    p = ModelParams(12, 12, 1.0, 1.0, 0.2, 0.2, 0.15)
    H, psi0 = setup(p)
    swap = np.array([[0, 0, 1, 0], [0, 0, 0, 1], [1, 0, 0, 0], [0, 1, 0, 0]])
    for s in evolve_many(H, psi0, np.linspace(0.1, 3, 8), "dense"):
        amp = s.amplitudes.reshape(13, 13)
        assert np.allclose(amp, amp.T, atol=1e-12)
        M = spin_covariance(s, p, normalization="mean_spin")
        xi = analyze(M).xi
        assert analyze(swap @ M @ swap.T).xi == pytest.approx(xi, abs=1e-9)


def test_mean_spin_normalization_is_physical():
    p = rescaled(40)
    H, psi0 = setup(p)
    for s in evolve_many(H, psi0, np.linspace(0.01, 1.0, 15), "dense"):
        analyze(spin_covariance(s, p, normalization="mean_spin"))


def test_oscillator_limit_converges_with_atom_number():
    taus = np.linspace(0.05, 1.0, 20)
    errors = []
    for N in (8, 16, 32, 64):
        p = rescaled(N)
        H, psi0 = setup(p)
        worst = 0.0
        for s in evolve_many(H, psi0, taus / p.Omega_a, "krylov"):
            exact = analyze(spin_covariance(s, p, normalization="mean_spin")).xi
            worst = max(worst, abs(exact - hpt_xi(p, vacuum_covariance(), s.time)))
        errors.append(worst)
    assert all(a > b for a, b in zip(errors, errors[1:])), errors


def test_occupation_stays_small_in_oscillator_regime():
    p = ModelParams(80, 80, 50.0, 50.0, 5.0, 5.0, 2.5)
    H, psi0 = setup(p)
    for s in evolve_many(H, psi0, np.linspace(0, 0.5, 21), "krylov"):
        assert max(occupation_fraction(s)) < 0.1
