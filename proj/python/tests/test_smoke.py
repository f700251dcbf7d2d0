import cmath
import math

import numpy as np
import pytest

import isotower as it


def test_build_id():
    assert it.build_id().startswith("isotower-")


def test_worked_case():
    r = math.sqrt(0.5)
    rep = it.solve_secular([math.pi], np.array([r], dtype=complex), r)
    assert rep["angles"] == pytest.approx([math.pi / 4, 7 * math.pi / 4], abs=1e-13)
    assert rep["h"][0] == pytest.approx(1 - r, abs=1e-13)
    assert it.secular_function(math.pi / 4, [math.pi], np.array([r], dtype=complex), r) == pytest.approx(0, abs=1e-14)
    mu2, nu = it.recover_coeffs([math.pi], rep["angles"])
    assert mu2[0] == pytest.approx(0.5, abs=1e-12)
    assert abs(nu - r) < 1e-12


def test_trajectory_matches_dense_matrix():
    t = it.Trajectory(seed=3, mode="MATRIX", vectors="FULL")
    t.run_to(24)
    assert t.n == 24
    u = t.dense()
    ev = np.sort(np.mod(np.angle(np.linalg.eigvals(u)), 2 * np.pi))
    assert np.max(np.abs(ev - np.array(t.angles))) < 1e-9
    F = t.vectors
    assert np.max(np.abs(F.conj().T @ F - np.eye(24))) < 1e-10


def test_spectrum_reproducible():
    a = it.sample_spectrum(11, 32)
    assert a == it.sample_spectrum(11, 32)
    assert all(0 < x < 2 * math.pi for x in a)
    assert a == sorted(a)


def test_kernels_and_gap():
    assert it.kernel_sine(0.5) == pytest.approx(2 / math.pi)
    assert it.rho_r([0.0, 0.5]) == pytest.approx(1 - 4 / math.pi**2)
    assert it.kernel_finite(0.0, 7) == pytest.approx(7 / (2 * math.pi))
    p, bound = it.gap_probability(1, 0.5, 2.0)
    assert p == pytest.approx(1 - 1.5 / (2 * math.pi))
    assert it.gap_probability(5, 0.0, 2 * math.pi)[0] == 0.0


def test_inner_products():
    rng = np.random.default_rng(0)
    w = list((rng.normal(size=4000) + 1j * rng.normal(size=4000)) / math.sqrt(2))
    c = it.cesaro_inner(w, w)
    assert c["method"] == "cesaro"
    assert abs(c["value"] - 1) < 0.1
    s = 0.99
    a2 = it.abel_inner(w, w, s * s, 3000)["value"]
    h = it.holo_inner(w, w, s, 3000, 8192)["value"]
    assert abs(h - 2 / (1 + s) * a2) < 1e-10
    assert it.moving_average_M(2, -1) == pytest.approx(0)


def test_errors_carry_codes():
    with pytest.raises(it.IsotowerError) as e:
        it.gap_probability(4, 2.0, 1.0)
    assert e.value.code == "DegenerateInterval"
    with pytest.raises(it.IsotowerError):
        it.abel_inner([1.0] * 10, [1.0] * 10, 0.999, 5)


def test_acceptance_worked_case():
    assert it.criterion_count() == 11
    passed, detail = it.run_criterion(1)
    assert passed, detail
