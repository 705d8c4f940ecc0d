"""Optimal frames, rigorous eigen bounds and ellipsoid volumes."""

import math

import numpy as np
import pytest

from reachtube.interval import Interval, IntervalMatrix
from reachtube.metric import (
    CoordFrame,
    FrameDegeneracyError,
    ellipsoid_volume,
    invert_enclosure,
    lambda_max_bound,
    optimal_frame,
    stretching_factor,
)

RNG = np.random.default_rng(20240817)


def random_nonsingular(n, rng=RNG):
    while True:
        F = rng.normal(size=(n, n))
        if abs(np.linalg.det(F)) > 1e-3:
            return F


def interval_matrix_around(M, radius, rng=RNG):
    return IntervalMatrix(
        [
            Interval(v - radius, v + radius)
            for v in row
        ]
        for row in M.tolist()
    )


# -- verified inverses -------------------------------------------------------


def test_invert_enclosure_contains_true_inverse():
    for n in (2, 3, 5):
        A = random_nonsingular(n)
        enc = invert_enclosure(A)
        X = np.linalg.inv(A)
        # residual-correct the numeric inverse to near-exactness before checking
        X2 = X + X @ (np.eye(n) - A @ X)
        assert enc.contains_floats(X2)
        prod = IntervalMatrix.from_floats(A).mat_mat(enc)
        assert prod.contains_floats(np.eye(n))


def test_invert_enclosure_rejects_singular():
    with pytest.raises(FrameDegeneracyError):
        invert_enclosure(np.array([[1.0, 2.0], [2.0, 4.0]]))


# -- optimal frame -----------------------------------------------------------


def test_identity_flow_keeps_identity_frame():
    A0 = CoordFrame.make(np.eye(3))
    opt = optimal_frame(A0, np.eye(3))
    assert np.allclose(opt.A, np.eye(3))


def test_diagonal_inverse_frame():
    A0 = CoordFrame.make(np.eye(2))
    opt = optimal_frame(A0, np.diag([2.0, 0.5]))
    assert np.allclose(opt.A, np.diag([0.5, 2.0]))


def test_degenerate_gradient_aborts():
    A0 = CoordFrame.make(np.eye(2))
    with pytest.raises(FrameDegeneracyError):
        optimal_frame(A0, np.array([[1.0, 0.0], [0.0, 1e-20]]))


def test_optimal_frame_minimises_volume_and_unit_stretch():
    """Desk-scale optimality: the closed-form frame beats random competitors."""
    for _ in range(20):
        n = int(RNG.integers(2, 7))
        F = random_nonsingular(n)
        A0 = CoordFrame.make(np.eye(n))
        opt = optimal_frame(A0, F)
        F_iv = IntervalMatrix.from_floats(F)
        lam_opt = stretching_factor(opt, F_iv, A0.A_inv)
        assert 1.0 <= lam_opt <= 1.0 + 1e-6
        vol_opt = ellipsoid_volume(opt, lam_opt)
        # lower-bound identity: vol >= C(n) det(F) / det(A0)
        c_n = (2.0 / n) * math.pi ** (n / 2) / math.gamma(n / 2)
        assert vol_opt >= c_n * abs(np.linalg.det(F)) * (1 - 1e-9)
        for _ in range(20):
            L = RNG.normal(size=(n, n))
            M = L @ L.T + 1e-3 * np.eye(n)
            fr = CoordFrame.make(np.linalg.cholesky(M).T)
            lam = stretching_factor(fr, F_iv, A0.A_inv)
            assert vol_opt <= ellipsoid_volume(fr, lam) * (1 + 1e-9)


# -- stretching factors ------------------------------------------------------


def test_stretching_identity():
    A0 = CoordFrame.make(np.eye(3))
    lam = stretching_factor(A0, IntervalMatrix.identity(3), A0.A_inv)
    assert 1.0 <= lam <= 1.0 + 1e-9


def test_stretching_diagonal_point_gradient():
    A0 = CoordFrame.make(np.eye(2))
    F = IntervalMatrix.from_floats(np.diag([3.0, 1.0]))
    lam = stretching_factor(A0, F, A0.A_inv)
    assert 3.0 <= lam <= 3.0 * (1 + 1e-6)


def test_stretching_dominates_sampled_members():
    for trial in range(10):
        n = int(RNG.integers(2, 5))
        Fm = random_nonsingular(n)
        F = interval_matrix_around(Fm, 0.01)
        A0 = CoordFrame.make(np.eye(n))
        tgt = CoordFrame.make(random_nonsingular(n) + 3 * np.eye(n))
        lam = stretching_factor(tgt, F, A0.A_inv)
        for _ in range(1000):
            member = Fm + RNG.uniform(-0.01, 0.01, size=(n, n))
            smax = np.linalg.svd(tgt.A @ member, compute_uv=False)[0]
            assert smax <= lam * (1 + 1e-12)


# -- eigenvalue upper bound ----------------------------------------------------


def test_lambda_max_identity_and_diag():
    lam = lambda_max_bound(IntervalMatrix.identity(2))
    assert 1.0 <= lam <= 1.0 + 1e-9
    lam = lambda_max_bound(IntervalMatrix.from_floats(np.diag([4.0, 1.0])))
    assert 4.0 <= lam <= 4.0 + 1e-9


def test_lambda_max_dominates_sampled_members():
    total = 0
    for trial in range(100):
        n = int(RNG.integers(2, 5))
        B = RNG.normal(size=(n, n))
        H = (B + B.T) / 2
        r = float(RNG.uniform(0, 0.05))
        H_iv = interval_matrix_around(H, r)
        lam = lambda_max_bound(H_iv)
        for _ in range(100):
            E = RNG.uniform(-r, r, size=(n, n))
            member = H + (E + E.T) / 2
            assert np.linalg.eigvalsh(member)[-1] <= lam * (1 + 1e-12) + 1e-12
            total += 1
    assert total == 10_000


def test_lambda_max_monotone_in_widening():
    n = 3
    B = RNG.normal(size=(n, n))
    H = (B + B.T) / 2
    prev = -math.inf
    for r in (0.0, 0.01, 0.05, 0.2):
        lam = lambda_max_bound(interval_matrix_around(H, r))
        assert lam >= prev - 1e-15
        prev = lam


# -- volumes -------------------------------------------------------------------


def test_volume_examples():
    assert ellipsoid_volume(CoordFrame.make(np.eye(2)), 1.0) == pytest.approx(math.pi, rel=1e-12)
    assert ellipsoid_volume(CoordFrame.make(np.eye(3)), 2.0) == pytest.approx(
        4.0 / 3.0 * math.pi * 8.0, rel=1e-12
    )
    assert ellipsoid_volume(
        CoordFrame.make(np.diag([2.0, 1.0])), 1.0
    ) == pytest.approx(math.pi / 2, rel=1e-12)


def test_volume_excluding_time_dimension():
    fr = CoordFrame.make(np.diag([1.0, 1.0, 1e9]))
    full = ellipsoid_volume(fr, 1.0)
    sub = ellipsoid_volume(fr, 1.0, exclude=2)
    assert sub == pytest.approx(math.pi, rel=1e-9)
    assert full < sub  # the pinched time axis removes almost all volume


def test_volume_zero_delta():
    assert ellipsoid_volume(CoordFrame.make(np.eye(4)), 0.0) == 0.0
