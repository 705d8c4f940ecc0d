"""Coordinate frames, stretching factors and ellipsoid volumes.

A frame stores the matrix A of the metric M = A^T A together with a
rigorous interval enclosure of A^{-1}.  The volume-minimising next frame
is the closed form A_next = A0 * F^{-1} applied to the midpoint total
gradient; stretching factors are rigorous upper bounds on the largest
singular value of interval matrices expressed between two frames.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import interval as iv
from .interval import Interval, IntervalMatrix

__all__ = [
    "MetricError",
    "FrameDegeneracyError",
    "CoordFrame",
    "invert_enclosure",
    "orth_inverse_enclosure",
    "optimal_frame",
    "stretching_factor",
    "stretching_factor_split",
    "lambda_max_bound",
    "ellipsoid_volume",
]

_COND_LIMIT = 1e14
_SV_GUARD = 1e-30


class MetricError(RuntimeError):
    pass


class FrameDegeneracyError(MetricError):
    """Gradient or frame too ill-conditioned to continue (blow-up)."""


def invert_enclosure(A: np.ndarray) -> IntervalMatrix:
    """Enclosure of A^{-1}: numeric inverse inflated by the verified
    residual bound ||X|| * r / (1 - r) with r = ||I - A X||_inf."""
    if not np.all(np.isfinite(A)):
        raise FrameDegeneracyError("non-finite matrix in inversion")
    n = A.shape[0]
    try:
        X = np.linalg.inv(A)
    except np.linalg.LinAlgError as exc:
        raise FrameDegeneracyError(f"singular matrix: {exc}") from exc
    prod = IntervalMatrix.from_floats(A).mat_mat(IntervalMatrix.from_floats(X))
    resid = IntervalMatrix.identity(n).add(prod.scale(Interval.point(-1.0)))
    r = resid.inf_norm_upper()
    if not r < 1.0:
        raise FrameDegeneracyError(
            f"inversion not certifiable: ||I - A X|| = {r:.3g} >= 1"
        )
    if r == 0.0:
        delta = 0.0
    else:
        x_norm = _abs_inf_norm_upper(X)
        delta = iv.div(
            iv.mul(Interval.point(x_norm), Interval.point(r)),
            Interval.point(iv.next_down(1.0 - r)),
        ).hi
    return IntervalMatrix(
        [Interval(iv.next_down(v - delta), iv.next_up(v + delta)) if delta else Interval.point(v)
         for v in row]
        for row in X.tolist()
    )


def _abs_inf_norm_upper(M: np.ndarray) -> float:
    best = 0.0
    for row in np.abs(M).tolist():
        acc = Interval.point(0.0)
        for v in row:
            acc = iv.add(acc, Interval.point(v))
        best = max(best, acc.hi)
    return best


def orth_inverse_enclosure(Q: np.ndarray) -> tuple[IntervalMatrix, float]:
    """Enclosure of Q^{-1} for a numerically orthogonal Q, as Q^T inflated
    entrywise by d * ||Q^T|| / (1 - d) with d = ||Q^T Q - I||_inf.
    Returns (enclosure, measured defect)."""
    n = Q.shape[0]
    qi = IntervalMatrix.from_floats(Q)
    E = qi.transpose().mat_mat(qi).add(
        IntervalMatrix.identity(n).scale(Interval.point(-1.0))
    )
    d = E.inf_norm_upper()
    if not d < 0.5:
        raise FrameDegeneracyError(f"orthogonality defect {d:.3g} too large")
    if d == 0.0:
        return qi.transpose(), 0.0
    qt_norm = _abs_inf_norm_upper(Q.T)
    delta = iv.div(
        iv.mul(Interval.point(d), Interval.point(qt_norm)),
        Interval.point(iv.next_down(1.0 - d)),
    ).hi
    Qt = Q.T.tolist()
    encl = IntervalMatrix(
        [Interval(iv.next_down(v - delta), iv.next_up(v + delta)) for v in row]
        for row in Qt
    )
    return encl, d


@dataclass(frozen=True)
class CoordFrame:
    """Full-rank A with a rigorous enclosure of its inverse."""

    A: np.ndarray
    A_inv: IntervalMatrix

    @staticmethod
    def make(A: np.ndarray) -> "CoordFrame":
        A = np.array(A, dtype=float)
        if not np.all(np.isfinite(A)):
            raise FrameDegeneracyError("non-finite frame matrix")
        sv = np.linalg.svd(A, compute_uv=False)
        if sv[-1] <= _SV_GUARD:
            raise FrameDegeneracyError(
                f"frame matrix numerically singular (sigma_min = {sv[-1]:.3g})"
            )
        A.setflags(write=False)
        return CoordFrame(A, invert_enclosure(A))

    @staticmethod
    def diagonal(d) -> "CoordFrame":
        return CoordFrame.make(np.diag(np.asarray(d, dtype=float)))

    @property
    def dim(self) -> int:
        return self.A.shape[0]


def optimal_frame(A0: CoordFrame, F_mid: np.ndarray) -> CoordFrame:
    """Volume-minimising frame A0 * F_mid^{-1} for the midpoint gradient."""
    F_mid = np.asarray(F_mid, dtype=float)
    if not np.all(np.isfinite(F_mid)):
        raise FrameDegeneracyError("non-finite midpoint gradient (blow-up)")
    cond = np.linalg.cond(F_mid)
    if not np.isfinite(cond) or cond > _COND_LIMIT:
        raise FrameDegeneracyError(
            f"midpoint gradient condition number {cond:.3g} exceeds {_COND_LIMIT:.0e}; "
            "reachtube has degenerated"
        )
    # solve A_hat F = A0  (transposed to a standard left solve)
    A_hat = np.linalg.solve(F_mid.T, A0.A.T).T
    return CoordFrame.make(A_hat)


def lambda_max_bound(H: IntervalMatrix) -> float:
    """Rigorous upper bound on the largest eigenvalue over all symmetric
    members of H.

    Minimum of (a) a certificate from Gershgorin applied to the verified
    similarity transform V^{-1} mid(H) V (V a numeric eigenbasis) plus the
    spectral-radius bound on rad(H), and (b) Gershgorin on H directly.
    """
    n, m = H.shape
    if n != m:
        raise ValueError("lambda_max_bound needs a square matrix")
    mid = np.array(H.mid())
    if not np.all(np.isfinite(mid)):
        raise FrameDegeneracyError("non-finite entries in eigenvalue bound")
    rad_rows = H.rad()

    # rho(rad H) <= min(max row sum, Frobenius norm), rounded up
    row_sum = 0.0
    frob = Interval.point(0.0)
    for row in rad_rows:
        acc = Interval.point(0.0)
        for v in row:
            p = Interval.point(v)
            acc = iv.add(acc, p)
            frob = iv.add(frob, iv.mul(p, p))
        row_sum = max(row_sum, acc.hi)
    rho_rad = Interval.point(min(row_sum, iv.sqrt(frob).hi))
    bound_b = _gershgorin_upper(H)

    try:
        _, V = np.linalg.eigh(mid)
        Vinv, _ = orth_inverse_enclosure(V)
        G = Vinv.mat_mat(IntervalMatrix.from_floats(mid)).mat_mat(
            IntervalMatrix.from_floats(V)
        )
        bound_mid = _gershgorin_upper(G)
        bound_a = iv.add(Interval.point(bound_mid), rho_rad).hi
    except (np.linalg.LinAlgError, FrameDegeneracyError):
        bound_a = math.inf
    return min(bound_a, bound_b)


def _gershgorin_upper(M: IntervalMatrix) -> float:
    n = M.shape[0]
    out = -math.inf
    for j in range(n):
        acc = Interval.point(M[j, j].hi)
        for k in range(n):
            if k != j:
                acc = iv.add(acc, Interval.point(M[j, k].mag()))
        out = max(out, acc.hi)
    return out


def stretching_factor(
    A_target: CoordFrame, F: IntervalMatrix, source_inv: IntervalMatrix
) -> float:
    """Upper bound on max sigma_max(A_target * F * A_source^{-1}) over the
    interval gradient F, i.e. the induced-norm stretching between frames."""
    S = IntervalMatrix.from_floats(A_target.A).mat_mat(F).mat_mat(source_inv)
    return _sigma_max_upper(S)


def stretching_factor_split(
    A_target: CoordFrame,
    base,
    Q,
    R: IntervalMatrix,
    source_inv: IntervalMatrix,
    left: "IntervalMatrix | None" = None,
) -> float:
    """Stretching factor for a gradient kept in split form base + Q R.

    Multiplying the frames into the split parts before any entrywise hull
    preserves the anisotropy of the remainder: errors along strongly
    contracted directions would otherwise be divided by the smallest
    singular value of the midpoint gradient and dominate the bound.  When a
    left-relative error form (I + left) base is also available, the two
    enclosures of A_t F A_s^{-1} are intersected entrywise first.
    """
    a_t = IntervalMatrix.from_floats(A_target.A)
    core = IntervalMatrix.from_floats(base).mat_mat(source_inv)
    S = a_t.mat_mat(core).add(
        a_t.mat_mat(IntervalMatrix.from_floats(Q)).mat_mat(R).mat_mat(source_inv)
    )
    if left is not None:
        S2 = a_t.mat_mat(core).add(a_t.mat_mat(left).mat_mat(core))
        rows = []
        for ra, rb in zip(S.rows, S2.rows):
            row = []
            for a, b in zip(ra, rb):
                c = iv.intersect(a, b)
                if c is None:  # both enclose the true set; disjoint is a bug
                    raise MetricError("stretching-factor enclosures disjoint")
                row.append(c)
            rows.append(row)
        S = IntervalMatrix(rows)
    return _sigma_max_upper(S)


def _sigma_max_upper(S: IntervalMatrix) -> float:
    H = S.transpose().mat_mat(S)
    lam = lambda_max_bound(H)
    if not math.isfinite(lam):
        raise FrameDegeneracyError("stretching factor bound is non-finite")
    lam = max(lam, 0.0)
    return iv.sqrt(Interval.point(lam)).hi


def ellipsoid_volume(
    frame: CoordFrame, delta: float, exclude: Optional[int] = None
) -> float:
    """Volume C(n) * delta^n * det(M)^{-1/2} of {x : ||A(x-c)|| <= delta},
    optionally over the submatrix that drops the time variable."""
    if delta < 0.0:
        raise ValueError("delta must be >= 0")
    A = frame.A
    n = A.shape[0]
    if exclude is None:
        n_eff = n
        sign, logabsdet = np.linalg.slogdet(A)
        if sign == 0.0:
            raise FrameDegeneracyError("volume of a degenerate frame")
        log_det_term = logabsdet  # det(M)^{-1/2} = 1/|det A|
    else:
        keep = [j for j in range(n) if j != exclude]
        M = A.T @ A
        Msub = M[np.ix_(keep, keep)]
        sign, logdet = np.linalg.slogdet(Msub)
        if sign <= 0.0:
            raise FrameDegeneracyError("metric not positive definite on submatrix")
        n_eff = n - 1
        log_det_term = 0.5 * logdet
    if delta == 0.0:
        return 0.0
    log_c = math.log(2.0 / n_eff) + 0.5 * n_eff * math.log(math.pi) - math.lgamma(0.5 * n_eff)
    return math.exp(log_c + n_eff * math.log(delta) - log_det_term)
