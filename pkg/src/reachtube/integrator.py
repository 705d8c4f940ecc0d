"""Validated Runge-Kutta propagation of the flow and its gradient.

One step at order p encloses the flow as

    RK increment over the start set
    + h^{p+1}/(p+1)! * (p+1)-th flow time-derivative over the a-priori box
    - h^{p+1} * (top Taylor-in-h coefficient of the RK map itself),

the last term being the Lagrange form of the gap between the RK map and
the degree-p flow expansion (zero for order 1, where Euler *is* the
degree-1 expansion).  The flow derivative comes from repeated symbolic
Lie differentiation of the right-hand side; the RK-map derivative from
interval Taylor-series (jet) evaluation seeded with h = [0, h].

The gradient step applies the same construction to the matrix variational
system W' = J(x(t)) W from W = I, and maintains the running product in
QR-factored form to control wrapping.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import expr as ex
from . import interval as iv
from .interval import Box, Interval, IntervalMatrix
from .jets import Jet, JetAlgebra
from .metric import FrameDegeneracyError, orth_inverse_enclosure
from .model import OdeSystem

__all__ = [
    "IntegrationError",
    "StepSizeError",
    "OracleError",
    "StepEnclosure",
    "GradientEnclosure",
    "apriori_enclosure",
    "validated_step",
    "one_step_gradient",
    "step_gradient",
    "reference_integrate",
    "ORDERS",
]

ORDERS = (1, 2, 4)

_PICARD_MAX_ITER = 20
_PICARD_INFLATE0 = (1.1, 1e-15)
_PICARD_INFLATE = (1.5, 1e-15)


class IntegrationError(RuntimeError):
    pass


class StepSizeError(IntegrationError):
    """A-priori enclosure could not be certified; reduce dt."""


class OracleError(RuntimeError):
    """Non-rigorous reference integration failed."""


@dataclass(frozen=True)
class StepEnclosure:
    y_next: Box  # end-of-step states
    apriori: Box  # whole-step trajectory enclosure
    accepted_h: float


@dataclass(frozen=True)
class GradientEnclosure:
    """Total deformation gradient in Lohner doubleton form.

    Every true gradient is base + Q @ r with r a member of R: the midpoint
    chain multiplies through as floats, only the accumulated error lives in
    the rotated interval remainder.  Propagating the full one-step interval
    through the QR recursion instead drags the midpoint into every interval
    product and measurably inflates long runs.  ``total`` caches
    base + Q (x) R.

    ``left`` is a second, independently propagated error form
    (I + left) @ base: it keeps the row anisotropy of the one-step widths
    (the QR rotation mixes rows, which strongly contracting metrics then
    amplify), at the price of needing base to stay certifiably invertible.
    It is None once that certification fails.
    """

    Q: np.ndarray
    R: IntervalMatrix  # rotated error term, contains zero
    base: np.ndarray  # float midpoint product
    total: IntervalMatrix
    mid_total: np.ndarray
    one_step: IntervalMatrix  # gradient of the last step over its start box
    mid_one_step: np.ndarray
    left: "IntervalMatrix | None" = None  # relative error, contains zero

    @staticmethod
    def identity(n: int) -> "GradientEnclosure":
        eye_iv = IntervalMatrix.identity(n)
        eye = np.eye(n)
        return GradientEnclosure(
            eye,
            IntervalMatrix.zeros((n, n)),
            eye,
            eye_iv,
            eye,
            eye_iv,
            eye.copy(),
            left=IntervalMatrix.zeros((n, n)),
        )


def _check_order(order: int) -> None:
    if order not in ORDERS:
        raise ValueError(f"order must be one of {ORDERS}, got {order}")


# -- a-priori enclosures -----------------------------------------------------


def apriori_enclosure(sys: OdeSystem, x: Box, h: float) -> Box:
    """Box Y verified to satisfy x + [0,h] f(Y) inside Y (Picard condition),
    hence containing every trajectory from x over the step."""
    if h <= 0.0:
        raise ValueError("step size must be positive")
    hr = Interval(0.0, h)
    Y = x.inflate(*_PICARD_INFLATE0)
    Z = Y
    bad: list[int] = []
    for _ in range(_PICARD_MAX_ITER):
        Z = x.add(sys.eval_rhs_interval(Y).scale(hr))
        bad = [
            j for j in range(len(x)) if not Y[j].contains_interval(Z[j])
        ]
        inf = [
            j for j in range(len(x))
            if not (math.isfinite(Z[j].lo) and math.isfinite(Z[j].hi))
        ]
        if inf:
            raise StepSizeError(
                f"a-priori enclosure diverged in component x{inf[0] + 1}; "
                "reduce the time step"
            )
        if not bad:
            for _ in range(2):  # sound refinement passes
                Z = x.add(sys.eval_rhs_interval(Z).scale(hr))
            return Z
        # inflate only the escaping components: inflating settled ones feeds
        # their width back into the escapers and can live-lock the iteration
        Y = Box(
            _inflate_iv(iv.hull(y, z), *_PICARD_INFLATE) if j in bad else iv.hull(y, z)
            for j, (y, z) in enumerate(zip(Y.comps, Z.comps))
        )
    name = f"x{bad[0] + 1}" if bad else "unknown"
    raise StepSizeError(
        f"no a-priori enclosure after {_PICARD_MAX_ITER} Picard iterations "
        f"(component {name} keeps escaping); reduce the time step"
    )


def _inflate_iv(a: Interval, factor: float, absolute: float) -> Interval:
    m = iv.mid(a)
    r = iv.next_up(factor * iv.rad(a) + absolute)
    return Interval(iv.next_down(m - r), iv.next_up(m + r))


def _matrix_picard(J: IntervalMatrix, h: float, n: int) -> IntervalMatrix:
    """Enclosure of the variational flow W(s), s in [0,h], W(0) = I."""
    hr = Interval(0.0, h)
    eye = IntervalMatrix.identity(n)
    W = _mat_inflate(eye, *_PICARD_INFLATE0)
    Z = W
    for _ in range(_PICARD_MAX_ITER):
        Z = eye.add(J.mat_mat(W).scale(hr))
        for row in Z.rows:
            for a in row:
                if not (math.isfinite(a.lo) and math.isfinite(a.hi)):
                    raise StepSizeError(
                        "gradient a-priori enclosure diverged; reduce the time step"
                    )
        ok = True
        rows = []
        for rw, rz in zip(W.rows, Z.rows):
            row = []
            for w, z in zip(rw, rz):
                if w.contains_interval(z):
                    row.append(iv.hull(w, z))
                else:
                    ok = False
                    row.append(_inflate_iv(iv.hull(w, z), *_PICARD_INFLATE))
            rows.append(row)
        if ok:
            for _ in range(2):
                Z = eye.add(J.mat_mat(Z).scale(hr))
            return Z
        W = IntervalMatrix(rows)
    raise StepSizeError(
        "no a-priori enclosure for the deformation gradient; reduce the time step"
    )


def _mat_contains(A: IntervalMatrix, B: IntervalMatrix) -> bool:
    return all(
        a.contains_interval(b)
        for ra, rb in zip(A.rows, B.rows)
        for a, b in zip(ra, rb)
    )


def _mat_inflate(A: IntervalMatrix, factor: float, absolute: float) -> IntervalMatrix:
    out = []
    for row in A.rows:
        orow = []
        for a in row:
            m = iv.mid(a)
            r = iv.next_up(factor * iv.rad(a) + absolute)
            orow.append(Interval(iv.next_down(m - r), iv.next_up(m + r)))
        out.append(orow)
    return IntervalMatrix(out)


# -- RK increments over a generic scalar algebra ------------------------------


def _f_vec(sys: OdeSystem, env, alg):
    return [ex.evaluate(r, env, alg) for r in sys.rhs]


def _axpy(base, s, k, alg):
    return [alg.add(b, alg.mul(s, kj)) for b, kj in zip(base, k)]


def _rk_flow(sys: OdeSystem, env, h, alg, order: int):
    """RK end-state over the algebra; returns (y, stage_envs).

    Stage coefficients are exact binary (1/2) or exact integer divisions,
    so the map's order conditions hold exactly for the real-valued map.
    """
    half = alg.mul(alg.const(0.5), h)
    if order == 1:
        k1 = _f_vec(sys, env, alg)
        return _axpy(env, h, k1, alg), [env]
    if order == 2:
        k1 = _f_vec(sys, env, alg)
        e2 = _axpy(env, half, k1, alg)
        k2 = _f_vec(sys, e2, alg)
        return _axpy(env, h, k2, alg), [env, e2]
    k1 = _f_vec(sys, env, alg)
    e2 = _axpy(env, half, k1, alg)
    k2 = _f_vec(sys, e2, alg)
    e3 = _axpy(env, half, k2, alg)
    k3 = _f_vec(sys, e3, alg)
    e4 = _axpy(env, h, k3, alg)
    k4 = _f_vec(sys, e4, alg)
    six = alg.const(6.0)
    two = alg.const(2.0)
    comb = [
        alg.div(
            alg.add(alg.add(a, alg.mul(two, b)), alg.add(alg.mul(two, c), d)), six
        )
        for a, b, c, d in zip(k1, k2, k3, k4)
    ]
    return _axpy(env, h, comb, alg), [env, e2, e3, e4]


def _jac_at(sys: OdeSystem, env, alg):
    return [[ex.evaluate(e, env, alg) for e in row] for row in sys.jac]


def _m_identity(n: int, alg):
    one = alg.const(1.0)
    zero = alg.const(0.0)
    return [[one if i == j else zero for j in range(n)] for i in range(n)]


def _m_mul(A, B, alg):
    n = len(A)
    p = len(B[0])
    m = len(B)
    out = []
    for i in range(n):
        row = []
        for j in range(p):
            acc = alg.mul(A[i][0], B[0][j])
            for k in range(1, m):
                acc = alg.add(acc, alg.mul(A[i][k], B[k][j]))
            row.append(acc)
        out.append(row)
    return out


def _m_axpy(base, s, K, alg):
    return [
        [alg.add(b, alg.mul(s, k)) for b, k in zip(brow, krow)]
        for brow, krow in zip(base, K)
    ]


def _rk_gradient_increment(sys: OdeSystem, stage_envs, h, alg, order: int):
    """RK end-value of W' = J(x(t)) W from W = I, stages taken at the given
    state stage environments."""
    n = sys.dim
    eye = _m_identity(n, alg)
    half = alg.mul(alg.const(0.5), h)
    J = [_jac_at(sys, e, alg) for e in stage_envs]
    if order == 1:
        k1 = J[0]  # J W with W = I
        return _m_axpy(eye, h, k1, alg)
    if order == 2:
        k1 = J[0]
        w2 = _m_axpy(eye, half, k1, alg)
        k2 = _m_mul(J[1], w2, alg)
        return _m_axpy(eye, h, k2, alg)
    k1 = J[0]
    w2 = _m_axpy(eye, half, k1, alg)
    k2 = _m_mul(J[1], w2, alg)
    w3 = _m_axpy(eye, half, k2, alg)
    k3 = _m_mul(J[2], w3, alg)
    w4 = _m_axpy(eye, h, k3, alg)
    k4 = _m_mul(J[3], w4, alg)
    six = alg.const(6.0)
    two = alg.const(2.0)
    comb = [
        [
            alg.div(
                alg.add(
                    alg.add(a, alg.mul(two, b)), alg.add(alg.mul(two, c), d)
                ),
                six,
            )
            for a, b, c, d in zip(r1, r2, r3, r4)
        ]
        for r1, r2, r3, r4 in zip(k1, k2, k3, k4)
    ]
    return _m_axpy(eye, h, comb, alg)


# -- validated stepping --------------------------------------------------------


def _h_pow_scale(h: float, p: int) -> tuple[Interval, Interval]:
    """(h^{p+1}, h^{p+1}/(p+1)!) as upper-bounded intervals."""
    hp1 = iv.pow_int(Interval.point(h), p + 1)
    fact = Interval.point(float(math.factorial(p + 1)))
    return hp1, iv.div(hp1, fact)


_TAYLOR_REFINE_ORDER = 6


def _ode_series(sys: OdeSystem, B: Box, K: int) -> list[list[Interval]]:
    """Solution Taylor coefficients c_0..c_K (in time) over start points in B,
    by the classic recursion c_{k+1} = [f(series)]_k / (k+1) on interval jets."""
    n = sys.dim
    alg = JetAlgebra(K)
    zero = Interval.point(0.0)
    coeffs: list[list[Interval]] = [[B[j] for j in range(n)]] + [
        [zero] * n for _ in range(K)
    ]
    for k in range(K):
        env = [Jet([coeffs[m][j] for m in range(K + 1)]) for j in range(n)]
        fj = _f_vec(sys, env, alg)
        for j in range(n):
            coeffs[k + 1][j] = iv.div(
                fj[j].coeffs[k], Interval.point(float(k + 1))
            )
    return coeffs


def _taylor_enclosure(sys: OdeSystem, x: Box, Y: Box, h: float, K: int) -> Box:
    """Degree-(K-1) solution Taylor sum at the start set plus the Lagrange
    tail coefficient over the a-priori box; independent of the RK route."""
    pt = _ode_series(sys, x, K - 1)
    tail = _ode_series(sys, Y, K)[K]
    h_iv = Interval.point(h)
    out = []
    for j in range(sys.dim):
        acc = pt[0][j]
        hp = Interval.point(1.0)
        for k in range(1, K):
            hp = iv.mul(hp, h_iv)
            acc = iv.add(acc, iv.mul(hp, pt[k][j]))
        hp = iv.mul(hp, h_iv)
        acc = iv.add(acc, iv.mul(hp, tail[j]))
        out.append(acc)
    return Box(out)


def validated_step(sys: OdeSystem, x: Box, h: float, order: int) -> StepEnclosure:
    """Enclosure of the time-h flow image of the box x."""
    _check_order(order)
    Y = apriori_enclosure(sys, x, h)
    h_iv = Interval.point(h)
    y_rk, _ = _rk_flow(sys, list(x.comps), h_iv, ex.INTERVAL_ALGEBRA, order)
    hp1, lie_scale = _h_pow_scale(h, order)

    lie = sys.lie_rhs(order)  # (order+1)-th flow time derivative
    rem = [iv.mul(lie_scale, ex.eval_interval(e, Y)) for e in lie]

    if order > 1:
        alg = JetAlgebra(order + 1)
        jet_env = [Jet.constant(c, order + 1) for c in x.comps]
        hj = Jet.variable(Interval(0.0, h), order + 1)
        yj, _ = _rk_flow(sys, jet_env, hj, alg, order)
        defect = [iv.mul(hp1, j.coeffs[order + 1]) for j in yj]
    else:
        defect = [Interval.point(0.0)] * sys.dim

    comps = []
    for j in range(sys.dim):
        c = iv.sub(iv.add(y_rk[j], rem[j]), defect[j])
        if not (math.isfinite(c.lo) and math.isfinite(c.hi)):
            raise IntegrationError(
                f"truncation bound non-finite in component x{j + 1}"
            )
        comps.append(c)
    y = Box(comps)
    # refine with an independent Taylor-tail enclosure: near slow manifolds
    # the RK remainder width saturates at the flow's whole-step variation,
    # while the point Taylor sum shrinks with it
    refine = _taylor_enclosure(
        sys, x, Y, h, max(order + 1, _TAYLOR_REFINE_ORDER)
    )
    tight = y.intersect(refine)
    if tight is None:
        raise IntegrationError(
            "internal soundness error: RK and Taylor step images disjoint"
        )
    y = tight
    tight = y.intersect(Y)
    if tight is None:
        raise IntegrationError(
            "internal soundness error: step image disjoint from a-priori box"
        )
    return StepEnclosure(y_next=tight, apriori=Y, accepted_h=h)


def one_step_gradient(
    sys: OdeSystem, X: Box, h: float, order: int
) -> IntervalMatrix:
    """Enclosure of the one-step flow gradients over every start point in X."""
    _check_order(order)
    n = sys.dim
    Y = apriori_enclosure(sys, X, h)
    h_iv = Interval.point(h)

    _, stage_envs = _rk_flow(sys, list(X.comps), h_iv, ex.INTERVAL_ALGEBRA, order)
    inc = _rk_gradient_increment(sys, stage_envs, h_iv, ex.INTERVAL_ALGEBRA, order)

    JY = sys.eval_jac_interval(Y)
    W_ap = _matrix_picard(JY, h, n)
    hp1, lie_scale = _h_pow_scale(h, order)
    y_env = list(Y.comps)
    P = sys.gradient_coeff(order + 1)
    P_iv = IntervalMatrix(
        [ex.eval_interval(e, y_env) for e in row] for row in P
    )
    rem = P_iv.mat_mat(W_ap).scale(lie_scale)

    one_step = IntervalMatrix(
        [iv.add(a, b) for a, b in zip(ra, rb)]
        for ra, rb in zip(inc, rem.rows)
    )
    if order > 1:
        alg = JetAlgebra(order + 1)
        jet_env = [Jet.constant(c, order + 1) for c in X.comps]
        hj = Jet.variable(Interval(0.0, h), order + 1)
        _, jet_stages = _rk_flow(sys, jet_env, hj, alg, order)
        w_jets = _rk_gradient_increment(sys, jet_stages, hj, alg, order)
        one_step = IntervalMatrix(
            [
                iv.sub(a, iv.mul(hp1, w.coeffs[order + 1]))
                for a, w in zip(row, wrow)
            ]
            for row, wrow in zip(one_step.rows, w_jets)
        )
    for row in one_step.rows:
        for a in row:
            if not (math.isfinite(a.lo) and math.isfinite(a.hi)):
                raise IntegrationError("gradient truncation bound non-finite")
    tight = _mat_intersect(one_step, W_ap)
    if tight is not None:
        one_step = tight
    return one_step


def step_gradient(
    sys: OdeSystem, X: Box, g: GradientEnclosure, h: float, order: int
) -> GradientEnclosure:
    """Advance the gradient enclosure across one step over the reachset box X."""
    one_step = one_step_gradient(sys, X, h, order)

    # Lohner QR update: one_step = C + E around its midpoint; the new set is
    # C*base + E*base + (C Q) r + (E Q) r, re-centred on fl(C @ base) with the
    # residue rotated into the new frame
    mid_os = np.array(one_step.mid())
    c_iv = IntervalMatrix.from_floats(mid_os)
    E = IntervalMatrix(
        [iv.sub(a, Interval.point(c)) for a, c in zip(row, crow)]
        for row, crow in zip(one_step.rows, mid_os.tolist())
    )
    try:
        Qn, _ = np.linalg.qr(mid_os @ g.Q)
        Qinv, _defect = orth_inverse_enclosure(Qn)
    except (np.linalg.LinAlgError, FrameDegeneracyError) as exc:
        raise IntegrationError(f"QR wrapping update failed: {exc}") from exc
    q_iv = IntervalMatrix.from_floats(g.Q)
    base_iv = IntervalMatrix.from_floats(g.base)

    M = c_iv.mat_mat(base_iv)  # near-degenerate
    base_n = np.array(M.mid())
    base_n_iv = IntervalMatrix.from_floats(base_n)
    resid = M.add(base_n_iv.scale(Interval.point(-1.0)))
    drift = E.mat_mat(base_iv.add(q_iv.mat_mat(g.R)))  # E * (base + Q r)
    B_hat = Qinv.mat_mat(c_iv.mat_mat(q_iv))  # ~ triangular, tight
    Rn = Qinv.mat_mat(resid.add(drift)).add(B_hat.mat_mat(g.R))
    total = base_n_iv.add(IntervalMatrix.from_floats(Qn).mat_mat(Rn))

    # left-relative form: (C+E)(I+L)base = (I + L')(C base) with
    # L' = resid base'^{-1} + (C L + E (I+L)) (base base'^{-1});
    # base base'^{-1} is contracted first (it is ~C^{-1}, norm ~1), otherwise
    # the inverse norm amplifies every width in the product
    left_n = None
    if g.left is not None:
        from .metric import invert_enclosure

        try:
            binv = invert_enclosure(base_n)
            G = base_iv.mat_mat(binv)
            eye_iv = IntervalMatrix.identity(base_n.shape[0])
            inner = c_iv.mat_mat(g.left).add(E.mat_mat(eye_iv.add(g.left)))
            left_n = resid.mat_mat(binv).add(inner.mat_mat(G))
        except FrameDegeneracyError:
            left_n = None

    mid_total = _clip_into(base_n, total)
    return GradientEnclosure(
        Q=Qn,
        R=Rn,
        base=base_n,
        total=total,
        mid_total=mid_total,
        one_step=one_step,
        mid_one_step=mid_os,
        left=left_n,
    )


def _mat_intersect(A: IntervalMatrix, B: IntervalMatrix):
    out = []
    for ra, rb in zip(A.rows, B.rows):
        row = []
        for a, b in zip(ra, rb):
            c = iv.intersect(a, b)
            if c is None:
                return None
            row.append(c)
        out.append(row)
    return IntervalMatrix(out)


def _clip_into(M: np.ndarray, encl: IntervalMatrix) -> np.ndarray:
    out = M.copy()
    n, m = encl.shape
    for i in range(n):
        for j in range(m):
            a = encl[i, j]
            if out[i, j] < a.lo:
                out[i, j] = a.lo
            elif out[i, j] > a.hi:
                out[i, j] = a.hi
    return out


# -- plain reference integration (non-rigorous, for oracles only) -------------


def reference_integrate(sys: OdeSystem, x, t_end: float, h_fine: float):
    """Plain RK4 point integration; oracle only, no enclosure semantics.

    ``x`` may be a single state (n,) or a batch (m, n); batches propagate
    through numpy broadcasting.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    if t_end == 0.0:
        return x.copy()
    steps = max(1, int(round(t_end / h_fine)))
    h = t_end / steps
    state = x.copy()
    for _ in range(steps):
        state = _rk4_point_step(sys, state, h)
    if not np.all(np.isfinite(state)):
        raise OracleError("reference trajectory became non-finite")
    return state[0] if single and state.ndim > 1 else state


def _rk4_point_step(sys: OdeSystem, state: np.ndarray, h: float) -> np.ndarray:
    def f(s):
        env = [s[..., j] for j in range(sys.dim)]
        vals = [ex.eval_real(r, env) for r in sys.rhs]
        return np.stack(
            [np.broadcast_to(v, s[..., 0].shape) if np.ndim(v) == 0 else v for v in vals],
            axis=-1,
        ) if s.ndim > 1 else np.array([float(v) for v in vals])

    k1 = f(state)
    k2 = f(state + 0.5 * h * k1)
    k3 = f(state + 0.5 * h * k2)
    k4 = f(state + h * k3)
    return state + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
