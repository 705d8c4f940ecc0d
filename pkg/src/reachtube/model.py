"""Model files: parsing, ODE systems, symbolic Jacobians, initial sets.

Grammar (one equation per line)::

    x<k>' = <expr>          k in 1..n, contiguous, each exactly once
    time x<k>               optional: marks x<k> as the time variable
    # comment

Expressions use ``+ - * / ^`` (``^`` with an integer literal exponent
only), unary minus, functions ``sin cos tan tanh exp ln sqrt``, and
decimal or scientific literals.  Precedence: ``^`` tightest, then unary
minus, then ``* /``, then ``+ -``.
"""

from __future__ import annotations

import math
import re
import threading
from dataclasses import dataclass, field
from typing import Optional, Sequence

from . import expr as ex
from . import interval as iv

__all__ = [
    "ParseError",
    "OdeSystem",
    "InitialSet",
    "InitFile",
    "parse_model",
    "parse_init",
    "RADIUS_FLOOR",
]

# zero-radius initial dimensions are widened to keep the initial frame
# invertible; recorded in run reports
RADIUS_FLOOR = 1e-9


class ParseError(ValueError):
    def __init__(self, msg: str, line: int, col: int):
        super().__init__(f"line {line}, column {col}: {msg}")
        self.line = line
        self.col = col


# -- tokeniser ---------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>\*|/|\+|-|\^|\(|\)|=|'|,))"
)

_FUNCS = {"sin", "cos", "tan", "tanh", "exp", "ln", "sqrt"}


@dataclass
class _Tok:
    kind: str  # num | name | op | end
    text: str
    col: int


def _tokenize(s: str, line: int) -> list[_Tok]:
    toks = []
    pos = 0
    while pos < len(s):
        m = _TOKEN_RE.match(s, pos)
        if not m or m.end() == pos:
            rest = s[pos:].lstrip()
            if not rest:
                break
            raise ParseError(f"unexpected character {rest[0]!r}", line, pos + 1)
        pos = m.end()
        for kind in ("num", "name", "op"):
            t = m.group(kind)
            if t is not None:
                toks.append(_Tok(kind, t, m.start(kind) + 1))
                break
    toks.append(_Tok("end", "", len(s) + 1))
    return toks


class _ExprParser:
    def __init__(self, toks: list[_Tok], line: int, nvars: Optional[int]):
        self.toks = toks
        self.i = 0
        self.line = line
        self.nvars = nvars  # None: collect references, check later
        self.max_var = -1

    def peek(self) -> _Tok:
        return self.toks[self.i]

    def next(self) -> _Tok:
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, text: str) -> _Tok:
        t = self.next()
        if t.text != text:
            raise ParseError(f"expected {text!r}, found {t.text or 'end of line'!r}", self.line, t.col)
        return t

    def fail(self, msg: str) -> ParseError:
        return ParseError(msg, self.line, self.peek().col)

    def parse(self) -> ex.Expr:
        e = self.sum()
        if self.peek().kind != "end":
            raise self.fail(f"trailing input {self.peek().text!r}")
        return e

    def sum(self) -> ex.Expr:
        e = self.term()
        while self.peek().text in ("+", "-"):
            op = self.next().text
            rhs = self.term()
            e = ex.add(e, rhs) if op == "+" else ex.sub(e, rhs)
        return e

    def term(self) -> ex.Expr:
        e = self.unary()
        while self.peek().text in ("*", "/"):
            op = self.next().text
            rhs = self.unary()
            e = ex.mul(e, rhs) if op == "*" else ex.div(e, rhs)
        return e

    def unary(self) -> ex.Expr:
        if self.peek().text == "-":
            self.next()
            return ex.neg(self.unary())
        if self.peek().text == "+":
            self.next()
            return self.unary()
        return self.power()

    def power(self) -> ex.Expr:
        base = self.atom()
        if self.peek().text == "^":
            self.next()
            sign = 1
            if self.peek().text == "-":
                self.next()
                sign = -1
            t = self.next()
            if t.kind != "num" or not re.fullmatch(r"\d+", t.text):
                raise ParseError("exponent must be an integer literal", self.line, t.col)
            return ex.pow_int(base, sign * int(t.text))
        return base

    def atom(self) -> ex.Expr:
        t = self.next()
        if t.kind == "num":
            return ex.Const(float(t.text))
        if t.text == "(":
            e = self.sum()
            self.expect(")")
            return e
        if t.kind == "name":
            if t.text in _FUNCS:
                self.expect("(")
                arg = self.sum()
                self.expect(")")
                return ex.un(t.text, arg)
            idx = _var_index(t.text)
            if idx is None:
                raise ParseError(f"unknown identifier {t.text!r}", self.line, t.col)
            if self.nvars is not None and idx >= self.nvars:
                raise ParseError(f"undeclared variable x{idx + 1}", self.line, t.col)
            self.max_var = max(self.max_var, idx)
            return ex.Var(idx)
        raise ParseError(f"unexpected token {t.text or 'end of line'!r}", self.line, t.col)


def _var_index(name: str) -> Optional[int]:
    m = re.fullmatch(r"x(\d+)", name)
    if not m or m.group(1).startswith("0"):
        return None
    return int(m.group(1)) - 1


# -- ODE system ---------------------------------------------------------------


@dataclass(eq=False)
class OdeSystem:
    """Vector field as expression trees with a symbolic Jacobian.

    Immutable after construction; the Lie-derivative caches are filled
    lazily under a lock (single initialisation, safe to share).
    """

    dim: int
    rhs: tuple[ex.Expr, ...]
    name: str = "system"
    time_index: Optional[int] = None
    jac: tuple[tuple[ex.Expr, ...], ...] = field(init=False)

    def __post_init__(self):
        if len(self.rhs) != self.dim:
            raise ValueError("rhs length must equal dim")
        if self.time_index is not None:
            r = self.rhs[self.time_index]
            if not (isinstance(r, ex.Const) and r.value == 1.0):
                raise ValueError("time variable must satisfy x' = 1")
        memo: dict = {}
        self.jac = tuple(
            tuple(ex.differentiate(f, j, memo) for j in range(self.dim))
            for f in self.rhs
        )
        self._lock = threading.Lock()
        self._lie: dict[int, tuple[ex.Expr, ...]] = {0: self.rhs}
        self._gradp: dict[int, tuple[tuple[ex.Expr, ...], ...]] = {1: self.jac}

    # L^k f: the flow's (k+1)-th time derivative equals (L^k f)(x)
    def lie_rhs(self, k: int) -> tuple[ex.Expr, ...]:
        with self._lock:
            top = max(self._lie)
            while top < k:
                g = self._lie[top]
                memo: dict = {}
                nxt = tuple(
                    _dot_grad(gj, self.rhs, self.dim, memo) for gj in g
                )
                top += 1
                self._lie[top] = nxt
            return self._lie[k]

    # P_k with d^k W / dt^k = P_k(x) W for the variational flow W' = J(x)W;
    # P_1 = J, P_{k+1} = (sum_m dP_k/dx_m f_m) + P_k J
    def gradient_coeff(self, k: int) -> tuple[tuple[ex.Expr, ...], ...]:
        with self._lock:
            top = max(self._gradp)
            while top < k:
                p = self._gradp[top]
                memo: dict = {}
                n = self.dim
                nxt = []
                for i in range(n):
                    row = []
                    for j in range(n):
                        term = _dot_grad(p[i][j], self.rhs, n, memo)
                        for m in range(n):
                            term = ex.add(term, ex.mul(p[i][m], self.jac[m][j]))
                        row.append(term)
                    nxt.append(tuple(row))
                top += 1
                self._gradp[top] = tuple(nxt)
            return self._gradp[k]

    def eval_rhs_real(self, x: Sequence[float]) -> list:
        return [ex.eval_real(f, x) for f in self.rhs]

    def eval_rhs_interval(self, x: iv.Box) -> iv.Box:
        return iv.Box(ex.eval_interval(f, x) for f in self.rhs)

    def eval_jac_interval(self, x: iv.Box) -> iv.IntervalMatrix:
        return iv.IntervalMatrix(
            [ex.eval_interval(e, x) for e in row] for row in self.jac
        )

    def pretty(self) -> str:
        lines = [f"x{k + 1}' = {ex.to_text(f)}" for k, f in enumerate(self.rhs)]
        if self.time_index is not None:
            lines.append(f"time x{self.time_index + 1}")
        return "\n".join(lines)


def _dot_grad(g: ex.Expr, f: Sequence[ex.Expr], n: int, memo: dict) -> ex.Expr:
    out: ex.Expr = ex.ZERO
    for m in range(n):
        out = ex.add(out, ex.mul(ex.differentiate(g, m, memo), f[m]))
    return out


# -- model file ---------------------------------------------------------------


def parse_model(text: str, name: str = "model") -> OdeSystem:
    """Parse a model file into an :class:`OdeSystem`."""
    equations: dict[int, ex.Expr] = {}
    eq_lines: dict[int, int] = {}
    time_index: Optional[int] = None
    max_ref = -1

    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = re.match(r"^\s*time\s+(x\d+)\s*$", line)
        if m:
            idx = _var_index(m.group(1))
            if idx is None:
                raise ParseError(f"bad time variable {m.group(1)!r}", ln, 1)
            if time_index is not None:
                raise ParseError("duplicate time directive", ln, 1)
            time_index = idx
            continue
        toks = _tokenize(line, ln)
        if (
            len(toks) < 4
            or toks[0].kind != "name"
            or toks[1].text != "'"
            or toks[2].text != "="
        ):
            raise ParseError("expected \"x<k>' = <expr>\" or \"time x<k>\"", ln, toks[0].col)
        idx = _var_index(toks[0].text)
        if idx is None:
            raise ParseError(f"bad variable name {toks[0].text!r}", ln, toks[0].col)
        if idx in equations:
            raise ParseError(f"duplicate equation for x{idx + 1}", ln, toks[0].col)
        p = _ExprParser(toks[3:], ln, nvars=None)
        equations[idx] = p.parse()
        eq_lines[idx] = ln
        max_ref = max(max_ref, idx, p.max_var)

    if not equations:
        raise ParseError("no equations found", 1, 1)
    n = max_ref + 1
    for k in range(n):
        if k not in equations:
            raise ParseError(
                f"variable x{k + 1} is referenced but has no equation",
                max(eq_lines.values()),
                1,
            )
    if time_index is not None and time_index >= n:
        raise ParseError(f"time variable x{time_index + 1} has no equation", 1, 1)
    rhs = tuple(equations[k] for k in range(n))
    return OdeSystem(dim=n, rhs=rhs, name=name, time_index=time_index)


# -- initial sets -------------------------------------------------------------


@dataclass(frozen=True)
class InitialSet:
    """Ball center and per-dimension radii (scalar radius replicates)."""

    center: tuple[float, ...]
    radii: tuple[float, ...]
    floored: tuple[int, ...] = ()  # dimensions widened to RADIUS_FLOOR

    @staticmethod
    def of(center: Sequence[float], radius) -> "InitialSet":
        c = tuple(float(v) for v in center)
        if isinstance(radius, (int, float)):
            r = [float(radius)] * len(c)
        else:
            r = [float(v) for v in radius]
        if len(r) != len(c):
            raise ValueError("radius list length must match center length")
        floored = []
        out = []
        for j, v in enumerate(r):
            if not math.isfinite(v) or v < 0.0:
                raise ValueError(f"radius must be finite and >= 0, got {v}")
            if v < RADIUS_FLOOR:
                floored.append(j)
                v = RADIUS_FLOOR
            out.append(v)
        for v in c:
            if not math.isfinite(v):
                raise ValueError("non-finite center component")
        return InitialSet(c, tuple(out), tuple(floored))

    @property
    def dim(self) -> int:
        return len(self.center)

    def box(self) -> iv.Box:
        return iv.Box.from_center_rad(self.center, self.radii)


@dataclass(frozen=True)
class InitFile:
    """Parsed initial-set file: center/radius plus optional run settings."""

    initial: InitialSet
    dt: Optional[float] = None
    horizon: Optional[float] = None
    order: Optional[int] = None


def parse_init(text: str) -> InitFile:
    center = None
    radius = None
    dt = horizon = None
    order = None
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError("expected 'key = value'", ln, 1)
        key, _, val = line.partition("=")
        key = key.strip().lower()
        val = val.strip()
        try:
            if key == "center":
                center = [float(v) for v in val.split(",")]
            elif key == "radius":
                radius = [float(v) for v in val.split(",")]
            elif key == "dt":
                dt = float(val)
            elif key in ("t", "horizon"):
                horizon = float(val)
            elif key == "order":
                order = int(val)
                if order not in (1, 2, 4):
                    raise ParseError("order must be 1, 2 or 4", ln, 1)
            else:
                raise ParseError(f"unknown key {key!r}", ln, 1)
        except ValueError as exc:
            if isinstance(exc, ParseError):
                raise
            raise ParseError(f"bad value for {key!r}: {val!r}", ln, 1) from exc
    if center is None:
        raise ParseError("missing 'center' line", 1, 1)
    if radius is None:
        raise ParseError("missing 'radius' line", 1, 1)
    if len(radius) == 1:
        radius = radius * len(center)
    init = InitialSet.of(center, radius)
    return InitFile(init, dt=dt, horizon=horizon, order=order)
