"""Sparse real polynomials, with a numeric kernel for the bivariate case.

Coefficients are kept as given (int, float or Fraction) so that polynomial
arithmetic on exact inputs stays exact; numeric evaluation always goes
through IEEE doubles, and :mod:`mpmath` evaluation treats every coefficient
as the exact number it stores.
"""

from __future__ import annotations

import ast
import math
import numbers
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Mapping

import mpmath
import numpy as np
from numpy.polynomial import polynomial as npoly

from ..errors import NotHomogeneous, PolynomialSyntaxError, SingularPoint

XY = ("x", "y")
PHASE = ("x", "y", "v1", "v2")
SIGMA_V = ("sigma", "v1", "v2")

_ALIASES = {"vx": "v1", "vy": "v2", "s": "sigma"}


def _is_zero(c) -> bool:
    return c == 0


def _clean(c):
    if isinstance(c, Fraction) and c.denominator == 1:
        return int(c.numerator)
    return c


def format_coefficient(c) -> str:
    f = float(c)
    if f.is_integer() and abs(f) < 2**53:
        return str(int(f))
    return repr(f)


class Polynomial:
    """Polynomial with named variables and a sparse ``{exponents: coefficient}`` map."""

    def __init__(self, terms: Mapping[tuple, numbers.Number] | None = None, variables=XY):
        self.variables = tuple(variables)
        n = len(self.variables)
        clean = {}
        for exps, c in (terms or {}).items():
            exps = tuple(int(e) for e in exps)
            if len(exps) != n or min(exps, default=0) < 0:
                raise ValueError(f"bad exponent tuple {exps} for variables {self.variables}")
            if not _is_zero(c):
                clean[exps] = _clean(clean.get(exps, 0) + c)
                if _is_zero(clean[exps]):
                    del clean[exps]
        self.terms = clean

    @classmethod
    def _make(cls, terms, variables):
        if tuple(variables) == XY:
            return BivariatePolynomial(terms)
        return Polynomial(terms, variables)

    @classmethod
    def constant(cls, c, variables=XY):
        return cls._make({(0,) * len(variables): c}, variables)

    @classmethod
    def variable(cls, name, variables=XY):
        i = tuple(variables).index(name)
        e = [0] * len(variables)
        e[i] = 1
        return cls._make({tuple(e): 1}, variables)

    @classmethod
    def parse(cls, text: str, variables=XY) -> "Polynomial":
        return parse_polynomial(text, variables)

    # -- structure -------------------------------------------------------

    @property
    def degree(self) -> int:
        return max((sum(e) for e in self.terms), default=0)

    def is_zero(self) -> bool:
        return not self.terms

    def is_constant(self) -> bool:
        return all(sum(e) == 0 for e in self.terms)

    def homogeneous_degree(self):
        """Common total degree of all terms, or None if not homogeneous."""
        degrees = {sum(e) for e in self.terms}
        if len(degrees) == 1:
            return degrees.pop()
        return 0 if not degrees else None

    def homogeneous_part(self, d: int) -> "Polynomial":
        return self._make({e: c for e, c in self.terms.items() if sum(e) == d}, self.variables)

    def coefficient(self, *exps):
        return self.terms.get(tuple(exps), 0)

    # -- arithmetic ------------------------------------------------------

    def _coerce(self, other):
        if isinstance(other, Polynomial):
            if other.variables != self.variables:
                raise ValueError(f"variable mismatch {self.variables} vs {other.variables}")
            return other
        if isinstance(other, numbers.Number):
            return self.constant(other, self.variables)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        terms = dict(self.terms)
        for e, c in other.terms.items():
            terms[e] = terms.get(e, 0) + c
        return self._make(terms, self.variables)

    __radd__ = __add__

    def __neg__(self):
        return self._make({e: -c for e, c in self.terms.items()}, self.variables)

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        terms = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                terms[e] = terms.get(e, 0) + c1 * c2
        return self._make(terms, self.variables)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, numbers.Number):
            return NotImplemented
        if isinstance(other, numbers.Rational):
            return self * (Fraction(1) / Fraction(other))
        return self * (1.0 / other)

    def __pow__(self, n: int):
        if not isinstance(n, int) or n < 0:
            raise ValueError("only non-negative integer powers")
        result = self.constant(1, self.variables)
        base = self
        while n:
            if n & 1:
                result = result * base
            base = base * base
            n >>= 1
        return result

    def __eq__(self, other):
        if isinstance(other, numbers.Number):
            other = self.constant(other, self.variables)
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self.variables == other.variables and self.terms == other.terms

    def __hash__(self):
        return hash((self.variables, frozenset(self.terms.items())))

    def diff(self, var) -> "Polynomial":
        i = self.variables.index(var) if isinstance(var, str) else int(var)
        terms = {}
        for e, c in self.terms.items():
            if e[i]:
                ne = list(e)
                ne[i] -= 1
                terms[tuple(ne)] = c * e[i]
        return self._make(terms, self.variables)

    def substitute(self, mapping: Mapping[str, "Polynomial | numbers.Number"], variables=None):
        """Compose: replace each variable by a polynomial in ``variables``."""
        variables = tuple(variables or self.variables)
        images = []
        for v in self.variables:
            img = mapping.get(v, v)
            if isinstance(img, str):
                img = Polynomial.variable(img, variables) if img in variables else None
                if img is None:
                    raise ValueError(f"variable {v!r} has no image in {variables}")
            elif isinstance(img, numbers.Number):
                img = Polynomial.constant(img, variables)
            images.append(img)
        result = Polynomial._make({}, variables)
        cache = [{0: Polynomial.constant(1, variables)} for _ in images]

        def power(i, k):
            if k not in cache[i]:
                cache[i][k] = power(i, k - 1) * images[i]
            return cache[i][k]

        for e, c in self.terms.items():
            term = Polynomial.constant(c, variables)
            for i, k in enumerate(e):
                if k:
                    term = term * power(i, k)
            result = result + term
        return result

    # -- evaluation --------------------------------------------------------

    def __call__(self, *values):
        if len(values) != len(self.variables):
            raise TypeError(f"expected {len(self.variables)} values, got {len(values)}")
        values = [np.asarray(v, dtype=float) for v in values]
        shape = np.broadcast(*values).shape if values else ()
        acc = np.zeros(shape)
        for e, c in self.terms.items():
            t = np.full(shape, float(c))
            for v, k in zip(values, e):
                if k:
                    t = t * v**k
            acc = acc + t
        return acc if shape else float(acc)

    def max_term(self, *values):
        """Largest monomial magnitude |c x^i y^j ...| at the given point(s)."""
        values = [np.abs(np.asarray(v, dtype=float)) for v in values]
        shape = np.broadcast(*values).shape if values else ()
        out = np.zeros(shape)
        for e, c in self.terms.items():
            t = np.full(shape, abs(float(c)))
            for v, k in zip(values, e):
                if k:
                    t = t * v**k
            out = np.maximum(out, t)
        return out if shape else float(out)

    def scale_at(self, *values):
        """Residual scale: largest monomial with each coordinate floored at magnitude 1."""
        floored = [np.maximum(1.0, np.abs(np.asarray(v, dtype=float))) for v in values]
        return self.max_term(*floored)

    def mp_eval(self, *values):
        acc = mpmath.mpf(0)
        for e, c in self.terms.items():
            t = to_mpf(c)
            for v, k in zip(values, e):
                if k:
                    t *= v**k
            acc += t
        return acc

    # -- text --------------------------------------------------------------

    def to_text(self) -> str:
        if not self.terms:
            return "0"
        parts = []
        for e in sorted(self.terms, key=lambda e: (-sum(e), tuple(-k for k in e))):
            mono = "*".join(f"{v}^{k}" for v, k in zip(self.variables, e))
            parts.append(f"{format_coefficient(self.terms[e])}*{mono}")
        return " + ".join(parts)

    def __str__(self):
        return self.to_text()

    def __repr__(self):
        return f"{type(self).__name__}({self.to_text()!r})"


def to_mpf(c):
    if isinstance(c, Fraction):
        return mpmath.mpf(c.numerator) / c.denominator
    return mpmath.mpf(c)


@dataclass(frozen=True)
class Jet2:
    value: np.ndarray
    fx: np.ndarray
    fy: np.ndarray
    fxx: np.ndarray
    fxy: np.ndarray
    fyy: np.ndarray

    @property
    def gradient(self):
        return np.stack([self.fx, self.fy], axis=-1)

    @property
    def gradient_norm(self):
        return np.hypot(self.fx, self.fy)

    @property
    def hessian(self):
        return np.array([[self.fxx, self.fxy], [self.fxy, self.fyy]])

    @property
    def affine_hessian(self):
        return self.fxx * self.fy**2 - 2.0 * self.fxy * self.fx * self.fy + self.fyy * self.fx**2


class BivariatePolynomial(Polynomial):
    """Real polynomial in (x, y) with dense Horner evaluation and 2-jets."""

    def __init__(self, terms=None, variables=XY):
        if tuple(variables) != XY:
            raise ValueError("BivariatePolynomial variables are fixed to (x, y)")
        super().__init__(terms, XY)

    @classmethod
    def from_text(cls, text: str) -> "BivariatePolynomial":
        p = parse_polynomial(text, XY)
        return p

    @cached_property
    def dense(self) -> np.ndarray:
        d = self.degree
        C = np.zeros((d + 1, d + 1))
        for (i, j), c in self.terms.items():
            C[i, j] = float(c)
        return C

    @cached_property
    def _derivative_tables(self):
        C = self.dense
        cx = npoly.polyder(C, axis=0)
        cy = npoly.polyder(C, axis=1)
        return {
            "fx": cx,
            "fy": cy,
            "fxx": npoly.polyder(cx, axis=0),
            "fxy": npoly.polyder(cx, axis=1),
            "fyy": npoly.polyder(cy, axis=1),
        }

    def __call__(self, x, y):
        out = npoly.polyval2d(np.asarray(x, float), np.asarray(y, float), self.dense)
        return out if np.ndim(out) else float(out)

    def jet(self, x, y) -> Jet2:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        t = self._derivative_tables
        ev = lambda C: npoly.polyval2d(x, y, C) if C.size else np.zeros(np.broadcast(x, y).shape)
        return Jet2(ev(self.dense), ev(t["fx"]), ev(t["fy"]), ev(t["fxx"]), ev(t["fxy"]), ev(t["fyy"]))

    def gradient_max_term(self, x, y):
        """Scale of the gradient: max monomial magnitude of f_x and f_y."""
        return np.maximum(self.diff("x").max_term(x, y), self.diff("y").max_term(x, y))

    def mp_partials(self, x, y, order=None):
        """All partial derivatives d^(a+b) f / dx^a dy^b with a + b <= order, in mpmath."""
        order = self.degree if order is None else order
        d = self.degree
        xp = [mpmath.mpf(1)]
        yp = [mpmath.mpf(1)]
        for _ in range(d):
            xp.append(xp[-1] * x)
            yp.append(yp[-1] * y)
        out: dict[tuple[int, int], mpmath.mpf] = {}
        for (i, j), c in self._mp_terms:
            fa = 1
            for a in range(min(i, order) + 1):
                if a:
                    fa *= i - a + 1
                fb = 1
                for b in range(min(j, order - a) + 1):
                    if b:
                        fb *= j - b + 1
                    key = (a, b)
                    out[key] = out.get(key, mpmath.mpf(0)) + c * fa * fb * xp[i - a] * yp[j - b]
        return out

    def mp_jet(self, x, y):
        """(f, fx, fy, fxx, fxy, fyy) in mpmath at the current working precision."""
        p = self.mp_partials(x, y, 2)
        z = mpmath.mpf(0)
        return tuple(p.get(k, z) for k in [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)])

    @property
    def _mp_terms(self):
        # mpf conversion is exact for floats and ints; fractions follow mp.dps
        return [(e, to_mpf(c)) for e, c in self.terms.items()]

    def taylor_shift_mp(self, x0, y0):
        """Coefficients of f(x0 + u, y0 + v) as a dict of mpf values."""
        parts = self.mp_partials(x0, y0)
        return {(a, b): v / (math.factorial(a) * math.factorial(b)) for (a, b), v in parts.items()}

    def linear_transform(self, m, shift=(0.0, 0.0)) -> "BivariatePolynomial":
        """f(M @ (x, y) + shift) as a new polynomial."""
        (a, b), (c, d) = m
        x = Polynomial.variable("x")
        y = Polynomial.variable("y")
        return self.substitute({"x": a * x + b * y + shift[0], "y": c * x + d * y + shift[1]})


def jet2(poly: BivariatePolynomial, point) -> Jet2:
    return poly.jet(point[0], point[1])


def affine_hessian(poly: BivariatePolynomial, point):
    """H(f) = f_xx f_y^2 - 2 f_xy f_x f_y + f_yy f_x^2."""
    return poly.jet(point[0], point[1]).affine_hessian


def implicit_curvature(poly: BivariatePolynomial, point, grad_floor: float = 1e-12):
    """Signed curvature -H(f)/|grad f|^3 of {f = 0}, relative to the normal grad f."""
    j = poly.jet(point[0], point[1])
    g = j.gradient_norm
    if np.any(g < grad_floor):
        raise SingularPoint(f"|grad f| = {np.min(g):.3g} below {grad_floor} at {point}")
    return -j.affine_hessian / g**3


# -- text format --------------------------------------------------------------


def parse_polynomial(text: str, variables=XY) -> Polynomial:
    """Parse arithmetic text such as ``(x^2+y^2-5)^2-16`` or ``1*x^2*y^0 + -1*x^0*y^0``.

    Accepts numbers, the given variable names, ``+ - *``, ``/`` by a number,
    ``^`` or ``**`` with non-negative integer exponents, and parentheses.
    """
    variables = tuple(variables)
    source = " ".join(text.replace("^", "**").split())
    if not source:
        raise PolynomialSyntaxError("empty polynomial text", token="")
    try:
        tree = ast.parse(source, mode="eval")
    except SyntaxError as exc:
        bad = source[exc.offset - 1] if exc.offset and exc.offset <= len(source) else source[-1]
        raise PolynomialSyntaxError(
            f"cannot parse polynomial {text!r} near token {bad!r}", token=bad
        ) from None

    def number(node):
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
            return node.value
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = number(node.operand)
            return None if v is None else (-v if isinstance(node.op, ast.USub) else v)
        return None

    def walk(node):
        if isinstance(node, ast.Expression):
            return walk(node.body)
        if isinstance(node, ast.Constant):
            if isinstance(node.value, bool) or not isinstance(node.value, (int, float)):
                raise PolynomialSyntaxError(f"unexpected token {node.value!r}", token=repr(node.value))
            return Polynomial.constant(node.value, variables)
        if isinstance(node, ast.Name):
            name = _ALIASES.get(node.id, node.id)
            if name not in variables:
                raise PolynomialSyntaxError(
                    f"unknown variable {node.id!r}; expected one of {variables}", token=node.id
                )
            return Polynomial.variable(name, variables)
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = walk(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.BinOp):
            if isinstance(node.op, ast.Pow):
                base = walk(node.left)
                n = number(node.right)
                if n is None or n != int(n) or n < 0:
                    tok = ast.unparse(node.right)
                    raise PolynomialSyntaxError(
                        f"exponent {tok!r} is not a non-negative integer", token=tok
                    )
                return base ** int(n)
            left, right = walk(node.left), walk(node.right)
            if isinstance(node.op, ast.Add):
                return left + right
            if isinstance(node.op, ast.Sub):
                return left - right
            if isinstance(node.op, ast.Mult):
                return left * right
            if isinstance(node.op, ast.Div):
                if not right.is_constant() or right.is_zero():
                    tok = ast.unparse(node.right)
                    raise PolynomialSyntaxError(f"cannot divide by {tok!r}", token=tok)
                return left * (1.0 / float(right.coefficient(*([0] * len(variables)))))
        tok = ast.unparse(node) if hasattr(ast, "unparse") else type(node).__name__
        raise PolynomialSyntaxError(f"unsupported token {tok!r}", token=tok)

    return walk(tree)
