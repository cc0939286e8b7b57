"""Sparse multivariate polynomials over the complex numbers.

A polynomial is a map from exponent multi-indices (one nonnegative integer
per variable) to complex coefficients.  Zero coefficients are never stored,
so two polynomials are equal exactly when their term maps are equal.  All
objects are immutable after construction and every operation returns a new
object, which makes them safe to share across threads.

Term order is graded lexicographic throughout.  That fixes the floating
point summation order during evaluation, so results are reproducible run to
run and across machines with the same float format.
"""

from __future__ import annotations

import json
import math
import re
from typing import Iterable, Mapping, Sequence

import numpy as np

Exponent = tuple[int, ...]

__all__ = [
    "Poly",
    "PolySystem",
    "PolyParseError",
    "parse_poly",
    "parse_system",
    "system_to_string",
    "load_system_json",
    "eval_system",
    "jacobian",
    "dir_hessian",
    "normalized_partial",
    "apply_functional",
    "compose_affine",
]


def grlex_key(alpha: Exponent):
    """Sort key for graded lexicographic order (total degree, then lex)."""
    return (sum(alpha), alpha)


class Poly:
    """One sparse polynomial with complex coefficients.

    ``terms`` maps exponent tuples of length ``num_vars`` to nonzero complex
    coefficients, e.g. ``x0^2*x1 + 3`` in two variables is
    ``{(2, 1): 1+0j, (0, 0): 3+0j}``.  The zero polynomial has an empty map.
    """

    __slots__ = ("num_vars", "terms", "_cache")

    def __init__(self, num_vars: int, terms: Mapping[Exponent, complex] | None = None):
        if num_vars < 1:
            raise ValueError("a polynomial needs at least one variable")
        clean: dict[Exponent, complex] = {}
        for alpha, c in (terms or {}).items():
            alpha = tuple(int(a) for a in alpha)
            if len(alpha) != num_vars:
                raise ValueError(
                    f"multi-index {alpha} has length {len(alpha)}, expected {num_vars}"
                )
            if any(a < 0 for a in alpha):
                raise ValueError(f"negative exponent in multi-index {alpha}")
            c = complex(c)
            if c != 0:
                clean[alpha] = c
        object.__setattr__(self, "num_vars", num_vars)
        object.__setattr__(self, "terms", clean)
        object.__setattr__(self, "_cache", None)

    def __setattr__(self, name, value):
        raise AttributeError("Poly is immutable")

    # -- constructors ------------------------------------------------------

    @classmethod
    def zero(cls, num_vars: int) -> Poly:
        return cls(num_vars, {})

    @classmethod
    def constant(cls, num_vars: int, value: complex) -> Poly:
        return cls(num_vars, {(0,) * num_vars: value})

    @classmethod
    def variable(cls, num_vars: int, index: int) -> Poly:
        if not 0 <= index < num_vars:
            raise ValueError(f"variable index {index} out of range for {num_vars} variables")
        alpha = [0] * num_vars
        alpha[index] = 1
        return cls(num_vars, {tuple(alpha): 1.0})

    # -- basic queries -----------------------------------------------------

    def is_zero(self) -> bool:
        return not self.terms

    def degree(self) -> int:
        """Total degree; the zero polynomial reports 0."""
        return max((sum(a) for a in self.terms), default=0)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Poly)
            and self.num_vars == other.num_vars
            and self.terms == other.terms
        )

    def __hash__(self):
        return hash((self.num_vars, frozenset(self.terms.items())))

    # -- arithmetic --------------------------------------------------------

    def __add__(self, other) -> Poly:
        other = self._coerce(other)
        out = dict(self.terms)
        for alpha, c in other.terms.items():
            out[alpha] = out.get(alpha, 0.0) + c
        return Poly(self.num_vars, out)

    __radd__ = __add__

    def __neg__(self) -> Poly:
        return Poly(self.num_vars, {a: -c for a, c in self.terms.items()})

    def __sub__(self, other) -> Poly:
        return self + (-self._coerce(other))

    def __rsub__(self, other) -> Poly:
        return self._coerce(other) - self

    def __mul__(self, other) -> Poly:
        if isinstance(other, (int, float, complex)):
            return Poly(self.num_vars, {a: c * other for a, c in self.terms.items()})
        other = self._coerce(other)
        out: dict[Exponent, complex] = {}
        for a1, c1 in self.terms.items():
            for a2, c2 in other.terms.items():
                alpha = tuple(x + y for x, y in zip(a1, a2))
                out[alpha] = out.get(alpha, 0.0) + c1 * c2
        return Poly(self.num_vars, out)

    __rmul__ = __mul__

    def __pow__(self, k: int) -> Poly:
        if k < 0:
            raise ValueError("negative polynomial power")
        result = Poly.constant(self.num_vars, 1.0)
        for _ in range(k):
            result = result * self
        return result

    def _coerce(self, other) -> Poly:
        if isinstance(other, Poly):
            if other.num_vars != self.num_vars:
                raise ValueError(
                    f"mixing polynomials in {self.num_vars} and {other.num_vars} variables"
                )
            return other
        if isinstance(other, (int, float, complex)):
            return Poly.constant(self.num_vars, other)
        return NotImplemented

    # -- calculus ----------------------------------------------------------

    def diff(self, index: int) -> Poly:
        """Partial derivative with respect to variable ``index`` (0-based)."""
        if not 0 <= index < self.num_vars:
            raise ValueError(f"variable index {index} out of range")
        out: dict[Exponent, complex] = {}
        for alpha, c in self.terms.items():
            e = alpha[index]
            if e == 0:
                continue
            beta = list(alpha)
            beta[index] = e - 1
            out[tuple(beta)] = c * e
        return Poly(self.num_vars, out)

    def extend(self, extra: int) -> Poly:
        """Same polynomial viewed in ``num_vars + extra`` variables."""
        if extra < 0:
            raise ValueError("cannot drop variables")
        if extra == 0:
            return self
        pad = (0,) * extra
        return Poly(self.num_vars + extra, {a + pad: c for a, c in self.terms.items()})

    # -- evaluation --------------------------------------------------------

    def _arrays(self):
        cache = self._cache
        if cache is None:
            order = sorted(self.terms, key=grlex_key)
            expo = np.array(order, dtype=np.int16).reshape(len(order), self.num_vars)
            coef = np.array([self.terms[a] for a in order], dtype=complex)
            cache = (expo, coef)
            object.__setattr__(self, "_cache", cache)
        return cache

    def eval(self, x: Sequence[complex]) -> complex:
        """Value at ``x``; terms are summed in graded-lex order."""
        x = np.asarray(x, dtype=complex)
        if x.shape != (self.num_vars,):
            raise ValueError(f"point has shape {x.shape}, expected ({self.num_vars},)")
        if not self.terms:
            return 0.0 + 0.0j
        expo, coef = self._arrays()
        vals = coef * _monomial_values(expo, x)
        return complex(np.sum(vals))

    # -- formatting --------------------------------------------------------

    def to_string(self, variable_names: Sequence[str] | None = None) -> str:
        names = _default_names(self.num_vars, variable_names)
        if not self.terms:
            return "0"
        parts: list[str] = []
        for alpha in sorted(self.terms, key=grlex_key, reverse=True):
            c = self.terms[alpha]
            mono = "*".join(
                name if e == 1 else f"{name}^{e}"
                for name, e in zip(names, alpha)
                if e > 0
            )
            coeff, negate = _format_coeff(c, bool(mono))
            sign = "-" if negate else "+"
            body = f"{coeff}*{mono}" if coeff and mono else (coeff or mono)
            if parts:
                parts.append(f" {sign} {body}")
            else:
                parts.append(f"-{body}" if negate else body)
        return "".join(parts)

    def __repr__(self):
        return f"Poly({self.to_string()!r})"


class PolySystem:
    """An ordered tuple of polynomials sharing one variable set.

    Square systems have as many polynomials as variables; deflated systems
    are longer.  Evaluation and the Jacobian use flattened coefficient
    arrays that are built lazily and cached (the system itself stays
    immutable, so sharing across threads is safe).
    """

    __slots__ = ("polys", "num_vars", "_cache")

    def __init__(self, polys: Iterable[Poly]):
        polys = tuple(polys)
        if not polys:
            raise ValueError("a system needs at least one polynomial")
        n = polys[0].num_vars
        for p in polys:
            if p.num_vars != n:
                raise ValueError("all polynomials in a system must share num_vars")
        object.__setattr__(self, "polys", polys)
        object.__setattr__(self, "num_vars", n)
        object.__setattr__(self, "_cache", {})

    def __setattr__(self, name, value):
        raise AttributeError("PolySystem is immutable")

    def __len__(self):
        return len(self.polys)

    def __iter__(self):
        return iter(self.polys)

    def __getitem__(self, i):
        return self.polys[i]

    def __eq__(self, other):
        return isinstance(other, PolySystem) and self.polys == other.polys

    def __hash__(self):
        return hash(self.polys)

    def degree(self) -> int:
        return max(p.degree() for p in self.polys)

    def is_square(self) -> bool:
        return len(self.polys) == self.num_vars

    def _flat(self, key, polys):
        """Flattened (exponents, coefficients, row ids) arrays for ``polys``."""
        cached = self._cache.get(key)
        if cached is None:
            rows, expos, coefs = [], [], []
            for i, p in enumerate(polys):
                e, c = p._arrays()
                expos.append(e)
                coefs.append(c)
                rows.append(np.full(len(c), i, dtype=np.int64))
            expo = np.concatenate(expos) if expos else np.zeros((0, self.num_vars), np.int16)
            coef = np.concatenate(coefs) if coefs else np.zeros(0, complex)
            row = np.concatenate(rows) if rows else np.zeros(0, np.int64)
            cached = (expo, coef, row, len(polys))
            self._cache[key] = cached
        return cached

    def eval(self, x: Sequence[complex]) -> np.ndarray:
        """Vector of values ``[f_1(x), ..., f_m(x)]``."""
        x = self._check_point(x)
        expo, coef, row, m = self._flat("eval", self.polys)
        return _segment_sums(coef * _monomial_values(expo, x), row, m)

    def jacobian_polys(self) -> tuple[tuple[Poly, ...], ...]:
        """Symbolic partial derivatives, cached: entry [i][j] is df_i/dx_j."""
        jac = self._cache.get("jac_polys")
        if jac is None:
            jac = tuple(
                tuple(p.diff(j) for j in range(self.num_vars)) for p in self.polys
            )
            self._cache["jac_polys"] = jac
        return jac

    def jacobian(self, x: Sequence[complex]) -> np.ndarray:
        """Jacobian matrix at ``x``, shape (len(self), num_vars)."""
        x = self._check_point(x)
        jac = self.jacobian_polys()
        flat = [p for row in jac for p in row]
        expo, coef, row, m = self._flat("jacflat", flat)
        vals = _segment_sums(coef * _monomial_values(expo, x), row, m)
        return vals.reshape(len(self.polys), self.num_vars)

    def _check_point(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=complex).reshape(-1)
        if x.shape != (self.num_vars,):
            raise ValueError(
                f"point has {x.shape[0]} coordinates, system has {self.num_vars} variables"
            )
        return x

    def to_string(self, variable_names: Sequence[str] | None = None) -> str:
        return "\n".join(p.to_string(variable_names) for p in self.polys)

    def __repr__(self):
        return f"PolySystem({len(self.polys)} polys in {self.num_vars} vars)"


def _monomial_values(expo: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Values of each monomial row of ``expo`` at ``x``.

    Uses per-variable power tables instead of complex ``**`` per entry; the
    exponent ranges here are tiny compared to the term counts.
    """
    t = expo.shape[0]
    if t == 0:
        return np.zeros(0, dtype=complex)
    out = np.ones(t, dtype=complex)
    for j in range(expo.shape[1]):
        col = expo[:, j]
        top = int(col.max())
        if top == 0:
            continue
        powers = x[j] ** np.arange(top + 1)
        out *= powers[col]
    return out


def _segment_sums(vals: np.ndarray, row: np.ndarray, m: int) -> np.ndarray:
    re = np.bincount(row, weights=vals.real, minlength=m)
    im = np.bincount(row, weights=vals.imag, minlength=m)
    return re + 1j * im


def _default_names(n: int, names: Sequence[str] | None) -> Sequence[str]:
    if names is None:
        return [f"x{i + 1}" for i in range(n)]
    if len(names) != n:
        raise ValueError(f"{len(names)} names for {n} variables")
    return names


def _format_float(v: float) -> str:
    if v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def _format_coeff(c: complex, has_monomial: bool) -> tuple[str, bool]:
    """Render a coefficient; returns (text, negate) with the sign pulled out.

    Empty text means the coefficient 1 of a monomial, which is not printed.
    """
    if c.imag == 0:
        v = c.real
        negate = v < 0
        v = abs(v)
        if v == 1 and has_monomial:
            return "", negate
        return _format_float(v), negate
    if c.real == 0:
        v = c.imag
        negate = v < 0
        v = abs(v)
        return ("i" if v == 1 else f"{_format_float(v)}i"), negate
    sign = "-" if c.imag < 0 else "+"
    return f"({_format_float(c.real)}{sign}{_format_float(abs(c.imag))}i)", False


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------


class PolyParseError(ValueError):
    """Syntax or name error in the text polynomial format."""

    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"line {line}, column {col}: {message}")
        self.line = line
        self.col = col


_TOKEN_RE = re.compile(
    r"""\s*(?:
        (?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
      | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
      | (?P<op>[-+*^()])
    )""",
    re.VERBOSE,
)


def _tokenize(line: str, lineno: int):
    tokens = []
    pos = 0
    while pos < len(line):
        m = _TOKEN_RE.match(line, pos)
        if m is None or m.end() == pos:
            rest = line[pos:].lstrip()
            if not rest:
                break
            raise PolyParseError(f"unexpected character {rest[0]!r}", lineno, pos + 1)
        col = m.start(m.lastgroup) + 1
        tokens.append((m.lastgroup, m.group(m.lastgroup), col))
        pos = m.end()
    return tokens


class _LineParser:
    """Recursive-descent parser for one polynomial line.

    Grammar (terms joined by +/-, factors joined by *):
        term    := factor ('*' factor)*
        factor  := number ['i'] | 'i' | '(' complex ')' | variable ['^' int]
        complex := [sign] part [sign part]   with part := number ['i'] | 'i'
    """

    def __init__(self, line: str, lineno: int, names: Sequence[str]):
        self.tokens = _tokenize(line, lineno)
        self.lineno = lineno
        self.names = {name: i for i, name in enumerate(names)}
        self.n = len(names)
        self.pos = 0

    def error(self, message: str, col: int | None = None):
        if col is None:
            col = self.tokens[self.pos - 1][2] if self.tokens else 1
        raise PolyParseError(message, self.lineno, col)

    def peek(self):
        return self.tokens[self.pos] if self.pos < len(self.tokens) else (None, None, None)

    def take(self):
        if self.pos >= len(self.tokens):
            last_col = self.tokens[-1][2] if self.tokens else 1
            self.error("unexpected end of line", col=last_col)
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def parse(self) -> Poly:
        terms: dict[Exponent, complex] = {}
        first = True
        while True:
            kind, val, col = self.peek()
            if kind is None:
                if first:
                    self.error("empty polynomial", col=1)
                break
            sign = 1.0
            if kind == "op" and val in "+-":
                sign = -1.0 if val == "-" else 1.0
                self.take()
            elif not first:
                self.error(f"expected '+' or '-' before {val!r}", col)
            coeff, alpha = self.parse_term()
            coeff *= sign
            alpha = tuple(alpha)
            terms[alpha] = terms.get(alpha, 0.0) + coeff
            first = False
        return Poly(self.n, terms)

    def parse_term(self):
        coeff, alpha = self.parse_factor()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val == "*":
                self.take()
                c2, a2 = self.parse_factor()
                coeff *= c2
                alpha = [x + y for x, y in zip(alpha, a2)]
            else:
                return coeff, alpha

    def parse_factor(self):
        kind, val, col = self.peek()
        if kind is None:
            self.error("expected a coefficient or variable", col=1)
        alpha = [0] * self.n
        if kind == "number":
            self.take()
            coeff = self.maybe_imag(float(val))
            return coeff, alpha
        if kind == "name" and val == "i":
            self.take()
            return 1j, alpha
        if kind == "name":
            self.take()
            if val not in self.names:
                self.error(f"unknown variable {val!r}", col)
            exp = 1
            k2, v2, _ = self.peek()
            if k2 == "op" and v2 == "^":
                self.take()
                k3, v3, c3 = self.take()
                if k3 != "number" or not v3.isdigit():
                    self.error("exponent must be a nonnegative integer", c3)
                exp = int(v3)
            alpha[self.names[val]] = exp
            return 1.0 + 0j, alpha
        if kind == "op" and val == "(":
            self.take()
            coeff = self.parse_complex()
            k2, v2, c2 = self.take()
            if k2 != "op" or v2 != ")":
                self.error("expected ')'", c2)
            return coeff, alpha
        self.error(f"unexpected token {val!r}", col)

    def maybe_imag(self, value: float) -> complex:
        kind, val, _ = self.peek()
        if kind == "name" and val == "i":
            self.take()
            return value * 1j
        return complex(value)

    def parse_complex(self) -> complex:
        total = 0j
        first = True
        while True:
            kind, val, col = self.peek()
            if kind == "op" and val == ")":
                if first:
                    self.error("empty parentheses", col)
                return total
            sign = 1.0
            if kind == "op" and val in "+-":
                sign = -1.0 if val == "-" else 1.0
                self.take()
                kind, val, col = self.peek()
            elif not first:
                self.error("expected '+', '-' or ')'", col)
            if kind == "number":
                self.take()
                total += sign * self.maybe_imag(float(val))
            elif kind == "name" and val == "i":
                self.take()
                total += sign * 1j
            else:
                self.error("expected a number inside parentheses", col)
            first = False


def parse_poly(text: str, variable_names: Sequence[str], lineno: int = 1) -> Poly:
    """Parse one polynomial from its text form."""
    if "i" in variable_names:
        raise ValueError("'i' is reserved for the imaginary unit")
    return _LineParser(text, lineno, variable_names).parse()


def parse_system(text: str, variable_names: Sequence[str]) -> PolySystem:
    """Parse a system, one polynomial per line; blank lines are skipped."""
    polys = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if line.strip():
            polys.append(parse_poly(line, variable_names, lineno))
    if not polys:
        raise PolyParseError("no polynomials found", 1, 1)
    return PolySystem(polys)


def system_to_string(system: PolySystem, variable_names: Sequence[str] | None = None) -> str:
    return system.to_string(variable_names)


def load_system_json(path) -> tuple[PolySystem, list[str]]:
    """Load ``{"vars": [...], "polys": ["...", ...]}`` from a JSON file."""
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    try:
        names = list(data["vars"])
        lines = list(data["polys"])
    except (KeyError, TypeError) as exc:
        raise ValueError(f"{path}: expected keys 'vars' and 'polys'") from exc
    return parse_system("\n".join(lines), names), names


# ---------------------------------------------------------------------------
# Calculus on systems
# ---------------------------------------------------------------------------


def eval_system(system: PolySystem, x: Sequence[complex]) -> np.ndarray:
    """Vector f(x)."""
    return system.eval(x)


def jacobian(system: PolySystem, x: Sequence[complex]) -> np.ndarray:
    """Jacobian Df(x), exact from the sparse terms."""
    return system.jacobian(x)


def dir_hessian(system: PolySystem, x: Sequence[complex], v: Sequence[complex]) -> np.ndarray:
    """Hessian tensor contracted with ``v``: the matrix with entries
    sum_k d^2 f_i / dx_j dx_k (x) * v_k.

    Computed by contracting the gradient with ``v`` symbolically and
    differentiating once more, so the full third-order tensor is never built.
    """
    x = system._check_point(x)
    v = np.asarray(v, dtype=complex).reshape(-1)
    if v.shape != (system.num_vars,):
        raise ValueError("direction length does not match the number of variables")
    jac = system.jacobian_polys()
    contracted = []
    for row in jac:
        g = Poly.zero(system.num_vars)
        for vk, p in zip(v, row):
            if vk != 0 and not p.is_zero():
                g = g + p * vk
        contracted.append(g)
    return PolySystem(contracted).jacobian(x)


def normalized_partial(p: Poly, alpha: Sequence[int], xi: Sequence[complex]) -> complex:
    """Factorial-normalized partial derivative of ``p`` of multi-order
    ``alpha`` at ``xi`` (the Taylor coefficient of ``(X - xi)^alpha``)."""
    alpha = tuple(int(a) for a in alpha)
    if len(alpha) != p.num_vars:
        raise ValueError("multi-index length does not match the number of variables")
    xi = np.asarray(xi, dtype=complex).reshape(-1)
    if xi.shape != (p.num_vars,):
        raise ValueError("point length does not match the number of variables")
    total = 0j
    for beta in sorted(p.terms, key=grlex_key):
        if any(b < a for a, b in zip(alpha, beta)):
            continue
        c = p.terms[beta]
        for a, b, z in zip(alpha, beta, xi):
            c *= math.comb(b, a)
            if b > a:
                c *= z ** (b - a)
        total += c
    return total


def apply_functional(functional, p: Poly, xi: Sequence[complex]) -> complex:
    """Apply a differential functional (anything with a ``terms`` multi-index
    map, or a plain dict) to ``p`` at the point ``xi``."""
    terms = getattr(functional, "terms", functional)
    nv = getattr(functional, "num_vars", None)
    if nv is not None and nv != p.num_vars:
        raise ValueError("functional and polynomial disagree on num_vars")
    total = 0j
    for alpha in sorted(terms, key=grlex_key):
        total += terms[alpha] * normalized_partial(p, alpha, xi)
    return total


def compose_affine(system: PolySystem, a: np.ndarray, b: Sequence[complex]) -> PolySystem:
    """The system ``X -> f(A (X - b))``, expanded to canonical sparse form.

    If 0 is a zero of ``f`` then ``b`` is a zero of the result, with the same
    local structure whenever ``A`` is invertible.
    """
    n = system.num_vars
    a = np.asarray(a, dtype=complex)
    if a.shape != (n, n):
        raise ValueError(f"matrix has shape {a.shape}, expected ({n}, {n})")
    b = np.asarray(b, dtype=complex).reshape(-1)
    if b.shape != (n,):
        raise ValueError("offset length does not match the number of variables")

    # Row i of A applied to (X - b), as a linear polynomial.
    shift = a @ b
    linear = []
    for i in range(n):
        terms: dict[Exponent, complex] = {}
        for j in range(n):
            if a[i, j] != 0:
                e = [0] * n
                e[j] = 1
                terms[tuple(e)] = a[i, j]
        if shift[i] != 0:
            terms[(0,) * n] = terms.get((0,) * n, 0.0) - shift[i]
        linear.append(Poly(n, terms))

    # Substitute, caching powers of each linear form.
    powers: list[list[Poly]] = [[Poly.constant(n, 1.0), linear[i]] for i in range(n)]

    def power(i: int, k: int) -> Poly:
        while len(powers[i]) <= k:
            powers[i].append(powers[i][-1] * linear[i])
        return powers[i][k]

    out = []
    for p in system.polys:
        q = Poly.zero(n)
        for alpha, c in sorted(p.terms.items(), key=lambda kv: grlex_key(kv[0])):
            term = Poly.constant(n, c)
            for i, e in enumerate(alpha):
                if e:
                    term = term * power(i, e)
            q = q + term
        out.append(q)
    return PolySystem(out)
