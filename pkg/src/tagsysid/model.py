"""Polynomial NARMAX model structures, with optional sin/cos/abs wrapped terms.

A model is

    y_k = sum_i c_i * w_i( prod_f x_f[k - lag_f] ** exp_f ) + e_k

where each factor ``x_f`` is the input ``u``, the output ``y`` or the noise
``e``, and ``w_i`` is the identity, sin, cos or abs. Structures come either
from grammar yields (:func:`parse_model`) or from printed equations
(:func:`parse_equation`).
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from ._kernels import SOURCE_CODES, WRAPPER_CODES, recurse
from .exceptions import Divergence, LagOutOfRange, ParseError

__all__ = [
    "Factor",
    "Term",
    "ModelStructure",
    "FittedModel",
    "parse_model",
    "parse_equation",
    "parse_terms",
    "format_equation",
    "regressor_row",
    "regressor_matrix",
    "predict_one_step",
    "simulate",
    "DIVERGENCE_FACTOR",
]

DIVERGENCE_FACTOR = 1e6
WRAPPERS = ("sin", "cos", "abs")
_MIN_LAG = {"u": 0, "y": 1, "e": 1}
_PRETTY_SOURCE = {"u": "u", "y": "y", "e": "ξ"}


@dataclass(frozen=True)
class Factor:
    source: str  # "u", "y" or "e" (noise)
    lag: int
    exponent: int = 1

    def __post_init__(self):
        if self.source not in _MIN_LAG:
            raise ValueError(f"unknown factor source {self.source!r}")
        if self.lag < _MIN_LAG[self.source]:
            raise ValueError(f"{self.source} factors need lag >= {_MIN_LAG[self.source]}")
        if self.exponent < 1:
            raise ValueError("exponent must be positive")

    def __str__(self):
        lag = "k" if self.lag == 0 else f"k-{self.lag}"
        s = f"{_PRETTY_SOURCE[self.source]}_{{{lag}}}"
        return s if self.exponent == 1 else f"{s}^{self.exponent}"


@dataclass(frozen=True)
class Term:
    wrapper: str = "none"
    factors: tuple = ()

    def __post_init__(self):
        if self.wrapper not in WRAPPER_CODES:
            raise ValueError(f"unknown wrapper {self.wrapper!r}")
        if self.wrapper != "none" and any(f.source == "e" for f in self.factors):
            raise ValueError("noise factors cannot appear inside a wrapped term")

    @property
    def has_noise(self) -> bool:
        return any(f.source == "e" for f in self.factors)

    @property
    def max_lag(self) -> int:
        return max((f.lag for f in self.factors), default=0)

    def __str__(self):
        body = "*".join(str(f) for f in self.factors) or "1"
        return body if self.wrapper == "none" else f"{self.wrapper}({body})"


@dataclass(frozen=True)
class ModelStructure:
    terms: tuple

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        if not self.terms:
            raise ValueError("a model needs at least one term")

    @property
    def p(self) -> int:
        """Number of terms, which is also the number of coefficients."""
        return len(self.terms)

    complexity = p

    @cached_property
    def max_lag(self) -> int:
        return max(t.max_lag for t in self.terms)

    @cached_property
    def has_noise(self) -> bool:
        return any(t.has_noise for t in self.terms)

    @cached_property
    def noise_free_terms(self) -> tuple:
        """Indices of terms without noise factors."""
        return tuple(i for i, t in enumerate(self.terms) if not t.has_noise)

    @cached_property
    def compiled(self):
        wrap = np.array([WRAPPER_CODES[t.wrapper] for t in self.terms], dtype=np.int64)
        fptr = np.zeros(self.p + 1, dtype=np.int64)
        src, lag, exp = [], [], []
        for i, t in enumerate(self.terms):
            for f in t.factors:
                src.append(SOURCE_CODES[f.source])
                lag.append(f.lag)
                exp.append(f.exponent)
            fptr[i + 1] = len(src)
        as_int = lambda v: np.array(v, dtype=np.int64)  # noqa: E731
        return wrap, fptr, as_int(src), as_int(lag), as_int(exp)

    def __str__(self):
        return " + ".join(str(t) for t in self.terms)


@dataclass(eq=False)
class FittedModel:
    structure: ModelStructure
    coefficients: np.ndarray
    noise_variance: float = 0.0
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        self.coefficients = np.asarray(self.coefficients, dtype=float).reshape(-1)
        if self.coefficients.shape[0] != self.structure.p:
            raise ValueError(
                f"{self.structure.p} terms but {self.coefficients.shape[0]} coefficients"
            )
        if not np.all(np.isfinite(self.coefficients)):
            raise ValueError("coefficients must be finite")
        if self.noise_variance < 0:
            raise ValueError("noise variance must be non-negative")

    @property
    def complexity(self) -> int:
        return self.structure.p

    def equation(self, precision: int | None = None) -> str:
        return format_equation(self.structure, self.coefficients, precision)

    def __str__(self):
        return self.equation(precision=6)


# -- parsing -----------------------------------------------------------------------

def parse_model(tokens) -> ModelStructure:
    """Turn a grammar yield into a model structure.

    Token grammar::

        model  := term ("+" term)*
        term   := WRAP "(" mono ")" | mono
        mono   := unit ("*" unit)*
        unit   := "1" | SRC "k" "q"* "^"*

    with ``SRC`` in {u, y, e} and ``WRAP`` in {sin, cos, abs}. Each ``q``
    delays by one sample and each ``^`` raises the exponent by one.
    Repeated factors in a term merge by adding exponents; repeated terms are
    kept as separate terms.
    """
    toks = list(tokens)
    pos = 0

    def peek():
        return toks[pos] if pos < len(toks) else None

    def expect(tok):
        nonlocal pos
        if peek() != tok:
            raise ParseError(f"expected {tok!r}, found {peek()!r}", pos)
        pos += 1

    def unit():
        nonlocal pos
        tok = peek()
        if tok == "1":
            pos += 1
            return None
        if tok not in _MIN_LAG:
            raise ParseError(f"expected a factor, found {tok!r}", pos)
        start = pos
        pos += 1
        expect("k")
        lag = exp = 0
        while peek() == "q":
            lag += 1
            pos += 1
        while peek() == "^":
            exp += 1
            pos += 1
        if lag < _MIN_LAG[tok]:
            raise ParseError(f"{tok} factor needs lag >= {_MIN_LAG[tok]}", start)
        return Factor(tok, lag, exp + 1)

    def mono():
        nonlocal pos
        merged: dict[tuple, int] = {}
        f = unit()
        while True:
            if f is not None:
                key = (f.source, f.lag)
                merged[key] = merged.get(key, 0) + f.exponent
            if peek() != "*":
                break
            pos += 1
            f = unit()
        return tuple(Factor(s, lag, e) for (s, lag), e in merged.items())

    def term():
        nonlocal pos
        tok = peek()
        if tok in WRAPPERS:
            start = pos
            pos += 1
            expect("(")
            factors = mono()
            expect(")")
            if any(f.source == "e" for f in factors):
                raise ParseError("noise factor inside a wrapped term", start)
            return Term(tok, factors)
        return Term("none", mono())

    if not toks:
        raise ParseError("empty token sequence", 0)
    terms = [term()]
    while peek() == "+":
        pos += 1
        terms.append(term())
    if pos != len(toks):
        raise ParseError(f"unexpected token {toks[pos]!r}", pos)
    return ModelStructure(tuple(terms))


_EQ_TOKEN = re.compile(
    r"""\s*(?:
        (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)
      | (?P<var>(?:u|y|e|xi|ξ)_(?:k|\{k(?:-(?P<lag>\d+))?\}))
      | (?P<wrap>sin|cos|abs)
      | (?P<op>[-+*^()=])
    )""",
    re.VERBOSE,
)


def _lex_equation(text: str):
    out, pos = [], 0
    text = text.strip()
    while pos < len(text):
        m = _EQ_TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ParseError(f"cannot read {text[pos:pos + 12]!r}", pos)
        pos = m.end()
        if m.group("num"):
            out.append(("num", m.group("num")))
        elif m.group("var"):
            name = m.group("var").split("_")[0]
            src = "e" if name in ("xi", "ξ") else name
            out.append(("var", (src, int(m.group("lag") or 0))))
        elif m.group("wrap"):
            out.append(("wrap", m.group("wrap")))
        else:
            out.append(("op", m.group("op")))
    return out


def parse_equation(text: str) -> tuple[ModelStructure, np.ndarray]:
    """Parse an equation in the :func:`format_equation` style.

    Returns the structure and its coefficients. The innovation ``ξ_k`` may
    be written as the last term and is dropped.

    >>> s, c = parse_equation("y_k = 0.5 y_{k-1} - 2 u_{k-1}*y_{k-2}^2 + ξ_k")
    >>> str(s), c.tolist()
    ('y_{k-1} + u_{k-1}*y_{k-2}^2', [0.5, -2.0])
    """
    toks = _lex_equation(text)
    pos = 0

    def peek(i=0):
        return toks[pos + i] if pos + i < len(toks) else (None, None)

    def take(kind, value=None):
        nonlocal pos
        k, v = peek()
        if k != kind or (value is not None and v != value):
            raise ParseError(f"expected {value or kind}, found {v!r}", pos)
        pos += 1
        return v

    lhs = take("var")
    if lhs != ("y", 0):
        raise ParseError("left-hand side must be y_k", 0)
    take("op", "=")

    def factor():
        nonlocal pos
        k, v = peek()
        if k == "num" and v == "1":
            pos += 1
            return None
        src, lag = take("var")
        exp = 1
        if peek() == ("op", "^"):
            pos += 1
            exp = int(float(take("num")))
        try:
            return Factor(src, lag, exp)
        except ValueError as exc:
            raise ParseError(str(exc), pos) from None

    def regressor():
        nonlocal pos
        wrapper = "none"
        if peek()[0] == "wrap":
            wrapper = take("wrap")
            take("op", "(")
        merged: dict[tuple, int] = {}
        while True:
            f = factor()
            if f is not None:
                merged[(f.source, f.lag)] = merged.get((f.source, f.lag), 0) + f.exponent
            if peek() != ("op", "*"):
                break
            pos += 1
        if wrapper != "none":
            take("op", ")")
        try:
            return Term(wrapper, tuple(Factor(s, lag, e) for (s, lag), e in merged.items()))
        except ValueError as exc:
            raise ParseError(str(exc), pos) from None

    terms, coefs = [], []
    while pos < len(toks):
        sign = 1.0
        k, v = peek()
        if k == "op" and v in "+-":
            sign = -1.0 if v == "-" else 1.0
            pos += 1
        elif terms:
            raise ParseError(f"expected '+' or '-', found {v!r}", pos)
        if peek() == ("var", ("e", 0)):
            pos += 1
            if pos != len(toks):
                raise ParseError("the innovation ξ_k must be the last term", pos)
            break
        coef = sign * float(take("num"))
        if peek() == ("op", "*"):
            pos += 1
        if peek()[0] in ("var", "wrap") or peek() == ("num", "1") and peek(1)[1] in (None, "+", "-", "*"):
            if peek() == ("num", "1"):
                pos += 1
                term = Term("none", ())
            else:
                term = regressor()
        else:
            term = Term("none", ())
        terms.append(term)
        coefs.append(coef)
    if not terms:
        raise ParseError("equation has no terms", pos)
    return ModelStructure(tuple(terms)), np.array(coefs)


def format_equation(structure: ModelStructure, coefficients, precision: int | None = None) -> str:
    """Render ``y_k = c_1 r_1 + ... + ξ_k``.

    ``precision=None`` prints every coefficient with round-trip precision so
    the text reproduces the model exactly.
    """
    parts = []
    for i, (term, c) in enumerate(zip(structure.terms, coefficients)):
        c = float(c)
        mag = repr(abs(c)) if precision is None else f"{abs(c):.{precision}g}"
        sign = "-" if c < 0 or (c == 0 and np.signbit(c)) else "+"
        body = "" if (term.wrapper == "none" and not term.factors) else f" {term}"
        if i == 0:
            parts.append(("-" if sign == "-" else "") + mag + body)
        else:
            parts.append(f"{sign} {mag}{body}")
    return "y_k = " + " ".join(parts) + " + ξ_k"


# -- evaluation ----------------------------------------------------------------------

def _arrays(data):
    u = np.ascontiguousarray(data.u, dtype=float)
    y = np.ascontiguousarray(data.y, dtype=float)
    return u, y


def regressor_row(m: ModelStructure, data, residuals, k: int) -> np.ndarray:
    """Regressor vector of ``m`` at sample ``k`` (0-based)."""
    u, y = _arrays(data)
    e = np.zeros_like(y) if residuals is None else np.asarray(residuals, dtype=float)
    if k < m.max_lag or k >= len(y):
        raise LagOutOfRange(f"sample {k} is outside [{m.max_lag}, {len(y)})")
    sources = {"u": u, "y": y, "e": e}
    row = np.empty(m.p)
    for i, term in enumerate(m.terms):
        v = 1.0
        for f in term.factors:
            v *= sources[f.source][k - f.lag] ** f.exponent
        if term.wrapper == "sin":
            v = np.sin(v)
        elif term.wrapper == "cos":
            v = np.cos(v)
        elif term.wrapper == "abs":
            v = abs(v)
        row[i] = v
    return row


def regressor_matrix(m: ModelStructure, u, y, e=None, start: int | None = None, columns=None) -> np.ndarray:
    """Stack regressor rows for samples ``start .. N-1``.

    ``columns`` restricts the output to a subset of term indices.
    """
    u = np.asarray(u, dtype=float)
    y = np.asarray(y, dtype=float)
    n = len(y)
    start = m.max_lag if start is None else start
    if start < m.max_lag:
        raise LagOutOfRange(f"first row {start} precedes the maximum lag {m.max_lag}")
    sources = {"u": u, "y": y, "e": np.zeros(n) if e is None else np.asarray(e, dtype=float)}
    idx = range(m.p) if columns is None else columns
    out = np.ones((max(n - start, 0), len(idx)))
    for j, i in enumerate(idx):
        term = m.terms[i]
        col = out[:, j]
        for f in term.factors:
            col *= sources[f.source][start - f.lag:n - f.lag] ** f.exponent
        if term.wrapper == "sin":
            np.sin(col, out=col)
        elif term.wrapper == "cos":
            np.cos(col, out=col)
        elif term.wrapper == "abs":
            np.abs(col, out=col)
    return out


def _run(structure, coef, u, y, mode, innovations=None):
    wrap, fptr, fsrc, flag, fexp = structure.compiled
    n = len(u)
    start = min(structure.max_lag, n)
    out = np.full(n, np.nan)
    res = np.zeros(n)
    innov = np.zeros(n) if innovations is None else np.ascontiguousarray(innovations, dtype=float)
    coef = np.ascontiguousarray(coef, dtype=float)
    if mode == "predict":
        ybuf, ebuf, limit = y, res, np.inf
    elif mode == "simulate":
        out[:start] = y[:start]
        ybuf, ebuf = out, np.zeros(n)
        scale = np.max(np.abs(y)) if n else 0.0
        limit = DIVERGENCE_FACTOR * scale if scale > 0 else DIVERGENCE_FACTOR
    else:  # generate
        out[:start] = innov[:start]
        ybuf, ebuf, limit = out, innov, np.inf
    bad = recurse(ybuf, ebuf, u, y, innov, coef, wrap, fptr, fsrc, flag, fexp, start, out, res, limit)
    return out, res, bad


def predict_one_step(fm: FittedModel, data) -> np.ndarray:
    """One-step-ahead predictions conditioned on measured outputs.

    Noise regressors use the recursively computed prediction residuals, zero
    before the first predictable sample. Samples ``k < max_lag`` cannot be
    predicted and are returned as NaN.
    """
    u, y = _arrays(data)
    out, _, _ = _run(fm.structure, fm.coefficients, u, y, "predict")
    return out


def prediction_errors(fm: FittedModel, data) -> np.ndarray:
    """Residuals ``y_k - yhat_{k|k-1}``; zero for ``k < max_lag``."""
    u, y = _arrays(data)
    _, res, _ = _run(fm.structure, fm.coefficients, u, y, "predict")
    return res


def simulate(fm: FittedModel, data) -> np.ndarray:
    """Free-run simulation with noise factors held at zero.

    The first ``max_lag`` measured outputs serve as initial conditions and
    are copied into the result. Raises :class:`Divergence` if the output
    becomes non-finite or exceeds ``DIVERGENCE_FACTOR * max|y|``.
    """
    u, y = _arrays(data)
    out, _, bad = _run(fm.structure, fm.coefficients, u, y, "simulate")
    if bad >= 0:
        raise Divergence(f"simulation diverged at sample {bad}", index=bad)
    return out


def generate(structure: ModelStructure, coefficients, u, innovations) -> np.ndarray:
    """Drive the model with input ``u`` and a given innovation sequence.

    Pre-sample values are zero, so the first ``max_lag`` outputs equal the
    innovations.
    """
    u = np.ascontiguousarray(u, dtype=float)
    out, _, _ = _run(structure, coefficients, u, np.zeros_like(u), "generate", innovations)
    if not np.all(np.isfinite(out)):
        raise Divergence("generated output is not finite")
    return out


def parse_terms(text: str) -> ModelStructure:
    """Structure from a ``+``-separated list of regressors, without coefficients.

    >>> str(parse_terms("y_{k-1} + sin(u_{k-2}) + 1"))
    'y_{k-1} + sin(u_{k-2}) + 1'
    """
    pieces = [p.strip() for p in text.split("+")]
    if not all(pieces):
        raise ParseError("empty regressor in term list")
    terms = []
    for piece in pieces:
        s, _ = parse_equation(f"y_k = 1 {piece}" if piece != "1" else "y_k = 1")
        if s.p != 1:
            raise ParseError(f"cannot read regressor {piece!r}")
        terms.append(s.terms[0])
    return ModelStructure(tuple(terms))
