"""T-conorm families: differentiable generalizations of logical `or`.

A T-conorm is a binary operation on [0,1] that is associative,
commutative, monotone, and has 0 as neutral element.  The rasterizer
folds per-face occlusion probabilities with one of these to obtain pixel
coverage.  ``average`` is included as a baseline; it is *not* a T-conorm
(it fails associativity and the neutral element) and aggregates as the
arithmetic mean.

Formulas (a, b in [0,1], family parameter p):

    max               max(a, b)
    probabilistic     a + b - a*b
    einstein          (a + b) / (1 + a*b)            (= hamacher p=2)
    hamacher          (a + b + (p-2)ab) / (1 + (p-1)ab),   p in (0, inf)
    frank             1 - log_p(1 + (p^(1-a)-1)(p^(1-b)-1)/(p-1)),
                                                     p in (0, inf), p != 1
    yager             min(1, (a^p + b^p)^(1/p)),     p in (0, inf)
    aczel-alsina      1 - exp(-(|ln(1-a)|^p + |ln(1-b)|^p)^(1/p)),
                                                     p in (0, inf)
    dombi             1 / (1 + ((a/(1-a))^p + (b/(1-b))^p)^(-1/p)),
                                                     p in (0, inf)
    schweizer-sklar   1 - ((1-a)^p + (1-b)^p - 1)^(1/p),  p in (-inf, 0)

Values at the boundary of the unit square follow the continuous
extensions required by the axioms (e.g. dombi(0, b) = b,
aczel-alsina(1, b) = 1).  Every result is clamped to [0,1] to absorb
floating-point drift.
"""

import re
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError

TCONORM_FAMILIES = (
    "max",
    "probabilistic",
    "einstein",
    "hamacher",
    "frank",
    "yager",
    "aczel-alsina",
    "dombi",
    "schweizer-sklar",
    "average",
)

_PARAMETRIC = {"hamacher", "frank", "yager", "aczel-alsina", "dombi", "schweizer-sklar"}


@dataclass(frozen=True)
class TConormSpec:
    """A T-conorm family plus its parameter (parametric families only)."""

    family: str
    parameter: float | None = None

    def __post_init__(self):
        fam = self.family
        if fam not in TCONORM_FAMILIES:
            raise ConfigurationError(f"unknown T-conorm family {fam!r}")
        if fam in _PARAMETRIC:
            p = self.parameter
            if p is None or not np.isfinite(p):
                raise ConfigurationError(f"{fam} requires a finite parameter p")
            if fam == "schweizer-sklar":
                if not p < 0:
                    raise ConfigurationError("schweizer-sklar requires p < 0")
            else:
                if not p > 0:
                    raise ConfigurationError(f"{fam} requires p > 0")
                if fam == "frank" and p == 1.0:
                    raise ConfigurationError("frank is singular at p = 1")
        elif self.parameter is not None:
            raise ConfigurationError(f"{fam} takes no parameter")

    @property
    def is_tconorm(self):
        """False only for the `average` baseline."""
        return self.family != "average"

    def spec_text(self):
        if self.parameter is not None:
            return f"{self.family}(p={self.parameter:g})"
        return self.family

    def __str__(self):
        return self.spec_text()


_SPEC_RE = re.compile(r"^\s*([a-z][a-z-]*)\s*(?:\(\s*p\s*=\s*([^)]+)\))?\s*$")


def parse_tconorm(text):
    """Parse a T-conorm spec string, e.g. ``yager(p=2)`` or ``max``."""
    m = _SPEC_RE.match(text.lower())
    if not m:
        raise ConfigurationError(f"cannot parse T-conorm spec {text!r}")
    family, param = m.group(1), m.group(2)
    if param is not None:
        try:
            param = float(param)
        except ValueError as exc:
            raise ConfigurationError(f"bad parameter in {text!r}") from exc
    return TConormSpec(family=family, parameter=param)


def _check_unit(a, b):
    if np.any(a < 0) or np.any(a > 1) or np.any(b < 0) or np.any(b > 1):
        raise ValueError("T-conorm arguments must lie in [0, 1]")


def tconorm(spec, a, b):
    """Apply the binary T-conorm; result clamped to [0,1]."""
    scalar = np.ndim(a) == 0 and np.ndim(b) == 0
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    _check_unit(a, b)
    out = np.clip(_apply(spec, a, b), 0.0, 1.0)
    return float(out[()]) if scalar else out


def _apply(spec, a, b):
    fam, p = spec.family, spec.parameter
    if fam == "max":
        return np.maximum(a, b)
    if fam == "probabilistic":
        return a + b - a * b
    if fam == "einstein":
        return (a + b) / (1.0 + a * b)
    if fam == "hamacher":
        return (a + b + (p - 2.0) * a * b) / (1.0 + (p - 1.0) * a * b)
    if fam == "frank":
        g = 1.0 + (p ** (1.0 - a) - 1.0) * (p ** (1.0 - b) - 1.0) / (p - 1.0)
        return 1.0 - np.log(g) / np.log(p)
    if fam == "yager":
        return np.minimum(1.0, (a ** p + b ** p) ** (1.0 / p))
    if fam == "aczel-alsina":
        sat = (a >= 1.0) | (b >= 1.0)
        with np.errstate(divide="ignore"):
            x = np.abs(np.log(np.where(sat, 0.5, 1.0 - a)))
            y = np.abs(np.log(np.where(sat, 0.5, 1.0 - b)))
        val = -np.expm1(-((x ** p + y ** p) ** (1.0 / p)))
        return np.where(sat, 1.0, val)
    if fam == "dombi":
        a_zero = a <= 0.0
        b_zero = b <= 0.0
        sat = (a >= 1.0) | (b >= 1.0)
        special_case = a_zero | b_zero | sat
        aa = np.where(special_case, 0.5, a)
        bb = np.where(special_case, 0.5, b)
        u = (aa / (1.0 - aa)) ** p + (bb / (1.0 - bb)) ** p
        val = 1.0 / (1.0 + u ** (-1.0 / p))
        val = np.where(sat, 1.0, val)
        val = np.where(a_zero & ~sat, b, val)
        val = np.where(b_zero & ~a_zero & ~sat, a, val)
        return val
    if fam == "schweizer-sklar":
        sat = (a >= 1.0) | (b >= 1.0)
        ca = np.where(sat, 0.5, 1.0 - a)
        cb = np.where(sat, 0.5, 1.0 - b)
        w = ca ** p + cb ** p - 1.0
        return np.where(sat, 1.0, 1.0 - w ** (1.0 / p))
    if fam == "average":
        return 0.5 * (a + b)
    raise AssertionError(fam)


def tconorm_partials(spec, a, b):
    """Partial derivatives (d/da, d/db) of the T-conorm at (a, b).

    At the exact neutral points the continuous-extension limits are used
    (d/db at a == 0 is 1, and symmetrically), so the backward pass of the
    rasterizer never sees a 0/0.  On the Yager plateau the derivative is 0.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    da, db = _partials(spec, a, b)
    # neutral-element limits override any indeterminate forms
    da = np.where(b <= 0.0, 1.0, da)
    db = np.where(a <= 0.0, 1.0, db)
    return da, db


def _partials(spec, a, b):
    fam, p = spec.family, spec.parameter
    with np.errstate(divide="ignore", over="ignore", under="ignore", invalid="ignore"):
        if fam == "max":
            da = (a >= b).astype(np.float64)
            return da, 1.0 - da
        if fam == "probabilistic":
            return 1.0 - b, 1.0 - a
        if fam == "einstein":
            den = (1.0 + a * b) ** 2
            return (1.0 - b * b) / den, (1.0 - a * a) / den
        if fam == "hamacher":
            num = a + b + (p - 2.0) * a * b
            den = 1.0 + (p - 1.0) * a * b
            da = ((1.0 + (p - 2.0) * b) * den - num * (p - 1.0) * b) / den ** 2
            db = ((1.0 + (p - 2.0) * a) * den - num * (p - 1.0) * a) / den ** 2
            return da, db
        if fam == "frank":
            ta = p ** (1.0 - a) - 1.0
            tb = p ** (1.0 - b) - 1.0
            g = 1.0 + ta * tb / (p - 1.0)
            da = (ta + 1.0) * tb / ((p - 1.0) * g)
            db = (tb + 1.0) * ta / ((p - 1.0) * g)
            return da, db
        if fam == "yager":
            u = a ** p + b ** p
            plateau = u >= 1.0
            u_safe = np.where(plateau, 2.0, u)
            scale = u_safe ** (1.0 / p - 1.0)
            da = np.where(plateau, 0.0, scale * a ** (p - 1.0))
            db = np.where(plateau, 0.0, scale * b ** (p - 1.0))
            return da, db
        if fam == "aczel-alsina":
            sat = (a >= 1.0) | (b >= 1.0)
            ca = np.where(sat, 0.5, 1.0 - a)
            cb = np.where(sat, 0.5, 1.0 - b)
            x = np.abs(np.log(ca))
            y = np.abs(np.log(cb))
            s = (x ** p + y ** p) ** (1.0 / p)
            common = np.exp(-s) * s ** (1.0 - p)
            da = np.where(sat, 0.0, common * x ** (p - 1.0) / ca)
            db = np.where(sat, 0.0, common * y ** (p - 1.0) / cb)
            return da, db
        if fam == "dombi":
            edge = (a <= 0.0) | (b <= 0.0) | (a >= 1.0) | (b >= 1.0)
            aa = np.where(edge, 0.5, a)
            bb = np.where(edge, 0.5, b)
            ra = aa / (1.0 - aa)
            rb = bb / (1.0 - bb)
            u = ra ** p + rb ** p
            val = 1.0 / (1.0 + u ** (-1.0 / p))
            common = val * val * u ** (-1.0 / p - 1.0)
            da = common * ra ** (p - 1.0) / (1.0 - aa) ** 2
            db = common * rb ** (p - 1.0) / (1.0 - bb) ** 2
            # a==0: f(0,b)=b -> da is the limit along a (0 for p<1 handled by
            # the neutral override in tconorm_partials); at saturation: 0
            sat = (a >= 1.0) | (b >= 1.0)
            da = np.where(sat, 0.0, da)
            db = np.where(sat, 0.0, db)
            return da, db
        if fam == "schweizer-sklar":
            sat = (a >= 1.0) | (b >= 1.0)
            ca = np.where(sat, 0.5, 1.0 - a)
            cb = np.where(sat, 0.5, 1.0 - b)
            w = ca ** p + cb ** p - 1.0
            scale = w ** (1.0 / p - 1.0)
            da = np.where(sat, 0.0, scale * ca ** (p - 1.0))
            db = np.where(sat, 0.0, scale * cb ** (p - 1.0))
            return da, db
        if fam == "average":
            half = np.full(np.broadcast_shapes(a.shape, b.shape), 0.5)
            return half, half
    raise AssertionError(fam)


def tconorm_branch(spec, a, b):
    """Integer branch codes for kink detection (max argmax, yager plateau).

    Smooth families return zeros.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if spec.family == "max":
        return (a >= b).astype(np.int8)
    if spec.family == "yager":
        return (a ** spec.parameter + b ** spec.parameter >= 1.0).astype(np.int8)
    return np.zeros(np.broadcast_shapes(a.shape, b.shape), dtype=np.int8)


def aggregate(spec, values):
    """Fold the T-conorm over a sequence in ascending index order.

    The empty sequence yields the neutral element 0.  ``average`` returns
    the arithmetic mean instead of a fold.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 1:
        raise ValueError("aggregate expects a 1-D sequence")
    if values.size == 0:
        return 0.0
    if np.any(values < 0) or np.any(values > 1):
        raise ValueError("aggregate values must lie in [0, 1]")
    if spec.family == "average":
        return float(np.mean(values))
    acc = 0.0
    for v in values:
        acc = tconorm(spec, acc, float(v))
    return float(acc)


def tnorm_dual(spec, a, b):
    """De Morgan dual: t_norm(a, b) = 1 - tconorm(1-a, 1-b)."""
    scalar = np.ndim(a) == 0 and np.ndim(b) == 0
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    _check_unit(a, b)
    out = 1.0 - np.asarray(tconorm(spec, 1.0 - a, 1.0 - b))
    out = np.clip(out, 0.0, 1.0)
    return float(out[()]) if scalar else out
