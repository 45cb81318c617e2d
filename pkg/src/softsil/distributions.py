"""Smoothing-distribution zoo: CDFs used as soft occlusion tests.

A pixel is softly occluded by a face with probability ``cdf(d / tau)``
where ``d`` is the signed pixel-to-boundary distance and ``tau`` the
temperature.  Each family is defined by its closed-form CDF; the PDF is
its derivative.  Two variant transforms compose on top of any family:

* ``squares``  -- evaluate the base CDF at ``|x| * x`` (square-root
  perturbation counterpart).
* ``reversed`` -- mirror an asymmetric distribution:
  ``cdf_rev(x) = 1 - cdf(-x)``.  A no-op for symmetric families.

An optional location ``shift`` is applied to the argument before both
transforms are considered, i.e. the final CDF is evaluated at
``x - shift``.

Spec strings are round-trippable through :func:`parse_distribution` /
``DistributionSpec.spec_text``, e.g. ``gamma(p=0.5,rev,sq)`` or
``logistic``.
"""

import re
from dataclasses import dataclass

import numpy as np

from . import special
from .errors import ConfigurationError

_TWO_OVER_PI = 0.63661977236758134308
_HALF_PI = 1.5707963267948966192
_INV_SQRT_2PI = 0.39894228040143267794

FAMILIES = (
    "heaviside",
    "uniform",
    "cubic-hermite",
    "wigner-semicircle",
    "gaussian",
    "laplace",
    "logistic",
    "hyperbolic-secant",
    "cauchy",
    "reciprocal",
    "gumbel-max",
    "gumbel-min",
    "exponential",
    "levy",
    "gamma",
)

# Families whose CDF satisfies F(x) + F(-x) = 1; reversal is the identity.
SYMMETRIC_FAMILIES = frozenset({
    "uniform", "cubic-hermite", "wigner-semicircle", "gaussian", "laplace",
    "logistic", "hyperbolic-secant", "cauchy", "reciprocal",
})

# Support contained in [0, inf): CDF is exactly 0 for x <= 0.
ONE_SIDED_FAMILIES = frozenset({"exponential", "levy", "gamma"})

# Support contained in [-1, 1] (or a point, for heaviside).
FINITE_SUPPORT_FAMILIES = frozenset({
    "heaviside", "uniform", "cubic-hermite", "wigner-semicircle",
})

# Density decays at least exponentially on both tails.
EXPONENTIAL_DECAY_FAMILIES = frozenset({
    "gaussian", "laplace", "logistic", "hyperbolic-secant",
    "gumbel-max", "gumbel-min",
})


# --------------------------------------------------------------------------
# Base CDFs / PDFs.  Each takes (x, shape) with shape ignored except gamma.
# PDFs return the right-hand derivative at piece boundaries.
# --------------------------------------------------------------------------

def _cdf_heaviside(x, _p):
    return np.where(x < 0.0, 0.0, 1.0)


def _pdf_heaviside(x, _p):
    return np.zeros_like(x)


def _cdf_uniform(x, _p):
    return np.clip(0.5 * (1.0 + x), 0.0, 1.0)


def _pdf_uniform(x, _p):
    return np.where((x >= -1.0) & (x < 1.0), 0.5, 0.0)


def _cdf_cubic_hermite(x, _p):
    y = 0.5 * (np.clip(x, -1.0, 1.0) + 1.0)
    return y * y * (3.0 - 2.0 * y)


def _pdf_cubic_hermite(x, _p):
    y = 0.5 * (x + 1.0)
    inside = (x >= -1.0) & (x < 1.0)
    return np.where(inside, 3.0 * y * (1.0 - y), 0.0)


def _cdf_wigner(x, _p):
    xc = np.clip(x, -1.0, 1.0)
    return 0.5 + (xc * np.sqrt(1.0 - xc * xc) + np.arcsin(xc)) / np.pi


def _pdf_wigner(x, _p):
    inside = (x >= -1.0) & (x <= 1.0)
    xc = np.clip(x, -1.0, 1.0)
    return np.where(inside, 2.0 * np.sqrt(1.0 - xc * xc) / np.pi, 0.0)


def _cdf_gaussian(x, _p):
    return 0.5 * special.erfc(-x / np.sqrt(2.0))


def _pdf_gaussian(x, _p):
    return _INV_SQRT_2PI * np.exp(-0.5 * x * x)


def _cdf_laplace(x, _p):
    return np.where(x <= 0.0, 0.5 * np.exp(np.minimum(x, 0.0)),
                    1.0 - 0.5 * np.exp(-np.maximum(x, 0.0)))


def _pdf_laplace(x, _p):
    return 0.5 * np.exp(-np.abs(x))


def _cdf_logistic(x, _p):
    with np.errstate(over="ignore"):
        pos = 1.0 / (1.0 + np.exp(-np.maximum(x, 0.0)))
        ex = np.exp(np.minimum(x, 0.0))
        neg = ex / (1.0 + ex)
    return np.where(x >= 0.0, pos, neg)


def _pdf_logistic(x, _p):
    ex = np.exp(-np.abs(x))
    return ex / (1.0 + ex) ** 2


def _cdf_hyperbolic_secant(x, _p):
    with np.errstate(over="ignore"):
        return _TWO_OVER_PI * np.arctan(np.exp(_HALF_PI * x))


def _pdf_hyperbolic_secant(x, _p):
    # (1/2) sech(pi x / 2), written overflow-safe
    ex = np.exp(-_HALF_PI * np.abs(x))
    return ex / (1.0 + ex * ex)


def _cdf_cauchy(x, _p):
    return np.arctan(x) / np.pi + 0.5


def _pdf_cauchy(x, _p):
    return 1.0 / (np.pi * (1.0 + x * x))


def _cdf_reciprocal(x, _p):
    return x / (2.0 + 2.0 * np.abs(x)) + 0.5


def _pdf_reciprocal(x, _p):
    return 0.5 / (1.0 + np.abs(x)) ** 2


def _cdf_gumbel_max(x, _p):
    with np.errstate(over="ignore", under="ignore"):
        return np.exp(-np.exp(-x))


def _pdf_gumbel_max(x, _p):
    with np.errstate(under="ignore"):
        t = np.exp(-np.maximum(x, -700.0))
        return t * np.exp(-t)


def _cdf_gumbel_min(x, _p):
    # CDF of the minimum extreme-value distribution; equals the reversed
    # gumbel-max: 1 - exp(-exp(x)).
    with np.errstate(over="ignore", under="ignore"):
        return -np.expm1(-np.exp(np.minimum(x, 700.0)))


def _pdf_gumbel_min(x, _p):
    with np.errstate(under="ignore"):
        t = np.exp(np.minimum(x, 700.0))
        return t * np.exp(-t)


def _cdf_exponential(x, _p):
    return np.where(x > 0.0, -np.expm1(-np.maximum(x, 0.0)), 0.0)


def _pdf_exponential(x, _p):
    return np.where(x >= 0.0, np.exp(-np.maximum(x, 0.0)), 0.0)


def _cdf_levy(x, _p):
    # erfc(1 / sqrt(2 x)) for x > 0 (scale 1), 0 otherwise.
    xs = np.where(x > 0.0, x, 1.0)
    val = special.erfc(1.0 / np.sqrt(2.0 * xs))
    return np.where(x > 0.0, val, 0.0)


def _pdf_levy(x, _p):
    xs = np.where(x > 0.0, x, 1.0)
    val = _INV_SQRT_2PI * np.exp(-0.5 / xs) * xs ** -1.5
    return np.where(x > 0.0, val, 0.0)


def _cdf_gamma(x, p):
    xs = np.where(x > 0.0, x, 0.0)
    return np.where(x > 0.0, special.lower_incomplete_gamma(p, xs), 0.0)


def _pdf_gamma(x, p):
    xs = np.where(x > 0.0, x, 1.0)
    with np.errstate(over="ignore", under="ignore", divide="ignore"):
        logpdf = (p - 1.0) * np.log(xs) - xs - special.lgamma(p)
        val = np.exp(logpdf)
    return np.where(x > 0.0, val, 0.0)


_CDF = {
    "heaviside": _cdf_heaviside,
    "uniform": _cdf_uniform,
    "cubic-hermite": _cdf_cubic_hermite,
    "wigner-semicircle": _cdf_wigner,
    "gaussian": _cdf_gaussian,
    "laplace": _cdf_laplace,
    "logistic": _cdf_logistic,
    "hyperbolic-secant": _cdf_hyperbolic_secant,
    "cauchy": _cdf_cauchy,
    "reciprocal": _cdf_reciprocal,
    "gumbel-max": _cdf_gumbel_max,
    "gumbel-min": _cdf_gumbel_min,
    "exponential": _cdf_exponential,
    "levy": _cdf_levy,
    "gamma": _cdf_gamma,
}

_PDF = {
    "heaviside": _pdf_heaviside,
    "uniform": _pdf_uniform,
    "cubic-hermite": _pdf_cubic_hermite,
    "wigner-semicircle": _pdf_wigner,
    "gaussian": _pdf_gaussian,
    "laplace": _pdf_laplace,
    "logistic": _pdf_logistic,
    "hyperbolic-secant": _pdf_hyperbolic_secant,
    "cauchy": _pdf_cauchy,
    "reciprocal": _pdf_reciprocal,
    "gumbel-max": _pdf_gumbel_max,
    "gumbel-min": _pdf_gumbel_min,
    "exponential": _pdf_exponential,
    "levy": _pdf_levy,
    "gamma": _pdf_gamma,
}

# Piece classifiers.  Pieces index the maximal intervals on which the CDF
# is smooth; a parameter whose perturbation moves any evaluation point
# across a piece boundary sits on the documented kink set.
_PIECEWISE_EDGES = {
    "heaviside": (0.0,),
    "uniform": (-1.0, 1.0),
    "cubic-hermite": (-1.0, 1.0),
    "wigner-semicircle": (-1.0, 1.0),
    "laplace": (0.0,),
    "exponential": (0.0,),
    "levy": (0.0,),
    "gamma": (0.0,),
}


def _piece_index(family, x):
    edges = _PIECEWISE_EDGES.get(family)
    if edges is None:
        return np.zeros(np.shape(x), dtype=np.int8)
    out = np.zeros(np.shape(x), dtype=np.int8)
    for e in edges:
        out = out + (np.asarray(x) >= e).astype(np.int8)
    return out


@dataclass(frozen=True)
class DistributionSpec:
    """One concrete smoothing distribution: family + variant flags.

    ``shape`` is the gamma shape parameter and must be present exactly for
    the gamma family.  ``shift`` translates the distribution; it defaults
    to 0 and is mostly useful for the one-sided families.
    """

    family: str
    squares: bool = False
    reversed: bool = False
    shape: float | None = None
    shift: float = 0.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigurationError(f"unknown distribution family {self.family!r}")
        if self.family == "gamma":
            if self.shape is None or not (self.shape > 0):
                raise ConfigurationError("gamma requires a positive shape parameter p")
        elif self.shape is not None:
            raise ConfigurationError(f"{self.family} takes no shape parameter")
        if not np.isfinite(self.shift):
            raise ConfigurationError("shift must be finite")

    # -- evaluation ---------------------------------------------------

    def _arg(self, x):
        y = np.asarray(x, dtype=np.float64) - self.shift
        if self.reversed:
            y = -y
        if self.squares:
            y = np.abs(y) * y
        return y

    def cdf(self, x):
        """CDF value in [0, 1] with all variant transforms applied."""
        scalar = np.ndim(x) == 0
        y = np.atleast_1d(self._arg(x))
        out = np.asarray(_CDF[self.family](y, self.shape))
        if self.reversed:
            out = 1.0 - out
        return float(out[0]) if scalar else out.reshape(np.shape(x))

    def pdf(self, x):
        """Derivative of :meth:`cdf`; right-hand derivative at kinks."""
        scalar = np.ndim(x) == 0
        y = np.atleast_1d(self._arg(x))
        out = np.asarray(_PDF[self.family](y, self.shape))
        if self.squares:
            # chain rule through |y|*y; y here is already squared, so recover
            # the pre-square argument
            z = np.atleast_1d(np.asarray(x, dtype=np.float64)) - self.shift
            if self.reversed:
                z = -z
            out = out * 2.0 * np.abs(z)
        return float(out[0]) if scalar else out.reshape(np.shape(x))

    def piece(self, x):
        """Smoothness-piece index at x (kink-set detection helper)."""
        return _piece_index(self.family, self._arg(x))

    # -- metadata -----------------------------------------------------

    @property
    def differentiable(self):
        return self.family != "heaviside"

    @property
    def symmetric(self):
        return self.family in SYMMETRIC_FAMILIES and self.shift == 0.0

    @property
    def exponential_decay(self):
        return self.family in EXPONENTIAL_DECAY_FAMILIES

    def spec_text(self):
        """Canonical round-trippable text form."""
        args = []
        if self.shape is not None:
            args.append(f"p={self.shape:g}")
        if self.shift != 0.0:
            args.append(f"shift={self.shift:g}")
        if self.reversed:
            args.append("rev")
        if self.squares:
            args.append("sq")
        return self.family + (f"({','.join(args)})" if args else "")

    def __str__(self):
        return self.spec_text()


_SPEC_RE = re.compile(r"^\s*([a-z][a-z0-9-]*)\s*(?:\(([^)]*)\))?\s*$")


def parse_distribution(text):
    """Parse a distribution spec string, e.g. ``gamma(p=0.5,rev,sq)``.

    Raises ConfigurationError on malformed input.
    """
    m = _SPEC_RE.match(text.lower())
    if not m:
        raise ConfigurationError(f"cannot parse distribution spec {text!r}")
    family, arglist = m.group(1), m.group(2)
    squares = False
    rev = False
    shape = None
    shift = 0.0
    if arglist:
        for tok in arglist.split(","):
            tok = tok.strip()
            if not tok:
                continue
            if tok == "sq":
                squares = True
            elif tok == "rev":
                rev = True
            elif tok.startswith("p="):
                try:
                    shape = float(tok[2:])
                except ValueError as exc:
                    raise ConfigurationError(f"bad shape parameter in {text!r}") from exc
            elif tok.startswith("shift="):
                try:
                    shift = float(tok[6:])
                except ValueError as exc:
                    raise ConfigurationError(f"bad shift in {text!r}") from exc
            else:
                raise ConfigurationError(f"unknown distribution flag {tok!r} in {text!r}")
    return DistributionSpec(family=family, squares=squares, reversed=rev,
                            shape=shape, shift=shift)


def cdf(spec, x):
    """Functional form of ``spec.cdf(x)``."""
    return spec.cdf(x)


def pdf(spec, x):
    """Functional form of ``spec.pdf(x)``."""
    return spec.pdf(x)


def cull_cutoff(spec, threshold=1e-6, search_limit=1e9):
    """Largest argument c <= search_limit such that cdf(x) < threshold for
    all x < c.  Used by the rasterizer to skip far-away pixels.

    Returns -search_limit when even the far end of the search window has
    mass above the threshold (effectively: never cull).
    """
    lo = -float(search_limit)
    hi = float(search_limit)
    if spec.cdf(lo) >= threshold:
        return lo
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if spec.cdf(mid) < threshold:
            lo = mid
        else:
            hi = mid
    return lo
