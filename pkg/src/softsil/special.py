"""Special functions implemented in-repo: erf/erfc, log-gamma, and the
regularized lower incomplete gamma function.

No external special-function library is used.  The implementations follow
the classic numeric recipes:

* ``erf`` uses the non-alternating Maclaurin series
  erf(x) = 2/sqrt(pi) * exp(-x^2) * sum_n x^(2n+1) * 2^n / (2n+1)!!
  for |x| <= 2 (all terms positive, no cancellation) and the DLMF 7.9.1
  continued fraction for erfc elsewhere.
* ``lgamma`` is a Lanczos approximation (g = 7, 9 coefficients),
  accurate to ~1e-14 relative for positive arguments.
* ``lower_incomplete_gamma`` uses the power series for x < p + 1 and a
  modified-Lentz continued fraction for x >= p + 1.

Documented accuracy (verified by the test suite against independent
oracles): |erf error| <= 1e-12 absolute on [-6, 6]; incomplete gamma
relative error <= 1e-11 for p in [0.05, 100], x in [0, 1e3].

All functions accept scalars or numpy arrays and vectorize elementwise.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, NumericError


@dataclass(frozen=True)
class SpecialFunctionTolerances:
    """Accuracy contract for the special functions implemented here."""

    erf_abs_tol: float = 1e-10
    lower_incomplete_gamma_rel_tol: float = 1e-10

    def __post_init__(self):
        if not (self.erf_abs_tol <= 1e-10
                and self.lower_incomplete_gamma_rel_tol <= 1e-10):
            raise ConfigurationError(
                "special-function tolerances must be at most 1e-10")

_SQRT_PI = 1.7724538509055160273
_SQRT2 = 1.4142135623730950488

_LANCZOS_G = 7.0
_LANCZOS_COEFFS = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)


def _promote(x):
    arr = np.asarray(x, dtype=np.float64)
    return arr, arr.ndim == 0


def _demote(out, scalar):
    return float(out[()]) if scalar else out


def lgamma(p):
    """Natural log of the gamma function for p > 0 (Lanczos, ~1e-14 rel)."""
    p, scalar = _promote(p)
    if np.any(p <= 0):
        raise ValueError("lgamma requires p > 0")
    acc = np.full_like(p, _LANCZOS_COEFFS[0])
    for k in range(1, 9):
        acc = acc + _LANCZOS_COEFFS[k] / (p - 1.0 + k)
    t = p - 0.5 + _LANCZOS_G
    out = 0.5 * np.log(2.0 * np.pi) + (p - 0.5) * np.log(t) - t + np.log(acc)
    return _demote(out, scalar)


def _erf_series(x):
    # Positive-term series, valid (and fast) for |x| <= 2.
    x2 = x * x
    term = np.array(x, copy=True)
    total = np.array(x, copy=True)
    for n in range(1, 64):
        term = term * (2.0 * x2 / (2.0 * n + 1.0))
        total = total + term
    return (2.0 / _SQRT_PI) * np.exp(-x2) * total


def _erfc_cf(x):
    # DLMF 7.9.1: sqrt(pi) e^{x^2} erfc(x) = x/(x^2 + 1/2/(1 + 1/(x^2 + 3/2/(1 + ...))))
    # evaluated by modified Lentz.  Requires x >= 2 for fast convergence.
    tiny = 1e-300
    b = x * x
    f = np.maximum(b, tiny)
    c = np.array(f, copy=True)
    d = np.zeros_like(x)
    for n in range(1, 96):
        a = 0.5 * n
        b_n = 1.0 if n % 2 else x * x
        d = b_n + a * d
        d = np.where(np.abs(d) < tiny, tiny, d)
        c = b_n + a / c
        c = np.where(np.abs(c) < tiny, tiny, c)
        d = 1.0 / d
        f = f * (c * d)
    return x / f * np.exp(-x * x) / _SQRT_PI


def erf(x):
    """Error function, |error| <= ~1e-13 absolute over the real line."""
    x, scalar = _promote(x)
    ax = np.abs(x)
    small = ax <= 2.0
    # Evaluate both branches on safe inputs, then select.
    series = _erf_series(np.where(small, x, 0.0))
    with np.errstate(over="ignore", under="ignore"):
        tail = 1.0 - _erfc_cf(np.where(small, 2.0, ax))
    out = np.where(small, series, np.sign(x) * tail)
    return _demote(out, scalar)


def erfc(x):
    """Complementary error function; relatively accurate for large x."""
    x, scalar = _promote(x)
    ax = np.abs(x)
    small = ax <= 2.0
    series = 1.0 - _erf_series(np.where(small, x, 0.0))
    with np.errstate(over="ignore", under="ignore"):
        tail = _erfc_cf(np.where(small, 2.0, ax))
    out = np.where(small, series, np.where(x > 0, tail, 2.0 - tail))
    return _demote(out, scalar)


def normal_cdf(x):
    """CDF of the standard normal distribution."""
    x, scalar = _promote(x)
    out = 0.5 * erfc(-np.asarray(x) / _SQRT2)
    return _demote(np.asarray(out), scalar)


def _gamma_series(p, x, max_iter, tol):
    # P(p, x) = x^p e^-x / Gamma(p) * sum_n x^n / (p (p+1) ... (p+n)),  x < p+1
    term = 1.0 / p
    total = np.array(term, copy=True)
    denom = np.array(p, copy=True)
    converged = np.zeros(np.shape(x), dtype=bool)
    for _ in range(max_iter):
        denom = denom + 1.0
        term = term * (x / denom)
        total = total + term
        converged |= np.abs(term) < np.abs(total) * tol
        if np.all(converged):
            break
    if not np.all(converged):
        raise NumericError("incomplete gamma series did not converge")
    with np.errstate(divide="ignore"):
        logx = np.where(x > 0, np.log(np.where(x > 0, x, 1.0)), -np.inf)
    prefac = np.exp(p * logx - x - lgamma(p))
    return np.where(x > 0, prefac * total, 0.0)


def _gamma_cf(p, x, max_iter, tol):
    # Q(p, x) via Lentz continued fraction; valid for x >= p+1.
    tiny = 1e-300
    b = x + 1.0 - p
    c = np.full_like(b, 1e300)
    d = 1.0 / np.maximum(np.abs(b), tiny) * np.sign(np.where(b == 0, 1.0, b))
    h = np.array(d, copy=True)
    converged = np.zeros(np.shape(b), dtype=bool)
    for i in range(1, max_iter + 1):
        an = -i * (i - p)
        b = b + 2.0
        d = an * d + b
        d = np.where(np.abs(d) < tiny, tiny, d)
        c = b + an / c
        c = np.where(np.abs(c) < tiny, tiny, c)
        d = 1.0 / d
        delta = d * c
        h = h * delta
        converged |= np.abs(delta - 1.0) < tol
        if np.all(converged):
            break
    if not np.all(converged):
        raise NumericError("incomplete gamma continued fraction did not converge")
    prefac = np.exp(p * np.log(x) - x - lgamma(p))
    return prefac * h


def lower_incomplete_gamma(p, x, *, regularized=True, max_iter=512, tol=1e-16):
    """Regularized lower incomplete gamma P(p, x) = gamma(p, x) / Gamma(p).

    Parameters
    ----------
    p : positive real (scalar or array)
    x : nonnegative real (scalar or array, broadcast against p)
    regularized : if False, return gamma(p, x) = P(p, x) * Gamma(p)

    Raises
    ------
    NumericError if the series/continued fraction fails to converge
    within ``max_iter`` iterations.
    """
    p_arr, p_scalar = _promote(p)
    x_arr, x_scalar = _promote(x)
    scalar = p_scalar and x_scalar
    p_arr, x_arr = np.broadcast_arrays(p_arr, x_arr)
    p_arr = np.array(p_arr, dtype=np.float64)
    x_arr = np.array(x_arr, dtype=np.float64)
    if np.any(p_arr <= 0):
        raise ValueError("shape parameter p must be positive")
    if np.any(x_arr < 0):
        raise ValueError("x must be nonnegative")

    use_series = x_arr < p_arr + 1.0
    # Substitute in-range dummies so both branches evaluate cleanly.
    xs = np.where(use_series, x_arr, 0.0)
    xc = np.where(use_series, p_arr + 2.0, x_arr)
    series = _gamma_series(p_arr, xs, max_iter, tol)
    q = _gamma_cf(p_arr, xc, max_iter, tol)
    out = np.where(use_series, series, 1.0 - q)
    out = np.clip(out, 0.0, 1.0)
    if not regularized:
        out = out * np.exp(lgamma(p_arr))
    return _demote(out, scalar)


def verify_tolerances(tolerances=SpecialFunctionTolerances(), n=200, seed=0):
    """Spot-check erf and P(p, x) against exact reference values.

    The references use identities with independent code paths: the
    regularized half-integer incomplete gamma against erf, and the
    exponential closed form P(1, x) = 1 - e^-x.  Returns the worst
    (erf_abs_err, gamma_rel_err) pair and raises NumericError when a
    tolerance is exceeded.
    """
    rng = np.random.default_rng(seed)
    xs = rng.uniform(0.0, 9.0, n)
    gamma_half = lower_incomplete_gamma(0.5, xs)
    erf_vals = erf(np.sqrt(xs))
    erf_err = float(np.max(np.abs(gamma_half - erf_vals)))
    p1 = lower_incomplete_gamma(1.0, xs)
    closed = -np.expm1(-xs)
    gamma_err = float(np.max(np.abs(p1 - closed)
                             / np.maximum(closed, 1e-300)))
    if erf_err > tolerances.erf_abs_tol:
        raise NumericError(f"erf identity error {erf_err:.3g} exceeds "
                           f"{tolerances.erf_abs_tol:.1e}")
    if gamma_err > tolerances.lower_incomplete_gamma_rel_tol:
        raise NumericError(f"incomplete gamma error {gamma_err:.3g} exceeds "
                           f"{tolerances.lower_incomplete_gamma_rel_tol:.1e}")
    return erf_err, gamma_err
