"""Self-contained property suites for the `selftest` CLI command.

Each check returns (name, ok, detail).  These mirror the core invariants
of the library: T-conorm axioms, CDF identities, special-function
cross-checks, and a finite-difference gradient probe.
"""

import numpy as np

from . import special
from .distributions import DistributionSpec, FAMILIES, SYMMETRIC_FAMILIES
from .experiments import benchmark_tconorms
from .geometry import Camera, Mesh, transform_project
from .gradients import CheckScene, finite_difference_check
from .raster import RenderConfig, hard_render
from .tconorms import tconorm

AXIOM_TOLERANCE = 1e-9


def check_tconorm_axioms(n=10_000, seed=2024):
    rng = np.random.default_rng(seed)
    a = rng.uniform(0.0, 1.0, n)
    b = rng.uniform(0.0, 1.0, n)
    c = rng.uniform(0.0, 1.0, n)
    results = []
    for spec in benchmark_tconorms():
        name = f"axioms[{spec.spec_text()}]"
        assoc = np.max(np.abs(tconorm(spec, a, tconorm(spec, b, c))
                              - tconorm(spec, tconorm(spec, a, b), c)))
        if spec.family == "average":
            ok = assoc > 1e-3
            results.append((name, ok,
                            f"associativity violation {assoc:.3g} (expected)"))
            continue
        comm = np.max(np.abs(tconorm(spec, a, b) - tconorm(spec, b, a)))
        neutral = np.max(np.abs(tconorm(spec, a, np.zeros(n)) - a))
        lo = np.minimum(a, c)
        hi = np.maximum(a, c)
        mono = np.min(tconorm(spec, hi, b) - tconorm(spec, lo, b))
        worst = max(comm, assoc, neutral, max(0.0, -mono))
        results.append((name, worst < AXIOM_TOLERANCE, f"worst {worst:.3g}"))
    return results


def check_distribution_identities(seed=2024):
    rng = np.random.default_rng(seed)
    xs = rng.uniform(-20.0, 20.0, 500)
    results = []
    for family in FAMILIES:
        shape = 0.5 if family == "gamma" else None
        plain = DistributionSpec(family, shape=shape)
        rev = DistributionSpec(family, shape=shape, reversed=True)
        sq = DistributionSpec(family, shape=shape, squares=True)
        worst = max(
            np.max(np.abs(rev.cdf(xs) - (1.0 - plain.cdf(-xs)))),
            np.max(np.abs(sq.cdf(xs) - plain.cdf(np.abs(xs) * xs))))
        grid = plain.cdf(np.linspace(-40.0, 40.0, 1001))
        mono = np.min(np.diff(grid))
        ok = worst < 1e-12 and mono >= -1e-15
        results.append((f"cdf-identities[{family}]", ok,
                        f"worst {worst:.3g}, min-slope {mono:.3g}"))
        if family in SYMMETRIC_FAMILIES:
            sym = np.max(np.abs(plain.cdf(xs) + plain.cdf(-xs) - 1.0))
            results.append((f"cdf-symmetry[{family}]", sym < 1e-12,
                            f"worst {sym:.3g}"))
    gamma1 = DistributionSpec("gamma", shape=1.0)
    expo = DistributionSpec("exponential")
    worst = np.max(np.abs(gamma1.cdf(xs) - expo.cdf(xs)))
    results.append(("gamma(p=1)=exponential", worst < 1e-10, f"worst {worst:.3g}"))
    return results


def check_special_functions():
    tolerances = special.SpecialFunctionTolerances()
    try:
        erf_err, gamma_err = special.verify_tolerances(tolerances)
        ok = True
        detail = f"erf {erf_err:.3g}, gamma {gamma_err:.3g}"
    except Exception as exc:  # NumericError carries the failing bound
        ok = False
        detail = str(exc)
    results = [("special-function tolerances", ok, detail)]
    results.append(("erf(0)=0", special.erf(0.0) == 0.0, ""))
    results.append(("erf(6)~1", abs(special.erf(6.0) - 1.0) < 1e-12, ""))
    return results


def check_gradients(seed=2024):
    rng = np.random.default_rng(seed)
    verts = rng.uniform(-0.8, 0.8, (6, 3))
    mesh = Mesh(verts, np.array([[0, 1, 2], [3, 4, 5]]))
    cam = Camera(15, -10, 4.0, 40, 24, 24)
    target = hard_render(transform_project(mesh, Camera(35, 5, 4.0, 40, 24, 24)),
                         24, 24).values
    results = []
    for d_text, t_text in [("logistic", "probabilistic"),
                           ("gaussian", "einstein"),
                           ("gamma(p=0.5,rev)", "yager(p=2)")]:
        from .distributions import parse_distribution
        from .tconorms import parse_tconorm
        config = RenderConfig(parse_distribution(d_text),
                              parse_tconorm(t_text), 0.5, 24, 24)
        report = finite_difference_check(
            CheckScene(mesh, cam, target, loss="mse"), config, h=1e-5)
        results.append((f"gradcheck[{d_text}|{t_text}]",
                        report.n_checked > 0 and report.max_rel_error < 1e-3,
                        f"max_rel {report.max_rel_error:.3g} "
                        f"({report.n_checked} checked)"))
    return results


def run_all():
    checks = []
    checks += check_tconorm_axioms()
    checks += check_distribution_identities()
    checks += check_special_functions()
    checks += check_gradients()
    return checks
