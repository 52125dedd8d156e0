"""The circle-invariant radial potential whose shifted symplectic quotient
is empty while the twisted GIT quotient is a point.

The potential is f(z) = r(|z|^2) on the punctured plane with
r(t) = sqrt(1 + (log t)^2).  Closed forms:

    t r''(t) + r'(t) = 1 / (t (1 + (log t)^2)^{3/2})      (Kaehler coefficient / 4)
    mu(z) = -2 t r'(t) = -2 log t / sqrt(1 + (log t)^2)   (moment value, t = |z|^2)

The moment value ranges over the open interval (-2, 2), so the level set
at an integer character weight n with |n| >= 2 is empty even though every
point of the punctured plane is chi-semistable.  Domination of monomials
by e^f fails for |z|^3: the ratio |z|^3 / e^f grows without bound.

Closed-form derivatives are the implementation; finite differences only
ever appear as test oracles.  All scalar functions accept arrays.
"""

from dataclasses import dataclass

import numpy as np

# the moment value 2 log(t) / sqrt(1 + log(t)^2) only exhausts its range
# (-2, 2) to within 1e-3 once |log t| > ~31.6, so the default grid runs
# wider than the quotient-emptiness scan strictly needs
GRID_LO = 1e-14
GRID_HI = 1e14
GRID_POINTS = 10_000
BISECT_LOG_TOL = 1e-12


@dataclass(frozen=True)
class RadialPotential:
    """A radial potential with closed-form first and second derivatives."""

    r: callable
    dr: callable
    d2r: callable


def _r(t):
    logt = np.log(t)
    return np.sqrt(1.0 + logt**2)


def _dr(t):
    logt = np.log(t)
    return logt / (t * np.sqrt(1.0 + logt**2))


def _d2r(t):
    logt = np.log(t)
    u = np.sqrt(1.0 + logt**2)
    return (u ** (-1) * (1.0 - logt) - logt**2 * u ** (-3)) / t**2


DEFAULT_POTENTIAL = RadialPotential(r=_r, dr=_dr, d2r=_d2r)


def log_grid(lo=GRID_LO, hi=GRID_HI, points=GRID_POINTS):
    return np.exp(np.linspace(np.log(lo), np.log(hi), points))


def omega_coefficient(t, potential=DEFAULT_POTENTIAL):
    """Coefficient of dx ^ dy in 2i ddbar f: 4 (t r'' + r')."""
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0.0):
        raise ValueError("radial coordinate t = |z|^2 must be positive")
    return 4.0 * (t * potential.d2r(t) + potential.dr(t))


def moment_value(t, potential=DEFAULT_POTENTIAL):
    """Circle moment map at |z|^2 = t: -2 t r'(t)."""
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0.0):
        raise ValueError("radial coordinate t = |z|^2 must be positive")
    return -2.0 * t * potential.dr(t)


def potential_value(z, potential=DEFAULT_POTENTIAL):
    """f(z) = r(|z|^2)."""
    z = np.asarray(z, dtype=complex)
    return potential.r((z * z.conjugate()).real)


@dataclass(frozen=True)
class EmptinessResult:
    verdict: str            # "empty" | "nonempty"
    witness_t: float | None
    witness_residual: float | None


def emptiness_certificate(n, potential=DEFAULT_POTENTIAL, lo=GRID_LO, hi=GRID_HI,
                          points=GRID_POINTS):
    """Solve 2 t r'(t) = n on a log grid with bisection refinement.

    The reduced level set of the shifted moment map at character weight n
    is {t > 0 : 2 t r'(t) = n}; for the default potential the left side
    fills the open interval (-2, 2), so any |n| >= 2 certifies emptiness.
    """
    if n == 0:
        raise ValueError("level n must be a nonzero integer")
    grid = log_grid(lo, hi, points)
    vals = 2.0 * grid * potential.dr(grid) - float(n)
    sign = np.sign(vals)
    crossings = np.nonzero(sign[:-1] * sign[1:] < 0)[0]
    exact = np.nonzero(vals == 0.0)[0]
    if exact.size:
        t0 = float(grid[exact[0]])
        return EmptinessResult("nonempty", t0, 0.0)
    if crossings.size == 0:
        return EmptinessResult("empty", None, None)
    i = int(crossings[0])
    a, b = np.log(grid[i]), np.log(grid[i + 1])
    fa = vals[i]
    while b - a > BISECT_LOG_TOL:
        mid = 0.5 * (a + b)
        fm = 2.0 * np.exp(mid) * potential.dr(np.exp(mid)) - float(n)
        if fa * fm <= 0.0:
            b = mid
        else:
            a, fa = mid, fm
    t0 = float(np.exp(0.5 * (a + b)))
    return EmptinessResult(
        "nonempty", t0, float(2.0 * t0 * potential.dr(t0) - n)
    )


@dataclass(frozen=True)
class DominationResult:
    verdict: str            # "fails" | "holds-on-sample"
    witness_radius: float | None
    max_ratio: float


def domination_failure(m, potential=DEFAULT_POTENTIAL, lo=GRID_LO, hi=GRID_HI,
                       points=GRID_POINTS):
    """Grid test of |z|^m / e^{f(z)} for the monomial z^m.

    Verdict "fails" needs a radius where the ratio exceeds 1 and is still
    increasing; otherwise "holds-on-sample".  This is a sampled verdict on
    the given grid, nothing more.
    """
    if m < 0:
        raise ValueError("monomial exponent must be nonnegative")
    t = log_grid(lo, hi, points)
    radius = np.sqrt(t)
    log_ratio = m * np.log(radius) - potential.r(t)
    failing = np.nonzero(
        (log_ratio[1:] > 0.0) & (log_ratio[1:] > log_ratio[:-1])
    )[0]
    max_ratio = float(np.exp(log_ratio.max()))
    if failing.size:
        return DominationResult("fails", float(radius[failing[0] + 1]), max_ratio)
    return DominationResult("holds-on-sample", None, max_ratio)


def scan_rows(potential=DEFAULT_POTENTIAL, exponents=(0, 1, 2, 3), lo=GRID_LO,
              hi=GRID_HI, points=GRID_POINTS):
    """Grid rows (t, omega coefficient, moment value, domination ratios)."""
    t = log_grid(lo, hi, points)
    omega = omega_coefficient(t, potential)
    mu = moment_value(t, potential)
    ratios = {
        m: np.exp(m * 0.5 * np.log(t) - potential.r(t)) for m in exponents
    }
    return t, omega, mu, ratios


def export_csv(path, potential=DEFAULT_POTENTIAL, exponents=(0, 1, 2, 3),
               meta=None, lo=GRID_LO, hi=GRID_HI, points=GRID_POINTS):
    t, omega, mu, ratios = scan_rows(potential, exponents, lo, hi, points)
    meta = dict(meta or {})
    meta_str = " ".join(f"{k}={v}" for k, v in sorted(meta.items()))
    header = ["t", "omega_coefficient", "moment_value"]
    header += [f"ratio_deg{m}" for m in exponents]
    lines = [f"# nahmkn counterexample scan {meta_str}".rstrip(), ",".join(header)]
    for i in range(t.shape[0]):
        row = [f"{t[i]:.17g}", f"{omega[i]:.17g}", f"{mu[i]:.17g}"]
        row += [f"{ratios[m][i]:.17g}" for m in exponents]
        lines.append(",".join(row))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
