"""Cross-identity verification suite tying the chart, moment, and potential
operations together.

Each check compares two independently computed sides of an identity on
seeded random data and reports the worst residual against its pinned
threshold.  The suite backs the ``verify-identities`` CLI command and the
acceptance tests.
"""

from dataclasses import dataclass

import numpy as np

from . import estimates, liecore, modulimap, nahmflow


@dataclass(frozen=True)
class IdentityRow:
    name: str
    residual: float
    threshold: float

    @property
    def passed(self):
        return self.residual < self.threshold


def _sample_point(rng, max_norm=1.0, step=1.0 / 256.0, n=2):
    k = liecore.random_unitary(rng, n)
    x = estimates.sample_domain_triple(rng, max_norm=max_norm, step=step, n=n)
    return modulimap.ModuliPoint(k=k, x=x)


def complex_moment_suite(rng, n_samples, step, n=2):
    worst = 0.0
    for _ in range(n_samples):
        point = _sample_point(rng, n=n)
        worst = max(worst, modulimap.complex_moment_residual(point, step))
    return IdentityRow("complex moment vs canonical pair map", worst, 1e-7)


def potential_moment_suite(rng, n_samples, step, n=2):
    worst = 0.0
    for _ in range(n_samples):
        point = _sample_point(rng, max_norm=0.5, n=n)
        z = (liecore.random_algebra(rng, n, norm=1.0),
             liecore.random_algebra(rng, n, norm=1.0))
        worst = max(worst, modulimap.potential_moment_residual(point, z, step))
    return IdentityRow("moment pairing vs potential derivative", worst, 1e-4)


def origin_derivative_suite(rng, n_samples, step, n=2):
    origin = modulimap.ModuliPoint(
        k=np.eye(n, dtype=complex), x=np.zeros((3, n, n), dtype=complex)
    )
    worst = 0.0
    for _ in range(n_samples):
        v = np.stack([liecore.random_algebra(rng, n, norm=1.0) for _ in range(4)])
        dg, dy = modulimap.moduli_to_cotangent_derivative(origin, v, step)
        worst = max(
            worst,
            liecore.frob(dg - (v[0] + 1j * v[1])),
            liecore.frob(dy - (v[2] + 1j * v[3])),
        )
    return IdentityRow("chart derivative at the origin", worst, 1e-6)


def scaling_law_suite(rng, n_samples, base_steps=256, n=2):
    """P^{sX}(t) = s P^X(st), compared on exactly aligned grids."""
    worst = 0.0
    ratios = (320, 512, 640, 1024, 2560)
    for _ in range(n_samples):
        x = estimates.sample_domain_triple(rng, max_norm=1.0, n=n)
        sol_x = {}
        for n_b in ratios:
            s = base_steps / n_b
            scaled = nahmflow.integrate_reduced(s * x, 1.0 / base_steps)
            if n_b not in sol_x:
                sol_x[n_b] = nahmflow.integrate_reduced(x, 1.0 / n_b)
            base = sol_x[n_b]
            m = scaled.values.shape[0]
            diff = scaled.values - s * base.values[:m]
            worst = max(worst, float(np.abs(diff).max()))
    return IdentityRow("reduced-flow scaling law", worst, 1e-7)


def potential_invariance_suite(rng, n_samples, step, n=2):
    worst = 0.0
    for _ in range(n_samples):
        x = estimates.sample_domain_triple(rng, max_norm=1.0, n=n)
        a = liecore.random_unitary(rng, n)
        rho = modulimap.kahler_potential(x, step)
        rho_ad = modulimap.kahler_potential(liecore.adjoint3(a, x), step)
        worst = max(worst, abs(rho - rho_ad))
    return IdentityRow("potential conjugation invariance", worst, 1e-9)


def chart_equivariance_suite(rng, n_samples, step, n=2):
    worst = 0.0
    for _ in range(n_samples):
        point = _sample_point(rng, n=n)
        k1 = liecore.random_unitary(rng, n)
        k2 = liecore.random_unitary(rng, n)
        q = modulimap.moduli_to_cotangent(point, step)
        moved = modulimap.ModuliPoint(
            k=k1 @ point.k @ k2.conj().T, x=liecore.adjoint3(k1, point.x)
        )
        q_moved = modulimap.moduli_to_cotangent(moved, step)
        worst = max(
            worst,
            liecore.frob(q_moved.g - k1 @ q.g @ k2.conj().T),
            liecore.frob(q_moved.y - liecore.adjoint(k1, q.y)),
        )
    return IdentityRow("chart two-sided equivariance", worst, 1e-8)


def run_identity_suite(n_samples=100, seed=42, step=1.0 / 1024.0, n=2):
    """All identity checks; sample counts scale off n_samples."""
    rng = np.random.default_rng(seed)
    rows = [
        complex_moment_suite(rng, n_samples, step, n),
        potential_moment_suite(rng, max(1, min(25, n_samples // 4)), step, n),
        origin_derivative_suite(rng, max(4, n_samples // 10), step, n),
        scaling_law_suite(rng, max(2, n_samples // 20), n=n),
        potential_invariance_suite(rng, max(4, n_samples // 10), step, n),
        chart_equivariance_suite(rng, max(4, n_samples // 10), step, n),
    ]
    return rows


def rows_to_json(rows):
    return [
        {"check": r.name, "residual": r.residual, "threshold": r.threshold,
         "pass": r.passed}
        for r in rows
    ]
