"""Sampled verification of the growth, properness, and domination estimates.

Constants are computed, never fitted: at rank 2 with the trace-form
normalization the norm-equivalence constant is c1 = 1, every special
unitary is exp(Y) with |Y| <= sqrt(2) pi (eigenangle pairs +-theta,
theta <= pi), and the growth bound reads

    |chart(k, X)|^2 < b exp(c sqrt(rho(X))),
    b = 2 exp(2 r n^2),  c = 2 sqrt(2) n^2 c1,  r = sqrt(2) pi.

Each chart trajectory additionally carries its own differential
inequality: |g(t)|^2 <= |g(0)|^2 exp(2 n^2 int_0^t (r + |P1|) ds)
(checked at even nodes with prefix Simpson sums, 1e-6 relative slack)
and the quadrature step int_0^1 |P1| <= sqrt(2) c1 sqrt(rho) (1e-9
absolute slack).

Reports are deterministic given the seed recorded in their header.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from . import kernels, liecore, modulimap, nahmflow

RANK = 2
C1 = 1.0
LOG_RADIUS = np.sqrt(2.0) * np.pi
GROWTH_B = 2.0 * np.exp(2.0 * LOG_RADIUS * RANK**2)
GROWTH_C = 2.0 * np.sqrt(2.0) * RANK**2 * C1
CORE_RADIUS = 0.1


@dataclass
class EstimateReport:
    """Sampled inequality report: one row per sample plus a summary."""

    name: str
    seed: int
    constants: dict
    samples: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)

    def add(self, desc, lhs, rhs, ok, **extra):
        row = {"desc": desc, "lhs": float(lhs), "rhs": float(rhs), "pass": bool(ok)}
        row.update({k: (float(v) if isinstance(v, (int, float, np.floating)) else v)
                    for k, v in extra.items()})
        self.samples.append(row)

    @property
    def failures(self):
        return [s for s in self.samples if not s["pass"]]

    def all_pass(self):
        return not self.failures

    def finalize(self, **extra):
        ratios = [s["lhs"] / s["rhs"] for s in self.samples if s["rhs"] != 0.0]
        self.summary = {
            "samples": len(self.samples),
            "failures": len(self.failures),
            "max_ratio": max(ratios) if ratios else 0.0,
        }
        self.summary.update(extra)
        return self

    def to_json(self):
        return {
            "report": self.name,
            "seed": self.seed,
            "constants": self.constants,
            "summary": self.summary,
            "samples": self.samples,
        }

    def write_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=1, sort_keys=True)
            fh.write("\n")

    def write_csv(self, path):
        cols = []
        for s in self.samples:
            for k in s:
                if k not in cols:
                    cols.append(k)
        lines = [f"# nahmkn report={self.name} seed={self.seed}", ",".join(cols)]
        for s in self.samples:
            row = []
            for k in cols:
                v = s.get(k, "")
                row.append(f"{v:.17g}" if isinstance(v, float) else str(v))
            lines.append(",".join(row))
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")


def su2_ray_triple(scale, conjugator=None):
    """The closed-form family Ad_a(s T): complete for every s > 0."""
    x = scale * liecore.su2_basis()
    if conjugator is not None:
        x = liecore.adjoint3(conjugator, x)
    return x


def sample_domain_triple(rng, max_norm=1.2, min_norm=None, step=1.0 / 256.0, n=2):
    """Rejection-sample an algebra triple inside the flow domain."""
    lo = CORE_RADIUS if min_norm is None else min_norm
    for _ in range(500):
        x = liecore.random_triple(rng, n, norm=rng.uniform(lo, max_norm))
        sol = nahmflow.integrate_reduced(x, step)
        if sol.status == nahmflow.COMPLETE:
            return x
    raise RuntimeError("rejection sampling failed to find a domain point")


def _prefix_simpson(vals, h):
    """Simpson integrals over [0, t_{2j}] for all even nodes."""
    pair = (vals[0:-2:2] + 4.0 * vals[1:-1:2] + vals[2::2]) * h / 3.0
    out = np.zeros(pair.shape[0] + 1)
    out[1:] = np.cumsum(pair)
    return out


def _trajectory_checks(p_traj, g_traj, step, rho):
    """Per-trajectory differential inequality and quadrature step.

    Returns (gronwall_slack, holder_slack), both negative when the
    inequalities hold strictly.
    """
    n = g_traj.shape[1]
    p1_abs = np.sqrt(np.einsum("kij,kij->k", p_traj[:, 0], p_traj[:, 0].conj()).real)
    g_sq = np.einsum("kij,kij->k", g_traj, g_traj.conj()).real
    ints = _prefix_simpson(LOG_RADIUS + p1_abs, step)
    rhs = g_sq[0] * np.exp(2.0 * n**2 * ints)
    lhs = g_sq[::2]
    gronwall_slack = float(((lhs - rhs) / np.maximum(rhs, 1.0)).max())
    p1_int = float(kernels.simpson_uniform(p1_abs, step))
    holder_slack = p1_int - np.sqrt(2.0) * C1 * np.sqrt(rho)
    return gronwall_slack, holder_slack


def _rho_from_traj(p_traj, step):
    n2 = np.einsum("kaij,kaij->ka", p_traj, p_traj.conj()).real
    integrand = 0.25 * (2.0 * n2[:, 0] + n2[:, 1] + n2[:, 2])
    return float(kernels.simpson_uniform(np.ascontiguousarray(integrand), step))


def growth_bound_scan(points, step=1.0 / 512.0, seed=0):
    """Check |chart|^2 < b e^{c sqrt(rho)} outside the declared core.

    ``points`` is an iterable of ModuliPoint; each sample also runs its
    per-trajectory differential-inequality and quadrature checks.
    """
    report = EstimateReport(
        name="growth-bound",
        seed=seed,
        constants={"n": RANK, "c1": C1, "r": LOG_RADIUS, "b": GROWTH_B,
                   "c": GROWTH_C, "core_radius": CORE_RADIUS},
    )
    for idx, point in enumerate(points):
        grid, p_traj, g_traj, _ = modulimap.chart_trajectory(point, step)
        rho = _rho_from_traj(p_traj, step)
        x_norm = liecore.norm3(point.x)
        psi_sq = liecore.frob(g_traj[-1]) ** 2 \
            + liecore.frob(point.x[1] + 1j * point.x[2]) ** 2
        rhs = GROWTH_B * np.exp(GROWTH_C * np.sqrt(rho))
        in_core = x_norm <= CORE_RADIUS
        gron, hold = _trajectory_checks(p_traj, g_traj, step, rho)
        ok = (psi_sq < rhs or in_core) and gron <= 1e-6 and hold <= 1e-9
        report.add(
            f"sample{idx}", psi_sq, rhs, ok,
            rho=rho, x_norm=x_norm, in_core=str(in_core),
            gronwall_slack=gron, holder_slack=hold,
        )
    return report.finalize()


def sample_moduli_points(rng, count, max_norm=1.2, step=1.0 / 256.0):
    out = []
    for _ in range(count):
        k = liecore.random_unitary(rng, 2)
        x = sample_domain_triple(rng, max_norm=max_norm, step=step)
        out.append(modulimap.ModuliPoint(k=k, x=x))
    return out


def properness_scan(radii, samples_per_radius=24, seed=0, step=1.0 / 256.0,
                    max_rejects=120):
    """Minimum of rho over spheres of growing radius in the flow domain.

    Directions are rejection-sampled on each sphere; when a radius
    exhausts its rejection budget the remaining draws mix the direction
    toward the closed-form complete ray until the point falls inside
    (flagged in the sample row).  Fits beta as max |X| / rho(X) over
    samples with |X| >= 1.
    """
    rng = np.random.default_rng(seed)
    report = EstimateReport(
        name="properness",
        seed=seed,
        constants={"samples_per_radius": samples_per_radius},
    )
    ray = liecore.su2_basis()
    ray = ray / liecore.norm3(ray)
    min_rhos = []
    beta = 0.0
    for radius in radii:
        rhos = []
        found = 0
        rejects = 0
        while found < samples_per_radius and rejects < max_rejects:
            # the first sample on each sphere is the closed-form complete
            # ray itself, so every radius carries at least one domain point
            x = radius * ray if found == 0 else \
                liecore.random_triple(rng, 2, norm=radius)
            mixed = 0.0
            sol = nahmflow.integrate_reduced(x, step)
            while sol.status != nahmflow.COMPLETE and mixed < 1.0:
                rejects += 1
                mixed = min(mixed + 0.25, 1.0)
                direction = (1.0 - mixed) * x / radius + mixed * liecore.adjoint3(
                    liecore.random_unitary(rng, 2), ray
                )
                x = radius * direction / liecore.norm3(direction)
                sol = nahmflow.integrate_reduced(x, step)
            if sol.status != nahmflow.COMPLETE:
                continue
            rho = _rho_from_traj(sol.values, step)
            rhos.append(rho)
            if radius >= 1.0 and rho > 0.0:
                beta = max(beta, radius / rho)
            report.add(
                f"r={radius:g}#{found}", rho, radius, True,
                radius=float(radius), mixed=mixed,
            )
            found += 1
        if not rhos:
            report.add(f"r={radius:g}", 0.0, radius, False,
                       radius=float(radius), note="no domain point found")
            min_rhos.append(None)
            continue
        min_rhos.append(min(rhos))
    seen = [m for m in min_rhos if m is not None]
    monotone = all(seen[i] <= seen[i + 1] + 1e-12 for i in range(len(seen) - 1))
    return report.finalize(
        min_rho_by_radius=[(-1.0 if m is None else m) for m in min_rhos],
        beta_fit=beta,
        min_rho_monotone=monotone,
    )


def entry_monomial(name, *factors):
    """Monomial in matrix entries of (g, Y): factors are (slot, i, j, power)."""

    def u(g, y):
        val = 1.0 + 0.0j
        for slot, i, j, power in factors:
            base = g[i, j] if slot == "g" else y[i, j]
            val *= base**power
        return val

    degree = sum(f[3] for f in factors)
    return name, degree, u


def trace_power(name, power):
    def u(g, y):
        return np.trace(g @ y) ** power

    return name, power * 2, u


def default_polynomials():
    """Ten monomial-type observables of degree <= 6 on the cotangent side."""
    return [
        entry_monomial("one"),
        entry_monomial("g00", ("g", 0, 0, 1)),
        entry_monomial("g01^2", ("g", 0, 1, 2)),
        entry_monomial("g00^3", ("g", 0, 0, 3)),
        entry_monomial("Y00", ("Y", 0, 0, 1)),
        entry_monomial("Y01^3", ("Y", 0, 1, 3)),
        entry_monomial("Y10^6", ("Y", 1, 0, 6)),
        entry_monomial("g00^2*Y11^2", ("g", 0, 0, 2), ("Y", 1, 1, 2)),
        entry_monomial("g11*Y00^4", ("g", 1, 1, 1), ("Y", 0, 0, 4)),
        trace_power("tr(gY)^3", 3),
    ]


def domination_scan(polynomials=None, scales=None, samples_per_scale=6,
                    n_windows=6, seed=0, step=1.0 / 512.0):
    """max |u(chart point)| / e^rho over growing potential windows.

    Samples ride conjugates of the closed-form ray family (complete for
    every scale, so the potential can be pushed far up); windows split
    the observed rho range evenly and the top three must be strictly
    decreasing for every polynomial.
    """
    if polynomials is None:
        polynomials = default_polynomials()
    if scales is None:
        scales = np.geomspace(2.0, 90.0, 12)
    rng = np.random.default_rng(seed)
    report = EstimateReport(
        name="domination",
        seed=seed,
        constants={"n_windows": n_windows, "step": step},
    )
    rows = []
    for s in scales:
        for _ in range(samples_per_scale):
            a = liecore.random_unitary(rng, 2)
            k = liecore.random_unitary(rng, 2)
            point = modulimap.ModuliPoint(k=k, x=su2_ray_triple(s, a))
            grid, p_traj, g_traj, _ = modulimap.chart_trajectory(point, step)
            rho = _rho_from_traj(p_traj, step)
            g1 = g_traj[-1]
            y = point.x[1] + 1j * point.x[2]
            rows.append((rho, g1, y))
    rhos = np.array([r[0] for r in rows])
    edges = np.linspace(rhos.min(), rhos.max() * (1 + 1e-12), n_windows + 1)
    decreasing = {}
    for name, degree, u in polynomials:
        window_max = []
        for w in range(n_windows):
            sel = [r for r in rows if edges[w] <= r[0] < edges[w + 1]]
            if not sel:
                window_max.append(None)
                continue
            ratios = [abs(u(g1, y)) * np.exp(-rho) for rho, g1, y in sel]
            window_max.append(max(ratios))
        filled = [(w, m) for w, m in enumerate(window_max) if m is not None]
        if len(filled) < 3:
            report.add(name, 0.0, 0.0, False, note="insufficient windows")
            decreasing[name] = False
            continue
        top3 = [m for _, m in filled[-3:]]
        ok = top3[0] > top3[1] > top3[2]
        decreasing[name] = ok
        for w, m in filled:
            report.add(
                f"{name}@w{w}", m, 1.0, True, window=w, degree=degree,
            )
        report.add(f"{name}:top3", top3[-1], top3[0], ok, degree=degree)
    return report.finalize(decreasing={k: bool(v) for k, v in decreasing.items()})
