"""Flows of the Nahm system on [0, 1]: reduced form, gauge fixing, domain tests.

The reduced system evolves a triple P = (P1, P2, P3) of compact algebra
elements by P'_a = -[P_b, P_c] (cyclic).  The full system adds a
prescribed connection component A0: A'_a = -[A0, A_a] - [A_b, A_c].
Gauge fixing transports a full solution to temporal gauge (A0 = 0) by
solving k' = k A0 with k(0) = 1.

Grids are uniform with step 1/N for an even integer N (even so that the
same grid feeds composite Simpson quadrature downstream); steps are
restricted to (0, 1/16].  Blow-up is declared the first time the triple
norm exceeds ``blowup_threshold`` and the reported time is the last
accepted node.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels, liecore

DEFAULT_STEP = 1.0 / 1024.0
MEMBERSHIP_STEP = 1.0 / 64.0
BLOWUP_THRESHOLD = 1.0e6
STEP_MAX = 1.0 / 16.0

COMPLETE = "complete"
BLOWUP = "blowup"

INSIDE = "inside"
OUTSIDE = "outside"
BOUNDARY_UNRESOLVED = "boundary_unresolved"


class ResidualError(ValueError):
    """Input trajectory violates the Nahm residual bound."""


def n_steps_for(step):
    """Validate a step and return the (even) number of grid intervals."""
    if not (0.0 < step <= STEP_MAX):
        raise ValueError(f"step {step} out of range (0, {STEP_MAX}]")
    n = int(round(1.0 / step))
    if abs(n * step - 1.0) > 1e-9 or n % 2 != 0:
        raise ValueError("step must be 1/N for an even integer N")
    return n


def _check_triple(x):
    x = np.ascontiguousarray(np.asarray(x, dtype=np.complex128))
    if x.shape[0] != 3 or x.ndim != 3 or x.shape[1] != x.shape[2]:
        raise ValueError(f"expected a (3, n, n) triple, got {x.shape}")
    for a in range(3):
        if not liecore.is_compact(x[a], tol=1e-10):
            raise ValueError("triple components must be skew-Hermitian traceless")
    return x


def _sup_norm(values):
    # values: (m, 3, n, n); triple norm per node
    return np.sqrt(np.einsum("kaij,kaij->k", values, values.conj()).real)


@dataclass(frozen=True)
class ReducedSolution:
    """Trajectory of the reduced system started at ``initial``."""

    initial: np.ndarray
    step: float
    grid: np.ndarray
    values: np.ndarray
    status: str
    blowup_time: float | None
    sup_norm: float

    @property
    def n(self):
        return self.values.shape[2]

    def component_norm2(self, a):
        """|P_a(t)|^2 on the grid."""
        v = self.values[:, a]
        return np.einsum("kij,kij->k", v, v.conj()).real

    def max_residual(self):
        """Max centered-difference residual of the reduced equations.

        One-sided O(h^2) differences at the ends, centered inside; the
        truncation floor therefore scales as O(h^2) even on exact data.
        """
        return _system_residual(self.grid, None, self.values)

    def max_relative_residual(self):
        """Residual scaled by 1 + |P|^2, the natural size of P'."""
        return _system_residual(self.grid, None, self.values, relative=True)


@dataclass(frozen=True)
class NahmQuadruple:
    """Full solution (A0, A1, A2, A3) sampled on the grid."""

    step: float
    grid: np.ndarray
    a0: np.ndarray
    values: np.ndarray
    status: str
    blowup_time: float | None

    @property
    def n(self):
        return self.values.shape[2]

    @property
    def sup_norm(self):
        return float(_sup_norm(self.values).max())

    def max_residual(self):
        return _system_residual(self.grid, self.a0, self.values)

    def max_relative_residual(self):
        return _system_residual(self.grid, self.a0, self.values, relative=True)


@dataclass(frozen=True)
class GaugeTransform:
    """Samples of k: [0,1] -> K with k(0) = 1."""

    grid: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        v = self.values
        n = v.shape[1]
        eye = np.eye(n)
        unit_err = max(
            float(np.linalg.norm(v[k] @ v[k].conj().T - eye)) for k in range(v.shape[0])
        )
        det_err = float(np.abs(np.linalg.det(v) - 1.0).max())
        if unit_err > 1e-10 or det_err > 1e-10:
            raise ValueError(
                f"gauge samples leave SU(n): unitarity {unit_err:.2e}, det {det_err:.2e}"
            )

    @property
    def endpoint(self):
        return self.values[-1]


def _system_residual(grid, a0, values, relative=False):
    """Finite-difference residual of A'_a + [A0,A_a] + [A_b,A_c] over the grid."""
    m = values.shape[0]
    if m < 3:
        return 0.0
    h = grid[1] - grid[0]
    dot = np.empty_like(values)
    dot[1:-1] = (values[2:] - values[:-2]) / (2.0 * h)
    dot[0] = (-3.0 * values[0] + 4.0 * values[1] - values[2]) / (2.0 * h)
    dot[-1] = (3.0 * values[-1] - 4.0 * values[-2] + values[-3]) / (2.0 * h)
    worst = 0.0
    for k in range(m):
        p = values[k]
        for a in range(3):
            b, c = (a + 1) % 3, (a + 2) % 3
            r = dot[k, a] + liecore.bracket(p[b], p[c])
            if a0 is not None:
                r = r + liecore.bracket(a0[k], p[a])
            rn = liecore.frob(r)
            if relative:
                rn /= 1.0 + np.einsum("aij,aij->", p, p.conj()).real
            worst = max(worst, rn)
    return worst


def integrate_reduced(x, step=DEFAULT_STEP, blowup_threshold=BLOWUP_THRESHOLD):
    """Integrate the reduced system from x over [0, 1] with fixed-step RK4."""
    x = _check_triple(x)
    n_steps = n_steps_for(step)
    traj, last, status_code = kernels.reduced_flow(x, n_steps, blowup_threshold)
    values = traj[: last + 1]
    grid = np.arange(last + 1) * step
    status = COMPLETE if status_code == kernels.STATUS_COMPLETE else BLOWUP
    blowup_time = None if status == COMPLETE else float(grid[-1])
    return ReducedSolution(
        initial=x,
        step=step,
        grid=grid,
        values=values,
        status=status,
        blowup_time=blowup_time,
        sup_norm=float(_sup_norm(values).max()),
    )


def membership_W(x, step=MEMBERSHIP_STEP, blowup_threshold=BLOWUP_THRESHOLD):
    """Three-valued test of membership in the full-flow domain W.

    Runs the reduced flow at ``step`` and ``step/2``.  Inside requires
    completion at both resolutions plus endpoint consistency (relative
    difference of the two t = 1 states below 1e-3); without consistency
    a pole sitting at or just beyond t = 1 would be stepped over and
    misread as completion.  Outside requires the blow-up time to
    stabilize strictly below 1 - 2*step; everything else is reported as
    boundary_unresolved.
    """
    r1 = integrate_reduced(x, step, blowup_threshold)
    r2 = integrate_reduced(x, step / 2.0, blowup_threshold)
    if r1.status == COMPLETE and r2.status == COMPLETE:
        diff = float(np.linalg.norm(r1.values[-1] - r2.values[-1]))
        scale = 1.0 + float(np.linalg.norm(r2.values[-1]))
        return INSIDE if diff / scale <= 1e-3 else BOUNDARY_UNRESOLVED
    if r1.status == BLOWUP and r2.status == BLOWUP:
        t1, t2 = r1.blowup_time, r2.blowup_time
        if abs(t2 - 1.0) <= 2.0 * step:
            return BOUNDARY_UNRESOLVED
        if t2 < 1.0 - 2.0 * step and abs(t1 - t2) <= 2.0 * step:
            return OUTSIDE
        return BOUNDARY_UNRESOLVED
    return BOUNDARY_UNRESOLVED


def _midpoint_samples(nodes):
    """Order-4 Lagrange interpolation of node samples at interval midpoints."""
    m = nodes.shape[0] - 1
    if m < 3:
        raise ValueError("need at least 4 nodes for midpoint interpolation")
    mids = np.empty((m,) + nodes.shape[1:], dtype=nodes.dtype)
    w_in = np.array([-1.0, 9.0, 9.0, -1.0]) / 16.0
    mids[1:-1] = (
        w_in[0] * nodes[:-3]
        + w_in[1] * nodes[1:-2]
        + w_in[2] * nodes[2:-1]
        + w_in[3] * nodes[3:]
    )
    w0 = np.array([5.0, 15.0, -5.0, 1.0]) / 16.0
    mids[0] = w0[0] * nodes[0] + w0[1] * nodes[1] + w0[2] * nodes[2] + w0[3] * nodes[3]
    mids[-1] = (
        w0[3] * nodes[-4] + w0[2] * nodes[-3] + w0[1] * nodes[-2] + w0[0] * nodes[-1]
    )
    return mids


def _a0_samples(a0_profile, n_steps, n):
    """Node and midpoint samples of the connection component."""
    if callable(a0_profile):
        ts = np.arange(n_steps + 1) / n_steps
        nodes = np.stack([np.asarray(a0_profile(t), dtype=np.complex128) for t in ts])
        mids = np.stack(
            [np.asarray(a0_profile(t + 0.5 / n_steps), dtype=np.complex128)
             for t in ts[:-1]]
        )
    else:
        nodes = np.asarray(a0_profile, dtype=np.complex128)
        if nodes.shape != (n_steps + 1, n, n):
            raise ValueError(
                f"A0 samples must have shape {(n_steps + 1, n, n)}, got {nodes.shape}"
            )
        mids = _midpoint_samples(nodes)
    for k in (0, nodes.shape[0] // 2, nodes.shape[0] - 1):
        if not liecore.is_compact(nodes[k], tol=1e-9):
            raise ValueError("A0 samples must be skew-Hermitian traceless")
    return np.ascontiguousarray(nodes), np.ascontiguousarray(mids)


def integrate_full(a0_profile, x, step=DEFAULT_STEP, blowup_threshold=BLOWUP_THRESHOLD):
    """Integrate the Nahm system with prescribed A0.

    ``a0_profile`` is either a callable t -> (n, n) compact matrix or an
    array of node samples (midpoints then come from order-4 interpolation).
    """
    x = _check_triple(x)
    n_steps = n_steps_for(step)
    a0_nodes, a0_mids = _a0_samples(a0_profile, n_steps, x.shape[1])
    traj, last, status_code = kernels.full_flow(a0_nodes, a0_mids, x, blowup_threshold)
    grid = np.arange(last + 1) * step
    status = COMPLETE if status_code == kernels.STATUS_COMPLETE else BLOWUP
    return NahmQuadruple(
        step=step,
        grid=grid,
        a0=a0_nodes[: last + 1],
        values=traj[: last + 1],
        status=status,
        blowup_time=None if status == COMPLETE else float(grid[-1]),
    )


def gauge_fix(a, residual_tol=None):
    """Transport a full solution to temporal gauge.

    Returns (k, P) with k(0) = 1, k' = k A0, and P_a(t) = Ad_{k(t)} A_a(t),
    which solves the reduced system with P(0) = A(0).  The input must be a
    complete solution within the residual bound; the default bound scales
    with the O(h^2) truncation of the residual estimator.
    """
    if a.status != COMPLETE:
        raise ValueError("gauge fixing requires a solution covering [0, 1]")
    res = a.max_residual()
    if residual_tol is None:
        residual_tol = 50.0 * a.step**2 * (1.0 + a.sup_norm) ** 3
    if res > residual_tol:
        raise ResidualError(
            f"Nahm residual {res:.3e} exceeds bound {residual_tol:.3e}"
        )
    n_steps = a.values.shape[0] - 1
    a0_mids = _midpoint_samples(a.a0)
    k_traj = kernels.gauge_flow(np.ascontiguousarray(a.a0), a0_mids)
    p_vals = np.einsum("kij,kajl,kml->kaim", k_traj, a.values, k_traj.conj())
    gauge = GaugeTransform(grid=a.grid, values=k_traj)
    reduced = ReducedSolution(
        initial=p_vals[0],
        step=a.step,
        grid=a.grid,
        values=p_vals,
        status=COMPLETE,
        blowup_time=None,
        sup_norm=float(_sup_norm(p_vals).max()),
    )
    return gauge, reduced


def gauge_transform(a, k_nodes, k_dot_nodes):
    """Apply a gauge transformation k (with sampled derivative) to a solution.

    Returns a new NahmQuadruple with A0 -> k A0 k^-1 - k' k^-1 and
    A_a -> k A_a k^-1.
    """
    m = a.values.shape[0]
    new_a0 = np.empty_like(a.a0)
    new_vals = np.empty_like(a.values)
    for j in range(m):
        k = k_nodes[j]
        kinv = k.conj().T
        new_a0[j] = k @ a.a0[j] @ kinv - k_dot_nodes[j] @ kinv
        for c in range(3):
            new_vals[j, c] = k @ a.values[j, c] @ kinv
    return NahmQuadruple(
        step=a.step,
        grid=a.grid,
        a0=new_a0,
        values=new_vals,
        status=a.status,
        blowup_time=a.blowup_time,
    )


def export_trajectory_csv(path, grid, components, meta=None):
    """Write a trajectory as CSV.

    ``components`` maps names to (m, n, n) complex arrays.  First line is a
    comment with metadata, second the column header; columns are t followed
    by Re/Im of every matrix entry of every component, entry-major.
    """
    names = list(components)
    first = components[names[0]]
    n = first.shape[1]
    cols = ["t"]
    for name in names:
        for i in range(n):
            for j in range(n):
                cols.append(f"{name}_{i}{j}_re")
                cols.append(f"{name}_{i}{j}_im")
    meta = dict(meta or {})
    meta_str = " ".join(f"{k}={v}" for k, v in sorted(meta.items()))
    lines = [f"# nahmkn trajectory {meta_str}".rstrip(), ",".join(cols)]
    for idx in range(grid.shape[0]):
        row = [f"{grid[idx]:.17g}"]
        for name in names:
            mat = components[name][idx]
            for i in range(n):
                for j in range(n):
                    row.append(f"{mat[i, j].real:.17g}")
                    row.append(f"{mat[i, j].imag:.17g}")
        lines.append(",".join(row))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
