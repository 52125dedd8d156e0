"""The chart between K x W and G x g, potentials, and moment maps.

A moduli point is a pair (k, X) with k in SU(n) and X an algebra triple
whose reduced flow covers [0, 1].  Writing k = exp(Y0), the cotangent
chart sends it to (g(1), X2 + i X3) where g solves

    g'(t) = g(t) (Y0 + i Ad_{exp(-t Y0)} P1(t)),   g(0) = 1,

with P the reduced flow of X.  Substituting g(t) = h(t) exp(t Y0) turns
this into h' = i h P1, h(0) = 1, so g(1) = h(1) k independently of the
logarithm branch; the h form carries the derivative and the Newton
inversion, the direct form is what the public map integrates.

Tangent conventions: a tangent vector at (k, X) is a 4-tuple
(v0, v1, v2, v3) of compact algebra elements, attached to the curve
(exp(s v0) k, X + s (v1, v2, v3)).  On the cotangent side tangents are
right-translated: the pair (dg g^{-1}, dY).
"""

from dataclasses import dataclass

import numpy as np

from . import kernels, liecore, nahmflow
from .nahmflow import DEFAULT_STEP


class DomainError(ValueError):
    """The initial triple is not inside the flow domain."""


class NoPreimageError(RuntimeError):
    """Newton shooting did not converge to a preimage."""


class DomainBoundaryError(NoPreimageError):
    """Newton damping collapsed against the flow-domain boundary."""


@dataclass(frozen=True)
class ModuliPoint:
    """(k, X) with k special-unitary; flow-domain membership is checked by
    the operations that integrate, not at construction."""

    k: np.ndarray
    x: np.ndarray

    def __post_init__(self):
        liecore.GroupElement(self.k, unitary=True)
        object.__setattr__(self, "k", np.ascontiguousarray(self.k, dtype=np.complex128))
        object.__setattr__(self, "x", nahmflow._check_triple(self.x))

    @property
    def n(self):
        return self.k.shape[0]


@dataclass(frozen=True)
class CotangentPoint:
    """(g, Y) with g in SL(n, C) and Y traceless."""

    g: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        liecore.GroupElement(self.g)
        y = np.asarray(self.y, dtype=np.complex128)
        if abs(np.trace(y)) > 1e-12:
            raise ValueError("cotangent fibre must be traceless")
        object.__setattr__(self, "g", np.ascontiguousarray(self.g, dtype=np.complex128))
        object.__setattr__(self, "y", np.ascontiguousarray(y))

    @property
    def n(self):
        return self.g.shape[0]


@dataclass(frozen=True)
class HkMomentValue:
    """Three pairs of compact algebra elements (I, J, K components)."""

    m_i: tuple
    m_j: tuple
    m_k: tuple

    def __post_init__(self):
        for pair in (self.m_i, self.m_j, self.m_k):
            for entry in pair:
                if not liecore.is_compact(entry, tol=1e-12):
                    raise ValueError("moment entries must be skew-Hermitian traceless")

    def pair_i(self, z1, z2):
        return liecore.inner(self.m_i[0], z1) + liecore.inner(self.m_i[1], z2)

    def complex_part(self):
        """mu_J + i mu_K as a pair of traceless matrices."""
        return (self.m_j[0] + 1j * self.m_k[0], self.m_j[1] + 1j * self.m_k[1])


def _completed_flow(x, step, context):
    n_steps = nahmflow.n_steps_for(step)
    traj, last, status = kernels.reduced_flow(
        nahmflow._check_triple(x), n_steps, nahmflow.BLOWUP_THRESHOLD
    )
    if status != kernels.STATUS_COMPLETE:
        raise DomainError(
            f"{context}: reduced flow leaves the domain at t = {last / n_steps:.6f}"
        )
    return traj


def chart_trajectory(point, step=DEFAULT_STEP, log_branch=None):
    """Full data of the chart map: (grid, P nodes, g nodes, Y0).

    ``log_branch`` overrides the principal logarithm of k (it must satisfy
    exp(log_branch) = k); used to confirm branch independence.
    """
    y0 = liecore.log_principal(point.k) if log_branch is None else log_branch
    n_steps = nahmflow.n_steps_for(step)
    p_traj, g_traj = kernels.chart_flow(
        np.ascontiguousarray(y0), point.x, n_steps
    )
    if not np.all(np.isfinite(p_traj.view(np.float64))):
        raise DomainError("chart map: reduced flow leaves the domain")
    grid = np.arange(n_steps + 1) / n_steps
    return grid, p_traj, g_traj, y0


def moduli_to_cotangent(point, step=DEFAULT_STEP, log_branch=None):
    """The chart map (k, X) -> (g(1), X2 + i X3)."""
    _, _, g_traj, _ = chart_trajectory(point, step, log_branch)
    return CotangentPoint(g=g_traj[-1], y=point.x[1] + 1j * point.x[2])


def _basis_compact(n):
    """Orthonormal basis of the compact algebra w.r.t. the invariant form."""
    basis = []
    for i in range(n):
        for j in range(i + 1, n):
            e = np.zeros((n, n), dtype=np.complex128)
            e[i, j] = 1.0
            e[j, i] = -1.0
            basis.append(e / np.sqrt(2.0))
            e = np.zeros((n, n), dtype=np.complex128)
            e[i, j] = 1j
            e[j, i] = 1j
            basis.append(e / np.sqrt(2.0))
    for d in range(1, n):
        e = np.zeros((n, n), dtype=np.complex128)
        for i in range(d):
            e[i, i] = 1j
        e[d, d] = -1j * d
        basis.append(e / np.sqrt(d * d + d))
    return np.stack(basis)


def _h_flow(point_x, dx0, step):
    n_steps = nahmflow.n_steps_for(step)
    p_traj, h_traj, dh = kernels.chart_h_flow(
        nahmflow._check_triple(point_x), np.ascontiguousarray(dx0), n_steps
    )
    if not np.all(np.isfinite(p_traj.view(np.float64))):
        raise DomainError("chart map: reduced flow leaves the domain")
    return p_traj, h_traj, dh


def moduli_to_cotangent_derivative(point, v, step=DEFAULT_STEP):
    """Directional derivative of the chart map.

    ``v`` is a (4, n, n) stack (v0, v1, v2, v3) of compact directions for
    the curve (exp(s v0) k, X + s(v1, v2, v3)); returns (dg g^{-1}, dY).
    The first variation rides the h-form of the holonomy ODE alongside
    the linearized reduced flow.
    """
    v = np.asarray(v, dtype=np.complex128)
    if v.shape != (4, point.n, point.n):
        raise ValueError(f"tangent must have shape {(4, point.n, point.n)}")
    dx0 = v[1:][None, :, :, :]
    _, h_traj, dh = _h_flow(point.x, dx0, step)
    h1 = h_traj[-1]
    h1_inv = np.linalg.inv(h1)
    dg_right = dh[0] @ h1_inv + h1 @ v[0] @ h1_inv
    return dg_right, v[2] + 1j * v[3]


def cotangent_action(q, z1, z2, t):
    """The complexified two-sided flow exp(itZ).(g, Y) on the cotangent side."""
    e1 = liecore.group_exp(1j * t * z1)
    e2 = liecore.group_exp(-1j * t * z2)
    g = e1 @ q.g @ e2
    y = e1 @ q.y @ np.linalg.inv(e1)
    return CotangentPoint(g=g, y=liecore.project_traceless(y))


@dataclass(frozen=True)
class InversionInfo:
    iterations: int
    residual: float


def cotangent_to_moduli(q, step=DEFAULT_STEP, tol=1e-9, max_iter=100):
    """Invert the chart by Newton shooting.

    X2, X3 are read off from Y directly; the unitary factor and X1 are
    found by a damped multiplicative Newton iteration on the residual
    r = log(g(1)^{-1} g_target), with the Jacobian assembled from the
    same first-variation flow as the derivative map.  Candidate steps
    that push X out of the flow domain halve the damping factor.
    """
    n = q.n
    x2 = 0.5 * (q.y - q.y.conj().T)
    x3 = (q.y + q.y.conj().T) / 2j
    # polar initial guess g = k exp(iS): S = -i/2 log(g^H g)
    w, v = np.linalg.eigh(q.g.conj().T @ q.g)
    if np.any(w <= 0.0):
        raise NoPreimageError("target matrix is numerically degenerate")
    s_herm = (v * (0.5 * np.log(w))) @ v.conj().T
    k_cur = q.g @ (v * np.exp(-0.5 * np.log(w))) @ v.conj().T
    k_cur = k_cur / np.linalg.det(k_cur) ** (1.0 / n)
    x1 = liecore.project_compact(-1j * s_herm)

    basis = _basis_compact(n)
    m = basis.shape[0]
    zeros = np.zeros((n, n), dtype=np.complex128)
    dirs = np.stack([np.stack([b, zeros, zeros]) for b in basis])

    def run(x1_val, with_jac):
        x = np.stack([x1_val, x2, x3])
        dx0 = dirs if with_jac else np.zeros((0, 3, n, n), dtype=np.complex128)
        return _h_flow(x, dx0, step)

    def residual_of(h1, k_val):
        g1 = h1 @ k_val
        r = liecore.log_principal(np.linalg.solve(g1, q.g))
        return g1, r

    try:
        _, h_traj, dh = run(x1, True)
    except DomainError as exc:
        raise DomainBoundaryError(f"initial guess outside the flow domain: {exc}")
    h1 = h_traj[-1]
    try:
        g1, r = residual_of(h1, k_cur)
    except liecore.BranchAmbiguityError:
        raise NoPreimageError("initial residual sits on the logarithm branch cut")
    res = liecore.frob(r)

    for it in range(1, max_iter + 1):
        if res < tol:
            return ModuliPoint(k=k_cur, x=np.stack([x1, x2, x3])), InversionInfo(it - 1, res)
        h1_inv = np.linalg.inv(h1)
        cols = np.empty((2 * n * n, 2 * m))
        for a in range(m):
            col_k = h1 @ basis[a] @ h1_inv
            col_x = dh[a] @ h1_inv
            cols[:, a] = np.concatenate([col_k.real.ravel(), col_k.imag.ravel()])
            cols[:, m + a] = np.concatenate([col_x.real.ravel(), col_x.imag.ravel()])
        target = g1 @ r @ np.linalg.inv(g1)
        rhs = np.concatenate([target.real.ravel(), target.imag.ravel()])
        u = np.linalg.lstsq(cols, rhs, rcond=None)[0]

        damping = 1.0
        accepted = False
        while damping > 2.0**-30:
            d0 = np.tensordot(damping * u[:m], basis, axes=1)
            d1 = np.tensordot(damping * u[m:], basis, axes=1)
            k_try = liecore.group_exp(d0) @ k_cur
            x1_try = liecore.project_compact(x1 + d1)
            try:
                _, h_traj_try, dh_try = run(x1_try, True)
            except DomainError:
                damping *= 0.5
                continue
            try:
                g1_try, r_try = residual_of(h_traj_try[-1], k_try)
            except liecore.BranchAmbiguityError:
                damping *= 0.5
                continue
            res_try = liecore.frob(r_try)
            if res_try <= res * (1.0 - 0.25 * damping) or res_try < tol:
                k_cur, x1 = k_try, x1_try
                h1, dh, g1, r, res = h_traj_try[-1], dh_try, g1_try, r_try, res_try
                accepted = True
                break
            damping *= 0.5
        if not accepted:
            raise DomainBoundaryError(
                f"damping collapsed at iteration {it} with residual {res:.3e}"
            )
    if res < tol:
        return ModuliPoint(k=k_cur, x=np.stack([x1, x2, x3])), InversionInfo(max_iter, res)
    raise NoPreimageError(
        f"no preimage found within {max_iter} iterations (residual {res:.3e})"
    )


def kahler_potential(x, step=DEFAULT_STEP):
    """Quadrature of (1/4) int (2|P1|^2 + |P2|^2 + |P3|^2) dt along the flow."""
    traj = _completed_flow(x, step, "potential")
    n2 = np.einsum("kaij,kaij->ka", traj, traj.conj()).real
    integrand = 0.25 * (2.0 * n2[:, 0] + n2[:, 1] + n2[:, 2])
    return float(kernels.simpson_uniform(integrand, step))


def hyperkahler_moment(point, step=DEFAULT_STEP):
    """Moment pairs ((X_a, -Ad_{k^{-1}} P_a(1)))_{a=1,2,3} in the chart."""
    traj = _completed_flow(point.x, step, "moment")
    k_inv = point.k.conj().T
    p_end = traj[-1]
    pairs = []
    for a in range(3):
        pairs.append(
            (point.x[a], liecore.project_compact(-k_inv @ p_end[a] @ point.k))
        )
    return HkMomentValue(m_i=tuple(pairs[0]), m_j=tuple(pairs[1]), m_k=tuple(pairs[2]))


def complex_moment_residual(point, step=DEFAULT_STEP):
    """Mismatch between mu_J + i mu_K in the chart and (Y, -Ad_{g^{-1}}Y).

    The two sides come from independent integrations: the reduced flow
    endpoint on one side, the holonomy g(1) on the other.
    """
    mom = hyperkahler_moment(point, step)
    mc0, mc1 = mom.complex_part()
    q = moduli_to_cotangent(point, step)
    phi0 = q.y
    phi1 = -np.linalg.solve(q.g, q.y @ q.g)
    return max(liecore.frob(mc0 - phi0), liecore.frob(mc1 - phi1))


def cotangent_potential(q, step=DEFAULT_STEP, tol=1e-9, max_iter=100):
    """The potential transported to the cotangent side: rho of the X-part
    of the inverse chart."""
    point, _ = cotangent_to_moduli(q, step, tol, max_iter)
    return kahler_potential(point.x, step)


def potential_moment_residual(point, z, step=DEFAULT_STEP, fd_step=1e-4,
                              newton_tol=1e-9):
    """|<mu_I, Z> - dF(I Z^#)| at the point, Z = (z1, z2) in k x k.

    The right side differentiates the transported potential along the
    complexified action curve exp(itZ).(g, Y) by central differences;
    every evaluation runs the Newton inversion, so finite-difference
    noise is bounded by newton_tol / fd_step.
    """
    z1, z2 = z
    mom = hyperkahler_moment(point, step)
    left = mom.pair_i(z1, z2)
    q = moduli_to_cotangent(point, step)
    f_plus = cotangent_potential(cotangent_action(q, z1, z2, fd_step), step, newton_tol)
    f_minus = cotangent_potential(cotangent_action(q, z1, z2, -fd_step), step, newton_tol)
    right = (f_plus - f_minus) / (2.0 * fd_step)
    return abs(left - right)


# ---------------------------------------------------------------------------
# JSON interchange (matrices as nested [re, im] pairs)
# ---------------------------------------------------------------------------

def matrix_to_json(m):
    return [[[float(v.real), float(v.imag)] for v in row] for row in np.asarray(m)]


def matrix_from_json(data):
    arr = np.asarray(data, dtype=float)
    return np.ascontiguousarray(arr[..., 0] + 1j * arr[..., 1])


def moduli_point_to_json(point):
    return {"k": matrix_to_json(point.k), "X": [matrix_to_json(point.x[a]) for a in range(3)]}


def moduli_point_from_json(data):
    x = np.stack([matrix_from_json(m) for m in data["X"]])
    return ModuliPoint(k=matrix_from_json(data["k"]), x=x)


def cotangent_point_to_json(q):
    return {"g": matrix_to_json(q.g), "Y": matrix_to_json(q.y)}


def cotangent_point_from_json(data):
    return CotangentPoint(g=matrix_from_json(data["g"]), y=matrix_from_json(data["Y"]))


def moment_to_json(mom):
    return {
        "mI": [matrix_to_json(m) for m in mom.m_i],
        "mJ": [matrix_to_json(m) for m in mom.m_j],
        "mK": [matrix_to_json(m) for m in mom.m_k],
    }
