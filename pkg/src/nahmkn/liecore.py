"""Matrix Lie group/algebra numerics for SU(n) and SL(n, C).

The compact algebra is realized as skew-Hermitian traceless complex
matrices, its complexification as traceless matrices, the groups as
unitary/unimodular matrices.  The invariant inner product is fixed to

    <X, Y> = -Re tr(X Y)

so that on skew-Hermitian matrices the induced norm coincides with the
Frobenius norm (norm-equivalence constants both 1).  Algebra triples are
(3, n, n) arrays with the summed inner product.

All functions are pure; values are never mutated in place.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels

TRACE_TOL = 1e-12
SKEW_TOL = 1e-12
DET_TOL = 1e-10
UNITARY_TOL = 1e-10


class BranchAmbiguityError(ValueError):
    """A logarithm branch cannot be chosen: spectrum touches the cut."""


def _as_matrix(x):
    m = np.asarray(x, dtype=np.complex128)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    return m


def check_rank_match(x, y):
    if x.shape != y.shape:
        raise ValueError(f"rank mismatch: {x.shape} vs {y.shape}")


def inner(x, y):
    """Invariant pairing -Re tr(XY)."""
    return -float(np.einsum("ij,ji->", x, y).real)


def alg_norm(x):
    """Norm induced by :func:`inner` (equals Frobenius on the compact form)."""
    return float(np.sqrt(max(inner(x, x), 0.0)))


def frob(x):
    return float(np.linalg.norm(x))


def inner3(x, y):
    return sum(inner(x[a], y[a]) for a in range(3))


def norm3(x):
    return float(np.sqrt(max(inner3(x, x), 0.0)))


def project_compact(x):
    """Project onto skew-Hermitian traceless matrices."""
    y = 0.5 * (x - x.conj().T)
    return y - (np.trace(y) / y.shape[0]) * np.eye(y.shape[0])


def project_traceless(x):
    return x - (np.trace(x) / x.shape[0]) * np.eye(x.shape[0])


def is_compact(x, tol=SKEW_TOL):
    return frob(x + x.conj().T) <= tol and abs(np.trace(x)) <= tol


def bracket(x, y):
    """Matrix commutator [X, Y] = XY - YX."""
    x = _as_matrix(x)
    y = _as_matrix(y)
    check_rank_match(x, y)
    return x @ y - y @ x


def group_exp(x):
    """Matrix exponential (scaling-and-squaring, Pade degree 7)."""
    return kernels.expm(np.ascontiguousarray(_as_matrix(x)))


def log_principal(g, branch_tol=1e-8, refine=True):
    """Principal matrix logarithm.

    Eigenvalue arguments are taken in (-pi, pi]; an eigenvalue within
    ``branch_tol`` of the negative real axis raises
    :class:`BranchAmbiguityError`.  For inputs with det = 1 whose
    principal eigenangles sum to a nonzero multiple of 2*pi (possible
    for n >= 3), single angles are shifted by 2*pi until the result is
    traceless; this keeps exp(log(g)) = g while landing in the traceless
    algebra.  Unitary inputs produce a skew-Hermitian result.
    """
    g = _as_matrix(g)
    n = g.shape[0]
    w, v = np.linalg.eig(g)
    if np.min(np.abs(w)) < 1e-14:
        raise ValueError("matrix is numerically singular; no logarithm")
    angles = np.angle(w)
    if np.any(np.pi - np.abs(angles) < branch_tol):
        raise BranchAmbiguityError(
            "eigenvalue within branch_tol of the negative real axis; "
            "both logarithm branches are admissible"
        )
    logw = np.log(np.abs(w)) + 1j * angles
    # det-1 inputs: restore tracelessness by whole-turn shifts on single angles
    if abs(np.linalg.det(g) - 1.0) < 1e-6:
        for _ in range(n):
            total = np.sum(logw.imag)
            k = int(round(total / (2.0 * np.pi)))
            if k == 0:
                break
            idx = int(np.argmax(np.sign(k) * logw.imag))
            logw[idx] -= 2j * np.pi * np.sign(k)
    y = (v * logw) @ np.linalg.inv(v)
    unitary = frob(g @ g.conj().T - np.eye(n)) <= 1e-8
    if unitary:
        y = 0.5 * (y - y.conj().T)
    if refine:
        y = _refine_log(g, y)
        if unitary:
            y = 0.5 * (y - y.conj().T)
    return y


def _refine_log(g, y):
    """Fixed-point polish of exp(y) = g; keeps the best iterate."""
    ident = np.eye(g.shape[0])
    best = y
    best_res = frob(kernels.expm(np.ascontiguousarray(y)) @ np.linalg.inv(g) - ident)
    cur = y
    for _ in range(5):
        if best_res < 1e-14:
            break
        e = np.linalg.solve(kernels.expm(np.ascontiguousarray(cur)), g) - ident
        cur = cur + e - 0.5 * (e @ e)
        res = frob(kernels.expm(np.ascontiguousarray(cur)) @ np.linalg.inv(g) - ident)
        if res < best_res:
            best, best_res = cur, res
        else:
            break
    return best


def adjoint(k, x):
    """Adjoint action k X k^{-1}."""
    k = _as_matrix(k)
    x = _as_matrix(x)
    check_rank_match(k, x)
    if frob(k @ k.conj().T - np.eye(k.shape[0])) <= 1e-10:
        return k @ x @ k.conj().T
    return np.linalg.solve(k.T, (k @ x).T).T


def adjoint3(k, x3):
    return np.stack([adjoint(k, x3[a]) for a in range(3)])


def su2_basis():
    """T_a = -(i/2) sigma_a; [T_1, T_2] = T_3 cyclically, |T_a|^2 = 1/2."""
    s1 = np.array([[0, 1], [1, 0]], dtype=np.complex128)
    s2 = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
    s3 = np.array([[1, 0], [0, -1]], dtype=np.complex128)
    return np.stack([-0.5j * s1, -0.5j * s2, -0.5j * s3])


def random_algebra(rng, n, norm=None):
    """Random compact algebra element; rescaled to ``norm`` when given."""
    raw = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    x = project_compact(raw)
    if norm is not None:
        cur = alg_norm(x)
        if cur == 0.0:
            raise ValueError("degenerate random draw")
        x = (norm / cur) * x
    return x


def random_unitary(rng, n, max_angle=1.5):
    """Random special-unitary matrix exp(X), |X| uniform in [0, max_angle]."""
    return group_exp(random_algebra(rng, n, norm=rng.uniform(0.0, max_angle)))


def random_triple(rng, n, norm=None):
    """Random algebra triple, optionally rescaled to a given triple norm."""
    x = np.stack([random_algebra(rng, n) for _ in range(3)])
    if norm is not None:
        cur = norm3(x)
        x = (norm / cur) * x
    return x


@dataclass(frozen=True)
class AlgebraElement:
    """Validated algebra element; ``form`` is 'compact' or 'complex'."""

    mat: np.ndarray
    form: str = "compact"

    def __post_init__(self):
        m = _as_matrix(self.mat)
        object.__setattr__(self, "mat", m)
        if self.form not in ("compact", "complex"):
            raise ValueError(f"unknown form {self.form!r}")
        if abs(np.trace(m)) > TRACE_TOL:
            raise ValueError(f"trace {np.trace(m):.3e} exceeds {TRACE_TOL}")
        if self.form == "compact" and frob(m + m.conj().T) > SKEW_TOL:
            raise ValueError("matrix is not skew-Hermitian within tolerance")

    @property
    def n(self):
        return self.mat.shape[0]


@dataclass(frozen=True)
class GroupElement:
    """Validated group element; ``unitary`` asserts membership in SU(n)."""

    mat: np.ndarray
    unitary: bool = False

    def __post_init__(self):
        m = _as_matrix(self.mat)
        object.__setattr__(self, "mat", m)
        if abs(np.linalg.det(m) - 1.0) > DET_TOL:
            raise ValueError(f"det {np.linalg.det(m):.12f} is not 1 within {DET_TOL}")
        if self.unitary:
            err = frob(m @ m.conj().T - np.eye(m.shape[0]))
            if err > UNITARY_TOL:
                raise ValueError(f"unitarity defect {err:.3e} exceeds {UNITARY_TOL}")

    @property
    def n(self):
        return self.mat.shape[0]
