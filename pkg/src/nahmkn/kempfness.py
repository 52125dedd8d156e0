"""Kempf-Ness machinery for linear actions on C^N with character twists.

A problem is a compact group acting unitarily on C^N through a declared
basis of skew-Hermitian generators, a character given by its weights on
the central generators, and a scale hbar.  Algebra elements are handled
in generator coordinates throughout, with the coordinate Euclidean inner
product (the declared basis is orthonormal by fiat; the acceptance
problems are tori, where every inner product is invariant, and the
matrix representation may be non-faithful so a trace form can
degenerate).

Two Kempf-Ness normalizations coexist and both are exposed:

* :func:`kn_value` is the flat-norm function
  (1/4 pi hbar)(log|g p|^2 - 2 log|chi(g)|), whose ray derivatives are a
  Fubini-normalized shifted moment pairing (:func:`kn_derivatives`).
* :func:`kn_value_potential` is the bundle-metric function
  |g p|^2 / 2 - a log|chi(g)| with a = 1/(2 pi hbar), i.e. the
  logarithm of the dual-bundle fibre norm of the lifted point for the
  potential f = |.|^2/2 and the chi-twisted linearization.  Its critical
  points are zeros of the shifted moment map mu - xi in the
  omega = 2i ddbar f normalization, and its boundedness below decides
  twisted affine semistability; this is the function the classifier
  descends.

The moment map in the standard normalization is
mu(p)(X) = -Im<Xp, p>/2; the potential normalization is twice that.
The character shift is xi(X) = (i/(2 pi hbar)) dchi(X), which on a
generator with character weight m evaluates to -a*m.
"""

from dataclasses import dataclass, field

import numpy as np

from . import kernels, liecore


@dataclass(frozen=True)
class LinearGitProblem:
    """A unitary linear action with a character twist.

    generators: (r, N, N) skew-Hermitian matrices (a basis of the acting
    algebra; possibly a non-faithful representation).
    character: (r,) weights of dchi on the generators; must vanish off
    the central ones.
    center: indices of the generators spanning the center (default all,
    valid for tori).
    """

    generators: np.ndarray
    character: np.ndarray
    hbar: float
    center: tuple = None
    integral_character: bool = True

    def __post_init__(self):
        gens = np.ascontiguousarray(np.asarray(self.generators, dtype=np.complex128))
        if gens.ndim != 3 or gens.shape[1] != gens.shape[2]:
            raise ValueError(f"generators must be (r, N, N), got {gens.shape}")
        lam = np.asarray(self.character, dtype=float)
        if lam.shape != (gens.shape[0],):
            raise ValueError("character must give one weight per generator")
        if self.hbar <= 0:
            raise ValueError("hbar must be positive")
        for z in gens:
            if liecore.frob(z + z.conj().T) > 1e-12:
                raise ValueError("generators must be skew-Hermitian within 1e-12")
        center = self.center if self.center is not None else tuple(range(gens.shape[0]))
        for k in range(gens.shape[0]):
            if lam[k] != 0.0 and k not in center:
                raise ValueError("character must be supported on the center")
        for c in center:
            for k in range(gens.shape[0]):
                if liecore.frob(liecore.bracket(gens[c], gens[k])) > 1e-10:
                    raise ValueError(f"declared central generator {c} does not commute")
        if self.integral_character and np.any(np.abs(lam - np.round(lam)) > 1e-9):
            raise ValueError("character weights must be integral on a torus basis")
        object.__setattr__(self, "generators", gens)
        object.__setattr__(self, "character", lam)
        object.__setattr__(self, "center", center)

    @property
    def dim(self):
        return self.generators.shape[1]

    @property
    def rank(self):
        return self.generators.shape[0]

    @property
    def shift_level(self):
        """a = 1/(2 pi hbar), the scale in xi = a i dchi."""
        return 1.0 / (2.0 * np.pi * self.hbar)

    def algebra_matrix(self, coords):
        return np.tensordot(np.asarray(coords, dtype=float), self.generators, axes=1)

    def theta(self, coords):
        """dchi(X) = i theta(X) for X with the given coordinates."""
        return float(np.dot(self.character, coords))


def torus_problem(weights, character, hbar=1.0 / (2.0 * np.pi)):
    """Diagonal torus problem: weights is (N, r) integers, coordinate j
    transforming with weight vector weights[j]."""
    w = np.atleast_2d(np.asarray(weights, dtype=float))
    n, r = w.shape
    gens = np.zeros((r, n, n), dtype=np.complex128)
    for k in range(r):
        for j in range(n):
            gens[k, j, j] = 1j * w[j, k]
    return LinearGitProblem(
        generators=gens, character=np.asarray(character, dtype=float), hbar=hbar
    )


@dataclass(frozen=True)
class GroupPoint:
    """A complexified group element together with log|chi| at it.

    Group points are built from algebra coordinates (g = exp(i S)) and
    unitary left factors, which is enough to track |chi| exactly even
    when the matrix representation is non-faithful.
    """

    mat: np.ndarray
    log_abs_chi: float

    @staticmethod
    def identity(problem):
        return GroupPoint(np.eye(problem.dim, dtype=np.complex128), 0.0)

    @staticmethod
    def from_coords(problem, coords):
        mat = kernels.expm(np.ascontiguousarray(1j * problem.algebra_matrix(coords)))
        return GroupPoint(mat, -problem.theta(coords))

    def left_unitary(self, k):
        """Left-multiply by an element of K (|chi| is unchanged)."""
        return GroupPoint(np.asarray(k) @ self.mat, self.log_abs_chi)

    def apply(self, p):
        return self.mat @ np.asarray(p, dtype=np.complex128)


def moment_standard(problem, p):
    """Standard moment map -Im<Xp,p>/2 as a coordinate vector on k*."""
    p = np.asarray(p, dtype=np.complex128)
    out = np.empty(problem.rank)
    for k in range(problem.rank):
        zp = problem.generators[k] @ p
        out[k] = -0.5 * float(np.imag(np.sum(zp * p.conj())))
    return out


def moment_pairing(x_mat, p):
    """-Im<Xp, p>/2 for a single algebra matrix."""
    p = np.asarray(p, dtype=np.complex128)
    return -0.5 * float(np.imag(np.sum((x_mat @ p) * p.conj())))


def moment_from_potential(f, p, x_mat, fd_step=1e-5):
    """d/dt f(exp(itX) p) at t = 0 by central differences.

    For f = |.|^2/2 this is the omega = 2i ddbar f moment pairing, twice
    the standard one.
    """
    p = np.asarray(p, dtype=np.complex128)
    x_mat = np.ascontiguousarray(np.asarray(x_mat, dtype=np.complex128))
    e = kernels.expm(1j * fd_step * x_mat)
    em = kernels.expm(-1j * fd_step * x_mat)
    return (f(e @ p) - f(em @ p)) / (2.0 * fd_step)


def shift_from_character(problem):
    """xi = (i/(2 pi hbar)) dchi as a coordinate vector: xi_k = -a lam_k."""
    return -problem.shift_level * problem.character


def shift_centrality_residual(problem):
    """|xi([k, k])| over generator brackets (brackets resolved in the basis)."""
    gens = problem.generators
    r = problem.rank
    flat = gens.reshape(r, -1)
    xi = shift_from_character(problem)
    worst = 0.0
    for i in range(r):
        for j in range(r):
            br = liecore.bracket(gens[i], gens[j]).ravel()
            coords, res, _, _ = np.linalg.lstsq(flat.T, br, rcond=None)
            worst = max(worst, abs(float(np.dot(xi, coords.real))))
    return worst


def kn_value(problem, p, g):
    """Flat-norm Kempf-Ness value (1/4 pi hbar)(log|gp|^2 - 2 log|chi(g)|).

    Returns -inf when g p = 0.
    """
    if isinstance(g, np.ndarray):
        if np.any(problem.character != 0.0):
            raise ValueError(
                "raw matrices lose track of |chi|; pass a GroupPoint for "
                "nontrivial characters"
            )
        g = GroupPoint(g, 0.0)
    q = g.apply(p)
    n2 = float(np.sum((q * q.conj()).real))
    if n2 == 0.0:
        return float("-inf")
    return (np.log(n2) - 2.0 * g.log_abs_chi) / (4.0 * np.pi * problem.hbar)


def kn_value_potential(problem, p, g):
    """Bundle-metric Kempf-Ness value |gp|^2/2 - a log|chi(g)|."""
    if isinstance(g, np.ndarray):
        if np.any(problem.character != 0.0):
            raise ValueError(
                "raw matrices lose track of |chi|; pass a GroupPoint for "
                "nontrivial characters"
            )
        g = GroupPoint(g, 0.0)
    q = g.apply(p)
    return 0.5 * float(np.sum((q * q.conj()).real)) \
        - problem.shift_level * g.log_abs_chi


@dataclass(frozen=True)
class KnDerivatives:
    first_analytic: float
    first_fd: float
    second_analytic: float
    second_fd: float


def _ray_point(problem, p, coords, t):
    x_mat = problem.algebra_matrix(coords)
    q = kernels.expm(np.ascontiguousarray(1j * t * x_mat)) @ np.asarray(
        p, dtype=np.complex128
    )
    return q, x_mat


def kn_derivatives(problem, p, coords, t, fd_first=1e-6, fd_second=1e-3):
    """Ray derivatives of :func:`kn_value` along t -> exp(t i X).

    Analytically, with q the ray point, H = iX, and N = |q|^2:

        F'  = (1/2 pi hbar) (-Im<Xq,q>/N + theta(X))
        F'' = (1/pi hbar) (|Hq|^2 N - <Hq,q>^2) / N^2  >= 0,

    the Fubini-normalized shifted moment pairing and the squared norm of
    the generated vector field in the Fubini-normalized metric.  Both are
    also evaluated by finite differences of :func:`kn_value` (two-point
    central for the first, five-point for the second, which keeps the
    roundoff of the large linear character term out of the estimate).
    """
    coords = np.asarray(coords, dtype=float)
    q, x_mat = _ray_point(problem, p, coords, t)
    n2 = float(np.sum((q * q.conj()).real))
    if n2 == 0.0:
        raise ValueError("ray passes through the origin of C^N")
    hq = (1j * x_mat) @ q
    hqq = float(np.sum((hq * q.conj()).real))
    first = (hqq / n2 + problem.theta(coords)) / (2.0 * np.pi * problem.hbar)
    hq2 = float(np.sum((hq * hq.conj()).real))
    second = (hq2 * n2 - hqq * hqq) / (n2 * n2) / (np.pi * problem.hbar)

    def val(tt):
        qq, _ = _ray_point(problem, p, coords, tt)
        m2 = float(np.sum((qq * qq.conj()).real))
        return (np.log(m2) + 2.0 * tt * problem.theta(coords)) / (
            4.0 * np.pi * problem.hbar
        )

    first_fd = (val(t + fd_first) - val(t - fd_first)) / (2.0 * fd_first)
    d = fd_second
    second_fd = (
        -val(t + 2 * d) + 16.0 * val(t + d) - 30.0 * val(t)
        + 16.0 * val(t - d) - val(t - 2 * d)
    ) / (12.0 * d * d)
    return KnDerivatives(first, first_fd, second, second_fd)


SEMISTABLE = "semistable"
UNSTABLE = "unstable"
UNDECIDED = "undecided"

_CODE_TO_VERDICT = {
    kernels.KN_SEMISTABLE: SEMISTABLE,
    kernels.KN_UNSTABLE: UNSTABLE,
    kernels.KN_UNDECIDED: UNDECIDED,
}


@dataclass(frozen=True)
class KnState:
    """Final descent state: g = exp(iS) k with S Hermitian-positive log part."""

    s_mat: np.ndarray
    k_mat: np.ndarray
    value: float
    gradient: np.ndarray
    gradient_norm: float
    iterations: int


@dataclass(frozen=True)
class KnResult:
    verdict: str
    state: KnState
    witness: dict = field(default_factory=dict)


def _polar_split(g):
    """g = exp(iS) k with iS Hermitian (left polar decomposition).

    Prescaled so that descent endpoints with huge entries survive the
    squaring; the scale re-enters S as a -i log(c) multiple of the identity.
    """
    scale = max(1.0, float(np.abs(g).max()))
    gs = g / scale
    w, v = np.linalg.eigh(gs @ gs.conj().T)
    w = np.maximum(w, 1e-300)
    s_mat = -0.5j * ((v * np.log(w)) @ v.conj().T) \
        - 1j * np.log(scale) * np.eye(g.shape[0])
    exp_minus = (v * np.exp(-0.5 * np.log(w))) @ v.conj().T
    return s_mat, exp_minus @ gs


def kn_minimize(problem, p, tol=1e-8, max_iter=500, destab_margin=None,
                t_escape=50.0, n_restarts=3, seed=0):
    """Classify twisted affine semistability by descending the bundle-metric
    Kempf-Ness function.

    Semistable: the shifted-moment gradient drops below ``tol`` (witness:
    minimizing group point and moment residual).  Unstable: a ray is found
    whose exact asymptotic slope (eigen-decomposition of the generator
    along the ray) stays below -destab_margin past t_escape (witness: the
    destabilizing coordinate direction).  Otherwise undecided, after
    ``n_restarts`` seeded restarts.
    """
    p = np.ascontiguousarray(np.asarray(p, dtype=np.complex128))
    if p.shape != (problem.dim,):
        raise ValueError(f"point must be a vector of length {problem.dim}")
    if destab_margin is None:
        destab_margin = 1e-3 / (4.0 * np.pi * problem.hbar)
    rng = np.random.default_rng(seed)
    restarts = rng.standard_normal((n_restarts, problem.rank))
    code, iters, gn, val, g, q, clog, s_acc, witness_x = kernels.kn_descent(
        problem.generators,
        p,
        np.ascontiguousarray(problem.character),
        problem.shift_level,
        tol,
        max_iter,
        destab_margin,
        t_escape,
        np.ascontiguousarray(restarts),
    )
    verdict = _CODE_TO_VERDICT[code]
    s_mat, k_mat = _polar_split(g)
    grad = kernels._kn_moment_coords(
        problem.generators, q, np.ascontiguousarray(problem.character),
        problem.shift_level,
    )
    state = KnState(
        s_mat=s_mat,
        k_mat=k_mat,
        value=float(val),
        gradient=np.asarray(grad),
        gradient_norm=float(gn),
        iterations=int(iters),
    )
    witness = {}
    if verdict == SEMISTABLE:
        witness = {
            "group_point": g,
            "moment_residual": float(gn),
            "orbit_point": q,
        }
    elif verdict == UNSTABLE:
        witness = {
            "direction_coords": np.asarray(witness_x),
            "direction_matrix": problem.algebra_matrix(witness_x),
        }
    return KnResult(verdict=verdict, state=state, witness=witness)


# ---------------------------------------------------------------------------
# JSON interchange
# ---------------------------------------------------------------------------

def _diagonal_weights(problem):
    """Integer weight matrix (N, r) when every generator is diagonal."""
    gens = problem.generators
    for z in gens:
        if liecore.frob(z - np.diag(np.diag(z))) > 1e-14:
            return None
    w = np.stack([np.diag(z).imag for z in gens], axis=1)
    return w


def problem_to_json(problem):
    from .modulimap import matrix_to_json

    out = {
        "generators": [matrix_to_json(z) for z in problem.generators],
        "character": [float(c) for c in problem.character],
        "hbar": problem.hbar,
        "shift": problem.shift_level,
        "center": list(problem.center),
    }
    w = _diagonal_weights(problem)
    if w is not None:
        out["weights"] = [[float(v) for v in row] for row in w]
    return out


def problem_from_json(data):
    from .modulimap import matrix_from_json

    if "generators" in data:
        gens = np.stack([matrix_from_json(z) for z in data["generators"]])
        problem = LinearGitProblem(
            generators=gens,
            character=np.asarray(data["character"], dtype=float),
            hbar=float(data["hbar"]),
            center=tuple(data["center"]) if "center" in data else None,
        )
    else:
        problem = torus_problem(
            data["weights"], data["character"], float(data["hbar"])
        )
    if "shift" in data and abs(problem.shift_level - data["shift"]) > 1e-9:
        raise ValueError("inconsistent shift level: must equal 1/(2 pi hbar)")
    return problem


def result_to_json(result):
    out = {
        "verdict": result.verdict,
        "value": result.state.value,
        "gradient_norm": result.state.gradient_norm,
        "iterations": result.state.iterations,
    }
    if result.verdict == UNSTABLE:
        out["destabilizing_direction"] = [
            float(c) for c in result.witness["direction_coords"]
        ]
    if result.verdict == SEMISTABLE:
        out["moment_residual"] = result.witness["moment_residual"]
    return out
