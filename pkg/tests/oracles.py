"""Independent test oracles.

The semistability oracle enumerates monomials directly: a point with
support S is chi^m-semistable for some m >= 1 iff some monomial x^a with
supp(a) in S has weight sum equal to m * (character).  For rank <= 2
torus problems with entries bounded by 2, Caratheodory plus Cramer bound
the minimal witness at degree <= 16 and m <= 8, so enumerating to degree
16 and m <= 40 decides the family exactly.
"""

import numpy as np

MAX_DEGREE = 16
MAX_MULTIPLE = 40


def exponent_vectors(n_vars, max_degree=MAX_DEGREE):
    """All exponent tuples with total degree <= max_degree."""
    if n_vars == 0:
        return np.zeros((1, 0), dtype=int)
    out = []

    def rec(prefix, remaining):
        if len(prefix) == n_vars - 1:
            for a in range(remaining + 1):
                out.append(prefix + [a])
            return
        for a in range(remaining + 1):
            rec(prefix + [a], remaining - a)

    rec([], max_degree)
    return np.array(out, dtype=int)


_EXP_CACHE = {}


def weight_sums(support_weights):
    """Set of achievable monomial weight sums over the support."""
    k = len(support_weights)
    if k not in _EXP_CACHE:
        _EXP_CACHE[k] = exponent_vectors(k)
    if k == 0:
        return {(0,) * 0}
    sums = _EXP_CACHE[k] @ np.asarray(support_weights, dtype=int)
    return set(map(tuple, sums))


def torus_semistable(support_weights, character, sums=None):
    """Exact twisted semistability of a torus point with the given support."""
    n = np.asarray(character, dtype=int)
    if not n.any():
        return True  # the constant monomial is chi^m-invariant
    if len(support_weights) == 0:
        return False
    if sums is None:
        sums = weight_sums(support_weights)
    return any(tuple(m * n) in sums for m in range(1, MAX_MULTIPLE + 1))


def su2_closed_form(ts):
    """P(t) = T / (t + 1) for the standard basis initial triple."""
    from nahmkn import liecore

    t = liecore.su2_basis()
    return t[None, :, :, :] / (np.asarray(ts)[:, None, None, None] + 1.0)
