"""nahmkn: Nahm-equation moduli coordinates, Kempf-Ness semistability, and
growth-estimate verification for the cotangent bundle of a complexified
compact group.

Subpackages by concern:

- :mod:`nahmkn.liecore`: SU(n)/SL(n,C) matrix numerics (bracket, exp, log,
  adjoint, invariant inner product).
- :mod:`nahmkn.nahmflow`: the reduced and full flows on [0,1], gauge fixing,
  flow-domain membership.
- :mod:`nahmkn.modulimap`: the chart to G x g, its derivative and Newton
  inverse, the potential, hyperkahler/complex moment maps.
- :mod:`nahmkn.kempfness`: Kempf-Ness functions, shifted moment maps, the
  semistability classifier.
- :mod:`nahmkn.counterexample`: the circle-invariant radial potential with an
  empty shifted quotient.
- :mod:`nahmkn.estimates`: growth / properness / domination scans.
- :mod:`nahmkn.cli`: the ``nahmkn`` command-line entry point.

Hot kernels are numba-compiled; set ``NAHMKN_PURE_NUMPY=1`` before import to
run the same code paths interpreted.
"""

from .backend import USING_NUMBA, backend_name

__version__ = "0.1.0"

__all__ = ["USING_NUMBA", "backend_name", "__version__"]
