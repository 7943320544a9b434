"""Exact-arithmetic verification engine for singularity confinement of the
Toeplitz-lattice recursion relations.

Pipeline stages (one module each):

* :mod:`.exact`   — rationals, sparse multivariate polynomials, rational functions
* :mod:`.series`  — truncated formal Laurent series with honest truncation
* :mod:`.lax`     — lattice windows, banded Lax matrices, trace invariants
* :mod:`.gamma`   — the recursion polynomials and the forward recursion step
* :mod:`.flow`    — the first Toeplitz flow and its principal-balance solver
* :mod:`.confine` — tangency, parameter restriction, confined solutions
* :mod:`.verify`  — independent forward-iteration oracles and reports
* :mod:`.cli`     — command-line front end
"""

__version__ = "0.1.0"
