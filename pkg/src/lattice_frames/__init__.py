"""Difference and differential-difference variational calculus with moving frames.

Expression trees over lattice field variables, shift/difference operator
algebra with formal adjoints, Lie group actions, moving frames and
invariantization, invariant Euler-Lagrange equations, and equivariant
Noether conservation laws, all validated by seeded numeric identity
checking and on-shell integration.

The usual entry points:

>>> from lattice_frames.catalog import get_example
>>> from lattice_frames.suites import run_suite
>>> bundle = get_example("toda")
>>> reports = run_suite(bundle, "syzygy", bundle.plan())
>>> all(r.passed for r in reports)
True
"""

__version__ = "0.1.0"
