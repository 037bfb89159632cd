"""
nsac.utils
~~~~~~~~~~

Sparse operators and solvers, quadrature tables, the snapshot format and the one dimensional
front reference.

:license: MIT
"""
