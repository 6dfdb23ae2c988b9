"""Lie point symmetries of linear parabolic PDEs ``u_t = a u_xx + b u_x + c u``.

Modules
-------
exprdsl      coefficient expressions: parsing, differentiation, evaluation
numerics     quadrature and ODE wrappers with explicit tolerances
invariants   the invariants ``I``, ``J``, ``K`` of a coefficient set
classify     six-, four- or zero-extra-dimensional symmetry class
canonical    point transformations to the heat equation or ``v_yy + mu v/y^2``
generators   symmetry vector fields and their commutator table
driftdesign  drifts that give a prescribed symmetry class
catalogue    closed-form fundamental solutions
verify       residual, evolution and mass checks
cli          command-line front end
"""

__version__ = "0.1.0"
