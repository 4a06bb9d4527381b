"""Potential-route versus field-overlap-route interaction Lagrangians.

Submodules: ``emcore`` (units, vectors, field tensor, boosts), ``sources``
(closed-form fields and potentials), ``quad3d`` (adaptive volume
quadrature), ``lagrangian`` (both interaction Lagrangians, boundary term,
electromagnetic mass, bilinearity), ``ab_engine`` (two-path phases),
``scenario``/``experiments``/``cli`` (files, commands, front end) and
``suite`` (acceptance battery).
"""

__version__ = "0.1.0"
