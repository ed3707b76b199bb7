"""Ricci-flat Kahler metrics with cone singularities along affine curves in C^2.

Modules, in pipeline order: ``curve_geometry``, ``cp1_cone_metrics``,
``flat_cone_metric``, ``link_spectrum``, ``weighted_analysis``,
``monge_ampere`` (with ``gibbons_hawking``), ``curvature_energy`` and ``cli``.
"""

__version__ = "0.1.0"
