"""2D fatigue cohesive-zone / XFEM solver for layered composites.

Library + CLI for simulating high-cycle fatigue crack initiation and
propagation with a mixed-mode cohesive law, implicit cycle integration,
phantom-node matrix cracking and adaptive cycle jumping.

Units throughout: N, mm, MPa (N/mm^2), cycles.
"""

__version__ = "0.1.0"
