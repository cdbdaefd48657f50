"""se3kit: SE(3) geometric computing with executable symmetry checks.

Modules:
  * ``liegroup``  - SO(3)/SE(3) types, exp/log, Adjoints, forward kinematics;
  * ``harmonics`` - real spherical harmonics, Wigner-D, Clebsch-Gordan;
  * ``steerable`` - steerable kernels, equivariant convolution, the
    aligned-axis fast tensor product, attention, residual reports;
  * ``gcnn``      - discrete left-regular action and SE(2) group correlations;
  * ``gic``       - geometric impedance control laws and certificates;
  * ``plant``     - manipulator dynamics, RK4, closed-loop instrumentation;
  * ``gimdp``     - group-invariant tabular MDP demos;
  * ``cli``       - the ``se3kit`` command.

Environment: ``SE3KIT_NUMBA=0`` selects the pure-numpy kernel fallback;
``SE3KIT_THREADS`` caps the compiled backend's thread pool.
"""

from .backend import BACKEND

__all__ = ["BACKEND"]
__version__ = "0.1.0"
