"""Vision-aided inertial observer and tracking controller for a VTOL vehicle on SE_2(3)."""

__version__ = "0.1.0"
