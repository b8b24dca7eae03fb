"""linwave: spectral toolkit for linearised gravitational waves.

Library layers: fields (truncated Fourier / invariant sections), slices and
spacetime backgrounds, constraints (Phi and its linearisation), the
generalized TT decomposition, per-mode Cauchy evolution with diagnostics,
and snapshot/config/CLI plumbing.
"""

__version__ = "0.1.0"
