"""Numerical laboratory for frequency-function asymptotics of singular elliptic equations.

The pipeline runs spectrum on the sphere, then the radial-Fourier solve,
then the frequency profile, then leading-term extraction, then perturbation
envelopes and the Pohozaev balance.
"""

__version__ = "0.1.0"

from .errors import (  # noqa: F401
    AccuracyWarning,
    AlmgrenLabError,
    ConfigError,
    NoLimitDetected,
    Nonconvergence,
    PositivityViolation,
    TailWarning,
)
