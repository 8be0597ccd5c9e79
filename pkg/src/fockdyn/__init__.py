"""Second-quantized dynamics on truncated q-Fock spaces.

Classical Koopman systems, their deformed one-body spaces, q-Fock truncations,
ergodic diagnostics for the second-quantized dynamics and the q-Fock
isomorphism pipeline.
"""

from fockdyn.classical import (
    Fourier,
    Interval,
    ShiftCell,
    SparseModeVector,
    Torus,
    catmap_koopman,
    chacon_koopman,
    rotation_koopman,
    shift_koopman,
)
from fockdyn.dynamics import DiagnosticReport, VectorState, WickPolynomial, diagnostic_run
from fockdyn.errors import BudgetExceeded, ConfigError, FockdynError, SliceError
from fockdyn.onebody import DeformationGroup, DeformedVector, OneBodySpace, build_onebody
from fockdyn.qfock import FockTruncation, qgram

__version__ = "0.1.0"
