"""Loss characterisation of superconducting niobium cavities.

Subpackages and modules:

- ``loss_models``: TLS loss, frequency shift and Q/R_s/tau conversions
- ``fitting``: bounded Levenberg-Marquardt engine and named-model fits
- ``resonance``: S11 circle-fit extraction of Q_int, Q_ext, f_r
- ``ringdown``: decay fits, lifetime budget and photon-number calibration
- ``xps``: Nb 3d doublet deconvolution and oxide composition
- ``campaign``, ``fileio``, ``synth``, ``cli``: records, I/O, synthetic data, CLI
"""
from .errors import (CavcharError, DomainError, FitError, ParseError, ValidationError)

__version__ = "0.1.0"

__all__ = ["CavcharError", "DomainError", "FitError", "ParseError", "ValidationError",
           "__version__"]
