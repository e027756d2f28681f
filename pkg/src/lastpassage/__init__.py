"""Last-passage weights on the integer line with i.i.d. edge weights.

Modules: :mod:`weights` (edge laws), :mod:`lpp` (windows and dynamic
programming), :mod:`regeneration` (skeleton and renewal vertices, cycles),
:mod:`crp` (compound renewal process quantities), :mod:`harness`
(experiments) and :mod:`io_config` (configuration and result files).
"""

from .weights import NEG_INF, WeightModel, validate_model

__version__ = "0.1.0"
__all__ = ["NEG_INF", "WeightModel", "validate_model", "__version__"]
