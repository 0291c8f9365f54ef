"""Backend dispatch for the hot kernels.

The compiled Cython extension is used when present; set SOFTGAMES_FORCE_PURE=1
to force the pure-Python fallback (used by the benchmark and equivalence
tests). Both backends implement identical math and share the splitmix64 RNG.
"""

import os

from . import pure

HAVE_COMPILED = False
if os.environ.get("SOFTGAMES_FORCE_PURE", "") != "1":
    try:
        from . import _core  # type: ignore[attr-defined]

        HAVE_COMPILED = True
    except ImportError:
        pass

_impl = _core if HAVE_COMPILED else pure  # type: ignore[name-defined]

BACKEND = "compiled" if HAVE_COMPILED else "pure"
BETA_ZERO_THRESHOLD = pure.BETA_ZERO_THRESHOLD
BETA_HAT_BOUND = pure.BETA_HAT_BOUND

lse_beta = _impl.lse_beta
softmax_weighted = _impl.softmax_weighted
run_tabular_loop = _impl.run_tabular_loop

__all__ = [
    "BACKEND",
    "BETA_ZERO_THRESHOLD",
    "BETA_HAT_BOUND",
    "HAVE_COMPILED",
    "lse_beta",
    "softmax_weighted",
    "run_tabular_loop",
    "pure",
]
