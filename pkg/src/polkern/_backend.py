"""Select the compiled kernel module, falling back to pure numpy.

Set ``POLKERN_PURE_PYTHON=1`` to force the fallback.
"""

import logging
import os

log = logging.getLogger(__name__)

if os.environ.get("POLKERN_PURE_PYTHON", "").strip() not in ("", "0"):
    from . import _fallback as impl

    NAME = "python"
else:
    try:
        from . import _core as impl

        NAME = "cython"
    except ImportError:  # extension not built
        log.debug("polkern._core unavailable, using numpy fallback")
        from . import _fallback as impl

        NAME = "python"

pairwise_distances = impl.pairwise_distances
smo = impl.smo

STATUS_OK, STATUS_SINGULAR, STATUS_OVERFLOW = 0, 1, 2
