"""rbdf: spectral Rayleigh-Benard lab with velocity-nudged assimilation.

Subpackages cover the field algebra (``spectral``, ``bilinear``), time
integration (``solver``), observation operators (``interpolants``), the
nudged auxiliary system (``nudging``), trajectory-space machinery
(``determining``), the sufficient-condition audit (``audit``) and
persistence plus the command line (``config``, ``snapshots``, ``cli``).
"""

from .kernels import BACKEND as kernel_backend

__version__ = "0.1.0"

__all__ = ["kernel_backend", "__version__"]
