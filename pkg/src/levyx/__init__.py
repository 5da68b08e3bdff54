"""levyx: simulation and distributional verification for real Levy processes.

Subpackages follow the pipeline: ``levy_model`` (characteristic triplets),
``simulate`` (grid paths with exact jump records), ``path_algebra``
(deterministic operators), ``fluctuation_theory`` (excursions, local times,
ladders), ``conditioned_process`` (the process conditioned to stay
positive), and ``verify_harness`` (the experiment engine and CLI).
"""

__version__ = "0.1.0"

from . import (conditioned_process, fluctuation_theory, levy_model,
               path_algebra, simulate, verify_harness)

__all__ = ["levy_model", "simulate", "path_algebra", "fluctuation_theory",
           "conditioned_process", "verify_harness", "__version__"]
