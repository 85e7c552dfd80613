"""Publication-bias adjustment for continuous-outcome meta-analysis.

Estimators: fixed-effects and DerSimonian-Laird pooling, the Copas-Shi
selection model, p-uniform, PET-PEESE, Trim & Fill and limit meta-analysis;
plus a Monte Carlo engine with a significance-based selection model and a
metrics layer (AMSE, bias, coverage, power) for comparing the methods.

Hot numeric kernels live in a compiled extension with a pure-Python twin
selected at import time; ``metabias.core_backend()`` reports which lane is
active.
"""

from ._core import backend_name as core_backend
from .copas import (CopasGridPoint, copas_adjust, copas_fit_grid,
                    copas_loglik, copas_select, default_grid)
from .effects import (EffectEstimate, StudySummary, cohens_d, hedges_g,
                      pooled_sd)
from .limitmeta import LimitMetaResult, limit_meta
from .metrics import ScenarioMetrics, aggregate
from .petpeese import PetPeeseResult, pet, pet_peese
from .pooling import METHODS, MetaResult, dl_random_effects, fixed_effects
from .puniform import PUniformResult, conditional_p, p_uniform
from .simulate import (GeneratedStudy, MetaSample, SimConfig, apply_selection,
                       calibrate_pi_pub, generate_meta, generate_study,
                       replicate_stream, true_smd)
from .trimfill import TrimFillResult, estimate_l0, trim_and_fill

__version__ = "0.1.0"

__all__ = [
    "CopasGridPoint", "EffectEstimate", "GeneratedStudy", "LimitMetaResult",
    "MetaResult", "MetaSample", "METHODS", "PUniformResult",
    "PetPeeseResult", "ScenarioMetrics", "SimConfig", "StudySummary",
    "TrimFillResult", "aggregate", "apply_selection", "calibrate_pi_pub",
    "cohens_d", "conditional_p", "copas_adjust", "copas_fit_grid",
    "copas_loglik", "copas_select", "core_backend", "default_grid",
    "dl_random_effects", "estimate_l0", "fixed_effects", "generate_meta",
    "generate_study", "hedges_g", "limit_meta", "p_uniform", "pet",
    "pet_peese", "pooled_sd", "replicate_stream", "trim_and_fill",
    "true_smd", "__version__",
]
