from .ssvep import REFERENCE_BUILDERS, WindowScore, classify, sine_cosine_reference, ssvep_bench, ssvep_sweep
from .synth import (
    add_noise,
    masked,
    phantom,
    pink_noise,
    planted_cp,
    planted_tucker,
    random_mask,
    synth_ssvep,
)

__all__ = [
    "REFERENCE_BUILDERS",
    "WindowScore",
    "add_noise",
    "classify",
    "masked",
    "phantom",
    "pink_noise",
    "planted_cp",
    "planted_tucker",
    "random_mask",
    "sine_cosine_reference",
    "ssvep_bench",
    "ssvep_sweep",
    "synth_ssvep",
]
