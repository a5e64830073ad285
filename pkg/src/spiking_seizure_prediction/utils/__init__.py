from .errors import (
    SpikingSeizureError,
    ConfigError,
    InputError,
    StructuralError,
    CalibrationError,
    FormatError,
    UnsupportedVersionError,
    UnsupportedFeatureError,
    DivergenceError,
)
from .utils import Label, atomic_write, derive_seed, load_default_config, load_config, resolve_seed
