"""Utility functions shared across the pipeline."""
import os
import tempfile
from contextlib import contextmanager
from enum import IntEnum
from pathlib import Path
from typing import Iterator, Optional

import numpy as np
from neuroconv.utils import load_dict_from_file, dict_deep_update

DEFAULT_CONFIG_PATH = Path(__file__).parent.parent / "default_config.yaml"
SEED_ENVIRONMENT_VARIABLE = "SPIKING_SEIZURE_SEED"


class Label(IntEnum):
    """Class index of an output neuron, a logit column and a window label."""

    INTERICTAL = 0
    PREICTAL = 1


def derive_seed(seed: int, *keys: int) -> int:
    """Derive a 64-bit child seed from a base seed and integer keys (e.g. a sample index)."""
    sequence = np.random.SeedSequence([int(seed), *[int(key) for key in keys]])
    return int(sequence.generate_state(1, dtype=np.uint64)[0])


def resolve_seed(seed: Optional[int]) -> Optional[int]:
    """Return the seed from the environment override when set, else ``seed``."""
    value = os.environ.get(SEED_ENVIRONMENT_VARIABLE)
    if value is None or value.strip() == "":
        return seed
    return int(value)


def load_default_config() -> dict:
    """Load the built-in defaults shipped with the package."""
    return load_dict_from_file(DEFAULT_CONFIG_PATH)


def load_config(file_path: Optional[str | Path] = None) -> dict:
    """Load the built-in defaults and deep-update them with a user YAML/JSON file.

    Parameters
    ----------
    file_path : str | Path, optional
        User configuration file. Keys missing from it keep their built-in values; lists replace the built-in lists.

    Returns
    -------
    dict
        The merged configuration.
    """
    config = load_default_config()
    if file_path is not None:
        user_config = load_dict_from_file(Path(file_path))
        # lists such as network.channels or synth.seizures replace the defaults
        config = dict_deep_update(config, user_config, append_list=False)
    return config


@contextmanager
def atomic_write(file_path: str | Path, mode: str = "wb") -> Iterator:
    """Open a temporary sibling of ``file_path`` and rename it over the target on success."""
    file_path = Path(file_path)
    file_path.parent.mkdir(parents=True, exist_ok=True)
    fd, temp_path = tempfile.mkstemp(dir=file_path.parent, prefix=f".{file_path.name}.", suffix=".tmp")
    try:
        newline = None if "b" in mode else ""
        with os.fdopen(fd, mode, **({} if "b" in mode else {"encoding": "utf-8", "newline": newline})) as f:
            yield f
        os.replace(temp_path, file_path)
    except BaseException:
        if os.path.exists(temp_path):
            os.remove(temp_path)
        raise
