"""Dynamic operation counters used to cross-check the static complexity model."""
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Iterator, Optional


@dataclass
class OpCounter:
    """Running tally of additions and multiplications.

    Comparisons (pooling, ReLU, firing thresholds) are tallied as additions. Counts of
    convolution and fully connected layers are also kept per layer index while a
    ``layer`` scope is active.
    """

    adds: int = 0
    muls: int = 0
    per_layer: dict[int, dict[str, int]] = field(default_factory=dict)
    _current: Optional[int] = field(default=None, repr=False)

    @contextmanager
    def layer(self, layer_index: int) -> Iterator["OpCounter"]:
        previous, self._current = self._current, layer_index
        try:
            yield self
        finally:
            self._current = previous

    def record(self, adds: int = 0, muls: int = 0, per_layer: bool = False):
        self.adds += int(adds)
        self.muls += int(muls)
        if per_layer and self._current is not None:
            entry = self.per_layer.setdefault(self._current, {"adds": 0, "muls": 0})
            entry["adds"] += int(adds)
            entry["muls"] += int(muls)
