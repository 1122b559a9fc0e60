"""Target alphabet: flicker (frequency, phase) grid crossed with fixation points.

A codebook assigns every flicker index ``k`` a frequency ``base + k*step`` and
a phase ``(base + k*step) mod 2*pi``, and crosses the flicker grid with a set
of fixation points to form the target alphabet. Numeric labels are 1-based,
flicker-major, fixation-minor.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field

TWO_PI = 2.0 * math.pi


class Fixation(enum.Enum):
    """Fixation-point positions, in canonical display order."""

    RIGHT = "right"
    DOWN = "down"
    LEFT = "left"
    UP = "up"
    CENTER = "center"

    @property
    def rank(self) -> int:
        return FIXATION_ORDER.index(self)

    @classmethod
    def parse(cls, value: "Fixation | str") -> "Fixation":
        if isinstance(value, Fixation):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown fixation point: {value!r}") from None


FIXATION_ORDER = (
    Fixation.RIGHT,
    Fixation.DOWN,
    Fixation.LEFT,
    Fixation.UP,
    Fixation.CENTER,
)


@dataclass(frozen=True)
class TargetLabel:
    """One selectable target: a flicker index paired with a fixation point."""

    flicker_index: int
    fixation: Fixation
    numeric_label: int


@dataclass(frozen=True)
class StimulusCodebook:
    """Flicker grid parameters plus the active fixation points.

    ``ordering`` controls how flicker indices map onto grid positions:
    ``"column-major"`` counts top-to-bottom within a column, then across
    columns left to right; ``"row-major"`` is the transpose convention.
    The frequency/phase progression depends only on the flicker index.
    """

    rows: int = 5
    cols: int = 8
    base_frequency: float = 8.0
    frequency_step: float = 0.2
    base_phase: float = 0.0
    phase_step: float = 0.35 * math.pi
    fixation_points: tuple[Fixation, ...] = (Fixation.CENTER,)
    refresh_rate: float = 240.0
    ordering: str = "column-major"

    def __post_init__(self):
        if self.rows * self.cols < 1:
            raise ValueError("codebook needs at least one flicker")
        if self.frequency_step <= 0:
            raise ValueError("frequency_step must be positive")
        if not self.fixation_points:
            raise ValueError("at least one fixation point is required")
        if len(set(self.fixation_points)) != len(self.fixation_points):
            raise ValueError("duplicate fixation points")
        if self.ordering not in ("column-major", "row-major"):
            raise ValueError(f"unknown ordering: {self.ordering!r}")
        if self.base_frequency <= 0:
            raise ValueError("all flicker frequencies must be positive")

    @property
    def n_flickers(self) -> int:
        return self.rows * self.cols

    @property
    def n_fixations(self) -> int:
        return len(self.fixation_points)

    @property
    def n_targets(self) -> int:
        return self.n_flickers * self.n_fixations

    def frequency(self, flicker_index: int) -> float:
        self._check_flicker(flicker_index)
        return self.base_frequency + flicker_index * self.frequency_step

    def phase(self, flicker_index: int) -> float:
        self._check_flicker(flicker_index)
        return (self.base_phase + flicker_index * self.phase_step) % TWO_PI

    def frequencies(self) -> list[float]:
        return [self.frequency(k) for k in range(self.n_flickers)]

    def grid_position(self, flicker_index: int) -> tuple[int, int]:
        """(row, col) of a flicker in the on-screen grid."""
        self._check_flicker(flicker_index)
        if self.ordering == "column-major":
            return flicker_index % self.rows, flicker_index // self.rows
        return flicker_index // self.cols, flicker_index % self.cols

    def fixation_rank(self, fixation: Fixation) -> int:
        """Position of a fixation point within this codebook's active set."""
        fixation = Fixation.parse(fixation)
        try:
            return self.fixation_points.index(fixation)
        except ValueError:
            raise ValueError(f"{fixation.value!r} is not active in this codebook") from None

    def label_for(self, flicker_index: int, fixation: Fixation) -> TargetLabel:
        self._check_flicker(flicker_index)
        rank = self.fixation_rank(fixation)
        numeric = flicker_index * self.n_fixations + rank + 1
        return TargetLabel(flicker_index, Fixation.parse(fixation), numeric)

    def target_from_numeric(self, numeric_label: int) -> TargetLabel:
        if not 1 <= numeric_label <= self.n_targets:
            raise ValueError(f"numeric label {numeric_label} outside 1..{self.n_targets}")
        idx = numeric_label - 1
        flicker, rank = divmod(idx, self.n_fixations)
        return TargetLabel(flicker, self.fixation_points[rank], numeric_label)

    def targets(self) -> list[TargetLabel]:
        """All targets in numeric-label order."""
        return [
            self.label_for(k, fix)
            for k in range(self.n_flickers)
            for fix in self.fixation_points
        ]

    def _check_flicker(self, flicker_index: int) -> None:
        if not 0 <= flicker_index < self.n_flickers:
            raise ValueError(f"flicker index {flicker_index} outside 0..{self.n_flickers - 1}")

    def to_dict(self) -> dict:
        return {
            "rows": self.rows,
            "cols": self.cols,
            "base_frequency": self.base_frequency,
            "frequency_step": self.frequency_step,
            "base_phase": self.base_phase,
            "phase_step": self.phase_step,
            "fixation_points": [f.value for f in self.fixation_points],
            "refresh_rate": self.refresh_rate,
            "ordering": self.ordering,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "StimulusCodebook":
        d = dict(d)
        d["fixation_points"] = tuple(Fixation.parse(f) for f in d.get("fixation_points", ["center"]))
        return cls(**d)


def build_codebook(
    rows: int = 5,
    cols: int = 8,
    base_frequency: float = 8.0,
    frequency_step: float = 0.2,
    base_phase: float = 0.0,
    phase_step: float = 0.35 * math.pi,
    fixation_points=("center",),
    refresh_rate: float = 240.0,
    ordering: str = "column-major",
) -> StimulusCodebook:
    """Construct a codebook; fixation points may be given as strings."""
    fixations = tuple(Fixation.parse(f) for f in fixation_points)
    return StimulusCodebook(
        rows=rows,
        cols=cols,
        base_frequency=base_frequency,
        frequency_step=frequency_step,
        base_phase=base_phase,
        phase_step=phase_step,
        fixation_points=fixations,
        refresh_rate=refresh_rate,
        ordering=ordering,
    )


def enumerate_fixation_combinations(n_points: int) -> list[tuple[Fixation, ...]]:
    """All size-``n_points`` fixation subsets, in combination-label order.

    Labels are 1-based row numbers. Sizes 1, 2, 4, and 5 enumerate in
    lexicographic order over the canonical fixation ranks; size 3 enumerates
    in reverse-lexicographic order (equivalently, row k is the complement of
    the size-2 subset at row k).
    """
    if not 1 <= n_points <= 5:
        raise ValueError("n_points must be between 1 and 5")
    combos = list(itertools.combinations(FIXATION_ORDER, n_points))
    if n_points == 3:
        combos.reverse()
    return combos


def luminance_at_frame(
    frame_index: int, refresh_rate: float, frequency: float, phase: float
) -> float:
    """Frame luminance of a sampled-sinusoid flicker, in [0, 1]."""
    if refresh_rate <= 0:
        raise ValueError("refresh_rate must be positive")
    if refresh_rate <= 2 * frequency:
        raise ValueError("refresh_rate must exceed twice the flicker frequency")
    arg = TWO_PI * frequency * frame_index / refresh_rate + phase
    return 0.5 * (1.0 + math.sin(arg))
