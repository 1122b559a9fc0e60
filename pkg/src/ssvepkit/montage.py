"""Electrode montages: ordered channel names, scalp coordinates, named subsets.

Coordinates are unitless 2-D scalp positions (x toward the right ear,
y toward the front), used by the synthetic forward model's spatial gain
profiles and by reporting. Subsets are declared as name lists and must be
subsequences of the master channel order, so nested configurations like
64-9 within 64-21 within 128-32 within 256-66 stay consistent.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidManifestError


@dataclass(frozen=True)
class Channel:
    name: str
    x: float
    y: float


@dataclass(frozen=True)
class Montage:
    channels: tuple[Channel, ...]
    subsets: dict[str, tuple[str, ...]] = field(default_factory=dict)

    def __post_init__(self):
        names = [ch.name for ch in self.channels]
        if len(set(names)) != len(names):
            raise InvalidManifestError("duplicate channel names in montage")
        order = {name: i for i, name in enumerate(names)}
        for subset_name, members in self.subsets.items():
            unknown = [m for m in members if m not in order]
            if unknown:
                raise InvalidManifestError(
                    f"subset {subset_name!r} references unknown channels: {unknown}"
                )
            ranks = [order[m] for m in members]
            if ranks != sorted(ranks):
                raise InvalidManifestError(
                    f"subset {subset_name!r} is not in master channel order"
                )
            if len(set(members)) != len(members):
                raise InvalidManifestError(f"subset {subset_name!r} has duplicates")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(ch.name for ch in self.channels)

    @property
    def n_channels(self) -> int:
        return len(self.channels)

    def index_of(self, name: str) -> int:
        for i, ch in enumerate(self.channels):
            if ch.name == name:
                return i
        raise KeyError(f"channel {name!r} not in montage")

    def subset_names(self, subset: str) -> tuple[str, ...]:
        try:
            return self.subsets[subset]
        except KeyError:
            raise KeyError(f"subset {subset!r} not defined in montage") from None

    def subset_indices(self, subset: str) -> list[int]:
        return [self.index_of(n) for n in self.subset_names(subset)]

    def restrict(self, names) -> "Montage":
        """Montage containing only the listed channels, keeping subsets that survive."""
        keep = list(names)
        order = {ch.name: i for i, ch in enumerate(self.channels)}
        missing = [n for n in keep if n not in order]
        if missing:
            raise KeyError(f"channels not in montage: {missing}")
        keep_set = set(keep)
        channels = tuple(ch for ch in self.channels if ch.name in keep_set)
        subsets = {
            sub: members
            for sub, members in self.subsets.items()
            if all(m in keep_set for m in members)
        }
        return Montage(channels=channels, subsets=subsets)

    def coordinates(self) -> np.ndarray:
        return np.array([[ch.x, ch.y] for ch in self.channels], dtype=float)

    def to_dict(self) -> dict:
        return {
            "channels": [{"name": ch.name, "x": ch.x, "y": ch.y} for ch in self.channels],
            "subsets": {k: list(v) for k, v in self.subsets.items()},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Montage":
        try:
            channels = tuple(
                Channel(str(c["name"]), float(c["x"]), float(c["y"])) for c in d["channels"]
            )
        except (KeyError, TypeError) as exc:
            raise InvalidManifestError(f"malformed montage channels: {exc}") from exc
        subsets = {str(k): tuple(str(n) for n in v) for k, v in d.get("subsets", {}).items()}
        return cls(channels=channels, subsets=subsets)


# Parieto-occipital grid used by the default synthetic montage. Rows run
# front (positive y) to back, 11 columns left (negative x) to right.
_ROW_PREFIXES = (("CPP", 0.55), ("P", 0.33), ("PPO", 0.11), ("PO", -0.11), ("POO", -0.33), ("O", -0.55))
_COL_SUFFIXES = ("9", "7", "5", "3", "1", "z", "2", "4", "6", "8", "10")


def _row_names(prefix: str) -> list[str]:
    return [prefix + s for s in _COL_SUFFIXES]


def _mid(names: list[str], width: int) -> list[str]:
    lo = (len(names) - width) // 2
    return names[lo : lo + width]


def default_montage() -> Montage:
    """66-channel parieto-occipital montage with the four nested subsets.

    Channel density mirrors progressively denser caps over the same scalp
    region: "64-9" and "64-21" are the classic 9- and 21-channel
    parieto-occipital sets, "128-32" a denser grid, "256-66" everything.
    """
    channels = []
    for prefix, y in _ROW_PREFIXES:
        for c, suffix in enumerate(_COL_SUFFIXES):
            channels.append(Channel(prefix + suffix, -1.0 + 0.2 * c, y))

    nine = ["Pz", "PO5", "PO3", "POz", "PO4", "PO6", "O1", "Oz", "O2"]
    # 64-21: 9 P channels, 7 PO channels (no PO1/PO2 on a 64-channel cap),
    # the two innermost POO channels, and O1/Oz/O2.
    po7 = [n for n in _mid(_row_names("PO"), 9) if n not in ("PO1", "PO2")]
    twenty_one = _mid(_row_names("P"), 9) + po7 + ["POO1", "POO2", "O1", "Oz", "O2"]
    thirty_two = (
        _row_names("P")
        + _mid(_row_names("PO"), 9)
        + _mid(_row_names("POO"), 9)
        + ["O1", "Oz", "O2"]
    )
    sixty_six = [ch.name for ch in channels]

    subsets = {
        "64-9": _subsequence(sixty_six, nine),
        "64-21": _subsequence(sixty_six, twenty_one),
        "128-32": _subsequence(sixty_six, thirty_two),
        "256-66": tuple(sixty_six),
    }
    return Montage(channels=tuple(channels), subsets=subsets)


def _subsequence(master: list[str], members: list[str]) -> tuple[str, ...]:
    order = {name: i for i, name in enumerate(master)}
    return tuple(sorted(members, key=order.__getitem__))


def save_montage(montage: Montage, path) -> None:
    Path(path).write_text(json.dumps(montage.to_dict(), indent=2))


def load_montage(path) -> Montage:
    return Montage.from_dict(json.loads(Path(path).read_text()))
