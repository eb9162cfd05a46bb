"""Variable-length pilots and the shifted-block sensing dictionary.

Every UE ``k`` owns a pilot ``x_k`` of length ``T_k <= W``.  The dictionary
stacks, for each UE in turn, the ``W - T_k + 1`` legal placements of its
pilot inside the window as zero-padded columns, so a received window is
``Z = D @ G + noise`` with ``G`` row-sparse (one nonzero row per active UE).

Indexing: UE indices and dictionary columns are 0-based throughout the
Python API.  :func:`block_range` is the one exception; it reproduces the
closed 1-based column interval used in the detector's derivation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PilotSet:
    """Per-UE pilots inside a transmission window of ``window`` symbols."""

    window: int
    pilots: tuple[np.ndarray, ...]

    def __post_init__(self):
        if self.window < 1:
            raise ValueError("window must be positive")
        for k, x in enumerate(self.pilots):
            if not 1 <= len(x) <= self.window:
                raise ValueError(f"pilot {k} has length {len(x)} outside [1, {self.window}]")

    @property
    def num_ues(self) -> int:
        return len(self.pilots)

    @property
    def lengths(self) -> np.ndarray:
        return np.array([len(x) for x in self.pilots], dtype=int)


def build_pilots(num_ues, window, length_range=(20, 24), rng=None) -> PilotSet:
    """Draw i.i.d. complex Gaussian pilots normalized to unit sequence energy.

    Lengths are uniform on the closed integer range ``length_range``.
    """
    rng = np.random.default_rng(rng)
    lo, hi = length_range
    if hi < lo:
        raise ValueError(f"empty pilot length range {length_range}")
    if lo < 1 or hi > window:
        raise ValueError(f"pilot lengths {length_range} must lie in [1, {window}]")
    lengths = rng.integers(lo, hi + 1, size=num_ues)
    pilots = []
    for t in lengths:
        x = (rng.standard_normal(t) + 1j * rng.standard_normal(t)) / np.sqrt(2)
        pilots.append(x / np.linalg.norm(x))
    return PilotSet(window=int(window), pilots=tuple(pilots))


def num_columns(pilot_lengths, window) -> int:
    """``M = (W + 1) N - sum(T_k)``."""
    lengths = np.asarray(pilot_lengths)
    return int((window + 1) * lengths.size - lengths.sum())


def block_range(k, pilot_lengths, window) -> tuple[int, int]:
    """Closed 1-based column interval of UE ``k`` (also 1-based).

    >>> block_range(2, [3, 4, 5], 5)
    (4, 5)
    """
    lengths = np.asarray(pilot_lengths)
    if not 1 <= k <= lengths.size:
        raise ValueError(f"UE index {k} outside [1, {lengths.size}]")
    start = (window + 1) * (k - 1) - int(lengths[: k - 1].sum()) + 1
    end = (window + 1) * k - int(lengths[:k].sum())
    return start, end


@dataclass(frozen=True)
class Dictionary:
    """Dense ``W x M`` dictionary with per-UE column blocks.

    ``block_starts[k]:block_stops[k]`` is the 0-based half-open column slice
    of UE ``k``; column ``block_starts[k] + s - 1`` is the pilot starting at
    symbol ``s`` (1-based).
    """

    matrix: np.ndarray
    block_starts: np.ndarray
    block_stops: np.ndarray
    pilot_lengths: np.ndarray

    @property
    def window(self) -> int:
        return self.matrix.shape[0]

    @property
    def num_columns(self) -> int:
        return self.matrix.shape[1]

    @property
    def num_ues(self) -> int:
        return self.block_starts.size

    @property
    def block_widths(self) -> np.ndarray:
        return self.block_stops - self.block_starts

    @property
    def column_owner(self) -> np.ndarray:
        """UE index owning each column, shape ``(M,)``."""
        return np.repeat(np.arange(self.num_ues), self.block_widths)

    def block(self, k) -> slice:
        return slice(int(self.block_starts[k]), int(self.block_stops[k]))

    def row_of(self, ue, offset):
        """Column/row index (0-based) of ``ue`` transmitting from 1-based ``offset``."""
        return self.block_starts[ue] + np.asarray(offset) - 1


def build_dictionary(pilots: PilotSet) -> Dictionary:
    W = pilots.window
    lengths = pilots.lengths
    widths = W - lengths + 1
    stops = np.cumsum(widths)
    starts = stops - widths
    D = np.zeros((W, int(stops[-1]) if stops.size else 0), dtype=complex)
    for k, x in enumerate(pilots.pilots):
        for s in range(widths[k]):
            D[s : s + lengths[k], starts[k] + s] = x
    return Dictionary(matrix=D, block_starts=starts, block_stops=stops, pilot_lengths=lengths)


def dump_dictionary(dictionary: Dictionary, path) -> None:
    """Write ``D`` and its block ranges as text, for debugging only.

    One line per UE block (``k start end``, 1-based closed), then ``W`` rows
    of ``M`` ``re,im`` pairs in row-major order.
    """
    with open(path, "w") as f:
        f.write(f"# W={dictionary.window} M={dictionary.num_columns} N={dictionary.num_ues}\n")
        for k in range(dictionary.num_ues):
            f.write(f"block {k + 1} {dictionary.block_starts[k] + 1} {dictionary.block_stops[k]}\n")
        for row in dictionary.matrix:
            f.write(" ".join(f"{v.real:.17g},{v.imag:.17g}" for v in row) + "\n")
