"""CPU-side latent-variable fusion, activity/offset detection and the offset codec."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dictionary import Dictionary


@dataclass
class DetectionResult:
    """Outcome of activity detection for one access attempt.

    ``detected_set`` is sorted and 0-based; ``detected_offsets`` are 1-based
    start symbols aligned with it.  ``decoded_bits`` holds ``None`` for
    offsets beyond the payload range.
    """

    alpha_min: np.ndarray
    detected_set: np.ndarray
    detected_offsets: np.ndarray
    detected_rows: np.ndarray
    decoded_bits: list = field(default_factory=list)
    channel_estimates: np.ndarray | None = None


def select_masters(lsfc) -> np.ndarray:
    """Master AP of each UE: largest LSFC, ties to the smallest AP index."""
    return np.argmax(np.asarray(lsfc), axis=0)


def fuse_alphas(alphas, lsfc, masters, dictionary: Dictionary) -> np.ndarray:
    """LSFC-weighted average of each AP's precisions with the master's.

    For column ``m`` owned by UE ``k`` with master ``l_M``::

        fused[l, m] = (beta[l, k] alpha[l, m] + beta[l_M, k] alpha[l_M, m])
                      / (beta[l, k] + beta[l_M, k])

    and the master keeps its own value.
    """
    alphas = np.asarray(alphas, dtype=float)
    lsfc = np.asarray(lsfc, dtype=float)
    masters = np.asarray(masters)
    L, M = alphas.shape
    if M != dictionary.num_columns or lsfc.shape != (L, dictionary.num_ues):
        raise ValueError(f"shape mismatch: alphas {alphas.shape}, lsfc {lsfc.shape}, "
                         f"M={dictionary.num_columns}, N={dictionary.num_ues}")
    owner = dictionary.column_owner
    cols = np.arange(M)
    master_of_col = masters[owner]
    w_own = lsfc[:, owner]
    w_master = lsfc[master_of_col, owner]
    alpha_master = alphas[master_of_col, cols]
    fused = (w_own * alphas + w_master * alpha_master) / (w_own + w_master)
    fused[master_of_col, cols] = alpha_master
    return fused


def alphas_at_masters(fused, masters, dictionary: Dictionary) -> np.ndarray:
    owner = dictionary.column_owner
    return np.asarray(fused)[np.asarray(masters)[owner], np.arange(dictionary.num_columns)]


def detect_users(alpha_ref, dictionary: Dictionary, threshold=1.0) -> DetectionResult:
    """Per-UE block minimum of the master-AP precisions, thresholded.

    ``alpha_ref`` is the length-``M`` vector of fused precisions read at each
    column owner's master AP (see :func:`alphas_at_masters`).
    """
    alpha_ref = np.asarray(alpha_ref, dtype=float)
    N = dictionary.num_ues
    argmins = np.empty(N, dtype=int)
    alpha_min = np.empty(N)
    for k in range(N):
        block = alpha_ref[dictionary.block(k)]
        j = int(np.argmin(block))      # first minimum on ties
        argmins[k] = j
        alpha_min[k] = block[j]
    detected = np.flatnonzero(alpha_min < threshold)
    offsets = argmins[detected] + 1
    rows = dictionary.block_starts[detected] + argmins[detected]
    W = dictionary.window
    bits = [decode_offset(int(s), int(dictionary.pilot_lengths[k]), W)
            for k, s in zip(detected, offsets)]
    return DetectionResult(alpha_min=alpha_min, detected_set=detected,
                           detected_offsets=offsets, detected_rows=rows, decoded_bits=bits)


def refine_channels(g_mean, detected_rows) -> np.ndarray:
    """Zero every row of ``<G_l>`` outside the detected support.

    Works on a single ``(M, N_r)`` estimate or a stack ``(L, M, N_r)``.
    """
    g_mean = np.asarray(g_mean)
    refined = np.zeros_like(g_mean)
    rows = np.asarray(detected_rows, dtype=int)
    refined[..., rows, :] = g_mean[..., rows, :]
    return refined


def payload_bits(pilot_length, window) -> int:
    """Bits carried by the start offset: ``floor(log2(W - T + 1))``."""
    positions = int(window) - int(pilot_length) + 1
    if positions < 1:
        raise ValueError(f"pilot length {pilot_length} exceeds window {window}")
    return positions.bit_length() - 1


def encode_offset(bits: str, pilot_length, window) -> int:
    """Map a bit string to a 1-based start offset (``'11'`` -> 4)."""
    n = payload_bits(pilot_length, window)
    if len(bits) != n:
        raise ValueError(f"expected {n} bits for T={pilot_length}, W={window}, got {len(bits)}")
    if bits and set(bits) - {"0", "1"}:
        raise ValueError(f"not a bit string: {bits!r}")
    return (int(bits, 2) if bits else 0) + 1


def decode_offset(offset, pilot_length, window) -> str | None:
    """Inverse of :func:`encode_offset`; ``None`` for non-payload offsets."""
    n = payload_bits(pilot_length, window)
    if not 1 <= offset <= window - pilot_length + 1:
        raise ValueError(f"offset {offset} outside [1, {window - pilot_length + 1}]")
    if offset > 2 ** n:
        return None
    return format(offset - 1, f"0{n}b") if n else ""


def perturb_lsfc(lsfc, error_db, rng) -> np.ndarray:
    """CPU-side LSFC knowledge with i.i.d. log-normal error of ``error_db`` dB."""
    if error_db == 0:
        return np.asarray(lsfc)
    return lsfc * 10 ** (error_db * rng.standard_normal(np.shape(lsfc)) / 10)

