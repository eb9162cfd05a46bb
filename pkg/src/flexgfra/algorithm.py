"""Joint activity detection and distributed channel estimation.

Each AP runs a few VB sweeps on its own signal, ships its precision vector to
the CPU, and receives the fused vector back as the starting point of the next
round.  Detection happens at the CPU on the master-AP precisions.
"""

from __future__ import annotations

import numpy as np

from .dictionary import Dictionary
from .fusion import (DetectionResult, alphas_at_masters, detect_users, fuse_alphas,
                     refine_channels, select_masters)
from .sbl import Hyperparams, genie_estimate, inner_sweep

ALGORITHMS = ("vb-fusion", "vb-nofusion", "genie")


def relative_change(new, old) -> float:
    """Relative infinity-norm change used as the outer stopping rule."""
    scale = np.max(np.abs(old))
    return float(np.max(np.abs(new - old)) / scale) if scale > 0 else np.inf


def run_distributed_vb(dictionary: Dictionary, z, lsfc, hyper: Hyperparams,
                       fusion=True, threshold=1.0, alpha_init=None) -> DetectionResult:
    """Outer/inner VB loop over all APs, with or without CPU fusion.

    ``z`` is ``(L, W, N_r)``; ``lsfc`` is the CPU's ``(L, N)`` LSFC knowledge
    used for master selection and fusion weights.  Without fusion every AP
    keeps refining its own precisions and detection reads each UE's master.
    """
    L = z.shape[0]
    M = dictionary.num_columns
    D = dictionary.matrix
    masters = select_masters(lsfc)
    fused = np.ones((L, M)) if alpha_init is None else np.array(alpha_init, dtype=float)
    g_mean = np.zeros((L, M, z.shape[2]), dtype=complex)
    for _ in range(hyper.outer_rounds):
        alpha, g_mean = inner_sweep(D, z, fused, hyper, hyper.max_inner)
        new = fuse_alphas(alpha, lsfc, masters, dictionary) if fusion else alpha
        done = relative_change(new, fused) < hyper.convergence_tol
        fused = new
        if done:
            break
    result = detect_users(alphas_at_masters(fused, masters, dictionary), dictionary, threshold)
    result.channel_estimates = refine_channels(g_mean, result.detected_rows)
    return result


def run_genie(dictionary: Dictionary, z, support_rows, prior_variance) -> np.ndarray:
    """Support-aware LMMSE at every AP; ``prior_variance`` is ``(L, K)``."""
    return np.stack([genie_estimate(dictionary.matrix, z[ell], support_rows, prior_variance[ell])
                     for ell in range(z.shape[0])])
