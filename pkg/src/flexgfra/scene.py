"""Cell-free network geometry, large-scale fading, activity and received signals.

Physical powers are folded into the channel so the receiver sees unit-variance
noise: ``lsfc_linear = 10**(lsfc_db / 10) / N0`` with ``N0`` the noise power in
watts over the band, and active UEs transmit with amplitude ``sqrt(P_k)``
(``P_k`` in watts).
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .dictionary import Dictionary, PilotSet

AP_LAYOUTS = ("random", "grid")


@dataclass(frozen=True)
class SceneConfig:
    area_side_km: float = 1.0
    num_aps: int = 10
    antennas_per_ap: int = 2
    ap_height_m: float = 10.0
    num_ues: int = 60
    num_active: int = 8
    shadowing_stddev_db: float = 4.0
    pathloss_intercept_db: float = -140.6
    pathloss_exponent_db_per_decade: float = 36.7
    bandwidth_hz: float = 1e6
    noise_psd_dbm_per_hz: float = -169.0
    p_max_tx_mw: float = 100.0
    seed: int = 0
    ap_layout: str = "random"

    def __post_init__(self):
        for name in ("area_side_km", "num_aps", "antennas_per_ap", "num_ues",
                     "bandwidth_hz", "p_max_tx_mw"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)!r}")
        for name in ("ap_height_m", "shadowing_stddev_db"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if not 0 <= self.num_active <= self.num_ues:
            raise ValueError(f"num_active={self.num_active} must lie in [0, num_ues={self.num_ues}]")
        if self.ap_layout not in AP_LAYOUTS:
            raise ValueError(f"ap_layout must be one of {AP_LAYOUTS}")

    @property
    def noise_power_w(self) -> float:
        return 10 ** ((self.noise_psd_dbm_per_hz - 30) / 10) * self.bandwidth_hz


@dataclass(frozen=True)
class NetworkScene:
    ap_positions: np.ndarray   # (L, 2) km
    ue_positions: np.ndarray   # (N, 2) km
    distances_km: np.ndarray   # (L, N) wrap-around 3-D distance
    lsfc_db: np.ndarray        # (L, N)
    lsfc_linear: np.ndarray    # (L, N), noise-normalized power ratio
    antennas_per_ap: int

    @property
    def num_aps(self) -> int:
        return self.lsfc_db.shape[0]

    @property
    def num_ues(self) -> int:
        return self.lsfc_db.shape[1]


@dataclass(frozen=True)
class GroundTruth:
    """Hidden state of one access attempt.

    ``active_set`` holds 0-based UE indices, ``start_offsets`` the 1-based
    starting symbol of each active UE's pilot.  ``channels`` is drawn for all
    ``N`` UEs with shape ``(L, N, N_r)``.
    """

    active_set: np.ndarray
    start_offsets: np.ndarray
    tx_powers_mw: np.ndarray
    channels: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "active_set", np.asarray(self.active_set, dtype=int))
        object.__setattr__(self, "start_offsets", np.asarray(self.start_offsets, dtype=int))
        object.__setattr__(self, "tx_powers_mw", np.asarray(self.tx_powers_mw, dtype=float))
        if len(set(self.active_set.tolist())) != self.active_set.size:
            raise ValueError("active_set has duplicate UEs")

    @property
    def num_active(self) -> int:
        return self.active_set.size

    def effective_channels(self) -> np.ndarray:
        """``sqrt(P_k) b_lk`` for the active UEs, shape ``(L, K, N_r)``."""
        amp = np.sqrt(self.tx_powers_mw / 1e3)
        return self.channels[:, self.active_set, :] * amp[None, :, None]


@dataclass(frozen=True)
class ReceivedSignals:
    z: np.ndarray  # (L, W, N_r)

    @property
    def num_aps(self) -> int:
        return self.z.shape[0]

    def __getitem__(self, ap):
        return self.z[ap]


def wrap_distance(p_ue, p_ap, area_side, height=0.0) -> float:
    """Minimum 3-D distance over the nine torus translates of the UE.

    Only the horizontal plane wraps; ``height`` is the fixed vertical offset.
    """
    p_ue = np.asarray(p_ue, dtype=float)
    p_ap = np.asarray(p_ap, dtype=float)
    best = np.inf
    for dx in (-area_side, 0.0, area_side):
        for dy in (-area_side, 0.0, area_side):
            h = np.hypot(p_ue[0] + dx - p_ap[0], p_ue[1] + dy - p_ap[1])
            best = min(best, h)
    return float(np.hypot(best, height))


def wrap_distances(ue_positions, ap_positions, area_side, height=0.0) -> np.ndarray:
    """Vectorized :func:`wrap_distance`, shape ``(L, N)``."""
    diff = np.abs(ap_positions[:, None, :] - ue_positions[None, :, :])
    diff = np.minimum(diff, area_side - diff)
    return np.sqrt((diff ** 2).sum(axis=-1) + height ** 2)


def pathloss_db(distance_km, config: SceneConfig):
    return (config.pathloss_intercept_db
            - config.pathloss_exponent_db_per_decade * np.log10(distance_km))


def _ap_grid(num_aps, side):
    cols = int(np.ceil(np.sqrt(num_aps)))
    rows = int(np.ceil(num_aps / cols))
    xs = (np.arange(cols) + 0.5) * side / cols
    ys = (np.arange(rows) + 0.5) * side / rows
    grid = np.array([(x, y) for y in ys for x in xs])
    return grid[:num_aps]


def generate_scene(config: SceneConfig, rng) -> NetworkScene:
    side = config.area_side_km
    if config.ap_layout == "grid":
        aps = _ap_grid(config.num_aps, side)
    else:
        aps = rng.uniform(0.0, side, size=(config.num_aps, 2))
    ues = rng.uniform(0.0, side, size=(config.num_ues, 2))
    dist = wrap_distances(ues, aps, side, config.ap_height_m / 1e3)
    shadowing = config.shadowing_stddev_db * rng.standard_normal(dist.shape)
    lsfc_db = pathloss_db(dist, config) + shadowing
    lsfc_linear = 10 ** (lsfc_db / 10) / config.noise_power_w
    return NetworkScene(ap_positions=aps, ue_positions=ues, distances_km=dist,
                        lsfc_db=lsfc_db, lsfc_linear=lsfc_linear,
                        antennas_per_ap=config.antennas_per_ap)


def sample_activity(config: SceneConfig, scene: NetworkScene, pilot_lengths, window,
                    rng) -> GroundTruth:
    """Pick ``K`` active UEs, their start offsets and all ``N`` channels.

    Transmit powers start at ``p_max`` for everyone; see :func:`allocate_power`.
    """
    lengths = np.asarray(pilot_lengths)
    N, K = config.num_ues, config.num_active
    if K > N:
        raise ValueError(f"cannot activate {K} of {N} UEs")
    if lengths.size != N or np.any(lengths > window):
        raise ValueError("need one pilot length <= window per UE")
    active = rng.choice(N, size=K, replace=False)
    # offsets uniform on {1, ..., W - T + 1}
    offsets = rng.integers(1, window - lengths[active] + 2)
    L, Nr = scene.num_aps, config.antennas_per_ap
    unit = (rng.standard_normal((L, N, Nr)) + 1j * rng.standard_normal((L, N, Nr))) / np.sqrt(2)
    channels = unit * np.sqrt(scene.lsfc_linear)[:, :, None]
    return GroundTruth(active_set=active, start_offsets=offsets,
                       tx_powers_mw=np.full(K, float(config.p_max_tx_mw)),
                       channels=channels)


def allocate_power(scene: NetworkScene, masters, truth: GroundTruth, p_max_mw) -> np.ndarray:
    """UE-centric power control: equalize the received power at each master AP.

    ``P_k = p_max * min_k' beta[master(k'), k'] / beta[master(k), k]`` over
    the active UEs, so the weakest UE transmits at full power.
    """
    active = truth.active_set
    if active.size == 0:
        raise ValueError("power allocation needs at least one active UE")
    masters = np.asarray(masters)
    beta_master = scene.lsfc_linear[masters[active], active]
    return p_max_mw * beta_master.min() / beta_master


def with_powers(truth: GroundTruth, tx_powers_mw) -> GroundTruth:
    return dataclasses.replace(truth, tx_powers_mw=np.asarray(tx_powers_mw, dtype=float))


def synthesize_received(scene: NetworkScene, pilots: PilotSet, truth: GroundTruth, rng,
                        noise_scale=1.0) -> ReceivedSignals:
    """Time-domain synthesis: each active UE's scaled pilot at its offset, plus noise."""
    W = pilots.window
    L, Nr = scene.num_aps, scene.antennas_per_ap
    z = np.zeros((L, W, Nr), dtype=complex)
    g_eff = truth.effective_channels()
    for j, (ue, s) in enumerate(zip(truth.active_set, truth.start_offsets)):
        x = pilots.pilots[ue]
        if s < 1 or s - 1 + x.size > W:
            raise ValueError(f"UE {ue} pilot of length {x.size} at offset {s} overflows window {W}")
        z[:, s - 1 : s - 1 + x.size, :] += x[None, :, None] * g_eff[:, j, None, :]
    noise = (rng.standard_normal(z.shape) + 1j * rng.standard_normal(z.shape)) / np.sqrt(2)
    return ReceivedSignals(z=z + noise_scale * noise)


def row_sparse_channels(dictionary: Dictionary, truth: GroundTruth) -> np.ndarray:
    """Effective row-sparse ``G_l`` for every AP, shape ``(L, M, N_r)``."""
    L, _, Nr = truth.channels.shape
    G = np.zeros((L, dictionary.num_columns, Nr), dtype=complex)
    rows = dictionary.row_of(truth.active_set, truth.start_offsets)
    G[:, rows, :] = truth.effective_channels()
    return G
