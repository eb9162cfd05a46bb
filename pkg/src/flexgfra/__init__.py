"""Grant-free random access with variable-length pilots in cell-free massive MIMO.

Distributed sparse Bayesian activity detection and channel estimation with
latent-variable fusion at a central processor, plus a seeded Monte Carlo
harness for missed-detection and NMSE sweeps.
"""

from .algorithm import ALGORITHMS, run_distributed_vb, run_genie
from .config import ConfigError, ExperimentConfig, load_config
from .dictionary import Dictionary, PilotSet, block_range, build_dictionary, build_pilots
from .fusion import (DetectionResult, decode_offset, detect_users, encode_offset, fuse_alphas,
                     refine_channels, select_masters)
from .harness import ResultRecord, emit_csv, emit_plotdata, read_csv, run_experiment
from .metrics import TrialScore, aggregate, score_trial
from .sbl import (ApPosterior, Hyperparams, alpha_update, genie_estimate, run_inner_loop,
                  vb_covariance, vb_mean)
from .scene import (GroundTruth, NetworkScene, ReceivedSignals, SceneConfig, allocate_power,
                    generate_scene, sample_activity, synthesize_received, wrap_distance)

__version__ = "0.1.0"
