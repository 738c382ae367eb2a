"""Independent vector analysis by majorization-minimization.

Four inner solvers share one MM loop: iterative projection on one row
(``ip1``) or a pair of rows (``ip2``), and iterative source steering on
one row (``iss1``) or a block of two rows (``iss2``).

Example:
    >>> import numpy as np, mmiva
    >>> X = np.random.default_rng(0).standard_normal((4, 2, 100)) + 0j
    >>> state = mmiva.separate(X, solver="iss2", iterations=5)
    >>> state.W.shape
    (4, 2, 2)
"""

from .contrast import EPS, LAPLACE, ContrastModel
from .core import (
    MixtureSet,
    SeparatorState,
    build_covariance,
    build_covariances,
    frame_norms,
    surrogate_value,
    total_cost,
    update_weights,
    weighted_gram,
    whiten_init,
)
from .evaluation import evaluate_delta_sdr, mdp_rescale, sdr_si
from .exceptions import *  # noqa: F401,F403
from .experiment import ExperimentConfig, RunRecord, bench, iterations_to_fraction, run_experiment, scaling_bench
from .ip import ip1_pass, ip1_row_update, ip2_pair_update, ip2_pass
from .iss import iss1_pass, iss2_pass, iss_p_step, iss_pass, iss_q_step, solve_2x2
from .linalg import eig_hermitian, herm_inv, herm_inv_sqrt
from .mm import SOLVERS, SolverConfig, mm_step, separate
from .signals import (
    MixingScenario,
    StftConfig,
    TimeSignal,
    istft,
    mix_convolutive,
    sample_modulated_sources,
    sample_sources,
    source_images,
    stft,
)
from .wavio import read_wav, write_wav

__version__ = "0.1.0"
