"""Surrogate modeling of parametric systems from noisy snapshots.

The pipeline extracts low-dimensional features by proper orthogonal
decomposition, learns the map from parameters to latent coordinates with
one Gaussian process per coordinate, reconstructs observations with a
heteroscedastic neural likelihood that also takes the physical variable,
and quantifies predictive uncertainty by Monte Carlo over latent samples.
"""

from .bundle import ModelBundle, load_bundle, save_bundle
from .config import ExperimentConfig, load_config, parse_config, render_config, save_config
from .dataset import (
    ParameterSet,
    PhysicalGrid,
    SnapshotSet,
    add_noise,
    generate_morlet_set,
    morlet_eval,
    morlet_response,
    read_snapshots,
    split,
    write_snapshots,
)
from .gpr import ArdSeKernel, GprModel, fit_hyperparameters, kernel_eval, log_marginal_likelihood
from .liknet import LikelihoodNet, MlpArchitecture, TrainConfig, forward, nll_loss, train
from .pod import LatentCoords, PodBasis, fit_pod, fit_pod_fixed_k, project, reconstruct
from .predict import (
    PredictiveDistribution,
    predict_cvae_gprr,
    predict_discrete,
    predict_gpr_rom,
    relative_test_mean_error,
)
from .recognition import LatentPosterior, LatentRecognition, fit_recognition, posterior_at, sample_latents

__version__ = "0.1.0"
