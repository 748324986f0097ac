"""Self-organizing-map analysis of pooled hidden-layer activations.

Train maps on unit-norm pooled activation vectors, then study code
density, class correlation, adversarial BMU displacement, and inverted
input features, all against a built-in differentiable reference network.
"""

from .attack import DisplacementCurve, PgdConfig, displacement_experiment, pgd_attack
from .cluster import (
    ClusterResult,
    VScoreReport,
    clustering_score_experiment,
    kmeans,
    v_measure,
)
from .density import (
    Attractor,
    DensityMap,
    class_density,
    dead_unit_fraction,
    find_attractors,
    kde_density,
)
from .errors import (
    FormatError,
    InvalidArgumentError,
    NumericError,
    SomcodesError,
)
from .hlr import HlrSet, hlr_from_activations, normalize, pool_feature_maps, read_hlr, write_hlr
from .invert import (
    InversionConfig,
    InversionResult,
    cosine_distance,
    invert_attractors,
    invert_code,
)
from .refnet import (
    CodeLoss,
    CrossEntropyLoss,
    RefNet,
    backward_input,
    forward,
    init_refnet,
    load_refnet,
    save_refnet,
    train_refnet,
)
from .shapes import ShapeDataset, make_dataset
from .som import (
    BmuAssignment,
    LossTrace,
    SomGrid,
    TrainConfig,
    assign_bmus,
    find_bmu,
    grid_distance,
    init_grid,
    load_som,
    moving_average,
    save_som,
    train,
    update_step,
)
from .stats import welch_t_test

__version__ = "0.1.0"
