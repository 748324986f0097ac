"""Shared fixtures: one trained reference stack reused across the suite.

The expensive pieces (dataset, trained net, pooled vectors, trained maps)
are session-scoped and must be treated as read-only. Tests that need to
mutate or retrain build their own small instances.
"""

import numpy as np
import pytest

import somcodes as sc
from somcodes import hlr, refnet

N_SAMPLES = 2048
DATASET_SEED = 1
NET_SEED = 2
SOM_SEED = 3


@pytest.fixture(scope="session")
def dataset():
    return sc.make_dataset(N_SAMPLES, seed=DATASET_SEED)


@pytest.fixture(scope="session")
def trained_net(dataset):
    net = sc.init_refnet(seed=NET_SEED)
    net, _ = sc.train_refnet(net, dataset, seed=NET_SEED)
    return net


@pytest.fixture(scope="session")
def hlr_sets(trained_net, dataset):
    """Pooled, unit-normalized probe vectors of the whole dataset, per tag."""
    out = {}
    for tag in refnet.PROBE_TAGS:
        pooled = []
        for start in range(0, dataset.n_samples, 256):
            _, probes = sc.forward(trained_net, dataset.images[start : start + 256])
            pooled.append(hlr.pool_feature_maps(probes[tag]))
        vectors = hlr.normalize(np.vstack(pooled))
        out[tag] = hlr.HlrSet(vectors=vectors, labels=dataset.labels, tag=tag)
    return out


@pytest.fixture(scope="session")
def som20(hlr_sets):
    """20x20 maps trained on each probe layer with default hyperparameters."""
    out = {}
    for tag, hs in hlr_sets.items():
        grid = sc.init_grid(20, 20, hs.dim, seed=SOM_SEED)
        grid, trace = sc.train(grid, hs.vectors, sc.TrainConfig(seed=SOM_SEED))
        out[tag] = (grid, trace)
    return out


@pytest.fixture(scope="session")
def bmus20(som20, hlr_sets):
    return {
        tag: sc.assign_bmus(grid, hlr_sets[tag].vectors)
        for tag, (grid, _) in som20.items()
    }


@pytest.fixture(scope="session")
def size_sweep_grids(hlr_sets):
    """10x10 vs 30x30 maps on the same vectors.

    tau_sigma is short enough that the neighborhood anneals away well before
    the end, so map size rather than residual coupling controls how many
    units stay live.
    """
    vecs = hlr_sets["L2"].vectors
    cfg = sc.TrainConfig(seed=SOM_SEED, tau_sigma=5 * len(vecs) // 3)
    out = {}
    for m in (10, 30):
        grid = sc.init_grid(m, m, vecs.shape[1], seed=SOM_SEED)
        grid, _ = sc.train(grid, vecs, cfg)
        out[m] = grid
    return out
