"""End-to-end property suite for the full analysis stack.

One test per guaranteed property, in dependency order: learning rule,
grid metric, training convergence, density normalization, score oracle,
layer-depth trend, attack containment, displacement trend, gradient
correctness, test-statistic oracle, inversion behavior, and byte-level
reproducibility of the pipeline artifacts.
"""

import json
import math
import os

import numpy as np
import pytest

import somcodes as sc
from somcodes import attack, cli, density, refnet

from gradcheck import fd_gradient_check


def test_learning_rule_hand_oracle():
    """One update on a 2x2 zero grid lands on the hand-derived weights."""
    grid = sc.SomGrid(m=2, n=2, dim=2, weights=np.zeros((4, 2), dtype=np.float32))
    cfg = sc.TrainConfig(sigma0=1.0, alpha0=0.5, tau=1)
    sc.update_step(grid, np.array([1.0, 0.0]), 0, cfg)
    # BMU coefficient is exp(0) = 1 exactly, so its weight is alpha0 exactly
    assert grid.weights[0, 0] == np.float32(0.5)
    # units at grid distance 1 move by 0.5 * exp(-1 / (2 + eps))
    assert abs(float(grid.weights[1, 0]) - 0.30327) < 1e-5
    assert abs(float(grid.weights[2, 0]) - 0.30327) < 1e-5
    assert grid.weights[1, 0] == grid.weights[2, 0]


def test_toroidal_metric_axioms_exhaustive():
    """Identity, symmetry, and the triangle inequality on every grid to 6x6."""
    for m in range(1, 7):
        for n in range(1, 7):
            grid = sc.init_grid(m, n, 2, seed=0)
            cells = [(r, c) for r in range(m) for c in range(n)]
            k = len(cells)
            d = np.zeros((k, k))
            for i, a in enumerate(cells):
                for j, b in enumerate(cells):
                    d[i, j] = sc.grid_distance(a, b, grid)
            assert np.all(np.diag(d) == 0.0)
            assert np.all((d > 0) == ~np.eye(k, dtype=bool))
            np.testing.assert_array_equal(d, d.T)
            # d[i, k] <= d[i, j] + d[j, k] over all triples at once
            slack = d[:, None, :] - (d[:, :, None] + d[None, :, :])
            assert slack.max() <= 1e-12


def test_training_converges_on_deep_probe_vectors(som20):
    """Normalized moving-average loss ends below 0.5 on the default run."""
    _, trace = som20["L2"]
    ma = sc.moving_average(trace)
    assert len(ma) > 0
    final = float(ma[-1])
    print(f"final normalized moving-average loss: {final:.4f}")
    assert final < 0.5


def test_density_normalization_and_dead_unit_growth(size_sweep_grids, hlr_sets):
    """Densities integrate to 1; a larger map strands more units."""
    rng = np.random.default_rng(1234)
    for _ in range(100):
        m = int(rng.integers(4, 25))
        n = int(rng.integers(4, 25))
        count = int(rng.integers(10, 200))
        rows = rng.integers(0, m, count).tolist() + [0, m - 1]
        cols = rng.integers(0, n, count).tolist() + [0, n - 1]
        assigns = [
            sc.BmuAssignment(i, int(r), int(c), 0.0)
            for i, (r, c) in enumerate(zip(rows, cols))
        ]
        wrap = bool(rng.integers(0, 2))
        dmap = sc.kde_density(assigns, (m, n), wrap=wrap)
        assert abs(dmap.values.sum() - 1.0) <= 1e-6

    vecs = hlr_sets["L2"].vectors
    fractions = {
        m: sc.dead_unit_fraction(sc.assign_bmus(g, vecs), (m, m))
        for m, g in size_sweep_grids.items()
    }
    print(f"dead-unit fraction: 10x10 {fractions[10]:.3f}, 30x30 {fractions[30]:.3f}")
    assert fractions[30] > fractions[10]


def _reference_v(truth, predicted):
    """V-measure from first principles with pure-python entropy sums."""
    n = len(truth)
    cont, row, col = {}, {}, {}
    for t, p in zip(truth, predicted):
        cont[(t, p)] = cont.get((t, p), 0) + 1
    for (t, p), c in cont.items():
        row[t] = row.get(t, 0) + c
        col[p] = col.get(p, 0) + c
    h_t = -sum(c / n * math.log(c / n) for c in row.values())
    h_p = -sum(c / n * math.log(c / n) for c in col.values())
    h_tp = -sum(c / n * math.log(c / col[p]) for (t, p), c in cont.items())
    h_pt = -sum(c / n * math.log(c / row[t]) for (t, p), c in cont.items())
    h = 1.0 if h_t == 0 else 1.0 - h_tp / h_t
    c_ = 1.0 if h_p == 0 else 1.0 - h_pt / h_p
    return 0.0 if h + c_ == 0 else 2.0 * h * c_ / (h + c_)


def test_v_measure_matches_direct_entropy_computation():
    """Agreement within 1e-10 on 50 random labelings plus the anchors."""
    truth = np.array([0, 0, 1, 1, 2, 2])
    assert sc.v_measure(truth, truth) == 1.0
    assert sc.v_measure(np.array([0, 1, 0, 1]), np.zeros(4, dtype=int)) == 0.0

    rng = np.random.default_rng(99)
    for _ in range(50):
        n = int(rng.integers(5, 40))
        t = rng.integers(0, int(rng.integers(1, 7)), n)
        p = rng.integers(0, int(rng.integers(1, 7)), n)
        mine = sc.v_measure(t, p)
        ref = _reference_v(t.tolist(), p.tolist())
        assert abs(mine - ref) <= 1e-10


def test_deeper_probe_clusters_align_better_with_classes(
    trained_net, dataset, bmus20, hlr_sets
):
    """Mean V-score of L2 BMU clusters beats L1 over 5 k-means seeds."""
    acc = refnet.accuracy(trained_net, dataset.images, dataset.labels)
    assert acc >= 0.9
    means = {}
    for tag in ("L1", "L2"):
        rep = sc.clustering_score_experiment(
            bmus20[tag], hlr_sets[tag].labels, k=8, n_seeds=5, base_seed=4, layer_tag=tag
        )
        means[tag] = rep.mean
    print(
        f"accuracy {acc:.4f}; mean V-score L1 {means['L1']:.4f}, "
        f"L2 {means['L2']:.4f}"
    )
    assert means["L2"] > means["L1"]


def test_attack_stays_inside_budget_and_bounds():
    """1000 random attacks respect the L-infinity ball and pixel range."""
    net = sc.init_refnet(c1=2, c2=3, k=3, input_size=8, n_classes=4, seed=77)
    rng = np.random.default_rng(77)
    worst = 0.0
    for trial in range(1000):
        x = rng.random((8, 8))
        cfg = sc.PgdConfig(
            eps=float(rng.uniform(0.0, 0.1)),
            n_iter=int(rng.integers(1, 7)),
            step=float(rng.uniform(0.001, 0.05)),
            rand_init=bool(rng.integers(0, 2)),
            targeted=bool(rng.integers(0, 2)),
            seed=trial,
        )
        adv = sc.pgd_attack(net, x, cfg, true_class=int(rng.integers(0, 4)))
        gap = float(np.abs(adv - x).max())
        worst = max(worst, gap - cfg.eps)
        assert gap <= cfg.eps + 1e-7
        assert adv.min() >= 0.0 and adv.max() <= 1.0
    print(f"worst overshoot beyond eps: {worst:.2e}")

    x = rng.random((8, 8))
    adv = sc.pgd_attack(net, x, sc.PgdConfig(eps=0.0, seed=1), true_class=0)
    np.testing.assert_array_equal(adv, x)


def test_bmu_displacement_grows_with_budget(trained_net, som20, dataset):
    """Mean L1 displacement at eps 0.08 is at least that at eps 0.01."""
    rng = np.random.default_rng(5)
    idx = rng.choice(dataset.n_samples, size=100, replace=False)
    cfg = sc.PgdConfig(n_iter=40, step=0.002, seed=5)
    curves = sc.displacement_experiment(
        trained_net,
        {"L1": som20["L1"][0]},
        dataset.images[idx],
        dataset.labels[idx],
        [0.0, 0.01, 0.04, 0.08],
        cfg,
    )
    curve = curves["L1"]
    by_eps = dict(zip(curve.eps_values, curve.means))
    print(
        "mean L1 displacement by eps: "
        + ", ".join(f"{e:g}: {m:.3f}" for e, m in by_eps.items())
    )
    np.testing.assert_array_equal(curve.distances[0], 0.0)
    assert by_eps[0.08] >= by_eps[0.01]


def test_input_gradients_match_finite_differences():
    """Analytic gradients within 1e-4 of central differences, 20 nets."""
    rng = np.random.default_rng(2024)
    worst = 0.0
    for i in range(20):
        net = sc.init_refnet(c1=2, c2=3, k=3, input_size=8, n_classes=4, seed=3000 + i)
        x = rng.random((8, 8))
        losses = [
            sc.CrossEntropyLoss(target_class=int(rng.integers(0, 4))),
            sc.CodeLoss(layer_tag="L1" if i % 2 else "L2", target=rng.random(2 if i % 2 else 3) + 0.1),
        ]
        for loss in losses:
            err, kept = fd_gradient_check(net, x, loss)
            worst = max(worst, err)
            assert kept >= 0.9
            assert err < 1e-4
    print(f"worst max relative gradient error: {worst:.2e}")


_WELCH_CASES = [
    ([0.0, 0.0, 0.0, 0.0, 1.0],
     [10.0, 10.0, 10.0, 10.0, 11.0],
     -35.35533905932737, 4.483355520161371e-10),
    ([1.0, 2.0, 3.0],
     [1.5, 2.5, 3.5],
     -0.6123724356957945, 0.5733922538253555),
    ([2.1, 2.2, 1.9, 2.0, 2.3, 2.05],
     [1.4, 1.6, 1.5, 1.45],
     8.357661056711406, 3.238643087449615e-05),
    ([-1.0, -2.0, -3.0, -4.0],
     [4.0, 3.0, 2.0, 1.0],
     -5.477225575051661, 0.0015474212145409386),
    ([0.5, 0.5, 0.6],
     [0.5, 0.5, 0.4],
     1.414213562373096, 0.23019964108049845),
    ([0.677189, -0.293395, -0.061262, 1.841982, 0.13544, 1.807049, -0.813389, 1.135102],
     [1.849632, 0.624963, 1.314663, 2.805258, -0.057394, 0.985406, -0.359426, -1.270617,
      1.328948, 0.594664, 0.784153, -0.121961],
     -0.32778333341729726, 0.7472742471733005),
    ([0.310465, -1.404936, 0.980573, 1.055794, -0.404632, -1.47882, 0.833405, 1.960806,
      2.219202, 1.078773, 0.340911, 0.022129, -1.387904, 0.143332, 0.286588, -1.564563,
      0.406056, 0.139082, -0.785102, -0.803368, -2.534293, -0.412003, -0.393494,
      -0.748535, 0.884549, -2.333549, 1.378217, 0.562318, 0.778119, 0.178609],
     [-0.633479, 1.23897, 2.046556, -0.074299, 0.847026],
     -1.3612461060973988, 0.2243950974211341),
    ([-0.561386, 0.950623, -2.106082, -0.909101, 0.327253, -0.302349, 0.191078,
      -0.010007, 0.282024, 0.943399],
     [-0.48576, -0.365964, -0.439362, -1.010448, -0.516856, -0.038725, -0.15852,
      -0.775792, 0.225434, 0.392933],
     0.6181242714125024, 0.5473220259404165),
    ([-0.069192, -1.566355, 0.992658, -1.363608, 0.191575, -0.527886],
     [-1.664452, -3.100111, -1.861159, -2.202759, -0.723646, 0.270843, -0.645597,
      2.392068, -2.428207, -0.9936, -0.67603, -0.940431, 0.018897, 2.103695, -0.061125,
      -0.138988, -2.685798, 2.756713, -0.58279, -3.841446, -0.411489, -3.174868,
      -4.210011, 4.990377, -0.389003],
     0.5789741613775615, 0.5696684437931323),
    ([-0.412953, 0.156653, 0.164667, -1.41467, -0.682894, -0.540125, 0.218082, 0.718256,
      0.29745, 1.647147, -1.677517, -0.985045, -0.623394, 0.023119, 0.599883],
     [-0.741347, 0.514629, -2.365261, 0.243518, 0.146168, -0.685005, -0.129529, 0.15089,
      1.801314, 0.222591, 0.902112, -0.743521, -0.321267, -0.265734, -1.361815],
     0.024002889643284498, 0.9810228619174111),
]


def test_welch_statistic_matches_fixed_oracle():
    """t and p within 1e-6 of precomputed values on 10 sample pairs."""
    for a, b, t_ref, p_ref in _WELCH_CASES:
        t, p = sc.welch_t_test(np.array(a), np.array(b))
        assert abs(t - t_ref) <= 1e-6
        assert abs(p - p_ref) <= 1e-6
    a = np.array([1.0, 2.0, 3.0, 4.0])
    t, p = sc.welch_t_test(a, a.copy())
    assert t == 0.0
    assert p == 1.0


def test_inversion_recovers_codes_and_separates_attractors(
    trained_net, som20, bmus20
):
    """Each inverted image is closest to the attractor code it aimed for."""
    grid, _ = som20["L2"]
    dmap = sc.kde_density(bmus20["L2"], (20, 20))
    attractors = sc.find_attractors(dmap, top_k=5, min_percentile=50.0)
    results = sc.invert_attractors(
        trained_net, grid, dmap, "L2", top_k=5, cfg=sc.InversionConfig(seed=6),
        min_percentile=50.0,
    )
    assert len(results) == len(attractors)

    codes = []
    targets = [grid.weight_at(a.row, a.col) for a in attractors]
    for r in results:
        _, probes = sc.forward(trained_net, r.image)
        codes.append(probes["L2"].mean(axis=(1, 2)))
    hits = 0
    for i, code in enumerate(codes):
        dists = [sc.cosine_distance(code, t) for t in targets]
        if int(np.argmin(dists)) == i:
            hits += 1
    print(f"attractor self-match: {hits}/{len(codes)}")
    assert hits == len(codes)


def test_inversion_init_at_optimum_stays_put(trained_net, dataset):
    """Starting from a preimage of the target keeps the loss below 1e-3."""
    x_star = dataset.images[17]
    _, probes = sc.forward(trained_net, x_star)
    target = probes["L2"].mean(axis=(1, 2))
    result = sc.invert_code(
        trained_net, "L2", target, sc.InversionConfig(seed=0, init=x_star, n_iter=64)
    )
    print(f"final loss from optimal init: {result.final_loss:.2e}")
    assert result.final_loss < 1e-3


REPRO_CONFIG = {
    "seed": 13,
    "dataset": {"n_samples": 256, "n_classes": 8},
    "refnet": {"steps": 80},
    "som": {"m": 8, "n": 8, "epochs": 2, "window": 128},
    "density": {"top_k": 2, "bandwidth": 1.0},
    "cluster": {"n_seeds": 2},
    "attack": {"eps_values": [0.02, 0.08], "n_iter": 6, "n_images": 12},
    "invert": {"n_iter": 16},
}


def _run_pipeline(root, out_name):
    cfg_path = os.path.join(root, "config.json")
    if not os.path.exists(cfg_path):
        with open(cfg_path, "w") as fh:
            json.dump(REPRO_CONFIG, fh)
    out = os.path.join(root, out_name)
    base = ["--config", cfg_path, "--out", out]
    assert cli.main(["refnet-train", *base]) == 0
    net = os.path.join(out, "refnet.rnet")
    assert cli.main(["extract", *base, "--net", net, "--layer", "all"]) == 0
    for tag in ("L1", "L2"):
        assert cli.main(["train-som", *base, "--hlr", os.path.join(out, f"hlr_{tag}.hlr")]) == 0
    som_l1 = os.path.join(out, "som_L1.som")
    som_l2 = os.path.join(out, "som_L2.som")
    hlr_l2 = os.path.join(out, "hlr_L2.hlr")
    assert cli.main(["density", *base, "--som", som_l2, "--hlr", hlr_l2]) == 0
    assert cli.main(
        ["class-density", *base, "--som", som_l2, "--hlr", hlr_l2, "--class-id", "1"]
    ) == 0
    assert cli.main(["cluster-score", *base, "--som", som_l2, "--hlr", hlr_l2]) == 0
    assert cli.main(
        ["attack", *base, "--net", net, "--som-l1", som_l1, "--som-l2", som_l2]
    ) == 0
    assert cli.main(["invert", *base, "--net", net, "--som", som_l2, "--hlr", hlr_l2]) == 0
    return out


def test_pipeline_runs_are_byte_identical(tmp_path):
    """Two runs from one config produce identical delimited artifacts."""
    out_a = _run_pipeline(str(tmp_path), "run_a")
    out_b = _run_pipeline(str(tmp_path), "run_b")
    names_a = sorted(n for n in os.listdir(out_a) if n.endswith(".csv"))
    names_b = sorted(n for n in os.listdir(out_b) if n.endswith(".csv"))
    assert names_a == names_b
    assert len(names_a) >= 10
    diffs = []
    for name in names_a:
        with open(os.path.join(out_a, name), "rb") as fa:
            raw_a = fa.read()
        with open(os.path.join(out_b, name), "rb") as fb:
            raw_b = fb.read()
        if raw_a != raw_b:
            diffs.append(name)
    print(f"compared {len(names_a)} delimited artifacts")
    assert diffs == []
