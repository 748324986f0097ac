"""Command-line pipeline: train the reference net, extract pooled
activations, train maps, and run the density / clustering / attack /
inversion analyses.

Every verb reads the same JSON config (--config), honors --out and
--seed overrides, writes CSV plus image artifacts into the output
directory, and drops a manifest naming inputs, seeds, and output hashes.
Exit codes: 0 success, 2 invalid arguments, 3 malformed files, 4 numeric
failures.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import re
import sys

import numpy as np

from . import (
    attack,
    cluster,
    config as config_mod,
    density,
    figures,
    hlr,
    invert,
    refnet,
    report,
    shapes,
    som,
)
from .errors import InvalidArgumentError, SomcodesError


def _slug(tag: str) -> str:
    out = re.sub(r"[^A-Za-z0-9_-]", "_", tag)
    return out or "untagged"


def _load_setup(args):
    cfg = (
        config_mod.load_config(args.config)
        if args.config
        else config_mod.PipelineConfig()
    )
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    out_dir = args.out if args.out else cfg.out_dir
    os.makedirs(out_dir, exist_ok=True)
    return cfg, out_dir


def _dataset(cfg):
    d = cfg.dataset
    return shapes.make_dataset(
        d.n_samples, d.n_classes, d.size, d.noise, seed=cfg.section_seed("dataset")
    )


def _extract_vectors(net, images, tag):
    pooled = []
    for start in range(0, images.shape[0], 256):
        _, probes = refnet.forward(net, images[start : start + 256])
        pooled.append(hlr.pool_feature_maps(probes[tag]))
    return hlr.normalize(np.vstack(pooled))


def cmd_refnet_train(args) -> int:
    cfg, out_dir = _load_setup(args)
    data = _dataset(cfg)
    r = cfg.refnet
    net = refnet.init_refnet(
        r.c1,
        r.c2,
        r.kernel,
        cfg.dataset.size,
        cfg.dataset.n_classes,
        seed=cfg.section_seed("refnet"),
    )
    net, acc = refnet.train_refnet(
        net,
        data,
        steps=r.steps,
        lr=r.lr,
        momentum=r.momentum,
        batch_size=r.batch_size,
        seed=cfg.section_seed("refnet"),
    )
    net_path = os.path.join(out_dir, "refnet.rnet")
    refnet.save_refnet(net, net_path)
    acc_path = os.path.join(out_dir, "refnet_accuracy.csv")
    report.write_csv(
        acc_path, [(r.steps, acc)], header=("steps", "train_accuracy")
    )
    report.write_manifest(
        os.path.join(out_dir, "manifest_refnet-train.json"),
        "refnet-train",
        cfg.to_dict(),
        inputs=[],
        seeds={
            "dataset": cfg.section_seed("dataset"),
            "refnet": cfg.section_seed("refnet"),
        },
        outputs=[net_path, acc_path],
    )
    print(f"trained reference net: accuracy {acc:.4f}, wrote {net_path}")
    return 0


def cmd_extract(args) -> int:
    cfg, out_dir = _load_setup(args)
    net = refnet.load_refnet(args.net)
    data = _dataset(cfg)
    tags = refnet.PROBE_TAGS if args.layer == "all" else (args.layer,)
    outputs = []
    for tag in tags:
        vectors = _extract_vectors(net, data.images, tag)
        hset = hlr.HlrSet(vectors, labels=data.labels, tag=tag)
        path = os.path.join(out_dir, f"hlr_{_slug(tag)}.hlr")
        hlr.write_hlr(path, hset)
        outputs.append(path)
        print(f"extracted {hset.n_samples} x {hset.dim} vectors for {tag} -> {path}")
    report.write_manifest(
        os.path.join(out_dir, "manifest_extract.json"),
        "extract",
        cfg.to_dict(),
        inputs=[args.net],
        seeds={"dataset": cfg.section_seed("dataset")},
        outputs=outputs,
    )
    return 0


def cmd_train_som(args) -> int:
    cfg, out_dir = _load_setup(args)
    hset = hlr.read_hlr(args.hlr)
    s = cfg.som
    grid = som.init_grid(s.m, s.n, hset.dim, seed=cfg.section_seed("som"))
    tcfg = som.TrainConfig(
        sigma0=s.sigma0,
        alpha0=s.alpha0,
        epochs=s.epochs,
        epsilon_stab=s.epsilon_stab,
        seed=cfg.section_seed("som"),
        max_updates=s.max_updates,
    )
    grid, trace = som.train(grid, hset.vectors, tcfg)
    trace.window = s.window
    tag = _slug(hset.tag)
    som_path = os.path.join(out_dir, f"som_{tag}.som")
    som.save_som(grid, som_path)
    ma = som.moving_average(trace)
    loss_path = os.path.join(out_dir, f"som_{tag}_loss.csv")
    report.write_loss_csv(loss_path, ma, s.window)
    fig_path = os.path.join(out_dir, f"som_{tag}_loss.png")
    figures.save_loss_figure(fig_path, ma, s.window)
    report.write_manifest(
        os.path.join(out_dir, f"manifest_train-som_{tag}.json"),
        "train-som",
        cfg.to_dict(),
        inputs=[args.hlr],
        seeds={"som": cfg.section_seed("som")},
        outputs=[som_path, loss_path, fig_path],
    )
    final = ma[-1] if len(ma) else float("nan")
    print(f"trained {s.m}x{s.n} map on {hset.n_samples} vectors -> {som_path}")
    print(f"final normalized loss: {final:.4f}")
    return 0


def _assignments_for(grid, hset):
    if grid.dim != hset.dim:
        raise InvalidArgumentError(
            f"map dim {grid.dim} does not match vectors of dim {hset.dim}"
        )
    return som.assign_bmus(grid, hset.vectors)


def cmd_density(args) -> int:
    cfg, out_dir = _load_setup(args)
    grid = som.load_som(args.som)
    hset = hlr.read_hlr(args.hlr)
    assignments = _assignments_for(grid, hset)
    d = cfg.density
    dmap = density.kde_density(
        assignments, (grid.m, grid.n), bandwidth=d.bandwidth, wrap=d.wrap
    )
    attractors = density.find_attractors(dmap, d.top_k, d.min_percentile)
    dead = density.dead_unit_fraction(assignments, (grid.m, grid.n))
    tag = _slug(hset.tag)
    csv_path = os.path.join(out_dir, f"density_{tag}.csv")
    pgm_path = os.path.join(out_dir, f"density_{tag}.pgm")
    png_path = os.path.join(out_dir, f"density_{tag}.png")
    attr_path = os.path.join(out_dir, f"attractors_{tag}.csv")
    report.write_density_csv(csv_path, dmap)
    report.write_pgm(pgm_path, dmap.values)
    figures.save_density_figure(png_path, dmap.values, f"BMU density ({hset.tag})")
    report.write_attractors_csv(attr_path, attractors)
    report.write_manifest(
        os.path.join(out_dir, f"manifest_density_{tag}.json"),
        "density",
        cfg.to_dict(),
        inputs=[args.som, args.hlr],
        seeds={},
        outputs=[csv_path, pgm_path, png_path, attr_path],
    )
    print(
        f"density over {grid.m}x{grid.n} map: {len(attractors)} attractors, "
        f"dead-unit fraction {dead:.3f}"
    )
    return 0


def cmd_class_density(args) -> int:
    cfg, out_dir = _load_setup(args)
    grid = som.load_som(args.som)
    hset = hlr.read_hlr(args.hlr)
    if hset.labels is None:
        raise InvalidArgumentError(
            "class density needs labels, but the input file has none"
        )
    assignments = _assignments_for(grid, hset)
    d = cfg.density
    dmap = density.class_density(
        assignments,
        hset.labels,
        args.class_id,
        (grid.m, grid.n),
        bandwidth=d.bandwidth,
        wrap=d.wrap,
    )
    tag = _slug(hset.tag)
    stem = f"class{args.class_id}_density_{tag}"
    csv_path = os.path.join(out_dir, f"{stem}.csv")
    pgm_path = os.path.join(out_dir, f"{stem}.pgm")
    png_path = os.path.join(out_dir, f"{stem}.png")
    report.write_density_csv(csv_path, dmap)
    report.write_pgm(pgm_path, dmap.values)
    figures.save_density_figure(
        png_path, dmap.values, f"class {args.class_id} BMU density ({hset.tag})"
    )
    report.write_manifest(
        os.path.join(out_dir, f"manifest_class-density_{tag}.json"),
        "class-density",
        cfg.to_dict(),
        inputs=[args.som, args.hlr],
        seeds={},
        outputs=[csv_path, pgm_path, png_path],
    )
    print(f"class {args.class_id} density -> {csv_path}")
    return 0


def cmd_cluster_score(args) -> int:
    cfg, out_dir = _load_setup(args)
    grid = som.load_som(args.som)
    hset = hlr.read_hlr(args.hlr)
    if hset.labels is None:
        raise InvalidArgumentError(
            "cluster scoring needs labels, but the input file has none"
        )
    assignments = _assignments_for(grid, hset)
    k = cfg.cluster.k if cfg.cluster.k is not None else cfg.dataset.n_classes
    rep = cluster.clustering_score_experiment(
        assignments,
        hset.labels,
        k,
        n_seeds=cfg.cluster.n_seeds,
        base_seed=cfg.section_seed("cluster"),
        layer_tag=hset.tag,
    )
    tag = _slug(hset.tag)
    csv_path = os.path.join(out_dir, f"vscores_{tag}.csv")
    png_path = os.path.join(out_dir, f"vscores_{tag}.png")
    report.write_vscore_csv(csv_path, [rep])
    figures.save_vscore_figure(png_path, [rep])
    report.write_manifest(
        os.path.join(out_dir, f"manifest_cluster-score_{tag}.json"),
        "cluster-score",
        cfg.to_dict(),
        inputs=[args.som, args.hlr],
        seeds={"cluster": cfg.section_seed("cluster")},
        outputs=[csv_path, png_path],
    )
    print(f"V-measure over {cfg.cluster.n_seeds} seeds: mean {rep.mean:.4f}")
    return 0


def cmd_attack(args) -> int:
    cfg, out_dir = _load_setup(args)
    net = refnet.load_refnet(args.net)
    soms = {}
    if args.som_l1:
        soms["L1"] = som.load_som(args.som_l1)
    if args.som_l2:
        soms["L2"] = som.load_som(args.som_l2)
    if not soms:
        raise InvalidArgumentError("provide --som-l1 and/or --som-l2")
    data = _dataset(cfg)
    a = cfg.attack
    rng = np.random.default_rng(cfg.section_seed("attack"))
    n_images = min(a.n_images, data.n_samples)
    idx = rng.choice(data.n_samples, size=n_images, replace=False)
    pcfg = attack.PgdConfig(
        eps=max(a.eps_values),
        n_iter=a.n_iter,
        step=a.step,
        rand_init=a.rand_init,
        targeted=a.targeted,
        seed=cfg.section_seed("attack"),
    )
    curves = attack.displacement_experiment(
        net, soms, data.images[idx], data.labels[idx], a.eps_values, pcfg
    )
    ttests = {tag: attack.displacement_t_tests(c) for tag, c in curves.items()}
    curve_path = os.path.join(out_dir, "displacement.csv")
    raw_path = os.path.join(out_dir, "displacement_raw.csv")
    ttest_path = os.path.join(out_dir, "displacement_ttests.csv")
    png_path = os.path.join(out_dir, "displacement.png")
    report.write_displacement_csv(curve_path, curves)
    report.write_displacement_raw_csv(raw_path, curves)
    report.write_ttest_csv(ttest_path, ttests)
    figures.save_displacement_figure(png_path, curves)
    report.write_manifest(
        os.path.join(out_dir, "manifest_attack.json"),
        "attack",
        cfg.to_dict(),
        inputs=[args.net] + [p for p in (args.som_l1, args.som_l2) if p],
        seeds={
            "dataset": cfg.section_seed("dataset"),
            "attack": cfg.section_seed("attack"),
        },
        outputs=[curve_path, raw_path, ttest_path, png_path],
    )
    for tag in sorted(curves):
        means = ", ".join(
            f"eps={e:g}: {m:.3f}" for e, m in zip(a.eps_values, curves[tag].means)
        )
        print(f"{tag} mean displacement - {means}")
    return 0


def cmd_invert(args) -> int:
    cfg, out_dir = _load_setup(args)
    net = refnet.load_refnet(args.net)
    grid = som.load_som(args.som)
    hset = hlr.read_hlr(args.hlr)
    assignments = _assignments_for(grid, hset)
    d = cfg.density
    dmap = density.kde_density(
        assignments, (grid.m, grid.n), bandwidth=d.bandwidth, wrap=d.wrap
    )
    iv = cfg.invert
    icfg = invert.InversionConfig(
        lr=iv.lr,
        n_iter=iv.n_iter,
        seed=cfg.section_seed("invert"),
        smoothness_lambda=iv.smoothness_lambda,
        init=iv.init,
    )
    results = invert.invert_attractors(
        net, grid, dmap, hset.tag, d.top_k, icfg, d.min_percentile
    )
    tag = _slug(hset.tag)
    outputs = []
    loss_rows = []
    for rank, res in enumerate(results, start=1):
        pgm_path = os.path.join(out_dir, f"invert_{tag}_rank{rank}.pgm")
        report.write_pgm(pgm_path, res.image)
        outputs.append(pgm_path)
        for it, value in enumerate(res.loss_trace):
            loss_rows.append((rank, it, float(value)))
    loss_path = os.path.join(out_dir, f"invert_{tag}_losses.csv")
    report.write_csv(loss_path, loss_rows, header=("rank", "iteration", "cosine"))
    outputs.append(loss_path)
    if results:
        png_path = os.path.join(out_dir, f"invert_{tag}.png")
        figures.save_inversion_figure(
            png_path,
            [r.image for r in results],
            f"inverted attractor codes ({hset.tag})",
        )
        outputs.append(png_path)
    report.write_manifest(
        os.path.join(out_dir, f"manifest_invert_{tag}.json"),
        "invert",
        cfg.to_dict(),
        inputs=[args.net, args.som, args.hlr],
        seeds={"invert": cfg.section_seed("invert")},
        outputs=outputs,
    )
    losses = ", ".join(f"{r.final_loss:.4f}" for r in results)
    print(f"inverted {len(results)} attractor codes; final losses: {losses}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON pipeline config")
    common.add_argument("--out", metavar="DIR", help="output directory")
    common.add_argument("--seed", type=int, metavar="N", help="master seed override")

    parser = argparse.ArgumentParser(
        prog="somcodes",
        description="map-based analysis of pooled hidden-layer activations",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser(
        "refnet-train", parents=[common], help="train the reference classifier"
    )
    p.set_defaults(func=cmd_refnet_train)

    p = sub.add_parser(
        "extract", parents=[common], help="extract pooled activation vectors"
    )
    p.add_argument("--net", required=True, help="reference net checkpoint")
    p.add_argument(
        "--layer",
        default="all",
        choices=list(refnet.PROBE_TAGS) + ["all"],
        help="probe layer to extract",
    )
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser(
        "train-som", parents=[common], help="train a map on extracted vectors"
    )
    p.add_argument("--hlr", required=True, help="input vector file")
    p.set_defaults(func=cmd_train_som)

    p = sub.add_parser(
        "density", parents=[common], help="BMU density map and attractors"
    )
    p.add_argument("--som", required=True, help="map checkpoint")
    p.add_argument("--hlr", required=True, help="input vector file")
    p.set_defaults(func=cmd_density)

    p = sub.add_parser(
        "class-density", parents=[common], help="BMU density of one class"
    )
    p.add_argument("--som", required=True, help="map checkpoint")
    p.add_argument("--hlr", required=True, help="input vector file")
    p.add_argument("--class-id", type=int, required=True, help="class to isolate")
    p.set_defaults(func=cmd_class_density)

    p = sub.add_parser(
        "cluster-score", parents=[common], help="k-means V-measure of BMUs"
    )
    p.add_argument("--som", required=True, help="map checkpoint")
    p.add_argument("--hlr", required=True, help="input vector file")
    p.set_defaults(func=cmd_cluster_score)

    p = sub.add_parser(
        "attack", parents=[common], help="BMU displacement under attack"
    )
    p.add_argument("--net", required=True, help="reference net checkpoint")
    p.add_argument("--som-l1", help="map checkpoint for probe L1")
    p.add_argument("--som-l2", help="map checkpoint for probe L2")
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser(
        "invert", parents=[common], help="invert attractor codes to images"
    )
    p.add_argument("--net", required=True, help="reference net checkpoint")
    p.add_argument("--som", required=True, help="map checkpoint")
    p.add_argument("--hlr", required=True, help="vectors whose BMUs locate attractors")
    p.set_defaults(func=cmd_invert)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SomcodesError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
