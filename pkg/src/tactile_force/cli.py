"""Command-line pipeline: simulate, infer, train, eval.

Every command reads a config and a seed, writes its outputs atomically
(temp file + rename), and drops a run manifest next to them so the run can
be reproduced from the manifest alone. Exit codes: 0 success, 2 usage or
config error, 3 data-integrity error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .baselines import LinearModel, linear_fit, linear_predict
from .dataset import (
    SampleRecord,
    featurize_flat,
    featurize_voxel,
    filter_by_sources,
    load_manifest_splits,
    make_dataset,
    write_manifest,
    write_samples_jsonl,
)
from .errors import (
    ConfigError,
    DataIntegrityError,
    DegenerateInputError,
    FrameMismatchError,
    LayoutCollisionError,
    NumericalError,
    OutOfBoundsError,
    SchemaError,
)
from .mechanics import (
    ParticleGrid,
    PlanarMotion,
    PushParams,
    SolveMethod,
    infer_force_frictionless,
    infer_force_with_friction,
)
from .metrics import evaluate_pairs, summarize_rows
from .net import (
    LossConfig,
    NetworkConfig,
    TrainingConfig,
    build_mlp_net,
    build_voxel_net,
    load_checkpoint,
    save_checkpoint,
    train,
)
from .net.checkpoint import KIND_MLP, KIND_VOXEL
from .sensor import ElectrodeLayout, SurfaceGeometry, default_electrode_layout
from .synthetic import (
    SOURCE_BALL_FT,
    SOURCE_PLANAR,
    SOURCE_RIGID_FT,
    SensorForwardModel,
    box_inertia,
    make_ft_samples,
    make_planar_trials,
)
from .voxel import GridSpec

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

ALL_SOURCES = (SOURCE_RIGID_FT, SOURCE_BALL_FT, SOURCE_PLANAR)


def _normalize_source(name: str) -> str:
    return name.strip().lower().replace("-", "_")


def resolve_sources(flag: str) -> set[str]:
    """Parse the --sources flag: one of the source names or 'mixed'."""
    name = _normalize_source(flag)
    if name == "mixed":
        return set(ALL_SOURCES)
    if name in ALL_SOURCES:
        return {name}
    raise ConfigError(
        f"unknown source {flag!r}; expected one of rigid-ft, ball-ft, planar-pushing, mixed"
    )


def write_text_atomic(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def write_json_atomic(path: Path, obj) -> None:
    write_text_atomic(path, json.dumps(obj, indent=2) + "\n")


def write_run_manifest(out_dir: Path, command: str, args_dict: dict, outputs: list[str], t0: float) -> None:
    manifest = {
        "command": command,
        "arguments": args_dict,
        "tool_version": __version__,
        "outputs": outputs,
        "duration_s": round(time.monotonic() - t0, 3),
    }
    write_json_atomic(out_dir / "run_manifest.json", manifest)


def _load_json(path, what: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"{what} file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{what} file {path} is not valid JSON: {exc}") from exc


def _push_params_from_config(config: dict) -> tuple[PushParams, tuple[float, float]]:
    params_cfg = dict(config.get("params", {}))
    half_extents = tuple(config.get("box_half_extents", (0.1, 0.075)))
    if "m" not in params_cfg:
        raise ConfigError("config missing field 'm' (object mass) in params")
    if "inertia" not in params_cfg:
        params_cfg["inertia"] = box_inertia(float(params_cfg["m"]), half_extents)
    try:
        return PushParams.from_config(params_cfg), half_extents
    except SchemaError as exc:
        raise ConfigError(str(exc)) from exc


def _layout_and_geometry(config: dict):
    geometry = SurfaceGeometry()
    if "geometry" in config:
        try:
            geometry = SurfaceGeometry.from_config(config["geometry"])
        except SchemaError as exc:
            raise ConfigError(str(exc)) from exc
    if "layout_file" in config:
        layout = ElectrodeLayout.from_json(config["layout_file"])
    else:
        layout = default_electrode_layout(geometry)
    return layout, geometry


def _sensor_model_from_config(config: dict) -> tuple[SensorForwardModel, SurfaceGeometry]:
    layout, geometry = _layout_and_geometry(config)
    sensor_cfg = config.get("sensor", {})
    model = SensorForwardModel(
        layout=layout,
        gain=float(sensor_cfg.get("gain", 10.0)),
        decay_length=float(sensor_cfg.get("decay_length", 0.006)),
        normal_sensitivity=float(sensor_cfg.get("normal_sensitivity", 1.0)),
        shear_sensitivity=float(sensor_cfg.get("shear_sensitivity", 0.6)),
        directional_shear_sensitivity=float(
            sensor_cfg.get("directional_shear_sensitivity", 0.8)
        ),
        noise_scale=float(sensor_cfg.get("noise_scale", 0.0)),
    )
    return model, geometry


def cmd_simulate(args) -> int:
    t0 = time.monotonic()
    config = _load_json(args.config, "config")
    seed = args.seed if args.seed is not None else int(config.get("seed", 0))
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    model, geometry = _sensor_model_from_config(config)
    sources_cfg = config.get("sources", {})
    records: list[SampleRecord] = []
    outputs: list[str] = []

    planar_cfg = sources_cfg.get(SOURCE_PLANAR, {})
    n_planar = int(planar_cfg.get("trials", 0))
    if n_planar > 0:
        params, half_extents = _push_params_from_config(config)
        episodes, planar_records = make_planar_trials(
            model,
            geometry,
            n_trials=n_planar,
            steps=int(planar_cfg.get("steps", 400)),
            seed=seed,
            params=params,
            half_extents=half_extents,
            dt=float(planar_cfg.get("dt", 1e-3)),
            magnitude_range=tuple(planar_cfg.get("magnitude_range", (0.1, 2.0))),
        )
        records.extend(planar_records)
        episodes_dir = out_dir / "episodes"
        episodes_dir.mkdir(exist_ok=True)
        for episode in episodes:
            lines = [json.dumps(row) for row in episode.step_dicts()]
            path = episodes_dir / f"{episode.trial_id}.jsonl"
            write_text_atomic(path, "\n".join(lines) + "\n")
            outputs.append(str(path.relative_to(out_dir)))
        params_blob = {
            "m": params.m,
            "inertia": params.inertia,
            "mu_s": params.mu_s,
            "n": params.n,
            "k": params.k,
            "g": params.g,
            "box_half_extents": list(half_extents),
        }
        write_json_atomic(out_dir / "params.json", params_blob)
        outputs.append("params.json")

    ft_defaults = {
        SOURCE_RIGID_FT: {"force_range": (0.5, 10.0), "cap_only": False, "cone_deg": 30.0},
        SOURCE_BALL_FT: {"force_range": (0.1, 5.0), "cap_only": True, "cone_deg": 60.0},
    }
    for tag, defaults in ft_defaults.items():
        cfg = sources_cfg.get(tag, {})
        n_trials = int(cfg.get("trials", 0))
        if n_trials > 0:
            records.extend(
                make_ft_samples(
                    model,
                    geometry,
                    source_tag=tag,
                    n_trials=n_trials,
                    samples_per_trial=int(cfg.get("samples_per_trial", 50)),
                    seed=seed + (1 if tag == SOURCE_RIGID_FT else 2),
                    force_range=tuple(cfg.get("force_range", defaults["force_range"])),
                    cone_angle_deg=float(cfg.get("cone_angle_deg", defaults["cone_deg"])),
                    cap_only=bool(cfg.get("cap_only", defaults["cap_only"])),
                )
            )

    if not records:
        raise ConfigError("config requested no trials from any source")
    split_cfg = config.get("split", {})
    splits = make_dataset(
        records,
        train_frac=float(split_cfg.get("train", 0.8)),
        val_frac=float(split_cfg.get("val", 0.1)),
        seed=seed,
    )
    samples_path = out_dir / "samples.jsonl"
    write_samples_jsonl(records, samples_path)
    write_manifest(splits, "samples.jsonl", out_dir / "dataset_manifest.json", seed)
    outputs.extend(["samples.jsonl", "dataset_manifest.json"])
    write_run_manifest(out_dir, "simulate", {"config": str(args.config), "seed": seed}, outputs, t0)
    print(f"simulate: wrote {len(records)} samples from {len(splits.trial_assignment['train']) + len(splits.trial_assignment['val']) + len(splits.trial_assignment['test'])} trials to {out_dir}")
    return EXIT_OK


def _read_episode_rows(path) -> list[dict]:
    rows = []
    try:
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if line:
                    rows.append(json.loads(line))
    except FileNotFoundError as exc:
        raise ConfigError(f"episode file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise SchemaError(f"episode file {path} is not valid JSON-lines: {exc}") from exc
    if not rows:
        raise SchemaError(f"episode file {path} is empty")
    return rows


def cmd_infer(args) -> int:
    t0 = time.monotonic()
    rows = _read_episode_rows(args.episode)
    params_cfg = _load_json(args.params, "params")
    half_extents = params_cfg.get("box_half_extents")
    if half_extents is None:
        raise ConfigError("params config missing field 'box_half_extents'")
    try:
        params = PushParams.from_config(params_cfg)
    except SchemaError as exc:
        raise ConfigError(str(exc)) from exc
    grid = ParticleGrid.uniform_rectangle(half_extents, params)
    method = SolveMethod(args.method)

    out_path = Path(args.out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    lines = ["step,t,fx,fy,objective,static_friction"]
    for i, row in enumerate(rows):
        try:
            motion = PlanarMotion(
                pose=np.array(row["pose"], dtype=float),
                v=np.array(row["v"], dtype=float),
                omega=float(row["omega"]),
                v_dot=np.array(row["v_dot"], dtype=float),
                omega_dot=float(row["omega_dot"]),
            )
            c = np.array(row["contact_point"], dtype=float)
        except KeyError as exc:
            raise SchemaError(
                f"episode row {i} missing motion field {exc.args[0]!r}"
            ) from exc
        if args.frictionless:
            result = infer_force_frictionless(motion, c, params, method)
        else:
            result = infer_force_with_friction(motion, c, grid, params, method)
        f = result.force.components
        lines.append(
            f"{i},{row.get('t', i)},{f[0]:.17g},{f[1]:.17g},"
            f"{result.objective:.17g},{int(result.static_friction)}"
        )
    write_text_atomic(out_path, "\n".join(lines) + "\n")
    write_run_manifest(
        out_path.parent,
        "infer",
        {
            "episode": str(args.episode),
            "params": str(args.params),
            "method": args.method,
            "frictionless": bool(args.frictionless),
        },
        [out_path.name],
        t0,
    )
    print(f"infer: wrote {len(rows)} rows to {out_path}")
    return EXIT_OK


MODEL_VOXEL = "voxel"
MODEL_MLP_BASELINE = "mlp-baseline"
MODEL_LINEAR = "linear"


def _train_configs(config: dict, seed: int):
    net_cfg = NetworkConfig.from_dict({**{
        "conv3d_channels": [8, 16],
        "conv2d_channels": 32,
        "fc_widths": [128, 64],
    }, **config.get("network", {}), "seed": seed})
    train_cfg = TrainingConfig.from_dict({**config.get("training", {}), "seed": seed})
    loss_dict = dict(config.get("loss", {}))
    loss_cfg = LossConfig.from_dict(loss_dict)
    return net_cfg, train_cfg, loss_cfg


def cmd_train(args) -> int:
    t0 = time.monotonic()
    config = _load_json(args.config, "config") if args.config else {}
    seed = args.seed if args.seed is not None else int(config.get("seed", 0))
    sources = resolve_sources(args.sources)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    splits, _ = load_manifest_splits(args.manifest)
    train_records = filter_by_sources(splits["train"], sources)
    val_records = filter_by_sources(splits["val"], sources)
    if not train_records:
        raise DataIntegrityError(f"no training samples for sources {sorted(sources)}")
    if not val_records:
        raise DataIntegrityError(f"no validation samples for sources {sorted(sources)}")

    net_cfg, train_cfg, loss_cfg = _train_configs(config, seed)
    use_alpha = not args.no_alpha
    if not use_alpha:
        loss_cfg = LossConfig(
            beta=0.0, psi=loss_cfg.psi, magnitude_floor=loss_cfg.magnitude_floor, mode=loss_cfg.mode
        )

    layout, geometry = _layout_and_geometry(config)

    if args.model == MODEL_LINEAR:
        e_train = np.stack([r.e for r in train_records])
        f_train = np.stack([r.f_3d for r in train_records])
        model = linear_fit(e_train, f_train, layout)
        model.to_json(out_dir / "linear_model.json")
        write_run_manifest(
            out_dir,
            "train",
            {"manifest": str(args.manifest), "sources": args.sources, "model": args.model, "seed": seed},
            ["linear_model.json"],
            t0,
        )
        print(f"train: fitted linear model S={model.scale.tolist()} -> {out_dir}")
        return EXIT_OK

    if args.model == MODEL_MLP_BASELINE:
        widths = tuple(config.get("mlp", {}).get("hidden_widths", (64, 64)))
        model = build_mlp_net(22, widths, seed=seed, layer_norm=False)
        loss_cfg = LossConfig(
            beta=0.0, psi=loss_cfg.psi, magnitude_floor=loss_cfg.magnitude_floor, mode="plain_l2"
        )
        featurize = featurize_flat
        kind, net_for_ckpt, widths_for_ckpt, layer_norm = KIND_MLP, None, widths, False
        voxel_flag = False
    elif args.no_voxel:
        widths = tuple(config.get("no_voxel_widths", (64, 64, 64, 64))) + net_cfg.fc_widths
        model = build_mlp_net(22, widths, seed=seed, layer_norm=True)
        featurize = featurize_flat
        kind, net_for_ckpt, widths_for_ckpt, layer_norm = KIND_MLP, None, widths, True
        voxel_flag = False
    else:
        grid_spec = (
            GridSpec.from_config(config["grid"]) if "grid" in config
            else GridSpec.for_geometry(geometry)
        )
        model = build_voxel_net(net_cfg, input_shape=(2,) + grid_spec.dims)
        featurize = lambda recs: featurize_voxel(recs, layout, grid_spec)
        kind, net_for_ckpt, widths_for_ckpt, layer_norm = KIND_VOXEL, net_cfg, None, True
        voxel_flag = True

    train_samples = featurize(train_records)
    val_samples = featurize(val_records)
    report = train(model, train_samples, val_samples, loss_cfg, train_cfg,
                   log_every=args.log_every)

    ckpt_path = out_dir / "checkpoint.npz"
    save_checkpoint(
        ckpt_path,
        model,
        kind=kind,
        net_config=net_for_ckpt,
        hidden_widths=widths_for_ckpt,
        layer_norm=layer_norm,
        loss_config=loss_cfg,
        metadata={
            "sources": sorted(sources),
            "ablation": {"voxel": voxel_flag, "alpha": use_alpha},
            "model": args.model,
            "best_epoch": report.best_epoch,
            "best_val_loss": report.best_val_loss,
            "seed": seed,
        },
    )
    curve_lines = ["epoch,train_loss,val_loss"]
    for i, (tr, va) in enumerate(zip(report.train_losses, report.val_losses)):
        curve_lines.append(f"{i},{tr:.9e},{va:.9e}")
    write_text_atomic(out_dir / "curves.csv", "\n".join(curve_lines) + "\n")
    write_run_manifest(
        out_dir,
        "train",
        {
            "manifest": str(args.manifest),
            "sources": args.sources,
            "model": args.model,
            "no_voxel": bool(args.no_voxel),
            "no_alpha": bool(args.no_alpha),
            "config": str(args.config) if args.config else None,
            "seed": seed,
        },
        ["checkpoint.npz", "curves.csv"],
        t0,
    )
    print(
        f"train: best val loss {report.best_val_loss:.5f} at epoch {report.best_epoch} "
        f"-> {ckpt_path}"
    )
    return EXIT_OK


def _predict_records(records, model_kind, model_path, config: dict):
    layout, geometry = _layout_and_geometry(config)
    f_true = np.stack([r.f_3d for r in records])
    if model_kind == "oracle":
        return f_true, {"kind": "oracle"}
    if model_kind == "linear":
        model = LinearModel.from_json(model_path, layout)
        preds = np.stack([linear_predict(model, r.e) for r in records])
        return preds, {"kind": "linear", "S": model.scale.tolist()}
    # checkpoint
    model, meta = load_checkpoint(model_path)
    if model.input_kind == "voxel":
        grid_spec = (
            GridSpec.from_config(config["grid"]) if "grid" in config
            else GridSpec.for_geometry(geometry)
        )
        samples = featurize_voxel(records, layout, grid_spec)
    else:
        samples = featurize_flat(records)
    preds = []
    for start in range(0, len(records), 512):
        preds.append(model.forward(samples.inputs[start : start + 512]))
    return np.concatenate(preds, axis=0), {"kind": meta["kind"], **meta.get("metadata", {})}


def cmd_eval(args) -> int:
    t0 = time.monotonic()
    config = _load_json(args.config, "config") if args.config else {}
    splits, _ = load_manifest_splits(args.manifest)
    if args.split not in splits:
        raise ConfigError(f"unknown split {args.split!r}")
    records = splits[args.split]
    if args.sources != "mixed":
        records = filter_by_sources(records, resolve_sources(args.sources))
    if not records:
        raise DataIntegrityError(f"no samples in split {args.split!r} for {args.sources}")
    if args.model_kind == "checkpoint" and args.model is None:
        raise ConfigError("--model is required for --model-kind checkpoint")
    if args.model_kind == "linear" and args.model is None:
        raise ConfigError("--model is required for --model-kind linear")

    preds, model_info = _predict_records(records, args.model_kind, args.model, config)
    f_true = np.stack([r.f_3d for r in records])
    tags = [r.source_tag for r in records]
    rows, excluded = evaluate_pairs(f_true, preds, tags)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_lines = ["direction_pct,magnitude_pct,magnitude_l1,source_tag"]
    for r in rows:
        csv_lines.append(
            f"{r.direction_pct:.17g},{r.magnitude_pct:.17g},{r.magnitude_l1:.17g},{r.source_tag}"
        )
    write_text_atomic(out_dir / "per_sample.csv", "\n".join(csv_lines) + "\n")

    summary = {
        "model": model_info,
        "split": args.split,
        "excluded_zero_vectors": excluded,
        "overall": summarize_rows(rows),
        "per_source": {
            tag: summarize_rows([r for r in rows if r.source_tag == tag])
            for tag in sorted({r.source_tag for r in rows})
        },
    }
    write_json_atomic(out_dir / "summary.json", summary)
    write_run_manifest(
        out_dir,
        "eval",
        {
            "manifest": str(args.manifest),
            "model": str(args.model) if args.model else None,
            "model_kind": args.model_kind,
            "split": args.split,
            "sources": args.sources,
        },
        ["per_sample.csv", "summary.json"],
        t0,
    )
    med = summary["overall"]["direction_pct"]["median"]
    print(f"eval: {len(rows)} samples, median direction error {med:.3f}% -> {out_dir}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tactile-force",
        description="Synthetic tactile-force pipeline: simulate, infer, train, eval.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="generate episodes and the sample dataset")
    p_sim.add_argument("--config", required=True, help="simulation config JSON")
    p_sim.add_argument("--out", required=True, help="output directory")
    p_sim.add_argument("--seed", type=int, default=None, help="override config seed")
    p_sim.set_defaults(func=cmd_simulate)

    p_inf = sub.add_parser(
        "infer",
        help="least-squares force inference on an episode file",
        description="Recover the contact force from each stored motion step.",
        epilog=(
            "Output CSV columns: step (row index), t (timestamp, s), "
            "fx, fy (inferred force, N, planar frame), objective (residual "
            "at the solution), static_friction (1 when every support "
            "particle sat below the stationary tolerance)."
        ),
    )
    p_inf.add_argument("--episode", required=True, help="episode JSON-lines file")
    p_inf.add_argument("--params", required=True, help="push params JSON")
    p_inf.add_argument(
        "--method",
        default="closed_form",
        choices=[m.value for m in SolveMethod],
        help="solver to use",
    )
    p_inf.add_argument("--frictionless", action="store_true", help="ignore support friction")
    p_inf.add_argument("--out", required=True, help="output CSV path")
    p_inf.set_defaults(func=cmd_infer)

    p_tr = sub.add_parser(
        "train",
        help="train a force model on a dataset manifest",
        description="Train the voxel network, an ablation, a baseline, or the linear model.",
        epilog=(
            "curves.csv columns: epoch, train_loss, val_loss "
            "(mean loss over the included samples of each set)."
        ),
    )
    p_tr.add_argument("--manifest", required=True, help="dataset manifest JSON")
    p_tr.add_argument("--out", required=True, help="output directory")
    p_tr.add_argument(
        "--sources",
        default="mixed",
        help="training sources: rigid-ft, ball-ft, planar-pushing, or mixed",
    )
    p_tr.add_argument(
        "--model",
        default=MODEL_VOXEL,
        choices=[MODEL_VOXEL, MODEL_MLP_BASELINE, MODEL_LINEAR],
        help="model family to train",
    )
    p_tr.add_argument("--no-voxel", action="store_true", help="replace voxel encoder with FC layers")
    p_tr.add_argument("--no-alpha", action="store_true", help="disable the alignment loss weight")
    p_tr.add_argument("--config", default=None, help="training config JSON")
    p_tr.add_argument("--seed", type=int, default=None)
    p_tr.add_argument("--log-every", type=int, default=0, help="print losses every N epochs")
    p_tr.set_defaults(func=cmd_train)

    p_ev = sub.add_parser(
        "eval",
        help="evaluate a model on a dataset split",
        description="Per-sample error metrics plus box-plot summaries per source.",
        epilog=(
            "per_sample.csv columns: direction_pct (angular error, % of a "
            "half turn), magnitude_pct (symmetric absolute percentage "
            "magnitude error), magnitude_l1 (absolute magnitude error, N), "
            "source_tag (rigid_ft / ball_ft / planar_pushing)."
        ),
    )
    p_ev.add_argument("--manifest", required=True, help="dataset manifest JSON")
    p_ev.add_argument("--model", default=None, help="checkpoint .npz or linear model JSON")
    p_ev.add_argument(
        "--model-kind",
        default="checkpoint",
        choices=["checkpoint", "linear", "oracle"],
        help="'oracle' predicts the ground truth (harness sanity check)",
    )
    p_ev.add_argument("--split", default="test", help="dataset split to evaluate")
    p_ev.add_argument("--sources", default="mixed", help="restrict to a source, or mixed")
    p_ev.add_argument("--config", default=None, help="eval config JSON (grid spec override)")
    p_ev.add_argument("--out", required=True, help="output directory")
    p_ev.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (
        SchemaError,
        DataIntegrityError,
        OutOfBoundsError,
        LayoutCollisionError,
        DegenerateInputError,
        FrameMismatchError,
    ) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
