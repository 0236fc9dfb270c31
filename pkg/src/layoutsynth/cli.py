"""Command-line pipeline: every stage reads one config file plus overrides.

Exit codes: 0 success, 2 configuration/validation error, 3 runtime error.
Each command writes its artifacts under the config's output directory along
with a ``<command>.manifest.json`` naming input hashes, output hashes, the
config digest, and the seed - no timestamps, so identical runs produce
identical bytes.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .checkpoint import config_digest, file_digest
from .config import RunConfig, load_config
from .encoder import (
    EncoderConfig,
    load_encoder,
    pseudo_label_sample,
    train,
)
from .errors import ConfigError, InputError, LayoutSynthError, ProvenanceError
from .generator import load_generator, train_toy_generator
from .images import save_image, tile_sheet
from .labeling import SparseLabelerConfig, label_sparse, upscale_mask
from .masks import colorize, load_annotations, load_mask, rasterize_annotations, save_mask
from .metrics import (
    ConfusionMatrix,
    accumulate_confusion,
    landmark_rmse,
    load_landmarks,
    metric_report,
)
from .prototypes import (
    DenseVectorSet,
    dense_prototypes,
    load_pair_manifest,
    load_prototypes,
    save_prototypes,
    sparse_prototypes,
)
from .synthesis import SynthesisRequest, layout_fidelity_probe, synthesize_from_mask, variant_seed


def _dir_digest(path: Path) -> str:
    entries = sorted(
        (p.name, file_digest(p)) for p in path.iterdir() if p.is_file()
    )
    return config_digest(entries)


def _input_digests(config: RunConfig, *names: str) -> dict[str, str]:
    digests = {}
    for name in names:
        value = getattr(config.paths, name)
        p = Path(value)
        digests[name] = _dir_digest(p) if p.is_dir() else file_digest(p)
    return digests


def _write_manifest(
    out_dir: Path,
    command: str,
    config: RunConfig,
    inputs: dict[str, str],
    outputs: list[Path],
    params: dict | None = None,
) -> Path:
    manifest = {
        "command": command,
        "config_digest": config_digest(config.to_dict()),
        "seed": config.seed,
        "inputs": inputs,
        "outputs": {
            str(p.relative_to(out_dir)): file_digest(p) for p in sorted(outputs)
        },
        "params": params or {},
    }
    path = out_dir / f"{command}.manifest.json"
    path.write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n")
    return path


def _out_dir(config: RunConfig) -> Path:
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _check_prototype_chain(config: RunConfig, meta: dict, generator, allow: bool) -> None:
    recorded = meta.get("generator_hash")
    if recorded and recorded != generator.weights_hash():
        if allow:
            print("warning: prototypes were extracted against a different generator",
                  file=sys.stderr)
        else:
            raise ProvenanceError(
                "paths.prototypes: extracted against a different generator "
                "(rerun extract-prototypes or pass --allow-provenance-mismatch)"
            )


# --------------------------------------------------------------------------
# Commands
# --------------------------------------------------------------------------


def cmd_train_toy_gan(args) -> int:
    config = load_config(args.config, args.set)
    config.require_paths("dataset")
    out = _out_dir(config)
    result = train_toy_generator(config.paths.dataset, config.toy_gan)
    gen_path = out / "generator.ckpt"
    result.generator.save(gen_path)
    loss_path = out / "toy_gan_loss.csv"
    with loss_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "d_loss", "g_loss"])
        for step, d, g in result.history:
            writer.writerow([step, f"{d:.6f}", f"{g:.6f}"])
    _write_manifest(
        out, "train-toy-gan", config,
        inputs=_input_digests(config, "dataset"),
        outputs=[gen_path, loss_path],
        params={"steps": config.toy_gan.steps, "generator_hash": result.generator.weights_hash()},
    )
    d_loss, g_loss = result.final_losses
    print(f"wrote {gen_path} (final d_loss {d_loss:.4f}, g_loss {g_loss:.4f})")
    return 0


def cmd_extract_prototypes(args) -> int:
    config = load_config(args.config, args.set)
    config.require_paths("generator", "pairs_manifest")
    out = _out_dir(config)
    generator = load_generator(config.paths.generator)
    classes, pairs = load_pair_manifest(config.paths.pairs_manifest)
    kinds = {p.mask.kind for p in pairs}
    if kinds != {config.mode}:
        raise ConfigError(
            f"mode: config says {config.mode!r} but the pair manifest masks are {sorted(kinds)}"
        )
    if config.mode == "dense":
        vecset = dense_prototypes(generator, pairs)
    else:
        vecset = sparse_prototypes(generator, pairs)
    proto_path = out / "prototypes.ckpt"
    save_prototypes(vecset, proto_path, class_names=classes,
                    generator_hash=generator.weights_hash())
    _write_manifest(
        out, "extract-prototypes", config,
        inputs=_input_digests(config, "generator", "pairs_manifest"),
        outputs=[proto_path],
        params={"mode": config.mode, "pair_count": len(pairs),
                "prototypes_hash": vecset.digest()},
    )
    print(f"wrote {proto_path} ({config.mode}, {len(pairs)} pairs)")
    return 0


def cmd_pseudo_label(args) -> int:
    config = load_config(args.config, args.set)
    config.require_paths("generator", "prototypes")
    out = _out_dir(config)
    generator = load_generator(config.paths.generator)
    vecset, meta = load_prototypes(config.paths.prototypes)
    _check_prototype_chain(config, meta, generator, args.allow_provenance_mismatch)
    md = generator.metadata
    pseudo_dir = out / "pseudo"
    pseudo_dir.mkdir(parents=True, exist_ok=True)
    outputs = []
    for i in range(args.count):
        seed = variant_seed(config.seed, i)
        sample = generator.sample(seed)
        mask = pseudo_label_sample(sample, vecset, config.sparse_labeler)
        mask = upscale_mask(mask, md.output_width, md.output_height)
        mask_path = pseudo_dir / f"mask_{i:04d}.png"
        image_path = pseudo_dir / f"image_{i:04d}.png"
        save_mask(mask, mask_path, class_names=meta.get("class_names"))
        save_image(sample.image, image_path)
        outputs += [mask_path, Path(str(mask_path) + ".json"), image_path]
    _write_manifest(
        out, "pseudo-label", config,
        inputs=_input_digests(config, "generator", "prototypes"),
        outputs=outputs,
        params={"count": args.count,
                "mode": "dense" if isinstance(vecset, DenseVectorSet) else "sparse"},
    )
    print(f"wrote {args.count} pseudo-labeled pairs under {pseudo_dir}")
    return 0


def cmd_train_encoder(args) -> int:
    config = load_config(args.config, args.set)
    config.require_paths("generator", "prototypes")
    out = _out_dir(config)
    generator = load_generator(config.paths.generator)
    vecset, meta = load_prototypes(config.paths.prototypes)
    _check_prototype_chain(config, meta, generator, args.allow_provenance_mismatch)
    mode = "dense" if isinstance(vecset, DenseVectorSet) else "sparse"
    if mode != config.mode:
        raise ConfigError(f"mode: config says {config.mode!r} but prototypes are {mode}")
    md = generator.metadata
    encoder_config = EncoderConfig(
        input_channels=vecset.class_count + 1,
        layer_count=md.layer_count,
        d_w=md.d_w,
        input_height=md.output_height,
        input_width=md.output_width,
        base_channels=config.encoder.base_channels,
    )
    result = train(
        generator, vecset,
        train_config=config.train,
        encoder_config=encoder_config,
        sparse_config=config.sparse_labeler,
        out_dir=out,
        class_names=meta.get("class_names"),
    )
    outputs = [p for p in out.iterdir()
               if p.is_file() and not p.name.endswith("manifest.json")]
    _write_manifest(
        out, "train-encoder", config,
        inputs=_input_digests(config, "generator", "prototypes"),
        outputs=outputs,
        params={"iterations": config.train.iterations, "mode": mode,
                "final_loss": result.losses[-1]},
    )
    print(f"wrote {result.checkpoint_path} (final loss {result.losses[-1]:.4f})")
    return 0


def _load_layout(path: Path):
    if path.suffix == ".json":
        return rasterize_annotations(load_annotations(path))
    return load_mask(path)


def cmd_synthesize(args) -> int:
    config = load_config(args.config, args.set)
    config.require_paths("generator", "encoder")
    out = _out_dir(config)
    generator = load_generator(config.paths.generator)
    bundle = load_encoder(config.paths.encoder)
    mask = _load_layout(Path(args.mask))
    request = SynthesisRequest(
        mask=mask,
        mix_layers=args.mix_layers if args.mix_layers is not None
        else config.synthesis.mix_layers,
        seed=args.seed if args.seed is not None else config.seed,
        variant_count=args.variants or config.synthesis.variant_count,
    )
    result = synthesize_from_mask(
        bundle, generator, request,
        enforce_provenance=not args.allow_provenance_mismatch,
    )
    synth_dir = out / "synth"
    synth_dir.mkdir(parents=True, exist_ok=True)
    outputs = []
    for v, image in enumerate(result.images):
        path = synth_dir / f"variant_{v:02d}.png"
        save_image(image, path)
        outputs.append(path)
    fidelity = None
    if config.paths.prototypes and Path(config.paths.prototypes).exists():
        vecset, _ = load_prototypes(config.paths.prototypes)
        fidelity = float(np.mean([
            layout_fidelity_probe(generator, vecset, mask, lat, config.sparse_labeler)
            for lat in result.latents
        ]))
    _write_manifest(
        out, "synthesize", config,
        inputs=_input_digests(config, "generator", "encoder"),
        outputs=outputs,
        params={"mask": str(args.mask), "mix_layers": result.mix_layers,
                "seed": request.seed, "variant_seeds": result.variant_seeds,
                "fidelity": fidelity},
    )
    note = f", mean fidelity {fidelity:.3f}" if fidelity is not None else ""
    print(f"wrote {len(outputs)} variants under {synth_dir}{note}")
    return 0


def _check_pred_provenance(config: RunConfig, pred_dir: Path, allow: bool) -> None:
    """Refuse to score artifacts produced from different checkpoints."""
    current = {}
    for name in ("generator", "encoder", "prototypes"):
        value = getattr(config.paths, name)
        if value and Path(value).exists():
            current[name] = file_digest(Path(value))
    for manifest_path in sorted(pred_dir.glob("*.manifest.json")):
        recorded = json.loads(manifest_path.read_text()).get("inputs", {})
        for name, digest in recorded.items():
            if name in current and current[name] != digest:
                if allow:
                    print(f"warning: {manifest_path.name} was produced with a different "
                          f"{name} checkpoint", file=sys.stderr)
                else:
                    raise ProvenanceError(
                        f"paths.{name}: {manifest_path.name} records a different "
                        f"{name} hash (pass --allow-provenance-mismatch to override)"
                    )


def cmd_evaluate(args) -> int:
    config = load_config(args.config, args.set)
    out = _out_dir(config)
    pred_dir, gt_dir = Path(args.pred), Path(args.gt)
    if not pred_dir.is_dir():
        raise ConfigError(f"--pred: {pred_dir} is not a directory")
    if not gt_dir.is_dir():
        raise ConfigError(f"--gt: {gt_dir} is not a directory")
    _check_pred_provenance(config, pred_dir, args.allow_provenance_mismatch)

    pred_masks = {p.name: p for p in pred_dir.glob("mask_*.png")}
    gt_masks = {p.name: p for p in gt_dir.glob("mask_*.png")}
    if not pred_masks:
        pred_masks = {p.name: p for p in pred_dir.glob("*.png") if "image" not in p.name}
        gt_masks = {p.name: p for p in gt_dir.glob("*.png") if "image" not in p.name}
    common = sorted(set(pred_masks) & set(gt_masks))
    report: dict = {}
    matrix = None
    if common:
        first_gt = load_mask(gt_masks[common[0]])
        matrix = ConfusionMatrix.empty(first_gt.class_count)
        for name in common:
            pred = load_mask(pred_masks[name])
            gt = load_mask(gt_masks[name])
            matrix = accumulate_confusion(pred, gt, matrix)

    rmse = None
    pred_lm = {p.name: p for p in pred_dir.glob("landmarks_*.json")}
    gt_lm = {p.name: p for p in gt_dir.glob("landmarks_*.json")}
    common_lm = sorted(set(pred_lm) & set(gt_lm))
    if common_lm:
        rmse = landmark_rmse(
            [load_landmarks(pred_lm[n]) for n in common_lm],
            [load_landmarks(gt_lm[n]) for n in common_lm],
        )
    if matrix is None and rmse is None:
        raise InputError("no matching mask or landmark files between --pred and --gt")

    report = metric_report(matrix, config.metrics, rmse)
    report["compared_files"] = len(common)
    report_path = out / "report.json"
    report_path.write_text(json.dumps(report, sort_keys=True, indent=2) + "\n")
    csv_path = out / "report.csv"
    with csv_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["metric", "value"])
        for key in sorted(report):
            writer.writerow([key, report[key]])
    for key in sorted(report):
        value = report[key]
        print(f"{key}: {value:.4f}" if isinstance(value, float) else f"{key}: {value}")
    return 0


def cmd_sweep_kt(args) -> int:
    config = load_config(args.config, args.set)
    config.require_paths("generator", "prototypes")
    out = _out_dir(config)
    generator = load_generator(config.paths.generator)
    vecset, meta = load_prototypes(config.paths.prototypes)
    _check_prototype_chain(config, meta, generator, args.allow_provenance_mismatch)
    if isinstance(vecset, DenseVectorSet):
        raise ConfigError("mode: k/t sweep needs sparse prototypes")
    ks = [int(v) for v in args.ks.split(",")]
    ts = [float(v) for v in args.ts.split(",")]
    sweep_dir = out / "sweep"
    sweep_dir.mkdir(parents=True, exist_ok=True)
    outputs = []
    for i in range(args.count):
        seed = variant_seed(config.seed, i)
        sample = generator.sample(seed)
        rows = []
        for k in ks:
            row = []
            for t in ts:
                mask = label_sparse(sample.features, vecset, SparseLabelerConfig(k=k, t=t))
                path = sweep_dir / f"sample{i}_k{k}_t{t:g}.png"
                save_mask(mask, path, class_names=meta.get("class_names"))
                outputs += [path, Path(str(path) + ".json")]
                row.append(colorize(mask))
            rows.append(row)
        grid_path = sweep_dir / f"sample{i}_grid.png"
        sheet = tile_sheet(rows)
        save_image((sheet.astype(np.float32) / 127.5 - 1.0).transpose(2, 0, 1), grid_path)
        outputs.append(grid_path)
    _write_manifest(
        out, "sweep-kt", config,
        inputs=_input_digests(config, "generator", "prototypes"),
        outputs=outputs,
        params={"ks": ks, "ts": ts, "count": args.count},
    )
    print(f"wrote {len(ks) * len(ts) * args.count} sweep masks under {sweep_dir}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .server import create_app

    app = create_app(args.models, allow_origins=args.origins)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


# --------------------------------------------------------------------------
# Parser
# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="layoutsynth",
        description="Few-shot semantic image synthesis pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, provenance_flag: bool = False):
        p.add_argument("--config", default=None, help="YAML run configuration")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config field (dotted path)")
        if provenance_flag:
            p.add_argument("--allow-provenance-mismatch", action="store_true",
                           help="proceed even if artifact hashes do not line up")

    p = sub.add_parser("train-toy-gan", help="adversarially train the toy generator")
    common(p)
    p.set_defaults(func=cmd_train_toy_gan)

    p = sub.add_parser("extract-prototypes", help="pool class prototypes from labeled pairs")
    common(p)
    p.set_defaults(func=cmd_extract_prototypes)

    p = sub.add_parser("pseudo-label", help="write pseudo-labeled mask/image pairs")
    common(p, provenance_flag=True)
    p.add_argument("--count", type=int, default=8)
    p.set_defaults(func=cmd_pseudo_label)

    p = sub.add_parser("train-encoder", help="train the layout encoder")
    common(p, provenance_flag=True)
    p.set_defaults(func=cmd_train_encoder)

    p = sub.add_parser("synthesize", help="render images from a layout file")
    common(p, provenance_flag=True)
    p.add_argument("--mask", required=True, help="mask PNG or sparse annotation JSON")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--mix-layers", type=int, default=None)
    p.add_argument("--variants", type=int, default=None)
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("evaluate", help="score predicted masks/landmarks against ground truth")
    common(p, provenance_flag=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep-kt", help="sparse pseudo-label grid over k and t")
    common(p, provenance_flag=True)
    p.add_argument("--ks", default="1,3,5")
    p.add_argument("--ts", default="-1,0,0.5")
    p.add_argument("--count", type=int, default=1)
    p.set_defaults(func=cmd_sweep_kt)

    p = sub.add_parser("serve", help="run the interactive studio HTTP server")
    p.add_argument("--models", required=True, help="directory of model bundles")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8321)
    p.add_argument("--origins", nargs="*", default=None,
                   help="allowed browser origins (CORS)")
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except LayoutSynthError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
