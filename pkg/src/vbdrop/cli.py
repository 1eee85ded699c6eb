"""Command line entry point: train, eval, compress, verify.

Exit codes: 0 success, 1 training/verification/runtime failure, 2 usage
errors.  Every run writes a manifest (resolved configuration, tool version,
backend, outputs) before work starts; feeding a manifest back through
--config replays the run.
"""

import argparse
import json
import os
import sys
import time
from pathlib import Path

from . import __version__, backend
from .checkpoint import load_checkpoint, save_checkpoint
from .compression import (
    DEFAULT_THRESHOLD,
    prune_neurons,
    prune_weights,
    sweep_csv_text,
    sweep_threshold,
)
from .data import load_mnist, make_synthetic
from .errors import DataFormatError, TrainingDiverged, UsageError
from .training import TrainConfig, evaluate, train
from .variants import VARIANT_KINDS, Variant
from .verify import CHECKS, run_checks

DEFAULT_MNIST_DIR = "data/mnist"


def _add_data_args(p, include_mnist=True):
    g = p.add_argument_group("dataset")
    g.add_argument("--data", choices=["mnist", "synthetic"], default="synthetic")
    if include_mnist:
        g.add_argument("--mnist-dir", default=None,
                       help="directory with the four IDX files (or set VBDROP_MNIST_DIR)")
    g.add_argument("--data-seed", type=int, default=1234)
    g.add_argument("--synth-classes", type=int, default=4)
    g.add_argument("--synth-per-class", type=int, default=500)
    g.add_argument("--synth-test-per-class", type=int, default=200)
    g.add_argument("--synth-dim", type=int, default=16)
    g.add_argument("--synth-noise-dims", type=int, default=0)
    g.add_argument("--synth-noise-sd", type=float, default=0.25)


def _load_data(args, parser):
    if args.data == "mnist":
        directory = (args.mnist_dir or os.environ.get("VBDROP_MNIST_DIR")
                     or DEFAULT_MNIST_DIR)
        try:
            return load_mnist(directory, "train"), load_mnist(directory, "test")
        except FileNotFoundError as e:
            parser.error(f"--mnist-dir: {e}")
    common = dict(
        num_classes=args.synth_classes,
        input_dim=args.synth_dim,
        noise_sd=args.synth_noise_sd,
        noise_dims=args.synth_noise_dims,
    )
    train_ds = make_synthetic(args.data_seed, args.synth_per_class, part=0, **common)
    test_ds = make_synthetic(args.data_seed, args.synth_test_per_class, part=1,
                             **common)
    return train_ds, test_ds


def _default_arch(train_ds):
    hidden = [100, 100, 100] if train_ds.input_dim >= 256 else [32, 16]
    return [train_ds.input_dim] + hidden + [train_ds.num_classes]


def _parse_arch(text):
    try:
        widths = [int(w) for w in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad --arch {text!r}, want e.g. 784,300,100,10")
    if len(widths) < 2:
        raise argparse.ArgumentTypeError("--arch needs at least two widths")
    return widths


def _parse_sweep(text):
    try:
        lo, hi, step = (float(v) for v in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad --sweep {text!r}, want lo:hi:step")
    if step <= 0 or hi < lo:
        raise argparse.ArgumentTypeError("--sweep needs step > 0 and hi >= lo")
    values = []
    k = 0
    while True:
        v = lo + k * step
        if v > hi + 1e-9:
            break
        values.append(v)
        k += 1
    return values


def _variant_from_args(args):
    return Variant(
        kind=args.variant,
        p=args.p,
        alpha=args.alpha,
        per_weight=args.alpha_mode == "per-weight",
        structured=args.structured,
        noise_input_layer=args.noise_input_layer,
    )


def _write_manifest(out_dir, command, args, outputs, extra=None):
    config = {
        k: v for k, v in vars(args).items()
        if k not in ("func", "config", "command")
    }
    manifest = {
        "tool": "vbdrop",
        "version": __version__,
        "kernel_backend": backend.name(),
        "command": command,
        "config": config,
        "outputs": outputs,
        "started_at": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
    }
    if extra:
        manifest.update(extra)
    path = Path(out_dir) / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest, path


def _finish_manifest(manifest, path, t0):
    manifest["wall_clock_seconds"] = round(time.time() - t0, 3)
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def cmd_train(args, parser):
    train_ds, test_ds = _load_data(args, parser)
    arch = _parse_arch(args.arch) if args.arch else _default_arch(train_ds)
    variant = _variant_from_args(args)
    config = TrainConfig(
        arch=arch,
        epochs=args.epochs,
        batch_size=args.batch_size,
        optimizer=args.optimizer,
        lr=args.lr,
        beta1=args.beta1,
        beta2=args.beta2,
        adam_eps=args.adam_eps,
        momentum=args.momentum,
        kl_scale=args.kl_scale,
        warmup_epochs=args.warmup_epochs,
        lr_decay=not args.no_lr_decay,
        clip_norm=args.clip_norm,
        seed=args.seed,
        eval_every=args.eval_every,
    )
    try:
        config.validate()
    except ValueError as e:
        parser.error(str(e))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    outputs = {
        "trainlog": str(out / "trainlog.csv"),
        "checkpoint_best": str(out / "checkpoint_best.npz"),
        "checkpoint_final": str(out / "checkpoint_final.npz"),
    }
    t0 = time.time()
    manifest, mpath = _write_manifest(out, "train", args, outputs,
                                      extra={"resolved_arch": arch})
    net, log = train(train_ds, test_ds, variant, config, out_dir=out)
    log.write_csv(outputs["trainlog"])
    _finish_manifest(manifest, mpath, t0)
    final = log.records[-1].test_error if log.records else float("nan")
    print(f"trained {args.variant} for {args.epochs} epochs, "
          f"final test_error_percent: {final!r}")
    print(f"outputs in {out}")
    return 0


def cmd_eval(args, parser):
    train_ds, test_ds = _load_data(args, parser)
    net, _ = load_checkpoint(args.checkpoint)
    ds = test_ds if args.split == "test" else train_ds
    err = evaluate(net, ds)
    print(f"test_error_percent: {float(err)!r}")
    return 0


def cmd_compress(args, parser):
    net, variant = load_checkpoint(args.checkpoint)
    dataset = None
    if args.data == "mnist" or args.with_data:
        _, dataset = _load_data(args, parser)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.time()
    if args.sweep:
        if variant.structured:
            parser.error("--sweep applies to per-weight checkpoints")
        if dataset is None:
            parser.error("--sweep needs a dataset for the error column")
        outputs = {"sweep": str(out / "sweep.csv")}
        manifest, mpath = _write_manifest(out, "compress", args, outputs)
        rows = sweep_threshold(net, args.sweep, dataset)
        (out / "sweep.csv").write_text(sweep_csv_text(rows))
        print(f"{'threshold':>10} {'ratio':>10} {'error %':>8}")
        for t, ratio, err in rows:
            print(f"{t:>10.3f} {ratio:>10.2f} {err:>8.2f}")
        _finish_manifest(manifest, mpath, t0)
        return 0
    outputs = {
        "report": str(out / "report.csv"),
        "checkpoint_pruned": str(out / "checkpoint_pruned.npz"),
    }
    manifest, mpath = _write_manifest(out, "compress", args, outputs)
    if variant.structured:
        pruned, report = prune_neurons(net, args.threshold, dataset)
    else:
        pruned, report = prune_weights(net, args.threshold, dataset)
    (out / "report.csv").write_text(report.csv_text())
    save_checkpoint(pruned, variant, out / "checkpoint_pruned.npz")
    print(report.table_text(), end="")
    if report.retained_neurons:
        print(f"retained neurons: {report.neurons_text()}")
    print(f"error_after_percent: {float(report.error_after)!r}")
    _finish_manifest(manifest, mpath, t0)
    return 0


def cmd_verify(args, parser):
    names = None
    if args.check and "all" not in args.check:
        names = args.check
    ok = run_checks(names, seed=args.seed, mc_samples=args.mc_samples)
    return 0 if ok else 1


def _config_to_argv(path):
    """Turn a key=value config file (or a manifest.json) into argv tokens."""
    text = Path(path).read_text()
    pairs = []
    if text.lstrip().startswith("{"):
        config = json.loads(text).get("config", {})
        pairs = list(config.items())
    else:
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise DataFormatError(f"{path}: expected key=value, got {line!r}")
            key, value = line.split("=", 1)
            pairs.append((key.strip(), value.strip()))
    argv = []
    for key, value in pairs:
        flag = "--" + str(key).strip().replace("_", "-")
        if isinstance(value, bool):
            if value:
                argv.append(flag)
        elif value is None:
            continue
        elif isinstance(value, str) and value.lower() in ("true", "false"):
            if value.lower() == "true":
                argv.append(flag)
        elif isinstance(value, list):
            argv.extend([flag, ",".join(str(v) for v in value)])
        else:
            argv.extend([flag, str(value)])
    return argv


def build_parser():
    parser = argparse.ArgumentParser(
        prog="vbdrop",
        description="Train, evaluate, compress, and verify dense networks "
                    "with adaptive multiplicative Gaussian noise.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train a network and log per-epoch metrics")
    _add_data_args(p_train)
    p_train.add_argument("--variant", choices=VARIANT_KINDS, default="none")
    p_train.add_argument("--alpha-mode", choices=["shared", "per-weight"],
                         default="shared")
    p_train.add_argument("--structured", action="store_true",
                         help="insert per-feature gates for neuron pruning")
    p_train.add_argument("--noise-input-layer", action="store_true",
                         help="apply input-noise masks to the raw inputs too")
    p_train.add_argument("--p", type=float, default=0.5,
                         help="dropout rate of the fixed-noise baselines")
    p_train.add_argument("--alpha", type=float, default=1.0,
                         help="fixed noise variance (gaussian variants)")
    p_train.add_argument("--arch", default=None,
                         help="comma-separated widths, e.g. 784,300,100,10")
    p_train.add_argument("--epochs", type=int, default=10)
    p_train.add_argument("--batch-size", type=int, default=128)
    p_train.add_argument("--optimizer", choices=["adam", "sgd"], default="adam")
    p_train.add_argument("--lr", type=float, default=1e-3)
    p_train.add_argument("--beta1", type=float, default=0.9)
    p_train.add_argument("--beta2", type=float, default=0.999)
    p_train.add_argument("--adam-eps", type=float, default=1e-8)
    p_train.add_argument("--momentum", type=float, default=0.9)
    p_train.add_argument("--kl-scale", type=float, default=1.0,
                         help="penalty weight per epoch relative to the data "
                              "NLL sum; 1.0 is the evidence bound")
    p_train.add_argument("--warmup-epochs", type=int, default=10)
    p_train.add_argument("--no-lr-decay", action="store_true")
    p_train.add_argument("--clip-norm", type=float, default=10.0)
    p_train.add_argument("--eval-every", type=int, default=1)
    p_train.add_argument("--seed", type=int, default=0)
    p_train.add_argument("--out", default="runs/train")
    p_train.add_argument("--config", default=None,
                         help="key=value file or a manifest.json to replay")
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="report test error of a checkpoint")
    _add_data_args(p_eval)
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--split", choices=["train", "test"], default="test")
    p_eval.set_defaults(func=cmd_eval)

    p_comp = sub.add_parser("compress", help="prune a checkpoint and report sparsity")
    _add_data_args(p_comp)
    p_comp.add_argument("--with-data", action="store_true",
                        help="evaluate error on the --data dataset")
    p_comp.add_argument("--checkpoint", required=True)
    p_comp.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD,
                        help="prune where log(noise ratio) exceeds this")
    p_comp.add_argument("--sweep", type=_parse_sweep, default=None,
                        metavar="LO:HI:STEP")
    p_comp.add_argument("--out", default="runs/compress")
    p_comp.set_defaults(func=cmd_compress)

    p_ver = sub.add_parser("verify", help="run the property and oracle checks")
    p_ver.add_argument("--check", action="append", default=None,
                       choices=sorted(CHECKS) + ["all"])
    p_ver.add_argument("--mc-samples", type=int, default=1_000_000)
    p_ver.add_argument("--seed", type=int, default=0)
    p_ver.set_defaults(func=cmd_verify)
    return parser


def _inject_config(argv):
    """Expand --config FILE into its flags, keeping CLI flags authoritative."""
    for i, tok in enumerate(argv):
        if tok == "--config" and i + 1 < len(argv):
            path = argv[i + 1]
        elif tok.startswith("--config="):
            path = tok.split("=", 1)[1]
        else:
            continue
        head, tail = argv[:1], argv[1:]
        return head + _config_to_argv(path) + tail
    return argv


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        if argv and argv[0] in ("train",):
            argv = _inject_config(argv)
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code
    try:
        return args.func(args, parser)
    except SystemExit as e:
        return e.code
    except (TrainingDiverged, UsageError, DataFormatError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
