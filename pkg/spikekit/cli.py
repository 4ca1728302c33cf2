"""Command-line entry point: trace, verify, gradcheck, train, bench, energy.

Exit codes: 0 success, 1 check failure, non-finite value or aborted run, 2 usage,
config or input error, 3 folding refusal (e.g. a continuous-bound network).
"""

import argparse
import csv
import json
import logging
import platform
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime
from pathlib import Path

import numpy as np

from . import __version__
from .config import (
    build_dataset,
    build_network,
    build_train_config,
    config_hash,
    load_config,
    parse_config,
)
from .data import encode_temporal, load_csv
from .energy import measure
from .errors import (
    ConfigError,
    ContainerFormatError,
    ContractError,
    DimensionError,
    EquivalenceViolation,
    FoldingContractError,
    IdxFormatError,
    NonFiniteError,
    TrainingAborted,
)
from .folding import SPKF_VERSION, check_foldable, fold_network, load_folded, save_folded, verify_equivalence
from .gradcheck import NETWORK_KINDS, run_all
from .neurons import NEURON_KINDS, neuron_feature_table, run_neuron
from .quantizers import BOUND_MODES, INTEGERIZED
from .settings import Settings
from .training import benchmark_training_efficiency, train, write_curve_csv

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_CHECK_FAILED, EXIT_USAGE, EXIT_REFUSED = 0, 1, 2, 3
NONDETERMINISTIC_FIELDS = ["timestamp", "*_seconds", "trial_seconds"]


def banner(title):
    print("=" * 70)
    print(title)
    print("=" * 70)


def write_json(path, payload):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2, sort_keys=True)


def write_manifest(out_dir, command, cfg_hash, seed, artifacts):
    manifest = {
        "command": command,
        "config_hash": cfg_hash,
        "seed": seed,
        "versions": {
            "spikekit": __version__,
            "numpy": np.__version__,
            "python": platform.python_version(),
            "spkf_container": SPKF_VERSION,
        },
        "artifacts": sorted(str(a) for a in artifacts),
        "timestamp": datetime.now().isoformat(),
        "nondeterministic_fields": NONDETERMINISTIC_FIELDS,
    }
    path = Path(out_dir) / "manifest.json"
    write_json(path, manifest)
    return path


def _output_dir(args, settings, cfg=None):
    if getattr(args, "output_dir", None):
        return Path(args.output_dir)
    if cfg is not None:
        return Path(cfg.output_dir)
    return settings.output_dir


# --- trace ------------------------------------------------------------------


def _parse_inline(text):
    values = [v.strip() for v in text.split(",") if v.strip()]
    try:
        return [float(v) for v in values]
    except ValueError:
        raise ConfigError(f"--inline expects comma-separated numbers, got {text!r}") from None


def cmd_trace(args, settings):
    if args.list:
        table = neuron_feature_table()
        columns = list(next(iter(table.values())))
        print(f"{'neuron':<8}" + "".join(f"{c:>28}" for c in columns))
        for kind, flags in table.items():
            print(f"{kind:<8}" + "".join(f"{'✅' if flags[c] else '❌':>28}" for c in columns))
        return EXIT_OK
    if args.neuron is None:
        raise ConfigError("trace needs --neuron (or --list)")
    if args.inline is not None:
        inputs = _parse_inline(args.inline)
    elif args.input_csv is not None:
        inputs = np.loadtxt(args.input_csv, delimiter=",", ndmin=1).reshape(-1).tolist()
    else:
        raise ConfigError("trace needs --inline or --input-csv")
    if not inputs:
        raise ConfigError("trace input is empty")

    overrides = {
        key: value
        for key, value in (
            ("beta", args.beta),
            ("v_th", args.vth),
            ("alpha", args.alpha),
            ("d", args.d),
            ("n", args.n),
            ("bound_mode", args.bound_mode),
        )
        if value is not None
    }
    overrides["detach_reset"] = args.detach_reset
    try:
        _, record = run_neuron(args.neuron, inputs, **overrides)
    except ContractError as exc:
        raise ConfigError(f"bad neuron parameters: {exc}") from exc

    rows = record.rows()
    print(f"{'t':>3} {'X':>12} {'U':>12} {'S':>12} {'H':>12}")
    for t, x, u, s, h in rows:
        print(f"{t:>3} {x:>12.6g} {u:>12.6g} {s:>12.6g} {h:>12.6g}")

    out_dir = _output_dir(args, settings)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = Path(args.csv) if args.csv else out_dir / f"trace_{args.neuron}.csv"
    with open(csv_path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["t", "X", "U", "S", "H"])
        for row in rows:
            writer.writerow([row[0]] + [repr(v) for v in row[1:]])
    params_hash = config_hash({"neuron": args.neuron, "inputs": inputs, **overrides})
    write_manifest(out_dir, "trace", params_hash, None, [csv_path])
    return EXIT_OK


# --- verify -----------------------------------------------------------------


def _load_params(net, path):
    with np.load(path) as stored:
        for name in stored.files:
            net.set_parameter(name, stored[name])


def _check_shapes(net, folded):
    expected = [w.shape for w in net.weights] + [net.classifier_weight.shape]
    found = [layer.weight.shape for layer in folded.layers]
    if expected != found:
        raise ContainerFormatError(f"checkpoint layer shapes {found} do not match the config's network {expected}")


def cmd_verify(args, settings):
    cfg = load_config(args.config)
    out_dir = _output_dir(args, settings, cfg)
    banner("🔍 TRAIN/INFERENCE EQUIVALENCE CHECK")
    dataset = build_dataset(cfg)
    net = build_network(cfg, dataset.features, dataset.class_count)
    if args.params:
        _load_params(net, args.params)
    for params in net.neuron_params():
        check_foldable(params)

    artifacts = []
    if args.checkpoint:
        print(f"\n📂 Loading checkpoint {args.checkpoint}...")
        try:
            folded = load_folded(args.checkpoint)
            _check_shapes(net, folded)
        except ContainerFormatError as exc:
            print(f"❌ Corrupted checkpoint: {exc}")
            return EXIT_CHECK_FAILED
    else:
        ckpt = out_dir / "verify_checkpoint.spkf"
        out_dir.mkdir(parents=True, exist_ok=True)
        save_folded(fold_network(net), ckpt)
        folded = load_folded(ckpt)
        artifacts.append(ckpt)

    x = encode_temporal(dataset.inputs[: args.samples], cfg.net["timesteps"])
    report = verify_equivalence(net, x, tolerance=args.tolerance, folded=folded)
    for row in report.layers:
        mark = "✅" if row["passed"] else "❌"
        diff = row["max_abs_diff"]
        detail = row.get("error") or f"max |diff| {diff:.3e}, spike-count mismatches {row['spike_count_mismatches']}"
        print(f"  {mark} {row['layer']}: {detail}")

    report_path = out_dir / "verify_report.json"
    write_json(report_path, {"config_hash": cfg.hash, **report.to_dict()})
    artifacts.append(report_path)
    write_manifest(out_dir, "verify", cfg.hash, cfg.net["seed"], artifacts)
    if not report.passed:
        print(f"\n❌ Equivalence failed at layer {report.failing_layer}")
        return EXIT_CHECK_FAILED
    print("\n✅ All layers agree")
    return EXIT_OK


# --- gradcheck --------------------------------------------------------------


def cmd_gradcheck(args, settings):
    if args.trials < 1:
        raise ConfigError("--trials must be >= 1; running no checks is not a pass")
    if not args.eps > 0:
        raise ConfigError("--eps must be positive")
    banner("🧮 GRADIENT CHECK")
    results = run_all(kind=args.neuron, trials=args.trials, eps=args.eps, seed=args.seed, tolerance=args.tolerance)
    for r in results:
        mark = "✅" if r.passed else "❌"
        print(f"  {mark} {r.name}: {r.checked} trials, max deviation {r.max_deviation:.3e}")
    out_dir = _output_dir(args, settings)
    path = out_dir / "gradcheck.json"
    write_json(path, {
        "neuron": args.neuron,
        "eps": args.eps,
        "tolerance": args.tolerance,
        "checks": [r.to_dict() for r in results],
        "passed": all(r.passed for r in results),
    })
    run_hash = config_hash({"neuron": args.neuron, "trials": args.trials, "eps": args.eps, "seed": args.seed})
    write_manifest(out_dir, "gradcheck", run_hash, args.seed, [path])
    return EXIT_OK if all(r.passed for r in results) else EXIT_CHECK_FAILED


# --- train ------------------------------------------------------------------


def train_job(raw, kind, index, out_dir, checkpoint_every=0):
    """One isolated (kind, seed) run; returns a summary row. Top-level so it pickles."""
    cfg = parse_config(raw)
    dataset = build_dataset(cfg)
    net = build_network(cfg, dataset.features, dataset.class_count, kind=kind, seed=cfg.net["seed"] + index)
    tcfg = build_train_config(cfg, seed=cfg.train["seed"] + index)
    tag = f"{kind}_seed{tcfg.seed}"
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    foldable = net.neurons[0].params.quantizer is not None and net.neurons[0].params.quantizer.bound_mode == INTEGERIZED

    def on_epoch(stats, current):
        if foldable and checkpoint_every and stats.epoch % checkpoint_every == 0:
            save_folded(fold_network(current), out_dir / f"checkpoint_{tag}_epoch{stats.epoch}.spkf")

    row = {"kind": kind, "seed": tcfg.seed, "success": True, "error": None, "artifacts": []}
    start = time.time()
    try:
        result = train(net, dataset, tcfg, timesteps=cfg.net["timesteps"],
                       time_expansion=cfg.time_expansion(kind), on_epoch=on_epoch)
    except TrainingAborted as exc:
        row.update(success=False, error=str(exc), layer=exc.layer, epoch=exc.epoch)
        return row

    curve_path = out_dir / f"curve_{tag}.csv"
    write_curve_csv(result, net.depth, curve_path)
    params_path = out_dir / f"params_{tag}.npz"
    np.savez(params_path, **{name: t.data for name, t in net.parameters().items()})
    row["artifacts"] += [str(curve_path), str(params_path)]
    if foldable:
        ckpt = out_dir / f"checkpoint_{tag}.spkf"
        save_folded(fold_network(net), ckpt)
        row["artifacts"].append(str(ckpt))
    moved = result.alpha_moves(0)
    shift = dataset.meta.get("shift")
    row.update(
        final_accuracy=result.final_accuracy,
        final_loss=result.curve[-1].loss if result.curve else None,
        alpha_initial=result.initial_alphas[0],
        alpha_final=result.final_alphas[0],
        alpha_toward_shift=None if moved is None or not shift else bool(np.sign(moved) == np.sign(shift)),
        train_seconds=time.time() - start,
    )
    return row


def summarize(rows):
    """Per-kind mean, standard deviation and standard error of final accuracy."""
    summary = {}
    for kind in dict.fromkeys(r["kind"] for r in rows):
        done = [r for r in rows if r["kind"] == kind and r["success"]]
        acc = np.array([r["final_accuracy"] for r in done])
        std = float(acc.std(ddof=1)) if acc.size > 1 else 0.0
        toward = [r["alpha_toward_shift"] for r in done if r.get("alpha_toward_shift") is not None]
        summary[kind] = {
            "runs": len(done),
            "failed": sum(1 for r in rows if r["kind"] == kind and not r["success"]),
            "mean_accuracy": float(acc.mean()) if acc.size else None,
            "std_accuracy": std,
            "stderr_accuracy": std / np.sqrt(acc.size) if acc.size else None,
            "alpha_toward_shift": sum(toward) if toward else None,
            "alpha_runs": len(toward),
        }
    return summary


def cmd_train(args, settings):
    cfg = load_config(args.config)
    out_dir = _output_dir(args, settings, cfg)
    kinds = [k.strip() for k in args.kinds.split(",")] if args.kinds else [cfg.kind]
    for kind in kinds:
        if kind not in NEURON_KINDS:
            raise ConfigError(f"--kinds: unknown neuron kind {kind!r}")
    if args.seeds < 1:
        raise ConfigError("--seeds must be >= 1")
    jobs = [(kind, i) for kind in kinds for i in range(args.seeds)]

    banner("🧠 SPIKING NETWORK TRAINING")
    print(f"📂 Config: {cfg.source} (hash {cfg.hash[:12]})")
    print(f"🚀 Running {len(jobs)} runs ({', '.join(kinds)} x {args.seeds} seeds)\n")

    workers = min(settings.threads, len(jobs))
    rows = []
    start = time.time()
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(train_job, cfg.raw, k, i, out_dir, settings.checkpoint_every) for k, i in jobs]
            for i, future in enumerate(futures, 1):
                rows.append(future.result())
                _print_run(i, len(jobs), rows[-1], start)
    else:
        for i, (kind, index) in enumerate(jobs, 1):
            rows.append(train_job(cfg.raw, kind, index, out_dir, settings.checkpoint_every))
            _print_run(i, len(jobs), rows[-1], start)

    summary = summarize(rows)
    summary_json = out_dir / "summary.json"
    write_json(summary_json, {"config_hash": cfg.hash, "kinds": summary, "runs": rows})
    summary_csv = out_dir / "summary.csv"
    with open(summary_csv, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        columns = ["runs", "failed", "mean_accuracy", "std_accuracy", "stderr_accuracy", "alpha_toward_shift", "alpha_runs"]
        writer.writerow(["kind"] + columns)
        for kind, stats in summary.items():
            writer.writerow([kind] + ["" if stats[c] is None else stats[c] for c in columns])

    artifacts = [summary_json, summary_csv] + [a for r in rows for a in r["artifacts"]]
    manifest = write_manifest(out_dir, "train", cfg.hash, cfg.train["seed"], artifacts)

    banner("📊 TRAINING COMPLETE")
    for kind, stats in summary.items():
        if stats["mean_accuracy"] is None:
            print(f"❌ {kind}: every run aborted")
            continue
        print(f"✅ {kind}: accuracy {stats['mean_accuracy']:.4f} ± {stats['stderr_accuracy']:.4f} (n={stats['runs']})")
    print(f"⏱️  Total time: {(time.time() - start) / 60:.1f} minutes")
    print(f"💾 Summary saved to: {summary_json}")
    print(f"💾 Manifest: {manifest}")
    return EXIT_OK if all(r["success"] for r in rows) else EXIT_CHECK_FAILED


def _print_run(i, total, row, start):
    elapsed = time.time() - start
    eta = "" if i == total else f" | ETA: {elapsed / i * (total - i) / 60:.0f}m"
    if row["success"]:
        print(f"[{i}/{total}] {row['kind']} seed {row['seed']}: ✅ accuracy {row['final_accuracy']:.4f}{eta}")
    else:
        print(f"[{i}/{total}] {row['kind']} seed {row['seed']}: ❌ {row['error']}{eta}")


# --- bench ------------------------------------------------------------------


def cmd_bench(args, settings):
    cfg = load_config(args.config)
    out_dir = _output_dir(args, settings, cfg)
    bench = cfg.bench
    banner("⏱️  TRAINING EFFICIENCY BENCHMARK")
    d, steps = cfg.neuron["d"], cfg.net["timesteps"]
    print(f"integer paradigm: {steps} steps | binary paradigm: {steps * d} steps | width {bench['width']}")
    result = benchmark_training_efficiency(
        d=d,
        timesteps=steps,
        width=bench["width"],
        batch=bench["batch"],
        batches_per_epoch=bench["batches"],
        trials=bench["trials"],
        in_features=cfg.data.get("features", 64),
        seed=cfg.net["seed"],
    )
    path = out_dir / "bench.json"
    write_json(path, {"config_hash": cfg.hash, **result.to_dict()})
    write_manifest(out_dir, "bench", cfg.hash, cfg.net["seed"], [path])
    print(f"✅ integer epoch {result.integer_median:.3f}s | binary epoch {result.binary_median:.3f}s")
    print(f"📊 ratio (binary / integer): {result.ratio:.2f}")
    print(f"💾 Results saved to: {path}")
    return EXIT_OK


# --- energy -----------------------------------------------------------------


def cmd_energy(args, settings):
    try:
        folded = load_folded(args.checkpoint)
    except ContainerFormatError as exc:
        print(f"❌ Corrupted checkpoint: {exc}")
        return EXIT_CHECK_FAILED
    width = folded.layers[0].fan_in
    cfg = load_config(args.config) if args.config else None
    e_ac, e_mac = settings.e_ac_pj, settings.e_mac_pj
    if cfg is not None:
        e_ac = cfg.energy["e_ac_pj"] if cfg.energy["e_ac_pj"] is not None else e_ac
        e_mac = cfg.energy["e_mac_pj"] if cfg.energy["e_mac_pj"] is not None else e_mac
    steps = args.timesteps or (cfg.net["timesteps"] if cfg is not None else 4)
    if args.zeros:
        inputs = np.zeros((args.samples, width))
    elif args.data:
        inputs = load_csv(args.data).inputs[: args.samples]
    elif cfg is not None:
        inputs = build_dataset(cfg).inputs[: args.samples]
    else:
        raise ConfigError("energy needs --data, --config or --zeros")
    if inputs.shape[1] != width:
        raise DimensionError(f"inputs have {inputs.shape[1]} features, checkpoint expects {width}")

    banner("⚡ ENERGY ESTIMATE")
    report, _ = measure(folded, encode_temporal(inputs, steps), e_ac_pj=e_ac, e_mac_pj=e_mac)
    for layer in report.layers:
        print(f"  {layer.layer:<12} MAC {layer.mac_count:>12} AC {layer.ac_count:>12} "
              f"adds {layer.constant_adds:>8} rate {layer.firing_rate:.4f}")
    print(f"📊 estimated energy: {report.energy_joules:.4e} J")
    out_dir = _output_dir(args, settings, cfg)
    path = out_dir / "energy.json"
    write_json(path, report.to_dict())
    run_hash = cfg.hash if cfg is not None else config_hash({"checkpoint": str(args.checkpoint), "zeros": args.zeros})
    write_manifest(out_dir, "energy", run_hash, None, [path])
    print(f"💾 Results saved to: {path}")
    return EXIT_OK


# --- entry point ------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(prog="spikekit", description=__doc__.splitlines()[0])
    parser.add_argument("--verbose", action="store_true", help="log at INFO level")
    parser.add_argument("--output-dir", help="override the output directory")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("trace", help="per-step X/U/S/H trace of one neuron")
    p.add_argument("--neuron", choices=NEURON_KINDS)
    p.add_argument("--list", action="store_true", help="print the neuron feature table")
    p.add_argument("--inline", help="comma-separated input currents")
    p.add_argument("--input-csv", help="file of input currents")
    p.add_argument("--beta", type=float)
    p.add_argument("--vth", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--d", type=int)
    p.add_argument("--n", type=float)
    p.add_argument("--bound-mode", choices=BOUND_MODES)
    p.add_argument("--detach-reset", action="store_true")
    p.add_argument("--csv", help="trace CSV path (default: <output-dir>/trace_<neuron>.csv)")
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("verify", help="check spike inference against the training path")
    p.add_argument("--config", required=True)
    p.add_argument("--tolerance", type=float, default=1e-9)
    p.add_argument("--checkpoint", help="SPKF container to verify instead of a fresh fold")
    p.add_argument("--params", help="trained parameters (.npz written by train)")
    p.add_argument("--samples", type=int, default=64)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("gradcheck", help="audit STE rules and BPTT gradients")
    p.add_argument("--neuron", choices=NETWORK_KINDS, default="asn")
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--eps", type=float, default=1e-6)
    p.add_argument("--tolerance", type=float, default=1e-5)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("train", help="train one or more (kind, seed) runs")
    p.add_argument("--config", required=True)
    p.add_argument("--seeds", type=int, default=1)
    p.add_argument("--kinds", help="comma-separated neuron kinds (default: the config's)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("bench", help="integer vs binary paradigm training time")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("energy", help="operation counts and energy of a folded checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--config")
    p.add_argument("--data", help="CSV dataset (label,f0,f1,...)")
    p.add_argument("--zeros", action="store_true", help="all-zero inputs")
    p.add_argument("--samples", type=int, default=64)
    p.add_argument("--timesteps", type=int)
    p.set_defaults(func=cmd_energy)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        settings = Settings.from_env()
        level = logging.INFO if args.verbose else getattr(logging, settings.log_level, logging.WARNING)
        logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
        return args.func(args, settings)
    except (ConfigError, DimensionError, IdxFormatError) as exc:
        print(f"❌ {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ContainerFormatError, EquivalenceViolation, NonFiniteError, TrainingAborted) as exc:
        print(f"❌ {exc}", file=sys.stderr)
        return EXIT_CHECK_FAILED
    except FoldingContractError as exc:
        print(f"❌ Refused: {exc}", file=sys.stderr)
        return EXIT_REFUSED
    except ContractError as exc:
        # a precondition on user-supplied input
        print(f"❌ {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
