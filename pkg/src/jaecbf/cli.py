"""Command-line front end: simulate, train, enhance, evaluate, baseline, gradcheck.

Exit codes: 0 success, 2 usage/config error, 3 numerical failure.
"""

import argparse
import json
import os
import sys
from dataclasses import fields as dc_fields

import numpy as np

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERIC = 3


# ---------------------------------------------------------------------------
# configuration: TOML or JSON file, dotted-key overrides, schema-checked
# ---------------------------------------------------------------------------

def _schema():
    from .model import ModelConfig
    from .train import TrainConfig
    from .scene.dataset import DEFAULT_CONFIG
    data = {k: type(v) for k, v in DEFAULT_CONFIG.items()}
    data["counts"] = dict
    model = {f.name: f.type if isinstance(f.type, type) else type(f.default)
             for f in dc_fields(ModelConfig)}
    train = {f.name: type(f.default) for f in dc_fields(TrainConfig)}
    return {"data": data, "model": model, "train": train}


def load_config(path):
    if path is None:
        return {}
    if not os.path.exists(path):
        raise ValueError(f"config file not found: {path}")
    if path.endswith(".json"):
        with open(path) as f:
            cfg = json.load(f)
    else:
        try:
            import tomllib
        except ImportError:
            import tomli as tomllib
        with open(path, "rb") as f:
            cfg = tomllib.load(f)
    validate_config(cfg)
    return cfg


def validate_config(cfg):
    schema = _schema()
    for section, values in cfg.items():
        if section not in schema:
            raise ValueError(f"unknown config section [{section}]")
        if not isinstance(values, dict):
            raise ValueError(f"section [{section}] must be a table")
        for key, value in values.items():
            if key not in schema[section]:
                raise ValueError(f"unknown config key {section}.{key}")
            want = schema[section][key]
            if want is float and isinstance(value, int):
                continue
            if want is tuple and isinstance(value, list):
                continue
            if not isinstance(value, want):
                raise ValueError(
                    f"config key {section}.{key}: expected {want.__name__}, "
                    f"got {type(value).__name__}")


def apply_overrides(cfg, overrides):
    """Apply `section.key=value` strings; values parsed to the schema type."""
    schema = _schema()
    for item in overrides or []:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ValueError(f"override must look like section.key=value: {item!r}")
        dotted, raw = item.split("=", 1)
        section, key = dotted.split(".", 1)
        if section not in schema or key not in schema[section]:
            raise ValueError(f"unknown config key {dotted}")
        want = schema[section][key]
        if want is bool:
            if raw.lower() not in ("true", "false", "0", "1"):
                raise ValueError(f"{dotted}: expected a boolean, got {raw!r}")
            value = raw.lower() in ("true", "1")
        elif want in (int, float):
            try:
                value = want(raw)
            except ValueError:
                raise ValueError(f"{dotted}: expected {want.__name__}, got {raw!r}")
        elif want in (list, tuple, dict):
            value = json.loads(raw)
        else:
            value = raw
        cfg.setdefault(section, {})[key] = value
    validate_config(cfg)
    return cfg


def _limit_threads(n):
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ[var] = str(n)
    try:
        from threadpoolctl import threadpool_limits
        threadpool_limits(limits=n)
    except ImportError:
        pass


def _model_cfg(cfg):
    from .model import ModelConfig
    return ModelConfig(**cfg.get("model", {}))


def _train_cfg(cfg, seed=None):
    from .train import TrainConfig
    kw = dict(cfg.get("train", {}))
    if seed is not None:
        kw["seed"] = seed
    return TrainConfig(**kw)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_simulate(args):
    from .scene.dataset import build_dataset, load_manifest
    cfg = apply_overrides(load_config(args.config), args.override)
    data = dict(cfg.get("data", {}))
    counts = data.pop("counts", {"train": 20, "val": 4, "test": 4})
    counts = {k: int(v) for k, v in counts.items()}
    manifest = build_dataset(data, args.out, counts, seed=args.seed)
    records = load_manifest(manifest)
    per_split = {}
    for r in records:
        per_split[r["split"]] = per_split.get(r["split"], 0) + 1
    print(f"wrote {len(records)} scenes to {args.out} "
          + " ".join(f"{k}={v}" for k, v in sorted(per_split.items())))
    print(f"manifest: {manifest}")
    return EXIT_OK


def cmd_train(args):
    from .nnkit import AdamState
    from .model import build_params
    from .train import train_loop, save_checkpoint, load_checkpoint
    from .scene.dataset import load_manifest

    cfg = apply_overrides(load_config(args.config), args.override)
    model_cfg = _model_cfg(cfg)
    train_cfg = _train_cfg(cfg, seed=args.seed)
    manifest = os.path.join(args.data, "manifest.json")
    if not os.path.exists(manifest):
        raise ValueError(f"manifest not found: {manifest}")
    records = [r for r in load_manifest(manifest) if r["split"] == args.split]
    if not records:
        raise ValueError(f"no scenes in split {args.split!r}")

    os.makedirs(args.out, exist_ok=True)
    ckpt = os.path.join(args.out, "model.jbf")
    log = os.path.join(args.out, "loss.csv")
    start_step = 0
    if args.resume:
        params, model_cfg, train_cfg, adam, start_step = load_checkpoint(args.resume)
        print(f"resumed from {args.resume} at step {start_step}")
    else:
        params = build_params(model_cfg, seed=train_cfg.seed)
        adam = AdamState(params, lr=train_cfg.lr)
    print(f"model: {params.count()} parameters; {len(records)} scenes; "
          f"lr {adam.lr}; batch {train_cfg.batch}")

    def progress(step, stats):
        if args.verbose or step % 10 == 0:
            print(f"step {step}: loss {stats['loss']:.4f} "
                  f"(sisnr {stats['sisnr_term']:.3f}, mse {stats['mse_term']:.5f}, "
                  f"|g| {stats['grad_norm']:.2f})")

    try:
        step = train_loop(records, args.data, params, model_cfg, train_cfg, adam,
                          checkpoint_path=ckpt, log_path=log,
                          start_step=start_step, max_steps=args.steps,
                          progress=progress)
    except FloatingPointError as e:
        print(f"training aborted: {e}; last good checkpoint kept at {ckpt}",
              file=sys.stderr)
        return EXIT_NUMERIC
    print(f"finished at step {step}; checkpoint {ckpt}; loss log {log}")
    return EXIT_OK


def _load_model(path):
    from .train import load_checkpoint
    params, model_cfg, _, _, _ = load_checkpoint(path)
    return params, model_cfg


def cmd_enhance(args):
    from .audio import read_wav, write_wav
    from .metrics import run_system, SYSTEMS

    if args.system not in SYSTEMS or args.system == "none":
        raise ValueError(f"--system must be one of {[s for s in SYSTEMS if s != 'none']}")
    system = "jaecbf" if (args.no_dtd and args.system == "jaecbf_dtd") else args.system
    mixture = read_wav(args.mix)
    far_end = read_wav(args.farend)
    model = None
    if system in ("jaecbf", "jaecbf_dtd", "pbfdaf+jaecbf"):
        if not args.model:
            raise ValueError(f"system {system!r} requires --model")
        model = _load_model(args.model)
        if mixture.channels != model[1].mics:
            raise ValueError(f"model expects {model[1].mics} channels, "
                             f"mixture has {mixture.channels}")

    record = None
    if system == "das":
        if not args.scene:
            raise ValueError("system 'das' needs --scene (manifest record JSON)")
        with open(args.scene) as f:
            record = json.load(f)

    if args.dump_gate and model is not None and system != "jaecbf":
        from .model import enhance_to_tensor
        sig, _, p = enhance_to_tensor(mixture, far_end, model[0], model[1], dtd=True)
        np.savetxt(args.dump_gate, p.data, fmt="%.6f")
        from .audio import AudioClip
        out = AudioClip(sig.data.astype(np.float64), mixture.rate)
    else:
        out = run_system(system, mixture, far_end, record, model)
    write_wav(args.out, out)
    print(f"wrote {args.out} ({out.samples} samples, system {system})")
    return EXIT_OK


def cmd_evaluate(args):
    from .metrics import evaluate_corpus, write_report, SYSTEMS
    from .scene.dataset import load_manifest

    if args.system not in SYSTEMS:
        raise ValueError(f"--system must be one of {SYSTEMS}")
    records = load_manifest(args.manifest)
    if args.split:
        records = [r for r in records if r["split"] == args.split]
    if not records:
        raise ValueError("no scenes selected")
    model = _load_model(args.model) if args.model else None
    report = evaluate_corpus(records, os.path.dirname(os.path.abspath(args.manifest)),
                             args.system, model=model, limit=args.limit)
    csv_path, json_path = write_report(report, args.out)
    m = report.means
    erle_txt = "n/a" if m["erle_db"] is None else f"{m['erle_db']:.2f}"
    print(f"{args.system}: {report.count} scenes, mean sisnr {m['sisnr_db']:.2f} dB, "
          f"sdr {m['sdr_db']:.2f} dB, erle {erle_txt} dB")
    print(f"report: {csv_path} {json_path}")
    return EXIT_OK


def cmd_baseline(args):
    from .audio import read_wav, write_wav, AudioClip
    from .baseline import pbfdaf_cancel

    mixture = read_wav(args.mix)
    far_end = read_wav(args.farend)
    _, err = pbfdaf_cancel(AudioClip(mixture.data[0], mixture.rate), far_end)
    write_wav(args.out, err)
    print(f"wrote {args.out} ({err.samples} samples, pbfdaf error signal)")
    return EXIT_OK


def cmd_gradcheck(args):
    from .checks import run_suite, MODULES
    if args.module not in MODULES:
        raise ValueError(f"--module must be one of {MODULES}")
    checks = run_suite(args.module, corrupt=args.corrupt,
                       include_full_model=args.full_model)
    print(f"{'check':24s} {'max_rel_err':>12s} {'tol':>8s}  status")
    all_ok = True
    for name, err, tol in checks:
        ok = err < tol
        all_ok = all_ok and ok
        print(f"{name:24s} {err:12.3e} {tol:8.0e}  {'ok' if ok else 'FAIL'}")
    if not all_ok:
        print("gradient check FAILED", file=sys.stderr)
        return 1
    print(f"all {len(checks)} checks passed")
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="jaecbf",
                                description="Joint neural echo cancellation and beamforming")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="render a scene corpus to disk")
    s.add_argument("--config", help="TOML or JSON config file")
    s.add_argument("--out", required=True)
    s.add_argument("--override", action="append", metavar="SECTION.KEY=VALUE")
    s.set_defaults(fn=cmd_simulate)

    s = sub.add_parser("train", help="train the model on a rendered corpus")
    s.add_argument("--config")
    s.add_argument("--data", required=True, help="dataset directory with manifest.json")
    s.add_argument("--out", required=True, help="run directory for checkpoint and logs")
    s.add_argument("--split", default="train")
    s.add_argument("--steps", type=int, default=None, help="stop after this many steps")
    s.add_argument("--resume", help="checkpoint to continue from")
    s.add_argument("--override", action="append", metavar="SECTION.KEY=VALUE")
    s.set_defaults(fn=cmd_train)

    s = sub.add_parser("enhance", help="run a processing chain on one scene")
    s.add_argument("--mix", required=True)
    s.add_argument("--farend", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--model")
    s.add_argument("--system", default="jaecbf_dtd")
    s.add_argument("--no-dtd", action="store_true", help="force the DTD gate to 1")
    s.add_argument("--scene", help="manifest record JSON (needed for das steering)")
    s.add_argument("--dump-gate", help="write per-frame DTD gate values to this file")
    s.set_defaults(fn=cmd_enhance)

    s = sub.add_parser("evaluate", help="score a system over a manifest")
    s.add_argument("--manifest", required=True)
    s.add_argument("--system", default="none")
    s.add_argument("--model")
    s.add_argument("--split")
    s.add_argument("--limit", type=int)
    s.add_argument("--out", required=True, help="report path prefix (.csv/.json added)")
    s.set_defaults(fn=cmd_evaluate)

    s = sub.add_parser("baseline", help="classical adaptive echo canceller")
    s.add_argument("--mix", required=True)
    s.add_argument("--farend", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(fn=cmd_baseline)

    s = sub.add_parser("gradcheck", help="finite-difference gradient verification")
    s.add_argument("--module", default="all")
    s.add_argument("--full-model", action="store_true",
                   help="include the slow end-to-end model check")
    s.add_argument("--corrupt", metavar="PARAM",
                   help="inject an error into this parameter's gradient (negative control)")
    s.set_defaults(fn=cmd_gradcheck)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code not in (0, None) else 0
    _limit_threads(args.threads)
    np.random.seed(args.seed)  # legacy global state; library code uses Generators
    try:
        return args.fn(args)
    except (ValueError, KeyError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except FloatingPointError as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
