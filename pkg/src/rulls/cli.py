"""Command-line entry point: ``rulls {featurize,evaluate,noise-eval,visualize}``.

Options can also come from a flat ``key=value`` file given with
``--config``; command-line flags win over the file, and the ``RULLS_SEED``
environment variable is used when neither sets a seed.

Exit status: 0 success, 1 configuration error, 2 data error, 3 numerical
degeneracy. Every check that can fail on configuration runs before an
output file is touched; outputs are written to a temporary file and
renamed into place.
"""

from __future__ import annotations

import argparse
import contextlib
import os
import sys
import tempfile
import time
from pathlib import Path

import numpy as np

from .dataset import load_csv
from .errors import ConfigError, DataError, RullsError
from .featurize import FeatureConfig, load_sparse, save_sparse
from .pipeline import classify, cluster, featurize_with_stats, format_report, noise_eval

COMMANDS = ("featurize", "evaluate", "noise-eval", "visualize")
METHOD_CHOICES = ("rulls", "rulls-robust", "variant1", "variant2", "randlocal")

# flag name -> (type, default); None defaults are filled later
OPTIONS = {
    "input": (str, None),
    "output": (str, None),
    "label-col": (str, None),
    "header": (str, "auto"),
    "method": (str, "rulls"),
    "iterations": (int, 100),
    "landmarks": (int, None),
    "nearest": (int, 10),
    "k-eps": (int, 30),
    "reg-p": (float, 1e-4),
    "variance-threshold": (float, 0.95),
    "normalize": (int, 1),
    "proj-dim": (int, None),
    "trim-fraction": (float, 0.25),
    "task": (str, "classify"),
    "train-fraction": (float, 0.8),
    "epochs": (int, 50),
    "lambda": (float, 1e-4),
    "k": (int, None),
    "noise-axis": (str, "rows"),
    "noise-fraction": (float, 0.1),
    "seed": (int, None),
}

CHOICES = {
    "method": METHOD_CHOICES,
    "normalize": (0, 1),
    "task": ("classify", "cluster"),
    "noise-axis": ("rows", "cols"),
    "header": ("auto", "yes", "no"),
}


@contextlib.contextmanager
def stage(name: str):
    """Tag any package error raised inside the block with the pipeline stage."""
    try:
        yield
    except RullsError as exc:
        if not hasattr(exc, "stage"):
            exc.stage = name
        raise


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(f"{message} (see {self.prog} --help)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rulls", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="flat key=value file; flags override it")
        for flag, (typ, _) in OPTIONS.items():
            # argparse defaults stay None so the merge can tell "not given" apart
            p.add_argument(f"--{flag}", type=typ, default=None, choices=CHOICES.get(flag))
    return parser


def _read_config_file(path: str) -> dict:
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    out = {}
    for lineno, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("_", "-")
        if key not in OPTIONS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        typ = OPTIONS[key][0]
        try:
            out[key] = typ(value)
        except ValueError:
            raise ConfigError(f"{path}:{lineno}: bad value {value!r} for {key}") from None
        if key in CHOICES and out[key] not in CHOICES[key]:
            raise ConfigError(f"{path}:{lineno}: {key} must be one of {CHOICES[key]}")
    return out


def resolve_options(args: argparse.Namespace) -> dict:
    """Merge defaults < environment < config file < flags."""
    opts = {flag: default for flag, (_, default) in OPTIONS.items()}
    env_seed = os.environ.get("RULLS_SEED")
    if env_seed is not None:
        try:
            opts["seed"] = int(env_seed)
        except ValueError:
            raise ConfigError(f"RULLS_SEED must be an integer, got {env_seed!r}") from None
    if args.config:
        opts.update(_read_config_file(args.config))
    for flag in OPTIONS:
        value = getattr(args, flag.replace("-", "_"))
        if value is not None:
            opts[flag] = value
    if opts["seed"] is None:
        opts["seed"] = 0
    return opts


def feature_config(opts: dict) -> FeatureConfig:
    cfg = FeatureConfig(
        method=opts["method"].replace("-", "_"),
        iterations=opts["iterations"],
        landmarks=opts["landmarks"],
        nearest=opts["nearest"],
        k_eps=opts["k-eps"],
        reg_p=opts["reg-p"],
        variance_threshold=opts["variance-threshold"],
        normalize=bool(opts["normalize"]),
        proj_dim=opts["proj-dim"],
        trim_fraction=opts["trim-fraction"],
        seed=opts["seed"],
    )
    _precheck(cfg)
    return cfg


def _precheck(cfg: FeatureConfig) -> None:
    """Data-independent range checks, so obvious mistakes fail before any loading."""
    if cfg.seed < 0:
        raise ConfigError(f"seed must be non-negative, got {cfg.seed}")
    if cfg.iterations < 1:
        raise ConfigError(f"iterations must be >= 1, got {cfg.iterations}")
    if cfg.method != "randlocal":
        if cfg.nearest < 1:
            raise ConfigError(f"nearest must be >= 1, got {cfg.nearest}")
        if cfg.landmarks is not None and cfg.nearest >= cfg.landmarks:
            raise ConfigError(f"nearest ({cfg.nearest}) must be smaller than landmarks ({cfg.landmarks})")
    if cfg.landmarks is not None and cfg.landmarks < 1:
        raise ConfigError(f"landmarks must be >= 1, got {cfg.landmarks}")
    if not cfg.reg_p > 0:
        raise ConfigError(f"reg-p must be positive, got {cfg.reg_p}")
    if not 0 < cfg.variance_threshold <= 1:
        raise ConfigError(f"variance-threshold must lie in (0, 1], got {cfg.variance_threshold}")
    if not 0 <= cfg.trim_fraction < 0.5:
        raise ConfigError(f"trim-fraction must lie in [0, 0.5), got {cfg.trim_fraction}")
    if cfg.proj_dim is not None and cfg.proj_dim < 1:
        raise ConfigError(f"proj-dim must be >= 1, got {cfg.proj_dim}")


def _require(opts: dict, *flags: str) -> None:
    missing = [f"--{f}" for f in flags if opts.get(f) is None]
    if missing:
        raise ConfigError(f"missing required option(s): {', '.join(missing)}")


def _label_selector(raw):
    if raw is None:
        return None
    try:
        return int(raw)
    except ValueError:
        return raw


def _detect_header(path: str, label_col) -> bool:
    try:
        with open(path, encoding="utf-8") as fh:
            first = next((ln for ln in fh if ln.strip()), "")
    except (OSError, UnicodeDecodeError) as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    fields = [f.strip() for f in first.split(",")]
    if isinstance(label_col, str):
        return True
    skip = None
    if isinstance(label_col, int):
        skip = label_col % len(fields) if fields else None
    for j, cell in enumerate(fields):
        if j == skip or cell == "":
            continue
        try:
            float(cell)
        except ValueError:
            return True
    return False


def load_input(opts: dict, need_labels: bool = False):
    _require(opts, "input")
    label_col = _label_selector(opts["label-col"])
    if need_labels and label_col is None:
        raise ConfigError("this command needs --label-col")
    header = {"yes": True, "no": False}.get(opts["header"])
    if header is None:
        header = _detect_header(opts["input"], label_col)
    return load_csv(opts["input"], label_column=label_col, has_header=header)


def _atomic_write(path: str, writer) -> None:
    target = Path(path)
    tmp = None
    try:
        fd, tmp = tempfile.mkstemp(prefix=f".{target.name}.", dir=target.parent)
        os.close(fd)
        writer(tmp)
        os.replace(tmp, target)
    except BaseException as exc:
        if tmp is not None and os.path.exists(tmp):
            os.unlink(tmp)
        if isinstance(exc, OSError):
            raise DataError(f"cannot write {path}: {exc}") from exc
        raise


def _write_text(path: str, text: str) -> None:
    _atomic_write(path, lambda tmp: Path(tmp).write_text(text, encoding="utf-8"))


def _check_output_dir(path: str) -> None:
    parent = Path(path).parent
    if not parent.is_dir():
        raise ConfigError(f"output directory {parent} does not exist")


def render_pgm(f) -> bytes:
    """Binary greyscale image, one pixel per cell, scaled so the largest entry is 255."""
    if f.nnz == 0 or f.n_rows == 0 or f.n_cols == 0:
        raise DataError("cannot render an empty feature matrix")
    vmax = float(f.data.max())
    if not vmax > 0:
        raise DataError("cannot render a matrix whose largest entry is not positive")
    img = np.zeros((f.n_rows, f.n_cols), dtype=np.uint8)
    rows = np.repeat(np.arange(f.n_rows), np.diff(f.indptr))
    img[rows, f.indices] = np.floor(255.0 * f.data / vmax + 0.5).clip(0, 255).astype(np.uint8)
    header = f"P5\n{f.n_cols} {f.n_rows}\n255\n".encode("ascii")
    return header + img.tobytes()


def cmd_featurize(opts: dict, out=None) -> dict:
    with stage("config"):
        _require(opts, "input", "output")
        cfg = feature_config(opts)
        _check_output_dir(opts["output"])
    with stage("load"):
        d = load_input(opts)
    with stage("config"):
        cfg = cfg.resolve(d.n_rows, d.n_cols)
    with stage("featurize"):
        t0 = time.perf_counter()
        f, _, stats = featurize_with_stats(d, cfg)
        elapsed = time.perf_counter() - t0
    with stage("write"):
        _atomic_write(opts["output"], lambda tmp: save_sparse(f, tmp))
    (out or sys.stdout).write(format_report({**stats, "wall_time_seconds": elapsed}))
    return stats


def _eval_args(opts: dict) -> dict:
    if opts["task"] == "classify":
        return {"train_fraction": opts["train-fraction"], "epochs": opts["epochs"], "lam": opts["lambda"]}
    return {"k": opts["k"]}


def _validate_eval(opts: dict) -> None:
    if not 0 < opts["train-fraction"] < 1:
        raise ConfigError(f"train-fraction must lie in (0, 1), got {opts['train-fraction']}")
    if opts["epochs"] < 1:
        raise ConfigError(f"epochs must be >= 1, got {opts['epochs']}")
    if not opts["lambda"] > 0:
        raise ConfigError(f"lambda must be positive, got {opts['lambda']}")
    if opts["k"] is not None and opts["k"] < 1:
        raise ConfigError(f"k must be >= 1, got {opts['k']}")


def _emit_report(opts: dict, metrics: dict, elapsed: float, out) -> None:
    out = out or sys.stdout
    if opts["output"]:
        with stage("write"):
            _write_text(opts["output"], format_report(metrics))
    out.write(format_report({**metrics, "wall_time_seconds": elapsed}))


def _prepare_eval(opts: dict):
    with stage("config"):
        cfg = feature_config(opts)
        _validate_eval(opts)
        if opts["output"]:
            _check_output_dir(opts["output"])
    with stage("load"):
        d = load_input(opts, need_labels=True)
    with stage("config"):
        cfg.resolve(d.n_rows, d.n_cols)
    return cfg, d


def cmd_evaluate(opts: dict, out=None) -> dict:
    cfg, d = _prepare_eval(opts)
    t0 = time.perf_counter()
    run = classify if opts["task"] == "classify" else cluster
    with stage("evaluate"):
        metrics = run(d, cfg, seed=opts["seed"], **_eval_args(opts))
    _emit_report(opts, metrics, time.perf_counter() - t0, out)
    return metrics


def cmd_noise_eval(opts: dict, out=None) -> dict:
    with stage("config"):
        if not 0 <= opts["noise-fraction"] <= 1:
            raise ConfigError(f"noise-fraction must lie in [0, 1], got {opts['noise-fraction']}")
    cfg, d = _prepare_eval(opts)
    t0 = time.perf_counter()
    with stage("evaluate"):
        metrics = noise_eval(
            d,
            cfg,
            axis=opts["noise-axis"],
            fraction=opts["noise-fraction"],
            task=opts["task"],
            seed=opts["seed"],
            **_eval_args(opts),
        )
    _emit_report(opts, metrics, time.perf_counter() - t0, out)
    return metrics


def cmd_visualize(opts: dict, out=None) -> None:
    with stage("config"):
        _require(opts, "input", "output")
        _check_output_dir(opts["output"])
    with stage("load"):
        f = load_sparse(opts["input"])
    with stage("render"):
        data = render_pgm(f)
    with stage("write"):
        _atomic_write(opts["output"], lambda tmp: Path(tmp).write_bytes(data))
    (out or sys.stdout).write(format_report({"width": f.n_cols, "height": f.n_rows}))


_HANDLERS = {
    "featurize": cmd_featurize,
    "evaluate": cmd_evaluate,
    "noise-eval": cmd_noise_eval,
    "visualize": cmd_visualize,
}


def main(argv=None) -> int:
    try:
        with stage("config"):
            args = build_parser().parse_args(argv)
            opts = resolve_options(args)
        _HANDLERS[args.command](opts)
    except RullsError as exc:
        kind = type(exc).__name__.replace("Error", "").lower()
        print(f"rulls: {getattr(exc, 'stage', 'run')}: {kind} error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
