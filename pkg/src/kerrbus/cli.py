"""Command-line entry point: ``kerrbus <experiment> [flags]``.

The CSV goes to ``--out`` (or stdout) and the summary goes to stdout (or
stderr when the CSV occupies stdout). Settings may also come from a flat
``key = value`` file given with ``--config``; flags win over the file.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys

import numpy as np

from .experiments import EXPERIMENTS, ConfigError, ExperimentConfig, run, write_csv
from .fock import OracleRegimeError

EXIT_CONFIG = 2
EXIT_REGIME = 3
EXIT_CHECKS = 1

_FIELDS = {f.name: f for f in dataclasses.fields(ExperimentConfig)}
_FLOATS = {"alpha", "theta", "eta", "alpha_a", "xi"}
_INTS = {"trials", "seed"}


def parse_range(key: str, text: str) -> list[float]:
    """``1,2,3`` lists values; ``lo:hi:n`` gives n evenly spaced points."""
    text = text.strip()
    try:
        if ":" in text:
            lo, hi, n = text.split(":")
            return [float(v) for v in np.linspace(float(lo), float(hi), int(n))]
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError("vary", f"cannot parse range {text!r} for {key!r}") from None


def parse_vary(items) -> list:
    out = []
    for item in items:
        if "=" not in item:
            raise ConfigError("vary", f"expected key=values, got {item!r}")
        key, values = item.split("=", 1)
        key = key.strip().replace("-", "_")
        out.append((key, parse_range(key, values)))
    return out


def _convert(key: str, value: str):
    try:
        if key in _FLOATS:
            return float(value)
        if key in _INTS:
            return int(value)
    except ValueError:
        raise ConfigError(key, f"invalid value {value!r}") from None
    if key == "vary":
        return parse_vary(v for v in value.split(";") if v.strip())
    return value


def read_config_file(path: str) -> dict:
    settings = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}", f"expected 'key = value', got {raw.strip()!r}")
            key, value = (s.strip() for s in line.split("=", 1))
            key = key.replace("-", "_")
            if key not in _FIELDS:
                raise ConfigError(key, "unknown configuration key")
            settings[key] = _convert(key, value)
    return settings


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="kerrbus", description="Cross-Kerr bus gate simulations.")
    p.add_argument("experiment", nargs="?", choices=EXPERIMENTS)
    p.add_argument("--config", help="key = value settings file")
    p.add_argument("--alpha", type=str)
    p.add_argument("--theta", type=str)
    p.add_argument("--eta", type=str)
    p.add_argument("--alpha-a", dest="alpha_a", type=str)
    p.add_argument("--xi", type=str)
    p.add_argument("--trials", type=str)
    p.add_argument("--seed", type=str)
    p.add_argument("--measurement", type=str)
    p.add_argument("--input", type=str, help="input state for parity/bellmeas")
    p.add_argument("--target", type=str, help="experiment swept by 'sweep'")
    p.add_argument("--vary", action="append", help="swept parameter, e.g. eta=0:0.3:7 or alpha_sin_theta=1,2,3")
    p.add_argument("--out", help="CSV path (default stdout)")
    p.add_argument("--figure", help="also render a matplotlib figure to this path")
    return p


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    settings = read_config_file(args.config) if args.config else {}
    for key in _FIELDS:
        value = getattr(args, key, None)
        if value is None:
            continue
        if key == "vary":
            settings[key] = parse_vary(value)
        elif key == "experiment":
            settings[key] = value
        else:
            settings[key] = _convert(key, value)
    if "experiment" not in settings:
        raise ConfigError("experiment", "no experiment given")
    return ExperimentConfig(**settings).validate()


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        result = run(cfg)
    except ConfigError as exc:
        print(f"kerrbus: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OracleRegimeError as exc:
        print(f"kerrbus: oracle regime violation: {exc}", file=sys.stderr)
        return EXIT_REGIME
    except OSError as exc:
        print(f"kerrbus: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if cfg.out:
        with open(cfg.out, "w", encoding="utf-8", newline="") as fh:
            write_csv(result, fh)
        report = sys.stdout
    else:
        write_csv(result, sys.stdout)
        report = sys.stderr
    print("\n".join(result.summary), file=report)
    if cfg.figure:
        from .plotting import render

        render(result.plot, cfg.figure)
        print(f"figure written to {cfg.figure}", file=report)
    return 0 if result.ok else EXIT_CHECKS


if __name__ == "__main__":
    sys.exit(main())
