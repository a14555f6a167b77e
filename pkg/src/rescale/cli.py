"""Command line runner for the preset scenarios.

    rescale --list
    rescale run --scenario vp-radial-d3 --t-end 5 --out runs/vp3
    rescale run --config my.ini --no-plot

Exit status: 0 on success, 1 on an invalid configuration, 2 when the run
aborts (collapse, shock, boundary); partial CSVs are kept in that case.
"""
from __future__ import annotations

import argparse
import configparser
import hashlib
import os
import sys
from dataclasses import fields
from pathlib import Path

from . import __version__
from . import scenarios as sc
from .errors import ConfigError, RunAborted

CONFIG_KEYS = {f.name: f.type for f in fields(sc.ScenarioConfig)}


def read_config(path):
    """[scenario] section of an INI file -> (scenario id, overrides, out dir or None)."""
    cp = configparser.ConfigParser()
    cp.optionxform = str  # keep "N" distinct from "n"
    if not cp.read(path):
        raise ConfigError(f"cannot read config file {path}")
    if "scenario" not in cp:
        raise ConfigError(f"{path}: missing [scenario] section")
    sec = dict(cp["scenario"])
    name = sec.pop("id", None) or sec.pop("scenario", None)
    out = sec.pop("out", None)
    over = {}
    for k, v in sec.items():
        if k not in CONFIG_KEYS or k == "scenario":
            raise ConfigError(f"{path}: unknown key {k!r}")
        try:
            over[k] = _cast(v, CONFIG_KEYS[k])
        except ValueError:
            raise ConfigError(f"{path}: {k} = {v!r} is not a valid {CONFIG_KEYS[k]}") from None
    return name, over, out


def _cast(v, typ):
    if typ == "int":
        x = float(v)  # accepts 1e4
        if not x.is_integer():
            raise ValueError(v)
        return int(x)
    return float(v) if typ == "float" else v


def build_parser():
    p = argparse.ArgumentParser(prog="rescale", description="Run rescaling verification scenarios.")
    p.add_argument("command", nargs="?", choices=("run", "list"), default="run")
    p.add_argument("--scenario", help="scenario id (see --list)")
    p.add_argument("--config", help="INI file with a [scenario] section")
    p.add_argument("--out", help="output directory (default $RESCALE_OUT_DIR/<scenario> or runs/<scenario>)")
    p.add_argument("--seed", type=int)
    p.add_argument("--dt", type=float)
    p.add_argument("--t-end", dest="t_end", type=float)
    p.add_argument("--cadence", type=int)
    p.add_argument("--list", action="store_true", help="list scenarios and exit")
    p.add_argument("--no-plot", action="store_true", help="skip the PNG figures")
    return p


def print_list(stream=None):
    stream = sys.stdout if stream is None else stream
    rows = sc.list_scenarios()
    w = max(len(r[0]) for r in rows)
    for sid, model, statement in rows:
        print(f"{sid:<{w}}  [{model}]  {statement}", file=stream)


def resolve(args):
    """Merge defaults, config file and flags; returns (config, output dir)."""
    name, over, out = None, {}, None
    if args.config:
        name, over, out = read_config(args.config)
    if args.scenario:
        name = args.scenario
    if not name:
        raise ConfigError("no scenario given (use --scenario or a config file)")
    for k in ("seed", "dt", "t_end", "cadence"):
        v = getattr(args, k)
        if v is not None:
            over[k] = v
    cfg = sc.make_config(name, **over)
    if args.out:
        out = args.out
    if out is None:
        out = Path(os.environ.get("RESCALE_OUT_DIR", "runs")) / cfg.scenario
    return cfg, Path(out)


def _sha(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(out, cfg, status):
    text = cfg.as_text()
    lines = [f"rescale {__version__}",
             f"scenario = {cfg.scenario}",
             f"config_sha256 = {hashlib.sha256(text.encode()).hexdigest()}",
             f"status = {status}",
             "", "[config]", text.rstrip("\n"), "", "[files]"]
    for f in sorted(Path(out).glob("*.csv")):
        lines.append(f"{f.name} {_sha(f)}")
    with open(Path(out) / "manifest.txt", "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.list or args.command == "list":
        print_list()
        return 0
    try:
        cfg, out = resolve(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    out.mkdir(parents=True, exist_ok=True)
    try:
        outcome = sc.run(cfg, out)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except RunAborted as exc:
        sc.write_summary(out / "summary.csv", {"status": "aborted", "reason": str(exc).replace(",", ";")})
        write_manifest(out, cfg, f"aborted ({type(exc).__name__})")
        print(f"run aborted: {exc}", file=sys.stderr)
        return 2
    if not args.no_plot:
        from .plotting import render_all
        render_all(outcome.figures, out)
    write_manifest(out, cfg, "ok")
    for k, v in outcome.summary.items():
        print(f"{k} = {v}")
    print(f"outputs in {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
