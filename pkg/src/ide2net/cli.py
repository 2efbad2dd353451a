"""Command-line front end: ``ide2net {train,eval,sweep,oracle,plot}``.

Settings come from an INI-style file (``--config``) whose sections mirror the
library configs, overridden by command-line flags. The merged result is
written to a JSON manifest next to every output so a run can be repeated
exactly.

Exit codes: 0 success, 1 usage/configuration error, 2 numerical failure or
aborted training.
"""
from __future__ import annotations

import argparse
import configparser
import json
import logging
import os
import sys
from dataclasses import asdict
from pathlib import Path

from . import __version__, harness, unfolded
from .channel import SystemConfig
from .constellation import constellation_by_name, one_bit_alphabet
from .precoders import Ide2Config

log = logging.getLogger("ide2net")

EXIT_USAGE = 1
EXIT_NUMERIC = 2

DEFAULTS = {
    "system": {"antennas": "128", "users": "16", "p_t": "1.0", "snr_db": "14.0", "constellation": "16qam"},
    "precoder": {"name": "ide2", "layers": "20", "alpha": "0.95", "gamma": "1.0", "lam": "0.01", "params": ""},
    "train": {"epochs": "50", "samples_per_epoch": "500", "batch_size": "100", "lr_initial": "0.01",
              "lr_decay_every": "10", "lr_decay_factor": "10", "lr_floor": "1e-4", "optimizer": "adam",
              "grad_clip": "none", "validation_samples": "1000", "validation_seed": "12345"},
    "sweep": {"kind": "snr", "values": "14", "trials": "", "min_bits": "100000", "epsilon": "0.0"},
    "oracle": {"instances": "100", "layers": "50"},
    "run": {"seed": "0", "threads": "", "out": "results"},
}

# flag dest -> (section, key)
OVERRIDES = {
    "seed": ("run", "seed"), "threads": ("run", "threads"), "out": ("run", "out"),
    "antennas": ("system", "antennas"), "users": ("system", "users"), "snr_db": ("system", "snr_db"),
    "constellation": ("system", "constellation"),
    "precoder": ("precoder", "name"), "layers": ("precoder", "layers"), "alpha": ("precoder", "alpha"),
    "gamma": ("precoder", "gamma"), "params": ("precoder", "params"),
    "epochs": ("train", "epochs"), "samples_per_epoch": ("train", "samples_per_epoch"),
    "optimizer": ("train", "optimizer"), "lr_initial": ("train", "lr_initial"),
    "lr_decay_every": ("train", "lr_decay_every"),
    "kind": ("sweep", "kind"), "values": ("sweep", "values"), "trials": ("sweep", "trials"),
    "min_bits": ("sweep", "min_bits"), "epsilon": ("sweep", "epsilon"),
    "instances": ("oracle", "instances"), "oracle_layers": ("oracle", "layers"),
}


class UsageError(Exception):
    pass


def load_config(path: str | None, args: argparse.Namespace) -> dict:
    cp = configparser.ConfigParser()
    cp.read_dict(DEFAULTS)
    if path:
        if not Path(path).is_file():
            raise UsageError(f"config file not found: {path}")
        try:
            cp.read(path)
        except configparser.Error as exc:
            raise UsageError(f"{path}: {exc}") from None
    for dest, (section, key) in OVERRIDES.items():
        val = getattr(args, dest, None)
        if val is not None:
            cp.set(section, key, ",".join(map(str, val)) if isinstance(val, list) else str(val))
    return {s: dict(cp.items(s)) for s in cp.sections()}


def _get(cfg, section, key, conv):
    raw = cfg[section][key]
    try:
        return conv(raw)
    except ValueError:
        raise UsageError(f"[{section}] {key} = {raw!r} is not a valid {conv.__name__}") from None


def _optional_float(raw: str):
    return None if raw.strip().lower() in ("", "none") else float(raw)


def build_system(cfg) -> SystemConfig:
    try:
        return SystemConfig(_get(cfg, "system", "antennas", int), _get(cfg, "system", "users", int),
                            _get(cfg, "system", "p_t", float), _get(cfg, "system", "snr_db", float))
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def build_alphabets(cfg):
    try:
        c = constellation_by_name(cfg["system"]["constellation"])
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return one_bit_alphabet(_get(cfg, "system", "p_t", float)), c


def build_train_config(cfg, t_layers: int, seed: int) -> unfolded.TrainConfig:
    t = cfg["train"]
    try:
        return unfolded.TrainConfig(
            t_layers=t_layers, epochs=int(t["epochs"]), samples_per_epoch=int(t["samples_per_epoch"]),
            batch_size=int(t["batch_size"]), lr_initial=float(t["lr_initial"]),
            lr_decay_every=int(t["lr_decay_every"]), lr_decay_factor=float(t["lr_decay_factor"]),
            lr_floor=float(t["lr_floor"]), snr_db_train=float(cfg["system"]["snr_db"]), seed=seed,
            validation_samples=int(t["validation_samples"]), validation_seed=int(t["validation_seed"]),
            grad_clip=_optional_float(t["grad_clip"]), optimizer=t["optimizer"])
    except ValueError as exc:
        raise UsageError(f"[train] {exc}") from None


def load_network_params(paths: str) -> dict:
    nets = {}
    for p in filter(None, (q.strip() for q in paths.split(","))):
        if not Path(p).is_file():
            raise UsageError(f"parameter file not found: {p}")
        try:
            params = unfolded.load_params(p)
        except unfolded.ParamsFileError as exc:
            raise UsageError(str(exc)) from None
        nets[params.t_layers] = params
    return nets


def build_precoder(cfg) -> harness.PrecoderSpec:
    p = cfg["precoder"]
    nets = load_network_params(p["params"]) if p["params"] else {}
    try:
        spec = harness.PrecoderSpec(p["name"], int(p["layers"]), float(p["alpha"]), float(p["gamma"]),
                                    float(p["lam"]), nets)
        if spec.name == "ide2":
            Ide2Config(spec.t_max, spec.alpha, spec.gamma)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if spec.name == "ide2-net" and not nets:
        raise UsageError("precoder ide2-net needs --params")
    return spec


def _seed(cfg) -> int:
    return _get(cfg, "run", "seed", int)


def _threads(cfg) -> int:
    raw = cfg["run"]["threads"]
    return int(raw) if raw else (os.cpu_count() or 1)


def _out_dir(cfg) -> Path:
    out = Path(cfg["run"]["out"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _manifest(cfg, command: str, **extra) -> dict:
    doc = {"tool": "ide2net", "version": __version__, "command": command, "config": cfg}
    doc.update(extra)
    return doc


def _trials(cfg, sys: SystemConfig, c) -> int:
    if cfg["sweep"]["trials"]:
        return _get(cfg, "sweep", "trials", int)
    return harness.trials_for_bits(_get(cfg, "sweep", "min_bits", int), sys, c)


def cmd_train(cfg) -> int:
    sys_cfg = build_system(cfg)
    a, c = build_alphabets(cfg)
    seed = _seed(cfg)
    tcfg = build_train_config(cfg, _get(cfg, "precoder", "layers", int), seed)
    try:
        params, history = unfolded.train(tcfg, sys_cfg, a, c)
    except unfolded.TrainingAborted as exc:
        log.error("training aborted: %s", exc)
        _write_log(_out_dir(cfg) / "train_log.csv", exc.history)
        return EXIT_NUMERIC
    out = _out_dir(cfg)
    unfolded.save_params(params, out / "params.json", sys_cfg, seed)
    _write_log(out / "train_log.csv", history)
    harness.write_manifest(_manifest(cfg, "train", train=asdict(tcfg)), out / "manifest.json")
    best = min(history, key=lambda r: r[2])
    print(f"trained T={tcfg.t_layers}: val loss {history[0][2]:.6g} -> {best[2]:.6g} (epoch {best[0]}); "
          f"wrote {out / 'params.json'}")
    return 0


def _write_log(path: Path, history) -> None:
    with open(path, "w") as fh:
        fh.write("epoch,train_loss,val_loss,lr\n")
        for ep, tl, vl, lr in history:
            fh.write(f"{ep},{tl:.17g},{vl:.17g},{lr:.17g}\n")


def _sweep_spec(cfg, kind: str, values: list) -> tuple:
    sys_cfg = build_system(cfg)
    a, c = build_alphabets(cfg)
    spec = harness.SweepSpec(kind=kind, values=values, trials_per_point=_trials(cfg, sys_cfg, c),
                             sys=sys_cfg, precoder=build_precoder(cfg), seed=_seed(cfg),
                             epsilon=_get(cfg, "sweep", "epsilon", float),
                             constellation=cfg["system"]["constellation"])
    return spec, a, c


def _run_sweep(cfg, spec, a, c, name: str) -> int:
    try:
        results = harness.ber_sweep(spec, a, c, threads=_threads(cfg))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    out = _out_dir(cfg)
    (out / f"{name}.csv").write_text(harness.results_to_csv(results))
    harness.write_manifest(_manifest(cfg, name, sweep=harness.sweep_manifest(spec)), out / f"{name}.manifest.json")
    for r in results:
        print(f"{spec.kind}={r.sweep_value:g}  BER={r.ber:.4e} +/- {r.stderr:.1e}  "
              f"IUI={r.iui_mean:.4g}  discarded={r.trials_discarded}")
    print(f"wrote {out / (name + '.csv')}")
    return 0


def cmd_sweep(cfg) -> int:
    kind = cfg["sweep"]["kind"]
    try:
        values = [float(v) for v in cfg["sweep"]["values"].split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"[sweep] values = {cfg['sweep']['values']!r} is not a comma-separated list") from None
    try:
        spec, a, c = _sweep_spec(cfg, kind, values)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if spec.precoder.name == "ide2-net" and kind == "layers":
        missing = sorted({int(v) for v in values} - set(spec.precoder.params))
        if missing:
            raise UsageError(f"no ide2-net parameter file for T in {missing}")
    return _run_sweep(cfg, spec, a, c, "sweep")


def cmd_eval(cfg) -> int:
    spec, a, c = _sweep_spec(cfg, "epsilon", [_get(cfg, "sweep", "epsilon", float)])
    return _run_sweep(cfg, spec, a, c, "eval")


def cmd_oracle(cfg) -> int:
    sys_cfg = build_system(cfg)
    a, c = build_alphabets(cfg)
    ide = Ide2Config(_get(cfg, "oracle", "layers", int), _get(cfg, "precoder", "alpha", float),
                     _get(cfg, "precoder", "gamma", float))
    try:
        rows = harness.oracle_batch(sys_cfg, a, c, _get(cfg, "oracle", "instances", int), _seed(cfg), ide)
    except harness.SearchTooLarge as exc:
        raise UsageError(f"refusing exhaustive search: {exc}") from None
    out = _out_dir(cfg)
    (out / "oracle.csv").write_text(harness.oracle_to_csv(rows))
    harness.write_manifest(_manifest(cfg, "oracle"), out / "oracle.manifest.json")
    within = sum(r.ratio <= 2.0 for r in rows) / len(rows) if rows else float("nan")
    print(f"{len(rows)} instances; IDE2 within 2x of optimum on {within:.1%}; wrote {out / 'oracle.csv'}")
    return 0


GNUPLOT_TEMPLATE = """\
# gnuplot script generated by ide2net {version}
set datafile separator ","
set key autotitle columnhead
set logscale y
set grid
set xlabel "{xlabel}"
set ylabel "BER"
set terminal pngcairo size 800,600
set output "{png}"
plot {plots}
"""


def cmd_plot(cfg, csv_paths: list, xlabel: str) -> int:
    for p in csv_paths:
        if not Path(p).is_file():
            raise UsageError(f"CSV file not found: {p}")
    out = _out_dir(cfg)
    plots = ", \\\n     ".join(
        f'"{Path(p).resolve()}" using 1:2:3 with yerrorlines title "{Path(p).stem}"' for p in csv_paths)
    script = GNUPLOT_TEMPLATE.format(version=__version__, xlabel=xlabel, png=(out / "plot.png").resolve(),
                                     plots=plots)
    (out / "plot.gp").write_text(script)
    print(f"wrote {out / 'plot.gp'} (run: gnuplot {out / 'plot.gp'})")
    return 0


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def make_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="INI-style configuration file")
    common.add_argument("--seed", type=int)
    common.add_argument("--threads", type=int, help="worker threads for Monte-Carlo trials")
    common.add_argument("--out", help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")

    system = _Parser(add_help=False)
    system.add_argument("--antennas", type=int, help="BS antennas N")
    system.add_argument("--users", type=int, help="single-antenna users K")
    system.add_argument("--snr-db", dest="snr_db", type=float)
    system.add_argument("--constellation", choices=["qpsk", "16qam"])

    prec = _Parser(add_help=False)
    prec.add_argument("--precoder", choices=harness.PRECODERS)
    prec.add_argument("--layers", type=int, help="iterations / layers T")
    prec.add_argument("--alpha", type=float)
    prec.add_argument("--gamma", type=float)
    prec.add_argument("--params", action="append", help="trained parameter file (repeatable)")
    prec.add_argument("--trials", type=int)
    prec.add_argument("--min-bits", dest="min_bits", type=int)
    prec.add_argument("--epsilon", type=float, help="CSI error level")

    ap = _Parser(prog="ide2net", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"ide2net {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", parents=[common, system], help="train an IDE2-Net")
    t.add_argument("--layers", type=int)
    t.add_argument("--epochs", type=int)
    t.add_argument("--samples-per-epoch", dest="samples_per_epoch", type=int)
    t.add_argument("--optimizer", choices=["sgd", "adam"])
    t.add_argument("--lr", dest="lr_initial", type=float)
    t.add_argument("--lr-decay-every", dest="lr_decay_every", type=int)

    sub.add_parser("eval", parents=[common, system, prec], help="BER at a single operating point")

    s = sub.add_parser("sweep", parents=[common, system, prec], help="BER versus SNR, layers or CSI error")
    s.add_argument("--kind", choices=harness.SWEEP_KINDS)
    s.add_argument("--values", help="comma-separated sweep values")

    o = sub.add_parser("oracle", parents=[common, system], help="exhaustive optimum vs IDE2 on tiny systems")
    o.add_argument("--instances", type=int)
    o.add_argument("--layers", dest="oracle_layers", type=int, help="IDE2 iterations")

    p = sub.add_parser("plot", parents=[common], help="write a gnuplot script for sweep CSVs")
    p.add_argument("csv", nargs="+")
    p.add_argument("--xlabel", default="sweep value")
    return ap


def main(argv=None) -> int:
    ap = make_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:  # --help, --version and usage errors
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(levelname)s: %(message)s")
    try:
        cfg = load_config(args.config, args)
        if args.command == "train":
            return cmd_train(cfg)
        if args.command == "eval":
            return cmd_eval(cfg)
        if args.command == "sweep":
            return cmd_sweep(cfg)
        if args.command == "oracle":
            return cmd_oracle(cfg)
        return cmd_plot(cfg, args.csv, args.xlabel)
    except UsageError as exc:
        print(f"ide2net: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ArithmeticError as exc:
        print(f"ide2net: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
