"""Shared setup for the experiment scripts."""
import argparse
from pathlib import Path

from ide2net.channel import SystemConfig
from ide2net.constellation import one_bit_alphabet, qam
from ide2net.unfolded import TrainConfig, load_params, save_params, train

A = one_bit_alphabet(1.0)
C16 = qam(16)
SYS = SystemConfig(128, 16, 1.0, 14.0)


def parser(doc):
    ap = argparse.ArgumentParser(description=doc)
    ap.add_argument("--out", default="results")
    ap.add_argument("--seed", type=int, default=2024)
    ap.add_argument("--threads", type=int, default=4)
    ap.add_argument("--min-bits", type=int, default=100_000)
    return ap


def trained(t, out: Path, seed=0):
    """Load ``out/net_T{t}.json`` or train it at desk scale."""
    path = out / f"net_T{t}.json"
    if path.exists():
        return load_params(path)
    params, hist = train(TrainConfig(t_layers=t, seed=seed), SYS, A, C16)
    save_params(params, path, SYS, seed)
    print(f"trained T={t}: val {hist[0][2]:.4f} -> {min(r[2] for r in hist):.4f}")
    return params
