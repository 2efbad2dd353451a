"""BER against the number of iterations/layers for IDE2, IDE2-Net and quantised ZF."""
from pathlib import Path

from _common import A, C16, SYS, parser, trained
from ide2net.harness import PrecoderSpec, SweepSpec, ber_sweep, results_to_csv, sweep_manifest, trials_for_bits, write_manifest

LAYERS = [1, 2, 5, 10, 20, 50]


def main():
    ap = parser(__doc__)
    ap.add_argument("--net-layers", default="5,10,20,50")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    trials = trials_for_bits(args.min_bits, SYS, C16)
    net_t = [int(v) for v in args.net_layers.split(",")]
    nets = {t: trained(t, out) for t in net_t}
    runs = {
        "ide2": SweepSpec("layers", LAYERS, trials, SYS, PrecoderSpec("ide2"), args.seed),
        "ide2net": SweepSpec("layers", net_t, trials, SYS, PrecoderSpec("ide2-net", params=nets), args.seed),
        "pgd": SweepSpec("layers", LAYERS, trials, SYS, PrecoderSpec("pgd"), args.seed),
        "zfq": SweepSpec("layers", [1], trials, SYS, PrecoderSpec("zf-quant"), args.seed),
    }
    for name, spec in runs.items():
        res = ber_sweep(spec, A, C16, threads=args.threads)
        (out / f"layers_{name}.csv").write_text(results_to_csv(res))
        write_manifest(sweep_manifest(spec), out / f"layers_{name}.manifest.json")
        print(name, " ".join(f"{r.sweep_value:g}:{r.ber:.4f}" for r in res))


if __name__ == "__main__":
    main()
