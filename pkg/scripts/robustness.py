"""BER against CSI error for IDE2 and IDE2-Net (T=20, 14 dB), networks trained with perfect CSI."""
from pathlib import Path

from _common import A, C16, SYS, parser, trained
from ide2net.harness import PrecoderSpec, SweepSpec, ber_sweep, results_to_csv, sweep_manifest, trials_for_bits, write_manifest


def main():
    ap = parser(__doc__)
    ap.add_argument("--eps", default="0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    eps = [float(v) for v in args.eps.split(",")]
    trials = trials_for_bits(args.min_bits, SYS, C16)
    for name, prec in {"ide2": PrecoderSpec("ide2", t_max=20),
                       "ide2net": PrecoderSpec("ide2-net", t_max=20, params={20: trained(20, out)})}.items():
        spec = SweepSpec("epsilon", eps, trials, SYS, prec, args.seed)
        res = ber_sweep(spec, A, C16, threads=args.threads)
        (out / f"eps_{name}.csv").write_text(results_to_csv(res))
        write_manifest(sweep_manifest(spec), out / f"eps_{name}.manifest.json")
        print(name, " ".join(f"{r.sweep_value:g}:{r.ber:.4f}" for r in res))


if __name__ == "__main__":
    main()
