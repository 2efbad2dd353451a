"""BER against SNR for ZF, quantised ZF, IDE2 and IDE2-Net at T=20."""
from pathlib import Path

from _common import A, C16, SYS, parser, trained
from ide2net.harness import PrecoderSpec, SweepSpec, ber_sweep, results_to_csv, sweep_manifest, trials_for_bits, write_manifest


def main():
    ap = parser(__doc__)
    ap.add_argument("--snr", default="-5,0,5,10,14,20,25")
    ap.add_argument("--layers", type=int, default=20)
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    snr = [float(v) for v in args.snr.split(",")]
    t = args.layers
    trials = trials_for_bits(args.min_bits, SYS, C16)
    precoders = {
        "zf": PrecoderSpec("zf"),
        "zfq": PrecoderSpec("zf-quant"),
        "ide2": PrecoderSpec("ide2", t_max=t),
        "ide2net": PrecoderSpec("ide2-net", t_max=t, params={t: trained(t, out)}),
    }
    for name, prec in precoders.items():
        spec = SweepSpec("snr", snr, trials, SYS, prec, args.seed)
        res = ber_sweep(spec, A, C16, threads=args.threads)
        (out / f"snr_{name}.csv").write_text(results_to_csv(res))
        write_manifest(sweep_manifest(spec), out / f"snr_{name}.manifest.json")
        print(name, " ".join(f"{r.sweep_value:g}:{r.ber:.4f}" for r in res))


if __name__ == "__main__":
    main()
