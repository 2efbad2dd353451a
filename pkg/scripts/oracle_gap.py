"""Residual ratio of IDE2 to the exhaustive optimum on tiny one-bit systems."""
from pathlib import Path

import numpy as np

from _common import A, C16, parser
from ide2net.channel import SystemConfig
from ide2net.harness import oracle_batch, oracle_to_csv
from ide2net.precoders import Ide2Config


def main():
    ap = parser(__doc__)
    ap.add_argument("--instances", type=int, default=1000)
    ap.add_argument("--sizes", default="2x1,4x1,4x2,6x2,8x2")
    ap.add_argument("--layers", type=int, default=50)
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for size in args.sizes.split(","):
        n, k = (int(v) for v in size.split("x"))
        rows = oracle_batch(SystemConfig(n, k), A, C16, args.instances, args.seed, Ide2Config(t_max=args.layers))
        (out / f"oracle_N{n}_K{k}.csv").write_text(oracle_to_csv(rows))
        r = np.array([row.ratio for row in rows])
        print(f"N={n} K={k}: within 1.5x {np.mean(r <= 1.5):.1%}, within 2x {np.mean(r <= 2):.1%}, "
              f"median {np.median(r):.3f}, min {r.min():.6f}")


if __name__ == "__main__":
    main()
