"""Regenerate every comparative-statics table plus the reference manifest."""

import argparse
import sys
import time
from pathlib import Path

from carbon_radner import tables as tb
from carbon_radner.config_io import baseline_config, load_config


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config")
    ap.add_argument("--out", default="results/tables")
    args = ap.parse_args()
    cfg = load_config(args.config).market if args.config else baseline_config()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    arts = [tb.build_table(cfg, name) for name in tb.TABLE_NAMES]
    for art in arts:
        (out / f"{art.name}.csv").write_text(art.to_csv())
    (out / "manifest.csv").write_text(tb.manifest_csv(arts))
    rows = tb.manifest_rows(arts)
    for name in tb.TABLE_NAMES:
        mine = [r for r in rows if r[0] == name]
        ok = sum(r[-1] == "pass" for r in mine)
        print(f"{name:14s} {ok:4d}/{len(mine):4d} reference cells within tolerance")
    print(f"wrote {len(arts)} tables to {out} in {time.perf_counter() - t0:.2f}s")
    return 0


if __name__ == "__main__":
    sys.exit(main())
