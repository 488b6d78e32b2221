"""Timescale hierarchy of the 4x4 cellular flow; prints levels, clusters and weights."""

import argparse
from pathlib import Path

from hetlab.hierarchy import timescale_ladder, cellular_flow_network


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--size", type=int, default=4)
    ap.add_argument("--dot", help="write the merge tree as Graphviz DOT")
    args = ap.parse_args()

    rep = timescale_ladder(cellular_flow_network(size=args.size))
    print(rep.note)
    for theta, clusters, weights in rep.entries():
        label = "base" if theta is None else f"theta={theta:.6g}"
        print(f"{label:<16} {len(clusters)} clusters, sizes {sorted({len(c) for c in clusters})}")
    print("weights", {k: round(v, 6) for k, v in rep.base_weights[0].items()})
    if args.dot:
        Path(args.dot).write_text(rep.to_dot(), encoding="utf-8")


if __name__ == "__main__":
    main()
