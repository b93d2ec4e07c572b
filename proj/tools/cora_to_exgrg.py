#!/usr/bin/env python3
"""Convert the LINQS Cora release (cora.content, cora.cites) into a graph directory.

Writes edges.txt, features.csv and labels.txt as read by `exgrg pretrain --data`.
Paper ids are renumbered 0..M-1 in cora.content order; class names are numbered
in sorted order. Citations are symmetrized, self-citations and duplicates dropped.

    python3 tools/cora_to_exgrg.py path/to/cora data/cora
"""

import argparse
import pathlib
import sys


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("src", type=pathlib.Path, help="directory holding cora.content and cora.cites")
    ap.add_argument("out", type=pathlib.Path, help="output graph directory")
    args = ap.parse_args()

    ids, rows, names = {}, [], []
    with open(args.src / "cora.content") as f:
        for line in f:
            parts = line.split()
            if not parts:
                continue
            ids[parts[0]] = len(rows)
            rows.append(parts[1:-1])
            names.append(parts[-1])
    classes = {c: i for i, c in enumerate(sorted(set(names)))}

    edges, skipped = set(), 0
    with open(args.src / "cora.cites") as f:
        for line in f:
            parts = line.split()
            if len(parts) != 2:
                continue
            if parts[0] not in ids or parts[1] not in ids:
                skipped += 1
                continue
            a, b = ids[parts[0]], ids[parts[1]]
            if a != b:
                edges.add((min(a, b), max(a, b)))

    args.out.mkdir(parents=True, exist_ok=True)
    with open(args.out / "edges.txt", "w") as f:
        f.write(f"# {len(rows)} nodes, {len(edges)} undirected edges\n")
        for a, b in sorted(edges):
            f.write(f"{a} {b}\n")
    with open(args.out / "features.csv", "w") as f:
        for r in rows:
            f.write(",".join(r) + "\n")
    with open(args.out / "labels.txt", "w") as f:
        for n in names:
            f.write(f"{classes[n]}\n")
    print(f"{len(rows)} nodes, {len(edges)} edges, {len(classes)} classes, "
          f"{len(rows[0]) if rows else 0} features; {skipped} citations to unknown ids skipped",
          file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
