#!/usr/bin/env python3
"""Convert raw Planetoid files (ind.<name>.{x,tx,allx,graph,test.index})
into the edges.txt + features.csv layout read by `linkgae`.

    python3 tools/planetoid_to_linkgae.py --raw path/to/raw --name cora --out data/cora
"""

import argparse
import pickle
import sys
from pathlib import Path

import numpy as np
import scipy.sparse as sp


def load_pickle(path: Path):
    with path.open("rb") as f:
        return pickle.load(f, encoding="latin1")


def convert(raw: Path, name: str, out: Path) -> tuple[int, int]:
    x, tx, allx, graph = (load_pickle(raw / f"ind.{name}.{part}") for part in ("x", "tx", "allx", "graph"))
    del x  # subset of allx
    test_index = np.loadtxt(raw / f"ind.{name}.test.index", dtype=np.int64)
    lo, hi = test_index.min(), test_index.max()

    tx = sp.csr_matrix(tx)
    allx = sp.csr_matrix(allx)
    if name == "citeseer":
        # Some test ids have no feature row; they stay as all-zero rows.
        full = sp.lil_matrix((hi - lo + 1, tx.shape[1]))
        full[np.sort(test_index) - lo, :] = tx
        tx = full.tocsr()

    features = sp.vstack([allx, tx]).tolil()
    order = np.sort(test_index)
    features[test_index, :] = features[order, :]
    features = features.toarray()
    n = features.shape[0]

    edges = set()
    for u, nbrs in graph.items():
        for v in nbrs:
            if u != v and u < n and v < n:
                edges.add((min(u, v), max(u, v)))

    out.mkdir(parents=True, exist_ok=True)
    with (out / "edges.txt").open("w") as f:
        for u, v in sorted(edges):
            f.write(f"{u} {v}\n")
    np.savetxt(out / "features.csv", features, delimiter=",", fmt="%.8g")
    return n, len(edges)


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--raw", type=Path, required=True, help="directory with the ind.<name>.* files")
    ap.add_argument("--name", required=True, choices=["cora", "citeseer", "pubmed"])
    ap.add_argument("--out", type=Path, required=True)
    args = ap.parse_args()
    n, m = convert(args.raw, args.name, args.out)
    print(f"{args.name}: {n} nodes, {m} edges, avg degree {2 * m / n:.2f} -> {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
