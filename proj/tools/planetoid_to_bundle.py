#!/usr/bin/env python3
"""Convert Planetoid raw files (ind.<name>.{x,y,tx,ty,allx,ally,graph,test.index})
into an lgt graph bundle directory.

The stored split is the public one: the first 20 labelled nodes per class
block of allx for training, the next 500 for validation, and test.index for
testing. `lgt train` redraws splits per seed unless --fixed-splits is given.

    python tools/planetoid_to_bundle.py --raw planetoid/data --name cora --out data/cora
"""

import argparse
import json
import pickle
import sys
from pathlib import Path

import numpy as np
import scipy.sparse as sp


def load_raw(raw: Path, name: str):
    objs = {}
    for key in ("x", "y", "tx", "ty", "allx", "ally", "graph"):
        with open(raw / f"ind.{name}.{key}", "rb") as f:
            objs[key] = pickle.load(f, encoding="latin1")
    test_index = [int(line) for line in (raw / f"ind.{name}.test.index").read_text().split()]
    return objs, test_index


def build(objs, test_index):
    allx, ally, tx, ty = objs["allx"], objs["ally"], objs["tx"], objs["ty"]
    test_sorted = sorted(test_index)
    n_test_span = test_sorted[-1] - test_sorted[0] + 1
    # Citeseer has isolated test nodes missing from tx; pad them with zeros.
    if n_test_span != tx.shape[0]:
        tx_full = sp.lil_matrix((n_test_span, tx.shape[1]))
        tx_full[np.array(test_sorted) - test_sorted[0], :] = tx
        tx = tx_full
        ty_full = np.zeros((n_test_span, ty.shape[1]))
        ty_full[np.array(test_sorted) - test_sorted[0], :] = ty
        ty = ty_full

    features = sp.vstack((allx, tx)).tolil()
    labels = np.vstack((ally, ty))
    features[test_index, :] = features[test_sorted, :]
    labels[test_index, :] = labels[test_sorted, :]
    n = features.shape[0]

    edges = set()
    for i, nbrs in objs["graph"].items():
        for j in nbrs:
            if i != j and i < n and j < n:
                edges.add((min(i, j), max(i, j)))

    y = labels.argmax(axis=1)
    unlabeled = labels.sum(axis=1) == 0
    train = list(range(objs["y"].shape[0]))
    val = list(range(len(train), len(train) + 500))
    test = [i for i in test_index if not unlabeled[i]]
    return np.asarray(features.todense(), dtype=np.float64), y, sorted(edges), train, val, test


def write_bundle(out: Path, name, x, y, edges, train, val, test):
    out.mkdir(parents=True, exist_ok=True)
    n, f = x.shape
    c = int(y.max()) + 1
    (out / "meta.json").write_text(json.dumps({"n": n, "f": f, "c": c, "name": name}) + "\n")
    (out / "edges.tsv").write_text("".join(f"{i}\t{j}\n" for i, j in edges))
    (out / "features.csv").write_text("".join(",".join(repr(float(v)) for v in row) + "\n" for row in x))
    (out / "labels.txt").write_text("".join(f"{int(v)}\n" for v in y))
    (out / "splits.json").write_text(json.dumps({"train": sorted(train), "val": sorted(val), "test": sorted(test)}) + "\n")


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--raw", type=Path, required=True, help="directory holding ind.<name>.* files")
    ap.add_argument("--name", default="cora")
    ap.add_argument("--out", type=Path, required=True)
    args = ap.parse_args(argv)
    try:
        objs, test_index = load_raw(args.raw, args.name)
    except FileNotFoundError as e:
        print(f"data error: {e}", file=sys.stderr)
        return 2
    x, y, edges, train, val, test = build(objs, test_index)
    write_bundle(args.out, args.name, x, y, edges, train, val, test)
    print(f"wrote {args.out}: n={x.shape[0]} f={x.shape[1]} C={int(y.max()) + 1} edges={len(edges)}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
