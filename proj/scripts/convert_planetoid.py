#!/usr/bin/env python3
"""Convert the Planetoid citation datasets (Cora / CiteSeer) into the TSV
pair the CLI consumes:

  nodes.tsv  '#labels' header, then  id <TAB> f_1 .. f_d <TAB> class
  edges.tsv  one undirected edge per line,  u <TAB> v  with u < v

Requires torch_geometric (which downloads and caches the raw dataset):

  pip install torch torch_geometric
  python scripts/convert_planetoid.py cora
  python scripts/convert_planetoid.py citeseer
"""

import argparse
import os


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("dataset", choices=["cora", "citeseer"])
    ap.add_argument("--root", default="planetoid_raw",
                    help="download/cache directory for the raw dataset")
    ap.add_argument("--out", default=None,
                    help="output directory (default: data/<dataset>)")
    ap.add_argument("--row-normalize", action="store_true",
                    help="divide each feature row by its sum")
    args = ap.parse_args()

    try:
        from torch_geometric.datasets import Planetoid
    except ImportError:
        raise SystemExit(
            "torch_geometric is required: pip install torch torch_geometric")

    name = {"cora": "Cora", "citeseer": "CiteSeer"}[args.dataset]
    data = Planetoid(args.root, name)[0]
    out = args.out or os.path.join("data", args.dataset)
    os.makedirs(out, exist_ok=True)

    x = data.x.numpy().astype(float)
    if args.row_normalize:
        sums = x.sum(axis=1, keepdims=True)
        sums[sums == 0.0] = 1.0
        x = x / sums
    y = data.y.numpy()

    nodes_path = os.path.join(out, "nodes.tsv")
    with open(nodes_path, "w") as f:
        f.write("#labels\n")
        for i in range(x.shape[0]):
            feats = "\t".join(format(v, ".17g") for v in x[i])
            f.write(f"{i}\t{feats}\t{int(y[i])}\n")

    ei = data.edge_index.numpy()
    edges = sorted({(min(int(u), int(v)), max(int(u), int(v)))
                    for u, v in zip(ei[0], ei[1]) if int(u) != int(v)})
    edges_path = os.path.join(out, "edges.tsv")
    with open(edges_path, "w") as f:
        for u, v in edges:
            f.write(f"{u}\t{v}\n")

    print(f"wrote {nodes_path} ({x.shape[0]} nodes, {x.shape[1]} features)")
    print(f"wrote {edges_path} ({len(edges)} edges)")


if __name__ == "__main__":
    main()
