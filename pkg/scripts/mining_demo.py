"""Mine candidate edit pairs from synthetic long motions and export the pool.

    python3 scripts/mining_demo.py --embedder runs/toy/embedder.pt --out runs/pool
"""

import argparse
from collections import Counter

from motionedit.mining import POOLED, embed_windows, export_pool, mine_pairs, slide_windows
from motionedit.retrieval import load_embedder
from motionedit.synthetic import generate_long_motions


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--embedder", required=True)
    p.add_argument("--n-motions", type=int, default=30)
    p.add_argument("--duration", type=float, default=12.0)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="runs/pool")
    args = p.parse_args()
    ids, motions, params = generate_long_motions(args.n_motions, args.duration, seed=args.seed)
    by_id = dict(zip(ids, motions))
    family = {i: q["family"] for i, q in zip(ids, params)}
    windows = [w for mid, m in by_id.items() for w in slide_windows(m, mid)]
    windows = embed_windows(windows, by_id, load_embedder(args.embedder))
    pairs = mine_pairs(windows, k=args.k)
    pooled = [q for q in pairs if q.status == POOLED]
    export_pool(pooled, windows, by_id, args.out, seed=args.seed)
    src_of = {w.id: w.parent for w in windows}
    same = sum(family[src_of[q.source]] == family[src_of[q.target]] for q in pooled)
    print(f"{len(windows)} windows -> {len(pooled)} pooled pairs "
          f"({Counter(q.status for q in pairs)}); same-family rate {same / max(len(pooled), 1):.2f}")


if __name__ == "__main__":
    main()
