"""Guidance-scale sweep of a trained TMED checkpoint on the synthetic validation split.

    python3 scripts/guidance_sweep.py --run runs/toy --out runs/sweep
"""

import argparse
import logging

import torch

from motionedit.config import load_config
from motionedit.dataset import by_split
from motionedit.harness import build_corpus, guidance_sweep, sweep_table
from motionedit.retrieval import load_embedder
from motionedit.training import load_checkpoint


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--run", default="runs/toy", help="directory written by toy_benchmark.py")
    p.add_argument("--grid", default="1,2,3,4,5")
    p.add_argument("--split", default="val")
    p.add_argument("--out", default="runs/sweep")
    args = p.parse_args()
    torch.set_num_threads(1)
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")
    cfg = load_config(f"{args.run}/config.yaml")
    model, stats, sched, _ = load_checkpoint(f"{args.run}/tmed.pt")
    embedder = load_embedder(f"{args.run}/embedder.pt")
    corpus = build_corpus(cfg.data.n_triplets, cfg.seed, cfg.data.split_seed, cfg.fps)
    grid = tuple(float(x) for x in args.grid.split(","))
    res = guidance_sweep(model, stats, sched, by_split(corpus, args.split), embedder, grid,
                         cfg.eval.gallery_size, cfg.eval.seed, args.out, log=logging.info)
    print(sweep_table(res))
    print(sweep_table(res, "source"))


if __name__ == "__main__":
    main()
