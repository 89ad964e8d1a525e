"""Data-size ablation: TMED trained on nested 10/50/100% subsets of the synthetic train split.

    python3 scripts/data_ablation.py --run runs/toy --out runs/ablation
"""

import argparse
import logging
from pathlib import Path

import torch

from motionedit.config import load_config
from motionedit.dataset import by_split
from motionedit.diffusion import cosine_schedule
from motionedit.harness import build_corpus, datasize_ablation, save_reports
from motionedit.retrieval import format_table, load_embedder
from motionedit.training import load_checkpoint


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--run", default="runs/toy")
    p.add_argument("--fractions", default="0.1,0.5,1.0")
    p.add_argument("--reuse-full", action="store_true",
                   help="reuse the run's TMED checkpoint for the 100%% fraction")
    p.add_argument("--out", default="runs/ablation")
    args = p.parse_args()
    torch.set_num_threads(1)
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")
    cfg = load_config(f"{args.run}/config.yaml")
    corpus = build_corpus(cfg.data.n_triplets, cfg.seed, cfg.data.split_seed, cfg.fps)
    trained = {}
    if args.reuse_full and Path(f"{args.run}/tmed.pt").exists():
        model, stats, _, _ = load_checkpoint(f"{args.run}/tmed.pt")
        trained[1.0] = (model, stats)
    fractions = tuple(float(x) for x in args.fractions.split(","))
    reports = datasize_ablation(by_split(corpus, "train"), by_split(corpus, "test"),
                                load_embedder(f"{args.run}/embedder.pt"), fractions, cfg.seed, cfg.denoiser,
                                cfg.train_config(), cosine_schedule(cfg.steps), cfg.scales,
                                cfg.eval.gallery_size, trained, log=logging.info)
    named = {f"{f:g}": r for f, r in reports.items()}
    save_reports(named, args.out, cfg.seed)
    print(format_table(named))


if __name__ == "__main__":
    main()
