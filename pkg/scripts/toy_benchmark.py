"""Toy benchmark: synthetic triplets -> embedder -> TMED and MDM -> retrieval table.

    python3 scripts/toy_benchmark.py --out runs/toy [--set key=value ...]
"""

import argparse
import logging
import time

import torch

from motionedit.config import dump_config, load_config
from motionedit.harness import run_toy_benchmark, save_reports
from motionedit.storage import atomic_write_text
from motionedit.training import save_checkpoint
from motionedit.retrieval import save_embedder
from motionedit.diffusion import cosine_schedule


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--config", default="toy")
    p.add_argument("--set", action="append", default=[])
    p.add_argument("--kinds", default="tmed,mdm,mdm_bp")
    p.add_argument("--eval-limit", type=int)
    p.add_argument("--out", default="runs/toy")
    args = p.parse_args()
    torch.set_num_threads(1)
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")
    cfg = load_config(args.config, args.set)
    start = time.time()
    res = run_toy_benchmark(cfg, tuple(args.kinds.split(",")), log=logging.info, eval_limit=args.eval_limit)
    save_reports(res.reports, args.out, cfg.seed)
    sched = cosine_schedule(cfg.steps)
    for kind, (model, stats) in res.models.items():
        save_checkpoint(f"{args.out}/{kind}.pt", model, stats, sched, kind, cfg.seed)
    save_embedder(f"{args.out}/embedder.pt", res.embedder)
    atomic_write_text(f"{args.out}/config.yaml", dump_config(cfg))
    print(res.table())
    print("timings (s):", {k: round(v, 1) for k, v in res.timings.items()}, f"total {time.time() - start:.0f}")


if __name__ == "__main__":
    main()
