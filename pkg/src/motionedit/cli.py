"""Command-line entry point: ``motionedit <verb> ...``."""

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .baselines import BASELINE_KINDS, BaselineSampler, body_parts_for_edit, part_mask, sample_baseline
from .codec import decode, encode, normalize
from .config import dump_config, load_config
from .dataset import by_split, data_root, load_triplets, save_triplets, split_dataset
from .diffusion import cosine_schedule, sample
from .harness import datasize_ablation, embedder_pairs, guidance_sweep, save_reports, sweep_table
from .mining import POOLED, embed_windows, export_pool, mine_pairs, slide_windows
from .retrieval import evaluate_editing, format_table, load_embedder, save_embedder, train_embedder
from .skeleton import JOINT_NAMES
from .storage import atomic_write_text, dump_json, load_motion, save_motion
from .synthetic import generate_long_motions, generate_synthetic_triplets
from .training import TMEDSampler, load_checkpoint, save_checkpoint, train_denoiser

log = logging.getLogger("motionedit")

JOINT_FORMAT_HEADER = "# motionedit joint animation v1"


def _cfg(args):
    cfg = load_config(args.config, args.set)
    if args.seed is not None:
        cfg.seed = args.seed
    return cfg


def _data_dir(args):
    return Path(args.data) if args.data else data_root()


def cmd_gen_synth(args):
    cfg = _cfg(args)
    n = args.n or cfg.data.n_triplets
    triplets = generate_synthetic_triplets(n, seed=cfg.seed, fps=cfg.fps)
    split_dataset(triplets, seed=cfg.data.split_seed)
    out = Path(args.out) if args.out else data_root()
    save_triplets(out, triplets, seed=cfg.seed)
    counts = {s: len(by_split(triplets, s)) for s in ("train", "val", "test")}
    print(f"wrote {n} triplets to {out} ({counts['train']}/{counts['val']}/{counts['test']})")


def cmd_train(args):
    cfg = _cfg(args)
    triplets = load_triplets(_data_dir(args), split="train")
    if args.kind == "embedder":
        model = train_embedder(embedder_pairs(triplets), cfg.embedder, seed=cfg.seed, log=log.info)
        save_embedder(args.out, model)
    else:
        sched = cosine_schedule(cfg.steps)
        model, stats, hist = train_denoiser(triplets, args.kind, cfg.denoiser, cfg.train_config(), sched,
                                            log=log.info)
        save_checkpoint(args.out, model, stats, sched, args.kind, cfg.seed,
                        {"config": cfg.to_dict(), "final_loss": hist[-1], "epochs_run": len(hist)})
    print(f"saved {args.kind} model to {args.out}")


def cmd_sample(args):
    cfg = _cfg(args)
    model, stats, sched, meta = load_checkpoint(args.checkpoint)
    source = load_motion(args.source, cfg.fps)
    src_feat = encode(source)
    kind = args.baseline or meta["kind"]
    if kind == "tmed":
        length = args.length or source.num_frames
        out = sample(model, sched, stats, [normalize(src_feat, stats)], [args.text], cfg.scales, [length],
                     cfg.seed)[0]
    else:
        masks = [part_mask(body_parts_for_edit(args.text, args.cache))] if kind.startswith("mdm_bp") else None
        out = sample_baseline(kind, model, sched, stats, [src_feat], [args.text], cfg.scales, cfg.seed, masks,
                              [args.length or source.num_frames])[0]
    motion = decode(out, fps=cfg.fps)
    save_motion(args.out, motion)
    atomic_write_text(str(args.out) + ".json", dump_json({
        "checkpoint": str(args.checkpoint), "kind": kind, "text": args.text, "seed": cfg.seed,
        "guidance": {"text": cfg.scales.text, "source": cfg.scales.source}, "frames": motion.num_frames}))
    print(f"wrote {motion.num_frames} frames to {args.out}")


def _sampler(args, cfg, model, stats, sched, kind):
    if kind == "tmed":
        return TMEDSampler(model, stats, sched, cfg.scales, cfg.eval.seed)
    return BaselineSampler(kind, model, stats, sched, cfg.scales, cfg.eval.seed, args.cache)


def cmd_eval(args):
    cfg = _cfg(args)
    model, stats, sched, meta = load_checkpoint(args.checkpoint)
    kind = args.baseline or meta["kind"]
    if (kind == "tmed") != (meta["kind"] == "tmed"):
        raise SystemExit(f"checkpoint of kind {meta['kind']} cannot run as {kind}")
    test = load_triplets(_data_dir(args), split=args.split)
    embedder = load_embedder(args.embedder)
    gallery = None if args.full_gallery else cfg.eval.gallery_size
    report = evaluate_editing(_sampler(args, cfg, model, stats, sched, kind), test, embedder, gallery,
                              cfg.eval.seed, name=kind)
    print(format_table({kind: report}))
    print(f"FID {report.fid:.4f}  L2 {report.l2_cm:.2f} cm  galleries {report.batches}x{report.gallery_size}")
    if args.out:
        report.save(args.out)


def cmd_sweep(args):
    cfg = _cfg(args)
    model, stats, sched, _ = load_checkpoint(args.checkpoint)
    valset = load_triplets(_data_dir(args), split=args.split)
    grid = tuple(float(x) for x in args.grid.split(","))
    results = guidance_sweep(model, stats, sched, valset, load_embedder(args.embedder), grid,
                             cfg.eval.gallery_size, cfg.eval.seed, args.out, log=log.info)
    print(sweep_table(results))
    print(sweep_table(results, "source"))


def cmd_ablate(args):
    cfg = _cfg(args)
    root = _data_dir(args)
    train, test = load_triplets(root, split="train"), load_triplets(root, split=args.split)
    fractions = tuple(float(x) for x in args.fractions.split(","))
    reports = datasize_ablation(train, test, load_embedder(args.embedder), fractions, cfg.seed, cfg.denoiser,
                                cfg.train_config(), cosine_schedule(cfg.steps), cfg.scales,
                                cfg.eval.gallery_size, log=log.info)
    named = {f"{f:g}": r for f, r in reports.items()}
    print(format_table(named))
    if args.out:
        save_reports(named, args.out, cfg.seed)


def cmd_mine(args):
    cfg = _cfg(args)
    if args.motions:
        paths = sorted(Path(args.motions).glob("*.mfxa"))
        motions = {p.stem: load_motion(p, cfg.fps) for p in paths}
    else:
        ids, ms, _ = generate_long_motions(args.n_motions, args.duration, seed=cfg.seed, fps=cfg.fps)
        motions = dict(zip(ids, ms))
    windows = []
    for mid, m in motions.items():
        windows += slide_windows(m, mid, stride=args.stride)
    windows = embed_windows(windows, motions, load_embedder(args.embedder))
    pairs = mine_pairs(windows, k=args.k, dedup=args.dedup)
    pooled = [p for p in pairs if p.status == POOLED]
    manifest = export_pool(pooled, windows, motions, args.out, seed=cfg.seed)
    skipped = len(pairs) - len(pooled)
    print(f"{len(windows)} windows, {len(manifest['records'])} pooled pairs, {skipped} too similar -> {args.out}")


def format_joint_animation(motion, skeleton=None):
    """Plain-text animation: header, then one line per frame with 22 x,y,z triples in meters."""
    pos = motion.joints(skeleton)
    lines = [JOINT_FORMAT_HEADER, f"fps {motion.fps:g}", f"frames {len(pos)}", f"joints {len(JOINT_NAMES)}",
             "names " + " ".join(JOINT_NAMES)]
    lines += [" ".join(f"{v:.6f}" for v in frame.reshape(-1)) for frame in pos]
    return "\n".join(lines) + "\n"


def parse_joint_animation(text):
    lines = text.splitlines()
    if not lines or lines[0] != JOINT_FORMAT_HEADER:
        raise ValueError("not a motionedit joint animation file")
    fps = float(lines[1].split()[1])
    frames = int(lines[2].split()[1])
    data = np.array([[float(x) for x in ln.split()] for ln in lines[5: 5 + frames]])
    return fps, data.reshape(frames, -1, 3)


def cmd_export(args):
    cfg = _cfg(args)
    motion = load_motion(args.motion, cfg.fps)
    atomic_write_text(args.out, format_joint_animation(motion))
    print(f"wrote {motion.num_frames} frames to {args.out}")


def cmd_config(args):
    print(dump_config(_cfg(args)), end="")


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML config file or bundled profile name (e.g. 'toy')")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config key, e.g. guidance.text=3 (repeatable)")
    common.add_argument("--seed", type=int, help="run seed (overrides config)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="motionedit", description="Text-driven motion editing workbench")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-synth", parents=[common], help="generate a synthetic triplet store")
    g.add_argument("--n", type=int, help="number of triplets (default: data.n_triplets)")
    g.add_argument("--out", help="store directory (default: $MOTIONEDIT_DATA)")
    g.set_defaults(func=cmd_gen_synth)

    t = sub.add_parser("train", parents=[common], help="train a denoiser or the retrieval embedder")
    t.add_argument("kind", choices=("tmed", "mdm", "embedder"))
    t.add_argument("--data", help="triplet store (default: $MOTIONEDIT_DATA)")
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_train)

    s = sub.add_parser("sample", parents=[common], help="edit one source motion")
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--source", required=True, help="source motion (.mfxa)")
    s.add_argument("--text", required=True)
    s.add_argument("--length", type=int, help="target frames (default: source length)")
    s.add_argument("--baseline", choices=BASELINE_KINDS, help="run an MDM checkpoint as this baseline")
    s.add_argument("--cache", help="body-part response cache (default: bundled)")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_sample)

    e = sub.add_parser("eval", parents=[common], help="retrieval evaluation on a split")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--embedder", required=True)
    e.add_argument("--data")
    e.add_argument("--split", default="test")
    e.add_argument("--baseline", choices=BASELINE_KINDS)
    e.add_argument("--cache")
    e.add_argument("--full-gallery", action="store_true", help="use the whole split as one gallery")
    e.add_argument("--out", help="write the EvalReport here (JSON)")
    e.set_defaults(func=cmd_eval)

    w = sub.add_parser("sweep", parents=[common], help="guidance-scale grid on the validation split")
    w.add_argument("--checkpoint", required=True)
    w.add_argument("--embedder", required=True)
    w.add_argument("--data")
    w.add_argument("--split", default="val")
    w.add_argument("--grid", default="1,2,3,4,5")
    w.add_argument("--out", required=True, help="directory for sweep_r1.tsv and sweep_table.txt")
    w.set_defaults(func=cmd_sweep)

    a = sub.add_parser("ablate-data", parents=[common], help="train on nested data fractions")
    a.add_argument("--embedder", required=True)
    a.add_argument("--data")
    a.add_argument("--split", default="test")
    a.add_argument("--fractions", default="0.1,0.5,1.0")
    a.add_argument("--out")
    a.set_defaults(func=cmd_ablate)

    m = sub.add_parser("mine", parents=[common], help="mine candidate pairs from long motions")
    m.add_argument("--embedder", required=True)
    m.add_argument("--motions", help="directory of .mfxa motions (default: generate synthetic ones)")
    m.add_argument("--n-motions", type=int, default=20)
    m.add_argument("--duration", type=float, default=10.0)
    m.add_argument("--stride", type=float, default=1.0)
    m.add_argument("--k", type=int, default=2)
    m.add_argument("--dedup", type=float, default=0.99)
    m.add_argument("--out", required=True)
    m.set_defaults(func=cmd_mine)

    x = sub.add_parser("export", parents=[common], help="write per-frame joint positions as text")
    x.add_argument("--motion", required=True)
    x.add_argument("--out", required=True)
    x.set_defaults(func=cmd_export)

    c = sub.add_parser("config", parents=[common], help="print the resolved configuration")
    c.set_defaults(func=cmd_config)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        args.func(args)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
