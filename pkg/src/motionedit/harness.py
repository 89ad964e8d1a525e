"""Experiment harnesses: toy benchmark, guidance sweep and data-size ablation."""

import time
from dataclasses import dataclass, field
from pathlib import Path

from .baselines import BaselineSampler
from .dataset import by_split, nested_subset, split_dataset
from .diffusion import GuidanceScales, cosine_schedule
from .retrieval import evaluate_editing, format_table, train_embedder
from .storage import atomic_write_text, dump_json
from .synthetic import generate_synthetic_triplets
from .training import TMEDSampler, train_denoiser

SWEEP_GRID = (1.0, 2.0, 3.0, 4.0, 5.0)


def embedder_pairs(triplets):
    """(motion, description) pairs for embedder training.

    Synthetic triplets carry descriptions of both motions; otherwise the target
    is paired with the edit text.
    """
    pairs = []
    for t in triplets:
        if "source_text" in t.meta:
            pairs += [(t.source, t.meta["source_text"]), (t.target, t.meta["target_text"])]
        else:
            pairs.append((t.target, t.edit_text))
    return pairs


def build_corpus(n, seed=0, split_seed=0, fps=20.0):
    triplets = generate_synthetic_triplets(n, seed=seed, fps=fps)
    split_dataset(triplets, seed=split_seed)
    return triplets


def guidance_sweep(model, stats, sched, valset, embedder, grid=SWEEP_GRID, gallery_size=32, seed=0,
                   out_dir=None, log=None):
    """One evaluation per (text, source) scale pair on fixed galleries.

    Returns {(s_text, s_source): EvalReport}; with ``out_dir`` also writes
    ``sweep_r1.tsv`` (plot data) and ``sweep_table.txt``.
    """
    results = {}
    for s_text in grid:
        for s_src in grid:
            sampler = TMEDSampler(model, stats, sched, GuidanceScales(s_text, s_src), seed)
            results[(s_text, s_src)] = evaluate_editing(sampler, valset, embedder, gallery_size, seed,
                                                        name=f"tmed@{s_text:g},{s_src:g}")
            if log:
                r = results[(s_text, s_src)]
                log(f"sweep text={s_text:g} source={s_src:g} R@1 target {r.target['R@1']:.2f} "
                    f"source {r.source['R@1']:.2f}")
    if out_dir is not None:
        write_sweep(results, out_dir, seed)
    return results


def write_sweep(results, out_dir, seed):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = ["s_text\ts_source\ttarget_R@1\tsource_R@1\ttarget_AvgR\tsource_AvgR"]
    for (st, ss), r in sorted(results.items()):
        rows.append(f"{st:g}\t{ss:g}\t{r.target['R@1']:.4f}\t{r.source['R@1']:.4f}"
                    f"\t{r.target['AvgR']:.4f}\t{r.source['AvgR']:.4f}")
    atomic_write_text(out / "sweep_r1.tsv", "\n".join(rows) + "\n")
    atomic_write_text(out / "sweep_table.txt", sweep_table(results) + f"\nseed {seed}\n")


def sweep_table(results, bench="target"):
    texts = sorted({k[0] for k in results})
    sources = sorted({k[1] for k in results})
    lines = [f"generated-to-{bench} R@1 (rows: text scale, columns: source scale)",
             "      " + "".join(f"{s:>8g}" for s in sources)]
    for st in texts:
        cells = "".join(f"{getattr(results[(st, ss)], bench)['R@1']:8.2f}" if (st, ss) in results else " " * 8
                        for ss in sources)
        lines.append(f"{st:>6g}" + cells)
    return "\n".join(lines)


def datasize_ablation(trainset, testset, embedder, fractions=(0.1, 0.5, 1.0), seed=0, denoiser_config=None,
                      train_config=None, sched=None, scales=GuidanceScales(), gallery_size=32, trained=None,
                      log=None):
    """Train TMED from scratch on nested subsets and evaluate each on the same galleries.

    ``trained`` optionally maps a fraction to an already trained (model, stats)
    with the same hyperparameters, which is then reused rather than retrained.
    Returns {fraction: EvalReport}; each report's ``extra`` records the subset size.
    """
    sched = sched or cosine_schedule(300)
    trained = trained or {}
    reports = {}
    for frac in sorted(fractions):
        subset = nested_subset(trainset, frac, seed)
        if frac in trained:
            model, stats = trained[frac]
        else:
            model, stats, _ = train_denoiser(subset, "tmed", denoiser_config, train_config, sched, log=log)
        rep = evaluate_editing(TMEDSampler(model, stats, sched, scales, seed), testset, embedder, gallery_size,
                               seed, name=f"tmed@{frac:g}")
        rep.extra.update(fraction=frac, train_size=len(subset))
        reports[frac] = rep
        if log:
            log(f"data fraction {frac:g} ({len(subset)} triplets): R@1 {rep.target['R@1']:.2f}")
    return reports


@dataclass
class ToyResult:
    reports: dict
    timings: dict
    models: dict = field(default_factory=dict)
    embedder: object = None
    corpus: list = None

    def table(self):
        return format_table(self.reports)


def run_toy_benchmark(cfg, kinds=("tmed", "mdm", "mdm_bp"), log=None, eval_limit=None):
    """Synthetic corpus -> embedder -> TMED / MDM training -> evaluation of ``kinds``.

    ``cfg`` is a RunConfig. ``eval_limit`` caps the test triplets used (for
    smoke runs); None evaluates the full test split.
    """
    timings = {}
    clock = time.time()
    corpus = build_corpus(cfg.data.n_triplets, cfg.seed, cfg.data.split_seed, cfg.fps)
    train, test = by_split(corpus, "train"), by_split(corpus, "test")
    if eval_limit is not None:
        test = test[:eval_limit]
    timings["corpus"] = time.time() - clock

    clock = time.time()
    embedder = train_embedder(embedder_pairs(train), cfg.embedder, seed=cfg.seed, log=log)
    timings["embedder"] = time.time() - clock

    sched = cosine_schedule(cfg.steps)
    models = {}
    need = {"tmed"} & set(kinds) | ({"mdm"} if set(kinds) - {"tmed"} else set())
    for kind in sorted(need, reverse=True):
        clock = time.time()
        model, stats, hist = train_denoiser(train, kind, cfg.denoiser, cfg.train_config(), sched, log=log)
        models[kind] = (model, stats)
        timings[f"train_{kind}"] = time.time() - clock

    reports = {}
    for kind in kinds:
        clock = time.time()
        if kind == "tmed":
            sampler = TMEDSampler(*models["tmed"], sched, cfg.scales, cfg.eval.seed)
        else:
            sampler = BaselineSampler(kind, *models["mdm"], sched, cfg.scales, cfg.eval.seed)
        reports[kind] = evaluate_editing(sampler, test, embedder, cfg.eval.gallery_size, cfg.eval.seed, name=kind)
        timings[f"eval_{kind}"] = time.time() - clock
        if log:
            r = reports[kind]
            log(f"{kind}: target R@1 {r.target['R@1']:.2f}  source R@1 {r.source['R@1']:.2f}")
    return ToyResult(reports, timings, models, embedder, corpus)


def save_reports(reports, out_dir, seed):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, r in reports.items():
        r.save(out / f"report_{name}.json")
    atomic_write_text(out / "table.txt", format_table(reports) + f"\nseed {seed}\n")
    atomic_write_text(out / "summary.json", dump_json({k: v.to_dict() for k, v in reports.items()}))
