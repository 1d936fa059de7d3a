"""Sweep orchestration: one cell per (SNR, seed), every requested method inside it."""
from __future__ import annotations

import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import autodiff as ad
from . import baselines as bl
from . import pipeline as pl
from .config import ExperimentConfig
from .constellation import make_constellation
from .datagen import Dataset, gen_gaussian_mixture, gen_toy_images, save_dataset
from .metrics import ShapingReport, shaping_report

RESULT_COLUMNS = ("method", "scheme", "M", "n", "rate", "snr_db", "lambda", "seed",
                  "accuracy", "psnr_db", "final_loss")


@dataclass
class CellResult:
    rows: list[dict]
    jcm_indices: np.ndarray | None


def make_dataset(cfg: ExperimentConfig) -> tuple[Dataset, Dataset]:
    if cfg.dataset == "images":
        ds = gen_toy_images(cfg.image_side, cfg.num_classes, cfg.samples_per_class,
                            cfg.image_noise, cfg.seed)
    else:
        ds = gen_gaussian_mixture(cfg.k, cfg.num_classes, cfg.samples_per_class, cfg.spread,
                                  cfg.seed)
    return ds.split_train_val(cfg.val_fraction, cfg.seed)


def system_config(cfg: ExperimentConfig, method: str, snr: float) -> pl.SystemConfig:
    return pl.SystemConfig(
        method=method, scheme=cfg.scheme, order=cfg.order, n=cfg.n, k=cfg.source_dim,
        num_classes=cfg.num_classes, snr_db=snr, lam=cfg.lambda_for(snr), rho=cfg.rho,
        enc_hidden=cfg.enc_hidden, sem_hidden=cfg.sem_hidden, src_hidden=cfg.src_hidden,
        batch_size=cfg.batch_size, lr0=cfg.lr0, lr_min=cfg.lr_min,
        lr_horizon=cfg.lr_horizon or None, update=cfg.update,
        samples_per_step=cfg.samples_per_step, normalization=cfg.normalization,
        hardsoft_temperature=cfg.hardsoft_temperature)


def snr_tag(snr: float) -> str:
    return f"{snr:g}"


def _row(cfg: ExperimentConfig, method: str, snr: float, seed: int, ev: pl.EvalResult) -> dict:
    return {"method": method, "scheme": cfg.scheme, "M": cfg.order, "n": cfg.n,
            "rate": pl.rate(cfg.n, cfg.source_dim), "snr_db": snr, "lambda": cfg.lambda_for(snr),
            "seed": seed, "accuracy": ev.accuracy, "psnr_db": ev.psnr_db,
            "final_loss": ev.loss}


def run_cell(cfg: ExperimentConfig, out_dir: Path, snr: float, seed: int,
             train_ds: Dataset | None = None, val_ds: Dataset | None = None) -> CellResult:
    """Train and evaluate each requested method at one SNR and seed.

    ``final_loss`` is the held-out loss under the transmitted (possibly
    quantized) symbols, so trained and post-hoc quantized systems compare
    on the same footing.
    """
    if train_ds is None:
        train_ds, val_ds = make_dataset(cfg)
    tag = f"{snr_tag(snr)}dB_seed{seed}"
    trained: dict[str, pl.JCMModel] = {}
    needed = [m for m in pl.TRAINED_METHODS if m in cfg.methods]
    if ("uniform" in cfg.methods or "nn" in cfg.methods) and "analog" not in needed:
        needed.append("analog")
    for method in needed:
        model = pl.build_model(system_config(cfg, method, snr), seed)
        try:
            pl.train(model, train_ds, cfg.epochs, seed, val_ds,
                     log_path=out_dir / f"log_{method}_{tag}.csv")
        finally:
            ad.save_checkpoint(model.store, out_dir / f"ckpt_{method}_{tag}.jcmp")
        trained[method] = model

    rows, jcm_indices = [], None
    for method in cfg.methods:
        if method in trained:
            ev = pl.evaluate(trained[method], val_ds, cfg.eval_draws, seed)
            if method == "jcm":
                jcm_indices = ev.indices
        else:
            analog = trained["analog"]
            c = analog.constellation
            if method == "uniform":
                tx = bl.uniform_transmitter(c, analog.cfg.power)
            else:
                z = pl.encode_stage(analog, ad.Tape(), train_ds.x.astype(float), None)[0].data
                corpus = bl.quantizer_corpus(z[..., 0] + 1j * z[..., 1], c)
                q = bl.learned_quantizer_train(corpus, c.side, cfg.quantizer_steps,
                                               cfg.quantizer_lr, seed)
                tx = bl.learned_transmitter(c, q, analog.cfg.power)
                store = analog.store.copy()
                store.add("quant.levels", q.levels)
                ad.save_checkpoint(store, out_dir / f"ckpt_nn_{tag}.jcmp")
            ev = pl.evaluate(analog, val_ds, cfg.eval_draws, seed, transform=tx)
        rows.append(_row(cfg, method, snr, seed, ev))
    return CellResult(rows, jcm_indices)


def _cell_job(args):
    cfg, out_dir, snr, seed = args
    return run_cell(cfg, out_dir, snr, seed)


def write_results(rows: list[dict], path) -> None:
    rows = sorted(rows, key=lambda r: (r["method"], r["snr_db"], r["seed"]))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(RESULT_COLUMNS)
        for r in rows:
            w.writerow([repr(v) if isinstance(v, float) else v
                        for v in (r[c] for c in RESULT_COLUMNS)])


def run_experiment(cfg: ExperimentConfig, out_dir) -> tuple[list[dict], dict[float, ShapingReport]]:
    """Run every cell, then write results.csv and one shaping JSON per SNR.

    Output bytes depend only on the config: cells own their seeds, and rows
    are sorted before writing regardless of completion order.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    train_ds, val_ds = make_dataset(cfg)
    if cfg.save_dataset:
        save_dataset(train_ds, out_dir / "train.jcmd")
        save_dataset(val_ds, out_dir / "val.jcmd")
    cells = [(snr, seed) for snr in cfg.snr_db for seed in cfg.seeds]
    if cfg.workers > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_cell_job, [(cfg, out_dir, s, sd) for s, sd in cells]))
    else:
        results = [run_cell(cfg, out_dir, s, sd, train_ds, val_ds) for s, sd in cells]

    rows = [r for res in results for r in res.rows]
    write_results(rows, out_dir / "results.csv")

    reports = {}
    if "jcm" in cfg.methods:
        c = make_constellation(cfg.scheme, cfg.order)
        for snr in cfg.snr_db:
            streams = [res.jcm_indices for (s, _), res in zip(cells, results) if s == snr]
            rep = shaping_report(c, np.concatenate(streams), snr)
            (out_dir / f"shaping_{snr_tag(snr)}.json").write_text(rep.to_json() + "\n")
            reports[snr] = rep
    return rows, reports
