"""Desk-scale end-to-end run: simulate, fit both estimators, compare, split-half, sweep filters."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .analysis import AlignedPair, density_summary, rmsd, spearman
from .crowd import CrowdSpec, simulate, split_half
from .filtering import KINDS, PC_KINDS, apply_filter, percent_correct, sweep_to_fraction
from .mml import MmlConfig, fit_mml
from .params import write_table
from .rpdata import prune, save_matrix
from .vi import PriorSpec, ViConfig, fit_vi


@dataclass(frozen=True)
class ReproduceConfig:
    n_subjects: int = 1000
    n_items: int = 100
    missing_rate: float = 0.0
    seed: int = 7
    fractions: tuple[float, ...] = (0.1, 0.25, 0.5, 0.75, 1.0)
    mml: MmlConfig = MmlConfig()
    vi_steps: int = ViConfig.max_steps


REPORT_SCHEMA = {
    "type": "object",
    "required": [
        "config", "recovery", "rmsd_b", "rmsd_theta", "spearman_b", "spearman_theta",
        "splithalf_spearman", "prior_spearman_b", "filters", "ub_pclb_jaccard",
    ],
    "properties": {
        "config": {"type": "object"},
        "recovery": {
            "type": "object",
            "required": ["mml", "vi", "vi_vague"],
            "additionalProperties": {
                "type": "object",
                "required": ["spearman_b", "spearman_theta", "rmsd_b", "rmsd_theta", "iterations", "converged"],
            },
        },
        "rmsd_b": {"type": "number", "minimum": 0},
        "rmsd_theta": {"type": "number", "minimum": 0},
        "spearman_b": {"type": "number", "minimum": -1, "maximum": 1},
        "spearman_theta": {"type": "number", "minimum": -1, "maximum": 1},
        "splithalf_spearman": {"type": "number", "minimum": -1, "maximum": 1},
        "prior_spearman_b": {"type": "number", "minimum": -1, "maximum": 1},
        "filters": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["strategy", "target_fraction", "threshold", "n_retained", "retained_fraction"],
                "properties": {
                    "strategy": {"enum": list(KINDS)},
                    "threshold": {"type": ["number", "null"]},
                    "retained_fraction": {"type": "number", "minimum": 0, "maximum": 1},
                },
            },
        },
        "ub_pclb_jaccard": {"type": "object", "additionalProperties": {"type": ["number", "null"]}},
        "meta": {"type": "object"},
    },
}


def _pair(ids, xs, ys):
    return AlignedPair(tuple(ids), np.asarray(xs), np.asarray(ys))


def _recovery(fit, true_thetas, true_bs) -> dict:
    b = _pair(fit.item_ids, true_bs, fit.difficulties)
    t = _pair(fit.subject_ids, true_thetas, fit.abilities)
    return {
        "spearman_b": spearman(b), "spearman_theta": spearman(t),
        "rmsd_b": rmsd(b), "rmsd_theta": rmsd(t),
        "iterations": fit.iterations, "converged": fit.converged,
    }


def jaccard(a, b) -> float | None:
    a, b = set(a), set(b)
    if not a and not b:
        return None
    return len(a & b) / len(a | b)


def reproduce(cfg: ReproduceConfig, out: Path, run=None) -> dict:
    """Run the whole pipeline, writing CSVs under ``out``; returns the report dict."""
    header = run.header if run is not None else ""
    out = Path(out)
    m, thetas, bs = simulate(CrowdSpec(cfg.n_subjects, cfg.n_items, missing_rate=cfg.missing_rate, seed=cfg.seed))
    save_matrix(m, out / "matrix.csv", "dense-csv", header)
    write_table(out / "items_true.csv", ["item_id", "b_true"], zip(m.item_ids, bs), header)
    write_table(out / "subjects_true.csv", ["subject_id", "theta_true"], zip(m.subject_ids, thetas), header)
    m = prune(m)
    keep_s = [int(s[1:]) for s in m.subject_ids]
    keep_i = [int(i[1:]) for i in m.item_ids]
    thetas, bs = thetas[keep_s], bs[keep_i]

    vi_cfg = ViConfig(max_steps=cfg.vi_steps, seed=cfg.seed)
    fits = {
        "mml": fit_mml(m, cfg.mml),
        "vi": fit_vi(m, PriorSpec("hierarchical"), vi_cfg),
        "vi_vague": fit_vi(m, PriorSpec("vague"), vi_cfg),
    }
    for name, fit in fits.items():
        write_table(out / f"{name}_items.csv", ["item_id", "b"], zip(fit.item_ids, fit.difficulties), header)
        write_table(out / f"{name}_subjects.csv", ["subject_id", "theta"], zip(fit.subject_ids, fit.abilities), header)
    for name in ("vi", "vi_vague"):
        fit = fits[name]
        write_table(out / f"{name}_items_posterior.csv", ["item_id", "b_mean", "b_std"],
                    zip(fit.item_ids, fit.difficulties, fit.difficulty_std), header)
        write_table(out / f"{name}_subjects_posterior.csv", ["subject_id", "theta_mean", "theta_std"],
                    zip(fit.subject_ids, fit.abilities, fit.ability_std), header)
        write_table(out / f"{name}_trace.csv", ["step", "elbo"], enumerate(fits[name].elbo_trace, start=1), header)
    write_table(out / "mml_trace.csv", ["iteration", "marginal_loglik"],
                enumerate(fits["mml"].marginal_loglik_trace), header)
    edges, counts = density_summary(fits["mml"].difficulties, 20)
    write_table(out / "difficulty_density.csv", ["bin_left", "bin_right", "count"],
                zip(edges[:-1], edges[1:], counts), header)

    mml, vi, vague = fits["mml"], fits["vi"], fits["vi_vague"]
    pair_b = _pair(m.item_ids, mml.difficulties, vi.difficulties)
    pair_t = _pair(m.subject_ids, mml.abilities, vi.abilities)

    half_a, half_b = split_half(m, cfg.seed)
    fa, fb = fit_mml(prune(half_a), cfg.mml), fit_mml(prune(half_b), cfg.mml)
    split = AlignedPair.join(fa.item_ids, fa.difficulties, fb.item_ids, fb.difficulties)

    pc = percent_correct(m)
    filters = []
    retained = {}
    rows = []
    for kind in KINDS:
        values = pc if kind in PC_KINDS else mml.difficulties
        for frac in cfg.fractions:
            try:
                strategy = sweep_to_fraction(m.item_ids, values, kind, frac)
            except ValueError:
                filters.append({"strategy": kind, "target_fraction": frac, "threshold": None,
                                "n_retained": 0, "retained_fraction": 0.0})
                retained[kind, frac] = []
                continue
            report = apply_filter(m.item_ids, values, strategy)
            retained[kind, frac] = report.retained_item_ids
            filters.append({"strategy": kind, "target_fraction": frac, "threshold": strategy.threshold,
                            "n_retained": int(report.retained.sum()),
                            "retained_fraction": report.retained_fraction})
            rows.extend((kind, frac, i, v, k) for i, v, k in report.rows())
    write_table(out / "filters.csv", ["strategy", "target_fraction", "item_id", "value", "retained"], rows, header)

    return {
        "config": {
            "n_subjects": cfg.n_subjects, "n_items": cfg.n_items, "missing_rate": cfg.missing_rate,
            "seed": cfg.seed, "fractions": list(cfg.fractions), "mml": asdict(cfg.mml),
            "vi": asdict(vi_cfg), "vi_prior": "hierarchical",
        },
        "recovery": {name: _recovery(fit, thetas, bs) for name, fit in fits.items()},
        "rmsd_b": rmsd(pair_b),
        "rmsd_theta": rmsd(pair_t),
        "spearman_b": spearman(pair_b),
        "spearman_theta": spearman(pair_t),
        "prior_spearman_b": spearman(_pair(m.item_ids, vague.difficulties, vi.difficulties)),
        "splithalf_spearman": spearman(split),
        "filters": filters,
        "ub_pclb_jaccard": {str(f): jaccard(retained["UB", f], retained["PCLB", f]) for f in cfg.fractions},
    }
