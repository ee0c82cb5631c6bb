"""Command-line entry point: ``crowdirt <subcommand> ...``.

Data goes to CSV/JSONL files; a one-line JSON summary goes to stdout. Exit
status is 0 on success, 1 on a domain error and 2 on a usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import _parallel
from .analysis import AlignedPair, density_summary, rank_disagreement, rmsd, spearman
from .crowd import CrowdSpec, Gaussian, competence_to_theta, sample_profiles, simulate, split_half
from .errors import CrowdIRTError, DomainError
from .filtering import KINDS, PC_KINDS, FilterStrategy, apply_filter, percent_correct, sweep_to_fraction
from .mml import MmlConfig, fit_mml, score_map
from .params import atomic_write, read_values, write_table
from .rpdata import FORMATS, grade, load_labeled_outputs, load_matrix, prune, save_matrix
from .vi import PriorSpec, ViConfig, fit_vi

log = logging.getLogger("crowdirt")

MATRIX_SUFFIX = {"dense-csv": ".csv", "sparse-jsonl": ".jsonl"}
DIFFICULTY_COLUMNS = {"b", "b_mean", "b_true"}
PC_COLUMNS = {"pc", "percent_correct"}
REPRODUCE_FRACTIONS = (0.1, 0.25, 0.5, 0.75, 1.0)


class Run:
    """Subcommand name and flag set, stamped on every output file."""

    def __init__(self, args: argparse.Namespace):
        self.subcommand = args.command
        self.flags = {
            k: v for k, v in sorted(vars(args).items()) if k not in ("command", "func") and v is not None
        }

    @property
    def header(self) -> str:
        flags = " ".join(f"--{k.replace('_', '-')}={v}" for k, v in self.flags.items())
        return f"# crowdirt {__version__} {self.subcommand} {flags}\n"

    def meta(self) -> dict:
        return {"tool": "crowdirt", "version": __version__, "subcommand": self.subcommand, "flags": self.flags}


def _emit(summary: dict) -> None:
    print(json.dumps(summary, sort_keys=True))


def _write_params(path, id_col, ids, columns, arrays, run: Run):
    write_table(path, [id_col, *columns], zip(ids, *arrays), run.header)


def _mml_config(args) -> MmlConfig:
    return MmlConfig(
        quadrature_points=args.quadrature_points,
        prior_theta_sigma=args.prior_theta_sigma,
        max_iterations=args.max_iterations,
        convergence_tol=args.tol,
        difficulty_prior_sigma=args.difficulty_prior_sigma,
    )


def _vi_config(args) -> ViConfig:
    if args.seed is None:
        raise DomainError("--seed is required for the vi estimator")
    return ViConfig(
        mc_samples=args.mc_samples,
        max_steps=args.max_steps,
        step_size=args.step_size,
        elbo_window=args.elbo_window,
        rel_tol=args.rel_tol,
        seed=args.seed,
    )


def _load(args, path=None):
    m = load_matrix(path or args.matrix, args.format)
    pruned = prune(m)
    if pruned.shape != m.shape:
        log.info("pruned %d subjects and %d items without responses",
                 m.n_subjects - pruned.n_subjects, m.n_items - pruned.n_items)
    return pruned


def _fit(m, args):
    if args.estimator == "mml":
        return fit_mml(m, _mml_config(args))
    return fit_vi(m, PriorSpec(args.prior), _vi_config(args))


def _write_fit(fit, out: Path, run: Run, estimator: str) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    _write_params(out / "items.csv", "item_id", fit.item_ids, ["b"], [fit.difficulties], run)
    _write_params(out / "subjects.csv", "subject_id", fit.subject_ids, ["theta"], [fit.abilities], run)
    if estimator == "mml":
        trace = fit.marginal_loglik_trace
        write_table(out / "trace.csv", ["iteration", "marginal_loglik"], enumerate(trace), run.header)
    else:
        trace = fit.elbo_trace
        write_table(out / "trace.csv", ["step", "elbo"], enumerate(trace, start=1), run.header)
        _write_params(out / "items_posterior.csv", "item_id", fit.item_ids, ["b_mean", "b_std"],
                      [fit.difficulties, fit.difficulty_std], run)
        _write_params(out / "subjects_posterior.csv", "subject_id", fit.subject_ids, ["theta_mean", "theta_std"],
                      [fit.abilities, fit.ability_std], run)
    edges, counts = density_summary(fit.difficulties, 20)
    write_table(out / "difficulty_density.csv", ["bin_left", "bin_right", "count"],
                zip(edges[:-1], edges[1:], counts), run.header)
    return {
        "estimator": estimator,
        "n_subjects": len(fit.subject_ids),
        "n_items": len(fit.item_ids),
        "iterations": fit.iterations,
        "converged": fit.converged,
        "final_objective": trace[-1],
    }


# --- subcommands ------------------------------------------------------------


def cmd_simulate(args, run: Run) -> dict:
    if args.theta_source == "competence":
        thetas = [competence_to_theta(p) for p in sample_profiles(args.subjects, args.seed)]
        theta_dist = thetas
    else:
        theta_dist = Gaussian(args.theta_mean, args.theta_std)
    spec = CrowdSpec(args.subjects, args.items, theta_dist, Gaussian(args.b_mean, args.b_std),
                     args.missing_rate, args.seed)
    m, thetas, bs = simulate(spec)
    out = Path(args.out)
    matrix_path = out / ("matrix" + MATRIX_SUFFIX[args.format])
    save_matrix(m, matrix_path, args.format, run.header)
    _write_params(out / "items_true.csv", "item_id", m.item_ids, ["b_true"], [bs], run)
    _write_params(out / "subjects_true.csv", "subject_id", m.subject_ids, ["theta_true"], [thetas], run)
    return {"matrix": str(matrix_path), "n_subjects": m.n_subjects, "n_items": m.n_items,
            "n_observed": int(m.observed.sum())}


def cmd_grade(args, run: Run) -> dict:
    m = grade(load_labeled_outputs(args.predictions, args.gold))
    save_matrix(m, args.out, args.format, run.header)
    return {"matrix": args.out, "n_subjects": m.n_subjects, "n_items": m.n_items,
            "n_correct": int((m.cells == 1).sum()), "n_observed": int(m.observed.sum())}


def cmd_fit(args, run: Run) -> dict:
    m = _load(args)
    fit = _fit(m, args)
    return _write_fit(fit, Path(args.out), run, args.estimator)


def cmd_score(args, run: Run) -> dict:
    m = _load(args)
    ids, bs, _ = read_values(args.items)
    pos = {k: n for n, k in enumerate(ids)}
    missing = [k for k in m.item_ids if k not in pos]
    if missing:
        raise DomainError(f"no difficulty for items {missing[:5]}")
    thetas = score_map(m, bs[[pos[k] for k in m.item_ids]], args.prior_sigma)
    _write_params(args.out, "subject_id", m.subject_ids, ["theta"], [thetas], run)
    return {"subjects": args.out, "n_subjects": m.n_subjects}


def _filter_inputs(args, kind: str):
    if args.matrix:
        if kind not in PC_KINDS:
            raise DomainError(f"{kind} filters difficulties; pass --values with an item_id,b file")
        m = load_matrix(args.matrix, args.format)
        return list(m.item_ids), percent_correct(m), "percent_correct"
    if not args.values:
        raise DomainError("pass --values (item_id,value CSV) or --matrix")
    ids, values, column = read_values(args.values, args.column)
    value_kind = args.value_kind
    if value_kind is None:
        if column in DIFFICULTY_COLUMNS:
            value_kind = "difficulty"
        elif column in PC_COLUMNS:
            value_kind = "percent_correct"
        else:
            raise DomainError(f"cannot tell whether column {column!r} holds difficulties or percent correct; "
                              "pass --value-kind")
    return ids, values, value_kind


def _write_report(path, report, run: Run):
    write_table(path, ["item_id", "value", "retained"], report.rows(), run.header)


def cmd_filter(args, run: Run) -> dict:
    strategy = FilterStrategy(args.strategy, args.threshold)
    ids, values, value_kind = _filter_inputs(args, args.strategy)
    report = apply_filter(ids, values, strategy, value_kind)
    _write_report(args.out, report, run)
    return {"strategy": strategy.kind, "threshold": strategy.threshold,
            "n_retained": int(report.retained.sum()), "retained_fraction": report.retained_fraction}


def cmd_sweep(args, run: Run) -> dict:
    ids, values, value_kind = _filter_inputs(args, args.strategy)
    expected = "percent_correct" if args.strategy in PC_KINDS else "difficulty"
    if value_kind != expected:
        raise DomainError(f"{args.strategy} filters {expected} values, got {value_kind}")
    strategy = sweep_to_fraction(ids, values, args.strategy, args.target_fraction)
    report = apply_filter(ids, values, strategy, value_kind)
    if args.out:
        _write_report(args.out, report, run)
    return {"strategy": strategy.kind, "threshold": strategy.threshold, "target_fraction": args.target_fraction,
            "n_retained": int(report.retained.sum()), "retained_fraction": report.retained_fraction}


def cmd_compare(args, run: Run) -> dict:
    ids_x, xs, _ = read_values(args.x, args.x_column)
    ids_y, ys, _ = read_values(args.y, args.y_column)
    pair = AlignedPair.join(ids_x, xs, ids_y, ys)
    summary = {"spearman": spearman(pair), "rmsd": rmsd(pair), "n": len(pair),
               "unmatched_x": list(pair.unmatched_x), "unmatched_y": list(pair.unmatched_y)}
    if args.disagreement:
        rows, mean_diff = rank_disagreement(pair, min(args.top_k, len(pair)) if args.top_k else None)
        write_table(args.disagreement, ["id", "rank_x", "rank_y", "abs_rank_diff"],
                    [(r.id, r.rank_x, r.rank_y, r.abs_diff) for r in rows], run.header)
        summary["mean_abs_rank_diff"] = mean_diff
    return summary


def cmd_split_half(args, run: Run) -> dict:
    m = load_matrix(args.matrix, args.format)
    halves = split_half(m, args.seed)
    out = Path(args.out)
    fits = []
    for name, half in zip(("half_a", "half_b"), halves):
        save_matrix(half, out / (name + MATRIX_SUFFIX[args.format]), args.format, run.header)
        half = prune(half)
        fit = _fit(half, args)
        _write_params(out / f"{name}_items.csv", "item_id", fit.item_ids, ["b"], [fit.difficulties], run)
        fits.append(fit)
    pair = AlignedPair.join(fits[0].item_ids, fits[0].difficulties, fits[1].item_ids, fits[1].difficulties)
    return {"splithalf_spearman": spearman(pair), "n_items": len(pair),
            "n_subjects": [halves[0].n_subjects, halves[1].n_subjects]}


def cmd_reproduce(args, run: Run) -> dict:
    from .pipeline import ReproduceConfig, reproduce

    cfg = ReproduceConfig(n_subjects=args.subjects, n_items=args.items, missing_rate=args.missing_rate,
                          seed=args.seed, fractions=REPRODUCE_FRACTIONS)
    out = Path(args.out)
    report = reproduce(cfg, out, run)
    report["meta"] = run.meta()
    atomic_write(out / "report.json", json.dumps(report, indent=2, sort_keys=True) + "\n")
    return {"report": str(out / "report.json"), "rmsd_b": report["rmsd_b"], "rmsd_theta": report["rmsd_theta"],
            "splithalf_spearman": report["splithalf_spearman"], "prior_spearman_b": report["prior_spearman_b"]}


# --- argument parsing ---------------------------------------------------------


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _add_matrix(p, required=True):
    p.add_argument("--matrix", required=required, help="response matrix file")
    p.add_argument("--format", choices=FORMATS, default="dense-csv")


def _add_estimator(p):
    g = p.add_argument_group("estimator")
    g.add_argument("--estimator", choices=("mml", "vi"), default="mml")
    g.add_argument("--quadrature-points", type=_positive_int, default=MmlConfig.quadrature_points)
    g.add_argument("--prior-theta-sigma", type=float, default=MmlConfig.prior_theta_sigma)
    g.add_argument("--max-iterations", type=_positive_int, default=MmlConfig.max_iterations)
    g.add_argument("--tol", type=float, default=MmlConfig.convergence_tol)
    g.add_argument("--difficulty-prior-sigma", type=float, default=MmlConfig.difficulty_prior_sigma)
    g.add_argument("--prior", choices=("vague", "hierarchical"), default="vague", help="VI prior")
    g.add_argument("--mc-samples", type=_positive_int, default=ViConfig.mc_samples)
    g.add_argument("--max-steps", type=_positive_int, default=ViConfig.max_steps)
    g.add_argument("--step-size", type=float, default=ViConfig.step_size)
    g.add_argument("--elbo-window", type=_positive_int, default=ViConfig.elbo_window)
    g.add_argument("--rel-tol", type=float, default=ViConfig.rel_tol)


def _add_filter_inputs(p):
    p.add_argument("--values", help="item_id,value CSV (difficulties or percent correct)")
    p.add_argument("--column", help="value column (default: second column)")
    p.add_argument("--value-kind", choices=("difficulty", "percent_correct"))
    p.add_argument("--matrix", help="compute percent correct from this response matrix")
    p.add_argument("--format", choices=FORMATS, default="dense-csv")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="crowdirt", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"crowdirt {__version__}")
    parser.add_argument("--threads", type=_positive_int, default=None,
                        help="worker threads (default: all cores); results do not depend on it")
    parser.add_argument("--log-level", default="WARNING")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="draw an artificial crowd from known parameters")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--subjects", type=_positive_int, default=1000)
    p.add_argument("--items", type=_positive_int, default=100)
    p.add_argument("--theta-source", choices=("gaussian", "competence"), default="gaussian")
    p.add_argument("--theta-mean", type=float, default=0.0)
    p.add_argument("--theta-std", type=float, default=1.0)
    p.add_argument("--b-mean", type=float, default=0.0)
    p.add_argument("--b-std", type=float, default=1.0)
    p.add_argument("--missing-rate", type=float, default=0.0)
    p.add_argument("--format", choices=FORMATS, default="dense-csv")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("grade", help="grade labeled outputs against gold labels")
    p.add_argument("--predictions", required=True, help='JSONL of {"subject", "item", "label"}')
    p.add_argument("--gold", required=True, help='JSONL of {"item", "gold"}')
    p.add_argument("--format", choices=FORMATS, default="dense-csv")
    p.add_argument("--out", required=True, help="output matrix file")
    p.set_defaults(func=cmd_grade)

    p = sub.add_parser("fit", help="fit a Rasch model (MML-EM or VI)")
    _add_matrix(p)
    _add_estimator(p)
    p.add_argument("--seed", type=int, help="required for --estimator vi")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("score", help="MAP abilities for fixed difficulties")
    _add_matrix(p)
    p.add_argument("--items", required=True, help="item_id,b CSV")
    p.add_argument("--prior-sigma", type=float, default=1.0)
    p.add_argument("--out", required=True, help="output subject_id,theta CSV")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("filter", help="apply one filtering strategy at a threshold")
    _add_filter_inputs(p)
    p.add_argument("--strategy", choices=KINDS, required=True)
    p.add_argument("--threshold", type=float, required=True)
    p.add_argument("--out", required=True, help="output item_id,value,retained CSV")
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("sweep", help="find the threshold retaining a target fraction")
    _add_filter_inputs(p)
    p.add_argument("--strategy", choices=KINDS, required=True)
    p.add_argument("--target-fraction", type=float, required=True)
    p.add_argument("--out", help="optional item_id,value,retained CSV")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("compare", help="Spearman and RMSD between two parameter files")
    p.add_argument("--x", required=True)
    p.add_argument("--y", required=True)
    p.add_argument("--x-column")
    p.add_argument("--y-column")
    p.add_argument("--disagreement", help="write rank-disagreement CSV here")
    p.add_argument("--top-k", type=_positive_int)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("split-half", help="fit two random subject halves and correlate difficulties")
    _add_matrix(p)
    _add_estimator(p)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_split_half)

    p = sub.add_parser("reproduce", help="simulate, fit both estimators, compare, split-half and sweep")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--subjects", type=_positive_int, default=1000)
    p.add_argument("--items", type=_positive_int, default=100)
    p.add_argument("--missing-rate", type=float, default=0.0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_reproduce)
    return parser


def _origin(exc: BaseException) -> str:
    """Name of the innermost package module the exception passed through."""
    name = "crowdirt"
    tb = exc.__traceback__
    while tb is not None:
        mod = tb.tb_frame.f_globals.get("__name__", "")
        if mod.startswith("crowdirt.") and mod != "crowdirt.cli":
            name = mod
        tb = tb.tb_next
    return name


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=args.log_level.upper(), format="%(levelname)s %(name)s: %(message)s")
    _parallel.set_threads(args.threads)
    run = Run(args)
    try:
        summary = args.func(args, run)
    except CrowdIRTError as e:
        print(f"crowdirt {args.command}: {_origin(e)}: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"crowdirt {args.command}: {e}", file=sys.stderr)
        return 1
    summary = {"ok": True, "command": args.command, **summary}
    _emit(summary)
    return 0


if __name__ == "__main__":
    sys.exit(main())
