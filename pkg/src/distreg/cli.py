"""Benchmark harness CLI: dataset ingestion, experiment orchestration, output.

Subcommands: cv, compare, indep, twosample, diagnose, parse-check.  All
randomness derives from the mandatory --seed; identical config and seed give
byte-identical results.json (floats rendered at 17 significant digits).
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import re
import sys
from dataclasses import dataclass, field

import numpy as np

from .errors import DistregError, IngestError, ParseError
from .learners import Dataset
from .losses import parse_loss
from .meta import diagnostics_export
from .modelspec import build, parse_model_spec, render
from .validation import Cell, ResultTable, compare_models, kfold_cv


# ---------------------------------------------------------------------------
# canonical JSON (deterministic byte-for-byte output)

def _canon(value):
    if isinstance(value, dict):
        items = ", ".join(f"{json.dumps(str(k))}: {_canon(v)}"
                          for k, v in sorted(value.items()))
        return "{" + items + "}"
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_canon(v) for v in value) + "]"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        f = float(value)
        if math.isnan(f):
            return '"nan"'
        if math.isinf(f):
            return '"inf"' if f > 0 else '"-inf"'
        return format(f, ".17g")
    if value is None:
        return "null"
    return json.dumps(str(value))


def canonical_json(value):
    return _canon(value) + "\n"


# ---------------------------------------------------------------------------
# config

@dataclass
class ExperimentConfig:
    datasets: list  # [(path, target column), ...]
    models: list    # model-spec strings
    losses: list    # loss identifiers
    folds: int = 5
    seed: int = None
    out: str = "out"
    pooled_se: bool = False
    std_denominator: str = "n"
    compare: bool = False

    def normalized(self):
        """Canonical dict form; model specs re-rendered through the parser."""
        if self.seed is None:
            raise DistregError("seed is mandatory (no wall-clock default)")
        return {
            "datasets": [[str(p), str(t)] for p, t in self.datasets],
            "models": [render(parse_model_spec(m)) for m in self.models],
            "losses": [str(parse_loss(l).id) for l in self.losses],
            "folds": int(self.folds),
            "seed": int(self.seed),
            "out": str(self.out),
            "pooled_se": bool(self.pooled_se),
            "std_denominator": self.std_denominator,
            "compare": bool(self.compare),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(datasets=[tuple(x) for x in d["datasets"]],
                   models=list(d["models"]), losses=list(d["losses"]),
                   folds=d.get("folds", 5), seed=d.get("seed"),
                   out=d.get("out", "out"), pooled_se=d.get("pooled_se", False),
                   std_denominator=d.get("std_denominator", "n"),
                   compare=d.get("compare", False))


def load_csv(path, target):
    """Dataset from a headed CSV; locale-independent decimal point, no missing values."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestError(f"{path}: empty file")
        header = [h.strip() for h in header]
        if target not in header:
            raise IngestError(f"{path}: target column {target!r} not in header {header}")
        tcol = header.index(target)
        feats, targets = [], []
        for ri, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise IngestError(f"{path}: row {ri} has {len(row)} fields, "
                                  f"expected {len(header)}", row=ri)
            vals = []
            for ci, cell in enumerate(row):
                cell = cell.strip()
                if cell == "":
                    raise IngestError(f"{path}: missing value at row {ri}, "
                                      f"column {header[ci]!r}", row=ri, col=header[ci])
                try:
                    vals.append(float(cell))
                except ValueError:
                    raise IngestError(f"{path}: non-numeric value {cell!r} at row {ri}, "
                                      f"column {header[ci]!r}", row=ri, col=header[ci])
            targets.append(vals[tcol])
            feats.append([v for i, v in enumerate(vals) if i != tcol])
    cols = [h for i, h in enumerate(header) if i != tcol]
    return Dataset(np.asarray(feats), np.asarray(targets), cols)


# ---------------------------------------------------------------------------
# experiment runner

def _sanitize(name):
    return re.sub(r"[^A-Za-z0-9._-]+", "_", name).strip("_")


def _dataset_name(path):
    return os.path.splitext(os.path.basename(path))[0]


def run_experiment(cfg):
    """Evaluate every dataset x model x loss cell by k-fold CV; write outputs.

    Returns exit code 0, or 2 when any cell failed (run continues regardless).
    """
    norm = cfg.normalized()
    outdir = norm["out"]
    os.makedirs(outdir, exist_ok=True)
    os.makedirs(os.path.join(outdir, "diagnostics"), exist_ok=True)

    datasets = [(name, load_csv(path, target), path)
                for (path, target) in norm["datasets"]
                for name in [_dataset_name(path)]]
    model_names = norm["models"]
    loss_ids = norm["losses"]

    any_failed = False
    cells = {}
    per_point = {}
    for di, (dname, data, _) in enumerate(datasets):
        for mi, mtext in enumerate(model_names):
            for li, lid in enumerate(loss_ids):
                seed = _derive_seed(norm["seed"], di, mi)
                task = f"CV({dname}, {lid})"
                try:
                    est = build(parse_model_spec(mtext), seed=seed,
                                std_denominator=norm["std_denominator"])
                    loss = parse_loss(lid)
                    res = kfold_cv(est, data, norm["folds"], loss,
                                   seed=_derive_seed(norm["seed"], di, 0),
                                   pooled_se=norm["pooled_se"])
                    cells[(mtext, task)] = Cell(res.mean, res.stderr, est.tuned, False)
                    per_point[(mtext, dname, lid)] = res.per_point
                except Exception as exc:  # any model failure marks the cell, run continues
                    print(f"cell failed: {mtext} on {task}: {exc}", file=sys.stderr)
                    cells[(mtext, task)] = Cell(failed=True)
                    any_failed = True

    tasks = [f"CV({dname}, {lid})" for dname, _, _ in datasets for lid in loss_ids]
    table = ResultTable(model_names, tasks, cells)

    results = {"config": norm, "results": table.to_records()}
    if norm["compare"] and len(model_names) > 1:
        results["comparisons"] = _comparison_records(model_names, datasets,
                                                     loss_ids, per_point)
    with open(os.path.join(outdir, "results.json"), "w") as fh:
        fh.write(canonical_json(results))
    with open(os.path.join(outdir, "results.md"), "w") as fh:
        fh.write(table.render_markdown())

    _write_diagnostics(outdir, norm, datasets, model_names)
    return 2 if any_failed else 0


def _derive_seed(seed, *key):
    return int(np.random.SeedSequence(entropy=[int(seed), *map(int, key)])
               .generate_state(1)[0])


def _comparison_records(model_names, datasets, loss_ids, per_point):
    from .validation import wilcoxon_signed_rank

    recs = []
    for dname, _, _ in datasets:
        for lid in loss_ids:
            for i, mi in enumerate(model_names):
                for j, mj in enumerate(model_names):
                    if i >= j:
                        continue
                    key_i, key_j = (mi, dname, lid), (mj, dname, lid)
                    if key_i not in per_point or key_j not in per_point:
                        continue
                    diffs = per_point[key_i] - per_point[key_j]
                    r = wilcoxon_signed_rank(diffs[np.isfinite(diffs)])
                    recs.append({"dataset": dname, "loss": lid, "model_a": mi,
                                 "model_b": mj, "test": r.test,
                                 "statistic": r.statistic, "p_value": r.p_value,
                                 "direction": r.direction, "n": r.n_effective})
    return recs


def _write_diagnostics(outdir, norm, datasets, model_names):
    """Out-of-fold diagnostics rows per dataset x model, under the first loss."""
    from .validation import make_folds

    loss = parse_loss(norm["losses"][0])
    multi = len(datasets) > 1
    for di, (dname, data, _) in enumerate(datasets):
        folds = make_folds(data.n_rows, norm["folds"], _derive_seed(norm["seed"], di, 0))
        for mi, mtext in enumerate(model_names):
            try:
                est = build(parse_model_spec(mtext),
                            seed=_derive_seed(norm["seed"], di, mi),
                            std_denominator=norm["std_denominator"])
                rows = [None] * data.n_rows
                for fi, test_idx in enumerate(folds):
                    train_idx = np.concatenate([folds[j] for j in range(len(folds))
                                                if j != fi])
                    member = est.clone()
                    member.fit(data.features[train_idx], data.targets[train_idx])
                    if hasattr(loss, "calibrate"):
                        loss.calibrate(data.targets[train_idx])
                    batch = member.predict(data.features[test_idx])
                    for local, ri in enumerate(test_idx):
                        one = diagnostics_export([batch[local]],
                                                 [data.targets[ri]], loss)[0]
                        one["row"] = int(ri)
                        one["fold"] = fi
                        rows[ri] = one
            except Exception:
                continue
            stem = _sanitize(mtext)
            if multi:
                stem = f"{_sanitize(dname)}__{stem}"
            path = os.path.join(outdir, "diagnostics", f"{stem}.csv")
            keys = ["row", "fold", "point", "observed", "loss_residual",
                    "prob_residual", "q05", "q25", "q50", "q75", "q95"]
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(keys)
                for row in rows:
                    w.writerow([format(row[k], ".17g") if isinstance(row[k], float)
                                else row[k] for k in keys])


# ---------------------------------------------------------------------------
# argparse front-end

def _add_common(sp):
    # defaults stay None so a config file's values survive unless overridden
    sp.add_argument("--data", help="CSV path")
    sp.add_argument("--target", help="target column name")
    sp.add_argument("--models", help="comma-separated model specs")
    sp.add_argument("--loss", help="comma-separated loss identifiers "
                                   "(default log_capped:1e-10)")
    sp.add_argument("--folds", type=int)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--out")
    sp.add_argument("--pooled-se", action="store_true")
    sp.add_argument("--std-denominator", choices=("n", "n-1"))


def _split_models(text):
    """Split on commas not nested inside parentheses."""
    parts, depth, cur = [], 0, []
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == "," and depth == 0:
            parts.append("".join(cur).strip())
            cur = []
        else:
            cur.append(ch)
    if cur:
        parts.append("".join(cur).strip())
    return [p for p in parts if p]


def _cfg_from_args(args, compare=False):
    if getattr(args, "config", None):
        with open(args.config) as fh:
            cfg = ExperimentConfig.from_dict(json.load(fh))
        # explicitly given flags override config values
        if args.data and args.target:
            cfg.datasets = [(args.data, args.target)]
        if args.models:
            cfg.models = _split_models(args.models)
        if args.loss:
            cfg.losses = _split_models(args.loss)
        for name in ("folds", "seed", "out", "std_denominator"):
            val = getattr(args, name)
            if val is not None:
                setattr(cfg, name, val)
        if args.pooled_se:
            cfg.pooled_se = True
        cfg.compare = cfg.compare or compare
        return cfg
    missing = [f for f in ("data", "target", "models", "seed")
               if getattr(args, f) is None]
    if missing:
        raise DistregError("missing required flags: " +
                           ", ".join(f"--{m}" for m in missing))
    return ExperimentConfig(datasets=[(args.data, args.target)],
                            models=_split_models(args.models),
                            losses=_split_models(args.loss or "log_capped:1e-10"),
                            folds=args.folds if args.folds is not None else 5,
                            seed=args.seed,
                            out=args.out if args.out is not None else "out",
                            pooled_se=args.pooled_se,
                            std_denominator=args.std_denominator or "n",
                            compare=compare)


def main(argv=None):
    ap = argparse.ArgumentParser(prog="distreg",
                                 description="distributional regression benchmark harness")
    sub = ap.add_subparsers(dest="cmd", required=True)

    sp = sub.add_parser("cv", help="k-fold CV benchmark of model specs")
    sp.add_argument("--config", help="JSON config (flags override)")
    _add_common(sp)

    sp = sub.add_parser("compare", help="CV plus pairwise paired-test matrix")
    sp.add_argument("--config")
    _add_common(sp)

    sp = sub.add_parser("indep", help="predictive independence test")
    sp.add_argument("--data", required=True)
    sp.add_argument("--target", required=True)
    sp.add_argument("--informed", default="N(p=LR, s=RE(p, C(std(y))))")
    sp.add_argument("--uninformed", default="Baseline(normal)")
    sp.add_argument("--loss", default="log_capped:1e-10")
    sp.add_argument("--test", choices=("wilcoxon", "ttest"), default="wilcoxon")
    sp.add_argument("--split", type=float, default=0.5)
    sp.add_argument("--alpha", type=float, default=0.05)
    sp.add_argument("--seed", type=int, required=True)

    sp = sub.add_parser("twosample", help="two-sample test on feature CSVs")
    sp.add_argument("--data1", required=True)
    sp.add_argument("--data2", required=True)
    sp.add_argument("--test", choices=("wilcoxon", "ttest"), default="wilcoxon")
    sp.add_argument("--split", type=float, default=0.5)
    sp.add_argument("--alpha", type=float, default=0.05)
    sp.add_argument("--seed", type=int, required=True)

    sp = sub.add_parser("diagnose", help="out-of-fold diagnostics CSVs")
    sp.add_argument("--config")
    _add_common(sp)

    sp = sub.add_parser("parse-check", help="parse and render model specs")
    sp.add_argument("--models", required=True)

    args = ap.parse_args(argv)

    try:
        if args.cmd in ("cv", "compare", "diagnose"):
            cfg = _cfg_from_args(args, compare=args.cmd == "compare")
            return run_experiment(cfg)
        if args.cmd == "indep":
            return _cmd_indep(args)
        if args.cmd == "twosample":
            return _cmd_twosample(args)
        if args.cmd == "parse-check":
            for m in _split_models(args.models):
                print(render(parse_model_spec(m)))
            return 0
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return 2
    except DistregError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


def _cmd_indep(args):
    from .independence import predictive_independence_test
    from .validation import make_folds

    data = load_csv(args.data, args.target)
    rng_folds = make_folds(data.n_rows, 2, args.seed) if args.split == 0.5 else None
    if rng_folds is not None:
        train_idx, test_idx = rng_folds[0], rng_folds[1]
    else:
        rng = np.random.default_rng(np.random.SeedSequence(args.seed))
        order = rng.permutation(data.n_rows)
        cut = int(round(args.split * data.n_rows))
        train_idx, test_idx = order[:cut], order[cut:]
    informed = build(parse_model_spec(args.informed), seed=args.seed)
    uninformed = build(parse_model_spec(args.uninformed), seed=args.seed)
    res = predictive_independence_test(data.subset(train_idx), data.subset(test_idx),
                                       informed, uninformed,
                                       parse_loss(args.loss),
                                       "wilcoxon" if args.test == "wilcoxon" else "ttest")
    print(canonical_json({"statistic": res.statistic, "p_value": res.p_value,
                          "n": res.n_effective,
                          "alpha_decision": "dependent" if res.p_value < args.alpha
                          else "no_evidence"}), end="")
    return 0


def _load_feature_csv(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = []
        for ri, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                rows.append([float(c) for c in row])
            except ValueError:
                raise IngestError(f"{path}: non-numeric value at row {ri}", row=ri)
    return np.asarray(rows)


def _cmd_twosample(args):
    from .independence import two_sample_test

    s1 = _load_feature_csv(args.data1)
    s2 = _load_feature_csv(args.data2)
    res = two_sample_test(s1, s2, split=args.split, seed=args.seed,
                          test="wilcoxon" if args.test == "wilcoxon" else "ttest")
    print(canonical_json({"statistic": res.statistic, "p_value": res.p_value,
                          "n": res.n_effective,
                          "alpha_decision": "different" if res.p_value < args.alpha
                          else "no_evidence"}), end="")
    return 0


if __name__ == "__main__":
    sys.exit(main())
