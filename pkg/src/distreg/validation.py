"""Out-of-sample loss estimation, paired model comparison, and probe machinery.

Estimation semantics: a single split estimates the generalization loss of the
*fitted* predictor (conditional on it); k-fold aggregates are means of such
fold-conditional estimates.  Unconditional (strategy-level) claims need
replicates over training sets, as in :func:`bias_variance_probe`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr, stdtr

from .errors import DomainError, FoldTooSmall, ShapeError


@dataclass
class LossSample:
    """Per-test-point losses with mean and standard error of the mean."""

    losses: np.ndarray
    model_id: str = ""
    fold_id: int | None = None
    mean: float = field(init=False)
    stderr: float = field(init=False)
    has_inf: bool = field(init=False)

    def __post_init__(self):
        arr = np.asarray(self.losses, dtype=float)
        self.losses = arr
        self.has_inf = bool(np.any(np.isinf(arr)))
        m = arr.size
        if m and np.all(arr == arr[0]):  # constants have stderr exactly 0
            self.mean, self.stderr = float(arr[0]), 0.0
            return
        self.mean = float(arr.mean()) if m else math.nan
        if m >= 2 and not self.has_inf:
            self.stderr = float(math.sqrt(np.sum((arr - self.mean) ** 2) / (m * (m - 1))))
        elif self.has_inf:
            self.stderr = math.inf
        else:
            self.stderr = 0.0


def estimate_generalization(batch, y, loss, model_id="", fold_id=None):
    """Mean test loss and its standard error; +inf losses flagged and propagated."""
    y = np.asarray(y, dtype=float)
    if len(batch) != y.size:
        raise ShapeError("batch and labels disagree on length")
    losses = np.array([loss(p, v) for p, v in zip(batch, y)])
    return LossSample(losses, model_id=model_id, fold_id=fold_id)


# ---------------------------------------------------------------------------
# k-fold cross-validation

def make_folds(n, k, seed):
    """Deterministic shuffled fold assignment; same (n, k, seed) -> same folds."""
    if k < 2:
        raise DomainError("need at least 2 folds")
    if n < k:
        raise DomainError("more folds than rows")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    return np.array_split(rng.permutation(n), k)


@dataclass
class CvResult:
    model_id: str
    fold_samples: list
    mean: float
    stderr: float
    per_point: np.ndarray  # pooled out-of-fold losses in original row order
    folds: list


def kfold_cv(estimator, data, k, loss, seed, pooled_se=False, X=None, y=None):
    """k-fold CV with seed-deterministic splits shared by every model.

    Aggregate mean is the mean of fold means; aggregate stderr is the mean of
    fold stderrs (pooled_se=True instead pools all out-of-fold losses).
    Nested hyper-parameter tuning happens inside the estimator's fit.
    """
    if data is not None:
        X, y = data.features, data.targets
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(y, dtype=float)
    folds = make_folds(X.shape[0], k, seed)
    per_point = np.full(X.shape[0], math.nan)
    samples = []
    for fi, test_idx in enumerate(folds):
        if test_idx.size < 2:
            raise FoldTooSmall(f"fold {fi} has {test_idx.size} test points")
        train_idx = np.concatenate([folds[j] for j in range(k) if j != fi])
        member = estimator.clone()
        member.fit(X[train_idx], y[train_idx])
        if hasattr(loss, "calibrate"):
            loss.calibrate(y[train_idx])
        batch = member.predict(X[test_idx])
        sample = estimate_generalization(batch, y[test_idx], loss,
                                         model_id=repr(estimator), fold_id=fi)
        samples.append(sample)
        per_point[test_idx] = sample.losses
    mean = float(np.mean([s.mean for s in samples]))
    if pooled_se:
        stderr = LossSample(per_point).stderr
    else:
        stderr = float(np.mean([s.stderr for s in samples]))
    return CvResult(repr(estimator), samples, mean, stderr, per_point,
                    [f.copy() for f in folds])


# ---------------------------------------------------------------------------
# paired tests

@dataclass
class ComparisonResult:
    test: str
    statistic: float
    p_value: float
    direction: int  # sign of the mean difference (first minus second)
    n_effective: int
    alternative: str = "two-sided"
    degenerate: bool = False
    n_dropped_inf: int = 0


def _rank_with_ties(values):
    order = np.argsort(values, kind="stable")
    ranks = np.empty(values.size)
    i = 0
    while i < values.size:
        j = i
        while j + 1 < values.size and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def _wilcoxon_exact_dp(ranks2):
    """Null pmf of 2*W+ over all sign assignments of the given doubled ranks."""
    total = int(np.sum(ranks2))
    counts = np.zeros(total + 1)
    counts[0] = 1.0
    for r in ranks2:
        r = int(r)
        new = counts.copy()
        new[r:] += counts[:counts.size - r]
        counts = new
    return counts / counts.sum()


def wilcoxon_signed_rank(diffs, alternative="two-sided"):
    """Wilcoxon signed-rank test on paired differences.

    Zeros are dropped before ranking; tied absolute values get averaged ranks.
    Exact enumeration of the null for <= 25 effective pairs, else a normal
    approximation with tie and continuity corrections.  Infinite differences
    are excluded and counted.
    """
    diffs = np.asarray(diffs, dtype=float)
    finite = np.isfinite(diffs)
    n_inf = int(np.sum(~finite))
    diffs = diffs[finite]
    direction = int(np.sign(diffs.mean())) if diffs.size else 0
    nz = diffs[diffs != 0.0]
    n = nz.size
    if n == 0:
        return ComparisonResult("wilcoxon", 0.0, 1.0, direction, 0,
                                alternative, degenerate=True, n_dropped_inf=n_inf)
    ranks = _rank_with_ties(np.abs(nz))
    w_plus = float(np.sum(ranks[nz > 0.0]))
    if n <= 25:
        ranks2 = np.rint(2.0 * ranks).astype(np.int64)
        pmf = _wilcoxon_exact_dp(ranks2)
        w2 = int(round(2.0 * w_plus))
        p_greater = float(pmf[w2:].sum())
        p_less = float(pmf[:w2 + 1].sum())
        if alternative == "greater":
            p = p_greater
        elif alternative == "less":
            p = p_less
        else:
            p = min(1.0, 2.0 * min(p_greater, p_less))
    else:
        mean = n * (n + 1) / 4.0
        var = n * (n + 1) * (2 * n + 1) / 24.0
        _, tie_counts = np.unique(ranks, return_counts=True)
        var -= np.sum(tie_counts ** 3 - tie_counts) / 48.0
        sd = math.sqrt(var)
        if alternative == "greater":
            p = float(1.0 - ndtr((w_plus - mean - 0.5) / sd))
        elif alternative == "less":
            p = float(ndtr((w_plus - mean + 0.5) / sd))
        else:
            z = (abs(w_plus - mean) - 0.5) / sd
            p = min(1.0, float(2.0 * (1.0 - ndtr(z))))
    return ComparisonResult("wilcoxon", w_plus, p, direction, n,
                            alternative, n_dropped_inf=n_inf)


def paired_t_test(diffs, alternative="two-sided"):
    """Paired t-test on the differences; p-value from the t cdf (incomplete beta)."""
    diffs = np.asarray(diffs, dtype=float)
    n = diffs.size
    if n < 2:
        raise DomainError("need at least two pairs")
    direction = int(np.sign(diffs.mean()))
    sd = diffs.std(ddof=1)
    if sd == 0.0 or not np.all(np.isfinite(diffs)):
        return ComparisonResult("paired_t", 0.0, 1.0, direction, n,
                                alternative, degenerate=True)
    t = float(diffs.mean() / (sd / math.sqrt(n)))
    df = n - 1
    if alternative == "less":
        p = float(stdtr(df, t))
    elif alternative == "greater":
        p = float(stdtr(df, -t))
    else:
        p = float(2.0 * stdtr(df, -abs(t)))
    return ComparisonResult("paired_t", t, min(p, 1.0), direction, n, alternative)


def compare_models(batches, y, loss, test="wilcoxon"):
    """Pairwise paired tests between models evaluated on identical test pairs.

    Under the log-loss, each entry's mean difference is also the per-point
    average log Bayes ratio of the two models.
    """
    names = list(batches.keys()) if isinstance(batches, dict) else \
        [f"model_{i}" for i in range(len(batches))]
    blist = list(batches.values()) if isinstance(batches, dict) else list(batches)
    y = np.asarray(y, dtype=float)
    for b in blist:
        if len(b) != y.size:
            raise ShapeError("all batches must be evaluated on identical test pairs")
    samples = [estimate_generalization(b, y, loss, model_id=n)
               for b, n in zip(blist, names)]
    runner = wilcoxon_signed_rank if test == "wilcoxon" else paired_t_test
    k = len(blist)
    matrix = [[None] * k for _ in range(k)]
    for i in range(k):
        for j in range(k):
            diffs = samples[i].losses - samples[j].losses
            matrix[i][j] = runner(diffs) if i != j else ComparisonResult(
                test, 0.0, 1.0, 0, y.size, degenerate=True)
    return names, samples, matrix


# ---------------------------------------------------------------------------
# rank-sorted result tables

@dataclass
class Cell:
    mean: float = math.nan
    stderr: float = math.nan
    tuned: bool = False
    failed: bool = False


def _competition_ranks(keys):
    order = np.argsort(keys, kind="stable")
    ranks = np.empty(len(keys), dtype=int)
    for pos, idx in enumerate(order):
        prev = order[pos - 1]
        if pos > 0 and keys[idx] == keys[prev]:
            ranks[idx] = ranks[prev]
        else:
            ranks[idx] = pos + 1
    return ranks


class ResultTable:
    """Models x tasks table, per-column ranks, rows sorted by mean rank."""

    def __init__(self, models, tasks, cells):
        self.models = list(models)
        self.tasks = list(tasks)
        self.cells = cells  # dict (model, task) -> Cell
        self.ranks = {}
        for task in self.tasks:
            keys = [math.inf if self.cells[(m, task)].failed or
                    not math.isfinite(self.cells[(m, task)].mean)
                    else self.cells[(m, task)].mean for m in self.models]
            for m, r in zip(self.models, _competition_ranks(keys)):
                self.ranks[(m, task)] = int(r)
        mean_rank = {m: np.mean([self.ranks[(m, t)] for t in self.tasks])
                     for m in self.models}
        self.sorted_models = sorted(self.models, key=lambda m: (mean_rank[m], self.models.index(m)))

    def cell_text(self, model, task):
        c = self.cells[(model, task)]
        r = self.ranks[(model, task)]
        if c.failed:
            return f"({r}) failed"
        star = "*" if c.tuned else ""
        return f"({r}) {c.mean:.4g}±{c.stderr:.4g}{star}"

    def render_markdown(self):
        head = "| Model | " + " | ".join(self.tasks) + " |"
        sep = "|" + "---|" * (len(self.tasks) + 1)
        lines = [head, sep]
        for m in self.sorted_models:
            row = " | ".join(self.cell_text(m, t) for t in self.tasks)
            lines.append(f"| {m} | {row} |")
        return "\n".join(lines) + "\n"

    def to_records(self):
        recs = []
        for m in self.sorted_models:
            for t in self.tasks:
                c = self.cells[(m, t)]
                recs.append({"model": m, "task": t, "mean": c.mean,
                             "stderr": c.stderr, "rank": self.ranks[(m, t)],
                             "tuned": c.tuned, "failed": c.failed})
        return recs


def result_table(models, tasks, cells):
    return ResultTable(models, tasks, cells)


# ---------------------------------------------------------------------------
# entropy and bias-variance probes

@dataclass
class EntropyReport:
    h_y: float          # entropy estimate: mean uninformed loss
    h_y_given_x: float  # conditional entropy estimate: mean informed loss
    gap: float
    gap_stderr: float


def entropy_estimates(informed_batch, uninformed_batch, y, loss):
    """Entropy / conditional-entropy estimates from out-of-sample losses."""
    si = estimate_generalization(informed_batch, y, loss)
    su = estimate_generalization(uninformed_batch, y, loss)
    diffs = LossSample(su.losses - si.losses)
    return EntropyReport(su.mean, si.mean, diffs.mean, diffs.stderr)


_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def _golden_min(f, lo, hi, tol=1e-6):
    """Golden-section search for a unimodal scalar minimum on [lo, hi]."""
    a, b = lo, hi
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    while abs(b - a) > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    return x, f(x)


@dataclass
class BiasVarianceReport:
    err: float
    var: float
    bias: float
    dbias: float
    pbias: float
    total: float
    var_stderr: float
    bias_stderr: float
    shift: float


def bias_variance_probe(truth, strategy_factory, sampler, loss,
                        n_train=100, n_reps=20, n_test=500, seed=0):
    """Monte Carlo decomposition of the expected loss of a strategy.

    truth(x) must return the actual conditional distribution; sampler(rng, n)
    draws (X, y) from the joint process; strategy_factory() yields a fresh
    unfitted estimator refit on each of ``n_reps`` training draws.  All terms
    are evaluated on one shared test sample so the decomposition telescopes
    exactly: total = err + var + bias, bias = dbias + pbias.
    """
    from .distributions import mixture as mix

    if n_reps < 2:
        raise DomainError("need at least two training replicates")
    seq = np.random.SeedSequence(seed)
    s_test, *s_train = seq.spawn(n_reps + 1)
    Xs, ys = sampler(np.random.default_rng(s_test), n_test)
    Xs = np.asarray(Xs, dtype=float)
    if Xs.ndim == 1:
        Xs = Xs[:, None]
    ys = np.asarray(ys, dtype=float)

    member_batches = []
    for s in s_train:
        Xt, yt = sampler(np.random.default_rng(s), n_train)
        est = strategy_factory()
        est.fit(np.asarray(Xt, dtype=float), np.asarray(yt, dtype=float))
        member_batches.append(est.predict(Xs))

    w = np.full(n_reps, 1.0 / n_reps)
    mean_pred = [mix([b[i] for b in member_batches], w) for i in range(n_test)]

    per_member = np.array([[loss(b[i], ys[i]) for i in range(n_test)]
                           for b in member_batches])
    total_pts = per_member.mean(axis=0)
    # mean of identical member losses is the member loss, exactly
    same = np.all(per_member == per_member[:1], axis=0)
    total_pts[same] = per_member[0][same]
    mean_pts = np.array([loss(mean_pred[i], ys[i]) for i in range(n_test)])
    truth_pts = np.array([loss(truth(Xs[i]), ys[i]) for i in range(n_test)])

    err = float(truth_pts.mean())
    total = float(total_pts.mean())
    var_pts = total_pts - mean_pts
    bias_pts = mean_pts - truth_pts
    var = float(var_pts.mean())
    bias = float(bias_pts.mean())

    discrete = truth(Xs[0]).kind == "discrete"
    if discrete:
        dbias, shift = 0.0, 0.0
    else:
        def shifted_loss(alpha):
            return float(np.mean([loss(mean_pred[i], ys[i] - alpha)
                                  for i in range(n_test)]))

        span = 3.0 * max(float(ys.std()), 1e-6)
        shift, best = _golden_min(shifted_loss, -span, span)
        at_zero = float(mean_pts.mean())
        if at_zero <= best:
            shift, best = 0.0, at_zero
        dbias = at_zero - best
    pbias = bias - dbias

    rootn = math.sqrt(n_test)
    return BiasVarianceReport(
        err=err, var=var, bias=bias, dbias=dbias, pbias=pbias, total=total,
        var_stderr=float(var_pts.std(ddof=1) / rootn),
        bias_stderr=float(bias_pts.std(ddof=1) / rootn),
        shift=shift)
