"""Proper loss functionals for distributional predictions.

Sign convention: losses, lower is better.  ``+inf`` is a legal value (zero
predicted density under the log-loss) and propagates through means; the
comparison machinery treats it as a largest element.
"""

from __future__ import annotations

import math
from itertools import combinations_with_replacement

import numpy as np

from . import _kernels
from .distributions import Categorical, Distribution, Empirical, Normal, Uniform
from .errors import DomainError, UnsupportedKind

_KIND_CODE = {"gaussian": 0, "laplace": 1, "constant": 2}


class KernelFn:
    """Symmetric positive definite kernel on the reals.

    Gaussian and Laplace kernels are characteristic (their mean embedding is
    injective), the constant kernel is not; the flag decides whether the
    induced discrepancy loss is strictly proper.
    """

    def __init__(self, tag, param):
        if tag not in _KIND_CODE:
            raise DomainError(f"unknown kernel tag {tag!r}")
        if tag != "constant" and param <= 0:
            raise DomainError("kernel parameter must be positive")
        self.tag = tag
        self.param = float(param)
        self.characteristic = tag != "constant"

    def __call__(self, y, yp):
        d = np.asarray(y, dtype=float) - np.asarray(yp, dtype=float)
        if self.tag == "gaussian":
            out = np.exp(-0.5 * (d / self.param) ** 2)
        elif self.tag == "laplace":
            out = np.exp(-self.param * np.abs(d))
        else:
            out = np.full_like(np.asarray(d, dtype=float), self.param)
        return float(out) if np.ndim(out) == 0 else out

    def cross_mean(self, a, wa, b, wb):
        """sum_ij wa_i wb_j k(a_i, b_j)."""
        return _kernels.kernel_cross_mean(
            np.ascontiguousarray(a, dtype=float), np.ascontiguousarray(wa, dtype=float),
            np.ascontiguousarray(b, dtype=float), np.ascontiguousarray(wb, dtype=float),
            _KIND_CODE[self.tag], self.param)

    def __repr__(self):
        return f"KernelFn({self.tag}, {self.param:g})"


def gaussian_kernel(sigma=1.0):
    return KernelFn("gaussian", sigma)


def laplace_kernel(lam=1.0):
    return KernelFn("laplace", lam)


def constant_kernel(c):
    return KernelFn("constant", c)


# ---------------------------------------------------------------------------
# elementary losses

def log_loss(p, y):
    """-log p(y); +inf when the predicted density/mass vanishes at y."""
    if p.kind == "mixed":
        raise UnsupportedKind("log-loss is strictly local; mixed predictions rejected")
    lp = p.logpdf(y) if not isinstance(p, Categorical) else _cat_logmass(p, y)
    return -float(lp)


def _cat_logmass(p, y):
    m = p.pdf(y)
    return math.log(m) if m > 0 else -math.inf


def capped_log_loss(p, y, eps=1e-10):
    """Cut-off log-loss min(-log eps, log_loss); always finite."""
    if not 0.0 < eps < 1.0:
        raise DomainError("eps must lie in (0, 1)")
    return min(-math.log(eps), log_loss(p, y))


def eps_mixture_log_loss(p, y, eps, reference=None):
    """Log-loss of the eps-mixture with a reference density (default unit uniform)."""
    if not 0.0 < eps < 1.0:
        raise DomainError("eps must lie in (0, 1)")
    ref = reference if reference is not None else Uniform(0.0, 1.0)
    v = eps * ref.pdf(y) + (1.0 - eps) * p.pdf(y)
    return -math.log(v) if v > 0 else math.inf


def gneiting_loss(p, y):
    """Integrated squared loss -2 p(y) + ||p||_2^2 (multi-class Brier when discrete)."""
    if p.kind == "mixed":
        raise UnsupportedKind("integrated squared loss rejects mixed predictions")
    return -2.0 * float(p.pdf(y)) + p.lp2_norm_sq()


def mean_variance_loss(mu, nu, y):
    """nu^-1 (mu - y)^2 + log nu for a predicted (mean, variance) pair."""
    if nu <= 0:
        raise DomainError("predicted variance must be positive")
    return (mu - y) ** 2 / nu + math.log(nu)


def crps(p, y, weight=None, grid=10001):
    """Weighted continuous ranked probability score.

    Trapezoid integration of the Brier loss of the binary events {y <= tau}
    over the weight density's [1e-6, 1-1e-6] quantile range.  The integrand
    jumps at tau = y, so the rule is applied separately on each side.
    """
    w = weight if weight is not None else Normal(0.0, 1.0)
    lo, hi = w.quantile(1e-6), w.quantile(1.0 - 1e-6)
    taus = np.linspace(lo, hi, int(grid))
    total = 0.0
    left = taus[taus < y]
    if lo < y < hi:
        left = np.append(left, y)
    if left.size >= 2:
        F = np.asarray(p.cdf(left), dtype=float)
        if left[-1] == y and p.kind in ("discrete", "mixed"):
            # the y > tau branch needs the left limit F(y-) at an atom
            a, m = p.atoms()
            F[-1] -= float(m[a == y].sum())
        total += float(np.trapezoid(np.asarray(w.pdf(left)) * F ** 2, left))
    right = taus[taus > y]
    if lo < y < hi:
        right = np.concatenate([[y], right])
    if right.size >= 2:
        F = np.asarray(p.cdf(right), dtype=float)
        total += float(np.trapezoid(np.asarray(w.pdf(right)) * (1.0 - F) ** 2, right))
    return total


def kernel_loss(p, y, kernel, mc=2000, seed=0):
    """Kernel discrepancy loss -2 k(p, y) + k(p, p).

    Exact double sums for discrete predictions; otherwise seeded Monte Carlo
    with ``mc`` draws, using distinct independent draws for the two arguments
    of k(p, p).
    """
    one = np.ones(1)
    if p.kind == "discrete":
        a, wts = p.atoms()
        kpy = kernel.cross_mean(a, wts, np.array([float(y)]), one)
        kpp = kernel.cross_mean(a, wts, a, wts)
    else:
        rng = np.random.default_rng(np.random.SeedSequence(seed))
        s1 = p.sample(rng, mc)
        s2 = p.sample(rng, mc)
        u = np.full(mc, 1.0 / mc)
        kpy = kernel.cross_mean(s1, u, np.array([float(y)]), one)
        kpp = kernel.cross_mean(s1, u, s2, u)
    return -2.0 * kpy + kpp


def convolution_loss(base, p, y, noise, m, seed=0):
    """Monte Carlo estimate of the noise-convolved loss E[base(p * p_Z, y + Z)].

    The convolved prediction is built once with ``m`` seeded draws (exact when
    p is purely discrete) and reused across the ``m`` evaluation points.
    """
    from .composite import convolution_adaptor

    if m <= 0:
        raise DomainError("need at least one Monte Carlo draw")
    seq = np.random.SeedSequence(seed)
    s_build, s_eval = seq.spawn(2)
    conv = convolution_adaptor(p, noise, m, np.random.default_rng(s_build))
    zs = noise.sample(np.random.default_rng(s_eval), m)
    vals = [base(conv, float(y) + float(z)) for z in zs]
    return float(np.mean(vals))


def split_mixed_loss(p, y, alphas, locus, Lb, Lc, Ld):
    """Three-component loss for mixed predictions with a known finite pure locus.

    alphas = (ab, ac, ad) weights the binary-membership, continuous-branch and
    discrete-branch losses.  The observation routes to exactly one branch.
    """
    ab, ac, ad = alphas
    if min(ab, ac, ad) <= 0:
        raise DomainError("branch weights must be positive")
    locus = [float(v) for v in locus]
    alpha_c, q, atoms, wts = p.decompose()
    tau = 1.0 - alpha_c
    binary = Categorical([1, 0], [tau, 1.0 - tau])
    y_in = float(y) in locus
    total = ab * Lb(binary, 1 if y_in else 0)
    if y_in:
        pd = Empirical(atoms, wts) if atoms.size else Empirical([math.nan])
        total += ad * Ld(pd, y)
    else:
        total += ac * (Lc(q, y) if q is not None else math.inf)
    return total


# ---------------------------------------------------------------------------
# properness probe

def simplex_grid(n, step):
    """All pmfs on n labels with coordinates that are multiples of step."""
    m = round(1.0 / step)
    pts = [np.array(c) / m for c in _compositions(m, n)]
    return np.array(pts)


def _compositions(total, parts):
    if parts == 1:
        yield (total,)
        return
    for head in range(total + 1):
        for rest in _compositions(total - head, parts - 1):
            yield (head,) + rest


class ProbeReport:
    def __init__(self, truths, minimizers, max_gaps, flat, step):
        self.truths = truths
        self.minimizers = minimizers
        self.max_gaps = max_gaps  # per truth: ||argmin - truth||_inf
        self.flat = flat
        self.step = step

    @property
    def minimizer_at_truth(self):
        return bool(np.all(np.asarray(self.max_gaps) <= self.step + 1e-9))


def properness_probe(loss, support_size=3, step=0.02, n_truths=20, seed=0):
    """Exhaustive expected-loss scan over a simplex grid of candidate pmfs.

    For each random truth, checks that the grid minimizer of the expected
    loss sits at (within one grid step of) the truth; a flat loss surface is
    reported instead of a minimizer for non-strict losses.

    Truths are rejection-sampled to keep every coordinate at least one grid
    step: a strictly local loss pins zero-mass grid coordinates at +inf, so
    for truths inside the boundary cell the grid argmin can sit up to two
    steps away even though properness holds.
    """
    if support_size > 5:
        raise DomainError("probe supports label sets of size <= 5")
    labels = list(range(support_size))
    grid = simplex_grid(support_size, step)
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    truths, mins, gaps = [], [], []
    flat = True
    for _ in range(n_truths):
        truth = rng.dirichlet(np.ones(support_size))
        while truth.min() < step:
            truth = rng.dirichlet(np.ones(support_size))
        exp_loss = np.empty(grid.shape[0])
        for gi, q in enumerate(grid):
            cat = Categorical(labels, q)
            exp_loss[gi] = sum(truth[j] * loss(cat, labels[j]) for j in range(support_size))
        finite = exp_loss[np.isfinite(exp_loss)]
        if finite.max() - finite.min() > 1e-9 * max(1.0, abs(finite.min())):
            flat = False
        best = grid[int(np.argmin(exp_loss))]
        truths.append(truth)
        mins.append(best)
        gaps.append(float(np.max(np.abs(best - truth))))
    return ProbeReport(truths, mins, gaps, flat, step)


# ---------------------------------------------------------------------------
# loss objects with metadata, for the validation/CLI machinery

class Loss:
    """Callable loss with properness metadata and a parsable identifier."""

    proper = True
    strictly_proper = True
    strictly_local = False

    def __call__(self, p, y):
        raise NotImplementedError

    def calibrate(self, y_train):
        """Hook for losses whose defaults depend on the label range."""

    @property
    def id(self):
        raise NotImplementedError

    def __repr__(self):
        return self.id


class LogLoss(Loss):
    strictly_local = True

    def __call__(self, p, y):
        return log_loss(p, y)

    @property
    def id(self):
        return "log"


class CappedLogLoss(Loss):
    proper = False
    strictly_proper = False
    strictly_local = True

    def __init__(self, eps=1e-10):
        if not 0.0 < eps < 1.0:
            raise DomainError("eps must lie in (0, 1)")
        self.eps = float(eps)

    def __call__(self, p, y):
        return capped_log_loss(p, y, self.eps)

    @property
    def id(self):
        return f"log_capped:{self.eps:g}"


class EpsMixtureLogLoss(Loss):
    proper = False
    strictly_proper = False

    def __init__(self, eps, reference=None):
        self.eps = float(eps)
        self.reference = reference
        self.strictly_local = reference is None or isinstance(reference, Uniform)

    def __call__(self, p, y):
        return eps_mixture_log_loss(p, y, self.eps, self.reference)

    @property
    def id(self):
        return f"log_epsmix:{self.eps:g}"


class GneitingLoss(Loss):
    def __call__(self, p, y):
        return gneiting_loss(p, y)

    @property
    def id(self):
        return "gneiting"


class Crps(Loss):
    def __init__(self, weight=None, grid=10001):
        self.weight = weight
        self.grid = int(grid)

    def calibrate(self, y_train):
        # default weight: standard normal rescaled to the empirical label range
        if self.weight is None:
            y = np.asarray(y_train, dtype=float)
            lo, hi = float(y.min()), float(y.max())
            half = 0.5 * (hi - lo)
            self.weight = Normal(0.5 * (lo + hi), half if half > 0 else 1.0)

    def __call__(self, p, y):
        return crps(p, y, self.weight, self.grid)

    @property
    def id(self):
        return "crps"


class KernelLoss(Loss):
    def __init__(self, kernel, mc=2000, seed=0):
        self.kernel = kernel
        self.mc = int(mc)
        self.seed = int(seed)
        self.strictly_proper = kernel.characteristic

    def __call__(self, p, y):
        return kernel_loss(p, y, self.kernel, self.mc, self.seed)

    @property
    def id(self):
        return f"kernel:{'gauss' if self.kernel.tag == 'gaussian' else self.kernel.tag}:{self.kernel.param:g}"


class ConvolutionLoss(Loss):
    def __init__(self, base, noise, m, seed=0):
        self.base = base
        self.noise = noise
        self.m = int(m)
        self.seed = int(seed)
        self.proper = base.proper
        self.strictly_proper = base.strictly_proper and isinstance(noise, Normal)

    def __call__(self, p, y):
        return convolution_loss(self.base, p, y, self.noise, self.m, self.seed)

    @property
    def id(self):
        sigma = self.noise.std() if not isinstance(self.noise, Normal) else self.noise.sigma
        return f"conv:{self.base.id}:{sigma:g}:{self.m}"


class SplitMixedLoss(Loss):
    def __init__(self, alphas, locus, Lb, Lc, Ld):
        self.alphas = tuple(float(a) for a in alphas)
        self.locus = [float(v) for v in locus]
        self.Lb, self.Lc, self.Ld = Lb, Lc, Ld
        self.proper = all(l.proper for l in (Lb, Lc, Ld))
        self.strictly_proper = all(l.strictly_proper for l in (Lb, Lc, Ld))

    def __call__(self, p, y):
        return split_mixed_loss(p, y, self.alphas, self.locus, self.Lb, self.Lc, self.Ld)

    @property
    def id(self):
        return "split_mixed"


class MeanVarianceLoss(Loss):
    """Applies the mean-variance likelihood-loss to a prediction's (mean, var)."""

    def __call__(self, p, y):
        if isinstance(p, tuple):
            mu, nu = p
        else:
            mu, s = p.moments()
            nu = max(s * s, 1e-300)
        return mean_variance_loss(mu, nu, y)

    @property
    def id(self):
        return "meanvar"


def parse_loss(identifier):
    """Loss from a CLI identifier such as ``log``, ``log_capped:1e-10``,
    ``gneiting``, ``crps``, ``kernel:gauss:1.0``, ``conv:log:0.5:100``, ``meanvar``."""
    parts = identifier.strip().split(":")
    head = parts[0]
    if head == "log" and len(parts) == 1:
        return LogLoss()
    if head == "log_capped":
        return CappedLogLoss(float(parts[1]) if len(parts) > 1 else 1e-10)
    if head == "gneiting":
        return GneitingLoss()
    if head == "crps":
        return Crps(grid=int(parts[1]) if len(parts) > 1 else 10001)
    if head == "kernel":
        tag = {"gauss": "gaussian", "gaussian": "gaussian", "laplace": "laplace"}.get(parts[1])
        if tag is None:
            raise DomainError(f"unknown kernel {parts[1]!r}")
        return KernelLoss(KernelFn(tag, float(parts[2]) if len(parts) > 2 else 1.0))
    if head == "conv":
        base = parse_loss(parts[1])
        sigma = float(parts[2]) if len(parts) > 2 else 1.0
        m = int(parts[3]) if len(parts) > 3 else 100
        return ConvolutionLoss(base, Normal(0.0, sigma), m)
    if head == "meanvar":
        return MeanVarianceLoss()
    raise DomainError(f"unknown loss identifier {identifier!r}")
