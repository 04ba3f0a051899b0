"""Predicted-distribution value types.

A :class:`Distribution` is an immutable value describing a law on the reals
(or on a finite label set): evaluable (pdf/cdf), sampleable through an
explicit seeded generator, and transformable through a
:class:`Diffeomorphism` (push-forward / pull-back with Jacobian correction).

Density conventions: continuous variants report a Lebesgue density, discrete
variants report point masses, and mixed variants report the density with
respect to Lebesgue-plus-counting reference measure — continuous density off
atoms, atom mass on atoms.  Strictly local losses reject mixed variants.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import ndtr, ndtri

from . import _kernels
from .errors import DomainError, InvalidWeights, SingularTransform, UnsupportedKind

_SQRT2 = math.sqrt(2.0)
_ATOM_EPS = 0.0  # atoms matched by exact float equality


def _as_1d(y):
    arr = np.asarray(y, dtype=float)
    scalar = arr.ndim == 0
    return np.atleast_1d(arr), scalar


def _ret(values, scalar):
    return float(values[0]) if scalar else values


# ---------------------------------------------------------------------------
# numeric integration (adaptive Simpson, per the quadrature decision)

def adaptive_simpson(f, a, b, tol=1e-8, max_depth=50):
    """Adaptive Simpson quadrature of a scalar function on [a, b]."""
    fa, fb = f(a), f(b)
    m = 0.5 * (a + b)
    fm = f(m)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    return _simpson_rec(f, a, b, fa, fb, fm, whole, tol, max_depth)


def _simpson_rec(f, a, b, fa, fb, fm, whole, tol, depth):
    m = 0.5 * (a + b)
    lm, rm = 0.5 * (a + m), 0.5 * (m + b)
    flm, frm = f(lm), f(rm)
    left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
    right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
    if depth <= 0 or abs(left + right - whole) <= 15.0 * tol:
        return left + right + (left + right - whole) / 15.0
    return (_simpson_rec(f, a, m, fa, fm, flm, left, 0.5 * tol, depth - 1)
            + _simpson_rec(f, m, b, fm, fb, frm, right, 0.5 * tol, depth - 1))


def _integration_bounds(d):
    lo, hi = d.support()
    mean, std = d.moments()
    std = max(std, 1e-12)
    a = max(lo, mean - 12.0 * std)
    b = min(hi, mean + 12.0 * std)
    return a, b


# ---------------------------------------------------------------------------

class Distribution:
    """Abstract base; concrete variants implement the evaluation surface."""

    kind = "continuous"  # or "discrete" / "mixed"

    # -- evaluation -----------------------------------------------------
    def pdf(self, y):
        raise NotImplementedError

    def logpdf(self, y):
        ys, scalar = _as_1d(y)
        with np.errstate(divide="ignore"):
            out = np.log(np.atleast_1d(np.asarray(self.pdf(ys), dtype=float)))
        return _ret(out, scalar)

    def cdf(self, y):
        raise NotImplementedError

    def quantile(self, alpha):
        alphas, scalar = _as_1d(alpha)
        if np.any(alphas <= 0.0) or np.any(alphas >= 1.0):
            raise DomainError("quantile level must lie strictly inside (0, 1)")
        out = np.array([self._quantile_scalar(a) for a in alphas])
        return _ret(out, scalar)

    def _quantile_scalar(self, alpha):
        return _bisect_quantile(self, alpha)

    def sample(self, rng, n):
        raise NotImplementedError

    # -- summaries ------------------------------------------------------
    def moments(self):
        """(mean, std) of the distribution."""
        raise NotImplementedError

    def mean(self):
        return self.moments()[0]

    def std(self):
        return self.moments()[1]

    def lp2_norm_sq(self):
        """Squared L2 norm: integral of pdf^2 (continuous) / sum of squared masses (discrete)."""
        if self.kind == "mixed":
            raise UnsupportedKind("lp2 norm undefined for mixed distributions")
        a, b = _integration_bounds(self)
        return adaptive_simpson(lambda t: self.pdf(t) ** 2, a, b)

    def support(self):
        return (-math.inf, math.inf)

    def atoms(self):
        """(atom values, atom masses) of the discrete part; empty for continuous."""
        return np.empty(0), np.empty(0)

    def decompose(self):
        """Mixed decomposition (alpha_c, continuous part or None, atoms, masses)."""
        if self.kind == "continuous":
            return 1.0, self, np.empty(0), np.empty(0)
        if self.kind == "discrete":
            a, w = self.atoms()
            return 0.0, None, a, w
        raise NotImplementedError

    def to_json(self):
        raise NotImplementedError


def _bisect_quantile(d, alpha, tol=1e-12):
    lo, hi = d.support()
    mean, std = d.moments()
    std = max(std, 1e-12)
    if not math.isfinite(lo):
        lo = mean - 16.0 * std
        while d.cdf(lo) > alpha:
            lo -= 16.0 * std
    if not math.isfinite(hi):
        hi = mean + 16.0 * std
        while d.cdf(hi) < alpha:
            hi += 16.0 * std
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if d.cdf(mid) >= alpha:
            hi = mid
        else:
            lo = mid
        if hi - lo <= tol * max(1.0, abs(hi)):
            break
    return hi


# ---------------------------------------------------------------------------
# continuous parametric variants

class Normal(Distribution):
    def __init__(self, mu, sigma):
        if sigma <= 0:
            raise DomainError("sigma must be positive")
        self.mu = float(mu)
        self.sigma = float(sigma)

    def pdf(self, y):
        ys, scalar = _as_1d(y)
        z = (ys - self.mu) / self.sigma
        out = np.exp(-0.5 * z * z) / (self.sigma * math.sqrt(2.0 * math.pi))
        return _ret(out, scalar)

    def logpdf(self, y):
        ys, scalar = _as_1d(y)
        z = (ys - self.mu) / self.sigma
        out = -0.5 * z * z - 0.5 * math.log(2.0 * math.pi * self.sigma ** 2)
        return _ret(out, scalar)

    def cdf(self, y):
        ys, scalar = _as_1d(y)
        return _ret(ndtr((ys - self.mu) / self.sigma), scalar)

    def quantile(self, alpha):
        alphas, scalar = _as_1d(alpha)
        if np.any(alphas <= 0.0) or np.any(alphas >= 1.0):
            raise DomainError("quantile level must lie strictly inside (0, 1)")
        return _ret(self.mu + self.sigma * ndtri(alphas), scalar)

    def sample(self, rng, n):
        return rng.normal(self.mu, self.sigma, size=n)

    def moments(self):
        return self.mu, self.sigma

    def lp2_norm_sq(self):
        return 1.0 / (2.0 * self.sigma * math.sqrt(math.pi))

    def to_json(self):
        return {"variant": "normal", "params": {"mu": self.mu, "sigma": self.sigma}}

    def __repr__(self):
        return f"Normal({self.mu:g}, {self.sigma:g})"


class Laplace(Distribution):
    def __init__(self, mu, b):
        if b <= 0:
            raise DomainError("scale b must be positive")
        self.mu = float(mu)
        self.b = float(b)

    def pdf(self, y):
        ys, scalar = _as_1d(y)
        return _ret(np.exp(-np.abs(ys - self.mu) / self.b) / (2.0 * self.b), scalar)

    def logpdf(self, y):
        ys, scalar = _as_1d(y)
        return _ret(-np.abs(ys - self.mu) / self.b - math.log(2.0 * self.b), scalar)

    def cdf(self, y):
        ys, scalar = _as_1d(y)
        z = (ys - self.mu) / self.b
        out = np.where(z < 0.0, 0.5 * np.exp(z), 1.0 - 0.5 * np.exp(-z))
        return _ret(out, scalar)

    def quantile(self, alpha):
        alphas, scalar = _as_1d(alpha)
        if np.any(alphas <= 0.0) or np.any(alphas >= 1.0):
            raise DomainError("quantile level must lie strictly inside (0, 1)")
        out = np.where(alphas < 0.5,
                       self.mu + self.b * np.log(2.0 * alphas),
                       self.mu - self.b * np.log(2.0 * (1.0 - alphas)))
        return _ret(out, scalar)

    def sample(self, rng, n):
        return rng.laplace(self.mu, self.b, size=n)

    def moments(self):
        return self.mu, self.b * _SQRT2

    def lp2_norm_sq(self):
        return 1.0 / (4.0 * self.b)

    def to_json(self):
        return {"variant": "laplace", "params": {"mu": self.mu, "b": self.b}}

    def __repr__(self):
        return f"Laplace({self.mu:g}, {self.b:g})"


class Uniform(Distribution):
    def __init__(self, lo, hi):
        if not hi > lo:
            raise DomainError("hi must exceed lo")
        self.lo = float(lo)
        self.hi = float(hi)

    def pdf(self, y):
        ys, scalar = _as_1d(y)
        inside = (ys >= self.lo) & (ys <= self.hi)
        return _ret(np.where(inside, 1.0 / (self.hi - self.lo), 0.0), scalar)

    def cdf(self, y):
        ys, scalar = _as_1d(y)
        return _ret(np.clip((ys - self.lo) / (self.hi - self.lo), 0.0, 1.0), scalar)

    def quantile(self, alpha):
        alphas, scalar = _as_1d(alpha)
        if np.any(alphas <= 0.0) or np.any(alphas >= 1.0):
            raise DomainError("quantile level must lie strictly inside (0, 1)")
        return _ret(self.lo + alphas * (self.hi - self.lo), scalar)

    def sample(self, rng, n):
        return rng.uniform(self.lo, self.hi, size=n)

    def moments(self):
        return 0.5 * (self.lo + self.hi), (self.hi - self.lo) / math.sqrt(12.0)

    def lp2_norm_sq(self):
        return 1.0 / (self.hi - self.lo)

    def support(self):
        return (self.lo, self.hi)

    def to_json(self):
        return {"variant": "uniform", "params": {"lo": self.lo, "hi": self.hi}}

    def __repr__(self):
        return f"Uniform({self.lo:g}, {self.hi:g})"


# ---------------------------------------------------------------------------
# discrete variants

def _check_simplex(w, tol=1e-9):
    w = np.asarray(w, dtype=float)
    if w.size == 0 or np.any(w < -1e-15) or abs(w.sum() - 1.0) > tol:
        raise InvalidWeights(f"weights must lie on the simplex (sum {w.sum()!r})")
    return np.clip(w, 0.0, None)


class Categorical(Distribution):
    """Finite label set with probabilities.  Labels may be non-numeric."""

    kind = "discrete"

    def __init__(self, labels, probs):
        self.labels = list(labels)
        self.probs = _check_simplex(probs, tol=1e-12)
        if len(self.labels) != len(self.probs):
            raise InvalidWeights("labels and probs must have equal length")
        self._index = {lab: i for i, lab in enumerate(self.labels)}
        self._numeric = all(isinstance(l, (int, float, np.integer, np.floating))
                            for l in self.labels)

    def pdf(self, y):
        if np.ndim(y) == 0 and not isinstance(y, np.ndarray):
            i = self._index.get(y if not isinstance(y, float) else y, None)
            if i is None and isinstance(y, (int, float)):
                i = self._index.get(float(y), self._index.get(int(y) if float(y).is_integer() else y))
            return float(self.probs[i]) if i is not None else 0.0
        ys = np.atleast_1d(np.asarray(y))
        return np.array([self.pdf(v.item() if hasattr(v, "item") else v) for v in ys])

    def cdf(self, y):
        if not self._numeric:
            raise UnsupportedKind("cdf requires numeric labels")
        labs = np.array([float(l) for l in self.labels])
        ys, scalar = _as_1d(y)
        out = _kernels.ecdf(ys, labs, self.probs)
        return _ret(out, scalar)

    def _quantile_scalar(self, alpha):
        if not self._numeric:
            raise UnsupportedKind("quantile requires numeric labels")
        labs = np.array([float(l) for l in self.labels])
        order = np.argsort(labs)
        cum = np.cumsum(self.probs[order])
        idx = int(np.searchsorted(cum, alpha - 1e-15))
        return float(labs[order][min(idx, len(labs) - 1)])

    def sample(self, rng, n):
        idx = rng.choice(len(self.labels), size=n, p=self.probs / self.probs.sum())
        if self._numeric:
            return np.array([float(self.labels[i]) for i in idx])
        return np.array([self.labels[i] for i in idx], dtype=object)

    def moments(self):
        if not self._numeric:
            raise DomainError("moments require numeric labels")
        labs = np.array([float(l) for l in self.labels])
        m = float(labs @ self.probs)
        v = float(((labs - m) ** 2) @ self.probs)
        return m, math.sqrt(max(v, 0.0))

    def lp2_norm_sq(self):
        return float(np.sum(self.probs ** 2))

    def atoms(self):
        if not self._numeric:
            raise UnsupportedKind("atoms require numeric labels")
        return np.array([float(l) for l in self.labels]), self.probs.copy()

    def to_json(self):
        return {"variant": "categorical",
                "params": {"labels": list(self.labels), "probs": [float(p) for p in self.probs]}}

    def __repr__(self):
        return f"Categorical({self.labels!r})"


class Empirical(Distribution):
    """Weighted atoms on the reals; duplicate atoms are merged."""

    kind = "discrete"

    def __init__(self, atoms, weights=None):
        atoms = np.asarray(atoms, dtype=float)
        if atoms.size == 0:
            raise DomainError("empirical distribution needs at least one atom")
        if weights is None:
            weights = np.full(atoms.size, 1.0 / atoms.size)
        weights = _check_simplex(weights)
        order = np.argsort(atoms, kind="stable")
        a, w = atoms[order], weights[order]
        uniq, inv = np.unique(a, return_inverse=True)
        merged = np.zeros(uniq.size)
        np.add.at(merged, inv, w)
        self._atoms = uniq
        self._weights = merged

    def pdf(self, y):
        ys, scalar = _as_1d(y)
        idx = np.searchsorted(self._atoms, ys)
        out = np.zeros(ys.size)
        ok = (idx < self._atoms.size)
        hit = ok & (self._atoms[np.minimum(idx, self._atoms.size - 1)] == ys)
        out[hit] = self._weights[idx[hit]]
        return _ret(out, scalar)

    def cdf(self, y):
        ys, scalar = _as_1d(y)
        return _ret(_kernels.ecdf(ys, self._atoms, self._weights), scalar)

    def _quantile_scalar(self, alpha):
        cum = np.cumsum(self._weights)
        idx = int(np.searchsorted(cum, alpha - 1e-15))
        return float(self._atoms[min(idx, self._atoms.size - 1)])

    def sample(self, rng, n):
        return rng.choice(self._atoms, size=n, p=self._weights / self._weights.sum())

    def moments(self):
        m = float(self._atoms @ self._weights)
        v = float(((self._atoms - m) ** 2) @ self._weights)
        return m, math.sqrt(max(v, 0.0))

    def lp2_norm_sq(self):
        return float(np.sum(self._weights ** 2))

    def support(self):
        return (float(self._atoms[0]), float(self._atoms[-1]))

    def atoms(self):
        return self._atoms.copy(), self._weights.copy()

    def to_json(self):
        return {"variant": "empirical",
                "params": {"atoms": [float(a) for a in self._atoms],
                           "weights": [float(w) for w in self._weights]}}

    def __repr__(self):
        return f"Empirical(<{self._atoms.size} atoms>)"


# ---------------------------------------------------------------------------

class KernelDensity(Distribution):
    """Sum of kernels centred at atoms; bandwidth is the kernel's std."""

    def __init__(self, atoms, bandwidths, shape="gaussian"):
        self.atoms_ = np.asarray(atoms, dtype=float)
        bw = np.asarray(bandwidths, dtype=float)
        if bw.ndim == 0:
            bw = np.full(self.atoms_.size, float(bw))
        if np.any(bw <= 0):
            raise DomainError("bandwidths must be positive")
        if bw.size != self.atoms_.size:
            raise DomainError("one bandwidth per atom required")
        if shape not in ("gaussian", "laplace"):
            raise DomainError(f"unknown kernel shape {shape!r}")
        self.bandwidths = bw
        self.shape = shape
        self._w = np.full(self.atoms_.size, 1.0 / self.atoms_.size)
        self._kind_code = 0 if shape == "gaussian" else 1

    def pdf(self, y):
        ys, scalar = _as_1d(y)
        out = _kernels.kde_pdf(ys, self.atoms_, self._w, self.bandwidths, self._kind_code)
        return _ret(out, scalar)

    def cdf(self, y):
        ys, scalar = _as_1d(y)
        out = _kernels.kde_cdf(ys, self.atoms_, self._w, self.bandwidths, self._kind_code)
        return _ret(out, scalar)

    def sample(self, rng, n):
        idx = rng.integers(0, self.atoms_.size, size=n)
        if self.shape == "gaussian":
            noise = rng.normal(0.0, 1.0, size=n) * self.bandwidths[idx]
        else:
            noise = rng.laplace(0.0, 1.0 / _SQRT2, size=n) * self.bandwidths[idx]
        return self.atoms_[idx] + noise

    def moments(self):
        m = float(self.atoms_ @ self._w)
        v = float((self.bandwidths ** 2) @ self._w + (self.atoms_ ** 2) @ self._w - m * m)
        return m, math.sqrt(max(v, 0.0))

    def lp2_norm_sq(self):
        if self.shape == "gaussian":
            # pairwise gaussian product integral
            s2 = self.bandwidths[:, None] ** 2 + self.bandwidths[None, :] ** 2
            d = self.atoms_[:, None] - self.atoms_[None, :]
            vals = np.exp(-0.5 * d * d / s2) / np.sqrt(2.0 * math.pi * s2)
            return float(self._w @ vals @ self._w)
        return super().lp2_norm_sq()

    def to_json(self):
        return {"variant": "kernel_density",
                "params": {"atoms": [float(a) for a in self.atoms_],
                           "bandwidths": [float(b) for b in self.bandwidths],
                           "shape": self.shape}}

    def __repr__(self):
        return f"KernelDensity(<{self.atoms_.size} atoms>, shape={self.shape})"


class Histogram(Distribution):
    def __init__(self, edges, masses):
        edges = np.asarray(edges, dtype=float)
        if edges.ndim != 1 or edges.size < 2 or np.any(np.diff(edges) <= 0):
            raise DomainError("edges must be a strictly increasing vector")
        masses = _check_simplex(masses)
        if masses.size != edges.size - 1:
            raise DomainError("need one mass per bin")
        self.edges = edges
        self.masses = masses

    def pdf(self, y):
        ys, scalar = _as_1d(y)
        idx = np.searchsorted(self.edges, ys, side="right") - 1
        idx = np.where(ys == self.edges[-1], self.masses.size - 1, idx)
        widths = np.diff(self.edges)
        ok = (idx >= 0) & (idx < self.masses.size)
        out = np.zeros(ys.size)
        out[ok] = self.masses[idx[ok]] / widths[idx[ok]]
        out[(ys < self.edges[0]) | (ys > self.edges[-1])] = 0.0
        return _ret(out, scalar)

    def cdf(self, y):
        ys, scalar = _as_1d(y)
        cum = np.concatenate([[0.0], np.cumsum(self.masses)])
        out = np.interp(ys, self.edges, cum)
        return _ret(out, scalar)

    def _quantile_scalar(self, alpha):
        cum = np.concatenate([[0.0], np.cumsum(self.masses)])
        return float(np.interp(alpha, cum, self.edges))

    def sample(self, rng, n):
        idx = rng.choice(self.masses.size, size=n, p=self.masses / self.masses.sum())
        lo, hi = self.edges[idx], self.edges[idx + 1]
        return rng.uniform(lo, hi)

    def moments(self):
        mids = 0.5 * (self.edges[:-1] + self.edges[1:])
        widths = np.diff(self.edges)
        m = float(mids @ self.masses)
        ex2 = float((mids ** 2 + widths ** 2 / 12.0) @ self.masses)
        return m, math.sqrt(max(ex2 - m * m, 0.0))

    def lp2_norm_sq(self):
        widths = np.diff(self.edges)
        return float(np.sum(self.masses ** 2 / widths))

    def support(self):
        return (float(self.edges[0]), float(self.edges[-1]))

    def to_json(self):
        return {"variant": "histogram",
                "params": {"edges": [float(e) for e in self.edges],
                           "masses": [float(m) for m in self.masses]}}

    def __repr__(self):
        return f"Histogram(<{self.masses.size} bins>)"


# ---------------------------------------------------------------------------

class Mixture(Distribution):
    """Weighted mixture; kind derives from the component kinds."""

    def __init__(self, components, weights):
        if len(components) != len(weights):
            raise InvalidWeights("components and weights must have equal length")
        self.components = list(components)
        self.weights = _check_simplex(weights)
        kinds = {c.kind for c in self.components}
        if kinds == {"continuous"}:
            self.kind = "continuous"
        elif kinds == {"discrete"}:
            self.kind = "discrete"
        else:
            self.kind = "mixed"
        if self.kind == "mixed":
            self._alpha_c, self._cont, self._atoms, self._masses = self._decompose()

    def _decompose(self):
        conts, cws = [], []
        atom_vals, atom_ws = [], []
        for c, w in zip(self.components, self.weights):
            ac, cont, a, aw = c.decompose()
            if ac > 0 and cont is not None:
                conts.append(cont)
                cws.append(w * ac)
            if a.size:
                atom_vals.append(a)
                atom_ws.append(aw * w * (1.0 - ac))
        alpha_c = float(sum(cws))
        cont = None
        if conts:
            cw = np.array(cws) / alpha_c
            cont = conts[0] if len(conts) == 1 and cw[0] == 1.0 else Mixture(conts, cw)
        if atom_vals:
            av = np.concatenate(atom_vals)
            aw = np.concatenate(atom_ws)
            mass = aw.sum()
            atoms = Empirical(av, aw / mass) if mass > 0 else None
            if atoms is not None:
                a, w = atoms.atoms()
                return alpha_c, cont, a, w * mass
        return alpha_c, cont, np.empty(0), np.empty(0)

    def decompose(self):
        if self.kind == "mixed":
            masses = self._masses
            total = masses.sum()
            return self._alpha_c, self._cont, self._atoms, masses / total if total else masses
        return super().decompose()

    def pdf(self, y):
        ys, scalar = _as_1d(y)
        if self.kind != "mixed":
            out = np.zeros(ys.size)
            for c, w in zip(self.components, self.weights):
                out += w * np.atleast_1d(np.asarray(c.pdf(ys), dtype=float))
            return _ret(out, scalar)
        # density w.r.t. Lebesgue + counting: atom mass wins on atoms
        out = self._alpha_c * np.atleast_1d(np.asarray(self._cont.pdf(ys), dtype=float)) \
            if self._cont is not None else np.zeros(ys.size)
        idx = np.searchsorted(self._atoms, ys)
        ok = idx < self._atoms.size
        hit = ok & (self._atoms[np.minimum(idx, max(self._atoms.size - 1, 0))] == ys)
        out[hit] = self._masses[idx[hit]]
        return _ret(out, scalar)

    def cdf(self, y):
        ys, scalar = _as_1d(y)
        out = np.zeros(ys.size)
        for c, w in zip(self.components, self.weights):
            out += w * np.atleast_1d(np.asarray(c.cdf(ys), dtype=float))
        return _ret(out, scalar)

    def sample(self, rng, n):
        idx = rng.choice(len(self.components), size=n, p=self.weights / self.weights.sum())
        out = np.empty(n)
        for i, c in enumerate(self.components):
            take = idx == i
            cnt = int(take.sum())
            if cnt:
                out[take] = c.sample(rng, cnt)
        return out

    def moments(self):
        ms = np.array([c.moments()[0] for c in self.components])
        ss = np.array([c.moments()[1] for c in self.components])
        m = float(ms @ self.weights)
        ex2 = float((ss ** 2 + ms ** 2) @ self.weights)
        return m, math.sqrt(max(ex2 - m * m, 0.0))

    def lp2_norm_sq(self):
        if self.kind == "mixed":
            raise UnsupportedKind("lp2 norm undefined for mixed distributions")
        if self.kind == "discrete":
            merged = Empirical(*_merge_atoms(self.components, self.weights))
            return merged.lp2_norm_sq()
        if all(isinstance(c, Normal) for c in self.components):
            mus = np.array([c.mu for c in self.components])
            sig = np.array([c.sigma for c in self.components])
            s2 = sig[:, None] ** 2 + sig[None, :] ** 2
            d = mus[:, None] - mus[None, :]
            vals = np.exp(-0.5 * d * d / s2) / np.sqrt(2.0 * math.pi * s2)
            return float(self.weights @ vals @ self.weights)
        return super().lp2_norm_sq()

    def support(self):
        los, his = zip(*(c.support() for c in self.components))
        return (min(los), max(his))

    def atoms(self):
        if self.kind == "discrete":
            return _merge_atoms(self.components, self.weights)
        if self.kind == "mixed":
            return self._atoms.copy(), self._masses.copy()
        return super().atoms()

    def to_json(self):
        return {"variant": "mixture",
                "params": {"weights": [float(w) for w in self.weights],
                           "components": [c.to_json() for c in self.components]}}

    def __repr__(self):
        return f"Mixture({self.components!r})"


def _merge_atoms(components, weights):
    vals, ws = [], []
    for c, w in zip(components, weights):
        a, aw = c.atoms()
        vals.append(a)
        ws.append(aw * w)
    av, aw = np.concatenate(vals), np.concatenate(ws)
    uniq, inv = np.unique(av, return_inverse=True)
    merged = np.zeros(uniq.size)
    np.add.at(merged, inv, aw)
    return uniq, merged


def _identical_parametric(components):
    first = components[0]
    if type(first) is Normal:
        return all(type(c) is Normal and (c.mu, c.sigma) == (first.mu, first.sigma)
                   for c in components)
    if type(first) is Laplace:
        return all(type(c) is Laplace and (c.mu, c.b) == (first.mu, first.b)
                   for c in components)
    if type(first) is Uniform:
        return all(type(c) is Uniform and (c.lo, c.hi) == (first.lo, first.hi)
                   for c in components)
    return False


def mixture(components, weights):
    """Mixture of distributions; weights must sum to 1 within 1e-9.

    A mixture of identical parametric components collapses to the component,
    keeping e.g. prediction variance of a degenerate ensemble exactly zero.
    """
    _check_simplex(weights)
    if len(components) > 1 and _identical_parametric(components):
        return components[0]
    return Mixture(components, weights)


# ---------------------------------------------------------------------------
# diffeomorphisms and push-forwards

class Diffeomorphism:
    """Monotone smooth map with inverse and derivative of the forward map."""

    def __init__(self, forward, inverse, derivative, tag, params=None,
                 domain=(-math.inf, math.inf)):
        self.forward = forward
        self.inverse = inverse
        self.derivative = derivative
        self.tag = tag
        self.params = params or {}
        self.domain = domain

    def inverted(self):
        fwd, inv, deriv = self.forward, self.inverse, self.derivative

        def dinv(z):
            d = deriv(inv(z))
            return 1.0 / d if np.ndim(d) == 0 else 1.0 / np.asarray(d)

        lo, hi = self.domain
        try:
            new_dom = tuple(sorted((float(fwd(lo)) if math.isfinite(lo) else _limit(fwd, lo),
                                    float(fwd(hi)) if math.isfinite(hi) else _limit(fwd, hi))))
        except Exception:
            new_dom = (-math.inf, math.inf)
        return Diffeomorphism(inv, fwd, dinv, f"inverse({self.tag})", self.params, new_dom)

    def __repr__(self):
        return f"Diffeomorphism({self.tag})"


def _limit(f, x):
    big = 1e30 if x > 0 else -1e30
    v = float(f(big))
    return v if math.isfinite(v) else math.copysign(math.inf, v)


def affine_map(a, b):
    if a == 0:
        raise DomainError("affine slope must be non-zero")
    a, b = float(a), float(b)
    return Diffeomorphism(lambda x: a * x + b,
                          lambda z: (z - b) / a,
                          lambda x: a * np.ones_like(np.asarray(x, dtype=float)) if np.ndim(x) else a,
                          "affine", {"a": a, "b": b})


def _sigmoid(x):
    from scipy.special import expit

    out = expit(np.asarray(x, dtype=float))
    return float(out) if out.ndim == 0 else out


def _logit(z):
    z = np.asarray(z, dtype=float)
    with np.errstate(divide="ignore"):
        out = np.log(z) - np.log1p(-z)
    return float(out) if out.ndim == 0 else out


def sigmoid_map():
    return Diffeomorphism(_sigmoid, _logit,
                          lambda x: _sigmoid(x) * (1.0 - _sigmoid(np.asarray(x, dtype=float))),
                          "sigmoid")


def logit_map():
    return Diffeomorphism(_logit, _sigmoid,
                          lambda z: 1.0 / (np.asarray(z, dtype=float) * (1.0 - np.asarray(z, dtype=float))),
                          "logit", domain=(0.0, 1.0))


def cdf_map(d):
    """Cdf of a continuous distribution with strictly positive pdf, as a map to (0,1)."""
    if d.kind != "continuous":
        raise UnsupportedKind("cdf map requires a continuous distribution")
    return Diffeomorphism(d.cdf, lambda z: d.quantile(z), d.pdf,
                          "cdf_of", {"dist": d}, domain=d.support())


def composed_map(maps):
    """Composition applying maps[0] first, maps[-1] last."""
    maps = list(maps)

    def fwd(x):
        for m in maps:
            x = m.forward(x)
        return x

    def inv(z):
        for m in reversed(maps):
            z = m.inverse(z)
        return z

    def deriv(x):
        acc = 1.0
        for m in maps:
            acc = acc * np.asarray(m.derivative(x), dtype=float)
            x = m.forward(x)
        return float(acc) if np.ndim(acc) == 0 else acc

    return Diffeomorphism(fwd, inv, deriv, "composed",
                          {"maps": maps}, domain=maps[0].domain)


class Pushforward(Distribution):
    """Image of a continuous base distribution under a monotone map."""

    def __init__(self, base, T):
        if base.kind != "continuous":
            raise UnsupportedKind("push-forward wrapper requires a continuous base")
        self.base = base
        self.map = T
        mid = base.mean()
        d = float(np.asarray(T.derivative(mid)))
        self._increasing = d >= 0

    def pdf(self, y):
        ys, scalar = _as_1d(y)
        lo, hi = self.support()
        out = np.zeros(ys.size)
        inside = (ys > lo) & (ys < hi)
        if np.any(inside):
            x = np.asarray(self.map.inverse(ys[inside]), dtype=float)
            den = np.abs(np.asarray(self.map.derivative(x), dtype=float))
            base_pdf = np.atleast_1d(np.asarray(self.base.pdf(x), dtype=float))
            if np.any((den == 0.0) & (base_pdf > 0.0)):
                raise SingularTransform("map derivative vanishes at an interior point")
            vals = np.where(base_pdf > 0.0, base_pdf / np.where(den == 0.0, 1.0, den), 0.0)
            out[inside] = vals
        return _ret(out, scalar)

    def logpdf(self, y):
        ys, scalar = _as_1d(y)
        lo, hi = self.support()
        out = np.full(ys.size, -math.inf)
        inside = (ys > lo) & (ys < hi)
        if np.any(inside):
            x = np.asarray(self.map.inverse(ys[inside]), dtype=float)
            den = np.abs(np.asarray(self.map.derivative(x), dtype=float))
            base_lp = np.atleast_1d(np.asarray(self.base.logpdf(x), dtype=float))
            if np.any((den == 0.0) & np.isfinite(base_lp)):
                raise SingularTransform("map derivative vanishes at an interior point")
            with np.errstate(divide="ignore"):
                out[inside] = base_lp - np.log(np.where(den == 0.0, 1.0, den))
        return _ret(out, scalar)

    def cdf(self, y):
        ys, scalar = _as_1d(y)
        lo, hi = self.support()
        out = np.empty(ys.size)
        below, above = ys <= lo, ys >= hi
        mid = ~(below | above)
        out[below], out[above] = 0.0, 1.0
        if np.any(mid):
            x = np.asarray(self.map.inverse(ys[mid]), dtype=float)
            c = np.atleast_1d(np.asarray(self.base.cdf(x), dtype=float))
            out[mid] = c if self._increasing else 1.0 - c
        return _ret(out, scalar)

    def _quantile_scalar(self, alpha):
        if self._increasing:
            return float(self.map.forward(self.base.quantile(alpha)))
        return float(self.map.forward(self.base.quantile(1.0 - alpha)))

    def sample(self, rng, n):
        return np.asarray(self.map.forward(self.base.sample(rng, n)), dtype=float)

    def moments(self):
        # inverse-cdf (midpoint quantile) rule on the base distribution
        n = 4096
        qs = (np.arange(n) + 0.5) / n
        ys = np.asarray(self.map.forward(self.base.quantile(qs)), dtype=float)
        m = float(ys.mean())
        if not math.isfinite(m):
            raise DomainError("transformed distribution lacks finite moments")
        return m, float(ys.std())

    def support(self):
        lo, hi = self.base.support()
        try:
            a = float(self.map.forward(lo)) if math.isfinite(lo) else _limit(self.map.forward, lo)
            b = float(self.map.forward(hi)) if math.isfinite(hi) else _limit(self.map.forward, hi)
        except (ValueError, OverflowError, ZeroDivisionError, DomainError):
            # maps ending in a quantile map saturate at the boundaries
            return (-math.inf, math.inf)
        return tuple(sorted((a, b)))

    def to_json(self):
        return {"variant": "pushforward",
                "params": {"base": self.base.to_json(), "map": self.map.tag}}

    def __repr__(self):
        return f"Pushforward({self.base!r}, {self.map!r})"


def pushforward(d, T):
    """Image distribution of ``d`` under the monotone map ``T``.

    Affine maps of the parametric families simplify to native variants;
    discrete atoms are mapped with their weights kept (no Jacobian).
    """
    if d.kind == "discrete":
        a, w = d.atoms()
        return Empirical(np.asarray(T.forward(a), dtype=float), w)
    if isinstance(d, Mixture):
        return Mixture([pushforward(c, T) for c in d.components], d.weights)
    if T.tag == "affine":
        a, b = T.params["a"], T.params["b"]
        if isinstance(d, Normal):
            return Normal(a * d.mu + b, abs(a) * d.sigma)
        if isinstance(d, Laplace):
            return Laplace(a * d.mu + b, abs(a) * d.b)
        if isinstance(d, Uniform):
            lo, hi = sorted((a * d.lo + b, a * d.hi + b))
            return Uniform(lo, hi)
        if isinstance(d, KernelDensity) and a > 0:
            return KernelDensity(a * d.atoms_ + b, a * d.bandwidths, d.shape)
        if isinstance(d, Histogram) and a > 0:
            return Histogram(a * d.edges + b, d.masses)
    if isinstance(d, Pushforward):
        return Pushforward(d.base, composed_map([d.map, T]))
    return Pushforward(d, T)


def pullback(d, U):
    """Pull-back of ``d`` through ``U``: push-forward through the inverse map."""
    return pushforward(d, U.inverted())


def sigmoid_reference():
    """Pull-back of the unit uniform through the sigmoid: pdf s(x)(1-s(x)) on the reals."""
    return pullback(Uniform(0.0, 1.0), sigmoid_map())
