"""Recursive-descent parser for the model-spec grammar used by the CLI.

Grammar (whitespace-insensitive, case-sensitive identifiers)::

    model     := shape "(" "p" "=" learner "," "s" "=" disp ")"
               | "Cap" "(" model "," "eps" "=" NUM ["," "ref" "=" REF] ")"
               | "Bag" "(" model ["," kv]* ")"
               | "BoostGreedy" "(" [kv ("," kv)*] ")"
               | "BoostGentle" "(" [kv ("," kv)*] ")"
               | "Baseline" "(" ("normal"|"kernel"|"hist") ")"
    shape     := "N" | "Laplace" | "Uniform"
    disp      := "Min" "(" disp ["," NUM (";" NUM)*] ")"
               | "RE" "(" "p" "," learner ["," ("squared"|"abs"|"log")] ")"
               | learner
    learner   := "C" "(" (NUM | "mean(y)" | "std(y)") ")" | "LR"
               | "KNN" "(" "k" "=" INT ")" | "KRR" "(" kv ("," kv)* ")"

Parse errors carry the byte offset of the offending token.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .composite import (CappingMixture, MinBounded, ParametricEstimator,
                        ResidualEstimator, DEFAULT_MIN_GRID)
from .errors import ParseError
from .learners import Constant, DensityBaseline, KernelRidge, Knn, Ols
from .meta import BaggingEstimator, GentleBoosting, GreedyBoosting


# ---------------------------------------------------------------------------
# AST

@dataclass(frozen=True)
class ConstNode:
    spec: object  # float or 'mean(y)' / 'std(y)'


@dataclass(frozen=True)
class LrNode:
    pass


@dataclass(frozen=True)
class KnnNode:
    k: int


@dataclass(frozen=True)
class KrrNode:
    lam: float = 0.1
    gamma: float = 1.0
    scale: bool = False


@dataclass(frozen=True)
class ReNode:
    inner: object
    transform: str = "squared"


@dataclass(frozen=True)
class MinNode:
    inner: object
    grid: tuple = ()


@dataclass(frozen=True)
class ParametricNode:
    shape: str
    point: object
    disp: object


@dataclass(frozen=True)
class CapNode:
    model: object
    eps: float
    ref: str = "uniform01"


@dataclass(frozen=True)
class BaselineNode:
    adaptor: str


@dataclass(frozen=True)
class BagNode:
    model: object
    n: int = 10
    frac: float = 1.0
    boot: bool = True


@dataclass(frozen=True)
class BoostGreedyNode:
    k: int = 1
    alpha: float = 0.1


@dataclass(frozen=True)
class BoostGentleNode:
    m: int = 5
    alpha: float = 0.5
    gamma: float = 1.0


# ---------------------------------------------------------------------------
# tokenizer

_TOKEN_RE = re.compile(r"""
    (?P<num>[-+]?(\d+\.?\d*|\.\d+)([eE][-+]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<punct>[(),=;])
  | (?P<ws>\s+)
""", re.VERBOSE)


@dataclass
class _Tok:
    kind: str
    text: str
    offset: int


def _tokenize(text):
    out = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unknown token {text[pos]!r}", pos)
        if m.lastgroup != "ws":
            out.append(_Tok(m.lastgroup, m.group(), pos))
        pos = m.end()
    out.append(_Tok("eof", "", len(text)))
    return out


class _Parser:
    def __init__(self, text):
        if not text.strip():
            raise ParseError("empty model spec", 0)
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def next(self):
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, text):
        t = self.next()
        if t.text != text:
            raise ParseError(f"expected {text!r}, found {t.text!r}", t.offset)
        return t

    def fail(self, msg, tok=None):
        tok = tok or self.peek()
        raise ParseError(msg, tok.offset)

    # -- grammar -------------------------------------------------------
    def parse_model(self):
        t = self.peek()
        if t.text in ("N", "Laplace", "Uniform"):
            return self.parse_parametric()
        if t.text == "Cap":
            return self.parse_cap()
        if t.text == "Bag":
            return self.parse_bag()
        if t.text == "BoostGreedy":
            return self.parse_kwcall(BoostGreedyNode, {"k": int, "alpha": float})
        if t.text == "BoostGentle":
            return self.parse_kwcall(BoostGentleNode, {"M": int, "alpha": float,
                                                       "gamma": float})
        if t.text == "Baseline":
            return self.parse_baseline()
        self.fail(f"unknown model token {t.text!r}")

    def parse_parametric(self):
        shape = {"N": "normal", "Laplace": "laplace", "Uniform": "uniform"}[self.next().text]
        self.expect("(")
        self.expect("p")
        self.expect("=")
        point = self.parse_learner()
        self.expect(",")
        self.expect("s")
        self.expect("=")
        disp = self.parse_disp()
        self.expect(")")
        return ParametricNode(shape, point, disp)

    def parse_disp(self):
        t = self.peek()
        if t.text == "Min":
            self.next()
            self.expect("(")
            inner = self.parse_disp()
            grid = ()
            if self.peek().text == ",":
                self.next()
                vals = [self.parse_number()]
                while self.peek().text == ";":
                    self.next()
                    vals.append(self.parse_number())
                grid = tuple(vals)
            self.expect(")")
            return MinNode(inner, grid)
        if t.text == "RE":
            self.next()
            self.expect("(")
            self.expect("p")
            self.expect(",")
            inner = self.parse_learner()
            transform = "squared"
            if self.peek().text == ",":
                self.next()
                tr = self.next()
                if tr.text not in ("squared", "abs", "log"):
                    self.fail(f"unknown residual transform {tr.text!r}", tr)
                transform = tr.text
            self.expect(")")
            return ReNode(inner, transform)
        return self.parse_learner()

    def parse_learner(self):
        t = self.peek()
        if t.text == "RE":
            self.fail("RE is only valid in a dispersion slot", t)
        if t.text == "C":
            self.next()
            self.expect("(")
            spec = self.parse_cspec()
            self.expect(")")
            return ConstNode(spec)
        if t.text == "LR":
            self.next()
            return LrNode()
        if t.text == "KNN":
            self.next()
            self.expect("(")
            self.expect("k")
            self.expect("=")
            k = int(self.parse_number())
            self.expect(")")
            return KnnNode(k)
        if t.text == "KRR":
            self.next()
            self.expect("(")
            kv = self.parse_kvs({"lambda": float, "gamma": float, "scale": bool})
            self.expect(")")
            return KrrNode(lam=kv.get("lambda", 0.1), gamma=kv.get("gamma", 1.0),
                           scale=kv.get("scale", False))
        self.fail(f"expected a learner, found {t.text!r}", t)

    def parse_cspec(self):
        t = self.peek()
        if t.kind == "num":
            return self.parse_number()
        if t.text in ("mean", "std"):
            self.next()
            self.expect("(")
            self.expect("y")
            self.expect(")")
            return f"{t.text}(y)"
        self.fail(f"expected a number, mean(y) or std(y), found {t.text!r}", t)

    def parse_cap(self):
        self.next()
        self.expect("(")
        model = self.parse_model()
        self.expect(",")
        kv = self.parse_kvs({"eps": float, "ref": str})
        if "eps" not in kv:
            self.fail("Cap requires eps=")
        ref = kv.get("ref", "uniform01")
        if ref not in ("uniform01", "sigmoid"):
            self.fail(f"unknown reference {ref!r}")
        self.expect(")")
        return CapNode(model, kv["eps"], ref)

    def parse_bag(self):
        self.next()
        self.expect("(")
        model = self.parse_model()
        kv = {}
        if self.peek().text == ",":
            self.next()
            kv = self.parse_kvs({"n": int, "frac": float, "boot": bool})
        self.expect(")")
        return BagNode(model, n=kv.get("n", 10), frac=kv.get("frac", 1.0),
                       boot=kv.get("boot", True))

    def parse_kwcall(self, node_cls, types):
        self.next()
        self.expect("(")
        kv = self.parse_kvs(types) if self.peek().text != ")" else {}
        self.expect(")")
        mapped = {("m" if k == "M" else k): v for k, v in kv.items()}
        return node_cls(**mapped)

    def parse_baseline(self):
        self.next()
        self.expect("(")
        t = self.next()
        if t.text not in ("normal", "kernel", "hist"):
            self.fail(f"unknown baseline adaptor {t.text!r}", t)
        self.expect(")")
        return BaselineNode(t.text)

    def parse_kvs(self, types):
        out = {}
        while True:
            key = self.next()
            if key.kind != "ident" or key.text not in types:
                self.fail(f"unknown argument {key.text!r}", key)
            self.expect("=")
            caster = types[key.text]
            if caster is bool:
                v = self.next()
                if v.text not in ("true", "false", "True", "False"):
                    self.fail(f"expected a boolean, found {v.text!r}", v)
                out[key.text] = v.text in ("true", "True")
            elif caster is str:
                out[key.text] = self.next().text
            else:
                out[key.text] = caster(self.parse_number())
            if self.peek().text != ",":
                break
            self.next()
        return out

    def parse_number(self):
        t = self.next()
        if t.kind != "num":
            self.fail(f"expected a number, found {t.text!r}", t)
        return float(t.text)


def parse_model_spec(text):
    """Parse a model-spec string into its AST; ParseError carries byte offsets."""
    p = _Parser(text)
    node = p.parse_model()
    tail = p.peek()
    if tail.kind != "eof":
        raise ParseError(f"trailing input {tail.text!r}", tail.offset)
    return node


# ---------------------------------------------------------------------------
# canonical rendering

def render(node):
    if isinstance(node, ConstNode):
        return f"C({node.spec:g})" if isinstance(node.spec, float) else f"C({node.spec})"
    if isinstance(node, LrNode):
        return "LR"
    if isinstance(node, KnnNode):
        return f"KNN(k={node.k})"
    if isinstance(node, KrrNode):
        return (f"KRR(lambda={node.lam:g}, gamma={node.gamma:g}, "
                f"scale={'true' if node.scale else 'false'})")
    if isinstance(node, ReNode):
        tail = "" if node.transform == "squared" else f", {node.transform}"
        return f"RE(p, {render(node.inner)}{tail})"
    if isinstance(node, MinNode):
        tail = "" if not node.grid else ", " + ";".join(f"{g:g}" for g in node.grid)
        return f"Min({render(node.inner)}{tail})"
    if isinstance(node, ParametricNode):
        letter = {"normal": "N", "laplace": "Laplace", "uniform": "Uniform"}[node.shape]
        return f"{letter}(p={render(node.point)}, s={render(node.disp)})"
    if isinstance(node, CapNode):
        return f"Cap({render(node.model)}, eps={node.eps:g}, ref={node.ref})"
    if isinstance(node, BaselineNode):
        return f"Baseline({node.adaptor})"
    if isinstance(node, BagNode):
        return (f"Bag({render(node.model)}, n={node.n}, frac={node.frac:g}, "
                f"boot={'true' if node.boot else 'false'})")
    if isinstance(node, BoostGreedyNode):
        return f"BoostGreedy(k={node.k}, alpha={node.alpha:g})"
    if isinstance(node, BoostGentleNode):
        return f"BoostGentle(M={node.m}, alpha={node.alpha:g}, gamma={node.gamma:g})"
    raise TypeError(f"not an AST node: {node!r}")


# ---------------------------------------------------------------------------
# estimator construction

def build(node, seed=0, std_denominator="n"):
    """Instantiate the estimator tree for an AST node."""
    if isinstance(node, ConstNode):
        return Constant(node.spec, std_denominator=std_denominator)
    if isinstance(node, LrNode):
        return Ols()
    if isinstance(node, KnnNode):
        return Knn(node.k)
    if isinstance(node, KrrNode):
        return KernelRidge(node.lam, node.gamma, node.scale)
    if isinstance(node, ReNode):
        return ResidualEstimator(build(node.inner, seed, std_denominator),
                                 transform=node.transform)
    if isinstance(node, MinNode):
        grid = node.grid if node.grid else DEFAULT_MIN_GRID
        return MinBounded(build(node.inner, seed, std_denominator),
                          kappa=None, grid=grid)
    if isinstance(node, ParametricNode):
        return ParametricEstimator(node.shape,
                                   build(node.point, seed, std_denominator),
                                   build(node.disp, seed, std_denominator),
                                   seed=seed)
    if isinstance(node, CapNode):
        return CappingMixture(build(node.model, seed, std_denominator),
                              node.eps, node.ref)
    if isinstance(node, BaselineNode):
        return DensityBaseline(adaptor=node.adaptor,
                               std_denominator=std_denominator, seed=seed)
    if isinstance(node, BagNode):
        return BaggingEstimator(build(node.model, seed, std_denominator),
                                node.n, node.frac, node.boot, seed=seed)
    if isinstance(node, BoostGreedyNode):
        return GreedyBoosting(node.k, node.alpha, seed=seed)
    if isinstance(node, BoostGentleNode):
        return GentleBoosting(node.m, node.alpha, node.gamma, seed=seed)
    raise TypeError(f"not an AST node: {node!r}")
