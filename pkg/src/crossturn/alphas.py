"""Alpha expressions evaluated into daily dollar-neutral, unit-book positions.

The mini-language::

    expr   := term (("+" | "-") term)*
    term   := unary (("*" | "/") unary)*
    unary  := "-" unary | atom
    atom   := NUMBER | SERIES | BUILTIN | NAME "(" expr ("," arg)* ")" | "(" expr ")"

``SERIES`` is one of ``open high low close volume``; ``BUILTIN`` is one of
``paper1`` .. ``paper4``.  Functions:

========================  ====================================================
``delay(x, k)``           value ``k`` days ago (``k >= 0``)
``sum(x, k)``             rolling sum over ``k`` days
``correlation(x, y, k)``  rolling Pearson correlation over ``k`` days
``rsi(x, k)``             relative strength index over ``k`` one-day changes
``sqrt(x)``, ``abs(x)``   elementwise
``decay(x, k)``           linear-decay average of the last ``k`` vectors
``truncate(x, limit)``    normalize, then clip weights to ``+-limit``
``cut_extremes(x, q)``    drop cells outside the ``[q, 1-q]`` quantile band
``cut_middle(x, q)``      drop cells strictly inside the ``(q, 1-q)`` band
========================  ====================================================

Undefined cells (NaN) propagate through every operator.  Dropped cells are
undefined too and therefore end up with a zero position.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .market_data import OhlcvPanel

__all__ = [
    "ExpressionError",
    "Series",
    "Const",
    "Neg",
    "BinOp",
    "Call",
    "AlphaExpr",
    "PositionPanel",
    "parse",
    "builtin_alphas",
    "lookback",
    "required_history",
    "evaluate_signal",
    "evaluate_alpha",
    "positions_from_signal",
    "neutralize_normalize",
    "rsi",
]

SERIES_NAMES = ("open", "high", "low", "close", "volume")


class ExpressionError(ValueError):
    """Malformed or invalid alpha expression."""


# ---------------------------------------------------------------------------
# Expression tree
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Series:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Const:
    value: float

    def __str__(self) -> str:
        return repr(self.value)


@dataclass(frozen=True)
class Neg:
    arg: "AlphaExpr"

    def __str__(self) -> str:
        return f"-({self.arg})"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "AlphaExpr"
    right: "AlphaExpr"

    def __str__(self) -> str:
        return f"({self.left} {self.op} {self.right})"


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple["AlphaExpr", ...]
    params: tuple[float, ...] = ()

    def __str__(self) -> str:
        parts = [str(a) for a in self.args] + [_fmt_param(p) for p in self.params]
        return f"{self.name}({', '.join(parts)})"


AlphaExpr = Union[Series, Const, Neg, BinOp, Call]


def _fmt_param(p: float) -> str:
    return str(int(p)) if float(p).is_integer() else repr(p)


# name -> (number of expression args, parameter kinds)
_FUNCS: dict[str, tuple[int, tuple[str, ...]]] = {
    "delay": (1, ("lag",)),
    "sum": (1, ("window",)),
    "correlation": (2, ("window",)),
    "rsi": (1, ("window",)),
    "sqrt": (1, ()),
    "abs": (1, ()),
    "decay": (1, ("window",)),
    "truncate": (1, ("limit",)),
    "cut_extremes": (1, ("quantile",)),
    "cut_middle": (1, ("quantile",)),
}


def _check_param(fn: str, kind: str, value: float) -> float:
    if kind == "lag":
        if value < 0 or not float(value).is_integer():
            raise ExpressionError(f"{fn}: lag must be a non-negative integer, got {value}")
        return int(value)
    if kind == "window":
        if value < 1 or not float(value).is_integer():
            raise ExpressionError(f"{fn}: window must be an integer >= 1, got {value}")
        return int(value)
    if kind == "quantile":
        if not 0.0 < value < 0.5:
            raise ExpressionError(f"{fn}: quantile must lie in (0, 0.5), got {value}")
        return float(value)
    if kind == "limit":
        if not value > 0:
            raise ExpressionError(f"{fn}: limit must be positive, got {value}")
        return float(value)
    raise AssertionError(kind)


def make_call(name: str, args: tuple, params: tuple = ()) -> Call:
    if name not in _FUNCS:
        raise ExpressionError(f"unknown function {name!r}")
    nargs, kinds = _FUNCS[name]
    if len(args) != nargs or len(params) != len(kinds):
        raise ExpressionError(
            f"{name} takes {nargs} expression argument(s) and {len(kinds)} parameter(s)"
        )
    params = tuple(_check_param(name, k, v) for k, v in zip(kinds, params))
    return Call(name, tuple(args), params)


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+\.\d*(?:[eE][-+]?\d+)?|\.\d+(?:[eE][-+]?\d+)?|\d+(?:[eE][-+]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/(),]))"
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            raise ExpressionError(f"unexpected character at {pos}: {text[pos:pos + 10]!r}")
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self) -> tuple[str, str, int]:
        return self.tokens[self.i]

    def take(self, value: str | None = None) -> tuple[str, str, int]:
        tok = self.tokens[self.i]
        if value is not None and tok[1] != value:
            raise ExpressionError(f"expected {value!r} at {tok[2]}, got {tok[1] or 'end'!r}")
        self.i += 1
        return tok

    def parse(self) -> AlphaExpr:
        node = self.expr()
        if self.peek()[0] != "end":
            tok = self.peek()
            raise ExpressionError(f"unexpected {tok[1]!r} at {tok[2]}")
        return node

    def expr(self) -> AlphaExpr:
        node = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> AlphaExpr:
        node = self.unary()
        while self.peek()[1] in ("*", "/"):
            op = self.take()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> AlphaExpr:
        if self.peek()[1] == "-":
            self.take()
            arg = self.unary()
            if isinstance(arg, Const):
                return Const(-arg.value)
            return Neg(arg)
        if self.peek()[1] == "+":
            self.take()
            return self.unary()
        return self.atom()

    def atom(self) -> AlphaExpr:
        kind, value, pos = self.take()
        if kind == "num":
            return Const(float(value))
        if value == "(":
            node = self.expr()
            self.take(")")
            return node
        if kind != "name":
            raise ExpressionError(f"unexpected {value or 'end'!r} at {pos}")
        if self.peek()[1] != "(":
            if value in SERIES_NAMES:
                return Series(value)
            builtins = dict(builtin_alphas())
            if value in builtins:
                return builtins[value]
            raise ExpressionError(f"unknown series {value!r} at {pos}")
        if value not in _FUNCS:
            raise ExpressionError(f"unknown function {value!r} at {pos}")
        self.take("(")
        items = [self.expr()]
        while self.peek()[1] == ",":
            self.take()
            items.append(self.expr())
        self.take(")")
        nargs, kinds = _FUNCS[value]
        args, raw = tuple(items[:nargs]), items[nargs:]
        params = []
        for r in raw:
            if not isinstance(r, Const):
                raise ExpressionError(f"{value}: parameters must be numeric literals")
            params.append(r.value)
        return make_call(value, args, tuple(params))


def parse(text: str) -> AlphaExpr:
    """Parse an expression string (or a builtin name) into a tree."""
    return _Parser(text).parse()


def builtin_alphas() -> list[tuple[str, AlphaExpr]]:
    """The four reference alphas, named ``paper1`` .. ``paper4``."""
    close, volume = Series("close"), Series("volume")
    high, low = Series("high"), Series("low")
    one = Const(1.0)
    a1 = BinOp(
        "-",
        BinOp(
            "/",
            BinOp("*", make_call("sum", (volume,), (4,)), make_call("sqrt", (BinOp("*", high, low),))),
            make_call("sum", (BinOp("*", close, volume),), (4,)),
        ),
        one,
    )
    a2 = BinOp(
        "*",
        BinOp("-", BinOp("/", make_call("delay", (close,), (14,)), close), one),
        BinOp("/", volume, make_call("sum", (volume,), (30,))),
    )
    a3 = BinOp(
        "*",
        make_call("correlation", (close, volume), (20,)),
        BinOp("-", one, BinOp("/", make_call("delay", (close,), (10,)), close)),
    )
    a4 = Neg(make_call("rsi", (close,), (14,)))
    return [("paper1", a1), ("paper2", a2), ("paper3", a3), ("paper4", a4)]


def lookback(expr: AlphaExpr) -> int:
    """Number of leading days on which ``expr`` cannot be defined."""
    if isinstance(expr, (Series, Const)):
        return 0
    if isinstance(expr, Neg):
        return lookback(expr.arg)
    if isinstance(expr, BinOp):
        return max(lookback(expr.left), lookback(expr.right))
    inner = max(lookback(a) for a in expr.args)
    if expr.name == "delay" or expr.name == "rsi":
        return inner + int(expr.params[0])
    if expr.name in ("sum", "correlation", "decay"):
        return inner + int(expr.params[0]) - 1
    return inner


def required_history(expr: AlphaExpr) -> int:
    """Days of data needed before the first defined position (1-based day)."""
    return lookback(expr) + 1


# ---------------------------------------------------------------------------
# Rolling operators
# ---------------------------------------------------------------------------


def _pad(values: np.ndarray, lead: int, p: int) -> np.ndarray:
    out = np.full((p,) + values.shape[1:], np.nan)
    out[lead:] = values
    return out


def _windows(x: np.ndarray, k: int) -> np.ndarray:
    """``[p-k+1, s, k]`` trailing windows."""
    return sliding_window_view(x, k, axis=0)


def delay(x: np.ndarray, k: int) -> np.ndarray:
    if k == 0:
        return x.copy()
    out = np.full_like(x, np.nan)
    out[k:] = x[:-k]
    return out


def rolling_sum(x: np.ndarray, k: int) -> np.ndarray:
    p = x.shape[0]
    if p < k:
        return np.full_like(x, np.nan)
    return _pad(_windows(x, k).sum(axis=-1), k - 1, p)


def rolling_correlation(x: np.ndarray, y: np.ndarray, k: int) -> np.ndarray:
    p = x.shape[0]
    if p < k or k < 2:
        return np.full_like(x, np.nan)
    wx, wy = _windows(x, k), _windows(y, k)
    dx = wx - wx.mean(axis=-1, keepdims=True)
    dy = wy - wy.mean(axis=-1, keepdims=True)
    sxy = (dx * dy).sum(axis=-1)
    sxx = (dx * dx).sum(axis=-1)
    syy = (dy * dy).sum(axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        r = sxy / np.sqrt(sxx * syy)
    r[~np.isfinite(r)] = np.nan
    return _pad(np.clip(r, -1.0, 1.0), k - 1, p)


def rsi(x: np.ndarray, k: int) -> np.ndarray:
    """Relative strength index from simple averages of the last ``k`` changes.

    ``100 - 100 / (1 + gain / loss)``; zero average loss gives 100, zero
    average gain gives 0 and a flat window gives 50.  Works on 1-D or
    ``[p, s]`` input; the first ``k`` rows are NaN.
    """
    x = np.asarray(x, dtype=float)
    squeeze = x.ndim == 1
    if squeeze:
        x = x[:, None]
    p = x.shape[0]
    out = np.full_like(x, np.nan)
    if p > k:
        change = np.diff(x, axis=0)
        w = _windows(change, k)
        gain = np.where(w > 0, w, 0.0).mean(axis=-1)
        loss = np.where(w < 0, -w, 0.0).mean(axis=-1)
        nan = np.isnan(w).any(axis=-1)
        with np.errstate(invalid="ignore", divide="ignore"):
            val = 100.0 - 100.0 / (1.0 + gain / loss)
        val = np.where(loss == 0, 100.0, val)
        val = np.where(gain == 0, 0.0, val)
        val = np.where((gain == 0) & (loss == 0), 50.0, val)
        val[nan] = np.nan
        out[k:] = val
    return out[:, 0] if squeeze else out


def decay(x: np.ndarray, k: int) -> np.ndarray:
    p = x.shape[0]
    if p < k:
        return np.full_like(x, np.nan)
    weights = np.arange(1, k + 1, dtype=float)
    return _pad(_windows(x, k) @ weights / weights.sum(), k - 1, p)


def _quantile_band(x: np.ndarray, q: float) -> tuple[np.ndarray, np.ndarray]:
    lo = np.full(x.shape[0], np.nan)
    hi = np.full(x.shape[0], np.nan)
    rows = ~np.all(np.isnan(x), axis=1)
    if rows.any():
        lo[rows] = np.nanquantile(x[rows], q, axis=1)
        hi[rows] = np.nanquantile(x[rows], 1.0 - q, axis=1)
    return lo[:, None], hi[:, None]


def cut_extremes(x: np.ndarray, q: float) -> np.ndarray:
    lo, hi = _quantile_band(x, q)
    return np.where((x < lo) | (x > hi), np.nan, x)


def cut_middle(x: np.ndarray, q: float) -> np.ndarray:
    lo, hi = _quantile_band(x, q)
    return np.where((x > lo) & (x < hi), np.nan, x)


def truncate(x: np.ndarray, limit: float) -> np.ndarray:
    pos, defined, _ = neutralize_normalize(x)
    clipped = np.clip(pos, -limit, limit)
    clipped[np.isnan(x)] = np.nan
    clipped[~defined] = np.nan
    return clipped


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------


def evaluate_signal(expr: AlphaExpr, panel: OhlcvPanel) -> np.ndarray:
    """Raw ``[p, s]`` signal of ``expr`` with NaN for undefined cells."""
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        out = _eval(expr, panel)
    out = np.array(np.broadcast_to(out, (panel.p, panel.s)), dtype=float)
    out[~np.isfinite(out)] = np.nan
    return out


def _eval(expr: AlphaExpr, panel: OhlcvPanel) -> np.ndarray:
    if isinstance(expr, Series):
        if expr.name not in SERIES_NAMES:
            raise ExpressionError(f"unknown series {expr.name!r}")
        return panel.series(expr.name)
    if isinstance(expr, Const):
        return np.full((panel.p, panel.s), float(expr.value))
    if isinstance(expr, Neg):
        return -_eval(expr.arg, panel)
    if isinstance(expr, BinOp):
        a, b = _eval(expr.left, panel), _eval(expr.right, panel)
        if expr.op == "+":
            return a + b
        if expr.op == "-":
            return a - b
        if expr.op == "*":
            return a * b
        if expr.op == "/":
            r = a / b
            r[b == 0] = np.nan
            return r
        raise ExpressionError(f"unknown operator {expr.op!r}")

    args = [_eval(a, panel) for a in expr.args]
    name, params = expr.name, expr.params
    if name == "delay":
        return delay(args[0], int(params[0]))
    if name == "sum":
        return rolling_sum(args[0], int(params[0]))
    if name == "correlation":
        return rolling_correlation(args[0], args[1], int(params[0]))
    if name == "rsi":
        return rsi(args[0], int(params[0]))
    if name == "sqrt":
        x = args[0]
        return np.where(x >= 0, np.sqrt(np.abs(x)), np.nan)
    if name == "abs":
        return np.abs(args[0])
    if name == "decay":
        return decay(args[0], int(params[0]))
    if name == "truncate":
        return truncate(args[0], params[0])
    if name == "cut_extremes":
        return cut_extremes(args[0], params[0])
    if name == "cut_middle":
        return cut_middle(args[0], params[0])
    raise ExpressionError(f"unknown function {name!r}")


def neutralize_normalize(raw: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Subtract the cross-sectional mean, then divide by the L1 norm.

    Returns ``(positions, defined, zero)``.  Rows without any defined cell are
    undefined (NaN).  Rows whose demeaned vector vanishes are all-zero and
    flagged in ``zero``.  Undefined cells in defined rows get position 0.
    """
    raw = np.asarray(raw, dtype=float)
    mask = ~np.isnan(raw)
    defined = mask.any(axis=1)
    count = mask.sum(axis=1)
    x = np.where(mask, raw, 0.0)
    mean = np.divide(x.sum(axis=1), count, out=np.zeros(len(count)), where=count > 0)
    demeaned = np.where(mask, x - mean[:, None], 0.0)
    l1 = np.abs(demeaned).sum(axis=1)
    scale = np.abs(x).sum(axis=1)
    zero = defined & (l1 <= 1e-12 * scale)
    ok = defined & ~zero
    pos = np.full(raw.shape, np.nan)
    pos[ok] = demeaned[ok] / l1[ok, None]
    pos[zero] = 0.0
    return pos, defined, zero


@dataclass(frozen=True, eq=False)
class PositionPanel:
    """Money positions ``[p, s]`` of one alpha or portfolio.

    ``defined[d]`` marks days with a position; undefined rows hold NaN.
    ``zero[d]`` flags defined days whose raw vector vanished after
    neutralization.
    """

    dates: np.ndarray
    tickers: tuple[str, ...]
    positions: np.ndarray
    defined: np.ndarray
    zero: np.ndarray = field(default=None)  # type: ignore[assignment]
    name: str = ""

    def __post_init__(self) -> None:
        pos = np.array(self.positions, dtype=float)
        defined = np.array(self.defined, dtype=bool)
        if pos.ndim != 2 or defined.shape != (pos.shape[0],):
            raise ValueError("positions must be [p, s] and defined must be [p]")
        zero = np.zeros_like(defined) if self.zero is None else np.array(self.zero, dtype=bool)
        for a in (pos, defined, zero):
            a.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "defined", defined)
        object.__setattr__(self, "zero", zero)

    @property
    def p(self) -> int:
        return self.positions.shape[0]

    @property
    def s(self) -> int:
        return self.positions.shape[1]

    @property
    def warmup(self) -> int:
        """0-based index of the first defined day (``p`` if none)."""
        idx = np.flatnonzero(self.defined)
        return int(idx[0]) if idx.size else self.p

    def scaled(self, factor: float) -> "PositionPanel":
        return PositionPanel(
            self.dates, self.tickers, self.positions * factor, self.defined, self.zero, self.name
        )


def positions_from_signal(
    raw: np.ndarray, dates: np.ndarray, tickers: tuple[str, ...], name: str = ""
) -> PositionPanel:
    pos, defined, zero = neutralize_normalize(raw)
    return PositionPanel(dates, tickers, pos, defined, zero, name)


def evaluate_alpha(expr: AlphaExpr | str, panel: OhlcvPanel, name: str = "") -> PositionPanel:
    """Evaluate ``expr`` and apply the obligatory neutralization and normalization."""
    if isinstance(expr, str):
        name = name or expr
        expr = parse(expr)
    raw = evaluate_signal(expr, panel)
    out = positions_from_signal(raw, panel.dates, panel.tickers, name or str(expr))
    if not out.defined.any():
        raise ExpressionError(
            f"alpha {out.name!r} is undefined on every day "
            f"(needs {required_history(expr)} days, panel has {panel.p})"
        )
    return out
