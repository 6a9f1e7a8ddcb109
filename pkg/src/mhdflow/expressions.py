"""Closed-form expression catalogue for boundary and initial data.

Data fields (densities, boundary velocity, initial velocity) are given by a
small declarative catalogue instead of arbitrary code, so configuration
files stay portable and reproducible:

scalar expressions
    constant(c)
    affine(c, ax, ay)              c + ax*x + ay*y
    gaussian(amp, x0, y0, sigma)   amp * exp(-((x-x0)^2+(y-y0)^2)/(2 sigma^2))
    gaussian(amp, x0, y0, sigma, base)    same plus a constant base
    trig(base, amp, kx, ky)        base + amp*cos(kx*pi*x)*cos(ky*pi*y)

vector expressions
    uniform(cx, cy)
    shear(c1, a1, k1, c2, a2, k2)  (c1 + a1*cos(k1*pi*y), c2 + a2*cos(k2*pi*x))
                                   divergence-free by construction
    pair(<scalar>; <scalar>)       independent components

All expressions evaluate vectorized on NumPy arrays.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class ScalarExpr:
    """Scalar field over the closed domain, with its catalogue spelling."""

    fn: Callable
    spec: str

    def __call__(self, x, y):
        return np.asarray(self.fn(np.asarray(x, dtype=float), np.asarray(y, dtype=float)), dtype=float)

    def __repr__(self):
        return f"ScalarExpr({self.spec})"


@dataclass(frozen=True)
class VectorExpr:
    """Vector field over the closed domain; returns shape (..., 2)."""

    fn: Callable
    spec: str

    def __call__(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        out = np.asarray(self.fn(x, y), dtype=float)
        return out

    def __repr__(self):
        return f"VectorExpr({self.spec})"


def constant(c: float) -> ScalarExpr:
    c = float(c)
    return ScalarExpr(lambda x, y: np.full(np.broadcast(x, y).shape, c), f"constant({c!r})")


def affine(c: float, ax: float, ay: float) -> ScalarExpr:
    c, ax, ay = float(c), float(ax), float(ay)
    return ScalarExpr(lambda x, y: c + ax * x + ay * y, f"affine({c!r}, {ax!r}, {ay!r})")


def gaussian(amp: float, x0: float, y0: float, sigma: float, base: float = 0.0) -> ScalarExpr:
    amp, x0, y0, sigma, base = map(float, (amp, x0, y0, sigma, base))
    if sigma <= 0:
        raise ValueError("gaussian needs sigma > 0")

    def fn(x, y):
        return base + amp * np.exp(-((x - x0) ** 2 + (y - y0) ** 2) / (2.0 * sigma**2))

    return ScalarExpr(fn, f"gaussian({amp!r}, {x0!r}, {y0!r}, {sigma!r}, {base!r})")


def trig(base: float, amp: float, kx: float, ky: float) -> ScalarExpr:
    base, amp, kx, ky = map(float, (base, amp, kx, ky))

    def fn(x, y):
        return base + amp * np.cos(kx * np.pi * x) * np.cos(ky * np.pi * y)

    return ScalarExpr(fn, f"trig({base!r}, {amp!r}, {kx!r}, {ky!r})")


def uniform(cx: float, cy: float) -> VectorExpr:
    cx, cy = float(cx), float(cy)

    def fn(x, y):
        shape = np.broadcast(x, y).shape
        out = np.empty(shape + (2,))
        out[..., 0] = cx
        out[..., 1] = cy
        return out

    return VectorExpr(fn, f"uniform({cx!r}, {cy!r})")


def shear(c1: float, a1: float, k1: float, c2: float, a2: float, k2: float) -> VectorExpr:
    """Divergence-free velocity: x-component varies in y only and vice versa."""
    c1, a1, k1, c2, a2, k2 = map(float, (c1, a1, k1, c2, a2, k2))

    def fn(x, y):
        shape = np.broadcast(x, y).shape
        out = np.empty(shape + (2,))
        out[..., 0] = c1 + a1 * np.cos(k1 * np.pi * y)
        out[..., 1] = c2 + a2 * np.cos(k2 * np.pi * x)
        return out

    return VectorExpr(fn, f"shear({c1!r}, {a1!r}, {k1!r}, {c2!r}, {a2!r}, {k2!r})")


def pair(sx: ScalarExpr, sy: ScalarExpr) -> VectorExpr:
    def fn(x, y):
        vx = sx(x, y)
        vy = sy(x, y)
        return np.stack(np.broadcast_arrays(vx, vy), axis=-1)

    return VectorExpr(fn, f"pair({sx.spec}; {sy.spec})")


_SCALAR_BUILDERS = {
    "constant": constant,
    "affine": affine,
    "gaussian": gaussian,
    "trig": trig,
}

_VECTOR_BUILDERS = {
    "uniform": uniform,
    "shear": shear,
}

_CALL_RE = re.compile(r"^\s*([a-z_]+)\s*\((.*)\)\s*$", re.DOTALL)


def _split_args(body: str, sep: str) -> list[str]:
    """Split at top level only (separators inside parentheses are kept)."""
    parts, depth, cur = [], 0, []
    for ch in body:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
            if depth < 0:
                raise ValueError(f"unbalanced parentheses in {body!r}")
        if ch == sep and depth == 0:
            parts.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    if depth != 0:
        raise ValueError(f"unbalanced parentheses in {body!r}")
    parts.append("".join(cur))
    return parts


def parse_scalar(text: str) -> ScalarExpr:
    """Parse a catalogue scalar expression, e.g. ``trig(1.0, 0.2, 1, 1)``."""
    m = _CALL_RE.match(text)
    if not m:
        raise ValueError(f"cannot parse scalar expression {text!r}")
    name, body = m.group(1), m.group(2)
    if name not in _SCALAR_BUILDERS:
        raise ValueError(f"unknown scalar expression {name!r} "
                         f"(choices: {sorted(_SCALAR_BUILDERS)})")
    args = [float(a) for a in _split_args(body, ",")] if body.strip() else []
    return _SCALAR_BUILDERS[name](*args)


def parse_vector(text: str) -> VectorExpr:
    """Parse a catalogue vector expression.

    ``pair`` takes two scalar expressions separated by a semicolon:
    ``pair(constant(0.5); trig(0, 0.1, 1, 1))``.
    """
    m = _CALL_RE.match(text)
    if not m:
        raise ValueError(f"cannot parse vector expression {text!r}")
    name, body = m.group(1), m.group(2)
    if name == "pair":
        comps = _split_args(body, ";")
        if len(comps) != 2:
            raise ValueError("pair(...) needs exactly two components separated by ';'")
        return pair(parse_scalar(comps[0]), parse_scalar(comps[1]))
    if name not in _VECTOR_BUILDERS:
        raise ValueError(f"unknown vector expression {name!r} "
                         f"(choices: {sorted(_VECTOR_BUILDERS) + ['pair']})")
    args = [float(a) for a in _split_args(body, ",")] if body.strip() else []
    return _VECTOR_BUILDERS[name](*args)
