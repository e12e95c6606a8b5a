"""Uniform 2-D lattices, ball stencils, grid fields and initial guesses.

Domains are the square (-1,1)^2 style box and the L-shape obtained by
removing the closed upper-right quadrant.  Everything outside the interior
mask carries the value 0 (homogeneous Dirichlet extension).
"""

from __future__ import annotations

import ast
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.integrate


class ConfigError(ValueError):
    """Invalid domain / stencil / experiment configuration."""


@dataclass(frozen=True)
class GridDomain:
    nx: int
    ny: int
    h: float
    origin: tuple[float, float]
    interior_mask: np.ndarray  # bool, shape (ny, nx); True = unknown
    shape_tag: str

    @property
    def n_interior(self) -> int:
        return int(self.interior_mask.sum())

    def coords(self) -> tuple[np.ndarray, np.ndarray]:
        """Node coordinates (X, Y), each shaped (ny, nx)."""
        x0, y0 = self.origin
        x = x0 + self.h * np.arange(self.nx)
        y = y0 + self.h * np.arange(self.ny)
        return np.meshgrid(x, y)


@dataclass(frozen=True)
class Stencil:
    """Integer offsets (dy, dx) covering the punctured ball of radius r."""

    offsets: np.ndarray  # shape (m, 2), int
    r: float
    weight: float  # C_h = h^2 / (D_{2,p} * pi * r^(p+2))
    d2p: float

    @property
    def margin(self) -> int:
        return int(np.max(np.abs(self.offsets)))


@dataclass
class GridFunction:
    values: np.ndarray  # shape (ny, nx), row 0 = smallest y
    domain: GridDomain

    def copy(self) -> "GridFunction":
        return GridFunction(self.values.copy(), self.domain)


def build_domain(shape_tag: str, side_length: float, h: float) -> GridDomain:
    """Node lattice over a box of the given side with spacing h.

    shape_tag 'square' keeps all strictly inner nodes; 'lshape' additionally
    pins every node with x >= 0 and y >= 0 (the notch, reentrant edges
    included) to zero.
    """
    if shape_tag not in ("square", "lshape"):
        raise ConfigError(f"unknown shape_tag {shape_tag!r}")
    if h <= 0 or side_length <= 0:
        raise ConfigError("side_length and h must be positive")
    ratio = side_length / h
    n = round(ratio)
    if abs(ratio - n) > 1e-9 * max(1.0, ratio):
        raise ConfigError(f"side_length/h = {ratio} is not integral")
    nx = ny = n + 1
    half = side_length / 2.0
    origin = (-half, -half)
    x = origin[0] + h * np.arange(nx)
    y = origin[1] + h * np.arange(ny)
    X, Y = np.meshgrid(x, y)
    tol = 1e-12 * max(1.0, side_length)
    mask = (X > origin[0] + tol) & (X < half - tol) & \
           (Y > origin[1] + tol) & (Y < half - tol)
    if shape_tag == "lshape":
        mask &= ~((X >= -tol) & (Y >= -tol))
    return GridDomain(nx=nx, ny=ny, h=h, origin=origin,
                      interior_mask=mask, shape_tag=shape_tag)


def mean_value_constant(p: float) -> float:
    """The dimensional constant D_{2,p} of the mean-value operator.

    Defined through the disk integral of |e1 . w|^p,
        D_{2,p} = (1/(2 pi)) * int_{B_1(0)} |w_1|^p dw
                = (2 / (pi (p+2))) * int_0^{pi/2} cos(t)^p dt,
    evaluated by adaptive quadrature.  For p = 2 this gives exactly 1/8,
    which makes the operator consistent with the classical Laplacian.
    """
    integral, _ = scipy.integrate.quad(lambda t: math.cos(t) ** p, 0.0, math.pi / 2)
    return 2.0 * integral / (math.pi * (p + 2.0))


def build_stencil(domain: GridDomain, r: float, p: float,
                  d2p: float | None = None) -> Stencil:
    """All integer offsets with Euclidean length in (0, r] plus the weight.

    The weight is C_h = h^2 / (D_{2,p} * pi * r^(p+2)); D_{2,p} defaults to
    the quadrature value of mean_value_constant and may be overridden for
    reproducing runs with a different normalization.
    """
    h = domain.h
    if r < h:
        raise ConfigError(f"mean value radius r={r} smaller than spacing h={h}")
    m = int(math.floor(r / h + 1e-12))
    offsets = []
    for dy in range(-m, m + 1):
        for dx in range(-m, m + 1):
            if dx == 0 and dy == 0:
                continue
            if math.hypot(dx * h, dy * h) <= r * (1 + 1e-12):
                offsets.append((dy, dx))
    if d2p is None:
        d2p = mean_value_constant(p)
    weight = h ** 2 / (d2p * math.pi * r ** (p + 2))
    return Stencil(offsets=np.array(offsets, dtype=int), r=r,
                   weight=weight, d2p=d2p)


def _ex1(X, Y):
    return -(1 - 2 * np.abs(X + 0.5)) * (1 - 2 * np.abs(Y + 0.5)) \
        * (1 - np.abs(X)) * (1 - np.abs(Y))


def _ex2(X, Y):
    return 100.0 * (X + 1) * (Y + 1) * (X - 1) * (Y - 1) * (0.0625 - X ** 2 - Y ** 2)


def eval_initial_guess(tag: str, domain: GridDomain,
                       expression: str | None = None) -> GridFunction:
    """Evaluate a named or user-supplied initial guess on the lattice.

    No normalization is applied; values at non-interior nodes are pinned
    to 0.
    """
    X, Y = domain.coords()
    if tag == "ex1":
        vals = _ex1(X, Y)
    elif tag == "ex2":
        vals = _ex2(X, Y)
    elif tag == "expression":
        if not expression:
            raise ConfigError("initial guess tag 'expression' needs an expression")
        vals = eval_expression(expression, X, Y)
    else:
        raise ConfigError(f"unknown initial guess tag {tag!r}")
    vals = np.where(domain.interior_mask, vals, 0.0)
    return GridFunction(vals.astype(float), domain)


_ALLOWED_BINOPS = {
    ast.Add: np.add,
    ast.Sub: np.subtract,
    ast.Mult: np.multiply,
    ast.Div: np.divide,
    ast.Pow: np.power,
}


def eval_expression(expr: str, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Evaluate a small arithmetic expression over x1, x2.

    Supported: x1, x2, numeric literals, + - * / **, unary minus, abs(.),
    and parentheses.  Anything else raises ConfigError.
    """
    try:
        tree = ast.parse(expr, mode="eval")
    except SyntaxError as exc:
        raise ConfigError(f"cannot parse expression: {exc}") from exc

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name):
            if node.id == "x1":
                return X
            if node.id == "x2":
                return Y
            raise ConfigError(f"unknown name {node.id!r} in expression")
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = ev(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.BinOp) and type(node.op) in _ALLOWED_BINOPS:
            return _ALLOWED_BINOPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) \
                and node.func.id == "abs" and len(node.args) == 1 and not node.keywords:
            return np.abs(ev(node.args[0]))
        raise ConfigError(f"disallowed syntax in expression: {ast.dump(node)}")

    return np.asarray(ev(tree), dtype=float)


def save_snapshot(path, gf: GridFunction) -> None:
    """Plain-text CSV matrix, ny rows x nx columns, row 0 = smallest y."""
    np.savetxt(path, gf.values, delimiter=",")


def load_snapshot(path, domain: GridDomain) -> GridFunction:
    vals = np.loadtxt(path, delimiter=",", ndmin=2)
    if vals.shape != (domain.ny, domain.nx):
        raise ConfigError(
            f"snapshot shape {vals.shape} does not match domain "
            f"({domain.ny}, {domain.nx})")
    vals = np.where(domain.interior_mask, vals, 0.0)
    return GridFunction(vals, domain)
