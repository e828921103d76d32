"""Scalar fields on R^4, energy-space pairs, norms and inner products.

Fields carry a symmetry tag (radial / cylindrical about e1 / bicylindrical /
full), an optional pointwise decay exponent p (|f| <= C <x>^-p), and evaluate
on (N, 4) arrays of points.  Two families cover everything the laboratory
needs:

* :class:`FormulaField` wraps closed-form callables (optionally with an exact
  gradient; otherwise a 4th-order finite-difference fallback is used).
* :class:`PolyRadialField` represents sums of monomial * radial(|x|) terms;
  products, gradients and integrals of such fields are computed exactly in
  the angular variables, which is what makes the kernel-generator identities
  testable to near machine precision.

Sampled fields live on the cylindrical grids :class:`Grid2DCyl` /
:class:`Grid3DCyl` with piecewise-cubic interpolation and are serialized in a
self-describing .npz container (see README for the exact layout).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import RegularGridInterpolator

from .quadrature import (
    SYM_BICYL,
    SYM_CYL,
    SYM_FULL,
    SYM_RADIAL,
    QuadratureResult,
    QuadratureSpec,
    gauss_panels,
    geometric_breaks,
    integrate_callable,
    join_symmetry,
    moment,
)

_FD_STEP = 1e-3
# 4th-order central difference coefficients at offsets -2h..2h
_FD4_OFFSETS = np.array([-2.0, -1.0, 1.0, 2.0])
_FD4_COEFFS = np.array([1.0, -8.0, 8.0, -1.0]) / 12.0


class SymmetryMismatch(ValueError):
    pass


def _as_points(x) -> np.ndarray:
    X = np.atleast_2d(np.asarray(x, dtype=float))
    if X.shape[-1] != 4:
        raise ValueError("points must have shape (..., 4)")
    return X


class ScalarField:
    """A scalar function on R^4 with symmetry and decay metadata."""

    symmetry: str = SYM_FULL
    decay: float | None = None
    # coefficient A of the isotropic far-field f ~ A |x|^-decay, when known
    asymptote: float | None = None

    def evaluate(self, x) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, x):
        X = _as_points(x)
        v = self.evaluate(X)
        return v[0] if np.asarray(x).ndim == 1 else v

    def gradient(self, x) -> np.ndarray:
        """Gradient; finite-difference fallback (4th order, step 1e-3)."""
        X = _as_points(x)
        g = np.zeros_like(X)
        for ax in range(4):
            acc = np.zeros(X.shape[0])
            for off, cf in zip(_FD4_OFFSETS, _FD4_COEFFS):
                Xs = X.copy()
                Xs[:, ax] += off * _FD_STEP
                acc += cf * self.evaluate(Xs)
            g[:, ax] = acc / _FD_STEP
        return g

    def poly_radial_terms(self):
        """Monomial-radial term list when the field has that structure."""
        return None

    # -- algebra (value-level closures; gradients by product/sum rule) -------

    def __mul__(self, other):
        if isinstance(other, ScalarField):
            return product_field(self, other)
        return scale_field(self, float(other))

    __rmul__ = __mul__

    def __add__(self, other):
        return sum_field([self, other])

    def __neg__(self):
        return scale_field(self, -1.0)

    def __sub__(self, other):
        return sum_field([self, other], [1.0, -1.0])


@dataclass
class FormulaField(ScalarField):
    """Closed-form field: fn maps (N, 4) points to N values."""

    fn: object
    grad: object = None
    symmetry: str = SYM_FULL
    decay: float | None = None
    asymptote: float | None = None
    name: str = ""

    def evaluate(self, x):
        return np.asarray(self.fn(_as_points(x)), dtype=float)

    def gradient(self, x):
        if self.grad is None:
            return super().gradient(x)
        return np.asarray(self.grad(_as_points(x)), dtype=float)


def zero_field() -> FormulaField:
    return FormulaField(lambda X: np.zeros(X.shape[0]), lambda X: np.zeros_like(X),
                        symmetry=SYM_RADIAL, decay=100.0, asymptote=0.0, name="0")


def scale_field(f: ScalarField, c: float) -> FormulaField:
    return FormulaField(lambda X: c * f.evaluate(X), lambda X: c * f.gradient(X),
                        symmetry=f.symmetry, decay=f.decay,
                        asymptote=None if f.asymptote is None else c * f.asymptote)


def sum_field(fields, coeffs=None) -> FormulaField:
    coeffs = [1.0] * len(fields) if coeffs is None else list(coeffs)

    def fn(X):
        return sum(c * f.evaluate(X) for c, f in zip(coeffs, fields))

    def grad(X):
        return sum(c * f.gradient(X) for c, f in zip(coeffs, fields))

    return FormulaField(fn, grad,
                        symmetry=join_symmetry(*[f.symmetry for f in fields]),
                        decay=min((f.decay for f in fields if f.decay is not None),
                                  default=None))


def product_field(f: ScalarField, g: ScalarField) -> FormulaField:
    def fn(X):
        return f.evaluate(X) * g.evaluate(X)

    def grad(X):
        return (f.gradient(X) * g.evaluate(X)[:, None]
                + g.gradient(X) * f.evaluate(X)[:, None])

    dec = None
    if f.decay is not None and g.decay is not None:
        dec = f.decay + g.decay
    return FormulaField(fn, grad, symmetry=join_symmetry(f.symmetry, g.symmetry),
                        decay=dec)


@dataclass
class AffineField(ScalarField):
    """prefactor * f(A x + b) for a linear map A; exact chain-rule gradient."""

    base: ScalarField
    matrix: np.ndarray
    shift: np.ndarray
    prefactor: float = 1.0
    symmetry: str = SYM_FULL
    decay: float | None = None

    def _map(self, X):
        return X @ self.matrix.T + self.shift

    def evaluate(self, x):
        return self.prefactor * self.base.evaluate(self._map(_as_points(x)))

    def gradient(self, x):
        g = self.base.gradient(self._map(_as_points(x)))
        return self.prefactor * (g @ self.matrix)


# ---------------------------------------------------------------------------
# monomial * radial fields with exact angular reduction
# ---------------------------------------------------------------------------

@dataclass
class RadialPart:
    """Radial profile with derivatives: callables of r >= 0 (vectorized)."""

    f: object
    df: object = None
    d2f: object = None

    def require_df(self):
        if self.df is None:
            raise ValueError("radial part lacks a first derivative")
        return self.df


def _rp_product(a: RadialPart, b: RadialPart) -> RadialPart:
    df = None
    if a.df is not None and b.df is not None:
        df = lambda r: a.df(r) * b.f(r) + a.f(r) * b.df(r)
    return RadialPart(lambda r: a.f(r) * b.f(r), df)


def _rp_combo(parts_coeffs) -> RadialPart:
    """Linear combination sum c_i * S_i of radial parts."""
    parts_coeffs = list(parts_coeffs)

    def f(r):
        return sum(c * p.f(r) for c, p in parts_coeffs)

    def df(r):
        return sum(c * p.require_df()(r) for c, p in parts_coeffs)

    return RadialPart(f, df)


class PolyRadialField(ScalarField):
    """Sum of terms x^m * S(|x|) with integer exponent vectors m.

    Closed under products, symmetry generators and gradient pairings, with
    all angular integrals done by exact sphere moments.
    """

    def __init__(self, terms, decay=None, asymptote=None, name=""):
        self.terms = [(np.asarray(m, dtype=int), p) for m, p in terms]
        self.decay = decay
        self.asymptote = asymptote
        self.name = name
        self.is_zero = False
        axes = set()
        for m, _ in self.terms:
            axes |= {i for i in range(4) if m[i] > 0}
        if axes <= set():
            self.symmetry = SYM_RADIAL
        elif axes <= {0}:
            self.symmetry = SYM_CYL
        elif axes <= {0, 3}:
            self.symmetry = SYM_BICYL
        else:
            self.symmetry = SYM_FULL

    def evaluate(self, x):
        X = _as_points(x)
        r = np.linalg.norm(X, axis=1)
        out = np.zeros(X.shape[0])
        for m, p in self.terms:
            mono = np.ones(X.shape[0])
            for i in range(4):
                if m[i]:
                    mono *= X[:, i] ** m[i]
            out += mono * p.f(r)
        return out

    def gradient(self, x):
        X = _as_points(x)
        r = np.linalg.norm(X, axis=1)
        rs = np.where(r > 0, r, 1.0)
        g = np.zeros_like(X)
        for m, p in self.terms:
            mono = np.ones(X.shape[0])
            for i in range(4):
                if m[i]:
                    mono *= X[:, i] ** m[i]
            radial = p.f(r)
            dradial = p.require_df()(r)
            for j in range(4):
                if m[j]:
                    mono_dj = np.ones(X.shape[0])
                    for i in range(4):
                        e = m[i] - (1 if i == j else 0)
                        if e:
                            mono_dj *= X[:, i] ** e
                    g[:, j] += m[j] * mono_dj * radial
                g[:, j] += mono * X[:, j] * dradial / rs
        return g

    def poly_radial_terms(self):
        return self.terms

    def product(self, other: "PolyRadialField") -> "PolyRadialField":
        terms = []
        for m1, p1 in self.terms:
            for m2, p2 in other.terms:
                terms.append((m1 + m2, _rp_product(p1, p2)))
        dec = None
        if self.decay is not None and other.decay is not None:
            dec = self.decay + other.decay
        return PolyRadialField(terms, decay=dec)

    def grad_dot(self, other: "PolyRadialField") -> "PolyRadialField":
        """Exact monomial-radial representation of grad(self) . grad(other)."""
        terms = []
        for m, p in self.terms:
            S, dS = p.f, p.require_df()
            for n, q in other.terms:
                T, dT = q.f, q.require_df()
                for j in range(4):
                    if m[j] and n[j]:
                        c = float(m[j] * n[j])
                        terms.append((m + n - 2 * _unit(j),
                                      RadialPart(_scaled(_prod_ff(S, T), c))))
                mm, nn = int(m.sum()), int(n.sum())
                terms.append((m + n, RadialPart(
                    lambda r, S=S, dS=dS, T=T, dT=dT, mm=mm, nn=nn:
                        _safe_div(mm * S(r) * dT(r) + nn * dS(r) * T(r), r)
                        + dS(r) * dT(r))))
        dec = None
        if self.decay is not None and other.decay is not None:
            dec = self.decay + other.decay + 2
        return PolyRadialField(terms, decay=dec)

    def integrate_exact(self, r_max=None, spec: QuadratureSpec | None = None,
                        r_power: int = 0) -> QuadratureResult:
        """Integral over R^4 via sphere moments and adaptive 1D quadrature."""
        spec = spec or QuadratureSpec()
        total, err = 0.0, 0.0
        for m, p in self.terms:
            ang = moment(m, 4)
            if ang == 0.0:
                continue
            k = 3 + int(m.sum()) + r_power
            if r_max is None:
                v, e = quad(lambda r: p.f(r) * r**k, 0.0, np.inf, limit=200)
            else:
                v, e = quad(lambda r: p.f(r) * r**k, 0.0, r_max, limit=200)
            total += ang * v
            err += abs(ang) * e
        conv = err <= max(spec.abs_tol, spec.rel_tol * abs(total))
        return QuadratureResult(total, err, conv)


def _unit(j):
    e = np.zeros(4, dtype=int)
    e[j] = 1
    return e


def _prod_ff(S, T):
    return lambda r: S(r) * T(r)


def _scaled(f, c):
    return lambda r: c * f(r)


def _safe_div(num, r):
    r = np.asarray(r, dtype=float)
    return num / np.where(r > 0, r, 1.0)


def poly_radial(parts, decay=None, asymptote=None, name="") -> PolyRadialField:
    """Build a PolyRadialField from (exponents, f, df[, d2f]) tuples."""
    terms = []
    for entry in parts:
        m, fns = entry[0], entry[1:]
        terms.append((m, RadialPart(*fns)))
    return PolyRadialField(terms, decay=decay, asymptote=asymptote, name=name)


# ---------------------------------------------------------------------------
# sampled fields on cylindrical grids
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Grid2DCyl:
    """Uniform grid in (x1, rbar) for fields of (x1, |(x2,x3,x4)|)."""

    x1_min: float
    x1_max: float
    n1: int
    r_max: float
    nr: int

    def __post_init__(self):
        if self.x1_max <= self.x1_min or self.r_max <= 0:
            raise ValueError("empty grid ranges")
        if self.n1 < 4 or self.nr < 4:
            raise ValueError("need at least 4 nodes per axis")

    @property
    def x1(self):
        return np.linspace(self.x1_min, self.x1_max, self.n1)

    @property
    def r(self):
        return np.linspace(0.0, self.r_max, self.nr)

    @property
    def h1(self):
        return (self.x1_max - self.x1_min) / (self.n1 - 1)

    @property
    def hr(self):
        return self.r_max / (self.nr - 1)


@dataclass(frozen=True)
class Grid3DCyl:
    """Uniform grid in (x1, x4, rho) for fields of (x1, x4, |(x2,x3)|)."""

    x1_min: float
    x1_max: float
    n1: int
    x4_min: float
    x4_max: float
    n4: int
    r_max: float
    nr: int

    def __post_init__(self):
        if (self.x1_max <= self.x1_min or self.x4_max <= self.x4_min
                or self.r_max <= 0):
            raise ValueError("empty grid ranges")

    @property
    def x1(self):
        return np.linspace(self.x1_min, self.x1_max, self.n1)

    @property
    def x4(self):
        return np.linspace(self.x4_min, self.x4_max, self.n4)

    @property
    def r(self):
        return np.linspace(0.0, self.r_max, self.nr)


def _stencil_derivative(values, h, axis):
    """4th-order interior derivative, one-sided 2nd-order at the edges."""
    d = np.gradient(values, h, axis=axis, edge_order=2)
    v = np.moveaxis(values, axis, 0)
    out = np.moveaxis(d, axis, 0)
    if v.shape[0] >= 5:
        out[2:-2] = (v[:-4] - 8 * v[1:-3] + 8 * v[3:-1] - v[4:]) / (12 * h)
    return np.moveaxis(out, 0, axis)


class SampledField(ScalarField):
    """Field sampled on a cylindrical grid with cubic interpolation.

    Evaluation outside the grid returns 0 (fields here decay); gradients come
    from stored gradient grids when available, otherwise from 4th-order
    stencils on the samples (one-sided at the boundary; this is recorded in
    ``meta['boundary_stencil']``).
    """

    def __init__(self, grid, values, gradient_values=None, decay=None,
                 meta=None):
        self.grid = grid
        self.values = np.asarray(values, dtype=float)
        self.gradient_values = gradient_values
        self.decay = decay
        self.asymptote = None
        self.meta = dict(meta or {})
        if isinstance(grid, Grid2DCyl):
            self.symmetry = SYM_CYL
            axes = (grid.x1, grid.r)
        elif isinstance(grid, Grid3DCyl):
            self.symmetry = SYM_BICYL
            axes = (grid.x1, grid.x4, grid.r)
        else:
            raise TypeError("unsupported grid type")
        method = "cubic" if min(len(a) for a in axes) >= 4 else "linear"
        self._interp = RegularGridInterpolator(
            axes, self.values, method=method, bounds_error=False, fill_value=0.0)
        self._grad_interp = None

    def _coords(self, X):
        if self.symmetry == SYM_CYL:
            rbar = np.linalg.norm(X[:, 1:], axis=1)
            return np.stack([X[:, 0], rbar], axis=1)
        rho = np.linalg.norm(X[:, 1:3], axis=1)
        return np.stack([X[:, 0], X[:, 3], rho], axis=1)

    def evaluate(self, x):
        return self._interp(self._coords(_as_points(x)))

    def _ensure_grad(self):
        if self._grad_interp is not None:
            return
        g = self.grid
        if self.gradient_values is None:
            if self.symmetry == SYM_CYL:
                d1 = _stencil_derivative(self.values, g.h1, 0)
                dr = _stencil_derivative(self.values, g.hr, 1)
                self.gradient_values = (d1, dr)
            else:
                h1 = (g.x1_max - g.x1_min) / (g.n1 - 1)
                h4 = (g.x4_max - g.x4_min) / (g.n4 - 1)
                hr = g.r_max / (g.nr - 1)
                self.gradient_values = (
                    _stencil_derivative(self.values, h1, 0),
                    _stencil_derivative(self.values, h4, 1),
                    _stencil_derivative(self.values, hr, 2),
                )
            self.meta.setdefault("boundary_stencil", "one-sided")
        axes = ((self.grid.x1, self.grid.r) if self.symmetry == SYM_CYL
                else (self.grid.x1, self.grid.x4, self.grid.r))
        method = "cubic" if min(len(a) for a in axes) >= 4 else "linear"
        self._grad_interp = [
            RegularGridInterpolator(axes, gv, method=method,
                                    bounds_error=False, fill_value=0.0)
            for gv in self.gradient_values
        ]

    def gradient(self, x):
        X = _as_points(x)
        self._ensure_grad()
        C = self._coords(X)
        out = np.zeros_like(X)
        if self.symmetry == SYM_CYL:
            d1 = self._grad_interp[0](C)
            dr = self._grad_interp[1](C)
            rbar = C[:, 1]
            unit = np.zeros((X.shape[0], 3))
            mask = rbar > 0
            unit[mask] = X[mask, 1:] / rbar[mask, None]
            out[:, 0] = d1
            out[:, 1:] = dr[:, None] * unit
        else:
            d1 = self._grad_interp[0](C)
            d4 = self._grad_interp[1](C)
            dr = self._grad_interp[2](C)
            rho = C[:, 2]
            unit = np.zeros((X.shape[0], 2))
            mask = rho > 0
            unit[mask] = X[mask, 1:3] / rho[mask, None]
            out[:, 0] = d1
            out[:, 3] = d4
            out[:, 1:3] = dr[:, None] * unit
        return out


def save_field(path, f: SampledField):
    """Write the self-describing .npz container (layout documented in README)."""
    g = f.grid
    meta = dict(f.meta)
    meta["decay"] = f.decay if f.decay is not None else np.nan
    if isinstance(g, Grid2DCyl):
        kind = "cyl2d"
        axes = dict(x1_min=g.x1_min, x1_max=g.x1_max, n1=g.n1,
                    r_max=g.r_max, nr=g.nr)
    else:
        kind = "cyl3d"
        axes = dict(x1_min=g.x1_min, x1_max=g.x1_max, n1=g.n1,
                    x4_min=g.x4_min, x4_max=g.x4_max, n4=g.n4,
                    r_max=g.r_max, nr=g.nr)
    payload = dict(kind=kind, samples=f.values, decay=meta["decay"], **axes)
    if f.gradient_values is not None:
        for i, gv in enumerate(f.gradient_values):
            payload[f"grad_{i}"] = gv
    np.savez(path, **payload)


def load_field(path) -> SampledField:
    with np.load(path, allow_pickle=False) as z:
        kind = str(z["kind"])
        if kind == "cyl2d":
            grid = Grid2DCyl(float(z["x1_min"]), float(z["x1_max"]), int(z["n1"]),
                             float(z["r_max"]), int(z["nr"]))
        elif kind == "cyl3d":
            grid = Grid3DCyl(float(z["x1_min"]), float(z["x1_max"]), int(z["n1"]),
                             float(z["x4_min"]), float(z["x4_max"]), int(z["n4"]),
                             float(z["r_max"]), int(z["nr"]))
        else:
            raise ValueError(f"unknown container kind {kind!r}")
        grads = []
        i = 0
        while f"grad_{i}" in z:
            grads.append(z[f"grad_{i}"])
            i += 1
        decay = float(z["decay"])
        return SampledField(grid, z["samples"],
                            gradient_values=tuple(grads) or None,
                            decay=None if math.isnan(decay) else decay)


def save_pair(path, p: "FieldPair", grid) -> None:
    """Sample an energy-space pair on a grid and write one container."""
    first = p.first if isinstance(p.first, SampledField) else \
        _sample_on(p.first, grid)
    second = p.second if isinstance(p.second, SampledField) else \
        _sample_on(p.second, grid)
    g = first.grid
    payload = dict(kind="pair_cyl2d", samples_first=first.values,
                   samples_second=second.values,
                   x1_min=g.x1_min, x1_max=g.x1_max, n1=g.n1,
                   r_max=g.r_max, nr=g.nr)
    np.savez(path, **payload)


def load_pair(path) -> "FieldPair":
    with np.load(path, allow_pickle=False) as z:
        if str(z["kind"]) != "pair_cyl2d":
            raise ValueError("not a pair container")
        grid = Grid2DCyl(float(z["x1_min"]), float(z["x1_max"]), int(z["n1"]),
                         float(z["r_max"]), int(z["nr"]))
        return FieldPair(SampledField(grid, z["samples_first"]),
                         SampledField(grid, z["samples_second"]))


def _sample_on(f: ScalarField, grid) -> SampledField:
    X1, RB = np.meshgrid(grid.x1, grid.r, indexing="ij")
    P = np.zeros((X1.size, 4))
    P[:, 0] = X1.ravel()
    P[:, 1] = RB.ravel()
    return SampledField(grid, f.evaluate(P).reshape(X1.shape), decay=f.decay)


def load_field_csv(path) -> SampledField:
    """Plain-text import: header '# cyl2d' then rows x1,r,value (row-major)."""
    with open(path) as fh:
        rows = [row for row in csv.reader(fh)
                if row and not row[0].lstrip().startswith("#")]
    data = np.asarray(rows, dtype=float)
    x1 = np.unique(data[:, 0])
    r = np.unique(data[:, 1])
    if len(x1) * len(r) != data.shape[0]:
        raise ValueError("CSV rows do not form a full x1 x r grid")
    vals = data[:, 2].reshape(len(x1), len(r))
    grid = Grid2DCyl(x1[0], x1[-1], len(x1), r[-1], len(r))
    return SampledField(grid, vals)


# ---------------------------------------------------------------------------
# pairs, norms, inner products
# ---------------------------------------------------------------------------

@dataclass
class FieldPair:
    """(Hdot1 component, L2 component) element of the energy space."""

    first: ScalarField
    second: ScalarField

    def __post_init__(self):
        self.symmetry = join_symmetry(self.first.symmetry, self.second.symmetry)
        _check_compatible(self.first, self.second)

    def scaled(self, c: float) -> "FieldPair":
        return FieldPair(scale_field(self.first, c), scale_field(self.second, c))

    def plus(self, other: "FieldPair", coeff: float = 1.0) -> "FieldPair":
        return FieldPair(sum_field([self.first, other.first], [1.0, coeff]),
                         sum_field([self.second, other.second], [1.0, coeff]))


def zero_pair() -> FieldPair:
    return FieldPair(zero_field(), zero_field())


def _check_compatible(*fields):
    tags = [f.symmetry for f in fields]
    if SYM_FULL in tags and any(t != SYM_FULL for t in tags):
        raise SymmetryMismatch(
            "cannot combine a full-4D field with a reduced-symmetry field; "
            f"tags = {tags}")


def _pair_decay(f, g, extra=0.0):
    if f.decay is None or g.decay is None:
        return None
    return f.decay + g.decay + extra


def integrate_field(f: ScalarField, spec: QuadratureSpec | None = None,
                    x1_range=None) -> QuadratureResult:
    """Integral of f over R^4 (exact angular path for monomial-radial fields)."""
    spec = spec or QuadratureSpec()
    terms = f.poly_radial_terms()
    if terms is not None and x1_range is None:
        return f.integrate_exact(r_max=spec.r_max, spec=spec)
    return integrate_callable(f.evaluate, f.symmetry, spec, decay=f.decay,
                              x1_range=x1_range)


def inner_l2(f: ScalarField, g: ScalarField,
             spec: QuadratureSpec | None = None, x1_range=None) -> float:
    spec = spec or QuadratureSpec()
    tf, tg = f.poly_radial_terms(), g.poly_radial_terms()
    if tf is not None and tg is not None and x1_range is None:
        return f.product(g).integrate_exact(r_max=spec.r_max, spec=spec).value
    _check_compatible(f, g)
    sym = join_symmetry(f.symmetry, g.symmetry)
    return integrate_callable(lambda X: f.evaluate(X) * g.evaluate(X), sym,
                              spec, decay=_pair_decay(f, g),
                              x1_range=x1_range).value


def inner_hdot1(f: ScalarField, g: ScalarField,
                spec: QuadratureSpec | None = None, x1_range=None) -> float:
    spec = spec or QuadratureSpec()
    tf, tg = f.poly_radial_terms(), g.poly_radial_terms()
    if tf is not None and tg is not None and x1_range is None:
        return f.grad_dot(g).integrate_exact(r_max=spec.r_max, spec=spec).value
    _check_compatible(f, g)
    sym = join_symmetry(f.symmetry, g.symmetry)
    return integrate_callable(
        lambda X: np.einsum("ij,ij->i", f.gradient(X), g.gradient(X)), sym,
        spec, decay=_pair_decay(f, g, 2.0), x1_range=x1_range).value


def norm_l2(f: ScalarField, spec: QuadratureSpec | None = None) -> float:
    return math.sqrt(max(inner_l2(f, f, spec), 0.0))


def norm_hdot1(f: ScalarField, spec: QuadratureSpec | None = None) -> float:
    return math.sqrt(max(inner_hdot1(f, f, spec), 0.0))


def inner_pair_l2(p: FieldPair, q: FieldPair,
                  spec: QuadratureSpec | None = None) -> float:
    """Componentwise L2 pairing (f1, g1)_L2 + (f2, g2)_L2."""
    return (inner_l2(p.first, q.first, spec) + inner_l2(p.second, q.second, spec))


def inner_pair_h(p: FieldPair, q: FieldPair,
                 spec: QuadratureSpec | None = None) -> float:
    """Energy-space pairing (f1, g1)_Hdot1 + (f2, g2)_L2."""
    return (inner_hdot1(p.first, q.first, spec)
            + inner_l2(p.second, q.second, spec))


def norm_pair(p: FieldPair, spec: QuadratureSpec | None = None) -> float:
    return math.sqrt(max(inner_pair_h(p, p, spec), 0.0))


def pairing_block(rows, cols, kind: str, spec: QuadratureSpec | None = None,
                  x1_range=None) -> np.ndarray:
    """Matrix of pairings (rows_i, cols_j) in one shared quadrature pass.

    kind "l2" pairs componentwise in L2, kind "h" uses the energy pairing
    (Hdot1 on first components, L2 on second).  Every field is evaluated
    once per quadrature chunk, so the cost is linear in the basis size.
    Symmetric square blocks can be requested with rows is cols.
    """
    spec = spec or QuadratureSpec()
    if kind not in ("l2", "h"):
        raise ValueError("kind must be 'l2' or 'h'")
    same = rows is cols
    nr, nc = len(rows), len(cols)
    if nr == 0 or nc == 0:
        return np.zeros((nr, nc))
    every = list(rows) + ([] if same else list(cols))
    _check_compatible(*[p.first for p in every])
    sym = join_symmetry(*[p.symmetry for p in every])

    index = [(i, j) for i in range(nr)
             for j in range((i if same else 0), nc)]

    def fn(X):
        if kind == "h":
            r1 = [p.first.gradient(X) for p in rows]
            c1 = r1 if same else [p.first.gradient(X) for p in cols]
        else:
            r1 = [p.first.evaluate(X) for p in rows]
            c1 = r1 if same else [p.first.evaluate(X) for p in cols]
        r2 = [p.second.evaluate(X) for p in rows]
        c2 = r2 if same else [p.second.evaluate(X) for p in cols]
        out = np.empty((X.shape[0], len(index)))
        for col_id, (i, j) in enumerate(index):
            if kind == "h":
                out[:, col_id] = (np.einsum("ij,ij->i", r1[i], c1[j])
                                  + r2[i] * c2[j])
            else:
                out[:, col_id] = r1[i] * c1[j] + r2[i] * c2[j]
        return out

    vals = np.asarray(integrate_callable(fn, sym, spec,
                                         x1_range=x1_range).value)
    M = np.zeros((nr, nc))
    for col_id, (i, j) in enumerate(index):
        M[i, j] = vals[col_id]
        if same:
            M[j, i] = vals[col_id]
    return M


def norm_l4(f: ScalarField, spec: QuadratureSpec | None = None) -> float:
    spec = spec or QuadratureSpec()
    dec = None if f.decay is None else 4 * f.decay
    v = integrate_callable(lambda X: f.evaluate(X) ** 4, f.symmetry, spec,
                           decay=dec).value
    return max(v, 0.0) ** 0.25


def hardy_sobolev_check(f: ScalarField,
                        spec: QuadratureSpec | None = None) -> tuple:
    """Ratios (||f||_L4 / ||grad f||_L2, ||f/|x|||_L2 / ||grad f||_L2)."""
    spec = spec or QuadratureSpec()
    gnorm = norm_hdot1(f, spec)
    if gnorm == 0.0:
        return (0.0, 0.0)
    l4 = norm_l4(f, spec)

    def over_x2(X):
        r2 = np.maximum(np.sum(X * X, axis=1), 1e-300)
        return f.evaluate(X) ** 2 / r2

    dec = None if f.decay is None else 2 * f.decay + 2
    hardy = math.sqrt(max(integrate_callable(over_x2, f.symmetry, spec,
                                             decay=dec).value, 0.0))
    return (l4 / gnorm, hardy / gnorm)


def radial_profile_quadrature(fn, r_max: float, nodes: int = 24) -> float:
    """2 pi^2 * int_0^R fn(r) r^3 dr on geometric panels (radial fields)."""
    r, w = gauss_panels(geometric_breaks(r_max), nodes)
    return 2.0 * math.pi**2 * float(np.sum(fn(r) * r**3 * w))
