"""Model boundary geometries with an explicitly diagonalizable tangential operator A.

Three kinds are provided:

* ``matrix``: X' is a point (n = 1) and A is a finite selfadjoint matrix.
* ``circle``: X' = S^1 with A = -i d/dtheta + alpha (n = 2).
* ``synthetic_weyl``: a spectrum with Weyl growth ``#{|a| <= L} ~ C L^(n-1)``,
  positive and negative halves weighted by ``1 +- asymmetry``.

Commuting tangential operators are functions of A, so they act on each mode
by a scalar.  They are given as polynomials in ``a`` (or, for matrix models,
as explicit per-eigenvalue values).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class TangentialOp:
    """A commuting tangential operator of declared order acting per mode.

    The per-mode scalar is ``sum_i coeffs[i] * a**i`` unless ``values`` gives it
    eigenvalue by eigenvalue.
    """

    label: str
    order: int
    coeffs: tuple[float, ...] = (1.0,)
    values: tuple[tuple[float, float], ...] | None = None

    def __post_init__(self):
        if self.values is None and len(self.coeffs) - 1 > self.order:
            raise ModelError(f"{self.label}: polynomial degree exceeds declared order {self.order}")

    def scalar(self, a):
        if self.values is not None:
            for ev, v in self.values:
                if ev == a:
                    return v
            raise ModelError(f"{self.label}: no value for eigenvalue {a}")
        out = 0 * a
        for c in reversed(self.coeffs):
            out = out * a + c
        return out


@dataclass(frozen=True)
class Mode:
    eigenvalue: float
    multiplicity: int
    tangential_scalars: tuple[tuple[str, float], ...] = ()

    @property
    def a(self) -> float:
        return self.eigenvalue

    def scalars(self) -> dict[str, float]:
        return dict(self.tangential_scalars)


@dataclass(frozen=True)
class Branch:
    """Infinite family of modes |a| = value(x) for integer x >= start, sign fixed.

    Modes with start <= x <= stop are enumerated; the rest form the tail.
    """

    sign: int
    start: int
    stop: int
    value: Callable
    density: Callable  # dx/d|a| as a function of |a|
    inverse: Callable  # x as a function of |a|


@dataclass(frozen=True)
class SpectralModel:
    dim_n: int
    kind: str
    modes: tuple[Mode, ...]
    truncation: int
    weyl_constant: float | None = None
    params: tuple[tuple[str, float], ...] = ()
    tangential: tuple[TangentialOp, ...] = ()

    def param(self, name: str, default=None):
        return dict(self.params).get(name, default)

    def labels(self) -> tuple[str, ...]:
        return tuple(t.label for t in self.tangential)

    def tangential_op(self, label: str) -> TangentialOp:
        for t in self.tangential:
            if t.label == label:
                return t
        raise ModelError(f"unknown tangential label {label!r}")

    def total_dimension(self) -> int:
        return sum(m.multiplicity for m in self.modes)

    def eigenvalues(self) -> np.ndarray:
        return np.repeat([m.a for m in self.modes], [m.multiplicity for m in self.modes])

    def kernel_rank(self) -> int:
        return sum(m.multiplicity for m in self.modes if m.a == 0)

    def branches(self) -> list[Branch]:
        """Tail families beyond the truncation (empty for matrix models)."""
        if self.kind == "circle":
            alpha = self.param("alpha")
            N = self.truncation
            # positive: a = k + alpha > 0 ; negative: |a| = k - alpha with k' = -k
            kp = math.floor(-alpha) + 1
            kn = math.floor(alpha) + 1
            return [
                Branch(1, kp, N, lambda x, al=alpha: x + al, lambda v: 1.0, lambda v, al=alpha: v - al),
                Branch(-1, kn, N, lambda x, al=alpha: x - al, lambda v: 1.0, lambda v, al=alpha: v + al),
            ]
        if self.kind == "synthetic_weyl":
            n = self.dim_n
            c = self.param("c")
            m = self.param("mass", 0.0)
            out = []
            for sign, w in ((1, 1 + self.param("asymmetry")), (-1, 1 - self.param("asymmetry"))):
                if w <= 0:
                    continue
                stop = int(round(w * self.truncation))
                out.append(Branch(sign, 1, stop, *_weyl_branch(n, c, w, m)))
            return out
        return []

    def describe(self) -> dict:
        return {
            "kind": self.kind,
            "dim_n": self.dim_n,
            "truncation": self.truncation,
            "params": dict(self.params),
            "tangential": [
                {"label": t.label, "order": t.order, "coeffs": list(t.coeffs)} for t in self.tangential
            ],
        }


def _weyl_branch(n: int, c: float, w: float, mass: float):
    p = 1.0 / (n - 1)

    def value(x, c=c, w=w, p=p, m=mass):
        base = c * (x / w) ** p
        return base if m == 0 else (base * base + m * m) ** 0.5

    def inverse(v, c=c, w=w, n=n, m=mass):
        base = v if m == 0 else (v * v - m * m) ** 0.5
        return w * (base / c) ** (n - 1)

    def density(v, c=c, w=w, n=n, m=mass):
        base = v if m == 0 else (v * v - m * m) ** 0.5
        d = w * (n - 1) * base ** (n - 2) / c ** (n - 1)
        return d if m == 0 else d * v / base

    return value, density, inverse


def _attach(modes: Iterable[tuple[float, int]], tangential: Sequence[TangentialOp]) -> tuple[Mode, ...]:
    out = []
    for a, mult in modes:
        scal = tuple((t.label, t.scalar(a)) for t in tangential)
        out.append(Mode(float(a), int(mult), scal))
    out.sort(key=lambda m: m.a)
    return tuple(out)


def _check_commuting(eigs, tangential):
    for t in tangential:
        if t.values is None:
            continue
        seen: dict = {}
        for ev, v in t.values:
            if ev in seen and seen[ev] != v:
                raise ModelError(f"{t.label}: different scalars on one eigenspace, operator does not commute with A")
            seen[ev] = v
        missing = {a for a, _ in eigs} - set(seen)
        if missing:
            raise ModelError(f"{t.label}: no value for eigenvalues {sorted(missing)}")


def build_matrix_model(eigenvalues: Sequence[tuple[float, int]], tangential: Sequence[TangentialOp] = ()) -> SpectralModel:
    eigs = [(float(a), int(m)) for a, m in eigenvalues]
    if not eigs:
        raise ModelError("empty spectrum")
    if any(m < 1 for _, m in eigs):
        raise ModelError("multiplicities must be >= 1")
    merged: dict[float, int] = {}
    for a, m in eigs:
        merged[a] = merged.get(a, 0) + m
    _check_commuting(eigs, tangential)
    modes = _attach(merged.items(), tangential)
    return SpectralModel(1, "matrix", modes, len(modes), None, (), tuple(tangential))


def build_circle_model(alpha: float, N: int, tangential: Sequence[TangentialOp] = ()) -> SpectralModel:
    if N < 1:
        raise ModelError("N must be >= 1")
    modes = _attach(((k + alpha, 1) for k in range(-N, N + 1)), tangential)
    return SpectralModel(2, "circle", modes, N, 2.0, (("alpha", float(alpha)),), tuple(tangential))


def build_weyl_model(n: int, asymmetry: float, N: int, c: float = 1.0, mass: float = 0.0,
                     tangential: Sequence[TangentialOp] = ()) -> SpectralModel:
    """Spectrum a = +- c (k / w+-)^(1/(n-1)), k = 1..round(w+- N), w+- = 1 +- asymmetry.

    A nonzero ``mass`` replaces |a| by (c^2 (k/w)^(2/(n-1)) + mass^2)^(1/2).
    """
    if n < 2:
        raise ModelError("synthetic Weyl models need n >= 2")
    if N < 1:
        raise ModelError("N must be >= 1")
    if not -1 <= asymmetry <= 1:
        raise ModelError("asymmetry must lie in [-1, 1]")
    if c <= 0:
        raise ModelError("c must be positive")
    params = (("asymmetry", float(asymmetry)), ("c", float(c)), ("mass", float(mass)))
    proto = SpectralModel(n, "synthetic_weyl", (), N, 2.0 / c ** (n - 1), params, tuple(tangential))
    pairs = []
    for br in proto.branches():
        for k in range(br.start, br.stop + 1):
            pairs.append((br.sign * br.value(k), 1))
    return SpectralModel(n, "synthetic_weyl", _attach(pairs, tangential), N, 2.0 / c ** (n - 1), params,
                         tuple(tangential))


def enumerate_modes(model: SpectralModel) -> tuple[Mode, ...]:
    return model.modes


def counting_function(model: SpectralModel, L: float) -> int:
    return sum(m.multiplicity for m in model.modes if abs(m.a) <= L)


def check_weyl_counting(model: SpectralModel, L: float, rtol: float = 0.05) -> bool:
    expected = model.weyl_constant * L ** (model.dim_n - 1)
    return abs(counting_function(model, L) - expected) <= rtol * expected


def check_growth(model: SpectralModel, C: float | None = None) -> bool:
    """Each tangential scalar obeys |s(a)| <= C (1 + |a|)^order over the enumerated modes."""
    for t in model.tangential:
        vals = [abs(dict(m.tangential_scalars)[t.label]) / (1 + abs(m.a)) ** t.order for m in model.modes]
        bound = C if C is not None else (sum(abs(c) for c in t.coeffs) if t.values is None else max(vals))
        if max(vals) > bound * (1 + 1e-12):
            return False
    return True


def heat_trace_A2(model: SpectralModel, t: float) -> float:
    """Direct sum of exp(-t a^2) over the enumerated modes."""
    ev = model.eigenvalues()
    return float(np.sum(np.exp(-t * ev * ev)))


def theta_dual(alpha: float, t: float, terms: int = 50) -> float:
    """sqrt(pi/t) sum_m exp(-pi^2 m^2/t) cos(2 pi m alpha) (Poisson summation)."""
    m = np.arange(1, terms + 1)
    return math.sqrt(math.pi / t) * (1.0 + 2.0 * float(np.sum(np.exp(-(math.pi**2) * m * m / t) * np.cos(2 * math.pi * m * alpha))))


def power_tail_bound(model: SpectralModel, decay: float, C: float = 1.0) -> float:
    """Bound for sum over tail modes of C |a|^(-decay), via the integral over each branch."""
    total = 0.0
    for br in model.branches():
        v0 = br.value(br.stop + 0.5)
        # |a| grows like x^(1/(n-1)) so the tail integral of C v^-decay dx converges when decay > n-1
        from scipy.integrate import quad

        val, _ = quad(lambda v: C * v ** (-decay) * br.density(v), v0, np.inf, limit=200)
        total += val
    return total


def load_model(spec: Mapping | str) -> SpectralModel:
    """Build a model from the JSON config format described in the README."""
    if isinstance(spec, str):
        spec = json.loads(spec)
    kind = spec.get("kind")
    params = dict(spec.get("params", {}))
    tang = []
    for t in spec.get("tangential", []):
        values = t.get("values")
        tang.append(TangentialOp(
            t["label"], int(t.get("order", 0)), tuple(float(c) for c in t.get("coeffs", [1.0])),
            tuple((float(a), float(v)) for a, v in values) if values else None,
        ))
    if kind == "matrix":
        model = build_matrix_model([tuple(p) for p in params["eigenvalues"]], tang)
    elif kind == "circle":
        model = build_circle_model(float(params["alpha"]), int(params["N"]), tang)
    elif kind == "synthetic_weyl":
        model = build_weyl_model(int(spec.get("dim_n", params.get("n", 2))), float(params.get("asymmetry", 0.0)),
                                 int(params["N"]), float(params.get("c", 1.0)), float(params.get("mass", 0.0)), tang)
    else:
        raise ModelError(f"unknown model kind {kind!r}")
    if "dim_n" in spec and int(spec["dim_n"]) != model.dim_n:
        raise ModelError(f"dim_n={spec['dim_n']} inconsistent with kind {kind} (n={model.dim_n})")
    return model
