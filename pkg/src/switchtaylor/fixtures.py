"""Built-in test models with analytic derivatives.

Four fixtures, each a ready ModelSpec:

- ``linear2``: scalar geometric dynamics, two regimes with different drift
  and volatility rates.  The workhorse for convergence studies.
- ``diagonal3``: two-dimensional diagonal linear dynamics under a three-state
  chain.  Diagonal noise keeps both exchange identities exact.
- ``additive``: scalar mean reversion with regime-dependent constant noise.
  First-order noise terms vanish, so one-step methods coincide.
- ``noncommutative``: scalar state driven by two Wiener dimensions with
  columns x^2 and x.  Violates the exchange identities; used to test that
  higher-order schemes refuse it.

All coefficient sets are plain picklable dataclasses.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import UnknownFixture
from .markov_chain import GeneratorMatrix
from .model import CoefficientSet, ModelSpec

__all__ = [
    "ScalarLinearCoefficients",
    "DiagonalLinearCoefficients",
    "MeanRevertingCoefficients",
    "PolynomialColumnsCoefficients",
    "fixture",
    "fixture_names",
]


def _per_regime(values, regimes):
    # values: (m0, ...) table, regimes: (B,) 1-based labels
    return values[np.asarray(regimes, dtype=np.intp) - 1]


@dataclass(frozen=True)
class ScalarLinearCoefficients(CoefficientSet):
    """d = m = 1, drift a_i x, diffusion c_i x with per-regime rates."""

    a: np.ndarray
    c: np.ndarray
    d: int = field(default=1, init=False)
    m: int = field(default=1, init=False)

    def __post_init__(self):
        object.__setattr__(self, "a", np.asarray(self.a, dtype=float).reshape(-1))
        object.__setattr__(self, "c", np.asarray(self.c, dtype=float).reshape(-1))

    def drift(self, X, regimes):
        return _per_regime(self.a, regimes)[:, None] * X

    def diffusion(self, X, regimes):
        return (_per_regime(self.c, regimes)[:, None] * X)[:, :, None]

    def drift_gradient(self, X, regimes):
        return _per_regime(self.a, regimes)[:, None, None] * np.ones_like(X)[:, :, None]

    def drift_hessian(self, X, regimes):
        return np.zeros((X.shape[0], 1, 1, 1))

    def diffusion_gradient(self, X, regimes):
        return _per_regime(self.c, regimes).reshape(-1, 1, 1, 1) * np.ones(
            (X.shape[0], 1, 1, 1)
        )

    def diffusion_hessian(self, X, regimes):
        return np.zeros((X.shape[0], 1, 1, 1, 1))


@dataclass(frozen=True)
class DiagonalLinearCoefficients(CoefficientSet):
    """d = m, drift A[i,k] x^k per coordinate, diffusion diag(C[i,k] x^k)."""

    a: np.ndarray
    c: np.ndarray
    d: int = field(init=False)
    m: int = field(init=False)

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        c = np.asarray(self.c, dtype=float)
        if a.ndim != 2 or a.shape != c.shape:
            raise ValueError("rate tables must share shape (m0, d)")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "d", a.shape[1])
        object.__setattr__(self, "m", a.shape[1])

    def drift(self, X, regimes):
        return _per_regime(self.a, regimes) * X

    def diffusion(self, X, regimes):
        B = X.shape[0]
        out = np.zeros((B, self.d, self.m))
        idx = np.arange(self.d)
        out[:, idx, idx] = _per_regime(self.c, regimes) * X
        return out

    def drift_gradient(self, X, regimes):
        B = X.shape[0]
        out = np.zeros((B, self.d, self.d))
        idx = np.arange(self.d)
        out[:, idx, idx] = _per_regime(self.a, regimes)
        return out

    def drift_hessian(self, X, regimes):
        return np.zeros((X.shape[0], self.d, self.d, self.d))

    def diffusion_gradient(self, X, regimes):
        B = X.shape[0]
        out = np.zeros((B, self.d, self.m, self.d))
        idx = np.arange(self.d)
        out[:, idx, idx, idx] = _per_regime(self.c, regimes)
        return out

    def diffusion_hessian(self, X, regimes):
        return np.zeros((X.shape[0], self.d, self.m, self.d, self.d))


@dataclass(frozen=True)
class MeanRevertingCoefficients(CoefficientSet):
    """d = m = 1, drift theta_i (mu_i - x), constant diffusion c_i."""

    theta: np.ndarray
    mean: np.ndarray
    c: np.ndarray
    d: int = field(default=1, init=False)
    m: int = field(default=1, init=False)

    def __post_init__(self):
        for name in ("theta", "mean", "c"):
            object.__setattr__(
                self, name, np.asarray(getattr(self, name), dtype=float).reshape(-1)
            )

    def drift(self, X, regimes):
        th = _per_regime(self.theta, regimes)[:, None]
        mu = _per_regime(self.mean, regimes)[:, None]
        return th * (mu - X)

    def diffusion(self, X, regimes):
        out = np.empty((X.shape[0], 1, 1))
        out[:, 0, 0] = _per_regime(self.c, regimes)
        return out

    def drift_gradient(self, X, regimes):
        return -_per_regime(self.theta, regimes).reshape(-1, 1, 1) * np.ones(
            (X.shape[0], 1, 1)
        )

    def drift_hessian(self, X, regimes):
        return np.zeros((X.shape[0], 1, 1, 1))

    def diffusion_gradient(self, X, regimes):
        return np.zeros((X.shape[0], 1, 1, 1))

    def diffusion_hessian(self, X, regimes):
        return np.zeros((X.shape[0], 1, 1, 1, 1))


@dataclass(frozen=True)
class PolynomialColumnsCoefficients(CoefficientSet):
    """d = 1, m = 2, diffusion columns (x^2, x), drift -x/2.

    The noise operators of the two columns do not exchange, which makes this
    the canonical rejection case for methods that need them to.
    """

    d: int = field(default=1, init=False)
    m: int = field(default=2, init=False)

    def drift(self, X, regimes):
        return -0.5 * X

    def diffusion(self, X, regimes):
        out = np.empty((X.shape[0], 1, 2))
        out[:, 0, 0] = X[:, 0] ** 2
        out[:, 0, 1] = X[:, 0]
        return out

    def drift_gradient(self, X, regimes):
        return np.full((X.shape[0], 1, 1), -0.5)

    def drift_hessian(self, X, regimes):
        return np.zeros((X.shape[0], 1, 1, 1))

    def diffusion_gradient(self, X, regimes):
        out = np.empty((X.shape[0], 1, 2, 1))
        out[:, 0, 0, 0] = 2.0 * X[:, 0]
        out[:, 0, 1, 0] = 1.0
        return out

    def diffusion_hessian(self, X, regimes):
        out = np.zeros((X.shape[0], 1, 2, 1, 1))
        out[:, 0, 0, 0, 0] = 2.0
        return out


_TWO_STATE = GeneratorMatrix(np.array([[-1.0, 1.0], [1.0, -1.0]]))

_THREE_STATE = GeneratorMatrix(
    np.array(
        [
            [-2.0, 1.5, 0.5],
            [0.5, -1.0, 0.5],
            [1.0, 2.0, -3.0],
        ]
    )
)


def _make_linear2() -> ModelSpec:
    return ModelSpec(
        name="linear2",
        generator=_TWO_STATE,
        coefficients=ScalarLinearCoefficients(a=[-1.0, 0.5], c=[0.3, 0.8]),
        x0=[1.0],
    )


def _make_diagonal3() -> ModelSpec:
    return ModelSpec(
        name="diagonal3",
        generator=_THREE_STATE,
        coefficients=DiagonalLinearCoefficients(
            a=[[-0.5, -1.0], [0.25, -0.75], [-1.5, 0.5]],
            c=[[0.2, 0.4], [0.5, 0.1], [0.3, 0.6]],
        ),
        x0=[1.0, 0.5],
    )


def _make_additive() -> ModelSpec:
    return ModelSpec(
        name="additive",
        generator=_TWO_STATE,
        coefficients=MeanRevertingCoefficients(
            theta=[1.0, 2.0], mean=[0.5, -0.25], c=[0.4, 0.9]
        ),
        x0=[0.2],
    )


def _make_noncommutative() -> ModelSpec:
    return ModelSpec(
        name="noncommutative",
        generator=_TWO_STATE,
        coefficients=PolynomialColumnsCoefficients(),
        x0=[0.8],
    )


_BUILDERS = {
    "linear2": _make_linear2,
    "diagonal3": _make_diagonal3,
    "additive": _make_additive,
    "noncommutative": _make_noncommutative,
}


def fixture_names() -> tuple:
    """Names accepted by fixture(), in a stable order."""
    return tuple(sorted(_BUILDERS))


def fixture(name: str) -> ModelSpec:
    """Build a fresh fixture model by name.

    Raises:
      UnknownFixture: name not in fixture_names().
    """
    try:
        builder = _BUILDERS[name]
    except KeyError:
        raise UnknownFixture(
            "unknown fixture %r; available: %s" % (name, ", ".join(fixture_names()))
        ) from None
    return builder()
