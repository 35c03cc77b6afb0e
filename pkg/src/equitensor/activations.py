"""Tensorial activations: scalar functions applied to eigenvalues.

A scalar activation sigma lifts to symmetric tensors as

    Phi(sigma)(S) = U diag(sigma(lam_1), ..., sigma(lam_d)) U^T

for any eigendecomposition S = U diag(lam) U^T.  The value is independent
of the eigenbasis (well-defined at repeated eigenvalues) and commutes
with conjugation by any orthogonal matrix, which is what makes layers
built from it equivariant.

The reverse-mode derivative is the divided-difference (Daleckii-Krein)
rule: with G_ij = (sigma(lam_i) - sigma(lam_j)) / (lam_i - lam_j) off the
diagonal and G_ii = sigma'(lam_i), the adjoint maps a cotangent Xi to
U (G o (U^T Xi U)) U^T.  The quotient collapses to sigma' at the midpoint
when eigenvalues come within a relative gap of 1e-7, which avoids the
catastrophic cancellation that makes naive differentiation through an
eigensolver blow up near degenerate spectra.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .tensors import eig_sym, from_mandel, to_mandel

DEGENERACY_TAU = 1e-7


@dataclass(frozen=True)
class ScalarActivation:
    name: str
    value: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    deriv: Callable[[np.ndarray], np.ndarray] = field(repr=False)


def _logistic(t):
    # 0.5 * (1 + tanh(t/2)) is stable for large |t|
    return 0.5 * (1.0 + np.tanh(0.5 * t))


def _logistic_deriv(t):
    p = _logistic(t)
    return p * (1.0 - p)


ACTIVATIONS = {
    "tanh": ScalarActivation("tanh", np.tanh, lambda t: 1.0 / np.cosh(t) ** 2),
    "logistic": ScalarActivation("logistic", _logistic, _logistic_deriv),
    "softplus": ScalarActivation(
        "softplus", lambda t: np.logaddexp(0.0, t), _logistic
    ),
    "identity": ScalarActivation(
        "identity", lambda t: np.asarray(t, dtype=float), np.ones_like
    ),
}


def get_activation(name: str) -> ScalarActivation:
    try:
        return ACTIVATIONS[name]
    except KeyError:
        raise ValueError(
            f"unknown activation {name!r}; choose from {sorted(ACTIVATIONS)}"
        ) from None


def apply_tensorial(sigma: ScalarActivation, v: np.ndarray) -> np.ndarray:
    """Phi(sigma) applied to Mandel vectors (batched)."""
    out, _ = apply_tensorial_cached(sigma, v)
    return out


def apply_tensorial_cached(sigma: ScalarActivation, v: np.ndarray):
    """Like apply_tensorial but also returns the eigendecomposition cache
    consumed by vjp_from_cache during the backward pass."""
    lam, U = eig_sym(v)
    # U diag(sigma(lam)) U^T as stacked matmuls (faster than einsum here)
    out = to_mandel((U * sigma.value(lam)[..., None, :]) @ np.swapaxes(U, -1, -2))
    return out, (lam, U)


def _gain_matrix(sigma: ScalarActivation, lam: np.ndarray) -> np.ndarray:
    """Divided-difference matrix G, shape (..., d, d)."""
    sig = sigma.value(lam)
    dif = lam[..., :, None] - lam[..., None, :]
    mag = np.maximum(
        1.0, np.maximum(np.abs(lam[..., :, None]), np.abs(lam[..., None, :]))
    )
    close = np.abs(dif) <= DEGENERACY_TAU * mag
    quotient = (sig[..., :, None] - sig[..., None, :]) / np.where(close, 1.0, dif)
    midpoint = sigma.deriv(0.5 * (lam[..., :, None] + lam[..., None, :]))
    return np.where(close, midpoint, quotient)


def vjp_from_cache(sigma: ScalarActivation, cache, cotangent: np.ndarray) -> np.ndarray:
    """Adjoint of apply_tensorial given the cached (lam, U)."""
    lam, U = cache
    G = _gain_matrix(sigma, lam)
    Ut = np.swapaxes(U, -1, -2)
    inner = Ut @ from_mandel(cotangent) @ U
    return to_mandel(U @ (G * inner) @ Ut)


def vjp_tensorial(
    sigma: ScalarActivation, v: np.ndarray, cotangent: np.ndarray
) -> np.ndarray:
    """Adjoint of apply_tensorial at v applied to a cotangent tensor."""
    lam, U = eig_sym(v)
    return vjp_from_cache(sigma, (lam, U), cotangent)
