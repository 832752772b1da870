"""Dense linear algebra and polynomial kernels.

Thin wrappers over LAPACK (through numpy/scipy) that pin down ordering
conventions and check the post-conditions the rest of the package relies on.
Polynomials are plain coefficient arrays in ascending power order.
"""
from __future__ import annotations

from typing import NamedTuple

import numpy as np
import scipy.linalg

from .errors import ContractViolation, NumericalError

SYMMETRY_RTOL = 1e-12
TRIM_RTOL = 1e-14
ROOT_RESIDUAL_RTOL = 1e-8


class EvdResult(NamedTuple):
    eigenvalues: np.ndarray  # descending
    eigenvectors: np.ndarray  # columns, orthonormal


class SvdResult(NamedTuple):
    left: np.ndarray
    singular_values: np.ndarray  # descending
    right: np.ndarray  # V, so that A = left @ diag(s) @ right.conj().T


def _check_finite(a, name):
    if not np.all(np.isfinite(a)):
        raise ContractViolation(f"{name} has non-finite entries")


def symmetric_evd(a) -> EvdResult:
    """Eigendecomposition of a real symmetric matrix, eigenvalues descending."""
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ContractViolation(f"expected a square matrix, got shape {a.shape}")
    if np.iscomplexobj(a):
        if np.any(a.imag != 0):
            raise ContractViolation("symmetric_evd needs a real matrix")
        a = a.real
    _check_finite(a, "matrix")
    scale = max(np.abs(a).max(initial=0.0), np.finfo(float).tiny)
    asym = np.abs(a - a.T).max(initial=0.0)
    if asym > SYMMETRY_RTOL * scale:
        raise ContractViolation(
            f"matrix is not symmetric: max|A - A^T| = {asym:.3e} (scale {scale:.3e})"
        )
    try:
        w, v = np.linalg.eigh(a)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigh did not converge: {exc}") from exc
    order = np.argsort(w)[::-1]
    return EvdResult(w[order], v[:, order])


def complex_svd(a) -> SvdResult:
    """Thin SVD with singular values in descending order."""
    a = np.asarray(a)
    _check_finite(a, "matrix")
    try:
        u, s, vh = np.linalg.svd(a, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"SVD did not converge: {exc}") from exc
    return SvdResult(u, s, vh.conj().T)


def principal_angles(a, b) -> np.ndarray:
    """Principal angles (radians) between the column spaces of ``a`` and ``b``."""
    return scipy.linalg.subspace_angles(np.asarray(a), np.asarray(b))


def trim_coefficients(coeffs, rtol: float = TRIM_RTOL) -> np.ndarray:
    """Drop leading (highest power) coefficients below ``rtol * max|c|``."""
    c = np.atleast_1d(np.asarray(coeffs, dtype=complex))
    if c.size == 0:
        return c
    big = np.abs(c).max()
    if big == 0:
        return c[:1]
    keep = np.nonzero(np.abs(c) > rtol * big)[0]
    return c[: keep[-1] + 1]


def horner_eval(coeffs, z):
    """Evaluate an ascending-order polynomial at ``z`` (scalar or array)."""
    c = np.asarray(coeffs)
    z = np.asarray(z, dtype=complex)
    acc = np.zeros_like(z)
    for ck in c[::-1]:
        acc = acc * z + ck
    return acc[()] if acc.ndim == 0 else acc


def poly_derivative(coeffs, order: int = 1) -> np.ndarray:
    c = np.asarray(coeffs, dtype=complex)
    if order < 1:
        raise ContractViolation("derivative order must be >= 1")
    for _ in range(order):
        if c.size <= 1:
            return np.zeros(1, dtype=complex)
        c = c[1:] * np.arange(1, c.size)
    return c


def polynomial_roots(coeffs) -> np.ndarray:
    """All roots of an ascending-order polynomial.

    Companion-matrix eigenvalues (LAPACK balances the companion matrix before
    the QR iteration). Each root is checked against the Horner residual bound
    ``|p(r)| <= 1e-8 * max|c| * max(1, |r|)**degree``.
    """
    c = trim_coefficients(coeffs)
    degree = c.size - 1
    if degree < 1:
        raise ContractViolation("polynomial_roots needs degree >= 1")
    _check_finite(c, "coefficients")
    try:
        roots = np.roots(c[::-1])
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"companion eigenvalues did not converge: {exc}") from exc
    if roots.size != degree:
        raise NumericalError(f"expected {degree} roots, got {roots.size}")
    bound = ROOT_RESIDUAL_RTOL * np.abs(c).max() * np.maximum(1.0, np.abs(roots)) ** degree
    resid = np.abs(horner_eval(c, roots))
    bad = resid > bound
    if np.any(bad):
        worst = int(np.argmax(resid / bound))
        raise NumericalError(
            f"root {roots[worst]:.6g} has residual {resid[worst]:.3e} > bound {bound[worst]:.3e}"
        )
    return roots.astype(complex)
