"""First-order error prediction for real-valued root-MUSIC.

For a DOA root r on the unit circle (true root) and its mirror r*, the angle
error caused by additive noise N is, to first order,

    delta = -Im(beta^H N_v^H alpha) / gamma,     N_v = [N  N*]

with
    alpha = E_n E_n^T p'(r) C r,      C = 1 / (2 pi (d/lambda) cos theta)
    beta  = V_s W_s^{-1} U_s^H p(r)   (SVD of the extended data X_v = [X  X*])
    gamma = A K_m(r) G(r)             (the polynomial with the double zero at r removed)

and its mean square over white noise of power sigma^2 is
|alpha|^2 |beta|^2 sigma^2 / (2 gamma^2).

All theoretical quantities are evaluated on the noiseless data X of a given
realization, i.e. the expectation is over the noise only, conditioned on the
source waveforms. Everything here is in radians.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np
from numpy.polynomial import polynomial as P

from . import numerics
from .array_model import Scenario, SnapshotData, UlaConfig, sample_covariance, stream, synthesize
from .errors import ContractViolation, InconsistencyError, RankDeficiency, TheoremViolation
from .estimator import (SubspaceDecomp, build_polynomial, extract_subspaces, real_covariance,
                        REAL_AXIS_RTOL, _pair_reciprocal)

DENOM_RTOL = 1e-6
GAMMA_IMAG_RTOL = 1e-8
CLUSTER_RTOL = 1e-10


@dataclass(frozen=True)
class ConjugateExtension:
    x_v: np.ndarray  # L x 2M
    u_s: np.ndarray  # real, L x d
    w_s: np.ndarray
    v_s: np.ndarray  # 2M x d
    u_n: np.ndarray  # real, L x (L - d)
    w_n: np.ndarray  # remaining singular values (zero for noiseless data)


@dataclass(frozen=True)
class FactoredSpectrum:
    q: np.ndarray
    r_true: complex
    r_mirror: complex
    denom_true: complex  # A K_m(r) G(r), G without the even-array real-axis pair
    denom_mirror: complex  # A K_t(r*) G(r*)
    correction: float  # R(a); 1 for odd L
    correction_outer: float  # R evaluated with the outer member 1/a, for reference only
    denom_true_deflation: complex
    denom_mirror_deflation: complex


@dataclass(frozen=True)
class GeneralizedParams:
    alpha: np.ndarray
    beta: np.ndarray
    gamma: complex
    scale_c: float


@dataclass(frozen=True)
class SourcePerturbation:
    theta_deg: float
    predicted_dtheta_rad: float
    predicted_dphi_rad: float
    mse_true_rad2: float
    mse_mirror_rad2: float
    gamma_true: float
    gamma_mirror: float
    correction: float


@dataclass(frozen=True)
class PerturbationReport:
    sources: tuple[SourcePerturbation, ...]
    noise_power: float
    conditioning: str = "noise-only expectation, conditioned on the drawn source waveforms"


def extend(x: np.ndarray) -> np.ndarray:
    """[X  X*]"""
    x = np.asarray(x)
    return np.hstack([x, x.conj()])


def _real_basis(u):
    # columns of u span a conjugation-invariant subspace; return a real orthonormal basis of it
    if u.shape[1] == 0:
        return np.zeros(u.shape)
    b, s, _ = np.linalg.svd(np.hstack([u.real, u.imag]), full_matrices=False)
    return b[:, : u.shape[1]]


def conjugate_extension(x: np.ndarray, signal_dim: int) -> ConjugateExtension:
    """SVD of [X  X*] split into ``signal_dim`` signal columns and the rest.

    Since X_v X_v^H = 2 Re(X X^H) is real, the left singular subspaces are
    conjugation invariant; they are returned with real bases so that they can
    be compared directly with the eigenvectors of Re(R).
    """
    x_v = extend(x)
    n = x_v.shape[0]
    if not 1 <= signal_dim < n:
        raise ContractViolation(f"signal_dim must be in [1, {n - 1}], got {signal_dim}")
    svd = numerics.complex_svd(x_v)
    s = svd.singular_values
    u_full = svd.left
    if u_full.shape[1] < n:  # fewer columns than rows (2M < L)
        u_full = np.linalg.svd(x_v, full_matrices=True)[0]
        s = np.concatenate([s, np.zeros(n - s.size)])
    w_s = s[:signal_dim]
    if w_s[-1] <= 0:
        raise RankDeficiency("extended data has fewer than signal_dim nonzero singular values")
    u_s = np.empty((n, signal_dim))
    start = 0
    while start < signal_dim:
        stop = start + 1
        while stop < signal_dim and abs(s[start] - s[stop]) <= CLUSTER_RTOL * s[0]:
            stop += 1
        u_s[:, start:stop] = _real_basis(u_full[:, start:stop])
        start = stop
    v_s = x_v.conj().T @ u_s / w_s
    u_n = _real_basis(u_full[:, signal_dim:n])
    return ConjugateExtension(x_v, u_s, w_s, v_s, u_n, s[signal_dim:n])


def noise_subspace_perturbation(ext: ConjugateExtension, n_v: np.ndarray) -> np.ndarray:
    """First-order noise-subspace change  -U_s W_s^{-1} V_s^H N_v^H U_n  (real, L x (L-d))."""
    n_v = np.asarray(n_v)
    if n_v.shape != ext.x_v.shape:
        raise ContractViolation(f"N_v must have shape {ext.x_v.shape}, got {n_v.shape}")
    m = n_v.shape[1] // 2
    if np.any(n_v[:, m:] != n_v[:, :m].conj()):
        raise ContractViolation("N_v must have the structure [N  N*]")
    if np.any(ext.w_s <= 0):
        raise RankDeficiency("zero signal singular value")
    d = -(ext.u_s / ext.w_s) @ (ext.v_s.conj().T @ (n_v.conj().T @ ext.u_n))
    return d.real


def unit_root(theta_deg: float, array: UlaConfig) -> complex:
    """The noiseless DOA root exp(j 2 pi (d/lambda) sin theta)."""
    return complex(np.exp(2j * np.pi * array.spacing_ratio * np.sin(np.deg2rad(theta_deg))))


def second_derivative_denominator(q: np.ndarray, r: complex) -> complex:
    """A K_m(r) G(r) = -r^2 f''(r) / 2 with f(z) = z^{-(L-1)} q(z).

    Valid at a double zero of f on the unit circle, where K_t''(r) = -2 / r^2.
    """
    n = (len(q) - 1) // 2
    q0 = numerics.horner_eval(q, r)
    q1 = numerics.horner_eval(numerics.poly_derivative(q, 1), r)
    q2 = numerics.horner_eval(numerics.poly_derivative(q, 2), r)
    f2 = n * (n + 1) * r ** (-n - 2) * q0 - 2 * n * r ** (-n - 1) * q1 + r ** (-n) * q2
    return complex(-r * r * f2 / 2)


def deflation_denominator(q: np.ndarray, roots: np.ndarray, r: complex) -> complex:
    """Same quantity by deflation: divide q by its two roots nearest r.

    With q = (z - r)^2 Q(z) and K_t(z) = -conj(r) (z - r)^2 / z on the unit
    circle, A K_m(r) G(r) = -r^(2 - (L-1)) Q(r).
    """
    n = (len(q) - 1) // 2
    nearest = np.argsort(np.abs(roots - r))[:2]
    quot, _ = P.polydiv(np.asarray(q, dtype=complex), P.polyfromroots(roots[nearest]))
    return complex(-r ** (2 - n) * numerics.horner_eval(quot, r))


def correction_factor(a: float, r: complex) -> float:
    """R(a) = a^2 - 2 a Re(r) + 1, i.e. (1 - a/z)(1 - a z) at z = r on the unit circle."""
    return float(a * a - 2 * a * np.real(r) + 1)


def even_array_correction(diag, r_k: complex) -> float:
    """Correction for the real-axis root pair(s) of an even-element array.

    ``diag`` is anything with ``real_axis_pairs`` (inner a, outer 1/a) and
    ``all_roots``. The inner member |a| <= 1 enters R(a). Should an even array
    carry three or more real pairs, their factors multiply. Odd arrays get 1.
    """
    elements = len(diag.all_roots) // 2 + 1
    if elements % 2:
        return 1.0
    if not diag.real_axis_pairs:
        raise TheoremViolation(f"{elements}-element array has no real-axis root pair")
    return float(np.prod([correction_factor(a, r_k) for a, _ in diag.real_axis_pairs]))


@dataclass(frozen=True)
class _Pairs:
    all_roots: np.ndarray
    real_axis_pairs: tuple


def _real_axis_pairs(roots):
    axis = [i for i in range(roots.size) if abs(roots[i].imag) < REAL_AXIS_RTOL * abs(roots[i])]
    pairs = _pair_reciprocal(axis, roots)
    return tuple(sorted((roots[i].real, roots[j].real) for i, j in pairs if i != j))


def factor_spectrum(decomp: SubspaceDecomp, r_k: complex, array: UlaConfig) -> FactoredSpectrum:
    """Denominators A K_m(r) G(r) and A K_t(r*) G(r*) of a noiseless spectrum.

    Computed by the second-derivative closed form and cross-checked against
    polynomial deflation; a disagreement beyond 1e-6 relative raises
    InconsistencyError (typically a noisy subspace, where r is not a double root).
    """
    q = build_polynomial(decomp)
    roots = numerics.polynomial_roots(q)
    r_m = np.conj(r_k)
    d_t = second_derivative_denominator(q, r_k)
    d_m = second_derivative_denominator(q, r_m)
    dd_t = deflation_denominator(q, roots, r_k)
    dd_m = deflation_denominator(q, roots, r_m)
    for a, b, name in ((d_t, dd_t, "true"), (d_m, dd_m, "mirror")):
        if abs(a - b) > DENOM_RTOL * abs(a):
            raise InconsistencyError(
                f"{name}-root denominator: second derivative {a:.6g} vs deflation {b:.6g}"
            )
    diag = _Pairs(roots, _real_axis_pairs(roots))
    corr = even_array_correction(diag, r_k)
    if array.elements % 2 == 0:
        outer = float(np.prod([correction_factor(b, r_k) for _, b in diag.real_axis_pairs]))
    else:
        outer = 1.0
    return FactoredSpectrum(q, complex(r_k), complex(r_m), d_t / corr, d_m / corr, corr, outer, dd_t, dd_m)


def _p(z, n):
    return z ** np.arange(n)


def _p1(z, n):
    k = np.arange(n)
    return np.concatenate([[0.0], k[1:] * z ** (k[1:] - 1)])


def generalized_params(ext: ConjugateExtension, decomp: SubspaceDecomp, spectrum: FactoredSpectrum,
                       which: Literal["true", "mirror"], array: UlaConfig) -> GeneralizedParams:
    """alpha, beta, gamma for the true root r (``which="true"``) or its mirror r*.

    gamma carries the even-array correction, so that deviations come out
    multiplied by 1/R(a).
    """
    n = array.elements
    if which == "true":
        r, denom = spectrum.r_true, spectrum.denom_true
    elif which == "mirror":
        r, denom = spectrum.r_mirror, spectrum.denom_mirror
    else:
        raise ContractViolation(f"which must be 'true' or 'mirror', got {which!r}")
    sin_t = np.angle(spectrum.r_true) / (2 * np.pi * array.spacing_ratio)
    scale_c = 1.0 / (2 * np.pi * array.spacing_ratio * np.sqrt(1 - sin_t**2))
    alpha = decomp.noise_projector @ _p1(r, n) * scale_c * r
    beta = ext.v_s @ ((ext.u_s.T @ _p(r, n)) / ext.w_s)
    return GeneralizedParams(alpha, beta, complex(denom * spectrum.correction), float(scale_c))


def _real_gamma(gamma):
    if abs(gamma.imag) > GAMMA_IMAG_RTOL * abs(gamma):
        raise InconsistencyError(f"gamma = {gamma} is not real")
    return gamma.real


def predicted_deviation(params: GeneralizedParams, n_v: np.ndarray) -> float:
    """-Im(beta^H N_v^H alpha) / gamma, radians."""
    g = _real_gamma(params.gamma)
    return float(-np.imag(np.vdot(np.asarray(n_v) @ params.beta, params.alpha)) / g)


def theoretical_mse(params: GeneralizedParams, noise_power: float) -> float:
    if noise_power < 0:
        raise ContractViolation("noise_power must be >= 0")
    _real_gamma(params.gamma)
    a2 = np.vdot(params.alpha, params.alpha).real
    b2 = np.vdot(params.beta, params.beta).real
    return float(a2 * b2 * noise_power / (2 * abs(params.gamma) ** 2))


@dataclass(frozen=True)
class Linearization:
    """Everything the first-order model needs from one noiseless realization."""

    ext: ConjugateExtension
    decomp: SubspaceDecomp
    spectra: tuple[FactoredSpectrum, ...]
    true_params: tuple[GeneralizedParams, ...]
    mirror_params: tuple[GeneralizedParams, ...]


def linearize(clean: np.ndarray, angles_deg, array: UlaConfig, track=None) -> Linearization:
    """Noiseless decomposition of ``clean`` and the parameters of every source
    in ``track`` (default: all of ``angles_deg``), in that order."""
    k = len(angles_deg)
    track = tuple(angles_deg if track is None else track)
    decomp = extract_subspaces(real_covariance(sample_covariance(clean)), 2 * k)
    ext = conjugate_extension(clean, 2 * k)
    spectra = tuple(factor_spectrum(decomp, unit_root(t, array), array) for t in track)
    tp = tuple(generalized_params(ext, decomp, s, "true", array) for s in spectra)
    mp = tuple(generalized_params(ext, decomp, s, "mirror", array) for s in spectra)
    return Linearization(ext, decomp, spectra, tp, mp)


def full_report(scenario: Scenario, data: SnapshotData | None = None) -> PerturbationReport:
    """Predicted deviations and theoretical MSEs for every source of a scenario.

    Without ``data`` the realization is drawn from ``stream(scenario.seed)``.
    """
    if data is None:
        data = synthesize(scenario, stream(scenario.seed))
    lin = linearize(data.clean, scenario.angles_deg, scenario.array)
    n_v = extend(data.noise)
    recs = []
    for theta, spec, pt, pm in zip(scenario.angles_deg, lin.spectra, lin.true_params, lin.mirror_params):
        recs.append(SourcePerturbation(
            theta_deg=theta,
            predicted_dtheta_rad=predicted_deviation(pt, n_v),
            predicted_dphi_rad=predicted_deviation(pm, n_v),
            mse_true_rad2=theoretical_mse(pt, scenario.noise_power),
            mse_mirror_rad2=theoretical_mse(pm, scenario.noise_power),
            gamma_true=float(pt.gamma.real),
            gamma_mirror=float(pm.gamma.real),
            correction=spec.correction,
        ))
    return PerturbationReport(tuple(recs), scenario.noise_power)
