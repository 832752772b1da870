"""Real-valued root-MUSIC.

Pipeline: sample covariance -> real part -> EVD -> noise-subspace polynomial
-> rooting -> root selection -> angles -> CBF mirror rejection.

Taking the real part of the covariance mixes a(theta) with its conjugate
a(-theta), so each source occupies two real dimensions: the signal subspace is
split off at ``2K`` eigenvectors, and every DOA root r comes with a mirror r*.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import numerics
from .array_model import UlaConfig, cbf_spectrum, sample_covariance
from .errors import ContractViolation, EstimationFailure, GratingLobeError

HERMITIAN_RTOL = 1e-10
GAP_RTOL = 1e-12
REAL_AXIS_RTOL = 1e-6
UNIT_BAND = 0.5
TIE_RTOL = 1e-12


@dataclass(frozen=True)
class SubspaceDecomp:
    signal_basis: np.ndarray  # E_s, L x d
    noise_basis: np.ndarray  # E_n, L x (L - d)
    signal_eigenvalues: np.ndarray
    noise_eigenvalues: np.ndarray
    degenerate_gap: bool = False

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.concatenate([self.signal_eigenvalues, self.noise_eigenvalues])

    @property
    def noise_projector(self) -> np.ndarray:
        return self.noise_basis @ self.noise_basis.T


@dataclass(frozen=True)
class RootDiagnostics:
    all_roots: np.ndarray
    labels: tuple[str, ...]  # one of true / mirror / real_axis / extraneous per root
    selected_true: np.ndarray
    selected_mirror: np.ndarray
    real_axis_pairs: tuple[tuple[float, float], ...]  # (inner a, outer 1/a)
    leading_coefficient: complex

    def to_dict(self) -> dict:
        cplx = lambda z: [float(np.real(z)), float(np.imag(z))]  # noqa: E731
        return {
            "all_roots": [cplx(z) for z in self.all_roots],
            "labels": list(self.labels),
            "selected_true": [cplx(z) for z in self.selected_true],
            "selected_mirror": [cplx(z) for z in self.selected_mirror],
            "real_axis_pairs": [[float(a), float(b)] for a, b in self.real_axis_pairs],
            "leading_coefficient": cplx(self.leading_coefficient),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RootDiagnostics":
        c = lambda v: complex(v[0], v[1])  # noqa: E731
        return cls(
            all_roots=np.array([c(v) for v in d["all_roots"]], dtype=complex),
            labels=tuple(d["labels"]),
            selected_true=np.array([c(v) for v in d["selected_true"]], dtype=complex),
            selected_mirror=np.array([c(v) for v in d["selected_mirror"]], dtype=complex),
            real_axis_pairs=tuple((float(a), float(b)) for a, b in d["real_axis_pairs"]),
            leading_coefficient=c(d["leading_coefficient"]),
        )


@dataclass(frozen=True)
class DoaEstimate:
    angles_deg: np.ndarray
    mirror_angles_deg: np.ndarray
    raw_candidates_deg: np.ndarray
    ambiguous: tuple[bool, ...] = field(default=())


def real_covariance(r: np.ndarray) -> np.ndarray:
    r = np.asarray(r)
    scale = max(np.abs(r).max(initial=0.0), np.finfo(float).tiny)
    if np.abs(r - r.conj().T).max(initial=0.0) > HERMITIAN_RTOL * scale:
        raise ContractViolation("covariance is not Hermitian")
    re = np.real(r)
    return (re + re.T) / 2


def extract_subspaces(r_real: np.ndarray, signal_dim: int) -> SubspaceDecomp:
    """Split the eigenvectors of ``r_real`` into the top ``signal_dim`` and the rest.

    For K sources at nonzero angles ``signal_dim`` should be ``2K``. A near-tie
    between eigenvalues ``signal_dim`` and ``signal_dim + 1`` sets
    ``degenerate_gap`` and emits a RuntimeWarning rather than failing.
    """
    n = r_real.shape[0]
    if not 1 <= signal_dim < n:
        raise ContractViolation(f"signal_dim must be in [1, {n - 1}], got {signal_dim}")
    w, v = numerics.symmetric_evd(r_real)
    degenerate = bool(w[signal_dim - 1] - w[signal_dim] < GAP_RTOL * max(abs(w[0]), np.finfo(float).tiny))
    if degenerate:
        warnings.warn(
            f"eigenvalues {signal_dim} and {signal_dim + 1} are nearly equal; "
            "signal/noise split is ill-defined",
            RuntimeWarning,
            stacklevel=2,
        )
    return SubspaceDecomp(v[:, :signal_dim], v[:, signal_dim:], w[:signal_dim], w[signal_dim:], degenerate)


def polynomial_from_projector(c: np.ndarray) -> np.ndarray:
    """Coefficients (ascending) of q(z) = z^(L-1) p(1/z)^T C p(z).

    The coefficient of z^(L-1+m) is the sum of the m-th diagonal of C.
    """
    n = c.shape[0]
    return np.array([np.trace(c, offset=m) for m in range(-(n - 1), n)])


def build_polynomial(decomp: SubspaceDecomp) -> np.ndarray:
    return polynomial_from_projector(decomp.noise_projector)


def _pair_reciprocal(idx, roots):
    """Greedily match roots into (rho, 1/conj(rho)) pairs, closest first.

    Returns (inner, outer) index tuples; a leftover root is paired with itself.
    """
    idx = list(idx)
    cand = []
    for a in range(len(idx)):
        for b in range(a + 1, len(idx)):
            i, j = idx[a], idx[b]
            cand.append((abs(roots[i] * np.conj(roots[j]) - 1.0), i, j))
    cand.sort()
    used, pairs = set(), []
    for _, i, j in cand:
        if i in used or j in used:
            continue
        used.update((i, j))
        pairs.append((i, j) if abs(roots[i]) <= abs(roots[j]) else (j, i))
    pairs.extend((i, i) for i in idx if i not in used)
    return pairs


def _pair_center(roots, pair):
    # mean argument of a conjugate-reciprocal pair
    i, j = pair
    inner = roots[i]
    phase = np.angle(inner) + np.angle(roots[j] / inner) / 2
    return abs(inner) * np.exp(1j * phase)


def classify_roots(roots: np.ndarray, num_sources: int, array: UlaConfig,
                   coeffs: np.ndarray | None = None) -> RootDiagnostics:
    """Pick the DOA roots and their mirrors out of the 2(L-1) polynomial roots.

    Roots are grouped into conjugate-reciprocal pairs. The ``num_sources``
    upper-half-plane pairs whose inner member is closest to the unit circle are
    the (provisional) true roots; the matching lower-half-plane pairs are the
    mirrors. Each selected root is reported as the inner member with its
    argument averaged over the pair. Roots with ``|Im z| < 1e-6 |z|`` form the
    real-axis pairs.

    ``coeffs`` (the polynomial the roots came from) is only needed to scale the
    leading coefficient A; without it A is reported for the monic polynomial.
    """
    roots = np.asarray(roots, dtype=complex)
    n = array.elements
    if roots.size != 2 * (n - 1):
        raise EstimationFailure(f"expected {2 * (n - 1)} roots, got {roots.size}")
    k = num_sources
    if np.count_nonzero(np.abs(1 - np.abs(roots)) < UNIT_BAND) < 2 * k:
        raise EstimationFailure("fewer than 2K roots near the unit circle")

    on_axis = np.abs(roots.imag) < REAL_AXIS_RTOL * np.abs(roots)
    upper = [i for i in range(roots.size) if not on_axis[i] and roots[i].imag > 0]
    lower = [i for i in range(roots.size) if not on_axis[i] and roots[i].imag < 0]
    axis = [i for i in range(roots.size) if on_axis[i]]

    dist = lambda p: abs(1 - abs(roots[p[0]]))  # noqa: E731
    up_pairs = sorted(_pair_reciprocal(upper, roots), key=dist)
    lo_pairs = _pair_reciprocal(lower, roots)
    if len(up_pairs) < k or len(lo_pairs) < k:
        raise EstimationFailure("not enough complex root pairs for the requested sources")

    chosen_up = up_pairs[:k]
    true_roots = np.array([_pair_center(roots, p) for p in chosen_up])
    lo_centers = np.array([_pair_center(roots, p) for p in lo_pairs])
    chosen_lo, mirror_roots = [], []
    for t in true_roots:
        order = np.argsort(np.abs(lo_centers - np.conj(t)))
        m = next(int(o) for o in order if o not in chosen_lo)
        chosen_lo.append(m)
        mirror_roots.append(lo_centers[m])

    labels = ["extraneous"] * roots.size
    for i in axis:
        labels[i] = "real_axis"
    for i, j in chosen_up:
        labels[i] = labels[j] = "true"
    for m in chosen_lo:
        i, j = lo_pairs[m]
        labels[i] = labels[j] = "mirror"

    ax_pairs = _pair_reciprocal(axis, roots)
    real_pairs = tuple(
        sorted((float(roots[i].real), float(roots[j].real)) for i, j in ax_pairs if i != j)
    )

    all_pairs = up_pairs + lo_pairs + ax_pairs
    inner = np.array([roots[i] for i, _ in all_pairs])
    # q(z) = c_top * prod (z - root)  and  f(z) = A * prod_inner (1 - rho/z)(1 - conj(rho) z)
    c_top = 1.0 if coeffs is None else numerics.trim_coefficients(coeffs)[-1]
    lead = complex(c_top * np.prod(-1.0 / np.conj(inner)))
    return RootDiagnostics(roots, tuple(labels), true_roots, np.array(mirror_roots),
                           real_pairs, lead)


def roots_to_angles(roots, array: UlaConfig) -> np.ndarray:
    """theta = arcsin(arg(z) / (2 pi d/lambda)), degrees."""
    x = np.angle(np.asarray(roots, dtype=complex)) / (2 * np.pi * array.spacing_ratio)
    x = np.atleast_1d(x)
    over = np.abs(x) > 1 + 1e-12
    if np.any(over):
        raise GratingLobeError(f"root phase outside the visible region for roots {np.asarray(roots)[over]}")
    return np.rad2deg(np.arcsin(np.clip(x, -1, 1)))


def filter_mirrors(candidates_deg, r: np.ndarray, array: UlaConfig, num_sources: int):
    """Resolve each +/- candidate pair with the CBF spectrum |a^H R a|^2.

    Candidates are matched into pairs by nearest negation. Within a pair the
    member with the larger CBF value is kept. On a tie (within 1e-12 relative)
    the positive angle is kept and the pair is flagged ambiguous.

    Returns (kept, rejected, ambiguous); kept is sorted ascending and
    rejected[i] is the mirror of kept[i].
    """
    cand = [float(c) for c in candidates_deg]
    if len(cand) != 2 * num_sources:
        raise ContractViolation(f"expected {2 * num_sources} candidates, got {len(cand)}")
    remaining = list(range(len(cand)))
    pairs = []
    while remaining:
        i = remaining.pop(0)
        j = min(remaining, key=lambda m: abs(cand[m] + cand[i]))
        remaining.remove(j)
        pairs.append((i, j))
    out = []
    for i, j in pairs:
        pi, pj = cbf_spectrum(r, array, cand[i]), cbf_spectrum(r, array, cand[j])
        tie = abs(pi - pj) <= TIE_RTOL * max(pi, pj)
        if tie:
            keep_i = cand[i] >= cand[j]
        else:
            keep_i = pi > pj
        k_, r_ = (cand[i], cand[j]) if keep_i else (cand[j], cand[i])
        out.append((k_, r_, tie))
    out.sort()
    kept = np.array([o[0] for o in out])
    rejected = np.array([o[1] for o in out])
    return kept, rejected, tuple(o[2] for o in out)


def estimate_from_covariance(r: np.ndarray, num_sources: int, array: UlaConfig,
                             signal_dim: int | None = None):
    k = num_sources
    if not 1 <= k <= array.max_sources:
        raise ContractViolation(f"num_sources must be in [1, {array.max_sources}], got {k}")
    decomp = extract_subspaces(real_covariance(r), 2 * k if signal_dim is None else signal_dim)
    q = build_polynomial(decomp)
    diag = classify_roots(numerics.polynomial_roots(q), k, array, q)
    cands = np.concatenate([roots_to_angles(diag.selected_true, array),
                            roots_to_angles(diag.selected_mirror, array)])
    kept, rejected, amb = filter_mirrors(cands, r, array, k)
    return DoaEstimate(kept, rejected, cands, amb), decomp, diag


def estimate(x: np.ndarray, num_sources: int, array: UlaConfig, signal_dim: int | None = None):
    """Run the full estimator on an L x M snapshot matrix.

    Returns ``(DoaEstimate, SubspaceDecomp, RootDiagnostics)``.
    """
    return estimate_from_covariance(sample_covariance(x), num_sources, array, signal_dim)
