"""Self-verification suites.

Each check returns an ``OracleResult`` with the measured error, the tolerance
it was held to and its wall time. ``run_suite("quick")`` is sized to finish in
well under 30 s; ``"full"`` uses the sample sizes of the acceptance tests.
"""
from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import perturbation
from .array_model import (Scenario, UlaConfig, generate_noise, model_covariance,
                          noise_power_from_snr, sample_covariance, stream, synthesize)
from .estimator import (build_polynomial, estimate, estimate_from_covariance, extract_subspaces,
                        real_covariance)
from .numerics import polynomial_roots, principal_angles

REFERENCE = Scenario(UlaConfig(9, 0.5), (30.0, 50.0), snapshots=200, seed=2025)


@dataclass(frozen=True)
class OracleResult:
    name: str
    passed: bool
    measured: float
    tolerance: float
    detail: str = ""
    seconds: float = 0.0

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return (f"{tag}  {self.name}: measured {self.measured:.3e} vs tolerance {self.tolerance:.1e}"
                f"  ({self.seconds:.2f} s){'  ' + self.detail if self.detail else ''}")


def _timed(fn: Callable[..., OracleResult]):
    def wrapper(*args, **kwargs):
        t0 = time.perf_counter()
        res = fn(*args, **kwargs)
        return OracleResult(res.name, res.passed, res.measured, res.tolerance, res.detail,
                            time.perf_counter() - t0)
    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


def random_angles(rng: np.random.Generator, k: int, limit: float = 70.0, sep: float = 5.0) -> tuple:
    """k angles in [-limit, limit] whose +/- images are all at least ``sep`` apart."""
    while True:
        a = rng.uniform(-limit, limit, size=k)
        pts = np.concatenate([a, -a])
        gaps = np.abs(pts[:, None] - pts[None, :])[~np.eye(2 * k, dtype=bool)]
        if gaps.min() >= sep:
            return tuple(float(x) for x in np.round(a, 3))


def noiseless_data(array: UlaConfig, angles, snapshots: int, seed: int, key: int = 0) -> np.ndarray:
    sc = Scenario(array, angles, snapshots=snapshots, seed=seed)
    return synthesize(sc, stream(seed, key)).clean


@_timed
def check_noiseless(scenario: Scenario = REFERENCE, tol_deg: float = 1e-6) -> OracleResult:
    """Noiseless data: estimates hit the sources and mirrors hit their negations."""
    x = noiseless_data(scenario.array, scenario.angles_deg, scenario.snapshots, scenario.seed)
    est, _, _ = estimate(x, scenario.num_sources, scenario.array)
    truth = np.sort(scenario.angles_deg)
    err = max(np.abs(est.angles_deg - truth).max(), np.abs(est.mirror_angles_deg + truth).max())
    return OracleResult("noiseless exactness", bool(err <= tol_deg), float(err), tol_deg,
                        f"estimates {np.round(est.angles_deg, 9).tolist()}")


def real_axis_pair_counts(elements: int, scenarios: int, seed: int = 7) -> list[int]:
    """Number of real-axis root pairs for random noiseless scenarios on an L-element array."""
    array = UlaConfig(elements, 0.5)
    rng = stream(seed, elements)
    counts = []
    for _ in range(scenarios):
        k = int(rng.integers(1, min(2, array.max_sources) + 1))
        _, _, diag = estimate_from_covariance(model_covariance(array, random_angles(rng, k)), k, array)
        counts.append(len(diag.real_axis_pairs))
    return counts


@_timed
def check_even_array_pairs(scenarios: int = 100, lengths=(4, 5, 6, 7, 8, 9, 10)) -> OracleResult:
    """Even arrays always carry a real-axis pair; real-axis pair counts have the parity of L - 1."""
    bad = []
    for n in lengths:
        for c in real_axis_pair_counts(n, scenarios):
            if (n % 2 == 0 and c == 0) or c % 2 != (n - 1) % 2:
                bad.append((n, c))
    return OracleResult("real-axis pair parity", not bad, float(len(bad)), 0.0,
                        f"violations {bad[:5]}" if bad else "")


@_timed
def check_conjugate_extension(scenarios: int = 20, seed: int = 11) -> OracleResult:
    """X_v X_v^H = 2 Re(X X^H); SVD and EVD noise subspaces coincide; W_s^2 = 2M Lambda_s."""
    rng = stream(seed)
    worst = np.zeros(3)
    for _ in range(scenarios):
        n = int(rng.integers(5, 13))
        k = int(rng.integers(1, min(2, (n - 1) // 2) + 1))
        m = int(rng.integers(20, 300))
        array = UlaConfig(n, 0.5)
        x = noiseless_data(array, random_angles(rng, k), m, seed, int(rng.integers(1 << 30)))
        ext = perturbation.conjugate_extension(x, 2 * k)
        gram = ext.x_v @ ext.x_v.conj().T
        target = 2 * np.real(x @ x.conj().T)
        e1 = np.linalg.norm(gram - target) / np.linalg.norm(target)
        dec = extract_subspaces(real_covariance(sample_covariance(x)), 2 * k)
        e2 = principal_angles(ext.u_n, dec.noise_basis).max()
        lam = 2 * m * dec.signal_eigenvalues
        e3 = np.linalg.norm(ext.w_s**2 - lam) / np.linalg.norm(lam)
        worst = np.maximum(worst, [e1, e2, e3])
    tols = np.array([1e-12, 1e-8, 1e-8])
    ok = bool(np.all(worst < tols))
    ratio = float((worst / tols).max())
    return OracleResult("conjugate-extension identities", ok, ratio, 1.0,
                        f"gram {worst[0]:.1e}, angle {worst[1]:.1e} rad, W^2 {worst[2]:.1e} (measured is worst/tolerance)")


def _reference_draw(scenario: Scenario = REFERENCE):
    data = synthesize(scenario, stream(scenario.seed))
    noise = generate_noise(scenario.array, scenario.snapshots, 1.0, stream(scenario.seed, 1))
    return data.clean, noise


@_timed
def check_subspace_finite_difference(scenario: Scenario = REFERENCE, eps: float = 1e-6,
                                     tol: float = 1e-4) -> OracleResult:
    """Noise-projector derivative from the first-order subspace formula vs a central difference."""
    x, noise = _reference_draw(scenario)
    d = 2 * scenario.num_sources
    ext = perturbation.conjugate_extension(x, d)
    de = perturbation.noise_subspace_perturbation(ext, perturbation.extend(noise))
    predicted = de @ ext.u_n.T + ext.u_n @ de.T

    def proj(y):
        return extract_subspaces(real_covariance(sample_covariance(y)), d).noise_projector

    fd = (proj(x + eps * noise) - proj(x - eps * noise)) / (2 * eps)
    err = float(np.linalg.norm(fd - predicted) / np.linalg.norm(predicted))
    return OracleResult("noise-subspace finite difference", err <= tol, err, tol)


def first_order_errors(scenario: Scenario = REFERENCE, eps_values=(1e-3, 1e-4, 1e-5)):
    """Relative error between measured and predicted deviations, per (source, row) and eps.

    Returns ``{(theta, row): [rel_err at each eps]}`` with row in {"true", "mirror"}.
    """
    x, noise = _reference_draw(scenario)
    lin = perturbation.linearize(x, scenario.angles_deg, scenario.array)
    out = {}
    for eps in eps_values:
        n_v = perturbation.extend(eps * noise)
        est, _, _ = estimate(x + eps * noise, scenario.num_sources, scenario.array)
        for theta, pt, pm in zip(scenario.angles_deg, lin.true_params, lin.mirror_params):
            i = int(np.argmin(np.abs(est.angles_deg - theta)))
            meas_t = np.deg2rad(est.angles_deg[i] - theta)
            meas_m = np.deg2rad(est.mirror_angles_deg[i] + theta)
            for row, meas, params in (("true", meas_t, pt), ("mirror", meas_m, pm)):
                pred = perturbation.predicted_deviation(params, n_v)
                out.setdefault((theta, row), []).append(abs(meas - pred) / abs(pred))
    return out


@_timed
def check_first_order(scenario: Scenario = REFERENCE, eps_values=(1e-3, 1e-4, 1e-5),
                      tol: float = 0.05) -> OracleResult:
    """Full-pipeline deviation vs the first-order prediction, shrinking with eps."""
    errs = first_order_errors(scenario, eps_values)
    last = max(v[-1] for v in errs.values())
    monotone = all(all(b < a for a, b in zip(v, v[1:])) for v in errs.values())
    detail = "; ".join(f"{t:g} {row}: " + ", ".join(f"{e:.1e}" for e in v) for (t, row), v in errs.items())
    return OracleResult("first-order deviation", bool(last <= tol and monotone), float(last), tol,
                        detail if monotone else "not monotone in eps; " + detail)


def denominator_disagreement(elements: int, k: int, seed: int = 3) -> float:
    array = UlaConfig(elements, 0.5)
    angles = random_angles(stream(seed, elements, k), k)
    dec = extract_subspaces(real_covariance(model_covariance(array, angles)), 2 * k)
    q = build_polynomial(dec)
    roots = polynomial_roots(q)
    worst = 0.0
    for theta in angles:
        r = perturbation.unit_root(theta, array)
        for z in (r, np.conj(r)):
            a = perturbation.second_derivative_denominator(q, z)
            b = perturbation.deflation_denominator(q, roots, z)
            worst = max(worst, abs(a - b) / abs(a))
    return worst


@_timed
def check_denominators(lengths=range(5, 13), sources=(1, 2), tol: float = 1e-6) -> OracleResult:
    """Second-derivative and deflation denominators agree for true and mirror roots."""
    worst = max(denominator_disagreement(n, k) for n in lengths for k in sources
                if k <= (n - 1) // 2)
    return OracleResult("dual-method denominator", worst <= tol, worst, tol)


def mse_closure(scenario: Scenario, draws: int, batch: int = 2000, seed: int = 39):
    """Monte Carlo mean of the squared first-order deviation over fresh [N N*] draws.

    Returns ``{row: (empirical, theoretical)}`` for the first source.
    """
    clean = synthesize(scenario, stream(scenario.seed)).clean
    lin = perturbation.linearize(clean, scenario.angles_deg, scenario.array)
    rng = stream(seed)
    n, m = clean.shape
    s2 = scenario.noise_power
    out = {}
    for row, params in (("true", lin.true_params[0]), ("mirror", lin.mirror_params[0])):
        b1, b2 = params.beta[:m], params.beta[m:]
        g = perturbation._real_gamma(params.gamma)
        acc, done = 0.0, 0
        while done < draws:
            b = min(batch, draws - done)
            z = rng.standard_normal((b, n, m, 2))
            noise = (z[..., 0] + 1j * z[..., 1]) * np.sqrt(s2 / 2)
            y = noise @ b1 + noise.conj() @ b2
            dev = -np.imag(np.sum(y.conj() * params.alpha, axis=-1)) / g
            acc += float(np.sum(dev**2))
            done += b
        out[row] = (acc / draws, perturbation.theoretical_mse(params, s2))
    return out


@_timed
def check_mse_closure(draws: int = 100_000, tol: float = 0.05) -> OracleResult:
    """Mean of the squared linear deviation vs the closed-form MSE, true and mirror rows."""
    sc = Scenario(REFERENCE.array, REFERENCE.angles_deg, REFERENCE.snapshots,
                  noise_power_from_snr(10.0), REFERENCE.seed)
    res = mse_closure(sc, draws)
    rel = {row: abs(e - t) / t for row, (e, t) in res.items()}
    worst = max(rel.values())
    return OracleResult("closed-form MSE closure", worst <= tol, worst, tol,
                        ", ".join(f"{row} {r:.2%}" for row, r in rel.items()) + f" over {draws} draws")


def run_suite(level: str = "quick") -> list[OracleResult]:
    if level not in ("quick", "full"):
        raise ValueError(f"level must be quick or full, got {level!r}")
    quick = level == "quick"
    return [
        check_noiseless(),
        check_conjugate_extension(5 if quick else 20),
        check_subspace_finite_difference(),
        check_first_order(),
        check_denominators(),
        check_mse_closure(20_000 if quick else 100_000),
        check_even_array_pairs(10 if quick else 100),
    ]
