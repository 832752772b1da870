"""Monte Carlo harness: per-trial estimation vs first-order theory, sweeps over
SNR or snapshot count, and noiseless root-locus datasets.

Every trial draws from ``stream(seed, trial_index)``, so a trial's outcome
does not depend on which worker runs it or in what order. Rows are aggregated
in trial-index order after all trials finish.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Literal, Sequence

import numpy as np

from .array_model import (Scenario, UlaConfig, model_covariance, noise_power_from_snr, stream,
                          synthesize)
from .errors import EstimationFailure, NumericalError
from .estimator import estimate, estimate_from_covariance, roots_to_angles
from .perturbation import extend, linearize, predicted_deviation, theoretical_mse

GATE_DEG = 10.0
MAX_FAILURE_FRACTION = 0.10


@dataclass(frozen=True)
class SweepSpec:
    base: Scenario
    sweep_variable: Literal["snr_db", "snapshots"]
    sweep_values: tuple[float, ...]
    trials: int = 1000
    tracked_source_deg: float | None = None

    def __post_init__(self):
        if self.sweep_variable not in ("snr_db", "snapshots"):
            raise ValueError(f"sweep_variable must be snr_db or snapshots, got {self.sweep_variable!r}")
        vals = tuple(float(v) for v in self.sweep_values)
        object.__setattr__(self, "sweep_values", vals)
        if not vals:
            raise ValueError("sweep_values must be non-empty")
        if any(b <= a for a, b in zip(vals, vals[1:])):
            raise ValueError("sweep_values must be strictly increasing")
        if self.sweep_variable == "snapshots" and any(v != int(v) or v < 1 for v in vals):
            raise ValueError("snapshot sweep values must be positive integers")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.tracked_source_deg is None:
            object.__setattr__(self, "tracked_source_deg", self.base.angles_deg[0])
        if self.tracked_source_deg not in self.base.angles_deg:
            raise ValueError(f"tracked source {self.tracked_source_deg} is not one of {self.base.angles_deg}")

    def scenario_at(self, value: float) -> Scenario:
        if self.sweep_variable == "snr_db":
            return replace(self.base, noise_power=noise_power_from_snr(value))
        return replace(self.base, snapshots=int(value))


@dataclass(frozen=True)
class TrialRecord:
    trial_index: int
    ok: bool
    err_true_rad: float = math.nan
    err_mirror_rad: float = math.nan
    pred_true_rad: float = math.nan
    pred_mirror_rad: float = math.nan
    mse_true_rad2: float = math.nan
    mse_mirror_rad2: float = math.nan
    failure: str = ""


@dataclass(frozen=True)
class SweepRow:
    sweep_value: float
    rmse_true_emp_deg: float
    rmse_true_theory_deg: float
    rmse_mirror_emp_deg: float
    rmse_mirror_theory_deg: float
    trials_used: int
    failures: int
    flagged: bool = False


def _nearest(values, target):
    values = np.asarray(values, dtype=float)
    i = int(np.argmin(np.abs(values - target)))
    return float(values[i])


def run_trial(scenario: Scenario, trial_index: int, tracked_source_deg: float | None = None,
              gate_deg: float = GATE_DEG) -> TrialRecord:
    """One Monte Carlo trial: estimate, measure the tracked source's errors, and
    evaluate the first-order prediction on the same noise draw.

    The mirror estimate is taken from the CBF-rejected list and referenced to
    -theta. Estimates farther than ``gate_deg`` from their reference count as a
    failed trial.
    """
    theta = scenario.angles_deg[0] if tracked_source_deg is None else float(tracked_source_deg)
    data = synthesize(scenario, stream(scenario.seed, trial_index))
    lin = linearize(data.clean, scenario.angles_deg, scenario.array, track=[theta])
    n_v = extend(data.noise)
    theory = dict(
        pred_true_rad=predicted_deviation(lin.true_params[0], n_v),
        pred_mirror_rad=predicted_deviation(lin.mirror_params[0], n_v),
        mse_true_rad2=theoretical_mse(lin.true_params[0], scenario.noise_power),
        mse_mirror_rad2=theoretical_mse(lin.mirror_params[0], scenario.noise_power),
    )
    try:
        est, _, _ = estimate(data.observed, scenario.num_sources, scenario.array)
    except (EstimationFailure, NumericalError) as exc:
        return TrialRecord(trial_index, False, failure=f"{type(exc).__name__}: {exc}", **theory)
    t_hat = _nearest(est.angles_deg, theta)
    m_hat = _nearest(est.mirror_angles_deg, -theta)
    if abs(t_hat - theta) > gate_deg or abs(m_hat + theta) > gate_deg:
        return TrialRecord(trial_index, False, failure="gross error outside gate", **theory)
    return TrialRecord(trial_index, True, float(np.deg2rad(t_hat - theta)),
                       float(np.deg2rad(m_hat + theta)), **theory)


def _job(args):
    scenario, idx, theta, gate = args
    return run_trial(scenario, idx, theta, gate)


def run_trials(scenario: Scenario, trials: int, tracked_source_deg: float | None = None,
               workers: int = 1, gate_deg: float = GATE_DEG) -> list[TrialRecord]:
    jobs = [(scenario, i, tracked_source_deg, gate_deg) for i in range(trials)]
    if workers <= 1:
        recs = [_job(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            recs = list(pool.map(_job, jobs, chunksize=max(1, trials // (4 * workers))))
    return sorted(recs, key=lambda r: r.trial_index)


def _rms_deg(values) -> float:
    values = list(values)
    if not values:
        return math.nan
    return math.degrees(math.sqrt(math.fsum(v * v for v in values) / len(values)))


def _root_mean_deg(mses) -> float:
    mses = list(mses)
    return math.degrees(math.sqrt(math.fsum(mses) / len(mses)))


def aggregate(value: float, records: Sequence[TrialRecord]) -> SweepRow:
    """Empirical RMSE over successful trials; theoretical RMSE over all trials."""
    recs = sorted(records, key=lambda r: r.trial_index)
    good = [r for r in recs if r.ok]
    failures = len(recs) - len(good)
    return SweepRow(
        sweep_value=float(value),
        rmse_true_emp_deg=_rms_deg(r.err_true_rad for r in good),
        rmse_true_theory_deg=_root_mean_deg(r.mse_true_rad2 for r in recs),
        rmse_mirror_emp_deg=_rms_deg(r.err_mirror_rad for r in good),
        rmse_mirror_theory_deg=_root_mean_deg(r.mse_mirror_rad2 for r in recs),
        trials_used=len(good),
        failures=failures,
        flagged=failures > MAX_FAILURE_FRACTION * len(recs),
    )


def run_sweep(spec: SweepSpec, workers: int = 1, gate_deg: float = GATE_DEG) -> list[SweepRow]:
    rows = []
    for v in spec.sweep_values:
        recs = run_trials(spec.scenario_at(v), spec.trials, spec.tracked_source_deg, workers, gate_deg)
        rows.append(aggregate(v, recs))
    return rows


def condition1(trials: int = 1000, seed: int = 2025) -> SweepSpec:
    """9-element half-wavelength ULA, sources at 30 and 50 degrees, M = 200, SNR 0..20 dB."""
    base = Scenario(UlaConfig(9, 0.5), (30.0, 50.0), snapshots=200, seed=seed)
    return SweepSpec(base, "snr_db", tuple(range(0, 21, 2)), trials, 30.0)


def condition2(trials: int = 1000, seed: int = 2025) -> SweepSpec:
    """Same array and sources at 10 dB, M = 2^5 .. 2^12."""
    base = Scenario(UlaConfig(9, 0.5), (30.0, 50.0), snapshots=200,
                    noise_power=noise_power_from_snr(10.0), seed=seed)
    return SweepSpec(base, "snapshots", tuple(2**n for n in range(5, 13)), trials, 30.0)


@dataclass(frozen=True)
class RootLocus:
    array: UlaConfig
    angles_deg: tuple[float, ...]
    roots: np.ndarray
    labels: tuple[str, ...]
    real_axis_pairs: tuple[tuple[float, float], ...]
    unit_circle: np.ndarray  # reference points for plotting


def root_locus(array: UlaConfig, angles_deg: Sequence[float], circle_points: int = 361) -> RootLocus:
    """All polynomial roots for the noiseless model covariance, labelled.

    True and mirror labels follow the CBF decision, so negative-angle sources
    are labelled correctly.
    """
    angles = tuple(float(a) for a in angles_deg)
    r = model_covariance(array, angles)
    est, _, diag = estimate_from_covariance(r, len(angles), array)
    labels = list(diag.labels)
    for i, z in enumerate(diag.all_roots):
        if labels[i] in ("true", "mirror"):
            a = roots_to_angles([z], array)[0]
            near_kept = np.min(np.abs(est.angles_deg - a)) <= np.min(np.abs(est.mirror_angles_deg - a))
            labels[i] = "true" if near_kept else "mirror"
    t = np.linspace(0, 2 * np.pi, circle_points)
    return RootLocus(array, angles, diag.all_roots, tuple(labels), diag.real_axis_pairs, np.exp(1j * t))
