"""BER estimation from received-signal amplitudes.

Pipeline: fit a two-component Gaussian mixture to the amplitude samples,
form the Q factor from the fitted means and deviations,

    Q = (mu1 - mu0) / (sigma1 + sigma0),

then convert to a bit error rate,

    BER = 0.5 * erfc(Q / sqrt(2)).

The far tail is handled in the log domain so that Q values well past the
double-precision underflow point still yield usable log10 BERs.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, DataError, DegenerateFitError

#: Smallest positive double; BerValue.prob floors here when the true
#: probability underflows.
_TINY = math.ulp(0.0)

_MIN_SAMPLES = 100
_SIGMA_COLLAPSE = 1e-12  # relative to the sample range


@dataclass(frozen=True)
class MixtureFit:
    """Two-Gaussian fit, canonicalized so mu1 > mu0 (bit one on top)."""

    mu0: float
    mu1: float
    sigma0: float
    sigma1: float
    w0: float
    w1: float
    loglik: float
    iterations: int
    loglik_history: tuple[float, ...] = ()


@dataclass(frozen=True)
class BerValue:
    """BER as a probability and as log10.

    ``log10`` is always meaningful; ``prob`` saturates at the smallest
    positive double when the true value underflows.
    """

    prob: float
    log10: float


def _log_norm_pdf(x, mu, sigma):
    return -0.5 * ((x - mu) / sigma) ** 2 - np.log(sigma) - 0.5 * math.log(2 * math.pi)


def fit_mixture(samples, *, tol: float = 1e-9, max_iter: int = 500) -> MixtureFit:
    """Fit a two-component 1-D Gaussian mixture by expectation-maximization.

    Initialization splits the samples at the median; each half seeds one
    component. Iterates until the relative log-likelihood change drops
    below ``tol``. Deterministic for fixed input.

    Raises
    ------
    DataError
        fewer than 100 samples, or non-finite values.
    DegenerateFitError
        zero-variance input, or a component collapsing onto a point.
    ConvergenceError
        tolerance not reached within ``max_iter`` (carries the last fit).
    """
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < _MIN_SAMPLES:
        raise DataError(f"need at least {_MIN_SAMPLES} samples, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise DataError("samples contain non-finite values")
    if tol <= 0:
        raise DataError(f"tol must be positive, got {tol}")
    if max_iter < 1:
        raise DataError(f"max_iter must be at least 1, got {max_iter}")

    span = float(x.max() - x.min())
    if span == 0.0:
        raise DegenerateFitError("all samples identical; nothing to fit")
    sigma_floor = _SIGMA_COLLAPSE * span

    # Median split; fall back to mid-range if ties leave one side empty.
    pivot = float(np.median(x))
    lo = x[x <= pivot]
    hi = x[x > pivot]
    if lo.size == 0 or hi.size == 0:
        pivot = float(x.min()) + 0.5 * span
        lo = x[x <= pivot]
        hi = x[x > pivot]
    mu = np.array([lo.mean(), hi.mean()])
    sigma = np.array([lo.std(), hi.std()])
    sigma = np.maximum(sigma, 1e-6 * span)  # let EM move off exact point masses
    w = np.array([0.5, 0.5])

    loglik = -np.inf
    history: list[float] = []
    xcol = x[:, None]

    for iteration in range(1, max_iter + 1):
        # E step in the log domain: responsibilities and log-likelihood.
        log_joint = np.log(w)[None, :] + _log_norm_pdf(xcol, mu[None, :], sigma[None, :])
        m = log_joint.max(axis=1, keepdims=True)
        log_total = m[:, 0] + np.log(np.exp(log_joint - m).sum(axis=1))
        new_loglik = float(log_total.sum())
        resp = np.exp(log_joint - log_total[:, None])

        if history and new_loglik < history[-1] - 1e-8 * (1.0 + abs(history[-1])):
            raise ConvergenceError(
                "log-likelihood decreased during EM",
                last_fit=_make_fit(mu, sigma, w, new_loglik, iteration, history),
            )
        history.append(new_loglik)

        converged = math.isfinite(loglik) and abs(new_loglik - loglik) <= tol * (
            1.0 + abs(new_loglik)
        )
        loglik = new_loglik
        if converged:
            return _finalize(mu, sigma, w, loglik, iteration, history, sigma_floor)

        # M step.
        mass = resp.sum(axis=0)
        if np.any(mass <= 0):
            raise DegenerateFitError("a mixture component lost all weight")
        w = mass / x.size
        mu = (resp * xcol).sum(axis=0) / mass
        var = (resp * (xcol - mu[None, :]) ** 2).sum(axis=0) / mass
        sigma = np.sqrt(var)
        if np.any(sigma < sigma_floor):
            raise DegenerateFitError(
                f"component deviation collapsed below {sigma_floor:.3e}"
            )

    raise ConvergenceError(
        f"EM did not converge within {max_iter} iterations",
        last_fit=_make_fit(mu, sigma, w, loglik, max_iter, history),
    )


def _finalize(mu, sigma, w, loglik, iterations, history, sigma_floor) -> MixtureFit:
    if np.any(sigma < sigma_floor):
        raise DegenerateFitError(f"component deviation collapsed below {sigma_floor:.3e}")
    if not (0.0 < w[0] < 1.0):
        raise DegenerateFitError("component weights collapsed to 0/1")
    return _make_fit(mu, sigma, w, loglik, iterations, history)


def _make_fit(mu, sigma, w, loglik, iterations, history) -> MixtureFit:
    order = (0, 1) if mu[0] <= mu[1] else (1, 0)
    a, b = order
    return MixtureFit(
        mu0=float(mu[a]),
        mu1=float(mu[b]),
        sigma0=float(sigma[a]),
        sigma1=float(sigma[b]),
        w0=float(w[a]),
        w1=float(w[b]),
        loglik=float(loglik),
        iterations=iterations,
        loglik_history=tuple(history),
    )


def q_factor(fit: MixtureFit) -> float:
    return (fit.mu1 - fit.mu0) / (fit.sigma1 + fit.sigma0)


def _log_erfc_asymptotic(z: float) -> float:
    """ln(erfc(z)) for large z via the asymptotic expansion.

    erfc(z) ~ exp(-z^2) / (z sqrt(pi)) * sum_n (-1)^n (2n-1)!! / (2 z^2)^n.
    Terms are accumulated until they stop improving; for z >= 5 the
    truncation error is far below 1e-10 in ln terms.
    """
    inv2z2 = 1.0 / (2.0 * z * z)
    total = 1.0
    term = 1.0
    for n in range(1, 60):
        factor = (2 * n - 1) * inv2z2
        if factor >= 1.0:  # series started diverging
            break
        term *= -factor
        total += term
        if abs(term) < 1e-18 * total:
            break
    return -z * z - math.log(z) - 0.5 * math.log(math.pi) + math.log(total)


def ber_from_q(q: float) -> BerValue:
    """BER = 0.5 * erfc(q / sqrt(2)), robust deep into the tail.

    Below q ~ 7.07 the probability comes straight from erfc; past that the
    computation moves to the log domain so log10 stays accurate (to well
    under 1e-6) even when the probability itself underflows.
    """
    if not (math.isfinite(q) and q >= 0):
        raise DataError(f"Q factor must be finite and nonnegative, got {q}")
    z = q / math.sqrt(2.0)
    if z <= 5.0:
        prob = 0.5 * math.erfc(z)
        return BerValue(prob=prob, log10=math.log10(prob))
    ln_ber = _log_erfc_asymptotic(z) - math.log(2.0)
    log10 = ln_ber / math.log(10.0)
    prob = math.exp(ln_ber) if ln_ber >= math.log(_TINY) else 0.0
    return BerValue(prob=max(prob, _TINY), log10=log10)


def estimate_ber(samples, *, tol: float = 1e-9, max_iter: int = 500):
    """Full pipeline: mixture fit, Q factor, BER.

    Returns (MixtureFit, q, BerValue) so every intermediate is auditable.
    """
    fit = fit_mixture(samples, tol=tol, max_iter=max_iter)
    q = q_factor(fit)
    return fit, q, ber_from_q(q)


def read_samples(path) -> np.ndarray:
    """Load amplitude samples from a text or CSV file.

    Accepted layouts: one amplitude per line, or a CSV with an "amplitude"
    header column. Lines starting with '#' are comments.
    """
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = [ln.strip() for ln in fh]
    except OSError as exc:
        raise DataError(f"cannot read samples file {path}: {exc}") from None
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines:
        raise DataError(f"samples file {path} contains no data")

    if "amplitude" in lines[0].replace(" ", "").split(","):
        reader = csv.DictReader(lines)
        try:
            values = [float(row["amplitude"]) for row in reader]
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"bad amplitude column in {path}: {exc}") from None
    else:
        values = []
        for i, ln in enumerate(lines, start=1):
            try:
                values.append(float(ln))
            except ValueError:
                raise DataError(
                    f"line {i} of {path} is not a number: {ln!r}"
                ) from None
    return np.asarray(values, dtype=float)
