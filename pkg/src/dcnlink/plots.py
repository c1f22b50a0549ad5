"""Figure rendering for the CLI report paths (written to files, never shown)."""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .berstats import MixtureFit
from .explorer import CalibrationResult, FeasibleDesign
from .optics import PowerTrace
from .rules import DecisionStump, LabeledSample, PassFail, ThresholdRuleSet


def _norm_pdf(x, mu, sigma):
    return np.exp(-0.5 * ((x - mu) / sigma) ** 2) / (sigma * math.sqrt(2 * math.pi))


def save_mixture_figure(samples, fit: MixtureFit, path) -> None:
    """Amplitude histogram with the fitted two-Gaussian density overlaid."""
    x = np.asarray(samples, dtype=float)
    grid = np.linspace(x.min(), x.max(), 512)
    pdf0 = fit.w0 * _norm_pdf(grid, fit.mu0, fit.sigma0)
    pdf1 = fit.w1 * _norm_pdf(grid, fit.mu1, fit.sigma1)

    fig, ax = plt.subplots(figsize=(7, 4))
    ax.hist(x, bins=100, density=True, alpha=0.45, color="steelblue", label="samples")
    ax.plot(grid, pdf0, color="darkorange", label="bit-zero component")
    ax.plot(grid, pdf1, color="crimson", label="bit-one component")
    ax.plot(grid, pdf0 + pdf1, color="black", linewidth=1.0, linestyle="--", label="mixture")
    ax.set_xlabel("amplitude")
    ax.set_ylabel("density")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_stump_figure(samples: list[LabeledSample], stump: DecisionStump, path) -> None:
    """Feature values by label with the learned threshold line."""
    fig, ax = plt.subplots(figsize=(7, 3))
    rng = np.random.default_rng(0)  # jitter only; fixed seed keeps output stable
    for label, color, row in ((PassFail.FAIL, "crimson", 0.0), (PassFail.PASS, "seagreen", 1.0)):
        vals = [s.features[stump.feature] for s in samples if s.label is label]
        ax.scatter(
            vals,
            row + rng.uniform(-0.08, 0.08, size=len(vals)),
            s=28,
            color=color,
            label=label.value,
        )
    ax.axvline(stump.threshold, color="black", linestyle="--",
               label=f"threshold {stump.threshold:.2f} dBm")
    ax.set_yticks([0, 1], ["fail", "pass"])
    ax.set_xlabel(f"{stump.feature} (dBm)")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_trace_figure(trace: PowerTrace, rules: ThresholdRuleSet, path) -> None:
    """Stage-by-stage power staircase with the applicable floors."""
    labels = [s[0] for s in trace.stages]
    powers = [s[1] for s in trace.stages]
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.step(range(len(powers)), powers, where="post", marker="o", color="steelblue")
    if trace.preamp_index is None:
        ax.axhline(rules.rx_floor_no_amp, color="crimson", linestyle="--",
                   label=f"rx floor {rules.rx_floor_no_amp} dBm")
    else:
        ax.axhline(rules.preamp_floor, color="darkorange", linestyle="--",
                   label=f"preamp floor {rules.preamp_floor} dBm")
        ax.axhline(rules.rx_floor_with_amp, color="crimson", linestyle="--",
                   label=f"rx floor {rules.rx_floor_with_amp} dBm")
        ax.axvline(trace.preamp_index, color="gray", linewidth=0.8)
    ax.set_xticks(range(len(labels)), labels, rotation=45, fontsize=8)
    ax.set_ylabel("power (dBm)")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_calibration_figure(result: CalibrationResult, path) -> None:
    """Per-scenario residual bars for one wavelength's loss fit."""
    names = [s for s, _ in result.residuals]
    vals = [r for _, r in result.residuals]
    fig, ax = plt.subplots(figsize=(7, 3.5))
    ax.bar(range(len(vals)), vals, color="steelblue")
    ax.axhline(0.0, color="black", linewidth=0.8)
    ax.set_xticks(range(len(names)), names, rotation=45, fontsize=8)
    ax.set_ylabel("residual (dB)")
    ax.set_title(
        f"{result.wavelength_nm:g} nm: loss_S={result.loss_s_db:.2f} dB, "
        f"loss_M={result.loss_m_db:.2f} dB, rms={result.residual_rms_db:.2f} dB",
        fontsize=9,
    )
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_explore_figure(results: list[FeasibleDesign], path) -> None:
    """Feasible designs: minimum margin against component count."""
    fig, ax = plt.subplots(figsize=(7, 4))
    xs = [fd.design.total_components for fd in results]
    ys = [fd.min_margin_db for fd in results]
    ax.scatter(xs, ys, s=24, color="steelblue", alpha=0.8)
    ax.set_xlabel("total components")
    ax.set_ylabel("minimum margin (dB)")
    if results:
        best = results[0]
        ax.annotate(
            "best",
            (best.design.total_components, best.min_margin_db),
            textcoords="offset points",
            xytext=(6, 4),
            fontsize=8,
        )
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
