"""Static SVG figures (decorative; nothing is computed here)."""
from __future__ import annotations

import io
import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .artifacts import atomic_write_bytes  # noqa: E402

_RC = {"svg.hashsalt": "neutral-saddle", "svg.fonttype": "none", "font.size": 9}


def _save(fig, path: Path) -> None:
    buf = io.BytesIO()
    with matplotlib.rc_context(_RC):
        fig.savefig(buf, format="svg", metadata={"Date": None})
    plt.close(fig)
    atomic_write_bytes(path, buf.getvalue())


def plot_dulac(report, path: Path) -> None:
    with matplotlib.rc_context(_RC):
        fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.6))
        T = np.asarray(report.T_grid)
        ax1.loglog(T, report.xi_measured, "o", label="xi measured")
        ax1.loglog(T, report.xi_asymptotic, "-", label="xi asymptotic")
        ax1.loglog(T, report.omega_measured, "s", mfc="none", label="omega measured")
        ax1.loglog(T, report.omega_asymptotic, "--", label="omega asymptotic")
        ax1.set_xlabel("T")
        ax1.legend(frameon=False)
        ax2.loglog(T, np.maximum(report.rel_errors, 1e-17), "o-", label="xi")
        ax2.loglog(T, np.maximum(report.omega_rel_errors, 1e-17), "s--", label="omega")
        ax2.set_xlabel("T")
        ax2.set_ylabel("relative error")
        ax2.set_title(f"slope {report.fitted_error_exponent:.2f}")
        ax2.legend(frameon=False)
        fig.tight_layout()
    _save(fig, path)


def plot_theta(fits, path: Path) -> None:
    with matplotlib.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(5, 3.6))
        for f in fits:
            ax.loglog(f.T_grid, f.thetas, "o-", ms=3,
                      label=f"rho={f.rho:g}: {f.regime}, slope {f.exponent:.3f}")
        ax.set_xlabel("T")
        ax.set_ylabel("Theta")
        ax.legend(frameon=False, fontsize=7)
        fig.tight_layout()
    _save(fig, path)


def plot_tail(tau: np.ndarray, estimate, path: Path) -> None:
    with matplotlib.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(5, 3.6))
        x = np.sort(tau)
        n = len(x)
        idx = np.unique(np.geomspace(1, n, 400).astype(int)) - 1
        surv = 1.0 - idx / n
        ax.loglog(x[idx], surv, ".", ms=3, label="empirical")
        t = np.geomspace(estimate.threshold, x[-1], 50)
        ax.loglog(t, estimate.C_hat * t ** -estimate.beta_hat, "-",
                  label=f"fit beta={estimate.beta_hat:.3f}")
        ax.set_xlabel("t")
        ax.set_ylabel("P(tau > t)")
        ax.legend(frameon=False)
        fig.tight_layout()
    _save(fig, path)


def plot_limits(scaled_last: np.ndarray, report, path: Path) -> None:
    with matplotlib.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(5, 3.6))
        lo, hi = np.percentile(scaled_last, [0.5, 99.5])
        ax.hist(scaled_last, bins=80, range=(lo, hi), density=True, alpha=0.6)
        if report.regime != "stable":
            sd = report.reference_sigma or float(np.std(scaled_last))
            z = np.linspace(lo, hi, 200)
            ax.plot(z, np.exp(-0.5 * (z / sd) ** 2) / (sd * math.sqrt(2 * math.pi)), "-")
        ax.set_xlabel(f"S_t / {report.scaling_used}")
        ax.set_title(f"rho={report.rho:g} ({report.regime}), t={report.horizon_T:g}")
        fig.tight_layout()
    _save(fig, path)
