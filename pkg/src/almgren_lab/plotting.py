"""PNG figures for the CSV/JSON artifacts (non-interactive Agg backend)."""

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_META = {"Software": None}  # keep files byte-stable across runs


def _save(fig, directory, name):
    path = os.path.join(directory, name)
    fig.tight_layout()
    fig.savefig(path, dpi=110, metadata=_META)
    plt.close(fig)
    return path


def plot_spectrum(spectrum, directory, name="spectrum.png"):
    fig, ax = plt.subplots(figsize=(5, 3.5))
    k = np.arange(1, spectrum.count + 1)
    ax.plot(k, spectrum.eigenvalues, "o", ms=4, label=r"$\mu_k$")
    if spectrum.pd_margin > 0:
        ax.plot(k, spectrum.sigma_plus, "s", ms=3, label=r"$\sigma^+_k$")
    ax.set_xlabel("k")
    ax.legend()
    ax.grid(alpha=0.3)
    return _save(fig, directory, name)


def plot_profile(profile, directory, gamma=None, name="frequency.png"):
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.5))
    r = profile.radii
    ax = axes[0]
    ax.semilogx(r, profile.N, "-", label="N(r)")
    if gamma is not None:
        ax.axhline(gamma, color="k", lw=0.8, ls="--", label=r"$\gamma$")
    ax.set_xlabel("r")
    ax.legend()
    ax.grid(alpha=0.3)
    ax = axes[1]
    ax.loglog(r, np.maximum(profile.identity_residual, 1e-18), label="D - rH'/2")
    ax.loglog(r, np.maximum(profile.decomposition_residual, 1e-18), label=r"N' - $\nu_1-\nu_2$")
    ax.loglog(r, np.maximum(profile.nu1, 1e-18), label=r"$\nu_1$")
    ax.set_xlabel("r")
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    return _save(fig, directory, name)


def plot_height_scaling(profile, gamma, directory, name="height_scaling.png"):
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.semilogx(profile.radii, profile.H / profile.radii ** (2 * gamma))
    ax.set_xlabel("r")
    ax.set_ylabel(r"$H(r)\,r^{-2\gamma}$")
    ax.grid(alpha=0.3)
    return _save(fig, directory, name)


def plot_traces(trace, directory, name="blowup.png"):
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.loglog(trace.lambdas, np.maximum(trace.e0, 1e-18), "o-", ms=3, label=r"$e_0$")
    ax.loglog(trace.lambdas, np.maximum(trace.e1, 1e-18), "s-", ms=3, label=r"$e_1$")
    ax.set_xlabel(r"$\lambda$")
    ax.legend()
    ax.grid(alpha=0.3)
    return _save(fig, directory, name)


def plot_envelope(envelope, directory, name="eta.png"):
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for vals, lab in ((envelope.eta0, r"$\eta_0$"), (envelope.eta1, r"$\eta_1$")):
        if np.any(vals > 0):
            ax.loglog(envelope.radii, vals, "o-", ms=3, label=lab)
    ax.set_xlabel("r")
    if ax.get_legend_handles_labels()[0]:
        ax.legend()
    ax.grid(alpha=0.3)
    return _save(fig, directory, name)


def plot_modes(fld, directory, count=6, name="modes.png"):
    fig, ax = plt.subplots(figsize=(5, 3.5))
    r = fld.grid.nodes
    amp = np.abs(fld.phi_nodes)
    order = np.argsort(-amp.max(axis=0))[:count]
    for k in sorted(order):
        if amp[:, k].max() > 0:
            ax.loglog(r, np.maximum(amp[:, k], 1e-300), label=f"k={k + 1}")
    ax.set_xlabel("r")
    ax.set_ylabel(r"$|\varphi_k(r)|$")
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    return _save(fig, directory, name)
