"""Figure rendering for CLI runs.

Each experiment kind gets a small set of PNG figures written next to its CSV
output: convergence curves on log-log axes for sweeps, heatmaps for 2-D
fields, bar charts for case tables and covering layers. Rendering is
best-effort decoration of the primary CSV/JSON outputs and never raises on an
empty result set.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .geometry import Label


def _save(fig, path: Path) -> Path:
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return path


def _sweep_figure(records, parameter: str, outdir: Path, name: str) -> list[Path]:
    good = [r for r in records if not r.error]
    if len(good) < 2:
        return []
    xs = np.array([r.value for r in good])
    keys = sorted(
        k
        for k in good[0].diagnostics
        if k.startswith("pairing_err_") or k in ("error_l2", "l2_norm_u")
    )
    keys = [k for k in keys if all(k in r.diagnostics for r in good)]
    if not keys:
        return []
    fig, ax = plt.subplots(figsize=(6, 4.5))
    for k in keys:
        ys = np.array([r.diagnostics[k] for r in good])
        positive = ys > 0
        if positive.sum() >= 2:
            ax.loglog(xs[positive], ys[positive], marker="o", label=k)
    ax.set_xlabel(parameter)
    ax.set_ylabel("value")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=7)
    ax.set_title(name)
    return [_save(fig, outdir / f"{name}.png")]


def _heatmap(values: np.ndarray, grid, hide: np.ndarray | None, outdir: Path, name: str) -> list[Path]:
    if grid.dim != 2:
        return []
    vals = np.array(values, dtype=float)
    if hide is not None:
        vals[hide] = np.nan
    x0, y0 = grid.origin
    h = grid.spacing
    nx, ny = grid.extents
    fig, ax = plt.subplots(figsize=(5.5, 4.5))
    im = ax.imshow(
        vals.T,
        origin="lower",
        extent=(x0, x0 + nx * h, y0, y0 + ny * h),
        interpolation="nearest",
        cmap="viridis",
    )
    fig.colorbar(im, ax=ax)
    ax.set_title(name)
    return [_save(fig, outdir / f"{name}.png")]


def _field_figure(field, mask, outdir: Path, name: str) -> list[Path]:
    hide = None if mask is None else mask.labels == int(Label.EXTERIOR)
    return _heatmap(field.values, field.grid, hide, outdir, name)


def _kernel_figure(kern, spec, outdir: Path) -> list[Path]:
    rs = np.linspace(0.0, spec.support_radius * 1.1, 512)
    vals = np.array([spec.value_at_radius(r) for r in rs])
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(rs, vals)
    ax.axvline(spec.support_radius, color="gray", linestyle=":")
    ax.set_xlabel("radius")
    ax.set_ylabel("kernel value")
    ax.set_title(f"{spec.profile.value} profile, delta={spec.delta}")
    paths = [_save(fig, outdir / "kernel-profile.png")]
    if kern is not None and kern.offsets.shape[1] == 2:
        fig, ax = plt.subplots(figsize=(5, 4.5))
        st = kern.stencil()
        m = (np.array(st.shape) - 1) // 2
        im = ax.imshow(
            st.T,
            origin="lower",
            extent=(-m[0] - 0.5, m[0] + 0.5, -m[1] - 0.5, m[1] + 0.5),
            cmap="magma",
        )
        fig.colorbar(im, ax=ax)
        ax.set_title("sampled stencil (cells)")
        paths.append(_save(fig, outdir / "kernel-stencil.png"))
    return paths


def _covering_figure(cert, outdir: Path) -> list[Path]:
    if not cert.alphas:
        return []
    layers = np.arange(1, len(cert.alphas) + 1)
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.8))
    axes[0].bar(layers, cert.layer_counts, color="tab:blue")
    axes[0].set_xlabel("layer")
    axes[0].set_ylabel("node count")
    axes[1].bar(layers, cert.alphas, color="tab:orange")
    axes[1].set_xlabel("layer")
    axes[1].set_ylabel("alpha")
    title = (
        f"lambda_lower = {cert.lambda_lower:.3e}"
        if cert.established
        else "certificate failed"
    )
    fig.suptitle(title)
    return [_save(fig, outdir / "covering.png")]


def _verdict_figure(verdicts, outdir: Path) -> list[Path]:
    if not verdicts:
        return []
    fig, ax = plt.subplots(figsize=(7, 4))
    names = [v.case_id for v in verdicts]
    dists = [max(v.distance, 1e-16) for v in verdicts]
    colors = ["tab:green" if v.equal else "tab:red" for v in verdicts]
    ax.bar(names, dists, color=colors)
    ax.set_yscale("log")
    ax.axhline(0.05, color="gray", linestyle=":", label="inequality threshold")
    ax.set_ylabel("relative distance")
    ax.tick_params(axis="x", rotation=30)
    ax.legend()
    fig.suptitle("iterated-limit case distances (green = equal verdict)")
    return [_save(fig, outdir / "iterated-limits.png")]


def _cell_figure(sol, outdir: Path) -> list[Path]:
    paths = []
    for i, corr in enumerate(sol.correctors):
        paths.extend(_heatmap(corr.values, corr.grid, ~sol.material, outdir, f"corrector{i + 1}"))
    return paths


def render(kind: str, outdir: Path, extras: dict) -> list[Path]:
    outdir.mkdir(parents=True, exist_ok=True)
    if kind in ("epsilon-sweep", "delta-sweep", "nonlocal-critical"):
        return _sweep_figure(extras.get("records", []), extras.get("parameter", "epsilon"), outdir, kind)
    if kind in ("solve", "eigen"):
        u = extras.get("u")
        if u is None:
            return []
        name = "solution" if kind == "solve" else "eigenvector"
        return _field_figure(u, extras.get("mask"), outdir, name)
    if kind == "validate-kernel":
        return _kernel_figure(extras.get("kernel"), extras.get("spec"), outdir)
    if kind == "covering":
        cert = extras.get("certificate")
        return _covering_figure(cert, outdir) if cert is not None else []
    if kind == "iterated-limits":
        return _verdict_figure(extras.get("verdicts", []), outdir)
    if kind == "cell-coefficients":
        sol = extras.get("cell")
        return _cell_figure(sol, outdir) if sol is not None else []
    return []
