"""Density figures for cosine CSV files.

Renders the observed (and, when present, unobserved) cosine distributions
of a run next to the closed-form null density, mirroring the delimited
output so results can be eyeballed without external tooling. matplotlib is
imported lazily; nothing else in the toolkit depends on it.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .sphere import NullCosineDistribution

_LABEL_COLORS = {"observed": "tab:blue", "unobserved": "tab:orange"}


def plot_cosine_densities(
    values_by_label: dict[str, np.ndarray],
    out_path: str | Path,
    dim: int | None = None,
    title: str | None = None,
) -> Path:
    """Writes a density plot of cosine samples to an image file.

    Args:
      values_by_label: Cosine samples keyed by "observed"/"unobserved".
      out_path: Destination image path (format from the extension).
      dim: When given, overlays the exact null cosine density for that
        dimension as a reference curve.
      title: Optional figure title.

    Returns:
      The path written.
    """
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    if not values_by_label:
        raise ValueError("need at least one labeled sample set")

    fig, ax = plt.subplots(figsize=(7, 4.5))
    spans = []
    for label, values in sorted(values_by_label.items()):
        values = np.asarray(values, dtype=np.float64)
        if values.size == 0:
            continue
        spans.append((values.min(), values.max()))
        ax.hist(
            values,
            bins=min(80, max(10, values.size // 10)),
            density=True,
            alpha=0.45,
            color=_LABEL_COLORS.get(label),
            label=f"{label} (n={values.size})",
        )
    if not spans:
        raise ValueError("all sample sets are empty")

    if dim is not None:
        null = NullCosineDistribution(dim)
        width = 6.0 / np.sqrt(dim)
        lo = min(min(s[0] for s in spans), -width)
        hi = max(max(s[1] for s in spans), width)
        grid = np.linspace(max(lo, -1.0 + 1e-9), min(hi, 1.0 - 1e-9), 512)
        ax.plot(grid, null.pdf(grid), "k-", lw=1.5, label=f"null (dim={dim})")

    ax.set_xlabel("cosine with released model")
    ax.set_ylabel("density")
    ax.legend()
    if title:
        ax.set_title(title)
    fig.tight_layout()

    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return out_path
