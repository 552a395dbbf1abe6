"""Seeded test fields shared by the surveys and the dispersive measurements."""

from __future__ import annotations

import numpy as np

from .errors import ConfigurationError
from .grid import Grid2D, l2_norm


def _mode_list(grid: Grid2D, k_cut: float) -> np.ndarray:
    mmax = int(np.floor(k_cut / grid.dk))
    if mmax >= grid.n // 3:
        raise ConfigurationError(f"k_cut={k_cut} is not resolved in the lower third of the n={grid.n} lattice")
    m = np.arange(-mmax, mmax + 1)
    mx, my = np.meshgrid(m, m, indexing="ij")
    keep = (mx**2 + my**2) * grid.dk**2 <= k_cut**2
    return np.column_stack([mx[keep], my[keep]])


def random_bandlimited_fields(grid: Grid2D, count: int, seed: int = 0, k_cut: float = 2.0,
                              envelope: float | None = 2.0, normalize: bool = True) -> np.ndarray:
    """``count`` random fields with Fourier support in ``|k| <= k_cut``, times a Gaussian envelope.

    Coefficients are drawn on the integer mode lattice of the box, which does
    not depend on ``n``: the same seed gives the same continuum field on
    every resolution of the same ``L``, so refinement surveys compare like
    with like.  The envelope widens the spectrum by a Gaussian of width
    ``1/envelope`` and localises the field near the origin.
    """
    modes = _mode_list(grid, k_cut)
    rng = np.random.default_rng(seed)
    coef = rng.standard_normal((count, len(modes))) + 1j * rng.standard_normal((count, len(modes)))
    spec = np.zeros((count, grid.n, grid.n), dtype=complex)
    spec[:, modes[:, 0] % grid.n, modes[:, 1] % grid.n] = coef
    # Synthesize sum_m c_m exp(i k_m . x) on the nodes; x starts at -L.
    f = np.fft.ifft2(spec * grid._phase, axes=(-2, -1)) * grid.n**2
    if envelope is not None:
        f = f * np.exp(-grid.r2 / (2.0 * envelope**2))
    if normalize:
        f = f / l2_norm(grid, f)[:, None, None]
    return f


def gaussian_family(grid: Grid2D, widths, modulations=(0.0,)) -> tuple[np.ndarray, list[str]]:
    """Centred Gaussians of several widths times plane-wave modulations ``exp(i k x)``."""
    out, labels = [], []
    for w in widths:
        g = grid.gaussian(w)
        for k in modulations:
            out.append(g * np.exp(1j * k * grid.X))
            labels.append(f"gauss_w{w:g}_k{k:g}")
    return np.array(out), labels
