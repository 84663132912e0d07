"""Dense patch grids, cosine nearest-neighbour matching, and the patch style loss.

A feature tensor (C, h, w) is decomposed into every k x k patch at stride 1,
so patch (i, j) covers rows i..i+k-1 and columns j..j+k-1 in row-major grid
order.  Matching compares whole patch vectors (activation and semantic
channels together) by normalised cross-correlation; the style energy sums
squared differences over all channels but its gradient flows only into the
activation channels of the current image.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import ShapeError, ValidationError
from .semantic import AugmentedFeatures
from .tensor import DTYPE, require_chw
from .threads import worker_count

# Guard against division by zero when normalising all-zero patches.
NORM_EPS = 1e-12

# Fixed blocking constants.  Results must not depend on the worker count, so
# chunk boundaries are a function of problem size only.
_CURRENT_CHUNK = 1024
_STYLE_BLOCK = 2048


@dataclass(frozen=True)
class PatchGrid:
    """All k x k patches of one feature tensor, flattened row-major.

    ``patches`` has shape (P, C * k * k) where P = grid_h * grid_w and each
    row is the (C, k, k) window flattened channel-major.  ``norms`` holds the
    Euclidean norm of each row.
    """

    patches: np.ndarray
    norms: np.ndarray
    channels: int
    k: int
    grid_h: int
    grid_w: int

    def __post_init__(self) -> None:
        if self.patches.ndim != 2:
            raise ShapeError(f"patches must be 2-d, got {self.patches.ndim}-d")
        expect = (self.grid_h * self.grid_w, self.channels * self.k * self.k)
        if self.patches.shape != expect:
            raise ShapeError(f"patches shape {self.patches.shape}, expected {expect}")
        if self.norms.shape != (self.patches.shape[0],):
            raise ShapeError("norms must have one entry per patch")

    @property
    def count(self) -> int:
        return self.patches.shape[0]


@dataclass(frozen=True)
class NNAssignment:
    """Best style patch per current patch: ``indices[i]`` maximises cosine
    similarity against current patch i, with exact ties resolved to the
    lowest style index.  ``scores`` holds the winning similarities."""

    indices: np.ndarray
    scores: np.ndarray


def _tensor_of(features: AugmentedFeatures | np.ndarray) -> np.ndarray:
    if isinstance(features, AugmentedFeatures):
        return features.data
    return features


def extract_patches(features: AugmentedFeatures | np.ndarray, k: int) -> PatchGrid:
    """Extract every k x k patch (stride 1) of a (C, h, w) tensor."""
    data = _tensor_of(features)
    require_chw(data, "features")
    c, h, w = data.shape
    if k < 1 or k % 2 == 0:
        raise ValidationError(f"patch size must be odd and positive, got {k}")
    if k > h or k > w:
        raise ValidationError(f"patch size {k} exceeds feature extent {h}x{w}")
    grid_h = h - k + 1
    grid_w = w - k + 1
    # (C, grid_h, grid_w, k, k) windows -> row-major (P, C*k*k) rows.
    windows = np.lib.stride_tricks.sliding_window_view(data, (k, k), axis=(1, 2))
    mat = np.ascontiguousarray(windows.transpose(1, 2, 0, 3, 4)).reshape(
        grid_h * grid_w, c * k * k
    )
    norms = np.sqrt(np.einsum("ij,ij->i", mat, mat, dtype=np.float64)).astype(DTYPE)
    return PatchGrid(
        patches=mat, norms=norms, channels=c, k=k, grid_h=grid_h, grid_w=grid_w
    )


def _normalised(grid: PatchGrid) -> np.ndarray:
    denom = np.maximum(grid.norms, DTYPE(NORM_EPS))
    return grid.patches / denom[:, None]


def _match_rows(
    cur: np.ndarray, style_t: np.ndarray, indices: np.ndarray, scores: np.ndarray
) -> None:
    """Fill best style indices/scores for one block of current rows."""
    n_style = style_t.shape[1]
    best_score = np.full(cur.shape[0], -np.inf, dtype=DTYPE)
    best_idx = np.zeros(cur.shape[0], dtype=np.int64)
    for j0 in range(0, n_style, _STYLE_BLOCK):
        sim = cur @ style_t[:, j0 : j0 + _STYLE_BLOCK]
        local = np.argmax(sim, axis=1)
        local_best = sim[np.arange(sim.shape[0]), local]
        # Strict > keeps the lowest style index on exact ties, because
        # blocks are visited in ascending index order and argmax already
        # returns the first maximum within a block.
        better = local_best > best_score
        best_idx[better] = local[better] + j0
        best_score[better] = local_best[better]
    indices[:] = best_idx
    scores[:] = best_score


def nearest_neighbors(current: PatchGrid, style: PatchGrid) -> NNAssignment:
    """Cosine nearest style patch for every current patch.

    Patches are compared over all their channels after normalisation, so an
    all-zero patch scores 0 against everything and falls back to style
    index 0.  The search is blocked and may run on several threads, but
    block boundaries are fixed so results are identical for any worker
    count.
    """
    if current.channels != style.channels or current.k != style.k:
        raise ShapeError(
            f"patch layout mismatch: current {current.channels}ch k={current.k}, "
            f"style {style.channels}ch k={style.k}"
        )
    if style.count == 0:
        raise ValidationError("style grid has no patches")
    cur = _normalised(current)
    style_t = np.ascontiguousarray(_normalised(style).T)
    indices = np.empty(current.count, dtype=np.int64)
    scores = np.empty(current.count, dtype=DTYPE)
    starts = list(range(0, current.count, _CURRENT_CHUNK))
    workers = min(worker_count(), len(starts)) if starts else 1
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(
                    _match_rows,
                    cur[i0 : i0 + _CURRENT_CHUNK],
                    style_t,
                    indices[i0 : i0 + _CURRENT_CHUNK],
                    scores[i0 : i0 + _CURRENT_CHUNK],
                )
                for i0 in starts
            ]
            for fut in futures:
                fut.result()
    else:
        for i0 in starts:
            _match_rows(
                cur[i0 : i0 + _CURRENT_CHUNK],
                style_t,
                indices[i0 : i0 + _CURRENT_CHUNK],
                scores[i0 : i0 + _CURRENT_CHUNK],
            )
    return NNAssignment(indices=indices, scores=scores)


def style_loss_and_grad(
    current: AugmentedFeatures,
    style: PatchGrid,
    nn: NNAssignment,
    k: int,
    current_grid: PatchGrid | None = None,
) -> tuple[float, np.ndarray]:
    """Patch style energy and its gradient w.r.t. the activation channels.

    The energy is the sum of squared differences between each current patch
    and its assigned style patch over all channels.  Semantic channels
    contribute to the energy but are fixed inputs, so the returned gradient
    covers only the first ``n_activation`` channels and has the spatial
    shape of ``current``.  Pass ``current_grid`` to reuse patches already
    extracted from ``current``.
    """
    grid = current_grid if current_grid is not None else extract_patches(current, k)
    if grid.channels != current.data.shape[0] or grid.k != k:
        raise ShapeError("current_grid does not match the augmented features")
    if grid.channels != style.channels or style.k != k:
        raise ShapeError("style grid does not match the augmented features")
    if nn.indices.shape != (grid.count,):
        raise ShapeError(
            f"assignment covers {nn.indices.shape[0]} patches, expected {grid.count}"
        )
    diff = grid.patches - style.patches[nn.indices]
    energy = float(np.einsum("ij,ij->", diff, diff, dtype=np.float64))
    n_act = current.n_activation
    c, h, w = current.data.shape
    # Scatter 2 * diff back over the patch footprints, activation rows only.
    diff5 = diff.reshape(grid.grid_h, grid.grid_w, c, k, k)[:, :, :n_act]
    grad = np.zeros((n_act, h, w), dtype=DTYPE)
    for dy in range(k):
        for dx in range(k):
            grad[:, dy : dy + grid.grid_h, dx : dx + grid.grid_w] += (
                DTYPE(2.0) * diff5[:, :, :, dy, dx].transpose(2, 0, 1)
            )
    return energy, grad
