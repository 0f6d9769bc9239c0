"""
Mask plans of the multi-view masked autoencoder

Tokens of a clip are laid out as (view, frame, grid cell). A plan marks the
kept tokens. With view masking one view per frame is hidden completely and
a random subset of the other views' tokens of that frame is kept.
"""

from dataclasses import dataclass

import numpy as np


NO_VIEW = -1
MASK_RATIO_SCOPES = ("remaining", "overall")


@dataclass
class MaskPlan:
    """
    Kept tokens of one clip, or of a batch of clips when stacked

    Attributes
    ----------
    masked_view : ndarray of shape (T,) or (B, T), int
        Fully masked view per frame, `NO_VIEW` when no view is hidden
    keep : ndarray of shape (V, T, N) or (B, V, T, N), bool
        True for tokens passed to the encoder
    ratio : float
        Mask ratio the plan was sampled with
    """

    masked_view: np.ndarray
    keep: np.ndarray
    ratio: float

    @property
    def batched(self):
        return self.keep.ndim == 4

    @property
    def kept_count(self):
        """Number of kept tokens per clip"""
        keep = self.keep if self.batched else self.keep[np.newaxis]
        counts = keep.reshape(len(keep), -1).sum(axis=1)
        if len(set(counts.tolist())) != 1:
            raise ValueError("Clips of a plan batch keep different counts")
        return int(counts[0])

    def view_masked(self):
        """Bool array like `keep`, True for tokens of the hidden views"""
        keep = self.keep
        views = np.arange(keep.shape[-3])
        hidden = self.masked_view[..., np.newaxis, :] == \
            views.reshape((-1, 1))
        return np.broadcast_to(hidden[..., np.newaxis], keep.shape)


# -----------------------------------------------------------------------------
def kept_per_frame(num_views, num_cells, ratio, scope="remaining",
                   view_masking=True):
    """
    Number of kept tokens per frame

    Parameters
    ----------
    num_views : int
        V
    num_cells : int
        Tokens per view and frame, g * g
    ratio : float
        Mask ratio m in [0, 1)
    scope : str
        `remaining` applies m to the tokens left after view masking,
        `overall` to all tokens of the frame including the hidden view
    view_masking : bool

    Returns
    -------
    int
    """

    if scope not in MASK_RATIO_SCOPES:
        raise ValueError("Unknown mask ratio scope '{}'".format(scope))
    if not 0.0 <= ratio < 1.0:
        raise ValueError("Mask ratio must be in [0, 1), got {}".format(ratio))

    if not view_masking or num_views == 1:
        candidates = num_views * num_cells
        if ratio == 0:
            return candidates
        return max(1, round((1.0 - ratio) * candidates))

    remaining = (num_views - 1) * num_cells
    if scope == "remaining":
        return max(1, round((1.0 - ratio) * remaining))
    return min(remaining,
               max(1, round((1.0 - ratio) * num_views * num_cells)))


def sample_mask_plan(num_views, num_frames, grid_size, ratio, rng,
                     scope="remaining"):
    """
    Sample a view masking plan for one clip

    Per frame, one view is chosen uniformly and hidden (skipped for a single
    view). Among the tokens of the other views of that frame a fixed number
    is kept, drawn uniformly without replacement.

    Parameters
    ----------
    num_views, num_frames, grid_size : int
        V, T and g
    ratio : float
        Mask ratio m in [0, 1)
    rng : numpy.random.Generator
    scope : str
        See `kept_per_frame`

    Returns
    -------
    MaskPlan
    """

    cells = grid_size * grid_size
    keep_count = kept_per_frame(num_views, cells, ratio, scope)
    keep = np.zeros((num_views, num_frames, cells), dtype=bool)
    masked_view = np.full(num_frames, NO_VIEW, dtype=np.int64)

    for frame in range(num_frames):
        candidates = np.ones((num_views, cells), dtype=bool)
        if num_views > 1:
            masked_view[frame] = rng.integers(num_views)
            candidates[masked_view[frame]] = False
        flat = np.flatnonzero(candidates)
        chosen = rng.choice(flat, size=keep_count, replace=False)
        frame_keep = np.zeros(num_views * cells, dtype=bool)
        frame_keep[chosen] = True
        keep[:, frame] = frame_keep.reshape(num_views, cells)

    return MaskPlan(masked_view=masked_view, keep=keep, ratio=ratio)


def sample_uniform_mask_plan(num_views, num_frames, grid_size, ratio, rng):
    """
    Uniform masking over the tokens of all views, no view is hidden

    `ratio = 0` keeps every token, which is the encoding mode.
    """

    cells = grid_size * grid_size
    keep_count = kept_per_frame(num_views, cells, ratio, view_masking=False)
    keep = np.zeros((num_views, num_frames, cells), dtype=bool)
    for frame in range(num_frames):
        chosen = rng.choice(num_views * cells, size=keep_count, replace=False)
        frame_keep = np.zeros(num_views * cells, dtype=bool)
        frame_keep[chosen] = True
        keep[:, frame] = frame_keep.reshape(num_views, cells)
    return MaskPlan(masked_view=np.full(num_frames, NO_VIEW, dtype=np.int64),
                    keep=keep, ratio=ratio)


def unmasked_plan(num_views, num_frames, grid_size):
    """Plan keeping every token"""
    cells = grid_size * grid_size
    return MaskPlan(
        masked_view=np.full(num_frames, NO_VIEW, dtype=np.int64),
        keep=np.ones((num_views, num_frames, cells), dtype=bool),
        ratio=0.0)


def sample_mask_plans(batch_size, num_views, num_frames, grid_size, ratio,
                      rng, scope="remaining", view_masking=True):
    """One plan per clip, stacked to a batched `MaskPlan`"""
    if view_masking:
        plans = [sample_mask_plan(num_views, num_frames, grid_size, ratio,
                                  rng, scope=scope)
                 for _ in range(batch_size)]
    else:
        plans = [sample_uniform_mask_plan(num_views, num_frames, grid_size,
                                          ratio, rng)
                 for _ in range(batch_size)]
    return stack_mask_plans(plans)


def stack_mask_plans(plans):
    if not plans:
        raise ValueError("Can not stack an empty list of plans")
    return MaskPlan(
        masked_view=np.stack([plan.masked_view for plan in plans]),
        keep=np.stack([plan.keep for plan in plans]),
        ratio=plans[0].ratio)
