"""
Fixed 2D sin-cos position embeddings
"""

import numpy as np


# -----------------------------------------------------------------------------
def get_1d_sincos_pos_embed_from_grid(embed_dim, pos):
    """
    Parameters
    ----------
    embed_dim : int
        Output dimension of each position, even
    pos : ndarray
        Positions to encode, flattened to (M,)

    Returns
    -------
    ndarray of shape (M, embed_dim)
    """
    omega = np.arange(embed_dim // 2, dtype=np.float64)
    omega /= embed_dim / 2.0
    omega = 1.0 / 10000 ** omega

    pos = pos.reshape(-1)
    out = np.einsum("m,d->md", pos, omega)
    return np.concatenate([np.sin(out), np.cos(out)], axis=1)


def sincos_embedding(grid_size, width):
    """
    2D sin-cos table of a square token grid

    Half of the channels encode the row, the other half the column. Rows
    of the table follow the row-major order of the grid cells.

    Parameters
    ----------
    grid_size : int
        Side g of the token grid
    width : int
        Embedding width, divisible by 4

    Returns
    -------
    ndarray of shape (g * g, width), float32
    """

    if width % 4:
        raise ValueError(
            "Embedding width must be divisible by 4, got {}".format(width))
    if grid_size < 1:
        raise ValueError("Grid size must be positive, got {}".format(
            grid_size))

    rows, cols = np.meshgrid(np.arange(grid_size, dtype=np.float64),
                             np.arange(grid_size, dtype=np.float64),
                             indexing="ij")
    emb_rows = get_1d_sincos_pos_embed_from_grid(width // 2, rows)
    emb_cols = get_1d_sincos_pos_embed_from_grid(width // 2, cols)
    return np.concatenate([emb_rows, emb_cols], axis=1).astype(np.float32)
