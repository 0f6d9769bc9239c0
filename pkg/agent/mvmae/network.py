"""
Multi-view masked autoencoder network

Images of every view pass a shared convolutional stem. Each cell of the
resulting feature grid becomes a token carrying a fixed sin-cos position
embedding and learnable view and frame parameters. A ViT encoder reads the
kept tokens of all views and frames, a ViT decoder fills the masked
positions with a mask token and predicts pixel patches of every view and
frame plus one reward per frame.
"""

import logging

import numpy as np
import torch
import torch.nn as nn
from timm.models.vision_transformer import Block

from agent.mvmae.embeddings import sincos_embedding
from utils.exceptions import NonFiniteLossError


PATCH_SIZE = 16
IMAGE_MEAN = (0.485, 0.456, 0.406)
IMAGE_STD = (0.229, 0.224, 0.225)


# -----------------------------------------------------------------------------
def normalize_images(images):
    """
    Normalize channel-last images in [0, 1] with the ImageNet statistics

    Parameters
    ----------
    images : torch.Tensor of shape (..., H, W, 3)
    """
    mean = images.new_tensor(IMAGE_MEAN)
    std = images.new_tensor(IMAGE_STD)
    return (images - mean) / std


def denormalize_images(images):
    mean = images.new_tensor(IMAGE_MEAN)
    std = images.new_tensor(IMAGE_STD)
    return images * std + mean


def patchify(images):
    """
    (..., H, W, 3) images to (..., g * g, 16 * 16 * 3) patches

    Patches follow the row-major order of the feature grid.
    """
    *lead, height, width, channels = images.shape
    g_h, g_w = height // PATCH_SIZE, width // PATCH_SIZE
    x = images.reshape(*lead, g_h, PATCH_SIZE, g_w, PATCH_SIZE, channels)
    n = len(lead)
    x = x.permute(*range(n), n, n + 2, n + 1, n + 3, n + 4)
    return x.reshape(*lead, g_h * g_w, PATCH_SIZE * PATCH_SIZE * channels)


def unpatchify(patches, grid_size):
    """Inverse of `patchify` for a square grid"""
    *lead, _, _ = patches.shape
    x = patches.reshape(*lead, grid_size, grid_size, PATCH_SIZE, PATCH_SIZE, 3)
    n = len(lead)
    x = x.permute(*range(n), n, n + 2, n + 1, n + 3, n + 4)
    side = grid_size * PATCH_SIZE
    return x.reshape(*lead, side, side, 3)


# -----------------------------------------------------------------------------
class ConvStem(nn.Module):
    """Four stride-2 convolutions, shared by all views"""

    def __init__(self, channels=(32, 64, 128, 256)):
        super().__init__()
        layers = []
        in_channels = 3
        for index, out_channels in enumerate(channels):
            layers.append(nn.Conv2d(in_channels, out_channels, kernel_size=4,
                                    stride=2, padding=1))
            if index < len(channels) - 1:
                layers.append(nn.GELU())
            in_channels = out_channels
        self.layers = nn.Sequential(*layers)
        self.out_channels = channels[-1]

    def forward(self, images):
        """
        Parameters
        ----------
        images : torch.Tensor of shape (..., side, side, 3)
            Normalized images, channel last

        Returns
        -------
        torch.Tensor of shape (..., g, g, D)
        """
        *lead, height, width, channels = images.shape
        if height != width or height % PATCH_SIZE:
            raise ValueError(
                "Image side must be square and divisible by {}, got {}x{}"
                .format(PATCH_SIZE, height, width))
        x = images.reshape(-1, height, width, channels).permute(0, 3, 1, 2)
        x = self.layers(x)
        x = x.permute(0, 2, 3, 1)
        return x.reshape(*lead, *x.shape[1:])


def transformer_blocks(width, depth, heads):
    return nn.ModuleList([
        Block(dim=width, num_heads=heads, mlp_ratio=4.0, qkv_bias=True,
              norm_layer=nn.LayerNorm)
        for _ in range(depth)])


class MvmaeNetwork(nn.Module):
    """
    Multi-view masked autoencoder

    Parameters
    ----------
    num_views : int
        Number of view parameter slots, one per configured view
    num_frames : int
        Clip length T, 1 without video autoencoding
    image_size : int
    conv_channels : sequence of 4 int
    width : int
        Token width of encoder and decoder
    encoder_depth, encoder_heads, decoder_depth, decoder_heads : int
    """

    def __init__(self, num_views, num_frames=1, image_size=64,
                 conv_channels=(32, 64, 128, 256), width=256,
                 encoder_depth=8, encoder_heads=4, decoder_depth=6,
                 decoder_heads=4):
        super().__init__()

        if image_size % PATCH_SIZE:
            raise ValueError("Image side must be divisible by {}".format(
                PATCH_SIZE))
        self.num_views = num_views
        self.num_frames = num_frames
        self.image_size = image_size
        self.grid_size = image_size // PATCH_SIZE
        self.num_cells = self.grid_size ** 2
        self.width = width

        # Encoder
        self.stem = ConvStem(conv_channels)
        self.feature_proj = nn.Linear(self.stem.out_channels, width)
        self.register_buffer("pos_embed", torch.from_numpy(
            sincos_embedding(self.grid_size, width)), persistent=False)
        self.view_embed = nn.Parameter(torch.zeros(num_views, width))
        self.time_embed = nn.Parameter(torch.zeros(num_frames, width))
        self.encoder_blocks = transformer_blocks(
            width, encoder_depth, encoder_heads)
        self.encoder_norm = nn.LayerNorm(width)

        # Decoder
        self.decoder_embed = nn.Linear(width, width)
        self.mask_token = nn.Parameter(torch.zeros(1, 1, width))
        self.register_buffer("decoder_pos_embed", torch.from_numpy(
            sincos_embedding(self.grid_size, width)), persistent=False)
        self.decoder_view_embed = nn.Parameter(torch.zeros(num_views, width))
        self.decoder_time_embed = nn.Parameter(torch.zeros(num_frames, width))
        self.reward_tokens = nn.Parameter(torch.zeros(num_frames, width))
        self.decoder_blocks = transformer_blocks(
            width, decoder_depth, decoder_heads)
        self.decoder_norm = nn.LayerNorm(width)
        self.patch_head = nn.Linear(width, PATCH_SIZE * PATCH_SIZE * 3)
        self.reward_head = nn.Linear(width, 1)

        self.initialize_weights()

    @classmethod
    def from_config(cls, config):
        section = config.section("mvmae")
        num_frames = section["video_length"] \
            if section["video_autoencoding"] else 1
        return cls(
            num_views=len(config["env.views"]),
            num_frames=num_frames,
            image_size=config["env.image_size"],
            conv_channels=tuple(section["conv_channels"]),
            width=section["width"],
            encoder_depth=section["encoder_depth"],
            encoder_heads=section["encoder_heads"],
            decoder_depth=section["decoder_depth"],
            decoder_heads=section["decoder_heads"])

    def initialize_weights(self):
        for parameter in (self.view_embed, self.time_embed, self.mask_token,
                          self.decoder_view_embed, self.decoder_time_embed,
                          self.reward_tokens):
            torch.nn.init.normal_(parameter, std=0.02)
        self.apply(self._init_weights)

    def _init_weights(self, m):
        if isinstance(m, nn.Linear):
            torch.nn.init.xavier_uniform_(m.weight)
            if m.bias is not None:
                nn.init.constant_(m.bias, 0)
        elif isinstance(m, nn.LayerNorm):
            nn.init.constant_(m.bias, 0)
            nn.init.constant_(m.weight, 1.0)

    # -------------------------------------------------------------------------
    def conv_stem(self, images):
        """
        Feature grids of normalized images

        Parameters
        ----------
        images : torch.Tensor of shape (B, V, T, side, side, 3)

        Returns
        -------
        torch.Tensor of shape (B, V, T, g, g, D)
        """
        return self.stem(images)

    def embed(self, images, view_indices=None, frame_indices=None):
        """
        All tokens of a clip with their embeddings

        Parameters
        ----------
        images : torch.Tensor of shape (B, V, T, side, side, 3)
            Normalized images
        view_indices : sequence of int or None
            View parameter slot of each of the V input views, defaults to
            `range(V)`
        frame_indices : sequence of int or None
            Frame parameter slot of each input frame, defaults to `range(T)`

        Returns
        -------
        torch.Tensor of shape (B, V * T * N, width)
            Tokens in (view, frame, cell) order
        """
        batch, views, frames = images.shape[:3]
        view_indices = list(range(views)) if view_indices is None \
            else list(view_indices)
        frame_indices = list(range(frames)) if frame_indices is None \
            else list(frame_indices)

        features = self.feature_proj(self.conv_stem(images))
        x = features.reshape(batch, views, frames, self.num_cells, self.width)
        x = x + self.pos_embed.view(1, 1, 1, self.num_cells, self.width)
        x = x + self.view_embed[view_indices].view(1, views, 1, 1, self.width)
        x = x + self.time_embed[frame_indices].view(
            1, 1, frames, 1, self.width)
        return x.reshape(batch, views * frames * self.num_cells, self.width)

    def encode(self, tokens):
        """
        Contextualize a token sequence with full attention

        Parameters
        ----------
        tokens : torch.Tensor of shape (B, n, width)

        Returns
        -------
        torch.Tensor of shape (B, n, width)
        """
        if tokens.shape[1] == 0:
            raise ValueError("Can not encode an empty token sequence")
        x = tokens
        for block in self.encoder_blocks:
            x = block(x)
        return self.encoder_norm(x)

    def decode(self, encoded, keep):
        """
        Predict all pixel patches and the per-frame rewards

        Parameters
        ----------
        encoded : torch.Tensor of shape (B, K, width)
            Encoder output of the kept tokens, in (view, frame, cell) order
        keep : torch.Tensor of shape (B, V, T, N), bool
            Kept token layout of the mask plan

        Returns
        -------
        patches : torch.Tensor of shape (B, V, T, N, 16 * 16 * 3)
        rewards : torch.Tensor of shape (B, T)
        """
        batch, views, frames, cells = keep.shape
        flat_keep = keep.reshape(batch, -1)
        kept = int(flat_keep[0].sum())
        if encoded.shape[1] != kept or \
                bool((flat_keep.sum(dim=1) != kept).any()):
            raise ValueError(
                "Encoded sequence of length {} does not match the plan"
                .format(encoded.shape[1]))

        ids_keep = torch.nonzero(flat_keep)[:, 1].view(batch, kept)
        x = self.decoder_embed(encoded)
        full = self.mask_token.expand(batch, views * frames * cells,
                                      self.width)
        full = full.scatter(
            1, ids_keep.unsqueeze(-1).expand(-1, -1, self.width), x)

        full = full.view(batch, views, frames, cells, self.width)
        full = full + self.decoder_pos_embed.view(1, 1, 1, cells, self.width)
        full = full + self.decoder_view_embed[:views].view(
            1, views, 1, 1, self.width)
        full = full + self.decoder_time_embed[:frames].view(
            1, 1, frames, 1, self.width)
        full = full.reshape(batch, -1, self.width)

        readout = self.reward_tokens[:frames] + \
            self.decoder_time_embed[:frames]
        x = torch.cat([full, readout.unsqueeze(0).expand(batch, -1, -1)],
                      dim=1)
        for block in self.decoder_blocks:
            x = block(x)
        x = self.decoder_norm(x)

        patches = self.patch_head(x[:, :-frames]).view(
            batch, views, frames, cells, -1)
        rewards = self.reward_head(x[:, -frames:]).squeeze(-1)
        return patches, rewards

    def forward(self, images, keep):
        """
        Mask, encode and decode a batch of clips

        Parameters
        ----------
        images : torch.Tensor of shape (B, V, T, side, side, 3)
            Normalized images
        keep : torch.Tensor of shape (B, V, T, N), bool

        Returns
        -------
        patches, rewards
            See `decode`
        """
        tokens = self.embed(images)
        batch = tokens.shape[0]
        flat_keep = keep.reshape(batch, -1)
        kept = int(flat_keep[0].sum())
        ids_keep = torch.nonzero(flat_keep)[:, 1].view(batch, kept)
        visible = torch.gather(
            tokens, 1, ids_keep.unsqueeze(-1).expand(-1, -1, self.width))
        return self.decode(self.encode(visible), keep)


# -----------------------------------------------------------------------------
def mvmae_loss(network, images, rewards, plan):
    """
    Reconstruction loss of a batch of clips

    The pixel term averages the squared error over every patch of every
    view and frame. The reward term is the squared error of the per-frame
    reward predictions. The loss is their sum.

    Parameters
    ----------
    network : MvmaeNetwork
    images : torch.Tensor of shape (B, V, T, side, side, 3)
        Images in [0, 1]
    rewards : torch.Tensor of shape (B, T)
    plan : MaskPlan
        Batched plan

    Returns
    -------
    loss : torch.Tensor
        Scalar
    metrics : dict
        `mvmae/loss`, `mvmae/pixel_mse`, `mvmae/masked_view_mse`,
        `mvmae/unmasked_mse`, `mvmae/reward_mse` as floats

    Raises
    ------
    NonFiniteLossError
        If the loss is NaN or infinite
    """

    logger = logging.getLogger(__name__).getChild("mvmae_loss")

    targets = normalize_images(images)
    keep = torch.as_tensor(plan.keep, device=images.device)
    patches, predicted_rewards = network(targets, keep)

    squared = (patches - patchify(targets)).pow(2).mean(dim=-1)
    pixel_loss = squared.mean()
    reward_loss = (predicted_rewards - rewards).pow(2).mean()
    loss = pixel_loss + reward_loss

    with torch.no_grad():
        view_masked = torch.as_tensor(
            np.ascontiguousarray(plan.view_masked()), device=images.device)
        masked_view_mse = squared[view_masked].mean() \
            if bool(view_masked.any()) else squared.new_tensor(float("nan"))
        unmasked_mse = squared[keep].mean()

    metrics = {
        "mvmae/loss": float(loss.detach()),
        "mvmae/pixel_mse": float(pixel_loss.detach()),
        "mvmae/masked_view_mse": float(masked_view_mse),
        "mvmae/unmasked_mse": float(unmasked_mse),
        "mvmae/reward_mse": float(reward_loss.detach()),
    }
    if not torch.isfinite(loss):
        logger.error("Non-finite autoencoder loss: {}".format(metrics))
        raise NonFiniteLossError("mvmae/loss", metrics)
    return loss, metrics


def extract_representation(network, images, view_indices=None):
    """
    Frozen single-frame tokens of a set of views

    No masking, one frame, no gradient. Used as the input of the world
    model.

    Parameters
    ----------
    network : MvmaeNetwork
    images : torch.Tensor of shape (B, V', side, side, 3)
        Images in [0, 1] of some or all views
    view_indices : sequence of int or None
        View parameter slot of each input view

    Returns
    -------
    torch.Tensor of shape (B, V' * N, width)
    """

    with torch.no_grad():
        x = normalize_images(images).unsqueeze(2)
        tokens = network.embed(x, view_indices=view_indices,
                               frame_indices=[0])
        return network.encode(tokens).detach()
