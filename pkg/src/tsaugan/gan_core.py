"""Transformer generator and patch-embedding transformer discriminator.

Both networks are built from standard pre-norm transformer encoder blocks.
The generator maps a latent vector to seq_len/patch_size position-encoded
embeddings, runs them through the encoder stack, and projects each embedding
to one output patch.  The discriminator patches the input sequence, prepends
a learned classification token, and scores sequences through a linear head on
that token.  Scores are raw (no squashing): the least-squares adversarial
losses operate on unbounded outputs.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import torch
from torch import nn
from torch.nn.attention import SDPBackend, sdpa_kernel

from .errors import InvalidConfig, ShapeMismatch

FEEDFORWARD_FACTOR = 4
POS_EMBED_STD = 0.02


@dataclass(frozen=True)
class GeneratorConfig:
    depth: int = 3
    heads: int = 5
    embed_dim: int = 10
    patch_size: int = 15
    latent_dim: int = 64
    seq_len: int = 90
    channels: int = 1
    dropout: float = 0.1

    def __post_init__(self):
        _validate_transformer_cfg(self, "generator")
        if self.latent_dim < 1:
            raise InvalidConfig(f"latent_dim must be >= 1, got {self.latent_dim}")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class DiscriminatorConfig:
    depth: int = 3
    heads: int = 30
    embed_dim: int = 90
    patch_size: int = 15
    seq_len: int = 90
    channels: int = 1
    dropout: float = 0.1

    def __post_init__(self):
        _validate_transformer_cfg(self, "discriminator")

    def to_dict(self) -> dict:
        return asdict(self)


def _validate_transformer_cfg(cfg, name: str) -> None:
    for field_name in ("depth", "heads", "embed_dim", "patch_size", "seq_len"):
        v = getattr(cfg, field_name)
        if not isinstance(v, int) or v < 1:
            raise InvalidConfig(f"{name}.{field_name} must be a positive integer, got {v!r}")
    if cfg.channels != 1:
        raise InvalidConfig(f"{name} supports univariate sequences only (channels=1)")
    if cfg.embed_dim % cfg.heads != 0:
        raise InvalidConfig(
            f"{name}: embed_dim={cfg.embed_dim} not divisible by heads={cfg.heads}"
        )
    if cfg.seq_len % cfg.patch_size != 0:
        raise InvalidConfig(
            f"{name}: seq_len={cfg.seq_len} not divisible by patch_size={cfg.patch_size}"
        )
    if not 0.0 <= cfg.dropout < 1.0:
        raise InvalidConfig(f"{name}: dropout must lie in [0, 1), got {cfg.dropout}")


def _encoder_stack(embed_dim: int, heads: int, depth: int, dropout: float) -> nn.TransformerEncoder:
    layer = nn.TransformerEncoderLayer(
        d_model=embed_dim,
        nhead=heads,
        dim_feedforward=FEEDFORWARD_FACTOR * embed_dim,
        dropout=dropout,
        batch_first=True,
        norm_first=True,
    )
    return nn.TransformerEncoder(layer, num_layers=depth, enable_nested_tensor=False)


class SequenceGenerator(nn.Module):
    """Latent vector -> K-length sequence through patch embeddings."""

    def __init__(self, cfg: GeneratorConfig):
        super().__init__()
        self.cfg = cfg
        self.num_patches = cfg.seq_len // cfg.patch_size
        self.input_proj = nn.Linear(cfg.latent_dim, self.num_patches * cfg.embed_dim)
        self.pos_embed = nn.Parameter(
            torch.randn(1, self.num_patches, cfg.embed_dim) * POS_EMBED_STD
        )
        self.encoder = _encoder_stack(cfg.embed_dim, cfg.heads, cfg.depth, cfg.dropout)
        self.output_proj = nn.Linear(cfg.embed_dim, cfg.patch_size)

    def forward(self, z: torch.Tensor) -> torch.Tensor:
        if z.ndim != 2 or z.shape[1] != self.cfg.latent_dim:
            raise ShapeMismatch(
                f"expected latents of shape (batch, {self.cfg.latent_dim}), got {tuple(z.shape)}"
            )
        h = self.input_proj(z).reshape(-1, self.num_patches, self.cfg.embed_dim)
        h = h + self.pos_embed
        # the math attention kernel is the only CPU backend with a second
        # derivative, which the input-gradient penalty requires
        with sdpa_kernel(SDPBackend.MATH):
            h = self.encoder(h)
        patches = self.output_proj(h)
        return patches.reshape(-1, self.cfg.seq_len)


class SequenceDiscriminator(nn.Module):
    """K-length sequence -> one raw real-valued score."""

    def __init__(self, cfg: DiscriminatorConfig):
        super().__init__()
        self.cfg = cfg
        self.num_patches = cfg.seq_len // cfg.patch_size
        self.patch_proj = nn.Linear(cfg.patch_size, cfg.embed_dim)
        self.cls_token = nn.Parameter(torch.randn(1, 1, cfg.embed_dim) * POS_EMBED_STD)
        self.pos_embed = nn.Parameter(
            torch.randn(1, self.num_patches + 1, cfg.embed_dim) * POS_EMBED_STD
        )
        self.encoder = _encoder_stack(cfg.embed_dim, cfg.heads, cfg.depth, cfg.dropout)
        self.score_head = nn.Linear(cfg.embed_dim, 1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.ndim != 2 or x.shape[1] != self.cfg.seq_len:
            raise ShapeMismatch(
                f"expected sequences of shape (batch, {self.cfg.seq_len}), got {tuple(x.shape)}"
            )
        patches = x.reshape(-1, self.num_patches, self.cfg.patch_size)
        h = self.patch_proj(patches)
        cls = self.cls_token.expand(h.shape[0], -1, -1)
        h = torch.cat([cls, h], dim=1) + self.pos_embed
        with sdpa_kernel(SDPBackend.MATH):
            h = self.encoder(h)
        return self.score_head(h[:, 0]).squeeze(-1)


def build_generator(cfg: GeneratorConfig, seed: int) -> SequenceGenerator:
    """Deterministic construction: same (cfg, seed) gives bit-identical weights."""
    with torch.random.fork_rng():
        torch.manual_seed(seed)
        return SequenceGenerator(cfg)


def build_discriminator(cfg: DiscriminatorConfig, seed: int) -> SequenceDiscriminator:
    with torch.random.fork_rng():
        torch.manual_seed(seed)
        return SequenceDiscriminator(cfg)


def generator_forward(generator: SequenceGenerator, latents: torch.Tensor) -> torch.Tensor:
    """Map a (batch, latent_dim) tensor to (batch, K) sequences.

    Differentiable with respect to the generator parameters; callers wanting
    deterministic outputs should put the module in eval mode first.
    """
    if latents.ndim != 2 or latents.shape[0] < 1:
        raise ShapeMismatch(f"expected a non-empty 2-d latent batch, got {tuple(latents.shape)}")
    return generator(latents)


def discriminator_forward(discriminator: SequenceDiscriminator, batch: torch.Tensor) -> torch.Tensor:
    """Score a (batch, K) tensor; differentiable w.r.t. parameters and inputs."""
    if batch.ndim != 2 or batch.shape[0] < 1:
        raise ShapeMismatch(f"expected a non-empty 2-d sample batch, got {tuple(batch.shape)}")
    return discriminator(batch)
