"""Adversarial training loop with least-squares losses and an input-gradient
penalty evaluated on real samples only.

Per batch the discriminator minimizes

    mean((D(real) - 1)^2) + mean(D(G(z))^2) + (gamma/2) * mean ||d D(x)/d x||^2

and the generator minimizes mean((D(G(z)) - 1)^2).  The raw losses are not
interpretable as convergence signals, so every few epochs a freshly generated
set is compared against the real data with the Wasserstein and DTW
set-dissimilarity metrics and appended to the epoch log.
"""
from __future__ import annotations

import csv
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
import torch

from . import checkpoint as ckpt
from .data_pipeline import IDENTITY_SCALER, SequenceSample, SequenceSet, WindowSpec
from .errors import EmptySet, InvalidConfig, NonFiniteLoss, ShapeMismatch, TsauganError
from .gan_core import (
    DiscriminatorConfig,
    GeneratorConfig,
    SequenceDiscriminator,
    SequenceGenerator,
    build_discriminator,
    build_generator,
)
from .metrics import DedimsConfig, dtw_dedims, wasserstein_1d
from .seeding import derive_seed


@dataclass(frozen=True)
class TrainingConfig:
    epochs: int = 200
    batch_size: int = 32
    lr_g: float = 1e-4
    lr_d: float = 1e-4
    betas: tuple[float, float] = (0.5, 0.999)
    gp_weight: float = 10.0
    metric_every: int = 25
    metric_sample_n: int = 64
    d_steps_per_g: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 0:
            raise InvalidConfig(f"epochs must be >= 0, got {self.epochs}")
        if self.batch_size < 2:
            raise InvalidConfig(f"batch_size must be >= 2, got {self.batch_size}")
        if self.gp_weight < 0:
            raise InvalidConfig(f"gp_weight must be >= 0, got {self.gp_weight}")
        if self.lr_g <= 0 or self.lr_d <= 0:
            raise InvalidConfig("learning rates must be positive")
        if self.metric_every < 1 or self.metric_sample_n < 2 or self.d_steps_per_g < 1:
            raise InvalidConfig("metric_every, metric_sample_n, d_steps_per_g out of range")
        object.__setattr__(self, "betas", tuple(float(b) for b in self.betas))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["betas"] = list(self.betas)
        return d


@dataclass
class EpochLog:
    epoch: int
    d_loss: float
    g_loss: float
    gp: float
    wasserstein: float | None = None
    dtw_dedims: float | None = None


@dataclass
class TrainingState:
    """Mutable training snapshot; single writer, resumable from checkpoints."""

    generator: SequenceGenerator
    discriminator: SequenceDiscriminator
    opt_g: torch.optim.Adam
    opt_d: torch.optim.Adam
    g_cfg: GeneratorConfig
    d_cfg: DiscriminatorConfig
    t_cfg: TrainingConfig
    window: WindowSpec
    epoch: int = 0
    shuffle_rng: np.random.Generator = field(default_factory=np.random.default_rng)
    best_generator: dict[str, torch.Tensor] | None = None
    best_dedims: float | None = None
    pending_torch_rng: bytes | None = None


def init_training_state(
    g_cfg: GeneratorConfig,
    d_cfg: DiscriminatorConfig,
    t_cfg: TrainingConfig,
    window: WindowSpec,
) -> TrainingState:
    if g_cfg.seq_len != window.k or d_cfg.seq_len != window.k:
        raise InvalidConfig(
            f"model seq_len ({g_cfg.seq_len}, {d_cfg.seq_len}) must equal window k={window.k}"
        )
    generator = build_generator(g_cfg, derive_seed(t_cfg.seed, "generator-init"))
    discriminator = build_discriminator(d_cfg, derive_seed(t_cfg.seed, "discriminator-init"))
    opt_g = torch.optim.Adam(generator.parameters(), lr=t_cfg.lr_g, betas=t_cfg.betas)
    opt_d = torch.optim.Adam(discriminator.parameters(), lr=t_cfg.lr_d, betas=t_cfg.betas)
    return TrainingState(
        generator=generator,
        discriminator=discriminator,
        opt_g=opt_g,
        opt_d=opt_d,
        g_cfg=g_cfg,
        d_cfg=d_cfg,
        t_cfg=t_cfg,
        window=window,
        shuffle_rng=np.random.default_rng(derive_seed(t_cfg.seed, "shuffle")),
    )


def _as_batch(batch) -> torch.Tensor:
    if isinstance(batch, SequenceSet):
        return torch.from_numpy(batch.values_matrix()).to(torch.float32)
    if isinstance(batch, np.ndarray):
        return torch.from_numpy(np.ascontiguousarray(batch)).to(torch.float32)
    return batch


def _input_gradient_penalty(scores: torch.Tensor, x: torch.Tensor, gamma: float) -> torch.Tensor:
    grads = torch.autograd.grad(scores.sum(), x, create_graph=True, allow_unused=True)[0]
    if grads is None:
        # discriminator ignores its input, so the input gradient is zero
        return x.new_zeros(())
    return (gamma / 2.0) * grads.pow(2).reshape(x.shape[0], -1).sum(dim=1).mean()


def gradient_penalty(discriminator, real_batch, gamma: float) -> torch.Tensor:
    """(gamma/2) * mean over the batch of ||d D(x)/d x||_2^2 at real points.

    No interpolates and no generated points enter the penalty.  Returns a
    differentiable scalar tensor in the dtype of the inputs.
    """
    if gamma < 0:
        raise ValueError(f"gamma must be >= 0, got {gamma}")
    real = _as_batch(real_batch) if not isinstance(real_batch, torch.Tensor) else real_batch
    if real.ndim != 2 or real.shape[0] < 1:
        raise ShapeMismatch(f"expected a non-empty (batch, K) tensor, got {tuple(real.shape)}")
    if gamma == 0:
        return real.new_zeros(())
    x = real.detach().clone().requires_grad_(True)
    scores = discriminator(x)
    return _input_gradient_penalty(scores, x, gamma)


def d_step(state: TrainingState, real_batch) -> tuple[TrainingState, float, float]:
    """One discriminator update; generator parameters are untouched.

    Returns the adversarial loss (the least-squares value without penalty)
    and the penalty term separately.
    """
    real = _as_batch(real_batch)
    if real.ndim != 2 or real.shape[0] < 2:
        raise ShapeMismatch("d_step needs a batch of at least 2 samples")
    gamma = state.t_cfg.gp_weight
    state.generator.train()
    state.discriminator.train()

    z = torch.randn(real.shape[0], state.g_cfg.latent_dim)
    with torch.no_grad():
        fake = state.generator(z)

    x = real.detach().clone()
    if gamma > 0:
        x.requires_grad_(True)
    scores_real = state.discriminator(x)
    loss_real = ((scores_real - 1.0) ** 2).mean()
    loss_fake = (state.discriminator(fake) ** 2).mean()
    adv = loss_real + loss_fake
    gp = _input_gradient_penalty(scores_real, x, gamma) if gamma > 0 else adv.new_zeros(())

    total = adv + gp
    if not torch.isfinite(total):
        raise NonFiniteLoss(f"d_loss={adv.item()!r} gp={gp.item()!r}")
    state.opt_d.zero_grad(set_to_none=True)
    total.backward()
    state.opt_d.step()
    return state, float(adv.detach()), float(gp.detach())


def g_step(state: TrainingState, batch_size: int) -> tuple[TrainingState, float]:
    """One generator update; discriminator parameters are untouched."""
    if batch_size < 2:
        raise ShapeMismatch("g_step needs batch_size >= 2")
    state.generator.train()
    state.discriminator.train()
    z = torch.randn(batch_size, state.g_cfg.latent_dim)
    scores = state.discriminator(state.generator(z))
    loss = ((scores - 1.0) ** 2).mean()
    if not torch.isfinite(loss):
        raise NonFiniteLoss(f"g_loss={loss.item()!r}")
    state.opt_g.zero_grad(set_to_none=True)
    loss.backward()
    state.opt_g.step()
    return state, float(loss.detach())


def generate_dataset(
    state: TrainingState, n: int, seed: int, use_best: bool = False
) -> SequenceSet:
    """Sample n synthetic sequences from fresh standard-normal latents.

    Values are in the normalized space the GAN was trained in.  With
    ``use_best`` the generator snapshot with the lowest logged DTW
    dissimilarity is used instead of the current parameters.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    generator = state.generator
    if use_best and state.best_generator is not None:
        generator = build_generator(state.g_cfg, seed=0)
        generator.load_state_dict(state.best_generator)
    was_training = generator.training
    generator.eval()
    gen_rng = torch.Generator().manual_seed(seed)
    with torch.no_grad():
        values = generator(torch.randn(n, state.g_cfg.latent_dim, generator=gen_rng))
    generator.train(was_training)
    samples = [
        SequenceSample(row, IDENTITY_SCALER, "synthetic")
        for row in values.to(torch.float64).numpy()
    ]
    return SequenceSet(samples, state.window, "unsplit")


def _evaluate_metrics(
    state: TrainingState, data: SequenceSet, epoch: int
) -> tuple[float, float] | None:
    n_sub = min(state.t_cfg.metric_sample_n, len(data))
    if n_sub < 2:
        return None
    generated = generate_dataset(
        state, len(data), seed=derive_seed(state.t_cfg.seed, "metric-gen", epoch)
    )
    w = wasserstein_1d(data, generated)
    dd = dtw_dedims(
        data,
        generated,
        DedimsConfig(n=n_sub, seed=derive_seed(state.t_cfg.seed, "metric-sub", epoch)),
    )
    return w, dd


def train(
    data: SequenceSet,
    g_cfg: GeneratorConfig,
    d_cfg: DiscriminatorConfig,
    t_cfg: TrainingConfig,
    checkpoint_dir: str | Path | None = None,
    resume_from: str | Path | None = None,
) -> tuple[TrainingState, list[EpochLog]]:
    """Run the full adversarial loop over a train+validation set.

    Metrics are evaluated (and checkpoints written, when a directory is
    given) at the first epoch, every ``metric_every`` epochs, and at the
    final epoch.  A non-finite loss aborts with NonFiniteLoss; the last
    written checkpoint stays on disk.
    """
    if len(data) == 0:
        raise EmptySet("cannot train on an empty set")
    if data.split_tag == "test":
        raise TsauganError("refusing to train on a test-tagged set")

    if resume_from is not None:
        state = load_training_checkpoint(resume_from)
        # a resumed run may extend the epoch budget; everything else must match
        same = (state.g_cfg, state.d_cfg, replace(state.t_cfg, epochs=0)) == (
            g_cfg, d_cfg, replace(t_cfg, epochs=0),
        )
        if not same:
            raise InvalidConfig("checkpoint configs do not match the requested configs")
    else:
        state = init_training_state(g_cfg, d_cfg, t_cfg, data.window)
    if state.pending_torch_rng is not None:
        torch.set_rng_state(
            torch.frombuffer(bytearray(state.pending_torch_rng), dtype=torch.uint8).clone()
        )
        state.pending_torch_rng = None
    elif state.epoch == 0:
        torch.manual_seed(derive_seed(t_cfg.seed, "training-loop"))

    checkpoint_dir = Path(checkpoint_dir) if checkpoint_dir is not None else None
    logs: list[EpochLog] = []
    if t_cfg.epochs <= state.epoch:
        return state, logs

    real_all = torch.from_numpy(data.values_matrix()).to(torch.float32)
    n = len(data)
    for epoch in range(state.epoch + 1, t_cfg.epochs + 1):
        state.epoch = epoch
        perm = state.shuffle_rng.permutation(n)
        d_losses: list[float] = []
        g_losses: list[float] = []
        gps: list[float] = []
        steps = 0
        try:
            for start in range(0, n, t_cfg.batch_size):
                idx = perm[start : start + t_cfg.batch_size]
                if len(idx) < 2:
                    continue
                _, dl, gp = d_step(state, real_all[idx])
                d_losses.append(dl)
                gps.append(gp)
                steps += 1
                if steps % t_cfg.d_steps_per_g == 0:
                    _, gl = g_step(state, len(idx))
                    g_losses.append(gl)
            if not g_losses:
                _, gl = g_step(state, min(t_cfg.batch_size, max(2, n)))
                g_losses.append(gl)
        except NonFiniteLoss as exc:
            raise NonFiniteLoss(f"epoch {epoch}, batch {steps}: {exc}") from exc

        entry = EpochLog(
            epoch=epoch,
            d_loss=float(np.mean(d_losses)) if d_losses else float(np.mean(g_losses)),
            g_loss=float(np.mean(g_losses)),
            gp=float(np.mean(gps)) if gps else 0.0,
        )
        if epoch == 1 or epoch % t_cfg.metric_every == 0 or epoch == t_cfg.epochs:
            evaluated = _evaluate_metrics(state, data, epoch)
            if evaluated is not None:
                entry.wasserstein, entry.dtw_dedims = evaluated
                if state.best_dedims is None or entry.dtw_dedims < state.best_dedims:
                    state.best_dedims = entry.dtw_dedims
                    state.best_generator = {
                        k: v.detach().clone() for k, v in state.generator.state_dict().items()
                    }
            if checkpoint_dir is not None:
                save_training_checkpoint(state, checkpoint_dir / f"epoch_{epoch:06d}.ckpt")
        logs.append(entry)

    if checkpoint_dir is not None:
        save_training_checkpoint(state, checkpoint_dir / "final.ckpt")
    return state, logs


# --- epoch log CSV (the convergence-curve artifact) ---

EPOCH_LOG_COLUMNS = ["epoch", "d_loss", "g_loss", "gp", "wasserstein", "dtw_dedims"]


def write_epoch_log_csv(logs: list[EpochLog], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(EPOCH_LOG_COLUMNS)
        for log in logs:
            writer.writerow(
                [
                    str(log.epoch),
                    repr(log.d_loss),
                    repr(log.g_loss),
                    repr(log.gp),
                    "" if log.wasserstein is None else repr(log.wasserstein),
                    "" if log.dtw_dedims is None else repr(log.dtw_dedims),
                ]
            )


# --- checkpointing ---

def _optimizer_blobs(
    opt: torch.optim.Adam, module: torch.nn.Module, prefix: str
) -> tuple[dict[str, torch.Tensor], dict[str, float]]:
    name_of = {param: name for name, param in module.named_parameters()}
    blobs: dict[str, torch.Tensor] = {}
    steps: dict[str, float] = {}
    for param, st in opt.state.items():
        name = name_of[param]
        blobs[f"{prefix}.{name}.exp_avg"] = st["exp_avg"]
        blobs[f"{prefix}.{name}.exp_avg_sq"] = st["exp_avg_sq"]
        steps[name] = float(st["step"])
    return blobs, steps


def _restore_optimizer(
    opt: torch.optim.Adam,
    module: torch.nn.Module,
    tensors: dict[str, torch.Tensor],
    steps: dict[str, float],
    prefix: str,
) -> None:
    for name, param in module.named_parameters():
        key = f"{prefix}.{name}.exp_avg"
        if key not in tensors:
            continue
        opt.state[param] = {
            "step": torch.tensor(steps[name]),
            "exp_avg": tensors[key].clone(),
            "exp_avg_sq": tensors[f"{prefix}.{name}.exp_avg_sq"].clone(),
        }


def save_training_checkpoint(state: TrainingState, path: str | Path) -> None:
    opt_g_blobs, opt_g_steps = _optimizer_blobs(state.opt_g, state.generator, "opt_g")
    opt_d_blobs, opt_d_steps = _optimizer_blobs(state.opt_d, state.discriminator, "opt_d")
    tensors = {
        **ckpt.state_dict_blobs(state.generator, "generator."),
        **ckpt.state_dict_blobs(state.discriminator, "discriminator."),
        **opt_g_blobs,
        **opt_d_blobs,
    }
    if state.best_generator is not None:
        tensors.update({f"best_generator.{k}": v for k, v in state.best_generator.items()})
    config = {
        "kind": "gan-training",
        "generator": state.g_cfg.to_dict(),
        "discriminator": state.d_cfg.to_dict(),
        "training": state.t_cfg.to_dict(),
        "window": asdict(state.window),
        "epoch": state.epoch,
        "opt_steps": {"opt_g": opt_g_steps, "opt_d": opt_d_steps},
        "best_dedims": state.best_dedims,
        "rng": {
            "torch": torch.get_rng_state().numpy().tobytes().hex(),
            "shuffle": state.shuffle_rng.bit_generator.state,
        },
    }
    ckpt.save_archive(path, config, tensors)


def load_training_checkpoint(path: str | Path) -> TrainingState:
    config, tensors = ckpt.load_archive(path)
    if config.get("kind") != "gan-training":
        raise InvalidConfig(f"{path}: not a gan-training checkpoint")
    g_cfg = GeneratorConfig(**config["generator"])
    d_cfg = DiscriminatorConfig(**config["discriminator"])
    training = dict(config["training"])
    training["betas"] = tuple(training["betas"])
    t_cfg = TrainingConfig(**training)
    window = WindowSpec(**config["window"])

    state = init_training_state(g_cfg, d_cfg, t_cfg, window)
    ckpt.load_state_dict_blobs(state.generator, tensors, "generator.")
    ckpt.load_state_dict_blobs(state.discriminator, tensors, "discriminator.")
    _restore_optimizer(state.opt_g, state.generator, tensors, config["opt_steps"]["opt_g"], "opt_g")
    _restore_optimizer(
        state.opt_d, state.discriminator, tensors, config["opt_steps"]["opt_d"], "opt_d"
    )
    state.epoch = int(config["epoch"])
    state.best_dedims = config["best_dedims"]
    best = {
        k[len("best_generator."):]: v
        for k, v in tensors.items()
        if k.startswith("best_generator.")
    }
    state.best_generator = best or None

    shuffle_state = config["rng"]["shuffle"]
    state.shuffle_rng = np.random.default_rng()
    state.shuffle_rng.bit_generator.state = shuffle_state
    state.pending_torch_rng = bytes.fromhex(config["rng"]["torch"])
    return state
