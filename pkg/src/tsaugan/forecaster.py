"""Downstream LSTM forecaster: observe T points, predict the next S.

The model is a stacked LSTM whose final top-layer hidden state is projected
linearly to all S horizon values at once (direct multi-horizon, no
autoregressive rollout).  Training minimizes MSE on the sample tails;
the snapshot with the best validation loss is returned.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
import torch
from torch import nn

from . import checkpoint as ckpt
from .data_pipeline import SequenceSet, WindowSpec
from .errors import (
    EmptySet,
    InvalidConfig,
    NonFiniteLoss,
    ShapeMismatch,
    SyntheticInTestSet,
    TsauganError,
    WindowMismatch,
)
from .seeding import derive_seed


@dataclass(frozen=True)
class ForecasterConfig:
    hidden_size: int = 64
    num_layers: int = 3
    dropout: float = 0.2
    input_len: int = 60
    horizon: int = 30
    epochs: int = 100
    batch_size: int = 32
    lr: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        if self.hidden_size < 1 or self.num_layers < 1:
            raise InvalidConfig("hidden_size and num_layers must be >= 1")
        if not 0.0 <= self.dropout < 1.0:
            raise InvalidConfig(f"dropout must lie in [0, 1), got {self.dropout}")
        if self.input_len < 1 or self.horizon < 1:
            raise InvalidConfig("input_len and horizon must be >= 1")
        if self.epochs < 0 or self.batch_size < 1 or self.lr <= 0:
            raise InvalidConfig("epochs, batch_size, lr out of range")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class EvalResult:
    mse: float
    n_samples: int
    split: str

    def to_dict(self) -> dict:
        return {"mse": self.mse, "n_samples": self.n_samples, "split": self.split}


class ForecastModel(nn.Module):
    def __init__(self, cfg: ForecasterConfig):
        super().__init__()
        self.cfg = cfg
        self.lstm = nn.LSTM(
            input_size=1,
            hidden_size=cfg.hidden_size,
            num_layers=cfg.num_layers,
            dropout=cfg.dropout if cfg.num_layers > 1 else 0.0,
            batch_first=True,
        )
        self.head = nn.Linear(cfg.hidden_size, cfg.horizon)

    def forward(self, obs: torch.Tensor) -> torch.Tensor:
        if obs.ndim != 2 or obs.shape[1] != self.cfg.input_len:
            raise ShapeMismatch(
                f"expected observations of shape (batch, {self.cfg.input_len}), got {tuple(obs.shape)}"
            )
        _, (hidden, _) = self.lstm(obs.unsqueeze(-1))
        return self.head(hidden[-1])


def build_forecaster(cfg: ForecasterConfig, seed: int) -> ForecastModel:
    with torch.random.fork_rng():
        torch.manual_seed(seed)
        return ForecastModel(cfg)


def _check_window(sset: SequenceSet, cfg: ForecasterConfig) -> None:
    if sset.window.t != cfg.input_len or sset.window.s != cfg.horizon:
        raise WindowMismatch(
            f"set window (t={sset.window.t}, s={sset.window.s}) does not match "
            f"forecaster (input_len={cfg.input_len}, horizon={cfg.horizon})"
        )


def _obs_targets(sset: SequenceSet) -> tuple[torch.Tensor, torch.Tensor]:
    values = torch.from_numpy(sset.values_matrix()).to(torch.float32)
    return values[:, : sset.window.t], values[:, sset.window.t :]


def train_forecaster(
    train: SequenceSet, val: SequenceSet, cfg: ForecasterConfig
) -> tuple[ForecastModel, list[float]]:
    """Fit on training tails, select the best-validation snapshot.

    Returns the selected model (in eval mode) and the per-epoch validation
    losses.  Deterministic for a fixed (data, config) pair on one backend.
    """
    if len(train) == 0:
        raise EmptySet("cannot train on an empty set")
    for sset in (train, val):
        if sset.split_tag == "test":
            raise TsauganError("refusing to train on a test-tagged set")
        _check_window(sset, cfg)

    model = build_forecaster(cfg, derive_seed(cfg.seed, "forecaster-init"))
    if cfg.epochs == 0:
        model.eval()
        return model, []
    if len(val) == 0:
        raise EmptySet("validation set must be non-empty to select a snapshot")

    torch.manual_seed(derive_seed(cfg.seed, "forecaster-loop"))
    shuffle_rng = np.random.default_rng(derive_seed(cfg.seed, "forecaster-shuffle"))
    x_train, y_train = _obs_targets(train)
    x_val, y_val = _obs_targets(val)
    optimizer = torch.optim.Adam(model.parameters(), lr=cfg.lr)
    loss_fn = nn.MSELoss()

    best_loss = float("inf")
    best_state: dict[str, torch.Tensor] | None = None
    history: list[float] = []
    n = len(train)
    for epoch in range(1, cfg.epochs + 1):
        model.train()
        perm = shuffle_rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = perm[start : start + cfg.batch_size]
            loss = loss_fn(model(x_train[idx]), y_train[idx])
            if not torch.isfinite(loss):
                raise NonFiniteLoss(f"epoch {epoch}: training loss {float(loss)!r}")
            optimizer.zero_grad(set_to_none=True)
            loss.backward()
            optimizer.step()
        model.eval()
        with torch.no_grad():
            val_loss = float(loss_fn(model(x_val), y_val))
        if not np.isfinite(val_loss):
            raise NonFiniteLoss(f"epoch {epoch}: validation loss {val_loss!r}")
        history.append(val_loss)
        if val_loss < best_loss:
            best_loss = val_loss
            best_state = {k: v.detach().clone() for k, v in model.state_dict().items()}

    assert best_state is not None
    model.load_state_dict(best_state)
    model.eval()
    return model, history


def predict(model: ForecastModel, observation) -> np.ndarray:
    """Forecast S values from exactly T observed values (pure inference)."""
    obs = np.asarray(observation, dtype=np.float64)
    if obs.ndim != 1 or obs.shape[0] != model.cfg.input_len:
        raise ShapeMismatch(
            f"expected {model.cfg.input_len} observation points, got shape {obs.shape}"
        )
    if not np.all(np.isfinite(obs)):
        raise ValueError("observation contains non-finite values")
    was_training = model.training
    model.eval()
    with torch.no_grad():
        out = model(torch.from_numpy(obs).to(torch.float32).unsqueeze(0))
    model.train(was_training)
    return out.squeeze(0).to(torch.float64).numpy()


def evaluate_mse(model: ForecastModel, test: SequenceSet) -> EvalResult:
    """Mean squared forecast error over a held-out set, in normalized space."""
    if len(test) == 0:
        raise EmptySet("cannot evaluate on an empty set")
    if test.split_tag in ("train", "validation"):
        raise TsauganError(f"evaluation set is tagged {test.split_tag!r}; expected a held-out set")
    if any(s.origin == "synthetic" for s in test.samples):
        raise SyntheticInTestSet("synthetic samples are not allowed in an evaluation set")
    _check_window(test, model.cfg)
    values = test.values_matrix()
    x = torch.from_numpy(values[:, : test.window.t]).to(torch.float32)
    y = torch.from_numpy(values[:, test.window.t :])
    was_training = model.training
    model.eval()
    with torch.no_grad():
        preds = model(x).to(torch.float64)
    model.train(was_training)
    mse = float(((preds - y) ** 2).mean())
    return EvalResult(mse=mse, n_samples=len(test), split=test.split_tag)


def save_forecaster_checkpoint(model: ForecastModel, path) -> None:
    config = {"kind": "forecaster", "forecaster": model.cfg.to_dict()}
    ckpt.save_archive(path, config, ckpt.state_dict_blobs(model, "forecaster."))


def load_forecaster_checkpoint(path) -> ForecastModel:
    config, tensors = ckpt.load_archive(path)
    if config.get("kind") != "forecaster":
        raise InvalidConfig(f"{path}: not a forecaster checkpoint")
    model = ForecastModel(ForecasterConfig(**config["forecaster"]))
    ckpt.load_state_dict_blobs(model, tensors, "forecaster.")
    model.eval()
    return model
