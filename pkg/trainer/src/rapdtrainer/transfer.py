"""Transfer learning: frozen pretrained convolutional features with a
single trained fully connected layer mapping them to pupil / no-pupil."""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import torch
from torch import nn

from .dataset import PATCH_SIZE_GRID, PatchDataset

__all__ = ["TrainRun", "EpochStats", "TransferResult", "BackboneUnavailableError",
           "build_model", "train_transfer", "teacher_probabilities"]

BACKBONE_INPUT = 224
IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)
FETCH_INSTRUCTIONS = (
    "pretrained backbone weights are not available. Either download the "
    "torchvision AlexNet ImageNet checkpoint on a connected machine "
    "(torchvision.models.alexnet(weights='IMAGENET1K_V1')), copy the .pth "
    "file here, and pass backbone=<path>; or pass backbone='random' to "
    "train against randomly initialized frozen features."
)


class BackboneUnavailableError(RuntimeError):
    """Pretrained weights could not be obtained in this environment."""


@dataclass(frozen=True)
class TrainRun:
    patch_size: int = 50
    epochs: int = 15
    seed: int = 0
    batch_size: int = 64
    learning_rate: float = 0.01
    backbone: str = "pretrained"  # pretrained | random | path to a .pth file
    data_roots: tuple = ()  # annotated image directories
    split: tuple[float, float, float] = (0.6, 0.2, 0.2)

    def __post_init__(self):
        if self.patch_size not in PATCH_SIZE_GRID:
            raise ValueError(f"patch size must be one of {PATCH_SIZE_GRID}, got {self.patch_size}")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if abs(sum(self.split) - 1.0) > 1e-9:
            raise ValueError(f"split fractions must sum to 1, got {self.split}")


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    val_accuracy: float
    val_loss: float


@dataclass
class TransferResult:
    model: nn.Module
    history: list[EpochStats] = field(default_factory=list)
    best_epoch: int = -1
    val_accuracy: float = 0.0
    test_accuracy: Optional[float] = None


def _load_backbone(backbone: str) -> nn.Module:
    from torchvision import models

    if backbone == "pretrained":
        try:
            return models.alexnet(weights=models.AlexNet_Weights.IMAGENET1K_V1)
        except Exception as exc:
            raise BackboneUnavailableError(f"{exc}\n{FETCH_INSTRUCTIONS}") from exc
    if backbone == "random":
        return models.alexnet(weights=None)
    path = Path(backbone)
    if not path.exists():
        raise BackboneUnavailableError(f"no weight file at {path}\n{FETCH_INSTRUCTIONS}")
    net = models.alexnet(weights=None)
    net.load_state_dict(torch.load(path, map_location="cpu"))
    return net


class PupilHead(nn.Module):
    """Frozen convolutional feature extractor plus one trainable linear
    layer to two classes; the pretrained fully connected stack is dropped."""

    def __init__(self, backbone: nn.Module):
        super().__init__()
        self.features = backbone.features
        self.avgpool = backbone.avgpool
        for param in self.features.parameters():
            param.requires_grad_(False)
        self.fc = nn.Linear(256 * 6 * 6, 2)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        with torch.no_grad():
            z = self.avgpool(self.features(x))
        return self.fc(torch.flatten(z, 1))


def build_model(backbone: str = "pretrained", seed: int = 0) -> PupilHead:
    torch.manual_seed(seed)
    model = PupilHead(_load_backbone(backbone))
    model.eval()
    return model


def patches_to_backbone_input(patches: np.ndarray) -> torch.Tensor:
    """uint8 (n, p, p) grayscale patches -> normalized (n, 3, 224, 224)."""
    x = torch.from_numpy(np.ascontiguousarray(patches)).float().div_(255.0)
    x = x.unsqueeze(1)
    x = torch.nn.functional.interpolate(x, size=(BACKBONE_INPUT, BACKBONE_INPUT),
                                        mode="bilinear", align_corners=False)
    x = x.repeat(1, 3, 1, 1)
    mean = torch.tensor(IMAGENET_MEAN).view(1, 3, 1, 1)
    std = torch.tensor(IMAGENET_STD).view(1, 3, 1, 1)
    return (x - mean) / std


def _batched_logits(model: PupilHead, patches: np.ndarray, batch: int = 64) -> torch.Tensor:
    outs = []
    with torch.no_grad():
        for start in range(0, len(patches), batch):
            x = patches_to_backbone_input(patches[start : start + batch])
            outs.append(model(x))
    return torch.cat(outs)


def teacher_probabilities(model: PupilHead, patches: np.ndarray, batch: int = 64) -> np.ndarray:
    """Pupil-class probability per patch."""
    logits = _batched_logits(model, patches, batch)
    return torch.softmax(logits, dim=1)[:, 1].numpy().astype(np.float64)


def backbone_fingerprint(model: PupilHead) -> bytes:
    import hashlib

    digest = hashlib.sha256()
    for name, param in sorted(model.features.state_dict().items()):
        digest.update(name.encode())
        digest.update(param.numpy().tobytes())
    return digest.digest()


def train_transfer(run: TrainRun, data: Optional[PatchDataset] = None) -> TransferResult:
    """Train only the appended two-class layer; keep per-epoch validation
    stats and the best-validation snapshot. Builds the patch dataset from
    run.data_roots unless one is passed explicitly."""
    if data is None:
        from .dataset import build_patch_dataset

        if not run.data_roots:
            raise ValueError("train_transfer needs data_roots on the run or an explicit dataset")
        data = build_patch_dataset(run.data_roots, run.patch_size, run.seed, run.split)
    torch.manual_seed(run.seed)
    model = build_model(run.backbone, seed=run.seed)
    loss_fn = nn.CrossEntropyLoss()
    optimizer = torch.optim.SGD(model.fc.parameters(), lr=run.learning_rate)

    # precompute frozen features once; only the linear layer trains
    train_feats = _frozen_features(model, data.train_x)
    val_feats = _frozen_features(model, data.val_x)
    train_y = torch.from_numpy(data.train_y.astype(np.int64))
    val_y = torch.from_numpy(data.val_y.astype(np.int64))

    generator = torch.Generator().manual_seed(run.seed)
    result = TransferResult(model=model)
    best_state = copy.deepcopy(model.fc.state_dict())
    for epoch in range(run.epochs):
        model.fc.train()
        perm = torch.randperm(len(train_y), generator=generator)
        for start in range(0, len(perm), run.batch_size):
            idx = perm[start : start + run.batch_size]
            optimizer.zero_grad()
            loss = loss_fn(model.fc(train_feats[idx]), train_y[idx])
            loss.backward()
            optimizer.step()
        model.fc.eval()
        with torch.no_grad():
            val_logits = model.fc(val_feats)
            val_loss = float(loss_fn(val_logits, val_y))
            val_acc = float((val_logits.argmax(dim=1) == val_y).float().mean())
        result.history.append(EpochStats(epoch=epoch, val_accuracy=val_acc, val_loss=val_loss))
        if val_acc > result.val_accuracy:
            result.val_accuracy = val_acc
            result.best_epoch = epoch
            best_state = copy.deepcopy(model.fc.state_dict())
    model.fc.load_state_dict(best_state)
    model.eval()
    if len(data.test_y):
        with torch.no_grad():
            test_logits = model.fc(_frozen_features(model, data.test_x))
        result.test_accuracy = float(
            (test_logits.argmax(dim=1) == torch.from_numpy(data.test_y.astype(np.int64))).float().mean()
        )
    return result


def _frozen_features(model: PupilHead, patches: np.ndarray, batch: int = 64) -> torch.Tensor:
    outs = []
    with torch.no_grad():
        for start in range(0, len(patches), batch):
            x = patches_to_backbone_input(patches[start : start + batch])
            outs.append(torch.flatten(model.avgpool(model.features(x)), 1))
    return torch.cat(outs)
