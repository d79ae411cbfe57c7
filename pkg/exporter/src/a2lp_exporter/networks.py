"""Feature-extractor backbones: ResNet-12 and WideResNet-28-10.

Both return raw (un-normalized) penultimate features after global
average pooling; the inference engine owns all preprocessing. Parameter
names follow the layouts of the widely mirrored pretrained checkpoints
(``layer{1..4}.0.*`` for ResNet-12, ``block{1..3}.layer.{n}.*`` plus a
final ``bn1`` for the wide residual network), so public state dicts load
directly. Classifier heads present in a checkpoint are ignored.
"""

from __future__ import annotations

import torch
import torch.nn as nn
import torch.nn.functional as F

FEATURE_DIMS = {"resnet12": 640, "wrn-28-10": 640}


class ShapeMismatchError(RuntimeError):
    """Checkpoint tensors do not fit the requested architecture."""


class _ResNetBlock(nn.Module):
    """Three 3x3 conv/BN stages with a projection shortcut and a 2x pool."""

    def __init__(self, in_planes: int, planes: int):
        super().__init__()
        self.conv1 = nn.Conv2d(in_planes, planes, 3, padding=1, bias=False)
        self.bn1 = nn.BatchNorm2d(planes)
        self.conv2 = nn.Conv2d(planes, planes, 3, padding=1, bias=False)
        self.bn2 = nn.BatchNorm2d(planes)
        self.conv3 = nn.Conv2d(planes, planes, 3, padding=1, bias=False)
        self.bn3 = nn.BatchNorm2d(planes)
        self.relu = nn.LeakyReLU(0.1)
        self.downsample = nn.Sequential(
            nn.Conv2d(in_planes, planes, 1, bias=False), nn.BatchNorm2d(planes)
        )
        self.maxpool = nn.MaxPool2d(2)

    def forward(self, x):
        out = self.relu(self.bn1(self.conv1(x)))
        out = self.relu(self.bn2(self.conv2(out)))
        out = self.bn3(self.conv3(out))
        out = self.relu(out + self.downsample(x))
        return self.maxpool(out)


class ResNet12(nn.Module):
    def __init__(self):
        super().__init__()
        widths = (64, 160, 320, 640)
        in_planes = 3
        for index, width in enumerate(widths, start=1):
            setattr(self, f"layer{index}", nn.Sequential(_ResNetBlock(in_planes, width)))
            in_planes = width
        self.out_dim = widths[-1]

    def forward(self, x):
        x = self.layer1(x)
        x = self.layer2(x)
        x = self.layer3(x)
        x = self.layer4(x)
        x = F.adaptive_avg_pool2d(x, 1)
        return torch.flatten(x, 1)


class _WideBlock(nn.Module):
    """Pre-activation basic block of a wide residual network."""

    def __init__(self, in_planes: int, planes: int, stride: int):
        super().__init__()
        self.bn1 = nn.BatchNorm2d(in_planes)
        self.relu1 = nn.ReLU(inplace=True)
        self.conv1 = nn.Conv2d(in_planes, planes, 3, stride=stride, padding=1, bias=False)
        self.bn2 = nn.BatchNorm2d(planes)
        self.relu2 = nn.ReLU(inplace=True)
        self.conv2 = nn.Conv2d(planes, planes, 3, padding=1, bias=False)
        self.equal_io = in_planes == planes and stride == 1
        if not self.equal_io:
            self.convShortcut = nn.Conv2d(in_planes, planes, 1, stride=stride, bias=False)

    def forward(self, x):
        if self.equal_io:
            out = self.relu1(self.bn1(x))
            shortcut = x
        else:
            x = self.relu1(self.bn1(x))
            out = x
            shortcut = self.convShortcut(x)
        out = self.conv2(self.relu2(self.bn2(self.conv1(out))))
        return shortcut + out


class _WideGroup(nn.Module):
    def __init__(self, blocks: int, in_planes: int, planes: int, stride: int):
        super().__init__()
        layers = [_WideBlock(in_planes, planes, stride)]
        layers += [_WideBlock(planes, planes, 1) for _ in range(blocks - 1)]
        self.layer = nn.Sequential(*layers)

    def forward(self, x):
        return self.layer(x)


class WideResNet28x10(nn.Module):
    def __init__(self):
        super().__init__()
        depth, widen = 28, 10
        blocks = (depth - 4) // 6
        widths = (16, 16 * widen, 32 * widen, 64 * widen)
        self.conv1 = nn.Conv2d(3, widths[0], 3, padding=1, bias=False)
        self.block1 = _WideGroup(blocks, widths[0], widths[1], stride=1)
        self.block2 = _WideGroup(blocks, widths[1], widths[2], stride=2)
        self.block3 = _WideGroup(blocks, widths[2], widths[3], stride=2)
        self.bn1 = nn.BatchNorm2d(widths[3])
        self.relu = nn.ReLU(inplace=True)
        self.out_dim = widths[3]

    def forward(self, x):
        x = self.conv1(x)
        x = self.block1(x)
        x = self.block2(x)
        x = self.block3(x)
        x = self.relu(self.bn1(x))
        x = F.adaptive_avg_pool2d(x, 1)
        return torch.flatten(x, 1)


def build_backbone(name: str) -> nn.Module:
    if name == "resnet12":
        return ResNet12()
    if name == "wrn-28-10":
        return WideResNet28x10()
    raise ValueError(f"unknown backbone {name!r}; expected one of {tuple(FEATURE_DIMS)}")


def _unwrap_state_dict(payload) -> dict:
    if not isinstance(payload, dict):
        raise ShapeMismatchError("checkpoint does not contain a state dict")
    for key in ("state_dict", "params", "model", "model_state_dict"):
        if key in payload and isinstance(payload[key], dict):
            payload = payload[key]
            break
    return {k.removeprefix("module."): v for k, v in payload.items()}


def load_checkpoint(model: nn.Module, path: str, backbone: str) -> None:
    """Load a pretrained state dict, ignoring classifier heads.

    A tensor whose shape disagrees with the architecture raises
    :class:`ShapeMismatchError` naming the expected feature width, which
    is what a checkpoint/backbone mix-up looks like in practice.
    """
    payload = torch.load(path, map_location="cpu", weights_only=False)
    state = _unwrap_state_dict(payload)
    own = model.state_dict()
    filtered = {}
    for key, value in state.items():
        if key not in own:
            continue  # classifier / rotation heads and other extras
        if tuple(own[key].shape) != tuple(value.shape):
            raise ShapeMismatchError(
                f"checkpoint tensor {key} has shape {tuple(value.shape)}, "
                f"architecture {backbone} expects {tuple(own[key].shape)} "
                f"(feature width {FEATURE_DIMS[backbone]})"
            )
        filtered[key] = value
    missing = set(own) - set(filtered)
    if missing:
        raise ShapeMismatchError(
            f"checkpoint is missing {len(missing)} tensors for {backbone} "
            f"(e.g. {sorted(missing)[0]}); wrong architecture?"
        )
    model.load_state_dict(filtered)
