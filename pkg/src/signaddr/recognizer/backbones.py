"""Desk-scale convolutional feature extractors.

Each variant keeps the characteristic block of its full-size namesake:
plain convolutions (VGG), recurrent convolutions (RCNN), gated recurrent
convolutions (GRCL) and residual blocks (ResNet). All map a ``(B, 1, H, W)``
line image to ``(B, C, H', W / width_stride)``.
"""
from typing import Sequence

import torch
from torch import nn

BACKBONES = ("vgg", "rcnn", "grcl", "resnet")


def conv3(cin, cout):
    return nn.Conv2d(cin, cout, kernel_size=3, padding=1)


def conv_bn_relu(cin, cout, norm=True):
    layers = [nn.Conv2d(cin, cout, kernel_size=3, padding=1, bias=not norm)]
    if norm:
        layers.append(nn.BatchNorm2d(cout))
    layers.append(nn.ReLU())
    return nn.Sequential(*layers)


class RecurrentConv(nn.Module):
    """Feed-forward conv plus a shared recurrent conv unrolled ``steps`` times."""

    def __init__(self, cin, cout, steps=2):
        super().__init__()
        self.ff = conv3(cin, cout)
        self.rec = conv3(cout, cout)
        self.steps = steps

    def forward(self, x):
        u = self.ff(x)
        h = torch.relu(u)
        for _ in range(self.steps):
            h = torch.relu(u + self.rec(h))
        return h


class GatedRecurrentConv(nn.Module):
    """Recurrent conv whose recurrent term is scaled by a learned sigmoid gate."""

    def __init__(self, cin, cout, steps=2):
        super().__init__()
        self.ff = conv3(cin, cout)
        self.rec = conv3(cout, cout)
        self.gate_ff = nn.Conv2d(cin, cout, kernel_size=1)
        self.gate_rec = nn.Conv2d(cout, cout, kernel_size=1)
        self.steps = steps

    def forward(self, x):
        u = self.ff(x)
        gu = self.gate_ff(x)
        h = torch.relu(u)
        for _ in range(self.steps):
            g = torch.sigmoid(gu + self.gate_rec(h))
            h = torch.relu(u + g * self.rec(h))
        return h


class ResidualBlock(nn.Module):
    def __init__(self, cin, cout):
        super().__init__()
        self.c1 = conv3(cin, cout)
        self.c2 = conv3(cout, cout)
        self.short = nn.Identity() if cin == cout else nn.Conv2d(cin, cout, kernel_size=1)

    def forward(self, x):
        return torch.relu(self.short(x) + self.c2(torch.relu(self.c1(x))))


def _block(variant: str, cin: int, cout: int, deep: bool, norm: bool) -> nn.Module:
    # early layers are plain convs in every variant; the characteristic
    # block is used from the second stage on
    if variant == "vgg" or not deep:
        return conv_bn_relu(cin, cout, norm)
    if variant == "rcnn":
        block = RecurrentConv(cin, cout)
    elif variant == "grcl":
        block = GatedRecurrentConv(cin, cout)
    elif variant == "resnet":
        block = ResidualBlock(cin, cout)
    else:
        raise ValueError(f"unknown backbone {variant!r}")
    return nn.Sequential(block, nn.BatchNorm2d(cout)) if norm else block


class Backbone(nn.Module):
    """Stack of conv stages, each followed by max pooling.

    Args:
        variant: one of :data:`BACKBONES`.
        channels: output channels per stage.
        height_pools / width_pools: pooling factor per stage.
    """

    def __init__(
        self,
        variant: str,
        channels: Sequence[int],
        height_pools: Sequence[int],
        width_pools: Sequence[int],
        in_channels: int = 1,
        norm: bool = True,
    ):
        super().__init__()
        if not (len(channels) == len(height_pools) == len(width_pools)):
            raise ValueError("channels, height_pools and width_pools must have equal length")
        if variant not in BACKBONES:
            raise ValueError(f"unknown backbone {variant!r}; choose from {BACKBONES}")
        layers = []
        cin = in_channels
        for i, (c, ph, pw) in enumerate(zip(channels, height_pools, width_pools)):
            layers.append(_block(variant, cin, c, deep=i > 0, norm=norm))
            if ph > 1 or pw > 1:
                layers.append(nn.MaxPool2d((ph, pw)))
            cin = c
        self.body = nn.Sequential(*layers)
        self.out_channels = cin

    def forward(self, x):
        return self.body(x)
