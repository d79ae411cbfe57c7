"""Novel-split image loading and evaluation-time transforms.

The exporter expects the novel split materialized as one directory per
class (the layout the public split archives unpack to). Classes are
ordered alphabetically, and that order defines the integer labels in the
exported file; the manifest records the class list so the mapping stays
auditable.
"""

from __future__ import annotations

from torchvision import datasets, transforms

# channel statistics conventionally used with these checkpoints
_IMAGENET_STYLE = dict(
    mean=(120.39586422 / 255.0, 115.59361427 / 255.0, 104.54012653 / 255.0),
    std=(70.68188272 / 255.0, 68.27635443 / 255.0, 72.54505529 / 255.0),
)
_CIFAR_STYLE = dict(
    mean=(0.5071, 0.4867, 0.4408),
    std=(0.2675, 0.2565, 0.2761),
)

NORMALIZATION = {
    "miniImageNet": _IMAGENET_STYLE,
    "tieredImageNet": _IMAGENET_STYLE,
    "CUB": _IMAGENET_STYLE,
    "CIFAR-FS": _CIFAR_STYLE,
}


def eval_transform(dataset: str, image_size: int = 84):
    """Deterministic inference transform: resize, center crop, normalize."""
    stats = NORMALIZATION[dataset]
    resize = int(image_size * 92 / 84)  # the usual enlarge-then-crop ratio
    return transforms.Compose(
        [
            transforms.Resize((resize, resize)),
            transforms.CenterCrop(image_size),
            transforms.ToTensor(),
            transforms.Normalize(stats["mean"], stats["std"]),
        ]
    )


def novel_split(data_root: str, dataset: str, image_size: int = 84):
    """ImageFolder over the novel-class directories."""
    return datasets.ImageFolder(data_root, transform=eval_transform(dataset, image_size))
