"""Export manifest: provenance sidecar written next to each embedding file."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path

DATASETS = ("miniImageNet", "tieredImageNet", "CUB", "CIFAR-FS")
BACKBONES = ("resnet12", "wrn-28-10")

# novel-split class counts of the standard few-shot splits
EXPECTED_NOVEL_CLASSES = {
    "miniImageNet": 20,
    "tieredImageNet": 160,
    "CUB": 50,
    "CIFAR-FS": 20,
}


@dataclass(frozen=True)
class ExportManifest:
    dataset: str
    backbone: str
    split: str
    checkpoint: str
    checkpoint_sha256: str
    dim: int
    image_size: int
    row_count: int
    classes: tuple[str, ...]

    def validate(self, strict: bool = True) -> None:
        if self.dataset not in DATASETS:
            raise ValueError(f"unknown dataset {self.dataset!r}; expected one of {DATASETS}")
        if self.backbone not in BACKBONES:
            raise ValueError(f"unknown backbone {self.backbone!r}; expected one of {BACKBONES}")
        if self.split != "novel":
            raise ValueError("only the novel split is exported")
        if strict:
            expected = EXPECTED_NOVEL_CLASSES[self.dataset]
            if len(self.classes) != expected:
                raise ValueError(
                    f"{self.dataset} novel split has {expected} classes, "
                    f"found {len(self.classes)}"
                )


def sha256_file(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_manifest(manifest: ExportManifest, path: str | Path) -> None:
    lines = [
        f"dataset={manifest.dataset}",
        f"backbone={manifest.backbone}",
        f"split={manifest.split}",
        f"checkpoint={manifest.checkpoint}",
        f"checkpoint_sha256={manifest.checkpoint_sha256}",
        f"dim={manifest.dim}",
        f"image_size={manifest.image_size}",
        f"row_count={manifest.row_count}",
        f"class_count={len(manifest.classes)}",
        "classes=" + ",".join(manifest.classes),
    ]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_manifest(path: str | Path) -> ExportManifest:
    fields = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        key, _, value = line.partition("=")
        fields[key] = value
    classes = tuple(c for c in fields.get("classes", "").split(",") if c)
    if int(fields["class_count"]) != len(classes):
        raise ValueError("manifest class_count disagrees with its class list")
    return ExportManifest(
        dataset=fields["dataset"],
        backbone=fields["backbone"],
        split=fields["split"],
        checkpoint=fields["checkpoint"],
        checkpoint_sha256=fields["checkpoint_sha256"],
        dim=int(fields["dim"]),
        image_size=int(fields["image_size"]),
        row_count=int(fields["row_count"]),
        classes=classes,
    )
