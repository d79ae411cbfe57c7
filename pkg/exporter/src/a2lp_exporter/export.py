"""End-to-end export: images -> eval-mode features -> binary file + manifest."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import torch
from torch.utils.data import DataLoader

from .datasets import novel_split
from .manifest import ExportManifest, sha256_file, write_manifest
from .networks import FEATURE_DIMS, build_backbone, load_checkpoint
from .wire import write_embeddings


def export(
    dataset: str,
    backbone: str,
    checkpoint_path: str,
    data_root: str,
    out_path: str,
    image_size: int = 84,
    batch_size: int = 64,
    device: str = "cpu",
    num_workers: int = 0,
    strict: bool = True,
) -> ExportManifest:
    """Export one embedding row per novel-split image, with its class id.

    Inference runs in evaluation mode with no augmentation, so repeated
    exports are deterministic for a fixed checkpoint and device. Features
    are written raw (no normalization): the engine's preprocessing flag
    decides between plain l2 and the power-transform pipeline downstream.
    With ``strict`` the class count must match the dataset's published
    novel split; pass ``strict=False`` for partial exports.
    """
    model = build_backbone(backbone)
    load_checkpoint(model, checkpoint_path, backbone)
    model.eval().to(device)

    folder = novel_split(data_root, dataset, image_size)
    if len(folder) == 0:
        raise ValueError(f"no images found under {data_root}")
    loader = DataLoader(
        folder, batch_size=batch_size, shuffle=False, num_workers=num_workers
    )

    features, labels = [], []
    with torch.no_grad():
        for images, targets in loader:
            features.append(model(images.to(device)).cpu().numpy())
            labels.append(targets.numpy())
    vectors = np.concatenate(features).astype(np.float32)
    label_ids = np.concatenate(labels).astype(np.int64)

    expected_dim = FEATURE_DIMS[backbone]
    if vectors.shape[1] != expected_dim:
        raise RuntimeError(
            f"backbone produced {vectors.shape[1]}-d features, expected {expected_dim}"
        )

    manifest = ExportManifest(
        dataset=dataset,
        backbone=backbone,
        split="novel",
        checkpoint=str(checkpoint_path),
        checkpoint_sha256=sha256_file(checkpoint_path),
        dim=int(vectors.shape[1]),
        image_size=image_size,
        row_count=int(vectors.shape[0]),
        classes=tuple(folder.classes),
    )
    manifest.validate(strict=strict)

    write_embeddings(out_path, vectors, label_ids)
    write_manifest(manifest, manifest_path(out_path))
    return manifest


def manifest_path(out_path: str | Path) -> str:
    return str(out_path) + ".manifest"
