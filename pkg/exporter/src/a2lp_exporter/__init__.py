"""Export pretrained-backbone embeddings into the a2lp binary format."""

from .export import export, manifest_path
from .manifest import ExportManifest, read_manifest, write_manifest
from .networks import FEATURE_DIMS, ShapeMismatchError, build_backbone, load_checkpoint
from .wire import read_embeddings, write_embeddings

__all__ = [
    "ExportManifest",
    "FEATURE_DIMS",
    "ShapeMismatchError",
    "build_backbone",
    "export",
    "load_checkpoint",
    "manifest_path",
    "read_embeddings",
    "read_manifest",
    "write_embeddings",
    "write_manifest",
]
