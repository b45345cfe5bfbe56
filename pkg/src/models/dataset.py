"""Source images and dataset manifests."""

import json
import os
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np

from ..utils.error_handler import ValidationError
from ..utils.hashing import content_hash, file_checksum
from .compression import CompositeSpec, CompressionChain

ROLES = ('train', 'val', 'test')
MANIFEST_VERSION = 1


@dataclass
class SourceImage:
    """A preprocessed single-channel 8-bit image."""

    id: str
    pixels: np.ndarray
    origin: str = ""

    def __post_init__(self):
        if not self.id:
            raise ValidationError("image id cannot be empty")
        if self.pixels.ndim != 2:
            raise ValidationError(f"pixels must be a 2-D plane, got shape {self.pixels.shape}")
        if self.pixels.dtype != np.uint8:
            raise ValidationError(f"pixels must be uint8, got {self.pixels.dtype}")

    @property
    def shape(self):
        return self.pixels.shape

    def __str__(self) -> str:
        h, w = self.pixels.shape
        return f"SourceImage(id='{self.id}', {h}x{w})"


@dataclass(frozen=True)
class ManifestEntry:
    """
    One file of a dataset.

    Training entries carry a `chain` and the path of their uncompressed
    counterpart; test entries carry a `composite` spec and a mask path.
    Paths are relative to the dataset root.
    """

    image_id: str
    role: str
    path: str
    checksum: str
    chain: Optional[CompressionChain] = None
    composite: Optional[CompositeSpec] = None
    source_path: Optional[str] = None
    mask_path: Optional[str] = None

    def __post_init__(self):
        if not self.image_id:
            raise ValidationError("image_id cannot be empty")
        if self.role not in ROLES:
            raise ValidationError(f"role must be one of {ROLES}, got '{self.role}'")
        if (self.chain is None) == (self.composite is None):
            raise ValidationError(f"entry '{self.image_id}' needs exactly one of chain or composite")
        if not self.path:
            raise ValidationError("path cannot be empty")

    def to_dict(self) -> Dict[str, Any]:
        return {
            'image_id': self.image_id,
            'role': self.role,
            'path': self.path,
            'checksum': self.checksum,
            'chain': self.chain.to_dict() if self.chain else None,
            'composite': self.composite.to_dict() if self.composite else None,
            'source_path': self.source_path,
            'mask_path': self.mask_path,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ManifestEntry":
        return cls(
            image_id=data['image_id'],
            role=data['role'],
            path=data['path'],
            checksum=data['checksum'],
            chain=CompressionChain.from_dict(data['chain']) if data.get('chain') else None,
            composite=CompositeSpec.from_dict(data['composite']) if data.get('composite') else None,
            source_path=data.get('source_path'),
            mask_path=data.get('mask_path'),
        )


@dataclass
class DatasetManifest:
    """
    Index of a dataset directory.

    The serialized form contains no timestamps or absolute paths, so the
    same corpus, seed and recipe always serialize to the same bytes.
    """

    seed: int
    recipe_name: str
    entries: List[ManifestEntry] = field(default_factory=list)

    def __post_init__(self):
        counts = Counter(e.image_id for e in self.entries)
        duplicates = sorted(i for i, n in counts.items() if n > 1)
        if duplicates:
            raise ValidationError(f"duplicate image ids in manifest: {', '.join(duplicates[:5])}")

    def by_role(self, role: str) -> List[ManifestEntry]:
        if role not in ROLES:
            raise ValidationError(f"role must be one of {ROLES}, got '{role}'")
        return [e for e in self.entries if e.role == role]

    def get(self, image_id: str) -> Optional[ManifestEntry]:
        for entry in self.entries:
            if entry.image_id == image_id:
                return entry
        return None

    @property
    def role_counts(self) -> Dict[str, int]:
        counts = Counter(e.role for e in self.entries)
        return {role: counts.get(role, 0) for role in ROLES}

    def to_dict(self) -> Dict[str, Any]:
        return {
            'version': MANIFEST_VERSION,
            'seed': self.seed,
            'recipe_name': self.recipe_name,
            'counts': self.role_counts,
            'entries': [e.to_dict() for e in self.entries],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "DatasetManifest":
        if data.get('version', MANIFEST_VERSION) != MANIFEST_VERSION:
            raise ValidationError(f"unsupported manifest version {data.get('version')}")
        return cls(
            seed=int(data['seed']),
            recipe_name=data['recipe_name'],
            entries=[ManifestEntry.from_dict(e) for e in data.get('entries', [])],
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @property
    def content_hash(self) -> str:
        return content_hash(self.to_dict())

    def save(self, path: Union[str, Path]) -> Path:
        """Write the manifest atomically (temp file, then replace)."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        temp_file = path.with_suffix(path.suffix + '.tmp')
        with open(temp_file, 'w', encoding='utf-8', newline='\n') as f:
            f.write(self.to_json())
        os.replace(temp_file, path)
        return path

    @classmethod
    def load(cls, path: Union[str, Path]) -> "DatasetManifest":
        with open(path, 'r', encoding='utf-8') as f:
            return cls.from_dict(json.load(f))

    def verify_checksums(self, root: Union[str, Path]) -> List[str]:
        """
        Compare stored checksums with the files under `root`.

        Returns:
            Ids of entries whose file is missing or differs
        """
        root = Path(root)
        bad = []
        for entry in self.entries:
            file_path = root / entry.path
            if not file_path.is_file() or file_checksum(file_path) != entry.checksum:
                bad.append(entry.image_id)
        return bad
