"""Ground geometry as the upper envelope of planes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from pointfoot.errors import ConfigError


@dataclass(frozen=True, eq=False)
class Terrain:
    """z(x, y) = max_k of plane heights; each plane is n . p = d with n_z > 0.

    Flat ground is one plane; the split terrain is a V-shaped valley of two
    wedges facing each other.
    """

    normals: np.ndarray
    offsets: np.ndarray
    kind: str = "flat"

    def __post_init__(self):
        n = np.atleast_2d(np.asarray(self.normals, dtype=float))
        d = np.atleast_1d(np.asarray(self.offsets, dtype=float))
        if n.shape[1] != 3 or n.shape[0] != d.shape[0]:
            raise ConfigError("terrain needs one offset per 3-vector normal")
        n = n / np.linalg.norm(n, axis=1, keepdims=True)
        if np.any(n[:, 2] <= 0):
            raise ConfigError("terrain planes must face upward")
        object.__setattr__(self, "normals", n)
        object.__setattr__(self, "offsets", d * 1.0)

    @classmethod
    def flat(cls, z=0.0) -> "Terrain":
        return cls(np.array([[0.0, 0.0, 1.0]]), np.array([float(z)]), "flat")

    @classmethod
    def split(cls, angle_deg=45.0, half_width=0.25, z=0.0) -> "Terrain":
        """Two wedges inclined ``angle_deg`` toward the centre line y = 0.

        Both surfaces pass through height ``z`` at y = +-half_width.
        """
        a = np.radians(angle_deg)
        s, c = np.sin(a), np.cos(a)
        # right wedge (y < 0) faces +y, left wedge faces -y
        normals = np.array([[0.0, s, c], [0.0, -s, c]])
        points = np.array([[0.0, -half_width, z], [0.0, half_width, z]])
        return cls(normals, np.einsum("ij,ij->i", normals, points), "split")

    def plane_at(self, p) -> int:
        return int(np.argmax(self.heights(p)))

    def heights(self, p) -> np.ndarray:
        n = self.normals
        return (self.offsets - n[:, 0] * p[0] - n[:, 1] * p[1]) / n[:, 2]

    def height(self, p) -> float:
        return float(self.heights(p).max())

    def normal(self, p) -> np.ndarray:
        return self.normals[self.plane_at(p)].copy()

    def clearance(self, p) -> float:
        """Signed distance along the active plane normal (negative below ground)."""
        k = self.plane_at(p)
        return float(self.normals[k] @ p - self.offsets[k])

    def to_dict(self) -> dict:
        return {"normals": self.normals.tolist(), "offsets": self.offsets.tolist(), "kind": self.kind}
