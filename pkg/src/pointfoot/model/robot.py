"""Robot description: links, joints, the floating base and named body points."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Mapping

import jsonschema
import numpy as np

from pointfoot.errors import ModelError
from pointfoot.model import kernels

PLANAR = "planar"
SPATIAL = "spatial"

ROBOT_SCHEMA = {
    "type": "object",
    "required": ["version", "name", "mode", "links"],
    "properties": {
        "version": {"type": "integer", "const": 1},
        "name": {"type": "string"},
        "mode": {"enum": [PLANAR, SPATIAL]},
        "gravity": {"type": "number", "minimum": 0},
        "links": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["name", "parent", "joint", "mass", "com", "inertia"],
                "properties": {
                    "name": {"type": "string"},
                    "parent": {"type": ["string", "null"]},
                    "joint": {
                        "type": "object",
                        "required": ["type"],
                        "properties": {
                            "type": {"enum": ["revolute", "floating-base"]},
                            "axis": {"type": "array", "items": {"type": "number"}, "minItems": 3, "maxItems": 3},
                            "origin": {"type": "array", "items": {"type": "number"}, "minItems": 3, "maxItems": 3},
                            "rpy": {"type": "array", "items": {"type": "number"}, "minItems": 3, "maxItems": 3},
                        },
                    },
                    "mass": {"type": "number"},
                    "com": {"type": "array", "items": {"type": "number"}, "minItems": 3, "maxItems": 3},
                    "inertia": {"type": "array", "minItems": 3, "maxItems": 3},
                    "rotor_inertia": {"type": "number", "minimum": 0},
                },
            },
        },
        "lumped_base_mass": {
            "type": "object",
            "required": ["mass", "com", "inertia"],
        },
        "points": {
            "type": "object",
            "additionalProperties": {
                "type": "object",
                "required": ["link", "offset"],
                "properties": {
                    "link": {"type": "string"},
                    "offset": {"type": "array", "items": {"type": "number"}, "minItems": 3, "maxItems": 3},
                },
            },
        },
    },
}

# virtual single-dof joints that realise the floating base, root first
_BASE_CHAINS = {
    PLANAR: (
        ("base_x", kernels.PRISMATIC, (1.0, 0.0, 0.0)),
        ("base_z", kernels.PRISMATIC, (0.0, 0.0, 1.0)),
        ("base_pitch", kernels.REVOLUTE, (0.0, 1.0, 0.0)),
    ),
    SPATIAL: (
        ("base_x", kernels.PRISMATIC, (1.0, 0.0, 0.0)),
        ("base_y", kernels.PRISMATIC, (0.0, 1.0, 0.0)),
        ("base_z", kernels.PRISMATIC, (0.0, 0.0, 1.0)),
        ("base_yaw", kernels.REVOLUTE, (0.0, 0.0, 1.0)),
        ("base_pitch", kernels.REVOLUTE, (0.0, 1.0, 0.0)),
        ("base_roll", kernels.REVOLUTE, (1.0, 0.0, 0.0)),
    ),
}


def rpy_matrix(rpy) -> np.ndarray:
    r, p, y = rpy
    cr, sr = np.cos(r), np.sin(r)
    cp, sp = np.cos(p), np.sin(p)
    cy, sy = np.cos(y), np.sin(y)
    Rx = np.array([[1, 0, 0], [0, cr, -sr], [0, sr, cr]])
    Ry = np.array([[cp, 0, sp], [0, 1, 0], [-sp, 0, cp]])
    Rz = np.array([[cy, -sy, 0], [sy, cy, 0], [0, 0, 1]])
    return Rz @ Ry @ Rx


@dataclass(frozen=True)
class Joint:
    type: str
    axis: tuple = (0.0, 1.0, 0.0)
    origin: tuple = (0.0, 0.0, 0.0)
    rpy: tuple = (0.0, 0.0, 0.0)


@dataclass(frozen=True)
class Link:
    name: str
    parent: str | None
    joint: Joint
    mass: float
    com: tuple
    inertia: tuple
    rotor_inertia: float = 0.0


@dataclass(frozen=True)
class BodyPoint:
    link: str
    offset: tuple


@dataclass(frozen=True)
class _Arrays:
    parent: np.ndarray
    jtype: np.ndarray
    axis: np.ndarray
    E_tree: np.ndarray
    r_tree: np.ndarray
    mass: np.ndarray
    com: np.ndarray
    Ic: np.ndarray
    armature: np.ndarray


@dataclass(frozen=True, eq=False)
class RobotModel:
    """Immutable articulated model of a floating-base point-foot robot.

    The floating base is expanded into a chain of single-dof virtual joints,
    so generalized positions and velocities have the same dimension:
    ``(x, z, pitch)`` in planar mode and ``(x, y, z, yaw, pitch, roll)``
    (Z-Y-X Euler) in spatial mode, followed by the leg joints in link order.
    """

    name: str
    mode: str
    links: tuple
    points: Mapping[str, BodyPoint] = field(default_factory=dict)
    gravity: float = 9.81
    _arrays: _Arrays = field(init=False, repr=False)
    coordinate_names: tuple = field(init=False)
    body_index: Mapping[str, int] = field(init=False, repr=False)
    actuated_selector: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.mode not in _BASE_CHAINS:
            raise ModelError(f"unknown mode {self.mode!r}")
        chain = _BASE_CHAINS[self.mode]
        roots = [lk for lk in self.links if lk.parent is None]
        if len(roots) != 1 or roots[0].joint.type != "floating-base":
            raise ModelError("exactly one root link with a floating-base joint is required")
        if self.links[0] is not roots[0]:
            raise ModelError("the floating-base link must come first")

        nv = len(chain) - 1 + len(self.links)
        parent = np.full(nv, -1, dtype=np.int64)
        jtype = np.zeros(nv, dtype=np.int64)
        axis = np.zeros((nv, 3))
        E_tree = np.tile(np.eye(3), (nv, 1, 1))
        r_tree = np.zeros((nv, 3))
        mass = np.zeros(nv)
        com = np.zeros((nv, 3))
        Ic = np.zeros((nv, 3, 3))
        armature = np.zeros(nv)
        names = []
        index = {}

        for i, (cname, jt, ax) in enumerate(chain):
            parent[i] = i - 1
            jtype[i] = jt
            axis[i] = ax
            names.append(cname)
        nbase = len(chain)
        base_body = nbase - 1
        index[roots[0].name] = base_body

        for k, link in enumerate(self.links):
            if not link.mass > 0:
                raise ModelError(f"link {link.name!r}: mass must be positive")
            inertia = np.asarray(link.inertia, dtype=float)
            if inertia.shape != (3, 3) or not np.allclose(inertia, inertia.T, atol=1e-12):
                raise ModelError(f"link {link.name!r}: inertia must be a symmetric 3x3 matrix")
            if np.linalg.eigvalsh(inertia).min() <= 0:
                raise ModelError(f"link {link.name!r}: inertia must be positive definite")
            if k == 0:
                i = base_body
            else:
                if link.joint.type != "revolute":
                    raise ModelError(f"link {link.name!r}: only the root may carry a floating-base joint")
                if link.parent not in index:
                    raise ModelError(f"link {link.name!r}: parent {link.parent!r} must appear earlier")
                if link.name in index:
                    raise ModelError(f"duplicate link name {link.name!r}")
                i = nbase + k - 1
                parent[i] = index[link.parent]
                jtype[i] = kernels.REVOLUTE
                ax = np.asarray(link.joint.axis, dtype=float)
                norm = np.linalg.norm(ax)
                if norm < 1e-12:
                    raise ModelError(f"link {link.name!r}: zero joint axis")
                axis[i] = ax / norm
                E_tree[i] = rpy_matrix(link.joint.rpy)
                r_tree[i] = link.joint.origin
                armature[i] = link.rotor_inertia
                names.append(link.name)
                index[link.name] = i
                if self.mode == PLANAR and not np.allclose(np.abs(E_tree[i] @ axis[i]), (0, 1, 0)):
                    raise ModelError(f"link {link.name!r}: planar joints must turn about y")
            mass[i] = link.mass
            com[i] = link.com
            Ic[i] = inertia

        for pname, pt in self.points.items():
            if pt.link not in index:
                raise ModelError(f"point {pname!r} references unknown link {pt.link!r}")

        selector = np.zeros(nv, dtype=bool)
        selector[nbase:] = True
        object.__setattr__(self, "_arrays", _Arrays(parent, jtype, axis, E_tree, r_tree, mass, com, Ic, armature))
        object.__setattr__(self, "coordinate_names", tuple(names))
        object.__setattr__(self, "body_index", dict(index))
        object.__setattr__(self, "actuated_selector", selector)
        for arr in (parent, jtype, axis, E_tree, r_tree, mass, com, Ic, armature, selector):
            arr.flags.writeable = False

    @property
    def n_dofs(self) -> int:
        return len(self.coordinate_names)

    @property
    def n_base(self) -> int:
        return len(_BASE_CHAINS[self.mode])

    @property
    def n_actuated(self) -> int:
        return self.n_dofs - self.n_base

    @property
    def task_rows(self) -> tuple:
        """World axes kept for point quantities (x, z in planar mode)."""
        return (0, 2) if self.mode == PLANAR else (0, 1, 2)

    @property
    def total_mass(self) -> float:
        return float(self._arrays.mass.sum())

    @property
    def U(self) -> np.ndarray:
        """Actuated-joint selection matrix, n_actuated x n_dofs."""
        return np.eye(self.n_dofs)[self.actuated_selector]

    @property
    def rotor_inertias(self) -> np.ndarray:
        return self._arrays.armature[self.actuated_selector].copy()

    @property
    def actuated_names(self) -> tuple:
        return self.coordinate_names[self.n_base:]

    def coordinate(self, name: str) -> int:
        try:
            return self.coordinate_names.index(name)
        except ValueError:
            raise ModelError(f"unknown coordinate {name!r}") from None

    def body(self, link_name) -> int:
        if isinstance(link_name, (int, np.integer)):
            if not 0 <= link_name < self.n_dofs:
                raise ModelError(f"unknown body id {link_name}")
            return int(link_name)
        try:
            return self.body_index[link_name]
        except KeyError:
            raise ModelError(f"unknown body {link_name!r}") from None

    def point(self, name: str) -> tuple:
        """(body index, local offset) of a named point."""
        try:
            pt = self.points[name]
        except KeyError:
            raise ModelError(f"unknown point {name!r}") from None
        return self.body_index[pt.link], np.asarray(pt.offset, dtype=float)

    def with_rotor_inertias(self, values) -> "RobotModel":
        values = list(values)
        if len(values) != self.n_actuated:
            raise ModelError("one rotor inertia per actuated joint expected")
        links = [self.links[0]] + [
            Link(lk.name, lk.parent, lk.joint, lk.mass, lk.com, lk.inertia, float(v))
            for lk, v in zip(self.links[1:], values)
        ]
        return RobotModel(self.name, self.mode, tuple(links), self.points, self.gravity)


def _lump(link: Link, extra: dict) -> Link:
    """Merge an extra rigid mass (e.g. a planarizer) into a link."""
    m1, m2 = link.mass, float(extra["mass"])
    c1, c2 = np.asarray(link.com, float), np.asarray(extra["com"], float)
    m = m1 + m2
    c = (m1 * c1 + m2 * c2) / m
    inertia = np.zeros((3, 3))
    for mi, ci, Ii in ((m1, c1, link.inertia), (m2, c2, extra["inertia"])):
        d = ci - c
        inertia += np.asarray(Ii, float) + mi * (d @ d * np.eye(3) - np.outer(d, d))
    return Link(link.name, link.parent, link.joint, m, tuple(c), tuple(map(tuple, inertia)), link.rotor_inertia)


def model_from_dict(doc: dict) -> RobotModel:
    try:
        jsonschema.validate(doc, ROBOT_SCHEMA)
    except jsonschema.ValidationError as exc:
        path = ".".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ModelError(f"robot description invalid at {path}: {exc.message}") from None
    links = []
    for item in doc["links"]:
        j = item["joint"]
        joint = Joint(
            type=j["type"],
            axis=tuple(j.get("axis", (0.0, 1.0, 0.0))),
            origin=tuple(j.get("origin", (0.0, 0.0, 0.0))),
            rpy=tuple(j.get("rpy", (0.0, 0.0, 0.0))),
        )
        links.append(Link(
            name=item["name"],
            parent=item["parent"],
            joint=joint,
            mass=float(item["mass"]),
            com=tuple(item["com"]),
            inertia=tuple(tuple(r) for r in item["inertia"]),
            rotor_inertia=float(item.get("rotor_inertia", 0.0)),
        ))
    if "lumped_base_mass" in doc:
        links[0] = _lump(links[0], doc["lumped_base_mass"])
    points = {k: BodyPoint(v["link"], tuple(v["offset"])) for k, v in doc.get("points", {}).items()}
    return RobotModel(doc["name"], doc["mode"], tuple(links), points, float(doc.get("gravity", 9.81)))


def load_model(path_or_name) -> RobotModel:
    """Load a robot description from a JSON path or a bundled model name."""
    path = Path(path_or_name)
    if path.suffix == ".json" and path.exists():
        text = path.read_text()
    else:
        res = resources.files("pointfoot.model").joinpath("data", f"{path_or_name}.json")
        if not res.is_file():
            raise ModelError(f"no robot description found for {path_or_name!r}")
        text = res.read_text()
    return model_from_dict(json.loads(text))
