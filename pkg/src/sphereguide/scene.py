"""Scene model: shapes, configurations, distances, and feature embedding.

The double-sphere domain has an actuated robot sphere, a free object sphere,
a floor plane, and two wall boxes forming an L-shaped corner.  A static
configuration is the stacked centers ``s = (q, p)`` of robot and object.

Distance queries return the separation ``d``, the contact normal ``n``
(pointing from the second shape toward the first), and witness points on both
surfaces.  All queries have hand-derived Jacobians with respect to ``s`` so
the constraint solver can run Gauss-Newton steps on them.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np
import yaml

OBJECT_ID = 1
ROBOT_ID = 2

_GEOM_EPS = 1e-12


@dataclass(frozen=True)
class Shape:
    """One rigid shape.  ``kind`` is 'sphere', 'floor', or 'wall'.

    Spheres with id OBJECT_ID / ROBOT_ID take their center from the
    configuration vector; every other shape is fixed in the world.
    """

    id: int
    kind: str
    radius: float = 0.0
    height: float = 0.0                 # floor plane z
    center: tuple = (0.0, 0.0, 0.0)    # wall box center
    half_extents: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if self.kind not in ("sphere", "floor", "wall"):
            raise ValueError(f"unknown shape kind {self.kind!r}")
        if self.kind == "sphere" and self.radius <= 0.0:
            raise ValueError("sphere needs a positive radius")
        if self.kind == "wall" and min(self.half_extents) <= 0.0:
            raise ValueError("wall needs positive half extents")


@dataclass
class SceneSpec:
    shapes: tuple
    support_set: tuple          # shape ids the object may rest on
    box_lower: np.ndarray       # (6,) sampling box for s
    box_upper: np.ndarray
    gravity: float = 9.81
    mu: float = 0.8
    object_mass: float = 0.1
    sigma: float = 0.2          # proximity length scale for features
    object_inertia: np.ndarray = None  # (6,6) generalized inertia

    def __post_init__(self):
        self.box_lower = np.asarray(self.box_lower, dtype=float)
        self.box_upper = np.asarray(self.box_upper, dtype=float)
        if self.box_lower.shape != (6,) or self.box_upper.shape != (6,):
            raise ValueError("box bounds must be 6-vectors")
        if np.any(self.box_upper <= self.box_lower):
            raise ValueError("box upper bound must exceed lower bound")
        ids = [sh.id for sh in self.shapes]
        if len(set(ids)) != len(ids):
            raise ValueError("shape ids must be unique")
        if OBJECT_ID not in ids or ROBOT_ID not in ids:
            raise ValueError("scene needs object shape 1 and robot shape 2")
        by_id = {sh.id: sh for sh in self.shapes}
        if by_id[OBJECT_ID].kind != "sphere" or by_id[ROBOT_ID].kind != "sphere":
            raise ValueError("object and robot must be spheres")
        for j in self.support_set:
            if j == OBJECT_ID or j not in by_id:
                raise ValueError(f"support id {j} is not a valid shape")
        if len(self.support_set) < 3:
            raise ValueError("support set must allow contact modes up to arity 3")
        if self.object_inertia is None:
            # solid sphere: I = 2/5 m r^2
            m = self.object_mass
            moi = 0.4 * m * by_id[OBJECT_ID].radius ** 2
            self.object_inertia = np.diag([m, m, m, moi, moi, moi])
        else:
            self.object_inertia = np.asarray(self.object_inertia, dtype=float)

    def shape(self, i: int) -> Shape:
        for sh in self.shapes:
            if sh.id == i:
                return sh
        raise KeyError(f"no shape with id {i}")

    @property
    def object_radius(self) -> float:
        return self.shape(OBJECT_ID).radius

    @property
    def robot_radius(self) -> float:
        return self.shape(ROBOT_ID).radius

    @property
    def gravity_vec(self) -> np.ndarray:
        return np.array([0.0, 0.0, -self.gravity])

    @property
    def proximity_ids(self) -> tuple:
        """Ids of the shapes the proximity features cover (all but the object)."""
        return tuple(sh.id for sh in self.shapes if sh.id != OBJECT_ID)


@dataclass
class StaticConfig:
    """A statically feasible configuration with its contact mode.

    ``aux`` optionally keeps the contact auxiliaries (point of application
    and force per active support, concatenated) from the solve that produced
    the sample, so feasibility can be re-checked without re-solving.
    """

    s: np.ndarray               # (6,) robot center then object center
    mode: tuple                 # sorted support ids in contact with the object
    violation: float = 0.0
    aux: np.ndarray = None

    def __post_init__(self):
        self.s = np.asarray(self.s, dtype=float)
        self.mode = tuple(int(j) for j in self.mode)
        if self.aux is not None:
            self.aux = np.asarray(self.aux, dtype=float)

    @property
    def robot_pos(self) -> np.ndarray:
        return self.s[0:3]

    @property
    def object_pos(self) -> np.ndarray:
        return self.s[3:6]


@dataclass
class DynState:
    """Full dynamic simulator state."""

    q: np.ndarray               # robot center
    p: np.ndarray               # object center
    qd: np.ndarray
    pd: np.ndarray
    w: np.ndarray               # object angular velocity
    quat: np.ndarray            # object orientation, (w, x, y, z), unit norm
    ref: np.ndarray             # actuator reference position
    refvel: np.ndarray          # actuator reference velocity
    t: float = 0.0

    SIZE = 26

    def to_array(self) -> np.ndarray:
        out = np.empty(self.SIZE)
        out[0:3] = self.q
        out[3:6] = self.p
        out[6:9] = self.qd
        out[9:12] = self.pd
        out[12:15] = self.w
        out[15:19] = self.quat
        out[19:22] = self.ref
        out[22:25] = self.refvel
        out[25] = self.t
        return out

    @classmethod
    def from_array(cls, arr) -> "DynState":
        arr = np.asarray(arr, dtype=float)
        if arr.shape != (cls.SIZE,):
            raise ValueError(f"state array must have shape ({cls.SIZE},)")
        return cls(
            q=arr[0:3].copy(), p=arr[3:6].copy(),
            qd=arr[6:9].copy(), pd=arr[9:12].copy(),
            w=arr[12:15].copy(), quat=arr[15:19].copy(),
            ref=arr[19:22].copy(), refvel=arr[22:25].copy(),
            t=float(arr[25]),
        )

    @classmethod
    def at_rest(cls, s) -> "DynState":
        """State with the given static configuration and all velocities zero."""
        s = np.asarray(s, dtype=float)
        return cls(
            q=s[0:3].copy(), p=s[3:6].copy(),
            qd=np.zeros(3), pd=np.zeros(3),
            w=np.zeros(3), quat=np.array([1.0, 0.0, 0.0, 0.0]),
            ref=s[0:3].copy(), refvel=np.zeros(3),
            t=0.0,
        )


def default_scene() -> SceneSpec:
    """The reference double-sphere scene.

    One-meter workspace over an L-shaped corner: the floor at z=0 and two
    0.6 m tall walls hugging the x=0 and y=0 edges from the outside.
    """
    shapes = (
        Shape(id=OBJECT_ID, kind="sphere", radius=0.08),
        Shape(id=ROBOT_ID, kind="sphere", radius=0.08),
        Shape(id=3, kind="floor", height=0.0),
        Shape(id=4, kind="wall", center=(-0.05, 0.45, 0.3),
              half_extents=(0.05, 0.55, 0.3)),
        Shape(id=5, kind="wall", center=(0.45, -0.05, 0.3),
              half_extents=(0.55, 0.05, 0.3)),
    )
    return SceneSpec(
        shapes=shapes,
        support_set=(2, 3, 4, 5),
        box_lower=np.zeros(6),
        box_upper=np.array([1.0, 1.0, 0.6, 1.0, 1.0, 0.6]),
    )


# ---------------------------------------------------------------------------
# serialization

def scene_to_dict(spec: SceneSpec) -> dict:
    shapes = []
    for sh in spec.shapes:
        entry = {"id": sh.id, "kind": sh.kind}
        if sh.kind == "sphere":
            entry["radius"] = sh.radius
        elif sh.kind == "floor":
            entry["height"] = sh.height
        else:
            entry["center"] = list(sh.center)
            entry["half_extents"] = list(sh.half_extents)
        shapes.append(entry)
    return {
        "version": 1,
        "gravity": spec.gravity,
        "mu": spec.mu,
        "object_mass": spec.object_mass,
        "sigma": spec.sigma,
        "shapes": shapes,
        "support_set": list(spec.support_set),
        "box_lower": spec.box_lower.tolist(),
        "box_upper": spec.box_upper.tolist(),
    }


def scene_from_dict(data: dict) -> SceneSpec:
    shapes = []
    for entry in data["shapes"]:
        kind = entry["kind"]
        if kind == "sphere":
            shapes.append(Shape(id=entry["id"], kind=kind, radius=entry["radius"]))
        elif kind == "floor":
            shapes.append(Shape(id=entry["id"], kind=kind, height=entry["height"]))
        elif kind == "wall":
            shapes.append(Shape(id=entry["id"], kind=kind,
                                center=tuple(entry["center"]),
                                half_extents=tuple(entry["half_extents"])))
        else:
            raise ValueError(f"unknown shape kind {kind!r}")
    return SceneSpec(
        shapes=tuple(shapes),
        support_set=tuple(data["support_set"]),
        box_lower=np.array(data["box_lower"], dtype=float),
        box_upper=np.array(data["box_upper"], dtype=float),
        gravity=float(data.get("gravity", 9.81)),
        mu=float(data.get("mu", 0.8)),
        object_mass=float(data.get("object_mass", 0.1)),
        sigma=float(data.get("sigma", 0.2)),
    )


def save_scene(spec: SceneSpec, path):
    with open(path, "w") as fh:
        yaml.safe_dump(scene_to_dict(spec), fh, sort_keys=False)


def load_scene(path) -> SceneSpec:
    with open(path) as fh:
        return scene_from_dict(yaml.safe_load(fh))


def scene_hash(spec: SceneSpec) -> str:
    """Stable 16-hex-digit digest of the scene definition."""
    blob = json.dumps(scene_to_dict(spec), sort_keys=True)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


# ---------------------------------------------------------------------------
# geometry

def shape_center(spec: SceneSpec, i: int, s) -> tuple:
    """Center of shape ``i`` at configuration ``s`` and its (3,6) Jacobian."""
    s = np.asarray(s, dtype=float)
    jac = np.zeros((3, 6))
    if i == ROBOT_ID:
        jac[:, 0:3] = np.eye(3)
        return s[0:3].copy(), jac
    if i == OBJECT_ID:
        jac[:, 3:6] = np.eye(3)
        return s[3:6].copy(), jac
    sh = spec.shape(i)
    if sh.kind == "wall":
        return np.array(sh.center), jac
    if sh.kind == "floor":
        return np.array([0.0, 0.0, sh.height]), jac
    raise ValueError(f"shape {i} has no movable center")


def _sphere_sphere(ci, cj, ri, rj):
    delta = ci - cj
    length = float(np.linalg.norm(delta))
    if length < _GEOM_EPS:
        # coincident centers: pick a fixed normal so the query stays defined
        n = np.array([0.0, 0.0, 1.0])
        d = -ri - rj
        dn = np.zeros((3, 3))
    else:
        n = delta / length
        d = length - ri - rj
        dn = (np.eye(3) - np.outer(n, n)) / length
    wi = ci - ri * n
    wj = cj + rj * n
    return d, n, wi, wj, dn


def _sphere_floor(c, r, z0):
    n = np.array([0.0, 0.0, 1.0])
    d = float(c[2] - z0) - r
    wi = c - r * n
    wj = np.array([c[0], c[1], z0])
    return d, n, wi, wj, np.zeros((3, 3))


def _sphere_box(c, r, lo, hi):
    """Distance of a sphere to an axis-aligned box, with center-gradients.

    Returns (d, n, w_sphere, w_box, dn_dc, clamp_mask).  ``n`` points from
    the box toward the sphere center.
    """
    u = np.clip(c, lo, hi)
    delta = c - u
    length = float(np.linalg.norm(delta))
    if length > _GEOM_EPS:
        n = delta / length
        d = length - r
        mask = (delta != 0.0).astype(float)
        dn = ((np.eye(3) - np.outer(n, n)) / length) * mask[None, :]
        wi = c - r * n
        return d, n, wi, u, dn, mask
    # center inside the box (or exactly on its surface): nearest face wins,
    # fixed axis order breaks ties
    best_ax, best_sign, best_dist = 0, 1.0, np.inf
    for ax in range(3):
        dist_lo = c[ax] - lo[ax]
        dist_hi = hi[ax] - c[ax]
        if dist_lo < best_dist:
            best_ax, best_sign, best_dist = ax, -1.0, dist_lo
        if dist_hi < best_dist:
            best_ax, best_sign, best_dist = ax, 1.0, dist_hi
    n = np.zeros(3)
    n[best_ax] = best_sign
    d = -best_dist - r
    wj = c.copy()
    wj[best_ax] = hi[best_ax] if best_sign > 0 else lo[best_ax]
    wi = c - r * n
    return d, n, wi, wj, np.zeros((3, 3)), np.zeros(3)


def pair_distance(spec: SceneSpec, i: int, j: int, s) -> tuple:
    """(d, n, w_i, w_j) for the shape pair.  ``n`` points from j toward i."""
    d, n, wi, wj, _, _ = pair_distance_jac(spec, i, j, s)
    return d, n, wi, wj


def pair_distance_only(spec: SceneSpec, i: int, j: int, s) -> float:
    """Pair distance without witness points or gradients.

    Same arithmetic as pair_distance, so the values agree bit for bit.
    """
    s = np.asarray(s, dtype=float)
    sh_i, sh_j = spec.shape(i), spec.shape(j)
    if sh_i.kind != "sphere":
        raise ValueError("first shape of a pair query must be a sphere")
    if i == ROBOT_ID:
        ci = s[0:3]
    elif i == OBJECT_ID:
        ci = s[3:6]
    else:
        raise ValueError(f"shape {i} has no movable center")

    if sh_j.kind == "sphere":
        cj = s[0:3] if j == ROBOT_ID else s[3:6]
        length = float(np.linalg.norm(ci - cj))
        if length < _GEOM_EPS:
            return -sh_i.radius - sh_j.radius
        return length - sh_i.radius - sh_j.radius
    if sh_j.kind == "floor":
        return float(ci[2] - sh_j.height) - sh_i.radius

    lo = np.array(sh_j.center) - np.array(sh_j.half_extents)
    hi = np.array(sh_j.center) + np.array(sh_j.half_extents)
    delta = ci - np.clip(ci, lo, hi)
    length = float(np.linalg.norm(delta))
    if length > _GEOM_EPS:
        return length - sh_i.radius
    best_dist = np.inf
    for ax in range(3):
        best_dist = min(best_dist, float(ci[ax] - lo[ax]), float(hi[ax] - ci[ax]))
    return -best_dist - sh_i.radius


def pair_distance_jac(spec: SceneSpec, i: int, j: int, s) -> tuple:
    """Distance query plus Jacobians: returns (d, n, w_i, w_j, Jd, Jn).

    Jd is (6,) = dd/ds and Jn is (3,6) = dn/ds.
    """
    s = np.asarray(s, dtype=float)
    sh_i, sh_j = spec.shape(i), spec.shape(j)
    if sh_i.kind != "sphere":
        raise ValueError("first shape of a pair query must be a sphere")
    ci, jac_i = shape_center(spec, i, s)

    if sh_j.kind == "sphere":
        cj, jac_j = shape_center(spec, j, s)
        d, n, wi, wj, dn_dci = _sphere_sphere(ci, cj, sh_i.radius, sh_j.radius)
        jd = n @ jac_i - n @ jac_j
        jn = dn_dci @ (jac_i - jac_j)
        return d, n, wi, wj, jd, jn

    if sh_j.kind == "floor":
        d, n, wi, wj, _ = _sphere_floor(ci, sh_i.radius, sh_j.height)
        jd = n @ jac_i
        return d, n, wi, wj, jd, np.zeros((3, 6))

    lo = np.array(sh_j.center) - np.array(sh_j.half_extents)
    hi = np.array(sh_j.center) + np.array(sh_j.half_extents)
    d, n, wi, wj, dn_dc, mask = _sphere_box(ci, sh_i.radius, lo, hi)
    if np.any(mask):
        jd = (n * mask) @ jac_i
    else:
        jd = n @ jac_i      # center inside: d falls along the face normal
    jn = dn_dc @ jac_i
    return d, n, wi, wj, jd, jn


def surface_distance(spec: SceneSpec, i: int, point, s) -> float:
    return surface_distance_jac(spec, i, point, s)[0]


def surface_distance_jac(spec: SceneSpec, i: int, point, s) -> tuple:
    """Signed distance of ``point`` to the surface of shape ``i``.

    Returns (sd, d_sd/d_point (3,), d_sd/d_s (6,)).  Negative inside.
    """
    point = np.asarray(point, dtype=float)
    s = np.asarray(s, dtype=float)
    sh = spec.shape(i)

    if sh.kind == "sphere":
        c, jac_c = shape_center(spec, i, s)
        delta = point - c
        length = float(np.linalg.norm(delta))
        if length < _GEOM_EPS:
            m = np.array([0.0, 0.0, 1.0])
        else:
            m = delta / length
        sd = length - sh.radius
        return sd, m, -(m @ jac_c)

    if sh.kind == "floor":
        grad = np.array([0.0, 0.0, 1.0])
        return float(point[2] - sh.height), grad, np.zeros(6)

    # wall box SDF
    b = np.array(sh.center)
    e = np.array(sh.half_extents)
    rel = point - b
    q = np.abs(rel) - e
    outside = np.maximum(q, 0.0)
    out_len = float(np.linalg.norm(outside))
    grad = np.zeros(3)
    if out_len > _GEOM_EPS:
        sd = out_len
        for ax in range(3):
            if q[ax] > 0.0:
                grad[ax] = np.sign(rel[ax]) * outside[ax] / out_len
    else:
        best_ax = 0
        for ax in range(1, 3):
            if q[ax] > q[best_ax]:
                best_ax = ax
        sd = q[best_ax]
        grad[best_ax] = np.sign(rel[best_ax]) if rel[best_ax] != 0.0 else 1.0
    return float(sd), grad, np.zeros(6)


def contact_pairs(spec: SceneSpec) -> list:
    """All pairs subject to non-collision, in a fixed order.

    Object against every potential support, then the robot against every
    environment shape (robot-object is already covered by the first group
    because the robot is in the support set).
    """
    pairs = [(OBJECT_ID, j) for j in sorted(spec.support_set)]
    env = [sh.id for sh in spec.shapes if sh.id not in (OBJECT_ID, ROBOT_ID)]
    pairs += [(ROBOT_ID, e) for e in sorted(env)]
    return pairs


# ---------------------------------------------------------------------------
# feature embedding

def proximity_features(spec: SceneSpec, s) -> np.ndarray:
    """c_i = 1 - clip(d_1i / sigma, 0, 1) for every non-object shape."""
    s = np.asarray(s, dtype=float)
    out = np.empty(len(spec.proximity_ids))
    for k, i in enumerate(spec.proximity_ids):
        d = pair_distance_only(spec, OBJECT_ID, i, s)
        out[k] = 1.0 - min(max(d / spec.sigma, 0.0), 1.0)
    return out


def feature_embed(spec: SceneSpec, state: DynState) -> np.ndarray:
    """Goal-space embedding phi(x) = (2 p, q, 0.1 pd, 0.1 qd, 0.1 c)."""
    s = np.concatenate([state.q, state.p])
    c = proximity_features(spec, s)
    return np.concatenate([2.0 * state.p, state.q,
                           0.1 * state.pd, 0.1 * state.qd, 0.1 * c])


def phi_static(spec: SceneSpec, s) -> np.ndarray:
    """Embedding of a static configuration (zero velocities)."""
    s = np.asarray(s, dtype=float)
    c = proximity_features(spec, s)
    zeros = np.zeros(3)
    return np.concatenate([2.0 * s[3:6], s[0:3], zeros, zeros, 0.1 * c])
