"""Robot model: kinematic tree ingestion and validation.

Model files use the line-based ``rbdmodel v1`` format::

    rbdmodel v1
    name my_robot
    gravity 0 0 -9.81

    link torso
      mass 13.0
      com 0 0 0.10
      inertia 0.20 0.18 0.10        # Ixx Iyy Izz (optionally + Ixy Ixz Iyz)

    joint floating_base
      type floating
      child torso

    joint l_hip_yaw
      type revolute
      parent torso
      child l_hip_yaw_link
      axis 0 0 1
      origin 0 0.08 -0.12
      pos_limits -0.8 0.8
      vel_limit 15
      torque_limit 60

    foot left
      link l_foot
      offset 0 0 -0.03
      half_length 0.09
      half_width 0.05
      friction 0.7

Exactly one floating joint must root the tree; revolute joints are the
generalized coordinates in file order. Feet are named ``left``/``right``.
"""

from dataclasses import dataclass, field

import numpy as np


class ModelError(Exception):
    """Parse or validation failure; message names the line/field at fault."""


@dataclass(frozen=True)
class Link:
    name: str
    mass: float
    com: np.ndarray          # (3,) CoM offset in link frame
    inertia: np.ndarray      # (3,3) rotational inertia about the CoM, link frame


@dataclass(frozen=True)
class Joint:
    name: str
    parent: int              # parent link index
    child: int               # child link index
    axis: np.ndarray         # (3,) unit rotation axis, joint/child frame
    origin: np.ndarray       # (3,) parent-frame translation to the joint origin
    rpy: np.ndarray          # (3,) fixed parent->joint rotation (rpy, usually zero)
    pos_lo: float
    pos_hi: float
    vel_limit: float
    torque_limit: float


@dataclass(frozen=True)
class Foot:
    side: str                # "left" | "right"
    link: int                # link the foot frame is attached to
    offset: np.ndarray       # (3,) link-frame offset of the foot frame origin
    half_length: float       # X, m
    half_width: float        # Y, m
    friction: float          # mu


@dataclass
class RobotModel:
    """Immutable after load; all derived indexing is precomputed here."""

    name: str
    gravity: np.ndarray               # (3,) world frame, m/s^2
    links: list
    joints: list                      # revolute joints only, coordinate order
    feet: dict                        # side -> Foot
    root: int = 0

    # derived, filled by _finalize
    nj: int = 0
    parent_link: list = field(default_factory=list)    # per link: parent link (-1 for root)
    link_joint: list = field(default_factory=list)     # per link: joint index leading to it (-1 root)
    joint_path: list = field(default_factory=list)     # per link: root-to-link joint index chain
    children: list = field(default_factory=list)

    def _finalize(self):
        n = len(self.links)
        self.nj = len(self.joints)
        self.parent_link = [-1] * n
        self.link_joint = [-1] * n
        self.children = [[] for _ in range(n)]
        for j, jnt in enumerate(self.joints):
            self.parent_link[jnt.child] = jnt.parent
            self.link_joint[jnt.child] = j
            self.children[jnt.parent].append(jnt.child)
        self.joint_path = []
        for l in range(n):
            path = []
            k = l
            while k != self.root:
                path.append(self.link_joint[k])
                k = self.parent_link[k]
            self.joint_path.append(path[::-1])

    @property
    def nv(self):
        """Velocity dimension nj + 6."""
        return self.nj + 6

    @property
    def nq(self):
        """Configuration dimension nj + 7."""
        return self.nj + 7

    @property
    def total_mass(self):
        return sum(l.mass for l in self.links)

    def link_index(self, name):
        for i, l in enumerate(self.links):
            if l.name == name:
                return i
        raise ModelError(f"unknown link '{name}'")

    def foot_hip_joint(self, side):
        """First joint on the root-to-foot-link chain (the hip of that leg)."""
        return self.joint_path[self.feet[side].link][0]

    def joint_limits(self):
        """(lo, hi, vel, torque) arrays of length nj."""
        lo = np.array([j.pos_lo for j in self.joints])
        hi = np.array([j.pos_hi for j in self.joints])
        vel = np.array([j.vel_limit for j in self.joints])
        tau = np.array([j.torque_limit for j in self.joints])
        return lo, hi, vel, tau


def _floats(tokens, n, lineno, key):
    if len(tokens) != n:
        raise ModelError(f"line {lineno}: '{key}' expects {n} numbers, got {len(tokens)}")
    try:
        return [float(t) for t in tokens]
    except ValueError as e:
        raise ModelError(f"line {lineno}: '{key}': {e}") from None


def _inertia_matrix(vals, lineno):
    if len(vals) == 3:
        ixx, iyy, izz = vals
        ixy = ixz = iyz = 0.0
    elif len(vals) == 6:
        ixx, iyy, izz, ixy, ixz, iyz = vals
    else:
        raise ModelError(f"line {lineno}: 'inertia' expects 3 or 6 numbers")
    return np.array([[ixx, ixy, ixz], [ixy, iyy, iyz], [ixz, iyz, izz]])


def parse_model(text):
    """Parse an ``rbdmodel v1`` document into raw blocks, then build the model."""
    lines = text.splitlines()
    if not lines or lines[0].strip() != "rbdmodel v1":
        raise ModelError("line 1: missing header 'rbdmodel v1'")

    name = "unnamed"
    gravity = np.array([0.0, 0.0, -9.81])
    link_blocks = []     # (name, dict, lineno)
    joint_blocks = []
    foot_blocks = []
    block = None         # (kind, name, dict, lineno)

    def close_block():
        if block is None:
            return
        kind, bname, props, lineno = block
        {"link": link_blocks, "joint": joint_blocks, "foot": foot_blocks}[kind].append(
            (bname, props, lineno))

    for lineno, raw in enumerate(lines[1:], start=2):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        indented = line[0] in (" ", "\t")
        tokens = line.split()
        key, rest = tokens[0], tokens[1:]
        if not indented and key in ("link", "joint", "foot"):
            if len(rest) != 1:
                raise ModelError(f"line {lineno}: '{key}' needs exactly one name")
            close_block()
            block = (key, rest[0], {}, lineno)
        elif key == "name":
            name = " ".join(rest)
        elif key == "gravity":
            gravity = np.array(_floats(rest, 3, lineno, "gravity"))
        elif block is not None:
            block[2][key] = (rest, lineno)
        else:
            raise ModelError(f"line {lineno}: unexpected '{key}' outside any block")
    close_block()

    return _build_model(name, gravity, link_blocks, joint_blocks, foot_blocks)


def _build_model(name, gravity, link_blocks, joint_blocks, foot_blocks):
    links = []
    index = {}
    for bname, props, lineno in link_blocks:
        if bname in index:
            raise ModelError(f"line {lineno}: duplicate link '{bname}'")
        try:
            mass = _floats(props["mass"][0], 1, props["mass"][1], "mass")[0]
            com = np.array(_floats(props["com"][0], 3, props["com"][1], "com"))
            inertia = _inertia_matrix(
                [float(t) for t in props["inertia"][0]], props["inertia"][1])
        except KeyError as e:
            raise ModelError(f"line {lineno}: link '{bname}' missing field {e}") from None
        index[bname] = len(links)
        links.append(Link(bname, mass, com, inertia))

    floating = []
    joints = []
    for bname, props, lineno in joint_blocks:
        jtype = props.get("type", ((), lineno))[0]
        jtype = jtype[0] if jtype else ""
        if jtype == "floating":
            child = props.get("child", ((), lineno))[0]
            if not child or child[0] not in index:
                raise ModelError(f"line {lineno}: floating joint needs a known 'child' link")
            floating.append(index[child[0]])
            continue
        if jtype != "revolute":
            raise ModelError(f"line {lineno}: joint '{bname}': type must be floating|revolute")
        try:
            parent = props["parent"][0][0]
            child = props["child"][0][0]
            axis = np.array(_floats(props["axis"][0], 3, props["axis"][1], "axis"))
            origin = np.array(_floats(props["origin"][0], 3, props["origin"][1], "origin"))
        except (KeyError, IndexError):
            raise ModelError(
                f"line {lineno}: joint '{bname}' needs parent/child/axis/origin") from None
        if parent not in index or child not in index:
            raise ModelError(f"line {lineno}: joint '{bname}': unknown parent/child link")
        rpy = np.zeros(3)
        if "rpy" in props:
            rpy = np.array(_floats(props["rpy"][0], 3, props["rpy"][1], "rpy"))
        lims = props.get("pos_limits")
        pos_lo, pos_hi = (_floats(lims[0], 2, lims[1], "pos_limits")
                          if lims else (-np.pi, np.pi))
        vel = props.get("vel_limit")
        vel_limit = _floats(vel[0], 1, vel[1], "vel_limit")[0] if vel else 20.0
        tq = props.get("torque_limit")
        torque_limit = _floats(tq[0], 1, tq[1], "torque_limit")[0] if tq else 100.0
        norm = np.linalg.norm(axis)
        if norm < 1e-9:
            raise ModelError(f"line {lineno}: joint '{bname}': zero axis")
        joints.append(Joint(bname, index[parent], index[child], axis / norm,
                            origin, rpy, pos_lo, pos_hi, vel_limit, torque_limit))

    feet = {}
    for bname, props, lineno in foot_blocks:
        if bname not in ("left", "right"):
            raise ModelError(f"line {lineno}: foot name must be left|right, got '{bname}'")
        try:
            link = props["link"][0][0]
            offset = np.array(_floats(props["offset"][0], 3, props["offset"][1], "offset"))
            hl = _floats(props["half_length"][0], 1, props["half_length"][1], "half_length")[0]
            hw = _floats(props["half_width"][0], 1, props["half_width"][1], "half_width")[0]
            mu = _floats(props["friction"][0], 1, props["friction"][1], "friction")[0]
        except (KeyError, IndexError):
            raise ModelError(f"line {lineno}: foot '{bname}' incomplete") from None
        if link not in index:
            raise ModelError(f"line {lineno}: foot '{bname}': unknown link '{link}'")
        feet[bname] = Foot(bname, index[link], offset, hl, hw, mu)

    model = RobotModel(name, gravity, links, joints, feet)
    _validate(model, floating)
    model._finalize()
    return model


def _validate(model, floating):
    if len(floating) != 1:
        raise ModelError(f"model must have exactly one floating-base joint, found {len(floating)}")
    if floating[0] != 0:
        raise ModelError("the floating base must attach to the first link")
    for l in model.links:
        if l.mass <= 0:
            raise ModelError(f"link '{l.name}': mass must be > 0, got {l.mass}")
        if not np.allclose(l.inertia, l.inertia.T, atol=1e-12):
            raise ModelError(f"link '{l.name}': inertia must be symmetric")
        if np.min(np.linalg.eigvalsh(l.inertia)) <= 0:
            raise ModelError(f"link '{l.name}': inertia must be positive definite")
    if model.feet and set(model.feet) != {"left", "right"}:
        raise ModelError("feet must be exactly {left, right} (or none for a bare body)")
    # tree check: every non-root link reached by exactly one joint
    seen = {0}
    for j in model.joints:
        if j.child in seen:
            raise ModelError(f"joint '{j.name}': link used as child twice (not a tree)")
        seen.add(j.child)
    if len(seen) != len(model.links):
        missing = [l.name for i, l in enumerate(model.links) if i not in seen]
        raise ModelError(f"links not connected to the tree: {missing}")
    for j in model.joints:
        if j.pos_lo >= j.pos_hi:
            raise ModelError(f"joint '{j.name}': empty position range")
        if j.vel_limit <= 0 or j.torque_limit <= 0:
            raise ModelError(f"joint '{j.name}': limits must be positive")


def load_model(path):
    """Load and validate an ``rbdmodel v1`` file."""
    with open(path, "r", encoding="utf-8") as fh:
        return parse_model(fh.read())
