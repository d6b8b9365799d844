"""Mass matrix, nonlinear effects and composite inertia.

Internally uses Featherstone spatial algebra with motion vectors stacked
``[angular, linear]`` in link coordinates; the public generalized-coordinate
ordering is ``[linear, angular, joints]`` in the base frame, converted at the
boundary via an index swap.
"""

import numpy as np

from .so3 import skew, rotvec_to_rot, quat_to_rot

_SWAP = np.array([3, 4, 5, 0, 1, 2])  # spatial <-> generalized base ordering


def _crm(v):
    """Spatial cross product (motion): crm(v) @ m = v x m."""
    w, u = v[0:3], v[3:6]
    out = np.zeros((6, 6))
    out[0:3, 0:3] = skew(w)
    out[3:6, 3:6] = skew(w)
    out[3:6, 0:3] = skew(u)
    return out


def _crf(v):
    return -_crm(v).T


def _spatial_inertia(link):
    """6x6 spatial inertia about the link frame origin."""
    C = skew(link.com)
    I = np.zeros((6, 6))
    I[0:3, 0:3] = link.inertia + link.mass * C @ C.T
    I[0:3, 3:6] = link.mass * C
    I[3:6, 0:3] = link.mass * C.T
    I[3:6, 3:6] = link.mass * np.eye(3)
    return I


def _xmat(E, r):
    """Spatial motion transform A->B for frame B at r (A coords) with x_B = E x_A."""
    X = np.zeros((6, 6))
    X[0:3, 0:3] = E
    X[3:6, 3:6] = E
    X[3:6, 0:3] = -E @ skew(r)
    return X


class _TreeWorkspace:
    """Joint transforms and motion subspaces at a given configuration."""

    def __init__(self, model, q):
        from .kinematics import _joint_rot
        self.model = model
        n = len(model.links)
        self.Xup = [None] * n          # parent coords -> link coords
        self.S = [None] * n            # motion subspace in link coords
        for j, jnt in enumerate(model.joints):
            E = _joint_rot(jnt, q.joints[j]).T
            self.Xup[jnt.child] = _xmat(E, jnt.origin)
            S = np.zeros(6)
            S[0:3] = jnt.axis
            self.S[jnt.child] = S
        self.order = _topo_order(model)


def _topo_order(model):
    order = []
    stack = [model.root]
    while stack:
        l = stack.pop()
        order.append(l)
        stack.extend(model.children[l])
    return order


def mass_matrix(model, q):
    """Composite-rigid-body algorithm; symmetric positive definite."""
    ws = _TreeWorkspace(model, q)
    n = len(model.links)
    Ic = [_spatial_inertia(model.links[l]) for l in range(n)]
    for l in reversed(ws.order):
        p = model.parent_link[l]
        if p >= 0:
            Ic[p] = Ic[p] + ws.Xup[l].T @ Ic[l] @ ws.Xup[l]

    nv = model.nv
    M = np.zeros((nv, nv))
    for l in range(n):
        if l == model.root:
            continue
        j = model.link_joint[l]
        F = Ic[l] @ ws.S[l]
        M[6 + j, 6 + j] = ws.S[l] @ F
        b = l
        while model.parent_link[b] != model.root:
            F = ws.Xup[b].T @ F
            b = model.parent_link[b]
            jb = model.link_joint[b]
            M[6 + jb, 6 + j] = ws.S[b] @ F
            M[6 + j, 6 + jb] = M[6 + jb, 6 + j]
        F = ws.Xup[b].T @ F  # into base coords
        M[0:6, 6 + j] = F[_SWAP]
        M[6 + j, 0:6] = F[_SWAP]
    M[np.ix_(range(6), range(6))] = Ic[model.root][np.ix_(_SWAP, _SWAP)]
    return M


def nonlinear_effects(model, q, v):
    """Coriolis-centrifugal plus gravity generalized forces (RNEA, zero accel)."""
    ws = _TreeWorkspace(model, q)
    n = len(model.links)
    R_wb = quat_to_rot(q.base_quat)
    a_grav = np.zeros(6)
    a_grav[3:6] = R_wb.T @ model.gravity      # world gravity in base coords

    vel = [None] * n
    acc = [None] * n
    f = [None] * n
    v0 = np.empty(6)
    v0[0:3] = v[3:6]
    v0[3:6] = v[0:3]
    for l in ws.order:
        if l == model.root:
            vel[l] = v0
            acc[l] = -a_grav
        else:
            j = model.link_joint[l]
            vJ = ws.S[l] * v[6 + j]
            vel[l] = ws.Xup[l] @ vel[model.parent_link[l]] + vJ
            acc[l] = ws.Xup[l] @ acc[model.parent_link[l]] + _crm(vel[l]) @ vJ
        I = _spatial_inertia(model.links[l])
        f[l] = I @ acc[l] + _crf(vel[l]) @ I @ vel[l]

    out = np.zeros(model.nv)
    for l in reversed(ws.order):
        if l == model.root:
            out[0:6] = f[l][_SWAP]
        else:
            out[6 + model.link_joint[l]] = ws.S[l] @ f[l]
            f[model.parent_link[l]] += ws.Xup[l].T @ f[l]
    return out


def com_and_locked_inertia(model, q, data=None):
    """Total mass, base-frame CoM, composite rotational inertia about the base origin."""
    from .kinematics import forward_kinematics
    if data is None:
        data = forward_kinematics(model, q)
    m_total = 0.0
    p_c = np.zeros(3)
    I = np.zeros((3, 3))
    for l, link in enumerate(model.links):
        R, p = data.R_bl[l], data.p_bl[l]
        c = p + R @ link.com
        m_total += link.mass
        p_c += link.mass * c
        Ic = R @ link.inertia @ R.T
        I += Ic + link.mass * ((c @ c) * np.eye(3) - np.outer(c, c))
    p_c /= m_total
    return p_c, I, m_total


def potential_energy(model, q, data=None):
    """Gravitational potential; the FD gradient cross-checks nonlinear_effects."""
    from .kinematics import forward_kinematics
    if data is None:
        data = forward_kinematics(model, q)
    R_wb = quat_to_rot(q.base_quat)
    V = 0.0
    for l, link in enumerate(model.links):
        c_w = q.base_pos + R_wb @ (data.p_bl[l] + data.R_bl[l] @ link.com)
        V -= link.mass * (model.gravity @ c_w)
    return V


def kinetic_energy(model, q, v):
    return 0.5 * v @ (mass_matrix(model, q) @ v)
