"""Assembly of the staged two-phase nonlinear program."""

from dataclasses import dataclass, field

import numpy as np

from ..gait import build_schedule
from .types import freeze_terms, SIDES
from .stages import WbDynamics, WbStageNode, TransitionNode, SrbStageNode
from .references import build_references


@dataclass
class MultiPhaseNlp:
    """Immutable staged problem: near stages, handover node, far stages,
    terminal node. Node k owns the dynamics equality to node k+1."""

    model: object
    config: object
    ft: object
    nodes: list
    x_init: np.ndarray

    @property
    def n_nodes(self):
        return len(self.nodes)

    def dims(self):
        return [(n.nx, n.nu) for n in self.nodes]

    def decision_variable_count(self):
        return sum(n.nx + n.nu for n in self.nodes)

    def cost(self, traj):
        """Objective including the soft contact-kinematics penalties."""
        from .stages import soft_violation_cost
        total = 0.0
        for node, (x, u) in zip(self.nodes, traj):
            total += node.cost(x, u)
            soft = node.soft_constraints(x, u)
            if soft.vals.size:
                total += soft_violation_cost(soft, node.w.soft_penalty)
        return total

    def dynamics_defects(self, traj):
        out = []
        for k in range(self.n_nodes - 1):
            x, u = traj[k]
            out.append(self.nodes[k].dynamics(x, u) - traj[k + 1][0])
        return out

    def constraint_violation(self, traj):
        """Max violation over hard rows and initial/dynamics equalities."""
        worst = float(np.abs(traj[0][0] - self.x_init).max())
        for d in self.dynamics_defects(traj):
            worst = max(worst, float(np.abs(d).max()))
        for node, (x, u) in zip(self.nodes, traj):
            hard = node.constraints(x, u)
            if hard.vals.size:
                viol = np.maximum(hard.lo - hard.vals, 0.0)
                viol = np.maximum(viol, hard.vals - hard.up)
                worst = max(worst, float(viol.max(initial=0.0)))
        return worst


def assemble_nlp(model, q0, v0, config, schedule, refs, weights, bounds,
                 ft=None):
    """Build the staged NLP at the measured state (q0, v0).

    ``schedule`` must cover the n_wb + n_srb + 2 horizon nodes produced by
    ``HorizonConfig.node_times`` (the handover node and the first far stage
    share the schedule entry at the handover time).
    """
    n_nodes_needed = config.n_wb + 1 + config.n_srb + 1
    n_sched = config.n_wb + 1 + config.n_srb
    if len(schedule) < n_sched:
        raise ValueError(f"schedule covers {len(schedule)} nodes, need {n_sched}")
    if len(refs.wb) != config.n_wb + 1 or len(refs.srb) != config.n_srb + 1:
        raise ValueError("reference set does not match the horizon")

    if ft is None:
        ft = freeze_terms(model, q0, v0)
    dyn = WbDynamics(model, ft, config.dt_wb)

    nodes = []
    for k in range(config.n_wb):
        nodes.append(WbStageNode(model, ft, dyn, schedule[k], refs.wb[k],
                                 weights, bounds, is_first=(k == 0)))
    nodes.append(TransitionNode(model, ft, schedule[config.n_wb], refs.wb[config.n_wb],
                                weights, bounds, has_successor=config.n_srb > 0))
    for j in range(config.n_srb):
        nodes.append(SrbStageNode(model, ft, schedule[config.n_wb + j], refs.srb[j],
                                  weights, bounds, config.dt_srb))
    if config.n_srb > 0:
        nodes.append(SrbStageNode(model, ft, schedule[config.n_wb + config.n_srb],
                                  refs.srb[config.n_srb], weights, bounds,
                                  config.dt_srb, terminal=True))

    x_init = np.concatenate([np.zeros(model.nv), v0])
    return MultiPhaseNlp(model=model, config=config, ft=ft, nodes=nodes, x_init=x_init)


def build_walking_nlp(model, q0, v0, params, config, weights, bounds, t0,
                      schedule_fn=build_schedule):
    """Convenience wrapper: schedule + references + assembly at time t0."""
    times = config.node_times()
    unique = times[:config.n_wb + 1] + times[config.n_wb + 2:]
    schedule = schedule_fn(params, t0, unique)
    refs = build_references(model, params, q0, schedule, config, weights)
    return assemble_nlp(model, q0, v0, config, schedule, refs, weights, bounds)
