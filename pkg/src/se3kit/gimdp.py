"""Tabular group-invariant MDPs: value iteration on symmetric gridworlds with
executable checks of Q-invariance and argmax-set policy equivariance.

An MDP is invariant under a finite permutation group acting jointly on states
and actions when R(s,a) = R(gs, ga) and P(s'|s,a) = P(gs'|gs, ga); the optimal
Q function is then invariant and the optimal policy equivariant at the level
of argmax sets (ties are compared as sets, never through a tie-broken pick).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch


@dataclass(frozen=True)
class TabularMdp:
    transition: np.ndarray   # (S, A, S), rows sum to one
    reward: np.ndarray       # (S, A)
    gamma: float

    def __post_init__(self):
        p = np.asarray(self.transition, dtype=float)
        r = np.asarray(self.reward, dtype=float)
        if p.ndim != 3 or p.shape[0] != p.shape[2] or r.shape != p.shape[:2]:
            raise DimensionMismatch("transition must be (S, A, S) with (S, A) rewards")
        if np.abs(p.sum(axis=2) - 1.0).max() > 1e-12:
            raise DimensionMismatch("transition rows must sum to one")
        if not (0.0 < self.gamma < 1.0):
            raise DimensionMismatch("gamma must lie in (0, 1)")
        if not np.isfinite(r).all():
            raise DimensionMismatch("rewards must be finite")
        object.__setattr__(self, "transition", p)
        object.__setattr__(self, "reward", r)

    @property
    def n_states(self) -> int:
        return self.transition.shape[0]

    @property
    def n_actions(self) -> int:
        return self.transition.shape[1]


@dataclass(frozen=True)
class GroupAction:
    """Permutation action of a finite group: one state permutation and one
    action permutation per element; closure and identity are verified."""

    state_perms: np.ndarray   # (G, S) int
    action_perms: np.ndarray  # (G, A) int

    def __post_init__(self):
        sp = np.asarray(self.state_perms, dtype=int)
        ap = np.asarray(self.action_perms, dtype=int)
        if sp.ndim != 2 or ap.ndim != 2 or sp.shape[0] != ap.shape[0]:
            raise DimensionMismatch("need matching (G, S) and (G, A) permutations")
        object.__setattr__(self, "state_perms", sp)
        object.__setattr__(self, "action_perms", ap)
        table = {tuple(s) + tuple(a) for s, a in zip(sp, ap)}
        n_s = sp.shape[1]
        if tuple(range(n_s)) + tuple(range(ap.shape[1])) not in table:
            raise DimensionMismatch("group action must contain the identity")
        for i in range(sp.shape[0]):
            for j in range(sp.shape[0]):
                comp = tuple(sp[i][sp[j]]) + tuple(ap[i][ap[j]])
                if comp not in table:
                    raise DimensionMismatch("permutations are not closed under composition")

    @property
    def size(self) -> int:
        return self.state_perms.shape[0]


def verify_invariant_mdp(mdp: TabularMdp, action: GroupAction) -> dict:
    """Max violation of reward and transition invariance per group element;
    booleans use exact-zero thresholds at float precision (1e-12)."""
    if action.state_perms.shape[1] != mdp.n_states or \
            action.action_perms.shape[1] != mdp.n_actions:
        raise DimensionMismatch("group action shape does not match the MDP")
    reward_violation = 0.0
    transition_violation = 0.0
    for gs, ga in zip(action.state_perms, action.action_perms):
        reward_violation = max(reward_violation,
                               float(np.abs(mdp.reward - mdp.reward[np.ix_(gs, ga)]).max()))
        permuted = mdp.transition[np.ix_(gs, ga, gs)]
        transition_violation = max(transition_violation,
                                   float(np.abs(mdp.transition - permuted).max()))
    return {
        "reward_invariant": reward_violation <= 1e-12,
        "transition_invariant": transition_violation <= 1e-12,
        "max_reward_violation": reward_violation,
        "max_transition_violation": transition_violation,
    }


def value_iteration(mdp: TabularMdp, tol: float = 1e-10,
                    max_sweeps: int = 100000) -> tuple[np.ndarray, np.ndarray]:
    """Iterate Q <- R + gamma P max_a' Q until the Bellman residual
    |TQ - Q|_inf < tol; returns (Q, greedy policy)."""
    q = np.zeros((mdp.n_states, mdp.n_actions))
    for _ in range(max_sweeps):
        v = q.max(axis=1)
        tq = mdp.reward + mdp.gamma * mdp.transition @ v
        residual = np.abs(tq - q).max()
        q = tq
        if residual < tol:
            return q, q.argmax(axis=1)
    raise RuntimeError("value iteration did not converge")


def argmax_sets(q: np.ndarray, tie_tol: float = 1e-9) -> list[frozenset]:
    """Per-state set of optimal actions (within tie_tol of the max)."""
    out = []
    for row in q:
        out.append(frozenset(np.flatnonzero(row >= row.max() - tie_tol).tolist()))
    return out


def check_symmetry_theorems(mdp: TabularMdp, action: GroupAction,
                            q: np.ndarray, tol: float = 1e-10) -> dict:
    """Q-invariance gap against the 2 tol / (1 - gamma) bound and exact
    argmax-set equivariance of the greedy policy."""
    bound = 2.0 * tol / (1.0 - mdp.gamma)
    gap = 0.0
    sets = argmax_sets(q)
    equivariant = True
    for gs, ga in zip(action.state_perms, action.action_perms):
        gap = max(gap, float(np.abs(q - q[np.ix_(gs, ga)]).max()))
        for s in range(mdp.n_states):
            mapped = frozenset(int(ga[a]) for a in sets[s])
            if mapped != sets[gs[s]]:
                equivariant = False
    return {
        "q_invariance_gap": gap,
        "q_gap_bound": bound,
        "q_invariant": gap <= bound,
        "argmax_sets_equivariant": equivariant,
    }


# ---------------------------------------------------------------------------
# stock instance: C4-symmetric gridworld
# ---------------------------------------------------------------------------

def c4_gridworld(size: int = 5, gamma: float = 0.95,
                 slip: float = 0.1) -> tuple[TabularMdp, GroupAction]:
    """size x size grid (odd size), four move actions (up, right, down,
    left), reward 1 on the center cell, lateral slip with probability
    ``slip`` per side.  The quarter-turn rotation about the center permutes
    states and cycles the actions, and invariance holds exactly by
    construction."""
    if size % 2 != 1:
        raise DimensionMismatch("need an odd grid size so the center is fixed")
    n = size * size

    def idx(row, col):
        return row * size + col

    # action displacements in (row, col); order up, right, down, left
    moves = ((-1, 0), (0, 1), (1, 0), (0, -1))
    p = np.zeros((n, 4, n))
    r = np.zeros((n, 4))
    center = idx(size // 2, size // 2)
    for row in range(size):
        for col in range(size):
            s = idx(row, col)
            r[s, :] = 1.0 if s == center else 0.0
            for a in range(4):
                for da, prob in ((0, 1.0 - 2.0 * slip), (1, slip), (-1, slip)):
                    dr, dc = moves[(a + da) % 4]
                    nr = min(max(row + dr, 0), size - 1)
                    nc = min(max(col + dc, 0), size - 1)
                    p[s, a, idx(nr, nc)] += prob
    mdp = TabularMdp(p, r, gamma)

    # quarter-turn counterclockwise: (row, col) -> (size-1-col, row)
    state_rot = np.empty(n, dtype=int)
    for row in range(size):
        for col in range(size):
            state_rot[idx(size - 1 - col, row)] = idx(row, col)
    # displacement (dr, dc) maps to (dc, -dr) under the state relabeling:
    # up -> right -> down -> left
    action_rot = np.array([1, 2, 3, 0])
    state_perms = [np.arange(n)]
    action_perms = [np.arange(4)]
    sp, ap = np.arange(n), np.arange(4)
    for _ in range(3):
        sp = state_rot[sp]
        ap = action_rot[ap]
        state_perms.append(sp.copy())
        action_perms.append(ap.copy())
    return mdp, GroupAction(np.array(state_perms), np.array(action_perms))


def identity_group(mdp: TabularMdp) -> GroupAction:
    return GroupAction(np.arange(mdp.n_states)[None, :],
                       np.arange(mdp.n_actions)[None, :])


def mdp_demo_report(gamma: float = 0.95, tol: float = 1e-10,
                    size: int = 5) -> dict:
    """Build the stock gridworld, solve it, and run both symmetry checks."""
    mdp, action = c4_gridworld(size=size, gamma=gamma)
    inv = verify_invariant_mdp(mdp, action)
    q, policy = value_iteration(mdp, tol)
    sym = check_symmetry_theorems(mdp, action, q, tol)
    ties = [len(s) for s in argmax_sets(q)]
    return {
        "grid_size": size,
        "gamma": gamma,
        "tol": tol,
        "invariance": inv,
        "symmetry": sym,
        "n_tied_states": int(sum(1 for k in ties if k > 1)),
        "value_at_center": float(q.max(axis=1)[(size * size) // 2]),
    }
