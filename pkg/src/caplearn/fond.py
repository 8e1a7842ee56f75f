"""Strong-solution planner for grounded FOND problems.

Depth-first AND/OR search with iterative deepening on policy depth:
OR nodes pick an action, AND nodes require every nondeterministic outcome
to be solved. A strong solution is an acyclic policy all of whose branches
reach the goal.
"""
from __future__ import annotations

from dataclasses import dataclass

from .ground import apply_outcome
from .ppddl import Formula, holds


class Unsolvable(Exception):
    pass


class BudgetExceeded(Exception):
    pass


@dataclass(frozen=True)
class FondOutcome:
    add: frozenset = frozenset()
    delete: frozenset = frozenset()
    conditionals: tuple = ()  # of (Formula, add frozenset, delete frozenset)


@dataclass(frozen=True)
class FondAction:
    name: str
    args: tuple
    precondition: Formula
    outcomes: tuple  # of FondOutcome

    @property
    def key(self):
        return (self.name,) + self.args


class _CachedActions:
    """Caches a (possibly lazy) action stream so it can be re-iterated."""

    def __init__(self, source):
        self._gen = iter(source() if callable(source) else source)
        self._cache = []
        self._done = False

    def __iter__(self):
        i = 0
        while True:
            if i < len(self._cache):
                yield self._cache[i]
            elif self._done:
                return
            else:
                try:
                    item = next(self._gen)
                except StopIteration:
                    self._done = True
                    return
                self._cache.append(item)
                yield item
            i += 1


@dataclass
class FondProblem:
    initial: frozenset
    goal: object  # Formula, or a callable state -> bool
    actions: object  # iterable of FondAction, or zero-arg callable yielding them

    def __post_init__(self):
        self._actions = _CachedActions(self.actions)
        self._goal_fn = self.goal if callable(self.goal) else None

    def iter_actions(self):
        return iter(self._actions)

    def goal_holds(self, state) -> bool:
        if self._goal_fn is not None:
            return self._goal_fn(state)
        return holds(state, self.goal)


@dataclass
class StrongPolicy:
    mapping: dict  # state -> FondAction
    depth: int  # longest branch from the initial state

    def __len__(self):
        return len(self.mapping)


def _successors(state, action: FondAction):
    return [apply_outcome(state, o) for o in action.outcomes]


# Failure sentinels for the depth-bounded search (successes are depths >= 0).
_FAIL_CUT = -1    # failure may be an artifact of the depth bound or the path
_FAIL_CLEAN = -2  # no strong policy from this state at any bound


def solve_strong(problem: FondProblem, node_budget: int = 10**6,
                 max_depth: int = 128) -> StrongPolicy:
    """Finds a strong (acyclic, goal-guaranteeing) policy.

    Raises Unsolvable when the exhaustive search proves none exists,
    BudgetExceeded when node_budget expansions (or max_depth) ran out first.

    Soundness of the memo: solved[s] = (a, d) is only recorded once every
    successor of (s, a) is a goal state or is itself recorded with depth < d,
    and overwrites only ever shrink d, so extraction always terminates in
    goal states along strictly decreasing depths.
    """
    budget = [node_budget]
    solved: dict = {}
    states_seen: set = set()

    def search(state, bound: int, onpath: frozenset) -> int:
        if problem.goal_holds(state):
            return 0
        hit = solved.get(state)
        if hit is not None and hit[1] <= bound:
            return hit[1]
        if state in onpath:
            return _FAIL_CUT
        if bound == 0:
            return _FAIL_CUT
        if budget[0] <= 0:
            raise BudgetExceeded(f"node budget exhausted ({node_budget})")
        budget[0] -= 1
        states_seen.add(state)
        newpath = onpath | {state}
        any_cut = False
        for action in problem.iter_actions():
            if not holds(state, action.precondition):
                continue
            succs = _successors(state, action)
            if any(s == state for s in succs):
                continue  # a self-loop branch can never be part of an acyclic policy
            worst = 0
            ok = True
            for succ in succs:
                r = search(succ, bound - 1, newpath)
                if r < 0:
                    ok = False
                    if r == _FAIL_CUT:
                        any_cut = True
                    break
                worst = max(worst, r)
            if ok:
                depth = worst + 1
                prev = solved.get(state)
                if prev is None or depth < prev[1]:
                    solved[state] = (action, depth)
                return depth
        return _FAIL_CUT if any_cut else _FAIL_CLEAN

    bound = 0
    while True:
        states_seen.clear()
        result = search(problem.initial, bound, frozenset())
        if result >= 0:
            return _extract(problem, solved)
        if result == _FAIL_CLEAN:
            raise Unsolvable("no strong solution exists")
        bound += 1
        if bound > len(states_seen) + 1:
            # an acyclic policy's depth is bounded by the number of states
            raise Unsolvable("no strong solution within the reachable state bound")
        if bound > max_depth:
            raise BudgetExceeded(f"max depth {max_depth} exceeded")


def _extract(problem: FondProblem, solved: dict) -> StrongPolicy:
    mapping = {}
    memo = {}

    def walk(state) -> int:
        if problem.goal_holds(state):
            return 0
        if state in memo:
            return memo[state]
        action = solved[state][0]
        mapping[state] = action
        longest = 1 + max(walk(s) for s in _successors(state, action))
        memo[state] = longest
        return longest

    return StrongPolicy(mapping, walk(problem.initial))


def verify_strong(problem: FondProblem, policy: StrongPolicy,
                  max_nodes: int = 10**6) -> bool:
    """Exhaustively expands every outcome branch from the initial state:
    true iff each branch reaches the goal without revisiting a state along
    its own path and without leaving the policy's domain."""
    budget = [max_nodes]

    def walk(state, onpath) -> bool:
        if problem.goal_holds(state):
            return True
        if state in onpath:
            return False
        if budget[0] <= 0:
            return False
        budget[0] -= 1
        action = policy.mapping.get(state)
        if action is None or not holds(state, action.precondition):
            return False
        newpath = onpath | {state}
        return all(walk(s, newpath) for s in _successors(state, action))

    return walk(problem.initial, frozenset())


def policy_depth(problem: FondProblem, policy: StrongPolicy) -> int:
    """Longest branch length over all outcome expansions of the policy."""
    memo = {}

    def walk(state) -> int:
        if problem.goal_holds(state) or state not in policy.mapping:
            return 0
        if state in memo:
            return memo[state]
        action = policy.mapping[state]
        memo[state] = 0
        depth = 1 + max(walk(s) for s in _successors(state, action))
        memo[state] = depth
        return depth

    return walk(problem.initial)


def policy_to_dot(problem: FondProblem, policy: StrongPolicy) -> str:
    """DOT dump of the policy's reachable AND/OR graph (debugging aid)."""
    lines = ["digraph policy {"]
    seen = {}

    def node_id(state):
        return seen.setdefault(state, f"s{len(seen)}")

    def walk(state):
        known = state in seen
        nid = node_id(state)
        if known:
            return
        label = "goal" if problem.goal_holds(state) else ",".join(
            sorted("(" + " ".join(a) + ")" for a in state)
        )
        lines.append(f'  {nid} [label="{label}"];')
        action = policy.mapping.get(state)
        if action is None:
            return
        for succ in _successors(state, action):
            walk(succ)
            lines.append(f'  {nid} -> {node_id(succ)} [label="{action.name}"];')

    walk(problem.initial)
    lines.append("}")
    return "\n".join(lines)
