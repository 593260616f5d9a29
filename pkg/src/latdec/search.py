"""Tree search engine for upper-triangular integer least-squares problems.

One generic branch-and-bound loop covers every decoder here; a decoder is
a SearchPolicy bundle of:

  * a sort rule for the ACTIVE list ("lifo" depth-first, "fifo" breadth-
    first, "cost" best-first, "level-cost" breadth-first by level);
  * a child generation order ("se" zigzag around the unconstrained
    minimizer, "vb" ascending from the low end of the admissible interval);
  * a bounding vector t (per level, +inf allowed) with a strict or
    non-strict validity comparison;
  * tightening rules: g1 shrinks the bound when a leaf is reached
    ("min"), g2 implements the per-level pruning of the M- and
    T-algorithms;
  * a bias b used by the best-first cost f = path_metric - b * level.

The iterative, memory-free variant of the best-first search (the Fano
decoder) is implemented separately in fano_decode; it revisits nodes as
its threshold moves in multiples of the step size.

Complexity is counted in node generations: the root counts as one, and the
counter increments once per child placed in ACTIVE.  For the Fano decoder
node_generations counts every look-forward evaluation (revisits included)
while unique_nodes counts distinct labels.
"""

import heapq
import math
from collections import deque
from dataclasses import dataclass, replace

from .errors import EmptySearchSpace
from .preprocess import TreeProblem, node_metric  # canonical metric helpers

INF = math.inf

DEFAULT_NODE_BUDGET = 10**6


# ---------------------------------------------------------------------------
# child generation


def _nearest_int(c):
    # nearest integer, half-way ties rounded up
    return math.floor(c + 0.5)


def _se_coord(a, delta, rank):
    if rank == 0:
        return a
    t = (rank + 1) // 2
    return a + t * delta if rank % 2 == 1 else a - t * delta


def _boxed_se_order(c, q):
    """All of {0..q-1} ordered by the zigzag rule around c."""
    a = _nearest_int(c)
    if a < 0:
        return list(range(q))
    if a >= q:
        return list(range(q - 1, -1, -1))
    delta = 1 if (c - a) >= 0 else -1
    out = []
    rank = 0
    while len(out) < q:
        x = _se_coord(a, delta, rank)
        rank += 1
        if 0 <= x < q:
            out.append(x)
    return out


class _Node:
    __slots__ = ("label", "level", "g", "resid", "diag", "gen_kind", "gen_state",
                 "f", "seq", "dead", "version")

    def __init__(self, label, level, g):
        self.label = label
        self.level = level
        self.g = g
        self.resid = None
        self.diag = None
        self.gen_kind = None
        self.gen_state = None
        self.f = g
        self.seq = 0
        self.dead = False
        self.version = 0


def _child_residual(problem, node):
    """Residual and diagonal of the child level; cached on the node."""
    if node.resid is None:
        row = problem.lev_rows[node.level]
        s = problem.lev_y[node.level]
        label = node.label
        for j in range(node.level):
            s -= row[j] * label[j]
        node.resid = s
        node.diag = row[node.level]
    return node.resid, node.diag


def _init_gen(problem, node, gen, budget):
    resid, diag = _child_residual(problem, node)
    q = problem.boundary_q
    c = resid / diag
    if gen == "se":
        if q is None:
            a = _nearest_int(c)
            delta = 1 if (c - a) >= 0 else -1
            node.gen_kind = "se_free"
            node.gen_state = [a, delta, 0]        # a, delta, next rank
        else:
            node.gen_kind = "se_box"
            node.gen_state = [_boxed_se_order(c, q), 0]
    else:  # "vb"
        if budget == INF and q is None:
            raise ValueError("interval generation needs a finite bound or a box")
        if budget == INF:
            lo, hi = 0, q - 1
        else:
            rem = budget - node.g
            if rem < 0:
                lo, hi = 0, -1
            else:
                s = math.sqrt(rem)
                lo = math.ceil((resid - s) / diag)
                hi = math.floor((resid + s) / diag)
                if q is not None:
                    lo = max(lo, 0)
                    hi = min(hi, q - 1)
        node.gen_kind = "vb"
        node.gen_state = [lo, hi]


def _peek_child(problem, node, gen, budget, strict):
    """Next child (coord, w) without consuming it, or None when exhausted."""
    if node.gen_kind is None:
        _init_gen(problem, node, gen, budget)
    resid, diag = node.resid, node.diag
    rem = budget - node.g
    if node.gen_kind == "se_free":
        a, delta, rank = node.gen_state
        x = _se_coord(a, delta, rank)
        d = resid - diag * x
        w = d * d
        if (w >= rem) if strict else (w > rem):
            return None  # zigzag w is nondecreasing: no further child fits
        return x, w
    if node.gen_kind == "se_box":
        order, idx = node.gen_state
        if idx >= len(order):
            return None
        x = order[idx]
        d = resid - diag * x
        w = d * d
        if (w >= rem) if strict else (w > rem):
            return None  # ordered by w: nothing further fits either
        return x, w
    # vb: ascending coordinates, skipping any that no longer fit the bound
    lo, hi = node.gen_state
    x = lo
    while x <= hi:
        d = resid - diag * x
        w = d * d
        if (w < rem) if strict else (w <= rem):
            node.gen_state[0] = x
            return x, w
        x += 1
    node.gen_state[0] = x
    return None


def _consume_child(node):
    if node.gen_kind == "se_free":
        node.gen_state[2] += 1
    elif node.gen_kind == "se_box":
        node.gen_state[1] += 1
    else:
        node.gen_state[0] += 1


def child_interval(problem, parent_label, budget):
    """Admissible integer interval for the next label symbol.

    Returns (a0, a1) with a0 > a1 when the remaining budget is exhausted,
    or None when the budget is infinite (the interval is unbounded and the
    caller should use zigzag generation instead).  The interval is clipped
    to {0..Q-1} when the problem is constrained.
    """
    parent_label = tuple(parent_label)
    k = len(parent_label)
    if budget == INF:
        return None
    rem = budget - problem.path_metric(parent_label)
    if rem < 0:
        return (0, -1)
    row = problem.lev_rows[k]
    resid = problem.lev_y[k]
    for j in range(k):
        resid -= row[j] * parent_label[j]
    diag = row[k]
    s = math.sqrt(rem)
    a0 = math.ceil((resid - s) / diag)
    a1 = math.floor((resid + s) / diag)
    if problem.boundary_q is not None:
        a0 = max(a0, 0)
        a1 = min(a1, problem.boundary_q - 1)
    return (a0, a1)


def se_child_order(problem, parent_label, count=None):
    """Child coordinates of a node in nondecreasing metric order.

    Yields (coord, w) pairs following the zigzag rule; for unconstrained
    problems the stream is infinite unless `count` limits it.
    """
    parent_label = tuple(parent_label)
    node = _Node(parent_label, len(parent_label), 0.0)
    _init_gen(problem, node, "se", INF)
    q = problem.boundary_q
    limit = count if count is not None else (q if q is not None else None)
    emitted = 0
    while limit is None or emitted < limit:
        got = _peek_child(problem, node, "se", INF, True)
        if got is None:
            return
        _consume_child(node)
        emitted += 1
        yield got


# ---------------------------------------------------------------------------
# policies


@dataclass(frozen=True)
class SearchPolicy:
    """Parameter bundle consumed by gbb_run; see module docstring."""

    name: str
    sort: str                 # "lifo" | "fifo" | "cost" | "level-cost"
    gen: str                  # "se" | "vb"
    bound: object             # scalar or per-level sequence, +inf allowed
    g1: str = "none"          # "none" | "min"
    g2: str | None = None     # None | "m-alg" | "t-alg"
    g2_param: float | None = None
    bias: float = 0.0
    strict: bool = True       # validity test f < t (strict) vs f <= t
    first_leaf_exit: bool = False
    node_budget: int | None = DEFAULT_NODE_BUDGET


def policy_pohst(C0):
    """Breadth-first enumeration of every node with path metric <= C0."""
    return SearchPolicy("pohst", sort="fifo", gen="vb", bound=float(C0), strict=False)


def policy_ir(t):
    """Breadth-first search with fixed per-level bounds t_k (statistical pruning)."""
    return SearchPolicy("ir", sort="fifo", gen="vb", bound=tuple(float(v) for v in t))


def policy_ep(e):
    """Elliptical pruning: per-level weights e_k on the cumulative metric."""
    return SearchPolicy("ep", sort="fifo", gen="vb", bound=tuple(float(v) for v in e))


def policy_vb(C0):
    """Depth-first search, children low coordinate first, shrinking radius C0."""
    return SearchPolicy("vb", sort="lifo", gen="vb", bound=float(C0), g1="min")


def policy_se():
    """Depth-first zigzag search from an infinite radius; exact closest point."""
    return SearchPolicy("se", sort="lifo", gen="se", bound=INF, g1="min")


def policy_babai():
    """Single depth-first descent: successive rounding, first leaf wins."""
    return SearchPolicy("babai", sort="lifo", gen="se", bound=INF, g1="min",
                        first_leaf_exit=True)


def policy_stack(b=0.0):
    """Best-first search ordered by path_metric - b*level; b=0 is exact."""
    return SearchPolicy("stack", sort="cost", gen="se", bound=INF, g1="min",
                        bias=float(b))


def policy_m_algorithm(M):
    """Level-synchronous search keeping the M best nodes per level (needs a box)."""
    return SearchPolicy("m-alg", sort="level-cost", gen="vb", bound=INF,
                        g2="m-alg", g2_param=int(M), strict=False)


def policy_t_algorithm(T):
    """Level-synchronous search keeping nodes within T of the per-level best."""
    return SearchPolicy("t-alg", sort="level-cost", gen="vb", bound=INF,
                        g2="t-alg", g2_param=float(T), strict=False)


# ---------------------------------------------------------------------------
# outcomes


@dataclass
class SearchOutcome:
    decoded_label: tuple | None
    distance: float | None
    node_generations: int
    unique_nodes: int
    restarts: int = 0
    budget_hit: bool = False
    gen_per_level: list | None = None
    trace: list | None = None
    max_threshold: float | None = None  # Fano only: largest T reached


def trace_lines(trace):
    """Render a node trace in the documented text format:
    level <tab> label-csv <tab> path_metric <tab> cost <tab> bound."""
    out = []
    for level, label, g, f, bound in trace:
        lab = ",".join(str(v) for v in label)
        out.append(f"{level}\t{lab}\t{g:.12g}\t{f:.12g}\t{bound:.12g}")
    return out


def _bounds_vector(policy, m):
    b = policy.bound
    if isinstance(b, (tuple, list)):
        if len(b) != m:
            raise ValueError(f"bound vector length {len(b)} != problem dimension {m}")
        return [INF] + [float(v) for v in b]
    return [INF] + [float(b)] * m


def _babai_descent(problem):
    """Straight rounding descent; used as the fallback decision on budget hits."""
    label = []
    g = 0.0
    q = problem.boundary_q
    for k in range(problem.m):
        row = problem.lev_rows[k]
        resid = problem.lev_y[k]
        for j in range(k):
            resid -= row[j] * label[j]
        x = _nearest_int(resid / row[k])
        if q is not None:
            x = min(max(x, 0), q - 1)
        d = resid - row[k] * x
        g += d * d
        label.append(x)
    return tuple(label), g


# ---------------------------------------------------------------------------
# the generic engine


def gbb_run(problem: TreeProblem, policy: SearchPolicy, collect_trace=False):
    """Run the branch-and-bound loop under the given policy.

    The loop inspects the top of ACTIVE; a leaf updates the incumbent and
    the bound (rule g1) and is removed; an invalid node is removed; an
    exhausted node is removed; otherwise one more child is generated in
    the policy's order, the counter and rule g2 are applied, and the list
    is re-sorted.  Raises EmptySearchSpace when no leaf was found.
    """
    if policy.sort == "cost":
        return _run_best_first(problem, policy, collect_trace)
    if policy.sort == "level-cost":
        return _run_level_cost(problem, policy, collect_trace)
    if policy.sort in ("lifo", "fifo"):
        return _run_linear(problem, policy, collect_trace)
    raise ValueError(f"unknown sort rule {policy.sort!r}")


def _run_linear(problem, policy, collect_trace):
    m = problem.m
    t = _bounds_vector(policy, m)
    strict = policy.strict
    gen = policy.gen
    lifo = policy.sort == "lifo"
    g1_min = policy.g1 == "min"
    budget_cap = policy.node_budget
    root = _Node((), 0, 0.0)
    active = deque([root])
    top = (lambda: active[-1]) if lifo else (lambda: active[0])
    drop = active.pop if lifo else active.popleft
    n_c = 1
    gen_per_level = [0] * (m + 1)
    gen_per_level[0] = 1
    trace = [] if collect_trace else None
    best_label = None
    best_g = INF
    budget_hit = False

    while active:
        node = top()
        if node.level == m:
            if g1_min:
                f_leaf = node.g
                for i in range(1, m + 1):
                    if f_leaf < t[i]:
                        t[i] = f_leaf
            if node.g < best_g:
                best_g = node.g
                best_label = node.label
            drop()
            if policy.first_leaf_exit:
                break
            continue
        lvl = node.level
        if lvl > 0 and not ((node.g < t[lvl]) if strict else (node.g <= t[lvl])):
            drop()
            continue
        got = _peek_child(problem, node, gen, t[lvl + 1], strict)
        if got is None:
            drop()
            continue
        _consume_child(node)
        coord, w = got
        child = _Node(node.label + (coord,), lvl + 1, node.g + w)
        active.append(child)
        n_c += 1
        gen_per_level[child.level] += 1
        if collect_trace:
            trace.append((child.level, child.label, child.g, child.g, t[child.level]))
        if budget_cap is not None and n_c >= budget_cap:
            budget_hit = True
            break

    if budget_hit and best_label is None:
        best_label, best_g = _babai_descent(problem)
    if best_label is None:
        err = EmptySearchSpace(f"policy {policy.name}: no leaf within the bounds")
        err.node_generations = n_c
        raise err
    return SearchOutcome(decoded_label=best_label, distance=best_g,
                         node_generations=n_c, unique_nodes=n_c,
                         budget_hit=budget_hit, gen_per_level=gen_per_level,
                         trace=trace)


def _run_level_cost(problem, policy, collect_trace):
    m = problem.m
    t = _bounds_vector(policy, m)
    strict = policy.strict
    gen = policy.gen
    budget_cap = policy.node_budget
    root = _Node((), 0, 0.0)
    heap = [(0, 0.0, 0, root)]
    nodes_by_level = {0: [root]}
    seq = 1
    n_c = 1
    gen_per_level = [0] * (m + 1)
    gen_per_level[0] = 1
    deepest = 0
    trace = [] if collect_trace else None
    best_label = None
    best_g = INF
    budget_hit = False

    def tighten(level):
        peers = [nd for nd in nodes_by_level.get(level, []) if not nd.dead]
        peers.sort(key=lambda nd: nd.g)
        if policy.g2 == "m-alg":
            M = policy.g2_param
            if len(peers) <= M:
                return
            t[level] = peers[M - 1].g
        else:  # t-alg
            t[level] = peers[0].g + policy.g2_param
        for nd in peers:
            if nd.g > t[level]:
                nd.dead = True

    while heap:
        _, _, _, node = heap[0]
        if node.dead:
            heapq.heappop(heap)
            continue
        if node.level == m:
            if node.g < best_g:
                best_g = node.g
                best_label = node.label
            node.dead = True
            heapq.heappop(heap)
            if policy.first_leaf_exit:
                break
            continue
        lvl = node.level
        if lvl > 0 and not ((node.g < t[lvl]) if strict else (node.g <= t[lvl])):
            node.dead = True
            heapq.heappop(heap)
            continue
        got = _peek_child(problem, node, gen, t[lvl + 1], strict)
        if got is None:
            node.dead = True
            heapq.heappop(heap)
            continue
        _consume_child(node)
        coord, w = got
        child = _Node(node.label + (coord,), lvl + 1, node.g + w)
        heapq.heappush(heap, (child.level, child.g, seq, child))
        nodes_by_level.setdefault(child.level, []).append(child)
        seq += 1
        n_c += 1
        gen_per_level[child.level] += 1
        if collect_trace:
            trace.append((child.level, child.label, child.g, child.g, t[child.level]))
        if child.level > deepest:
            deepest = child.level
            if policy.g2 in ("m-alg", "t-alg") and child.level > 1:
                tighten(child.level - 1)
        if budget_cap is not None and n_c >= budget_cap:
            budget_hit = True
            break

    if budget_hit and best_label is None:
        best_label, best_g = _babai_descent(problem)
    if best_label is None:
        err = EmptySearchSpace(f"policy {policy.name}: no leaf within the bounds")
        err.node_generations = n_c
        raise err
    return SearchOutcome(decoded_label=best_label, distance=best_g,
                         node_generations=n_c, unique_nodes=n_c,
                         budget_hit=budget_hit, gen_per_level=gen_per_level,
                         trace=trace)


def _run_best_first(problem, policy, collect_trace):
    """Best-first driver: ACTIVE ordered by cost, leaves carry cost -inf.

    A node's cost is the biased metric of its best ungenerated child, so
    the first leaf to reach the top of the list ends the search.  Parent
    costs are updated on every generation (two updates per generated node).
    """
    m = problem.m
    b = policy.bias
    budget_cap = policy.node_budget
    trace = [] if collect_trace else None

    def lookahead(node):
        if node.level == m:
            return -INF
        got = _peek_child(problem, node, "se", INF, True)
        if got is None:
            return INF
        return node.g + got[1] - b * (node.level + 1)

    root = _Node((), 0, 0.0)
    root.f = lookahead(root)
    seq = 1
    heap = [(root.f, 0, 0, root)]
    n_c = 1
    gen_per_level = [0] * (m + 1)
    gen_per_level[0] = 1
    budget_hit = False
    best_label = None
    best_g = None

    while heap:
        f, _, version, node = heapq.heappop(heap)
        if version != node.version:
            continue  # stale entry; a newer cost was pushed
        if node.level == m:
            best_label, best_g = node.label, node.g
            break
        got = _peek_child(problem, node, "se", INF, True)
        if got is None:
            continue  # all children generated; drop the node
        _consume_child(node)
        coord, w = got
        child = _Node(node.label + (coord,), node.level + 1, node.g + w)
        child.f = lookahead(child)
        heapq.heappush(heap, (child.f, seq, 0, child))
        seq += 1
        n_c += 1
        gen_per_level[child.level] += 1
        if collect_trace:
            trace.append((child.level, child.label, child.g, child.f, INF))
        node.f = lookahead(node)
        node.version += 1
        if node.f < INF:
            heapq.heappush(heap, (node.f, seq, node.version, node))
            seq += 1
        if budget_cap is not None and n_c >= budget_cap:
            budget_hit = True
            break

    if best_label is None:
        if budget_hit:
            best_label, best_g = _babai_descent(problem)
        else:
            err = EmptySearchSpace("best-first search exhausted without a leaf")
            err.node_generations = n_c
            raise err
    return SearchOutcome(decoded_label=best_label, distance=best_g,
                         node_generations=n_c, unique_nodes=n_c,
                         budget_hit=budget_hit, gen_per_level=gen_per_level,
                         trace=trace)


def restart_schedule(problem, policy, factor=2.0, max_restarts=64, collect_trace=False):
    """Run gbb_run, relaxing finite bounds by `factor` whenever the search
    space turns out to be empty; restarts and node counts accumulate."""
    total = 0
    restarts = 0
    pol = policy
    while True:
        try:
            out = gbb_run(problem, pol, collect_trace=collect_trace)
            out.node_generations += total
            out.restarts = restarts
            return out
        except EmptySearchSpace as err:
            total += err.node_generations
            restarts += 1
            if restarts > max_restarts:
                raise
            if isinstance(pol.bound, (tuple, list)):
                new_bound = tuple(v * factor if v != INF else v for v in pol.bound)
            else:
                new_bound = pol.bound * factor if pol.bound != INF else pol.bound
            if new_bound == pol.bound:
                raise  # nothing to relax
            pol = replace(pol, bound=new_bound)


# ---------------------------------------------------------------------------
# the Fano decoder


def fano_decode(problem: TreeProblem, bias=1.0, step=1.0, node_budget=None,
                collect_trace=False):
    """Iterative best-first search with a running threshold.

    Keeps only the current path in memory.  The threshold T moves in
    multiples of `step`: it is tightened when a node is visited for the
    first time and relaxed when neither a forward nor a backward move is
    possible.  Terminates at the first leaf whose cost is within T.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    m = problem.m
    q = problem.boundary_q
    lev_rows = problem.lev_rows
    lev_y = problem.lev_y
    b = bias

    # per-level state along the current path
    path = []
    ranks = []
    gs = [0.0]
    fs = [0.0]
    resids = [lev_y[0]]
    orders = [None]  # boxed candidate orders, built lazily
    ses = [None]     # (a, delta) for free candidates

    def candidate(k, rank):
        """(coord, w) of the rank-th best child of the current level-k node."""
        resid = resids[k]
        diag = lev_rows[k][k]
        if q is None:
            if ses[k] is None:
                c = resid / diag
                a = _nearest_int(c)
                ses[k] = (a, 1 if (c - a) >= 0 else -1)
            a, delta = ses[k]
            x = _se_coord(a, delta, rank)
        else:
            if orders[k] is None:
                orders[k] = _boxed_se_order(resid / diag, q)
            if rank >= len(orders[k]):
                return None
            x = orders[k][rank]
        d = resid - diag * x
        return x, d * d

    t_mult = 0  # threshold T = t_mult * step: always an exact multiple
    t_mult_max = 0
    evals = 0
    visited = set()
    trace = [] if collect_trace else None
    budget_hit = False
    k = 0
    cand_rank = 0

    while True:
        if node_budget is not None and evals >= node_budget:
            budget_hit = True
            break
        T = t_mult * step
        got = candidate(k, cand_rank)
        evals += 1
        if got is None:
            f_cand = INF
        else:
            coord, w = got
            g_cand = gs[k] + w
            f_cand = g_cand - b * (k + 1)
        if f_cand <= T:
            path.append(coord)
            ranks.append(cand_rank)
            gs.append(g_cand)
            fs.append(f_cand)
            k += 1
            visited.add(tuple(path))
            if collect_trace:
                trace.append((k, tuple(path), g_cand, f_cand, T))
            if k == m:
                break
            if fs[k - 1] > T - step:  # first visit: pull T down as far as allowed
                while fs[k] <= (t_mult - 1) * step:
                    t_mult -= 1
            resid = lev_y[k]
            row = lev_rows[k]
            for j in range(k):
                resid -= row[j] * path[j]
            resids.append(resid)
            orders.append(None)
            ses.append(None)
            cand_rank = 0
        else:
            if k == 0 or fs[k - 1] > T:
                t_mult += 1  # cannot move back: relax and look forward again
                t_mult_max = max(t_mult_max, t_mult)
                cand_rank = 0
            else:
                cand_rank = ranks.pop() + 1  # move back, try the next-best sibling
                path.pop()
                gs.pop()
                fs.pop()
                resids.pop()
                orders.pop()
                ses.pop()
                k -= 1

    T_max = t_mult_max * step
    if budget_hit and k < m:
        label, g = _babai_descent(problem)
        return SearchOutcome(decoded_label=label, distance=g, node_generations=evals,
                             unique_nodes=1 + len(visited), budget_hit=True, trace=trace,
                             max_threshold=T_max)
    return SearchOutcome(decoded_label=tuple(path), distance=gs[m],
                         node_generations=evals, unique_nodes=1 + len(visited),
                         budget_hit=False, trace=trace, max_threshold=T_max)
