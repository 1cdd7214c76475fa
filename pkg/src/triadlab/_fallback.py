"""Pure-Python reference kernels.

Every function here has a twin in ``_kernels.pyx`` with the same signature and
the same consumption of the raw 64-bit stream of a numpy ``BitGenerator``, so the
two backends produce bit-identical results for identical seeds.
"""
import numpy as np

TRIAD_MEDIAN = 0
RESTRICTED = 1
DYAD_MIDPOINT = 2
DYAD_ENDPOINT = 3

RUNNING = 0
CONVERGED = 1
ERR_NOT_MEDIAN = -1
ERR_AMBIGUOUS = -2

NO_DECISION = -3


def bounded(bitgen, n):
    """Uniform integer in [0, n) via a 64x64 -> 128 multiply-high of one raw draw."""
    return (bitgen.random_raw() * n) >> 64


def coin(bitgen):
    return bitgen.random_raw() >> 63


def median_walk(indptr, indices, dist, x, y, z):
    """Walk from ``x`` while some neighbour is strictly closer to both ``y`` and ``z``.

    On a median graph the walk stops exactly at m(x, y, z). Returns -1 when the
    stopping node is not on a shortest y-z path, which only happens off median graphs.
    """
    c = x
    while True:
        dy = dist[c, y]
        dz = dist[c, z]
        for j in range(indptr[c], indptr[c + 1]):
            nb = indices[j]
            if dist[nb, y] < dy and dist[nb, z] < dz:
                c = nb
                break
        else:
            break
    if dist[y, c] + dist[c, z] != dist[y, z]:
        return -1
    return int(c)


def restricted_vote(dist, a, b, c, bitgen):
    """Each member votes for the strictly closer of the other two; ties flip a coin."""
    members = (a, b, c)
    votes = {}
    for i in range(3):
        v = members[i]
        # the other two, in slot order
        if i == 0:
            p, q = members[1], members[2]
        elif i == 1:
            p, q = members[0], members[2]
        else:
            p, q = members[0], members[1]
        dp = dist[v, p]
        dq = dist[v, q]
        if dp < dq:
            choice = p
        elif dq < dp:
            choice = q
        else:
            choice = q if coin(bitgen) else p
        votes[choice] = votes.get(choice, 0) + 1
    for node, count in votes.items():
        if count >= 2:
            return int(node)
    return NO_DECISION


def dyad_midpoint(indptr, indices, dist, x, y, bitgen):
    d = dist[x, y]
    if d == 0:
        return int(x)
    steps = d // 2
    if d % 2:
        steps += coin(bitgen)
    # walk the whole interval so a non-path interval is always detected
    c = x
    mid = x
    for s in range(d):
        nxt = -1
        target = dist[c, y] - 1
        for j in range(indptr[c], indptr[c + 1]):
            nb = indices[j]
            if dist[nb, y] == target:
                if nxt >= 0:
                    return ERR_AMBIGUOUS
                nxt = nb
        c = nxt
        if s + 1 == steps:
            mid = c
    return int(mid)


def decide(rule, indptr, indices, dist, members, bitgen):
    """Group decision for the member nodes; returns a node, NO_DECISION, or an error code."""
    if rule == TRIAD_MEDIAN:
        dest = median_walk(indptr, indices, dist, members[0], members[1], members[2])
        return ERR_NOT_MEDIAN if dest < 0 else dest
    if rule == RESTRICTED:
        return restricted_vote(dist, members[0], members[1], members[2], bitgen)
    if rule == DYAD_MIDPOINT:
        return dyad_midpoint(indptr, indices, dist, members[0], members[1], bitgen)
    if rule == DYAD_ENDPOINT:
        return int(members[1] if coin(bitgen) else members[0])
    raise ValueError(f"unknown rule code {rule}")


def step_tokens(rule, indptr, indices, dist, owners, counts, bitgen):
    """One round in place. Returns (selected, members, decision, status)."""
    n_tokens = owners.shape[0]
    size = 3 if rule in (TRIAD_MEDIAN, RESTRICTED) else 2
    selected = [bounded(bitgen, n_tokens) for _ in range(size)]
    members = [int(owners[i]) for i in selected]
    dest = decide(rule, indptr, indices, dist, members, bitgen)
    if dest == ERR_NOT_MEDIAN or dest == ERR_AMBIGUOUS:
        return selected, members, dest, dest
    status = RUNNING
    if dest != NO_DECISION:
        for i in selected:
            src = owners[i]
            if src != dest:
                counts[src] -= 1
                counts[dest] += 1
                owners[i] = dest
        if counts[dest] == n_tokens:
            status = CONVERGED
    return selected, members, dest, status


def run_tokens(rule, indptr, indices, dist, owners, counts, bitgen, max_steps):
    """Step until one node holds every token or ``max_steps`` rounds elapse.

    ``owners`` and ``counts`` are updated in place. Returns (steps, status).
    """
    n_tokens = owners.shape[0]
    if n_tokens == 0 or counts.max() == n_tokens:
        return 0, CONVERGED
    steps = 0
    while steps < max_steps:
        _, _, _, status = step_tokens(rule, indptr, indices, dist, owners, counts, bitgen)
        steps += 1
        if status != RUNNING:
            return steps, status
    return steps, RUNNING


def _star_position(root, leaves, idx):
    if idx < root:
        return 0
    idx -= root
    for j in range(leaves.shape[0]):
        if idx < leaves[j]:
            return j + 1
        idx -= leaves[j]
    raise AssertionError("token index past total")


def _star_dist(p, q):
    if p == q:
        return 0
    if p == 0 or q == 0:
        return 1
    return 2


def concentrate(leaves):
    """Repack leaf counts keeping the maximum and the total, largest first."""
    top = int(leaves.max()) if leaves.shape[0] else 0
    if top == 0:
        return
    total = int(leaves.sum())
    full, rest = divmod(total, top)
    leaves[:] = 0
    leaves[:full] = top
    if rest:
        leaves[full] = rest


def star_step(state, leaves, do_concentrate, bitgen):
    """One restricted-triad round on star counts; ``state[0]`` is the root count."""
    root = state[0]
    n = root + int(leaves.sum())
    idx = [bounded(bitgen, n) for _ in range(3)]
    pos = [_star_position(root, leaves, i) for i in idx]
    votes = {}
    for i in range(3):
        if i == 0:
            p, q = pos[1], pos[2]
        elif i == 1:
            p, q = pos[0], pos[2]
        else:
            p, q = pos[0], pos[1]
        dp = _star_dist(pos[i], p)
        dq = _star_dist(pos[i], q)
        if dp < dq:
            choice = p
        elif dq < dp:
            choice = q
        else:
            choice = q if coin(bitgen) else p
        votes[choice] = votes.get(choice, 0) + 1
    dest = NO_DECISION
    for node, count in votes.items():
        if count >= 2:
            dest = node
    if dest != NO_DECISION:
        seen = set()
        for k in range(3):
            if idx[k] in seen:
                continue
            seen.add(idx[k])
            src = pos[k]
            if src == dest:
                continue
            if src == 0:
                state[0] -= 1
            else:
                leaves[src - 1] -= 1
            if dest == 0:
                state[0] += 1
            else:
                leaves[dest - 1] += 1
    if do_concentrate:
        concentrate(leaves)
    root = state[0]
    if root == n or (leaves.shape[0] and leaves.max() == n):
        return CONVERGED
    return RUNNING


def run_star(root, leaves, do_concentrate, bitgen, max_steps):
    """Run the star chain in place. Returns (root_count, steps, status)."""
    n = root + int(leaves.sum())
    state = [root]
    if root == n or (leaves.shape[0] and leaves.max() == n):
        return root, 0, CONVERGED
    steps = 0
    while steps < max_steps:
        status = star_step(state, leaves, do_concentrate, bitgen)
        steps += 1
        if status == CONVERGED:
            return state[0], steps, CONVERGED
    return state[0], steps, RUNNING


def first_bad_triple(dist):
    """First x < y < z whose three pairwise intervals do not meet in exactly one node.

    Uses the half-perimeter identity: w lies on all three intervals iff
    d(w,x) + d(w,y) + d(w,z) = (d(x,y) + d(x,z) + d(y,z)) / 2.
    """
    n = dist.shape[0]
    for x in range(n):
        dx = dist[x]
        for y in range(x + 1, n):
            dxy = dx[y]
            w_nodes = np.flatnonzero(dx + dist[y] == dxy)
            if y + 1 >= n:
                continue
            zs = np.arange(y + 1, n)
            target = dx[zs] + dist[y, zs] - dxy
            hits = (2 * dist[np.ix_(w_nodes, zs)] == target).sum(axis=0)
            bad = np.flatnonzero(hits != 1)
            if bad.size:
                return (x, y, int(zs[bad[0]]))
    return None
