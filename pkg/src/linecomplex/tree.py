"""The recurrent, exponentially growing subtree T of the 3-regular tree.

Fix a ray v_0, v_1, ... in T_3.  A vertex hanging off v_k through its third
neighbour at distance m from v_k is kept exactly when m <= k.  The finite
truncation keeps v_0..v_N and every hanging tree at v_1..v_N in full.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np


class NoParentError(LookupError):
    pass


@dataclass(frozen=True)
class PrunedTree:
    """Truncation of T at ray length ``N``.

    Nodes are numbered breadth-first from the top ``v_N``; children are listed
    ray-child first.  ``attach[u]`` is the k of the ray vertex v_k that ``u``
    hangs from (for ray vertices, their own index) and ``depth[u]`` is the
    distance from that ray vertex.
    """

    N: int
    parent: np.ndarray
    children: tuple[tuple[int, ...], ...]
    attach: np.ndarray
    depth: np.ndarray
    is_ray: np.ndarray
    ray: tuple[int, ...]

    @property
    def n_nodes(self) -> int:
        return len(self.parent)

    @property
    def top(self) -> int:
        return self.ray[self.N]

    def degree(self, u: int) -> int:
        """Degree in the untruncated T (the top keeps its missing parent)."""
        return len(self.children[u]) + 1

    def is_leaf(self, u: int) -> bool:
        return not self.children[u]

    @property
    def leaves(self) -> list[int]:
        return [u for u in range(self.n_nodes) if not self.children[u]]

    def name(self, u: int) -> str:
        if self.is_ray[u]:
            return f"v{int(self.attach[u])}"
        return f"h{int(self.attach[u])}.{int(self.depth[u])}.{u}"

    def to_json(self) -> dict:
        return {
            "N": self.N,
            "nodes": [
                {
                    "id": u,
                    "name": self.name(u),
                    "parent": int(self.parent[u]),
                    "attach": int(self.attach[u]),
                    "depth": int(self.depth[u]),
                    "ray": bool(self.is_ray[u]),
                }
                for u in range(self.n_nodes)
            ],
        }

    def distances_from(self, u: int) -> np.ndarray:
        adj = [list(c) for c in self.children]
        for v, p in enumerate(self.parent):
            if p >= 0:
                adj[v].append(int(p))
        dist = np.full(self.n_nodes, -1, dtype=np.int64)
        dist[u] = 0
        q = deque([u])
        while q:
            x = q.popleft()
            for y in adj[x]:
                if dist[y] < 0:
                    dist[y] = dist[x] + 1
                    q.append(y)
        return dist


def build_pruned_tree(N: int) -> PrunedTree:
    if N < 1:
        raise ValueError("ray length N must be at least 1")
    parent = [-1]
    attach = [N]
    depth = [0]
    is_ray = [True]
    children: list[list[int]] = [[]]
    ray = {N: 0}
    queue = deque([0])
    while queue:
        u = queue.popleft()
        k, m = attach[u], depth[u]
        kids: list[tuple[int, int, bool]] = []
        if is_ray[u]:
            if k >= 1:
                kids.append((k - 1, 0, True))
                kids.append((k, 1, False))
        elif m < k:
            kids += [(k, m + 1, False), (k, m + 1, False)]
        for ck, cm, cr in kids:
            c = len(parent)
            parent.append(u)
            attach.append(ck)
            depth.append(cm)
            is_ray.append(cr)
            children.append([])
            children[u].append(c)
            if cr:
                ray[ck] = c
            queue.append(c)
    return PrunedTree(
        N,
        np.asarray(parent, dtype=np.int64),
        tuple(tuple(c) for c in children),
        np.asarray(attach, dtype=np.int64),
        np.asarray(depth, dtype=np.int64),
        np.asarray(is_ray, dtype=bool),
        tuple(ray[k] for k in range(N + 1)),
    )


def expected_node_count(N: int) -> int:
    """(N + 1) ray vertices plus 2^k - 1 hanging vertices at each v_k."""
    return (N + 1) + sum(2**k - 1 for k in range(1, N + 1))


def parent(t: PrunedTree, v: int) -> int:
    p = int(t.parent[v])
    if p < 0:
        raise NoParentError(f"{t.name(v)} is the truncation top and has no parent")
    return p
