"""Sparse undirected roadmaps shared by the planners.

Vertices are (position, yaw) pairs keyed by integer id; edges store
Euclidean lengths. Shortest paths use Dijkstra with (distance, id)
ordering, so results are deterministic under ties.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

import numpy as np

from .errors import PlannerError


@dataclass
class Path:
    """Ordered waypoints handed to the navigator."""
    positions: np.ndarray  # (N, 3)
    yaws: np.ndarray  # (N,)
    vids: list | None = None  # originating graph vertex ids, if any

    def __post_init__(self):
        self.positions = np.atleast_2d(np.asarray(self.positions, dtype=float))
        self.yaws = np.atleast_1d(np.asarray(self.yaws, dtype=float))

    def __len__(self):
        return len(self.positions)

    @property
    def length(self) -> float:
        if len(self.positions) < 2:
            return 0.0
        return float(np.linalg.norm(np.diff(self.positions, axis=0), axis=1).sum())

    def to_csv_rows(self, t0: float = 0.0, speed: float = 1.0):
        """(x, y, z, yaw, timestamp) rows assuming constant speed."""
        rows = []
        t = t0
        prev = None
        for p, yaw in zip(self.positions, self.yaws):
            if prev is not None and speed > 0:
                t += float(np.linalg.norm(p - prev)) / speed
            rows.append((p[0], p[1], p[2], yaw, t))
            prev = p
        return rows


@dataclass
class PlanGraph:
    root: int = 0
    vertices: dict = field(default_factory=dict)  # id -> (position (3,), yaw)
    edges: dict = field(default_factory=dict)  # (a, b) with a < b -> length
    _adj: dict = field(default_factory=dict, repr=False)
    _next_id: int = 0

    def add_vertex(self, position, yaw: float = 0.0, vid: int | None = None) -> int:
        if vid is None:
            vid = self._next_id
        if vid in self.vertices:
            raise PlannerError(f"vertex id {vid} already present")
        self.vertices[vid] = (np.asarray(position, dtype=float).copy(), float(yaw))
        self._adj.setdefault(vid, [])
        self._next_id = max(self._next_id, vid + 1)
        return vid

    def add_edge(self, a: int, b: int, length: float | None = None):
        if a == b:
            raise PlannerError("self edges are not allowed")
        if a not in self.vertices or b not in self.vertices:
            raise PlannerError("edge endpoints must exist")
        key = (a, b) if a < b else (b, a)
        if key in self.edges:
            return
        if length is None:
            length = float(np.linalg.norm(self.vertices[a][0] - self.vertices[b][0]))
        self.edges[key] = float(length)
        self._adj.setdefault(a, []).append((b, float(length)))
        self._adj.setdefault(b, []).append((a, float(length)))

    def has_edge(self, a: int, b: int) -> bool:
        key = (a, b) if a < b else (b, a)
        return key in self.edges

    def neighbors(self, v: int):
        return self._adj.get(v, [])

    def __len__(self):
        return len(self.vertices)

    def position(self, vid: int) -> np.ndarray:
        return self.vertices[vid][0]

    def yaw(self, vid: int) -> float:
        return self.vertices[vid][1]

    def shortest_paths(self, source: int):
        """Dijkstra from source. Returns (dist, parent) dicts; unreachable
        vertices are absent from both."""
        if source not in self.vertices:
            raise PlannerError(f"unknown source vertex {source}")
        dist = {source: 0.0}
        parent = {source: source}
        done = set()
        heap = [(0.0, source)]
        while heap:
            d, v = heapq.heappop(heap)
            if v in done:
                continue
            done.add(v)
            for u, w in self._adj.get(v, []):
                nd = d + w
                if u not in dist or nd < dist[u] - 1e-15 or \
                        (abs(nd - dist[u]) <= 1e-15 and v < parent[u]):
                    dist[u] = nd
                    parent[u] = v
                    heapq.heappush(heap, (nd, u))
        return dist, parent

    def path_to(self, parent: dict, target: int) -> list:
        if target not in parent:
            raise PlannerError(f"vertex {target} unreachable")
        out = [target]
        while parent[out[-1]] != out[-1]:
            out.append(parent[out[-1]])
        out.reverse()
        return out

    def path_length(self, vids) -> float:
        total = 0.0
        for a, b in zip(vids[:-1], vids[1:]):
            key = (a, b) if a < b else (b, a)
            if key not in self.edges:
                raise PlannerError(f"path uses missing edge {key}")
            total += self.edges[key]
        return total

    def path_positions(self, vids) -> np.ndarray:
        return np.array([self.vertices[v][0] for v in vids])

    def reachable_from(self, source: int) -> set:
        dist, _ = self.shortest_paths(source)
        return set(dist)

    def drop_isolated(self, keep: int | None = None):
        connected = {v for pair in self.edges for v in pair}
        for vid in list(self.vertices):
            if vid not in connected and vid != keep:
                del self.vertices[vid]
                self._adj.pop(vid, None)

    def nearest_vertex(self, position) -> int:
        if not self.vertices:
            raise PlannerError("graph is empty")
        position = np.asarray(position, dtype=float)
        ids = sorted(self.vertices)
        pos = np.array([self.vertices[v][0] for v in ids])
        return ids[int(np.argmin(np.linalg.norm(pos - position, axis=1)))]

    def copy(self) -> "PlanGraph":
        g = PlanGraph(root=self.root)
        for vid in self.vertices:
            g.add_vertex(self.vertices[vid][0], self.vertices[vid][1], vid=vid)
        for (a, b), length in self.edges.items():
            g.add_edge(a, b, length)
        return g

    # -- serialization: plain edge-list text ------------------------------

    def to_text(self) -> str:
        lines = [f"root {self.root}"]
        for vid in sorted(self.vertices):
            p, yaw = self.vertices[vid]
            lines.append(f"v {vid} {p[0]:.6f} {p[1]:.6f} {p[2]:.6f} {yaw:.6f}")
        for (a, b) in sorted(self.edges):
            lines.append(f"e {a} {b} {self.edges[(a, b)]:.6f}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "PlanGraph":
        g = cls()
        for line in text.splitlines():
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "root":
                g.root = int(parts[1])
            elif parts[0] == "v":
                g.add_vertex(np.array([float(parts[2]), float(parts[3]), float(parts[4])]),
                             float(parts[5]), vid=int(parts[1]))
            elif parts[0] == "e":
                g.add_edge(int(parts[1]), int(parts[2]), float(parts[3]))
            else:
                raise PlannerError(f"bad graph line: {line!r}")
        return g
