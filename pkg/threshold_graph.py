from typing import Any, Dict, Iterable, List, Optional, Set, Tuple

import networkx as nx

from core import MckcInstance
from helper import INFINITY, NumericHelper
from logging_config import ModelError, get_logger, log_exceptions

Vertex = Tuple[str, int]

logger = get_logger(__name__)


def F(i: int) -> Vertex:
    return ("f", i)


def C(j: int) -> Vertex:
    return ("c", j)


def is_facility(v: Vertex) -> bool:
    return v[0] == "f"


def is_client(v: Vertex) -> bool:
    return v[0] == "c"


class ThresholdGraph:
    """Bipartite graph G (edge iff d(i,j) <= radius) with a deletion mask H.

    G is shared and never mutated; `fork` hands out a private mask so each
    decomposition run owns its own H.
    """

    def __init__(self, inst: MckcInstance, radius: Any, graph: Optional[nx.Graph] = None,
                 alive: Optional[Set[Vertex]] = None):
        self.logger = get_logger(self.__class__.__name__)
        self.inst = inst
        self.radius = radius
        if graph is None:
            graph = nx.Graph()
            graph.add_nodes_from(F(i) for i in range(inst.n_facilities))
            graph.add_nodes_from(C(j) for j in range(inst.n_clients))
            for i in range(inst.n_facilities):
                for j in range(inst.n_clients):
                    d = inst.dist(i, j)
                    if d is not INFINITY and NumericHelper.leq(d, radius):
                        graph.add_edge(F(i), C(j))
            graph = nx.freeze(graph)
        self.G = graph
        self.alive: Set[Vertex] = set(graph.nodes) if alive is None else alive
        self._g_distances: Dict[Vertex, Dict[Vertex, int]] = {}

    def fork(self) -> "ThresholdGraph":
        other = ThresholdGraph(self.inst, self.radius, self.G, set(self.alive))
        other._g_distances = self._g_distances
        return other

    @property
    def H(self) -> nx.Graph:
        return nx.subgraph_view(self.G, filter_node=lambda v: v in self.alive)

    def n_edges(self) -> int:
        return self.G.number_of_edges()

    def is_alive(self, v: Vertex) -> bool:
        return v in self.alive

    def delete(self, vertices: Iterable[Vertex]):
        for v in vertices:
            self.alive.discard(v)

    def alive_clients(self) -> List[int]:
        return sorted(v[1] for v in self.alive if is_client(v))

    def alive_facilities(self) -> List[int]:
        return sorted(v[1] for v in self.alive if is_facility(v))

    def neighbors_G(self, v: Vertex) -> Set[Vertex]:
        return set(self.G.neighbors(v))

    def neighbors_H(self, v: Vertex) -> Set[Vertex]:
        return {u for u in self.G.neighbors(v) if u in self.alive}

    def facility_neighbors(self, j: int) -> List[int]:
        return sorted(v[1] for v in self.G.neighbors(C(j)))

    def client_neighbors(self, i: int) -> List[int]:
        return sorted(v[1] for v in self.G.neighbors(F(i)))

    def isolated_clients(self) -> List[int]:
        return [j for j in range(self.inst.n_clients) if self.G.degree(C(j)) == 0]

    def distances_G(self, source: Vertex) -> Dict[Vertex, int]:
        if source not in self._g_distances:
            self._g_distances[source] = dict(nx.single_source_shortest_path_length(self.G, source))
        return self._g_distances[source]

    def hop_distance(self, u: Vertex, v: Vertex) -> Any:
        return self.distances_G(u).get(v, INFINITY)

    def layered_neighborhood(self, v: Vertex, t: int) -> Tuple[Set[Vertex], Set[Vertex]]:
        if v not in self.alive:
            raise ModelError(f"Vertex {v} is deleted from the working graph")
        levels = nx.single_source_shortest_path_length(self.H, v, cutoff=t)
        inside = {u for u, d in levels.items() if d < t}
        boundary = {u for u, d in levels.items() if d == t}
        return inside, boundary

    def hop_diameter(self, vertices: Iterable[Vertex]) -> Any:
        nodes = sorted(set(vertices))
        if not nodes:
            raise ModelError("hop_diameter of an empty set")
        diameter = 0
        for k, u in enumerate(nodes):
            dist = self.distances_G(u)
            for w in nodes[k + 1:]:
                if w not in dist:
                    return INFINITY
                diameter = max(diameter, dist[w])
        return diameter

    def multi_source_distance(self, sources: Iterable[Vertex], target: Vertex) -> Any:
        best = INFINITY
        dist = self.distances_G(target)
        for s in sources:
            if s in dist and (best is INFINITY or dist[s] < best):
                best = dist[s]
        return best


@log_exceptions
def build(inst: MckcInstance, radius: Any) -> ThresholdGraph:
    if radius is INFINITY or radius < 0:
        raise ModelError(f"Radius must be a nonnegative number, got {radius!r}")
    g = ThresholdGraph(inst, radius)
    logger.debug(f"Threshold graph at radius {radius}: {g.n_edges()} edges")
    return g


def layered_neighborhood(g: ThresholdGraph, v: Vertex, t: int) -> Tuple[Set[Vertex], Set[Vertex]]:
    return g.layered_neighborhood(v, t)


def hop_diameter(g: ThresholdGraph, vertices: Iterable[Vertex]) -> Any:
    return g.hop_diameter(vertices)
