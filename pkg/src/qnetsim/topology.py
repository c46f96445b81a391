"""Network graph: nodes with memory/noise hardware and fiber links."""

from __future__ import annotations

from dataclasses import dataclass, field

import networkx as nx

from .channels import NoiseParams
from .errors import BadParameter, NoPath, UnknownNode
from .link_layer import LinkParams
from .memory import MemoryParams


@dataclass
class Node:
    name: str
    memory: MemoryParams = field(default_factory=MemoryParams)
    noise: NoiseParams = field(default_factory=NoiseParams)


@dataclass
class Link:
    id: str
    a: str
    b: str
    params: LinkParams

    def other(self, node: str) -> str:
        return self.b if node == self.a else self.a


class Topology:
    def __init__(self):
        self.nodes: dict[str, Node] = {}
        self.links: dict[str, Link] = {}
        self.graph = nx.Graph()
        self._dist_cache: dict[str, dict[str, float]] = {}

    def add_node(self, name: str, memory: MemoryParams | None = None, noise: NoiseParams | None = None) -> Node:
        if name in self.nodes:
            raise BadParameter(f"duplicate node {name!r}")
        node = Node(name, memory or MemoryParams(), noise or NoiseParams())
        self.nodes[name] = node
        self.graph.add_node(name)
        self._dist_cache.clear()
        return node

    def add_link(self, a: str, b: str, params: LinkParams, link_id: str | None = None) -> Link:
        for n in (a, b):
            if n not in self.nodes:
                raise UnknownNode(n)
        if a == b:
            raise BadParameter("link endpoints must differ")
        if self.graph.has_edge(a, b):
            raise BadParameter(f"duplicate link {a}-{b}")
        link_id = link_id or "-".join(sorted((a, b)))
        if link_id in self.links:
            raise BadParameter(f"duplicate link id {link_id!r}")
        link = Link(link_id, a, b, params)
        self.links[link_id] = link
        self.graph.add_edge(a, b, id=link_id, length_km=params.length_km)
        self._dist_cache.clear()
        return link

    def node(self, name: str) -> Node:
        try:
            return self.nodes[name]
        except KeyError:
            raise UnknownNode(name) from None

    def link(self, link_id: str) -> Link:
        return self.links[link_id]

    def link_between(self, a: str, b: str) -> Link:
        self.node(a)
        self.node(b)
        data = self.graph.get_edge_data(a, b)
        if data is None:
            raise NoPath(f"no link between {a} and {b}")
        return self.links[data["id"]]

    def neighbors(self, name: str) -> list[str]:
        self.node(name)
        return sorted(self.graph.neighbors(name))

    def is_connected(self) -> bool:
        return len(self.nodes) == 0 or nx.is_connected(self.graph)

    def distance_km(self, a: str, b: str) -> float:
        """Shortest fiber distance between two nodes (classical signalling route)."""
        self.node(a)
        self.node(b)
        if a == b:
            return 0.0
        table = self._dist_cache.get(a)
        if table is None:
            table = nx.single_source_dijkstra_path_length(self.graph, a, weight="length_km")
            self._dist_cache[a] = table
        if b not in table:
            raise NoPath(f"{a} and {b} are disconnected")
        return float(table[b])

    def path_distance_km(self, nodes) -> float:
        return sum(self.link_between(u, v).params.length_km for u, v in zip(nodes, nodes[1:]))

    def __len__(self) -> int:
        return len(self.nodes)
