"""
Binary exploration tree built online over ROI cells.

Every ROI cell becomes exactly one vertex. A vertex that would receive a
third child gets a dummy vertex instead (edge length 0) so the tree stays
binary; the edge from a dummy down to a real cell keeps length 1, so the
total length L equals the number of non-root cell vertices.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, FrozenSet, Iterable, List, Optional, Set

from core.errors import TreeContractError
from core.models import Cell, VertexState

TREE_FORMAT = 'exploration-tree/1'


@dataclass
class Vertex:
    """A tree vertex; ``cell`` is None for dummy vertices."""
    id: int
    cell: Optional[Cell]
    parent: Optional[int] = None
    children: List[int] = field(default_factory=list)
    state: VertexState = VertexState.UNEXPLORED

    @property
    def is_dummy(self) -> bool:
        return self.cell is None

    @property
    def edge_to_parent_length(self) -> int:
        if self.parent is None or self.is_dummy:
            return 0
        return 1

    def to_dict(self) -> Dict[str, Any]:
        return {
            'id': self.id,
            'cell': 'dummy' if self.is_dummy else list(self.cell),
            'state': self.state.name,
            'parent': self.parent,
            'children': list(self.children)
        }


@dataclass(frozen=True)
class BackboneDecomposition:
    """A root-to-leaf backbone and the ribs hanging off it."""
    backbone: List[int]
    ribs: List[int]
    d_max: int
    backbone_length: int

    @property
    def backbone_set(self) -> FrozenSet[int]:
        return frozenset(self.backbone)


class ExplorationTree:
    """Rooted binary tree over explored cells with shared vertex states."""

    def __init__(self, root_cell: Cell):
        """
        Initialize a tree holding only the root.

        Args:
            root_cell: The starting cell
        """
        self.vertices: Dict[int, Vertex] = {}
        self._cell_index: Dict[Cell, int] = {}
        self._next_id = 0
        self.root = self._new_vertex(tuple(root_cell), parent=None)

    def _new_vertex(self, cell: Optional[Cell], parent: Optional[int]) -> int:
        vertex_id = self._next_id
        self._next_id += 1
        self.vertices[vertex_id] = Vertex(vertex_id, cell, parent)
        if cell is not None:
            self._cell_index[cell] = vertex_id
        return vertex_id

    def __len__(self) -> int:
        return len(self.vertices)

    def __getitem__(self, vertex_id: int) -> Vertex:
        return self.vertices[vertex_id]

    def contains_cell(self, cell: Cell) -> bool:
        return tuple(cell) in self._cell_index

    def vertex_of(self, cell: Cell) -> int:
        return self._cell_index[tuple(cell)]

    def cells(self) -> FrozenSet[Cell]:
        return frozenset(self._cell_index)

    @property
    def L(self) -> int:
        """Total edge length."""
        return sum(v.edge_to_parent_length for v in self.vertices.values())

    def position(self, vertex_id: int) -> Cell:
        """Cell a vertex occupies; a dummy sits on its nearest real ancestor."""
        vertex = self.vertices[vertex_id]
        while vertex.is_dummy:
            vertex = self.vertices[vertex.parent]
        return vertex.cell

    def is_leaf(self, vertex_id: int) -> bool:
        return not self.vertices[vertex_id].children

    def add_child(self, parent_id: int, cell: Cell) -> int:
        """
        Attach a new unexplored cell vertex below ``parent_id``.

        Args:
            parent_id: Vertex receiving the child
            cell: Cell of the new vertex

        Returns:
            Id of the new vertex
        """
        cell = tuple(cell)
        if cell in self._cell_index:
            raise TreeContractError(f"Cell {cell} is already in the tree; adding it would close a cycle")
        parent = self.vertices[parent_id]
        if len(parent.children) >= 2:
            raise TreeContractError(f"Vertex {parent_id} already has two children; binarize first")
        child_id = self._new_vertex(cell, parent_id)
        parent.children.append(child_id)
        return child_id

    def binarize_at(self, vertex_id: int) -> Optional[int]:
        """
        Make room for another child by inserting a dummy vertex.

        A vertex with two real children gets a dummy holding both; a vertex
        whose first child is already a dummy gets a dummy around its second
        child. Vertices with fewer than two children are left alone.

        Args:
            vertex_id: Vertex about to receive another child

        Returns:
            Id of the new dummy, or None when no dummy was needed
        """
        vertex = self.vertices[vertex_id]
        if len(vertex.children) < 2:
            return None

        first = self.vertices[vertex.children[0]]
        wrapped = list(vertex.children) if not first.is_dummy else [vertex.children[1]]
        dummy_id = self._new_vertex(None, vertex_id)
        dummy = self.vertices[dummy_id]
        for child_id in wrapped:
            self.vertices[child_id].parent = dummy_id
            dummy.children.append(child_id)

        if first.is_dummy:
            vertex.children = [vertex.children[0], dummy_id]
        else:
            vertex.children = [dummy_id]
        return dummy_id

    def attach_children(self, parent_id: int, cells: Iterable[Cell]) -> List[int]:
        """
        Attach newly sensed cells in order, binarizing as needed.

        Args:
            parent_id: Vertex the cells were sensed from
            cells: New cells (none may already be in the tree)

        Returns:
            Ids of the new cell vertices, in input order
        """
        new_ids = []
        for cell in cells:
            target = parent_id
            if len(self.vertices[parent_id].children) >= 2:
                dummy_id = self.binarize_at(parent_id)
                if len(self.vertices[parent_id].children) >= 2:
                    target = dummy_id
            new_ids.append(self.add_child(target, cell))
        return new_ids

    def set_state(self, vertex_id: int, state: VertexState) -> None:
        """
        Advance a vertex state; states never move backwards.

        Args:
            vertex_id: Vertex to update
            state: New state
        """
        vertex = self.vertices[vertex_id]
        if state < vertex.state:
            raise TreeContractError(
                f"Illegal transition {vertex.state.name} -> {state.name} at vertex {vertex_id}")
        vertex.state = state

    def children_explored(self, vertex_id: int) -> bool:
        return all(self.vertices[c].state is VertexState.EXPLORED
                   for c in self.vertices[vertex_id].children)

    def path_from_root(self, vertex_id: int) -> List[int]:
        path = [vertex_id]
        while self.vertices[path[-1]].parent is not None:
            path.append(self.vertices[path[-1]].parent)
        return path[::-1]

    def _heights(self) -> Dict[int, int]:
        heights: Dict[int, int] = {}
        # dummies are created after the children they adopt, so walk post-order
        stack = [(self.root, False)]
        while stack:
            vertex_id, expanded = stack.pop()
            vertex = self.vertices[vertex_id]
            if expanded:
                heights[vertex_id] = max(
                    (self.vertices[c].edge_to_parent_length + heights[c] for c in vertex.children),
                    default=0)
            else:
                stack.append((vertex_id, True))
                stack.extend((c, False) for c in vertex.children)
        return heights

    def decompose(self, leaf: Optional[int] = None) -> BackboneDecomposition:
        """
        Split the tree into a backbone and ribs.

        Args:
            leaf: Leaf the backbone should end at; defaults to the deepest
                leaf, ties broken by smallest child index

        Returns:
            BackboneDecomposition with d_max in length units
        """
        heights = self._heights()
        if leaf is None:
            backbone = [self.root]
            while self.vertices[backbone[-1]].children:
                children = self.vertices[backbone[-1]].children
                best = max(children, key=lambda c: (
                    self.vertices[c].edge_to_parent_length + heights[c], -children.index(c)))
                backbone.append(best)
        else:
            if self.vertices[leaf].children:
                raise TreeContractError(f"Vertex {leaf} is not a leaf")
            backbone = self.path_from_root(leaf)

        on_backbone: Set[int] = set(backbone)
        ribs = [c for b in backbone for c in self.vertices[b].children if c not in on_backbone]
        backbone_length = sum(self.vertices[v].edge_to_parent_length for v in backbone)
        return BackboneDecomposition(backbone, ribs, heights[self.root], backbone_length)

    def check_invariants(self) -> None:
        """Raise TreeContractError when the tree is not a rooted binary tree."""
        for vertex in self.vertices.values():
            if len(vertex.children) > 2:
                raise TreeContractError(f"Vertex {vertex.id} has {len(vertex.children)} children")
            for child in vertex.children:
                if self.vertices[child].parent != vertex.id:
                    raise TreeContractError(f"Vertex {child} does not point back to {vertex.id}")
            # parent-pointer walk must reach the root without revisiting
            seen = set()
            current = vertex
            while current.parent is not None:
                if current.id in seen:
                    raise TreeContractError(f"Cycle through vertex {current.id}")
                seen.add(current.id)
                current = self.vertices[current.parent]
            if current.id != self.root:
                raise TreeContractError(f"Vertex {vertex.id} is not connected to the root")

    def to_dict(self) -> Dict[str, Any]:
        """Serialize vertices, states and structure."""
        return {
            'format': TREE_FORMAT,
            'root': self.root,
            'next_id': self._next_id,
            'vertices': [self.vertices[v].to_dict() for v in sorted(self.vertices)]
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'ExplorationTree':
        """Rebuild a tree from ``to_dict`` output."""
        try:
            if data.get('format') != TREE_FORMAT:
                raise TreeContractError(f"Unsupported tree format: {data.get('format')!r}")
            records = {int(r['id']): r for r in data['vertices']}
            root = int(data['root'])
            tree = cls.__new__(cls)
            tree.vertices = {}
            tree._cell_index = {}
            tree._next_id = int(data['next_id'])
            tree.root = root
            for vertex_id, record in sorted(records.items()):
                cell = None if record['cell'] == 'dummy' else (int(record['cell'][0]), int(record['cell'][1]))
                if cell is not None and cell in tree._cell_index:
                    raise TreeContractError(f"Cell {cell} appears twice")
                parent = record['parent']
                tree.vertices[vertex_id] = Vertex(
                    vertex_id, cell,
                    None if parent is None else int(parent),
                    [int(c) for c in record['children']],
                    VertexState[record['state']])
                if cell is not None:
                    tree._cell_index[cell] = vertex_id
        except (KeyError, TypeError, ValueError, IndexError) as e:
            raise TreeContractError(f"Malformed tree document: {e}") from e

        if root not in tree.vertices or tree.vertices[root].parent is not None:
            raise TreeContractError("Tree document has no valid root")
        if any(v >= tree._next_id for v in tree.vertices):
            raise TreeContractError("Vertex id beyond next_id")
        try:
            tree.check_invariants()
        except KeyError as e:
            raise TreeContractError(f"Dangling vertex reference {e}") from e
        return tree
