import pytest

from core.errors import TreeContractError
from core.exploration_tree import ExplorationTree
from core.models import VertexState


def star_tree(branches: int) -> ExplorationTree:
    tree = ExplorationTree((0, 0))
    cells = [(0, 1), (1, 0), (0, -1), (-1, 0)][:branches]
    tree.attach_children(tree.root, cells)
    return tree


def test_add_child_and_length():
    tree = ExplorationTree((0, 0))
    child = tree.add_child(tree.root, (0, 1))
    assert tree.L == 1
    assert tree[child].parent == tree.root
    assert tree.position(child) == (0, 1)


def test_duplicate_cell_rejected():
    tree = ExplorationTree((0, 0))
    tree.add_child(tree.root, (0, 1))
    with pytest.raises(TreeContractError):
        tree.add_child(tree.root, (0, 1))


def test_third_child_needs_binarizing():
    tree = star_tree(2)
    with pytest.raises(TreeContractError):
        tree.add_child(tree.root, (0, -1))


def test_three_children_get_one_dummy():
    tree = star_tree(3)
    tree.check_invariants()
    dummies = [v for v in tree.vertices.values() if v.is_dummy]
    assert len(dummies) == 1
    assert len(tree) == 5
    assert tree.L == 3
    assert tree.position(dummies[0].id) == (0, 0)

    decomposition = tree.decompose()
    assert decomposition.d_max == 1
    assert len(decomposition.ribs) == 2
    assert decomposition.backbone_length == 1


def test_four_children_stay_binary():
    tree = star_tree(4)
    tree.check_invariants()
    assert tree.L == 4
    assert sum(v.is_dummy for v in tree.vertices.values()) == 2
    assert all(len(v.children) <= 2 for v in tree.vertices.values())


def test_path_decomposition():
    tree = ExplorationTree((0, 0))
    parent = tree.root
    for x in range(1, 6):
        parent = tree.add_child(parent, (x, 0))
    decomposition = tree.decompose()
    assert decomposition.d_max == 5
    assert decomposition.ribs == []
    assert decomposition.backbone[-1] == parent


def test_decompose_requires_leaf():
    tree = star_tree(2)
    with pytest.raises(TreeContractError):
        tree.decompose(leaf=tree.root)


def test_states_never_move_backwards():
    tree = star_tree(1)
    tree.set_state(tree.root, VertexState.EXPLORED)
    with pytest.raises(TreeContractError):
        tree.set_state(tree.root, VertexState.UNDER_EXPLORATION)


def test_tree_document_round_trip():
    tree = star_tree(4)
    tree.set_state(tree.root, VertexState.UNDER_EXPLORATION)
    rebuilt = ExplorationTree.from_dict(tree.to_dict())
    assert rebuilt.to_dict() == tree.to_dict()
    assert rebuilt.vertex_of((1, 0)) == tree.vertex_of((1, 0))


def test_malformed_tree_document():
    document = star_tree(2).to_dict()
    document['vertices'][1]['parent'] = 2
    with pytest.raises(TreeContractError):
        ExplorationTree.from_dict(document)
    with pytest.raises(TreeContractError):
        ExplorationTree.from_dict({'format': 'something-else/1'})
