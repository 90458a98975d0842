import numpy as np
import pytest

from gsattack.graph import Graph, LabelData, generate_sbm


def path_graph(n: int, features=None) -> Graph:
    x = np.eye(n) if features is None else features
    return Graph.from_edges(n, [(i, i + 1) for i in range(n - 1)], x)


def cycle_graph(n: int, features=None) -> Graph:
    x = np.eye(n) if features is None else features
    return Graph.from_edges(n, [(i, (i + 1) % n) for i in range(n)], x)


@pytest.fixture
def triangle_with_tail():
    # 0-1-2 треугольник, хвост 2-3
    edges = [(0, 1), (0, 2), (1, 2), (2, 3)]
    graph = Graph.from_edges(4, edges, np.eye(4))
    labels = LabelData(labels=[0, 0, 1, 1], k_classes=2, train_idx=[0, 3], test_idx=[1, 2])
    return graph, labels


@pytest.fixture
def small_sbm():
    return generate_sbm(40, 2, 0.4, 0.05, seed=3)


@pytest.fixture
def tiny_sbm():
    return generate_sbm(16, 2, 0.6, 0.1, seed=1, train_fraction=0.25)
