import pytest

from basts.cfg import Cfg, CfgNode, NodeKind
from basts.frontend import abstract_literals, parse_method, tokenize

# A method with a for loop and two nested conditionals; its dominator tree
# partitions into six blocks connected by five successor edges.
IDLE_CONNECTIONS_SOURCE = """
void closeIdleConnections(long timeMillis) {
    long idleTimeout = System.currentTimeMillis() - timeMillis;
    for (int i = 0; i < connections.size(); i = i + 1) {
        HttpConnection conn = connections.get(i);
        if (conn.getLastUse() < idleTimeout) {
            if (conn.isOpen()) {
                conn.close();
            } else {
                conn.shutdown();
            }
            conn.setLastUse(timeMillis);
        }
    }
}
"""

DIAMOND_SOURCE = "void f() { if (c) { a; } else { b; } d; }"

STRAIGHT_LINE_SOURCE = """
int sum3(int a, int b, int c) {
    int t = a + b;
    t = t + c;
    return t;
}
"""


def parse_source(source: str):
    return parse_method(abstract_literals(tokenize(source)))


def make_cfg(n_nodes, edges, entry=0, exit_=None):
    """Assemble a Cfg directly; node 0 is start, the last node is end."""
    exit_ = n_nodes - 1 if exit_ is None else exit_
    nodes = []
    for i in range(n_nodes):
        if i == entry:
            nodes.append(CfgNode(i, NodeKind.START))
        elif i == exit_:
            nodes.append(CfgNode(i, NodeKind.END))
        else:
            nodes.append(CfgNode(i, NodeKind.STMT, i))
    return Cfg(nodes, list(edges), entry, exit_)


def random_reachable_cfg(rng, max_nodes=15):
    """Random digraph where every node is reachable from the entry."""
    n = int(rng.integers(2, max_nodes + 1))
    edges = set()
    for v in range(1, n):
        u = int(rng.integers(0, v))
        edges.add((u, v))
    extra = int(rng.integers(0, 2 * n))
    for _ in range(extra):
        a, b = int(rng.integers(0, n)), int(rng.integers(0, n))
        if a != b:
            edges.add((a, b))
    return make_cfg(n, sorted(edges))


@pytest.fixture
def idle_method():
    return parse_source(IDLE_CONNECTIONS_SOURCE)


@pytest.fixture
def diamond_method():
    return parse_source(DIAMOND_SOURCE)


@pytest.fixture
def straight_method():
    return parse_source(STRAIGHT_LINE_SOURCE)
