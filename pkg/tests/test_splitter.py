from basts.cfg import build_cfg
from basts.dominators import compute_dominators
from basts.frontend import StmtKind, build_ast, iter_nodes
from basts.splitter import make_split_code, partition_blocks, split_method
from conftest import parse_source


def labels(root):
    return [n.type_value() for n in iter_nodes(root)]


class TestPartitionBlocks:
    def test_straight_line_single_split(self, straight_method):
        result = split_method(straight_method)
        assert len(result.graph.splits) == 1
        assert result.graph.successor_edges == []

    def test_diamond_four_splits(self, diamond_method):
        graph = split_method(diamond_method).graph
        assert len(graph.splits) == 4
        sizes = [len(s.statements) for s in graph.splits]
        assert sizes == [1, 1, 1, 1]
        assert graph.successor_edges == [(0, 1), (0, 2), (0, 3)]

    def test_idle_connections_six_splits_five_edges(self, idle_method):
        graph = split_method(idle_method).graph
        assert len(graph.splits) == 6
        assert len(graph.successor_edges) == 5

    def test_coverage_and_disjointness(self, idle_method, diamond_method):
        for method in (idle_method, diamond_method):
            cfg = build_cfg(method)
            graph = partition_blocks(compute_dominators(cfg), cfg)
            seen = []
            for split in graph.splits:
                seen.extend(split.statements)
            expected = sorted(
                s.stmt_id
                for s in method.statements.values()
                if s.kind is not StmtKind.BLOCK
            )
            assert sorted(seen) == expected
            assert len(seen) == len(set(seen))

    def test_successor_edges_acyclic(self, idle_method):
        graph = split_method(idle_method).graph
        order = _topological(len(graph.splits), graph.successor_edges)
        assert order is not None

    def test_adding_if_never_reduces_splits(self):
        base = parse_source("void f() { a = 1; b = 2; }")
        with_if = parse_source("void f() { a = 1; if (c) { x = 3; } b = 2; }")
        assert len(split_method(with_if).graph.splits) >= len(
            split_method(base).graph.splits
        )

    def test_deterministic(self, idle_method):
        g1 = split_method(idle_method).graph
        g2 = split_method(idle_method).graph
        assert [s.statements for s in g1.splits] == [s.statements for s in g2.splits]
        assert g1.successor_edges == g2.successor_edges


def _topological(n, edges):
    indeg = [0] * n
    for _, b in edges:
        indeg[b] += 1
    ready = [i for i in range(n) if indeg[i] == 0]
    order = []
    while ready:
        v = ready.pop()
        order.append(v)
        for a, b in edges:
            if a == v:
                indeg[b] -= 1
                if indeg[b] == 0:
                    ready.append(b)
    return order if len(order) == n else None


class TestMakeSplitCode:
    def test_empty_body_declaration_only(self):
        method = parse_source("void f() { }")
        result = split_method(method)
        (split,) = result.graph.splits
        tokens = make_split_code(split, method)
        assert [t.text for t in tokens] == ["void", "f", "(", ")"]

    def test_diamond_then_branch(self, diamond_method):
        graph = split_method(diamond_method).graph
        texts = [
            [t.text for t in make_split_code(s, diamond_method)]
            for s in graph.splits
        ]
        assert texts[1] == ["void", "f", "(", ")", "a", ";"]
        assert texts[2] == ["void", "f", "(", ")", "b", ";"]
        assert texts[0][4:] == ["if", "(", "c", ")", "{", "}"]

    def test_idle_first_split_keeps_loop_header(self, idle_method):
        graph = split_method(idle_method).graph
        first = " ".join(
            t.text for t in make_split_code(graph.splits[0], idle_method)
        )
        assert "for ( int i = <NUM> ; i < connections . size ( ) ; ) { }" in first
        assert "idleTimeout = System . currentTimeMillis ( ) - timeMillis" in first
        assert first.endswith("if ( conn . getLastUse ( ) < idleTimeout ) { }")

    def test_update_split_renders_standalone(self, idle_method):
        graph = split_method(idle_method).graph
        update_split = graph.splits[1]
        text = " ".join(t.text for t in make_split_code(update_split, idle_method))
        assert text.endswith("i = i + <NUM> ;")


class TestBuildSplitAsts:
    def test_one_ast_per_split(self, idle_method):
        result = split_method(idle_method)
        assert len(result.asts) == len(result.graph.splits) == 6
        fringes = [tuple(labels(a.root)) for a in result.asts]
        assert len(set(fringes)) == 6, "splits produce distinct trees"

    def test_single_split_equals_full_ast(self, straight_method):
        result = split_method(straight_method)
        (ast,) = result.asts
        assert labels(ast.root) == labels(build_ast(straight_method))

    def test_first_split_fringe_has_time_millis(self, idle_method):
        result = split_method(idle_method)
        assert "MemberReference_timeMillis" in labels(result.asts[0].root)

    def test_header_splits_reparse_with_empty_blocks(self, idle_method):
        result = split_method(idle_method)
        inner_if_split = result.asts[2]
        types = [n.node_type for n in iter_nodes(inner_if_split.root)]
        assert "IfStatement" in types
