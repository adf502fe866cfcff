"""Sparse directed graphs, edge-list and attribute-table ingestion, degrees.

Graphs are simple and directed: no self-loops, no duplicate edges. Node
indices are dense integers in ``[0, n_nodes)``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ParseError


class DirectedGraph:
    """Immutable sparse directed graph with per-node sorted adjacency.

    Parameters
    ----------
    n_nodes : int
        Number of nodes. May exceed the largest endpoint index (isolated
        trailing nodes are allowed).
    edges : iterable of (src, dst)
        Ordered pairs. Self-loops and duplicates are dropped; the dropped
        totals are kept on `dropped_self_loops` / `dropped_duplicates`.
    """

    def __init__(self, n_nodes, edges=()):
        n_nodes = int(n_nodes)
        if n_nodes < 0:
            raise ValueError("n_nodes must be >= 0")
        self.n_nodes = n_nodes

        seen = set()
        self.dropped_self_loops = 0
        self.dropped_duplicates = 0
        for src, dst in edges:
            src = int(src)
            dst = int(dst)
            if not (0 <= src < n_nodes and 0 <= dst < n_nodes):
                raise ValueError(f"edge ({src}, {dst}) outside [0, {n_nodes})")
            if src == dst:
                self.dropped_self_loops += 1
                continue
            if (src, dst) in seen:
                self.dropped_duplicates += 1
                continue
            seen.add((src, dst))

        if seen:
            arr = np.array(sorted(seen), dtype=np.int64)
        else:
            arr = np.empty((0, 2), dtype=np.int64)
        self._edge_array = arr
        self._edge_set = seen

        out_nbrs = [[] for _ in range(n_nodes)]
        in_nbrs = [[] for _ in range(n_nodes)]
        for src, dst in arr:
            out_nbrs[src].append(dst)
            in_nbrs[dst].append(src)
        self.out_adjacency = [np.array(sorted(js), dtype=np.int64) for js in out_nbrs]
        self.in_adjacency = [np.array(sorted(js), dtype=np.int64) for js in in_nbrs]

    @property
    def n_edges(self):
        return int(self._edge_array.shape[0])

    @property
    def edge_array(self):
        """E x 2 int array of (src, dst) rows, lexicographically sorted."""
        return self._edge_array

    @property
    def edges(self):
        return self._edge_set

    def has_edge(self, src, dst):
        return (src, dst) in self._edge_set

    def out_degree(self):
        return np.array([len(a) for a in self.out_adjacency], dtype=np.int64)

    def in_degree(self):
        return np.array([len(a) for a in self.in_adjacency], dtype=np.int64)

    def dense_adjacency(self):
        """Dense 0/1 adjacency matrix (desk scale only)."""
        a = np.zeros((self.n_nodes, self.n_nodes), dtype=np.float64)
        if self.n_edges:
            a[self._edge_array[:, 0], self._edge_array[:, 1]] = 1.0
        return a

    def __repr__(self):
        return f"DirectedGraph(n_nodes={self.n_nodes}, n_edges={self.n_edges})"


@dataclass
class AttributeTable:
    """Real-valued per-node attribute columns with explicit missing cells."""

    column_names: list[str]
    values: np.ndarray  # (n_nodes, n_columns), NaN where missing
    missing: np.ndarray = field(default=None)  # bool mask, same shape

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ValueError("values must be 2-D")
        if self.values.shape[1] != len(self.column_names):
            raise ValueError("column count mismatch between names and values")
        if self.missing is None:
            self.missing = np.isnan(self.values)
        self.missing = np.asarray(self.missing, dtype=bool)
        if self.missing.shape != self.values.shape:
            raise ValueError("missing mask shape mismatch")
        fully_missing = self.missing.all(axis=0)
        if self.values.shape[0] and fully_missing.any():
            bad = self.column_names[int(np.argmax(fully_missing))]
            raise ValueError(f"column '{bad}' has no non-missing values")

    @property
    def n_nodes(self):
        return self.values.shape[0]

    @property
    def n_columns(self):
        return self.values.shape[1]

    def column_index(self, name):
        try:
            return self.column_names.index(name)
        except ValueError:
            raise KeyError(f"no column named '{name}'") from None


@dataclass
class BinaryAttributeMatrix:
    """N x L matrix of {0, 1} attribute values."""

    bits: np.ndarray

    def __post_init__(self):
        self.bits = np.asarray(self.bits)
        if self.bits.ndim != 2:
            raise ValueError("bits must be 2-D")
        if self.bits.size and not np.isin(self.bits, (0, 1)).all():
            raise ValueError("bits must contain only 0 and 1")
        self.bits = self.bits.astype(np.int8)

    @property
    def n_nodes(self):
        return self.bits.shape[0]

    @property
    def n_attrs(self):
        return self.bits.shape[1]


def parse_edge_list(text):
    """Parse a line-oriented edge list into a DirectedGraph.

    Lines are ``"src dst"`` with non-negative integers; ``#`` starts a
    comment line. An optional header ``# nodes: N`` overrides the node
    count (otherwise N = 1 + max index seen). Self-loops and duplicate
    edges are dropped with a counted warning.
    """
    n_override = None
    pairs = []
    max_index = -1
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if body.lower().startswith("nodes:"):
                value = body.split(":", 1)[1].strip()
                try:
                    n_override = int(value)
                except ValueError:
                    raise ParseError(f"bad node-count header {value!r}", line=lineno)
                if n_override < 0:
                    raise ParseError("node-count header must be >= 0", line=lineno)
            continue
        tokens = line.split()
        if len(tokens) != 2:
            raise ParseError(f"expected 'src dst', got {raw!r}", line=lineno)
        try:
            src, dst = int(tokens[0]), int(tokens[1])
        except ValueError:
            raise ParseError(f"non-integer endpoint in {raw!r}", line=lineno)
        if src < 0 or dst < 0:
            raise ParseError(f"negative node index in {raw!r}", line=lineno)
        pairs.append((src, dst))
        max_index = max(max_index, src, dst)

    n_nodes = max_index + 1
    if n_override is not None:
        if n_override < n_nodes:
            raise ParseError(
                f"header declares {n_override} nodes but index {max_index} appears"
            )
        n_nodes = n_override

    graph = DirectedGraph(n_nodes, pairs)
    dropped = graph.dropped_self_loops + graph.dropped_duplicates
    if dropped:
        warnings.warn(
            f"dropped {graph.dropped_self_loops} self-loop(s) and "
            f"{graph.dropped_duplicates} duplicate edge(s)",
            stacklevel=2,
        )
    return graph


def serialize_edge_list(graph):
    """Canonical text form: node-count header then sorted unique edges."""
    lines = [f"# nodes: {graph.n_nodes}"]
    lines.extend(f"{src} {dst}" for src, dst in graph.edge_array)
    return "\n".join(lines) + "\n"


def parse_attribute_table(text, expected_nodes=None):
    """Parse a comma-delimited attribute table (header row, one row per node).

    Empty cells mark missing values. A row count differing from
    `expected_nodes` (when given) is a structural error.
    """
    lines = [line for line in text.splitlines() if line.strip()]
    if not lines:
        raise ParseError("attribute table has no header row")
    names = [name.strip() for name in lines[0].split(",")]
    rows = []
    for lineno, raw in enumerate(lines[1:], start=2):
        cells = raw.split(",")
        if len(cells) != len(names):
            raise ParseError(
                f"expected {len(names)} cells, got {len(cells)}", line=lineno
            )
        row = []
        for col, cell in enumerate(cells):
            cell = cell.strip()
            if not cell:
                row.append(np.nan)
                continue
            try:
                row.append(float(cell))
            except ValueError:
                raise ParseError(
                    f"non-numeric cell {cell!r} in column '{names[col]}'",
                    line=lineno,
                )
        rows.append(row)

    if expected_nodes is not None and len(rows) != expected_nodes:
        raise ParseError(
            f"attribute table has {len(rows)} rows, expected {expected_nodes}"
        )
    values = np.array(rows, dtype=np.float64).reshape(len(rows), len(names))
    return AttributeTable(column_names=names, values=values)


def lower_median(values):
    """Lower median of a non-empty 1-D array (element at index (m-1)//2)."""
    v = np.sort(np.asarray(values, dtype=np.float64))
    if v.size == 0:
        raise ValueError("median of empty array")
    return float(v[(v.size - 1) // 2])


def binarize_by_median(table, columns):
    """Binarize selected columns: 1 where value < column median, else 0.

    Missing cells are imputed as the column median, hence mapped to 0.
    The median is the lower median of the non-missing values.
    """
    cols = []
    for name in columns:
        idx = table.column_index(name)
        col = table.values[:, idx]
        present = ~table.missing[:, idx]
        if not present.any():
            raise ValueError(f"column '{name}' has no non-missing values")
        med = lower_median(col[present])
        bits = np.zeros(table.n_nodes, dtype=np.int8)
        bits[present] = (col[present] < med).astype(np.int8)
        cols.append(bits)
    stacked = (
        np.stack(cols, axis=1) if cols else np.zeros((table.n_nodes, 0), dtype=np.int8)
    )
    return BinaryAttributeMatrix(bits=stacked)


def degree_counts(graph, direction):
    """Per-node in- or out-degree sequence of length n_nodes."""
    if direction == "out":
        return graph.out_degree()
    if direction == "in":
        return graph.in_degree()
    raise ValueError(f"direction must be 'in' or 'out', got {direction!r}")
