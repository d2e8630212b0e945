"""Boundary-matrix reduction over the two-element field.

Columns are Python ints used as bitsets: bit ``i`` is set when cell ``i`` (in
filtration order) is a face of the column's cell.  XOR is column addition
and ``bit_length() - 1`` is the pivot ("low") row.
"""

from __future__ import annotations

from typing import Sequence


def reduce_boundary(columns: Sequence[int], dims: Sequence[int], clearing: bool = True):
    """Reduce a filtered boundary matrix and return its persistence pairing.

    ``columns[j]`` is the boundary of the ``j``-th cell in filtration order and
    ``dims[j]`` its dimension.  Returns ``(pairs, essential)`` where ``pairs``
    lists ``(birth_index, death_index)`` and ``essential`` lists indices of
    cells whose class never dies, both sorted.

    With ``clearing`` the top dimension is reduced first and every pivot row
    found there is zeroed in the next dimension down without any work; the
    pairing is identical to the plain left-to-right reduction.
    """
    n = len(columns)
    reduced = {}
    pivot_of = {}
    pairs = []
    if clearing:
        by_dim: dict[int, list[int]] = {}
        for j in range(n):
            by_dim.setdefault(dims[j], []).append(j)
        passes = [by_dim[d] for d in sorted(by_dim, reverse=True)]
    else:
        passes = [range(n)]

    cleared = set()
    for order in passes:
        for j in order:
            if j in cleared:
                continue
            col = columns[j]
            while col:
                low = col.bit_length() - 1
                k = pivot_of.get(low)
                if k is None:
                    break
                col ^= reduced[k]
            if col:
                low = col.bit_length() - 1
                reduced[j] = col
                pivot_of[low] = j
                pairs.append((low, j))
                if clearing:
                    cleared.add(low)

    births = set(pivot_of)
    deaths = set(reduced)
    essential = [j for j in range(n) if j not in births and j not in deaths]
    pairs.sort()
    return pairs, essential
