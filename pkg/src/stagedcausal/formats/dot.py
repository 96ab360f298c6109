"""DOT export of staged trees: one node per retained context and leaf, coloured by stage."""

from typing import Dict, Iterable, Optional, Set, Tuple

import pydot
import structlog

from ..trees.models import Prefix, StagedTreeModel

log = structlog.get_logger()

PALETTE = (
    "#8dd3c7",
    "#ffffb3",
    "#bebada",
    "#fb8072",
    "#80b1d3",
    "#fdb462",
    "#b3de69",
    "#fccde5",
    "#d9d9d9",
    "#bc80bd",
    "#ccebc5",
    "#ffed6f",
)
# used in turn once a variable has more stages than palette colours
SHAPES = ("circle", "box", "diamond", "hexagon", "octagon", "triangle")

HIGHLIGHT_COLOR = "red"


def node_name(prefix: Prefix) -> str:
    return "n" + "".join(f"_{c}" for c in prefix)


def stage_style(position: int) -> Tuple[str, str, Optional[int]]:
    """(fill colour, shape, number) for the stage at a sorted position.

    Stages past the palette length reuse colours, change shape and carry
    their number in the label so they stay distinguishable.
    """
    color = PALETTE[position % len(PALETTE)]
    cycle = position // len(PALETTE)
    shape = SHAPES[cycle % len(SHAPES)]
    return color, shape, (position + 1 if cycle else None)


def stage_sort_key(sid: str) -> Tuple[int, int, str]:
    """Numeric ids in numeric order, then the rest alphabetically."""
    if sid.isdigit():
        return 0, int(sid), sid
    return 1, 0, sid


def stage_positions(ids: Iterable[str]) -> Dict[str, int]:
    """Palette position of every stage id, by ``stage_sort_key``."""
    return {sid: k for k, sid in enumerate(sorted(set(ids), key=stage_sort_key))}


def _fmt(x: float) -> str:
    return f"{x:.3g}"


def _q(text: str) -> str:
    return "\"" + text.replace("\"", "\\\"") + "\""


def export_dot(
    model: StagedTreeModel,
    show_probs: bool = False,
    highlight: Optional[Iterable[Tuple[int, Prefix]]] = None,
) -> str:
    """Render ``model`` as DOT text.

    ``highlight`` lists ``(variable index, context)`` pairs drawn with a red
    border (positivity violations). Pruned contexts are omitted.
    """
    tree = model.tree
    flagged: Set[Tuple[int, Prefix]] = {(i, tuple(c)) for i, c in highlight or ()}
    graph = pydot.Dot("staged_tree", graph_type="digraph", rankdir="LR")
    graph.set_node_defaults(style="filled", fontsize="10")

    for i in range(tree.p):
        var = tree.variables[i]
        positions = stage_positions(model.staging.stage_ids(i))
        for prefix in tree.contexts(i):
            sid = model.staging.stage_of(i, prefix)
            color, shape, number = stage_style(positions[sid])
            label = var.name if number is None else f"{var.name} [{number}]"
            if show_probs:
                label += "\\n" + ", ".join(_fmt(x) for x in model.parameters[i][sid])
            attrs = {"label": _q(label), "fillcolor": f'"{color}"', "shape": shape}
            if model.is_undefined(i, sid):
                attrs["style"] = '"filled,dashed"'
            if (i, prefix) in flagged:
                attrs["color"] = HIGHLIGHT_COLOR
                attrs["penwidth"] = "3"
            graph.add_node(pydot.Node(node_name(prefix), **attrs))

    for leaf in tree.leaves():
        graph.add_node(pydot.Node(node_name(leaf), label='""', shape="point", fillcolor="black"))

    for i in range(tree.p):
        var = tree.variables[i]
        for prefix in tree.contexts(i):
            vec = model.vector(i, prefix)
            for code, level in enumerate(var.levels):
                child = prefix + (code,)
                if not tree.is_retained(i + 1, child):
                    continue
                label = level if not show_probs else f"{level} ({_fmt(vec[code])})"
                graph.add_edge(pydot.Edge(node_name(prefix), node_name(child), label=_q(label)))

    log.debug("dot.exported", contexts=sum(tree.n_contexts(i) for i in range(tree.p)), leaves=tree.n_leaves)
    return graph.to_string()
