"""
The trained network read as an oblique decision tree.

Every hidden unit is a split `w . input + b >= 0` over the raw covariates and
the activations of all earlier layers. Because each layer reads every earlier
activation, all paths share the same downstream hyperplanes and the tree is
stored as a chain of split levels; `expand_tree` unrolls the chain into the
explicit binary tree for small trees.
"""

import dataclasses
import json
import logging
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from nsotree.errors import NoEventsError, SchemaError
from nsotree.network import NSOTreeParams, layer_input_dim
from nsotree.survival import SurvivalDataset, log_rank_test
from nsotree.typing import ExportFormat
from nsotree.utils import format_float

logger = logging.getLogger(__name__)

FORMAT = "nsotree-tree"
VERSION = 1
MAX_EXPANDED_SPLITS = 12


@dataclasses.dataclass(frozen=True, eq=False)
class ObliqueSplit:
    layer: int
    """
    1-based network layer the split comes from.
    """

    unit: int
    """
    0-based unit within the layer.
    """

    weights: np.ndarray
    """
    Weights over concat[x, earlier activations], length d + (layer - 1) d_h.
    """

    bias: float

    @property
    def threshold(self) -> float:
        """
        The split sends an input to the "on" branch when w . input >= threshold.
        """

        return -self.bias


@dataclasses.dataclass(frozen=True)
class SplitAnnotation:
    n_on: int
    n_off: int
    statistic: Optional[float] = None
    p_value: Optional[float] = None

    degenerate: bool = False
    """
    A branch is empty or has no events, so no test was run.
    """


@dataclasses.dataclass(frozen=True, eq=False)
class ObliqueTree:
    splits: Tuple[ObliqueSplit, ...]
    """
    One split per (layer, unit), layer-major.
    """

    leaf_weights: Optional[np.ndarray]
    """
    Leaf model over concat[x, all activations]. `None` on a truncated view.
    """

    leaf_bias: float
    input_dim: int
    hidden_dim: int
    depth: int
    feature_names: Tuple[str, ...]
    """
    Covariate names, length d.
    """

    annotations: Optional[Tuple[SplitAnnotation, ...]] = None

    def __post_init__(self) -> None:
        if len(self.splits) != self.depth * self.hidden_dim:
            raise ValueError("A tree has exactly one split per layer unit")
        if len(self.feature_names) != self.input_dim:
            raise ValueError("There must be one feature name per covariate")
        if self.annotations is not None and len(self.annotations) != len(self.splits):
            raise ValueError("Annotations must cover every split")

    def input_names(self, layer: int) -> List[str]:
        """
        Names of the inputs of splits in `layer`.
        """

        names = list(self.feature_names)
        for l in range(1, layer):
            names.extend(activation_name(l, j) for j in range(self.hidden_dim))
        return names

    def layer_splits(self, layer: int) -> Tuple[ObliqueSplit, ...]:
        start = (layer - 1) * self.hidden_dim
        return self.splits[start : start + self.hidden_dim]


def activation_name(layer: int, unit: int) -> str:
    return f"a{layer}_{unit}"


def extract_tree(
    params: NSOTreeParams, feature_names: Optional[Sequence[str]] = None
) -> ObliqueTree:
    """
    Read every hidden unit of `params` as a split, copying its weights and
    bias, and the output head as the leaf model.
    """

    names = tuple(feature_names or (f"x{i}" for i in range(params.input_dim)))
    splits = [
        ObliqueSplit(layer=l, unit=j, weights=w[j].copy(), bias=float(b[j]))
        for l, (w, b) in enumerate(zip(params.weights, params.biases), start=1)
        for j in range(params.hidden_dim)
    ]
    return ObliqueTree(
        splits=tuple(splits),
        leaf_weights=params.head_weights.copy(),
        leaf_bias=params.head_bias,
        input_dim=params.input_dim,
        hidden_dim=params.hidden_dim,
        depth=params.depth,
        feature_names=names,
    )


def truncate(tree: ObliqueTree, layers: int) -> ObliqueTree:
    """
    View of the first `layers` layers. The leaf model is dropped unless every
    layer is kept.
    """

    if layers < 1:
        raise ValueError("At least one layer must be kept")
    if layers >= tree.depth:
        return tree

    keep = layers * tree.hidden_dim
    return dataclasses.replace(
        tree,
        splits=tree.splits[:keep],
        leaf_weights=None,
        leaf_bias=0.0,
        depth=layers,
        annotations=None if tree.annotations is None else tree.annotations[:keep],
    )


def route_batch(tree: ObliqueTree, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Route every row of `x` down the tree.

    Returns the patterns, shape (n, L d_h), and the leaf values. The arithmetic
    is the network's ReLU forward pass, so both agree exactly.
    """

    if tree.leaf_weights is None:
        raise ValueError("A truncated tree has no leaf model")

    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x.reshape(1, -1)
    if x.ndim != 2 or x.shape[1] != tree.input_dim:
        raise ValueError(f"Expected covariates with {tree.input_dim} columns, got shape {x.shape}")

    d, dh = tree.input_dim, tree.hidden_dim
    features = np.empty((x.shape[0], layer_input_dim(d, dh, tree.depth + 1)))
    features[:, :d] = x
    patterns = np.empty((x.shape[0], tree.depth * dh), dtype=bool)

    for layer in range(1, tree.depth + 1):
        splits = tree.layer_splits(layer)
        w = np.vstack([s.weights for s in splits])
        b = np.array([s.bias for s in splits])

        fan_in = layer_input_dim(d, dh, layer)
        z = features[:, :fan_in] @ w.T + b
        on = z >= 0
        patterns[:, (layer - 1) * dh : layer * dh] = on
        features[:, fan_in : fan_in + dh] = np.maximum(z, 0.0)

    values = features @ tree.leaf_weights + tree.leaf_bias
    return patterns, values


def route(tree: ObliqueTree, x: np.ndarray) -> Tuple[np.ndarray, float]:
    """
    Pattern of one covariate vector (which branch each split sends it to) and
    the value of the leaf it reaches.
    """

    patterns, values = route_batch(tree, np.asarray(x, dtype=np.float64).reshape(1, -1))
    return patterns[0], float(values[0])


def annotate_splits(tree: ObliqueTree, dataset: SurvivalDataset) -> ObliqueTree:
    """
    Partition `dataset` by each split's test and attach the log-rank
    comparison of the two branches. Splits with an empty branch, or with no
    events in either branch, are marked degenerate.
    """

    if len(dataset) == 0:
        raise ValueError("Annotation needs a nonempty dataset")

    if tree.leaf_weights is None:
        raise ValueError("Annotate the full tree before truncating it")

    patterns, _ = route_batch(tree, dataset.x)

    annotations = []
    for k in range(len(tree.splits)):
        on = patterns[:, k]
        n_on, n_off = int(on.sum()), int((~on).sum())
        if n_on == 0 or n_off == 0:
            logger.debug("Split %d sends every record one way", k)
            annotations.append(SplitAnnotation(n_on, n_off, degenerate=True))
            continue

        try:
            statistic, p_value = log_rank_test(
                dataset.time[on], dataset.event[on], dataset.time[~on], dataset.event[~on]
            )
        except NoEventsError:
            logger.debug("Split %d has no events in either branch", k)
            annotations.append(SplitAnnotation(n_on, n_off, degenerate=True))
            continue

        annotations.append(SplitAnnotation(n_on, n_off, statistic, p_value))

    return dataclasses.replace(tree, annotations=tuple(annotations))


@dataclasses.dataclass(frozen=True, eq=False)
class ExpandedLeaf:
    pattern: Tuple[bool, ...]
    weights: np.ndarray
    """
    Effective linear risk model over the raw covariates in this region.
    """

    bias: float


@dataclasses.dataclass(frozen=True, eq=False)
class ExpandedNode:
    split: int
    """
    Index of the chain split this node instantiates.
    """

    pattern: Tuple[bool, ...]
    """
    Branches taken by the ancestors.
    """

    weights: np.ndarray
    """
    Effective hyperplane over the raw covariates given the ancestors' branches.
    """

    bias: float
    on: Union["ExpandedNode", ExpandedLeaf]
    off: Union["ExpandedNode", ExpandedLeaf]


def expand_tree(tree: ObliqueTree) -> Union[ExpandedNode, ExpandedLeaf]:
    """
    Unroll the chain into the explicit binary tree. Along any path every
    activation is either off (zero) or equal to its affine pre-activation, so
    each node is an oblique split over the raw covariates alone and each leaf
    an affine risk model.
    """

    if len(tree.splits) > MAX_EXPANDED_SPLITS:
        raise ValueError(f"Expansion is limited to {MAX_EXPANDED_SPLITS} splits")
    if tree.leaf_weights is None:
        raise ValueError("A truncated tree has no leaf model")

    d = tree.input_dim
    leaf_weights = tree.leaf_weights

    def compose(w: np.ndarray, b: float, maps: List[Tuple[np.ndarray, float]]) -> Tuple[np.ndarray, float]:
        coef = w[:d].copy()
        const = b
        for weight, (m_coef, m_const) in zip(w[d:], maps):
            coef += weight * m_coef
            const += weight * m_const
        return coef, float(const)

    def build(k: int, maps: List[Tuple[np.ndarray, float]], pattern: Tuple[bool, ...]) -> Union[ExpandedNode, ExpandedLeaf]:
        if k == len(tree.splits):
            coef, const = compose(leaf_weights, tree.leaf_bias, maps)
            return ExpandedLeaf(pattern=pattern, weights=coef, bias=const)

        split = tree.splits[k]
        visible = layer_input_dim(d, tree.hidden_dim, split.layer) - d
        coef, const = compose(split.weights, split.bias, maps[:visible])
        off_map = (np.zeros(d), 0.0)
        return ExpandedNode(
            split=k,
            pattern=pattern,
            weights=coef,
            bias=const,
            on=build(k + 1, maps + [(coef, const)], pattern + (True,)),
            off=build(k + 1, maps + [off_map], pattern + (False,)),
        )

    return build(0, [], ())


def route_expanded(root: Union[ExpandedNode, ExpandedLeaf], x: np.ndarray) -> ExpandedLeaf:
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    node = root
    while isinstance(node, ExpandedNode):
        node = node.on if float(node.weights @ x) + node.bias >= 0 else node.off
    return node


def _split_dict(tree: ObliqueTree, k: int) -> Dict[str, Any]:
    split = tree.splits[k]
    data: Dict[str, Any] = {
        "layer": split.layer,
        "unit": split.unit,
        "weights": split.weights.tolist(),
        "bias": split.bias,
    }
    if tree.annotations is not None:
        data["annotation"] = dataclasses.asdict(tree.annotations[k])
    return data


def _to_json(tree: ObliqueTree) -> str:
    data = {
        "format": FORMAT,
        "version": VERSION,
        "input_dim": tree.input_dim,
        "hidden_dim": tree.hidden_dim,
        "depth": tree.depth,
        "feature_names": list(tree.feature_names),
        "splits": [_split_dict(tree, k) for k in range(len(tree.splits))],
        "leaf": None
        if tree.leaf_weights is None
        else {"weights": tree.leaf_weights.tolist(), "bias": tree.leaf_bias},
    }
    return json.dumps(data, indent=2, sort_keys=True) + "\n"


def _weight_bars(names: Sequence[str], weights: np.ndarray) -> str:
    return ";".join(f"{n}={format_float(float(w))}" for n, w in zip(names, weights) if w != 0)


def _dot_label(lines: Sequence[str]) -> str:
    return "\\n".join(line.replace('"', '\\"') for line in lines)


def _to_dot(tree: ObliqueTree) -> str:
    lines = ["digraph nsotree {", "  node [shape=box];"]

    ids = [f"s{s.layer}_{s.unit}" for s in tree.splits]
    for k, split in enumerate(tree.splits):
        names = tree.input_names(split.layer)
        label = [f"layer {split.layer} unit {split.unit}"]
        label += [f"{n}: {w:.4g}" for n, w in zip(names, split.weights) if w != 0]
        label.append(f">= {split.threshold:.4g}")

        if tree.annotations is not None:
            a = tree.annotations[k]
            if a.degenerate:
                label.append(f"degenerate ({a.n_on} on / {a.n_off} off)")
            else:
                label.append(f"log-rank {a.statistic:.4g}, p={a.p_value:.3g}")
                label.append(f"{a.n_on} on / {a.n_off} off")

        lines.append(
            f'  {ids[k]} [label="{_dot_label(label)}", '
            f'weights="{_weight_bars(names, split.weights)}"];'
        )

    if tree.leaf_weights is not None:
        names = tree.input_names(tree.depth + 1)
        label = ["leaf", *(f"{n}: {w:.4g}" for n, w in zip(names, tree.leaf_weights) if w != 0)]
        lines.append(
            f'  leaf [shape=ellipse, label="{_dot_label(label)}", '
            f'weights="{_weight_bars(names, tree.leaf_weights)}"];'
        )
        targets = ids[1:] + ["leaf"]
    else:
        lines.append('  more [shape=plaintext, label="deeper layers omitted"];')
        targets = ids[1:] + ["more"]

    for source, target in zip(ids, targets):
        lines.append(f'  {source} -> {target} [label="on"];')
        lines.append(f'  {source} -> {target} [label="off"];')

    lines.append("}")
    return "\n".join(lines) + "\n"


def expanded_to_dot(tree: ObliqueTree) -> str:
    """
    Graph description of the fully expanded tree.
    """

    root = expand_tree(tree)
    names = list(tree.feature_names)
    lines = ["digraph nsotree_expanded {", "  node [shape=box];"]
    counter = [0]

    def visit(node: Union[ExpandedNode, ExpandedLeaf]) -> str:
        node_id = f"n{counter[0]}"
        counter[0] += 1
        if isinstance(node, ExpandedLeaf):
            label = ["leaf", *(f"{n}: {w:.4g}" for n, w in zip(names, node.weights) if w != 0)]
            label.append(f"bias: {node.bias:.4g}")
            lines.append(f'  {node_id} [shape=ellipse, label="{_dot_label(label)}"];')
            return node_id

        split = tree.splits[node.split]
        label = [f"layer {split.layer} unit {split.unit}"]
        label += [f"{n}: {w:.4g}" for n, w in zip(names, node.weights) if w != 0]
        label.append(f">= {-node.bias:.4g}")
        lines.append(f'  {node_id} [label="{_dot_label(label)}"];')
        on_id = visit(node.on)
        off_id = visit(node.off)
        lines.append(f'  {node_id} -> {on_id} [label="on"];')
        lines.append(f'  {node_id} -> {off_id} [label="off"];')
        return node_id

    visit(root)
    lines.append("}")
    return "\n".join(lines) + "\n"


def export_tree(
    tree: ObliqueTree,
    fmt: ExportFormat = "json",
    layers: Optional[int] = None,
    expand: bool = False,
) -> str:
    """
    Render a tree as text.

    :param fmt: `"dot"` for a graph description, `"json"` for the structured
        text `parse_tree` reads back.
    :param layers: Keep only the first `layers` layers.
    :param expand: With `"dot"`, draw the fully expanded binary tree instead
        of the chain.
    """

    if layers is not None:
        tree = truncate(tree, layers)

    if fmt == "json":
        return _to_json(tree)
    elif fmt == "dot":
        return expanded_to_dot(tree) if expand else _to_dot(tree)
    else:
        raise ValueError(f"Unknown export format {fmt!r}")


def parse_tree(text: str) -> ObliqueTree:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise SchemaError(f"Tree export is not valid JSON: {e}", line=e.lineno) from e

    if data.get("format") != FORMAT:
        raise SchemaError("Not an nsotree tree export")
    if data.get("version") != VERSION:
        raise SchemaError(f"Unsupported tree export version {data.get('version')!r}")

    try:
        splits = tuple(
            ObliqueSplit(
                layer=int(s["layer"]),
                unit=int(s["unit"]),
                weights=np.array(s["weights"], dtype=np.float64),
                bias=float(s["bias"]),
            )
            for s in data["splits"]
        )
        annotated = [s for s in data["splits"] if "annotation" in s]
        annotations = (
            tuple(SplitAnnotation(**s["annotation"]) for s in data["splits"])
            if annotated
            else None
        )
        leaf = data["leaf"]
        return ObliqueTree(
            splits=splits,
            leaf_weights=None if leaf is None else np.array(leaf["weights"], dtype=np.float64),
            leaf_bias=0.0 if leaf is None else float(leaf["bias"]),
            input_dim=int(data["input_dim"]),
            hidden_dim=int(data["hidden_dim"]),
            depth=int(data["depth"]),
            feature_names=tuple(data["feature_names"]),
            annotations=annotations,
        )
    except (KeyError, TypeError, ValueError) as e:
        raise SchemaError(f"Malformed tree export: {e}") from e
