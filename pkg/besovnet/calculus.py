"""
Besovnet network calculus

Scaling, summation, tupling, composition and affine pre-composition of networks with
the weight and depth accounting of the classical NN calculus:

    scale      W unchanged (or smaller), depth unchanged
    add        W ≤ Σ W_i + min{d1, d2}·(max depth − min depth), depth = max depth
    tuple      W ≤ Σ W_i + min{d, K−1}·(max depth − min depth), depth = max depth
    compose    W = W_1 + W_2, depth = depth_1 + depth_2
    precompose W and depth unchanged

Depth alignment routes a carrier of identity neurons through the layers the shallower
networks do not use. The carrier runs on the input side (d1 channels) or on the output
side (the finished outputs), whichever needs fewer weights.
"""

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from besovnet.errors import StructureError
from besovnet.network_ir import AffineMap, Layer, Network

logger = logging.getLogger(__name__)


def scale(c: float, net: Network) -> Network:
    """c·R(Φ): scales the final affine map; c = 0 yields a network with no weights."""
    c = float(c)
    if c == 0.0:
        layers = tuple(
            Layer(AffineMap.from_triplets(l.affine.rows, l.affine.cols, [], [], [], None), l.rect)
            for l in net.layers)
        return Network(net.input_dim, layers, net.r_class)
    last = net.layers[-1].affine
    layers = net.layers[:-1] + (Layer(last.with_values(last.values * c, last.bias * c)),)
    return Network(net.input_dim, layers, net.r_class)


def precompose_affine(net: Network, a: float, b) -> Network:
    """R(Φ) ∘ D_b^a with D_b^a(x) = a·x − b."""
    a = float(a)
    b = np.broadcast_to(np.asarray(b, dtype=float), (net.input_dim,))
    if a == 0.0:
        warnings.warn("precompose_affine with a = 0 makes the network constant", RuntimeWarning)
        logger.warning("precompose_affine called with a = 0")
    first = net.layers[0].affine
    shift = first.matrix @ b
    moved = first.with_values(first.values * a, first.bias - shift)
    layers = (Layer(moved, net.layers[0].rect),) + net.layers[1:]
    return Network(net.input_dim, layers, net.r_class)


def compose(inner: Network, outer: Network) -> Network:
    """
    R(Φ_outer) ∘ R(Φ_inner).

    The inner output map becomes a hidden layer of Identity neurons; adjacent affine maps
    are never multiplied out, so the weight count is exactly W(inner) + W(outer).
    """
    if inner.output_dim != outer.input_dim:
        raise StructureError(
            f"Cannot compose: inner gives {inner.output_dim} outputs, outer takes {outer.input_dim}")
    if inner.r_class != outer.r_class:
        raise StructureError(f"Cannot compose r={inner.r_class} with r={outer.r_class} networks")
    seam = Layer(inner.layers[-1].affine, np.zeros(inner.output_dim, dtype=bool))
    layers = inner.layers[:-1] + (seam,) + outer.layers
    return Network(inner.input_dim, layers, inner.r_class)


def add(*nets: Network) -> Network:
    """Σ_i R(Φ_i) for networks with common input and output dimensions."""
    nets = _flatten(nets)
    d1, d2 = nets[0].input_dim, nets[0].output_dim
    for net in nets:
        if (net.input_dim, net.output_dim) != (d1, d2):
            raise StructureError(
                f"Cannot add a {net.input_dim}->{net.output_dim} network to {d1}->{d2} networks")
    if len(nets) == 1:
        return nets[0]
    return _align(nets, stacked=False, shared_input=True)


def tuple_(*nets: Network) -> Network:
    """(R(Φ_1), …, R(Φ_N)) for networks with a common input dimension."""
    nets = _flatten(nets)
    d = nets[0].input_dim
    for net in nets:
        if net.input_dim != d:
            raise StructureError(f"Cannot tuple networks with input dims {d} and {net.input_dim}")
    if len(nets) == 1:
        return nets[0]
    return _align(nets, stacked=True, shared_input=True)


def parallel(*nets: Network) -> Network:
    """Block-diagonal juxtaposition: x = (x_1, …, x_N) ↦ (R(Φ_1)(x_1), …, R(Φ_N)(x_N))."""
    nets = _flatten(nets)
    if len(nets) == 1:
        return nets[0]
    return _align(nets, stacked=True, shared_input=False)


def add_balanced(nets: list[Network]) -> Network:
    """Pairwise-tree summation; keeps the intermediate networks small."""
    if not nets:
        raise StructureError("Nothing to add")
    level = list(nets)
    while len(level) > 1:
        level = [add(*level[i:i + 2]) for i in range(0, len(level), 2)]
    return level[0]


def add_bound(nets) -> int:
    """The weight bound for `add` given the summands."""
    depths = [n.depth for n in nets]
    spread = max(depths) - min(depths)
    return min(nets[0].input_dim, nets[0].output_dim) * spread + sum(_w(n) for n in nets)


def tuple_bound(nets) -> int:
    """The weight bound for `tuple_` given the components."""
    depths = [n.depth for n in nets]
    spread = max(depths) - min(depths)
    k = sum(n.output_dim for n in nets)
    return min(nets[0].input_dim, k - 1) * spread + sum(_w(n) for n in nets)


def _w(net: Network) -> int:
    return sum(layer.affine.nnz for layer in net.layers)


def _flatten(nets) -> list[Network]:
    if len(nets) == 1 and isinstance(nets[0], (list, tuple)):
        nets = nets[0]
    nets = list(nets)
    if not nets:
        raise StructureError("At least one network is required")
    r = nets[0].r_class
    if any(n.r_class != r for n in nets):
        raise StructureError("Networks of different r_class cannot be combined")
    return nets


# --- Depth alignment ---

@dataclass
class _LayerBuilder:
    """Collects triplets of one affine map and the activation flags of its rows."""
    cols: int
    rows: int = 0
    ri: list = field(default_factory=list)
    ci: list = field(default_factory=list)
    vi: list = field(default_factory=list)
    bias: list = field(default_factory=list)
    rect: list = field(default_factory=list)

    def new_rows(self, n: int, rect=None) -> int:
        start = self.rows
        self.rows += n
        self.rect.append(np.zeros(n, dtype=bool) if rect is None else np.asarray(rect, dtype=bool))
        return start

    def put(self, affine: AffineMap, row_of, col_offset: int):
        """Copy `affine` with its rows mapped through `row_of` and columns shifted."""
        self.ri.append(row_of[affine.row_idx])
        self.ci.append(affine.col_idx + col_offset)
        self.vi.append(affine.values)
        bias = np.zeros(self.rows)
        np.add.at(bias, row_of, affine.bias)
        self.bias.append(bias)

    def route(self, src_offset: int, dst_offset: int, n: int):
        idx = np.arange(n)
        self.ri.append(dst_offset + idx)
        self.ci.append(src_offset + idx)
        self.vi.append(np.ones(n))

    def build(self, last: bool) -> Layer:
        bias = np.zeros(self.rows)
        for part in self.bias:
            bias[:len(part)] += part
        cat = lambda parts, dtype: (np.concatenate(parts).astype(dtype) if parts
                                    else np.zeros(0, dtype=dtype))
        affine = AffineMap.from_triplets(self.rows, self.cols, cat(self.ri, np.int64),
                                         cat(self.ci, np.int64), cat(self.vi, float), bias)
        rect = None if last else (np.concatenate(self.rect) if self.rect else np.zeros(0, dtype=bool))
        return Layer(affine, rect)


def _align(nets: list[Network], stacked: bool, shared_input: bool) -> Network:
    depths = [n.depth for n in nets]
    top = max(depths)
    spread = top - min(depths)
    in_dims = [n.input_dim for n in nets]
    out_dims = [n.output_dim for n in nets]
    input_dim = in_dims[0] if shared_input else sum(in_dims)
    output_dim = sum(out_dims) if stacked else out_dims[0]

    # carrier cost on either side
    input_cost = sum(in_dims[i] * (top - depths[i]) for i in range(len(nets))) \
        if not shared_input else input_dim * spread
    if stacked:
        output_cost = sum(out_dims[i] * (top - depths[i]) for i in range(len(nets)))
    else:
        output_cost = output_dim * spread
    use_input_side = shared_input and input_cost < output_cost
    logger.debug("aligning %d networks (depths %s) on the %s side", len(nets), depths,
                 'input' if use_input_side else 'output')
    if use_input_side:
        layers = _align_input_side(nets, top, stacked, shared_input, input_dim, output_dim)
    else:
        layers = _align_output_side(nets, top, stacked, shared_input, input_dim, output_dim)
    return Network(input_dim, tuple(layers), nets[0].r_class)


def _in_offsets(nets, shared_input):
    if shared_input:
        return [0] * len(nets)
    return list(np.cumsum([0] + [n.input_dim for n in nets[:-1]]))


def _out_offsets(nets, stacked):
    if not stacked:
        return [0] * len(nets)
    return list(np.cumsum([0] + [n.output_dim for n in nets[:-1]]))


def _align_output_side(nets, top, stacked, shared_input, input_dim, output_dim) -> list[Layer]:
    """Shorter networks finish early; their outputs ride Identity carriers to the top."""
    in_off = _in_offsets(nets, shared_input)
    out_off = _out_offsets(nets, stacked)
    layers = []
    prev = {}             # ('net', i) or ('carry', slot) -> (offset, size) in the previous layer
    cols = input_dim
    for l in range(1, top + 1):
        last = l == top
        b = _LayerBuilder(cols)
        current = {}
        out_start = b.new_rows(output_dim) if last else None
        # carriers already running keep going
        for key, (offset, size) in sorted(prev.items(), key=lambda kv: kv[1][0]):
            if key[0] != 'carry':
                continue
            if last:
                b.route(offset, out_start + _slot_offset(key[1], out_off, stacked), size)
            else:
                dst = current.get(key, (None,))[0]
                if dst is None:
                    dst = b.new_rows(size)
                    current[key] = (dst, size)
                b.route(offset, dst, size)
        for i, net in enumerate(nets):
            if l > net.depth:
                continue
            layer = net.layers[l - 1]
            col_offset = in_off[i] if l == 1 else prev[('net', i)][0]
            if l < net.depth:
                start = b.new_rows(layer.affine.rows, layer.rect)
                current[('net', i)] = (start, layer.affine.rows)
                b.put(layer.affine, start + np.arange(layer.affine.rows), col_offset)
            elif last:
                b.put(layer.affine, out_start + out_off[i] + np.arange(layer.affine.rows), col_offset)
            else:
                slot = i if stacked else 0
                key = ('carry', slot)
                if key not in current:
                    current[key] = (b.new_rows(net.output_dim), net.output_dim)
                b.put(layer.affine, current[key][0] + np.arange(net.output_dim), col_offset)
        layers.append(b.build(last))
        prev = current
        cols = b.rows
    return layers


def _slot_offset(slot, out_off, stacked):
    return out_off[slot] if stacked else 0


def _align_input_side(nets, top, stacked, shared_input, input_dim, output_dim) -> list[Layer]:
    """Shorter networks start late; their inputs ride Identity carriers until then."""
    in_off = _in_offsets(nets, shared_input)
    out_off = _out_offsets(nets, stacked)
    starts = [top - net.depth + 1 for net in nets]
    layers = []
    prev_carry = None     # offset of the input carrier in the previous layer
    prev = {}
    cols = input_dim
    for l in range(1, top + 1):
        last = l == top
        b = _LayerBuilder(cols)
        current = {}
        out_start = b.new_rows(output_dim) if last else None
        if any(s > l for s in starts):
            carry = b.new_rows(input_dim)
            b.route(0 if l == 1 else prev_carry, carry, input_dim)
        else:
            carry = None
        for i, net in enumerate(nets):
            if l < starts[i]:
                continue
            k = l - starts[i]
            layer = net.layers[k]
            if k == 0:
                col_offset = in_off[i] + (0 if l == 1 else prev_carry)
            else:
                col_offset = prev[i]
            if last:
                b.put(layer.affine, out_start + out_off[i] + np.arange(layer.affine.rows), col_offset)
            else:
                start = b.new_rows(layer.affine.rows, layer.rect)
                current[i] = start
                b.put(layer.affine, start + np.arange(layer.affine.rows), col_offset)
        layers.append(b.build(last))
        prev = current
        prev_carry = carry
        cols = b.rows
    return layers
