"""
Besovnet Network IR

Feed-forward networks Φ = ((T_1, σ_1), …, (T_{L-1}, σ_{L-1}), T_L) with sparse affine
maps and per-neuron activations that are either the identity or the rectified power
ρ_r(t) = max{0, t}^r. Networks are immutable; evaluation is pure.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy import sparse

from besovnet.errors import NetworkFormatError, ParameterError, StructureError

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
IDENTITY = "id"
RECT_POWER = "rp"


@dataclass(frozen=True)
class Activation:
    """Activation of a single neuron: Identity, or RectPower with power r ≥ 1."""
    kind: str
    power: Optional[int] = None

    def __post_init__(self):
        if self.kind == IDENTITY:
            if self.power is not None:
                raise ParameterError("Identity activation takes no power")
        elif self.kind == RECT_POWER:
            if self.power is None or int(self.power) != self.power or self.power < 1:
                raise ParameterError(f"RectPower needs an integer power r >= 1, got {self.power}")
        else:
            raise ParameterError(f"Unknown activation kind: {self.kind}")

    @classmethod
    def identity(cls) -> "Activation":
        return cls(IDENTITY)

    @classmethod
    def rect_power(cls, r: int) -> "Activation":
        return cls(RECT_POWER, int(r))

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == IDENTITY:
            return t
        out = np.maximum(t, 0.0)
        return out if self.power == 1 else out ** self.power


@dataclass(frozen=True, eq=False)
class AffineMap:
    """
    Sparse affine map x ↦ A x + b.

    A is stored as coordinate triplets sorted by (row, col) with nonzero values only.
    Use `from_triplets` to build one; it canonicalizes the input.
    """
    rows: int
    cols: int
    row_idx: np.ndarray
    col_idx: np.ndarray
    values: np.ndarray
    bias: np.ndarray

    @classmethod
    def from_triplets(cls, rows: int, cols: int, row_idx, col_idx, values,
                      bias=None) -> "AffineMap":
        """
        Build a canonical affine map.

        Duplicate (row, col) pairs are summed, zeros (given or produced by the sum) are
        dropped and the triplets are sorted by (row, col).
        """
        rows, cols = int(rows), int(cols)
        if rows < 0 or cols < 0:
            raise StructureError(f"Negative affine map shape ({rows}, {cols})")
        row_idx = np.asarray(row_idx, dtype=np.int64).ravel()
        col_idx = np.asarray(col_idx, dtype=np.int64).ravel()
        values = np.asarray(values, dtype=float).ravel()
        if not (len(row_idx) == len(col_idx) == len(values)):
            raise StructureError("Triplet arrays differ in length")
        if len(values) and (row_idx.min() < 0 or row_idx.max() >= rows
                            or col_idx.min() < 0 or col_idx.max() >= cols):
            raise StructureError(f"Triplet index outside a ({rows}, {cols}) matrix")
        bias = np.zeros(rows) if bias is None else np.asarray(bias, dtype=float).ravel()
        if len(bias) != rows:
            raise StructureError(f"Bias has length {len(bias)}, expected {rows}")

        coo = sparse.coo_matrix((values, (row_idx, col_idx)), shape=(rows, cols))
        coo.sum_duplicates()
        coo.eliminate_zeros()
        order = np.lexsort((coo.col, coo.row))
        return cls(rows, cols,
                   coo.row[order].astype(np.int64),
                   coo.col[order].astype(np.int64),
                   coo.data[order].astype(float),
                   bias.copy())

    @classmethod
    def from_dense(cls, matrix, bias=None) -> "AffineMap":
        matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
        r, c = np.nonzero(matrix)
        return cls.from_triplets(matrix.shape[0], matrix.shape[1], r, c, matrix[r, c], bias)

    @property
    def nnz(self) -> int:
        return int(len(self.values))

    @cached_property
    def matrix(self) -> sparse.csr_matrix:
        return sparse.csr_matrix((self.values, (self.row_idx, self.col_idx)),
                                 shape=(self.rows, self.cols))

    def to_dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Apply to a batch X of shape (n, cols)."""
        return np.asarray(self.matrix @ X.T).T + self.bias

    def with_values(self, values, bias) -> "AffineMap":
        return AffineMap.from_triplets(self.rows, self.cols, self.row_idx, self.col_idx,
                                       values, bias)


@dataclass(frozen=True, eq=False)
class Layer:
    """One (T_l, σ_l) pair; `rect` marks the RectPower neurons, None on the output layer."""
    affine: AffineMap
    rect: Optional[np.ndarray] = None

    def activations(self, r: int) -> tuple[Activation, ...]:
        if self.rect is None:
            return ()
        return tuple(Activation.rect_power(r) if flag else Activation.identity()
                     for flag in self.rect)


@dataclass(frozen=True, eq=False)
class Network:
    """A feed-forward network; the final layer carries no activations."""
    input_dim: int
    layers: tuple[Layer, ...]
    r_class: int = 1

    def __post_init__(self):
        if not self.layers:
            raise StructureError("A network needs at least one layer")
        if int(self.r_class) != self.r_class or self.r_class < 1:
            raise ParameterError(f"r_class must be an integer >= 1, got {self.r_class}")
        cols = self.input_dim
        for index, layer in enumerate(self.layers):
            if layer.affine.cols != cols:
                raise StructureError(
                    f"Layer {index} expects {layer.affine.cols} inputs, previous layer gives {cols}")
            last = index == len(self.layers) - 1
            if last and layer.rect is not None:
                raise StructureError("The output layer carries no activations")
            if not last:
                if layer.rect is None or len(layer.rect) != layer.affine.rows:
                    raise StructureError(f"Layer {index} needs one activation per neuron")
            cols = layer.affine.rows

    @property
    def output_dim(self) -> int:
        return self.layers[-1].affine.rows

    @property
    def depth(self) -> int:
        return len(self.layers)

    @property
    def widths(self) -> list[int]:
        return [layer.affine.rows for layer in self.layers]


def build_network(input_dim: int, affines: Sequence[AffineMap],
                  rects: Sequence[Iterable[bool]], r_class: int = 1) -> Network:
    """Assemble a network from affine maps and hidden-layer activation masks."""
    if len(rects) != len(affines) - 1:
        raise StructureError(f"{len(affines)} layers need {len(affines) - 1} activation masks")
    layers = [Layer(a, np.asarray(list(m), dtype=bool)) for a, m in zip(affines[:-1], rects)]
    layers.append(Layer(affines[-1], None))
    return Network(int(input_dim), tuple(layers), int(r_class))


def identity_network(d: int, r_class: int = 1) -> Network:
    """Single-layer network realizing the identity on R^d (d weights)."""
    idx = np.arange(d)
    return Network(d, (Layer(AffineMap.from_triplets(d, d, idx, idx, np.ones(d))),), r_class)


def linear_network(matrix, bias=None, r_class: int = 1) -> Network:
    """Single-layer network realizing x ↦ M x + b."""
    affine = AffineMap.from_dense(matrix, bias)
    return Network(affine.cols, (Layer(affine),), r_class)


def eval(net: Network, x) -> np.ndarray:
    """
    Realization R(Φ)(x).

    Args:
        net: The network.
        x: One input vector of length input_dim, or a batch of shape (n, input_dim).
           A scalar is accepted for one-dimensional inputs.

    Returns:
        A vector of length output_dim, or an (n, output_dim) batch.
    """
    X = np.asarray(x, dtype=float)
    single = X.ndim <= 1
    if X.ndim == 0:
        X = X.reshape(1)
    if single:
        X = X.reshape(1, -1)
    if X.ndim != 2 or X.shape[1] != net.input_dim:
        raise StructureError(f"Input of shape {np.shape(x)} does not match input_dim {net.input_dim}")

    r = net.r_class
    for layer in net.layers:
        X = layer.affine.apply(X)
        if layer.rect is not None and layer.rect.any():
            active = np.maximum(X[:, layer.rect], 0.0)
            X[:, layer.rect] = active if r == 1 else active ** r
    return X[0] if single else X


def weight_count(net: Network) -> int:
    """W(Φ): nonzero matrix entries over all layers; biases are not counted."""
    return sum(layer.affine.nnz for layer in net.layers)


def depth(net: Network) -> int:
    return net.depth


def structurally_equal(a: Network, b: Network) -> bool:
    """Same shapes, activations, triplets and biases, compared bit for bit."""
    if (a.input_dim, a.r_class, a.depth) != (b.input_dim, b.r_class, b.depth):
        return False
    for la, lb in zip(a.layers, b.layers):
        fa, fb = la.affine, lb.affine
        if (fa.rows, fa.cols) != (fb.rows, fb.cols):
            return False
        if not (np.array_equal(fa.row_idx, fb.row_idx) and np.array_equal(fa.col_idx, fb.col_idx)
                and np.array_equal(fa.values, fb.values) and np.array_equal(fa.bias, fb.bias)):
            return False
        if (la.rect is None) != (lb.rect is None):
            return False
        if la.rect is not None and not np.array_equal(la.rect, lb.rect):
            return False
    return True


def permute_neurons(net: Network, layer_index: int, perm) -> Network:
    """Reorder the neurons of a hidden layer, permuting the adjacent matrices consistently."""
    if not 0 <= layer_index < net.depth - 1:
        raise StructureError(f"Layer {layer_index} is not a hidden layer")
    perm = np.asarray(perm, dtype=np.int64)
    layer = net.layers[layer_index]
    n = layer.affine.rows
    if sorted(perm.tolist()) != list(range(n)):
        raise StructureError("perm is not a permutation of the layer's neurons")
    inverse = np.empty(n, dtype=np.int64)
    inverse[perm] = np.arange(n)

    a = layer.affine
    moved = AffineMap.from_triplets(n, a.cols, inverse[a.row_idx], a.col_idx, a.values, a.bias[perm])
    nxt = net.layers[layer_index + 1].affine
    fed = AffineMap.from_triplets(nxt.rows, n, nxt.row_idx, inverse[nxt.col_idx], nxt.values, nxt.bias)

    layers = list(net.layers)
    layers[layer_index] = Layer(moved, layer.rect[perm])
    layers[layer_index + 1] = Layer(fed, net.layers[layer_index + 1].rect)
    return Network(net.input_dim, tuple(layers), net.r_class)


def to_strict(net: Network) -> Network:
    """
    Replace every hidden Identity neuron by rectified-power neurons with the same output.

    r = 1:  t = ρ(t) − ρ(−t)
    r = 2:  t = (ρ₂(t+1) + ρ₂(−t−1) − ρ₂(t−1) − ρ₂(1−t)) / 4
    """
    if net.r_class == 1:
        # (input weight sign, bias shift, output coefficient)
        expansion = [(1.0, 0.0, 1.0), (-1.0, 0.0, -1.0)]
    elif net.r_class == 2:
        expansion = [(1.0, 1.0, 0.25), (-1.0, -1.0, 0.25), (1.0, -1.0, -0.25), (-1.0, 1.0, -0.25)]
    else:
        raise ParameterError(f"No exact identity gadget for r = {net.r_class}")

    layers = list(net.layers)
    for index in range(net.depth - 1):
        layer = layers[index]
        ident = np.flatnonzero(~layer.rect)
        if len(ident) == 0:
            continue
        a = layer.affine
        # neuron i -> list of new neuron ids and output coefficients
        new_rows = []
        out_map = []
        count = 0
        for i in range(a.rows):
            if layer.rect[i]:
                new_rows.append((i, 1.0, 0.0))
                out_map.append([(count, 1.0)])
                count += 1
            else:
                copies = []
                for sign, shift, coeff in expansion:
                    new_rows.append((i, sign, shift))
                    copies.append((count, coeff))
                    count += 1
                out_map.append(copies)

        src_rows = np.array([s for s, _, _ in new_rows], dtype=np.int64)
        signs = np.array([g for _, g, _ in new_rows])
        shifts = np.array([h for _, _, h in new_rows])
        # rows of the old matrix grouped by row index
        starts = np.searchsorted(a.row_idx, np.arange(a.rows + 1))
        ri, ci, vi = [], [], []
        for new_id, old in enumerate(src_rows):
            lo, hi = starts[old], starts[old + 1]
            ri.append(np.full(hi - lo, new_id))
            ci.append(a.col_idx[lo:hi])
            vi.append(a.values[lo:hi] * signs[new_id])
        first = AffineMap.from_triplets(count, a.cols, _cat(ri), _cat(ci), _cat(vi),
                                        a.bias[src_rows] * signs + shifts)

        nxt = layers[index + 1].affine
        rn, cn, vn = [], [], []
        for old_col in range(a.rows):
            mask = nxt.col_idx == old_col
            for new_id, coeff in out_map[old_col]:
                rn.append(nxt.row_idx[mask])
                cn.append(np.full(mask.sum(), new_id))
                vn.append(nxt.values[mask] * coeff)
        second = AffineMap.from_triplets(nxt.rows, count, _cat(rn), _cat(cn), _cat(vn), nxt.bias)

        layers[index] = Layer(first, np.ones(count, dtype=bool))
        layers[index + 1] = Layer(second, layers[index + 1].rect)
    return Network(net.input_dim, tuple(layers), net.r_class)


def _cat(parts: list[np.ndarray]) -> np.ndarray:
    return np.concatenate(parts) if parts else np.zeros(0)


def summary(net: Network) -> dict:
    """Shape and size facts about a network."""
    identities = sum(int((~layer.rect).sum()) for layer in net.layers if layer.rect is not None)
    return {
        'input_dim': net.input_dim,
        'output_dim': net.output_dim,
        'depth': net.depth,
        'widths': net.widths,
        'weight_count': weight_count(net),
        'r_class': net.r_class,
        'identity_neurons': identities,
    }


# --- Serialization ---

def to_dict(net: Network) -> dict:
    layers = []
    for layer in net.layers:
        a = layer.affine
        entry = {
            'rows': a.rows,
            'cols': a.cols,
            'triplets': [[int(i), int(j), float(v)]
                         for i, j, v in zip(a.row_idx, a.col_idx, a.values)],
            'bias': [float(b) for b in a.bias],
        }
        if layer.rect is not None:
            entry['activations'] = [RECT_POWER if flag else IDENTITY for flag in layer.rect]
        layers.append(entry)
    return {'version': FORMAT_VERSION, 'r': net.r_class, 'input_dim': net.input_dim, 'layers': layers}


def serialize(net: Network) -> bytes:
    """JSON encoding; floats use the shortest round-trippable decimal."""
    if not net.layers:
        raise StructureError("A network needs at least one layer")
    return json.dumps(to_dict(net), separators=(',', ':'), allow_nan=False).encode('utf-8')


def _require(obj: dict, key: str, kind, field: str):
    if not isinstance(obj, dict) or key not in obj:
        raise NetworkFormatError(field, "missing")
    value = obj[key]
    if kind is int and (isinstance(value, bool) or not isinstance(value, int)):
        raise NetworkFormatError(field, f"expected an integer, got {value!r}")
    if kind is list and not isinstance(value, list):
        raise NetworkFormatError(field, f"expected a list, got {type(value).__name__}")
    return value


def from_dict(data: dict) -> Network:
    version = _require(data, 'version', int, 'version')
    if version != FORMAT_VERSION:
        raise NetworkFormatError('version', f"unsupported version {version}")
    r = _require(data, 'r', int, 'r')
    if r < 1:
        raise NetworkFormatError('r', f"must be >= 1, got {r}")
    input_dim = _require(data, 'input_dim', int, 'input_dim')
    raw_layers = _require(data, 'layers', list, 'layers')
    if not raw_layers:
        raise NetworkFormatError('layers', "a network needs at least one layer")

    layers = []
    for index, raw in enumerate(raw_layers):
        where = f"layers[{index}]"
        rows = _require(raw, 'rows', int, f"{where}.rows")
        cols = _require(raw, 'cols', int, f"{where}.cols")
        triplets = _require(raw, 'triplets', list, f"{where}.triplets")
        bias = _require(raw, 'bias', list, f"{where}.bias")
        ri, ci, vi = [], [], []
        seen = set()
        for t, triplet in enumerate(triplets):
            tf = f"{where}.triplets[{t}]"
            if not isinstance(triplet, list) or len(triplet) != 3:
                raise NetworkFormatError(tf, "expected [row, col, value]")
            i, j, v = triplet
            if isinstance(i, bool) or isinstance(j, bool) or not isinstance(i, int) or not isinstance(j, int):
                raise NetworkFormatError(tf, "row and col must be integers")
            if not 0 <= i < rows or not 0 <= j < cols:
                raise NetworkFormatError(tf, f"index ({i}, {j}) outside ({rows}, {cols})")
            if not isinstance(v, (int, float)) or isinstance(v, bool) or v == 0:
                raise NetworkFormatError(tf, f"value must be a nonzero number, got {v!r}")
            if (i, j) in seen:
                raise NetworkFormatError(tf, f"duplicate entry ({i}, {j})")
            seen.add((i, j))
            ri.append(i)
            ci.append(j)
            vi.append(float(v))
        if len(bias) != rows or not all(isinstance(b, (int, float)) and not isinstance(b, bool) for b in bias):
            raise NetworkFormatError(f"{where}.bias", f"expected {rows} numbers")
        affine = AffineMap.from_triplets(rows, cols, ri, ci, vi, bias)

        last = index == len(raw_layers) - 1
        if last:
            if 'activations' in raw:
                raise NetworkFormatError(f"{where}.activations", "the output layer carries no activations")
            layers.append(Layer(affine))
        else:
            acts = _require(raw, 'activations', list, f"{where}.activations")
            if len(acts) != rows or any(a not in (IDENTITY, RECT_POWER) for a in acts):
                raise NetworkFormatError(f"{where}.activations",
                                         f"expected {rows} entries of '{IDENTITY}' or '{RECT_POWER}'")
            layers.append(Layer(affine, np.array([a == RECT_POWER for a in acts], dtype=bool)))
    try:
        return Network(input_dim, tuple(layers), r)
    except StructureError as e:
        raise NetworkFormatError('layers', str(e)) from e


def _reject_constant(name: str):
    raise NetworkFormatError('document', f"non-finite literal {name}")


def deserialize(data: bytes | str) -> Network:
    """Parse a network produced by `serialize`; NaN and Infinity literals are rejected."""
    try:
        obj = json.loads(data, parse_constant=_reject_constant)
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise NetworkFormatError('document', f"not valid JSON ({e})") from e
    return from_dict(obj)


def save(net: Network, path) -> None:
    with open(path, 'wb') as f:
        f.write(serialize(net))


def load(path) -> Network:
    with open(path, 'rb') as f:
        return deserialize(f.read())
