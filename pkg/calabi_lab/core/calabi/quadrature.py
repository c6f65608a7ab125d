"""
Tensor-product quadrature over [0, 1] x support box.

Rules are composite: each axis is cut into equal panels and a Gauss-Legendre
(or midpoint) rule is placed on each panel. Time rules split at the
Hamiltonian's breakpoints. Sums are plain dot products in a fixed node order,
so results are reproducible bit for bit.
"""
from typing import Callable, Tuple

import numpy as np

from calabi_lab.core.geometry.fields import TimeDepField
from calabi_lab.models.configs import QuadratureConfig, QuadratureRule
from calabi_lab.models.geometry import Box
from calabi_lab.utils.exceptions import ValidationError
from calabi_lab.utils.logging import get_logger

logger = get_logger(__name__)

# nodes per batch when integrating over large tensor grids
CHUNK_SIZE = 65536


def reference_rule(count: int, rule: QuadratureRule) -> Tuple[np.ndarray, np.ndarray]:
    """Nodes and weights on [-1, 1]"""
    if count < 1:
        raise ValidationError(f"quadrature needs at least one node, got {count}")
    if rule is QuadratureRule.GAUSS_LEGENDRE:
        return np.polynomial.legendre.leggauss(count)
    nodes = -1.0 + (2.0 * np.arange(count) + 1.0) / count
    return nodes, np.full(count, 2.0 / count)


def interval_rule(a: float, b: float, count: int, rule: QuadratureRule, panels: int = 1) -> Tuple[np.ndarray, np.ndarray]:
    """Composite rule with `count` nodes on each of `panels` equal panels of [a, b]"""
    ref_nodes, ref_weights = reference_rule(count, rule)
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * (edges[1:] - edges[:-1])
    center = 0.5 * (edges[1:] + edges[:-1])
    nodes = (center[:, None] + half[:, None] * ref_nodes[None, :]).reshape(-1)
    weights = (half[:, None] * ref_weights[None, :]).reshape(-1)
    return nodes, weights


def spatial_rule(box: Box, cfg: QuadratureConfig) -> Tuple[np.ndarray, np.ndarray]:
    """
    Tensor rule on the box

    Returns:
        (nodes of shape (M, 2n), weights of shape (M,)); weights integrate Lebesgue volume
    """
    axes = [
        interval_rule(lo, hi, cfg.spatial_nodes_per_axis, cfg.rule, cfg.panels_per_axis)
        for lo, hi in zip(box.lower, box.upper)
    ]
    total = int(np.prod([len(nodes) for nodes, _ in axes]))
    if total > 50_000_000:
        raise ValidationError(f"tensor quadrature with {total} nodes is too large; lower the nodes per axis")
    mesh = np.meshgrid(*[nodes for nodes, _ in axes], indexing="ij")
    nodes = np.stack([m.reshape(-1) for m in mesh], axis=-1)
    weights = np.ones(1)
    for _, w in axes:
        weights = np.multiply.outer(weights, w).reshape(-1)
    return nodes, weights


def time_rule(hamiltonian: TimeDepField, cfg: QuadratureConfig) -> Tuple[np.ndarray, np.ndarray]:
    """
    Rule on [0, 1] split at breakpoints; a single node for autonomous Hamiltonians
    """
    if hamiltonian.autonomous:
        return np.array([0.5]), np.array([1.0])
    cuts = [0.0] + [b for b in hamiltonian.breakpoints if 0.0 < b < 1.0] + [1.0]
    parts = [interval_rule(a, b, cfg.time_nodes, cfg.rule) for a, b in zip(cuts[:-1], cuts[1:])]
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


def integrate_nodes(fn: Callable[[np.ndarray], np.ndarray], nodes: np.ndarray, weights: np.ndarray) -> float:
    """sum_i w_i fn(x_i), evaluated chunk by chunk in node order"""
    total = 0.0
    for start in range(0, len(nodes), CHUNK_SIZE):
        stop = start + CHUNK_SIZE
        total += float(np.dot(weights[start:stop], fn(nodes[start:stop])))
    return total


def integrate_box(fn: Callable[[np.ndarray], np.ndarray], box: Box, cfg: QuadratureConfig) -> float:
    """int_box fn dvol"""
    nodes, weights = spatial_rule(box, cfg)
    return integrate_nodes(fn, nodes, weights)
