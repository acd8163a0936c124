import numpy as np

from ..utils import BvhError
from .layout import TreeNode, MAX_CHILDREN, DEFAULT_BASE_ADDR, layout_tree, node_at


def build(triangles, max_leaf_depth=32, base_addr=DEFAULT_BASE_ADDR):
    """Builds a 6-ary BVH with one triangle per leaf and serializes it.

    Each internal node is formed by repeatedly median-splitting the largest primitive group
    on the longest axis of its centroid bounds (two levels of binary splits collapsed, then
    extended) until 6 groups exist or no group can be split. Children keep the spatial split
    order. Ties along the split axis are broken by primitive id, so construction is
    deterministic.

    Args:
        triangles (list): Triangle objects, at least 1
        max_leaf_depth (int): maximum depth of any leaf (root has depth 0). Defaults to 32.
        base_addr (int): byte address of the root node. Defaults to 0x1000_0000.

    Returns:
        FlatBvh: serialized tree
    """
    triangles = list(triangles)
    if len(triangles) == 0:
        raise BvhError("Cannot build a BVH over an empty triangle list.")
    if max_leaf_depth < 0:
        raise BvhError(f"max_leaf_depth must be non-negative, got {max_leaf_depth}.")

    centroids = np.array([tri.centroid() for tri in triangles], dtype=np.float64)
    ids = np.array([tri.id for tri in triangles], dtype=np.int64)

    def split(group):
        points = centroids[group]
        extent = points.max(axis=0) - points.min(axis=0)
        axis = int(np.argmax(extent))  # first axis on ties
        order = np.lexsort((ids[group], points[:, axis]))
        ordered = group[order]
        mid = len(ordered) // 2
        return ordered[:mid], ordered[mid:]

    def make_node(group, depth):
        if len(group) == 1:
            if depth > max_leaf_depth:
                raise BvhError(f"BVH leaf depth {depth} exceeds max_leaf_depth={max_leaf_depth}.")
            return TreeNode(triangle=triangles[int(group[0])])

        groups = [group]
        while len(groups) < MAX_CHILDREN:
            sizes = [len(g) for g in groups]
            largest = int(np.argmax(sizes))
            if sizes[largest] <= 1:
                break
            left, right = split(groups[largest])
            groups[largest:largest + 1] = [left, right]

        return TreeNode(children=[make_node(g, depth + 1) for g in groups])

    root = make_node(np.arange(len(triangles)), 0)
    return layout_tree(root, base_addr)


def leaves(bvh):
    """Returns the leaf nodes reachable from the root, in depth-first child order."""
    result = []
    pending = [bvh.root_addr]
    while pending:
        node = node_at(bvh, pending.pop())
        if node.is_leaf:
            result.append(node)
        else:
            pending.extend(child.addr for child in reversed(node.children))
    return result


def tree_stats(bvh):
    """Summary numbers of a built tree.

    Returns:
        dict: node counts, maximum leaf depth and image size in bytes
    """
    internal = 0
    leaf = 0
    max_depth = 0
    pending = [(bvh.root_addr, 0)]
    while pending:
        addr, depth = pending.pop()
        node = node_at(bvh, addr)
        if node.is_leaf:
            leaf += 1
            max_depth = max(max_depth, depth)
        else:
            internal += 1
            pending.extend((child.addr, depth + 1) for child in node.children)
    return {
        'internal_nodes': internal,
        'leaf_nodes': leaf,
        'max_depth': max_depth,
        'size_bytes': bvh.size,
    }
