from collections import Counter

from ..utils import BvhError
from .layout import Aabb, node_at


def validate(bvh, triangles=None):
    """Checks the structural invariants of a flat BVH image.

    Checks performed: every child address points at a node start (reported as an unaligned
    child address otherwise), the tree is acyclic with exactly one parent per node, every node
    is reachable from the root, and every stored child box contains the primitives below it. When
    `triangles` is given, the multiset of leaf primitive ids must equal their ids.

    Args:
        bvh (FlatBvh): tree to check
        triangles (list, optional): input triangles of the build

    Returns:
        list: violation messages; empty when the tree is valid
    """
    report = []
    records = bvh.scan_nodes()
    starts = [addr for addr, _ in records]
    start_set = set(starts)
    scanned_end = records[-1][0] + records[-1][1] if records else bvh.base_addr
    if scanned_end != bvh.end_addr:
        report.append(f"unparsable bytes after 0x{scanned_end:x}")

    if bvh.root_addr not in start_set:
        report.append(f"root address 0x{bvh.root_addr:x} is not a node start")
        return report

    parents = {bvh.root_addr: None}
    visited = set()
    leaf_ids = []
    broken = []  # bad child pointers; the walk does not follow them

    def walk(addr, on_path):
        """Returns the bounds of all primitives below `addr`."""
        node = node_at(bvh, addr)
        visited.add(addr)
        if node.is_leaf:
            leaf_ids.append(node.triangle.id)
            return Aabb.of_triangle(node.triangle)

        on_path.add(addr)
        bounds = Aabb.EMPTY
        for i, child in enumerate(node.children):
            where = f"child {i} of node 0x{addr:x}"
            if child.addr not in start_set:
                report.append(f"unaligned child address 0x{child.addr:x} ({where})")
                broken.append(child.addr)
                continue
            if child.addr in on_path:
                report.append(f"cycle detected at 0x{child.addr:x} ({where})")
                broken.append(child.addr)
                continue
            if child.addr in parents:
                report.append(f"multiple parents for node 0x{child.addr:x} ({where})")
                broken.append(child.addr)
                continue
            parents[child.addr] = addr
            child_bounds = walk(child.addr, on_path)
            if not child.aabb.contains(child_bounds):
                report.append(f"containment violated: box of {where} does not contain its primitives")
            bounds = bounds.union(child_bounds)
        on_path.discard(addr)
        return bounds

    try:
        root_bounds = walk(bvh.root_addr, set())
    except BvhError as e:
        report.append(f"undecodable node: {e}")
        return report

    if not bvh.root_aabb.contains(root_bounds):
        report.append("containment violated: root box does not contain all primitives")

    # a bad pointer orphans the subtree it replaced, so reachability is only judged on sound trees
    for addr in ([] if broken else starts):
        if addr not in visited:
            report.append(f"unreachable node at 0x{addr:x}")

    if triangles is not None:
        expected = Counter(tri.id for tri in triangles)
        found = Counter(leaf_ids)
        if expected != found:
            missing = sorted((expected - found).elements())
            extra = sorted((found - expected).elements())
            report.append(f"primitive coverage mismatch (missing {missing[:10]}, extra {extra[:10]})")

    return report
