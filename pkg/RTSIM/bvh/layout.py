"""Flat, byte-addressed BVH image.

Node records (little endian, 32-byte aligned):

- internal node, 224 bytes: 32-byte header (kind=1 u32, child count u32, 24 bytes padding)
  followed by 6 child records of 32 bytes (AABB as six float32 lo/hi values + u64 address).
- leaf node, 64 bytes: kind=2 u32, primitive id u32, 3 vertices as 9 float32, 20 bytes padding.
"""
import math
from enum import Enum
from dataclasses import dataclass, field

import numpy as np

from ..utils import BvhError
from ..scene.geometry import Triangle

SECTOR_SIZE = 32
NODE_SIZE_INTERNAL = 224
NODE_SIZE_LEAF = 64
MAX_CHILDREN = 6
DEFAULT_BASE_ADDR = 0x1000_0000

KIND_INTERNAL = 1
KIND_LEAF = 2

CHILD_DTYPE = np.dtype([('lo', '<f4', (3,)), ('hi', '<f4', (3,)), ('addr', '<u8')])
INTERNAL_DTYPE = np.dtype([('kind', '<u4'), ('count', '<u4'), ('pad', 'V24'),
                           ('children', CHILD_DTYPE, (MAX_CHILDREN,))])
LEAF_DTYPE = np.dtype([('kind', '<u4'), ('prim_id', '<u4'), ('verts', '<f4', (3, 3)), ('pad', 'V20')])
HEADER_DTYPE = np.dtype([('magic', 'S8'), ('version', '<u4'), ('pad', '<u4'), ('base_addr', '<u8'),
                         ('root_addr', '<u8'), ('root_lo', '<f4', (3,)), ('root_hi', '<f4', (3,)),
                         ('payload_size', '<u8')])
DUMP_MAGIC = b'RTSIMBVH'
DUMP_VERSION = 1

assert INTERNAL_DTYPE.itemsize == NODE_SIZE_INTERNAL
assert LEAF_DTYPE.itemsize == NODE_SIZE_LEAF


@dataclass(frozen=True)
class Aabb:
    """Axis-aligned bounding box. An empty box has lo > hi (see Aabb.EMPTY)."""
    lo: tuple
    hi: tuple

    @property
    def empty(self):
        return any(self.lo[i] > self.hi[i] for i in range(3))

    def union(self, other):
        return Aabb(tuple(min(self.lo[i], other.lo[i]) for i in range(3)),
                    tuple(max(self.hi[i], other.hi[i]) for i in range(3)))

    def contains(self, other):
        if other.empty:
            return True
        return all(self.lo[i] <= other.lo[i] and other.hi[i] <= self.hi[i] for i in range(3))

    @classmethod
    def of_triangle(cls, tri):
        lo, hi = tri.bounds()
        return cls(lo, hi)

    @classmethod
    def of_triangles(cls, triangles):
        box = cls.EMPTY
        for tri in triangles:
            box = box.union(cls.of_triangle(tri))
        return box


Aabb.EMPTY = Aabb((math.inf,) * 3, (-math.inf,) * 3)


class NodeKind(str, Enum):
    INTERNAL = "internal"
    LEAF = "leaf"


@dataclass(frozen=True)
class ChildRecord:
    addr: int
    aabb: Aabb


@dataclass(frozen=True)
class BvhNode:
    """Decoded node record.

    Internal nodes carry 1-6 child records; leaves carry exactly one triangle.
    """
    addr: int
    kind: NodeKind
    children: tuple = ()
    triangle: Triangle = None

    @property
    def size(self):
        return NODE_SIZE_INTERNAL if self.kind == NodeKind.INTERNAL else NODE_SIZE_LEAF

    @property
    def is_leaf(self):
        return self.kind == NodeKind.LEAF


@dataclass
class TreeNode:
    """Intermediate tree used by the builder (and by hand-written test trees) before layout.

    Args:
        children (list): child TreeNode objects; empty for leaves
        triangle (Triangle): leaf primitive
        box (Aabb): bounding box stored in the parent's child record. Defaults to the union
                    of the children (or the triangle bounds for leaves).
    """
    children: list = field(default_factory=list)
    triangle: Triangle = None
    box: Aabb = None
    addr: int = None

    def __post_init__(self):
        if self.triangle is None and not 1 <= len(self.children) <= MAX_CHILDREN:
            raise BvhError(f"Internal node needs 1-{MAX_CHILDREN} children, got {len(self.children)}.")
        if self.box is None:
            if self.triangle is not None:
                self.box = Aabb.of_triangle(self.triangle)
            else:
                box = Aabb.EMPTY
                for child in self.children:
                    box = box.union(child.box)
                self.box = box

    @property
    def is_leaf(self):
        return self.triangle is not None


class FlatBvh:
    """Immutable serialized BVH. Every node has a byte address inside [base_addr, base_addr + size).

    Args:
        image (bytes): node records
        base_addr (int): byte address of the first image byte
        root_addr (int): address of the root node
        root_aabb (Aabb): bounding box of the whole tree
    """
    node_size_internal = NODE_SIZE_INTERNAL
    node_size_leaf = NODE_SIZE_LEAF

    def __init__(self, image, base_addr, root_addr, root_aabb):
        self.image = bytes(image)
        self.base_addr = base_addr
        self.root_addr = root_addr
        self.root_aabb = root_aabb
        self._nodes = {} # decoded node cache, addr -> BvhNode

    def __repr__(self):
        return (f"FlatBvh(base=0x{self.base_addr:x}, root=0x{self.root_addr:x}, "
                f"size={self.size} B)")

    @property
    def size(self):
        return len(self.image)

    @property
    def end_addr(self):
        return self.base_addr + len(self.image)

    def read(self, addr, size):
        """Returns `size` bytes of the image starting at byte address `addr`."""
        offset = addr - self.base_addr
        if offset < 0 or offset + size > len(self.image):
            raise BvhError(f"Read of {size} bytes at 0x{addr:x} is outside the BVH image.")
        return self.image[offset:offset + size]

    def scan_nodes(self):
        """Scans the image linearly and returns (address, size) of every node record in layout order.

        Stops at the first unknown kind tag.
        """
        records = []
        offset = 0
        while offset + 4 <= len(self.image):
            kind = int(np.frombuffer(self.image, dtype='<u4', count=1, offset=offset)[0])
            if kind == KIND_INTERNAL:
                size = NODE_SIZE_INTERNAL
            elif kind == KIND_LEAF:
                size = NODE_SIZE_LEAF
            else:
                break
            records.append((self.base_addr + offset, size))
            offset += size
        return records

    def node_starts(self):
        return [addr for addr, _ in self.scan_nodes()]

    def dump(self, path):
        """Writes the image with a small header so traces can be reproduced later."""
        header = np.zeros(1, dtype=HEADER_DTYPE)
        header['magic'] = DUMP_MAGIC
        header['version'] = DUMP_VERSION
        header['base_addr'] = self.base_addr
        header['root_addr'] = self.root_addr
        header['root_lo'] = self.root_aabb.lo
        header['root_hi'] = self.root_aabb.hi
        header['payload_size'] = len(self.image)
        with open(path, 'wb') as f:
            f.write(header.tobytes())
            f.write(self.image)


def load_flat_bvh(path):
    """Reads an image written by FlatBvh.dump().

    Args:
        path (str): dump file

    Returns:
        FlatBvh: the loaded tree
    """
    with open(path, 'rb') as f:
        data = f.read()
    if len(data) < HEADER_DTYPE.itemsize:
        raise BvhError(f"{path}: file too short for a BVH dump header.")
    header = np.frombuffer(data, dtype=HEADER_DTYPE, count=1)[0]
    if bytes(header['magic']) != DUMP_MAGIC:
        raise BvhError(f"{path}: not a BVH dump (bad magic).")
    if int(header['version']) != DUMP_VERSION:
        raise BvhError(f"{path}: unsupported BVH dump version {int(header['version'])}.")
    payload = data[HEADER_DTYPE.itemsize:]
    if len(payload) != int(header['payload_size']):
        raise BvhError(f"{path}: payload size mismatch.")
    root_aabb = Aabb(tuple(float(c) for c in header['root_lo']), tuple(float(c) for c in header['root_hi']))
    return FlatBvh(payload, int(header['base_addr']), int(header['root_addr']), root_aabb)


def node_at(bvh, addr):
    """Decodes the node record at byte address `addr`.

    Args:
        bvh (FlatBvh): the tree
        addr (int): node start address

    Returns:
        BvhNode: decoded node
    """
    node = bvh._nodes.get(addr)
    if node is not None:
        return node

    offset = addr - bvh.base_addr
    if offset % SECTOR_SIZE != 0:
        raise BvhError(f"unaligned node address 0x{addr:x}")
    if offset < 0 or offset + NODE_SIZE_LEAF > len(bvh.image):
        raise BvhError(f"node address 0x{addr:x} out of range")

    kind = int(np.frombuffer(bvh.image, dtype='<u4', count=1, offset=offset)[0])
    if kind == KIND_INTERNAL:
        if offset + NODE_SIZE_INTERNAL > len(bvh.image):
            raise BvhError(f"node address 0x{addr:x} out of range")
        record = np.frombuffer(bvh.image, dtype=INTERNAL_DTYPE, count=1, offset=offset)[0]
        count = int(record['count'])
        if not 1 <= count <= MAX_CHILDREN:
            raise BvhError(f"invalid child count {count} at 0x{addr:x}")
        children = tuple(
            ChildRecord(int(child['addr']),
                        Aabb(tuple(float(c) for c in child['lo']), tuple(float(c) for c in child['hi'])))
            for child in record['children'][:count]
        )
        node = BvhNode(addr, NodeKind.INTERNAL, children=children)
    elif kind == KIND_LEAF:
        record = np.frombuffer(bvh.image, dtype=LEAF_DTYPE, count=1, offset=offset)[0]
        verts = record['verts'].astype(np.float64)
        triangle = Triangle(tuple(verts[0]), tuple(verts[1]), tuple(verts[2]), id=int(record['prim_id']))
        node = BvhNode(addr, NodeKind.LEAF, triangle=triangle)
    else:
        raise BvhError(f"not a node address 0x{addr:x} (kind tag {kind})")

    bvh._nodes[addr] = node
    return node


def node_footprint(node):
    """Returns the 32B-aligned chunk addresses covering a node, in address order.

    Args:
        node (BvhNode): decoded node

    Returns:
        list: 7 chunk addresses for internal nodes, 2 for leaves
    """
    return [node.addr + i * SECTOR_SIZE for i in range(node.size // SECTOR_SIZE)]


def layout_tree(root, base_addr=DEFAULT_BASE_ADDR):
    """Serializes a TreeNode hierarchy in depth-first pre-order into a FlatBvh.

    Args:
        root (TreeNode): root of the tree
        base_addr (int): byte address of the first node; must be 32-byte aligned

    Returns:
        FlatBvh: the serialized tree
    """
    if base_addr % SECTOR_SIZE != 0:
        raise BvhError(f"BVH base address 0x{base_addr:x} is not {SECTOR_SIZE}-byte aligned.")

    # 1) assign addresses in pre-order:
    order = []
    cursor = base_addr
    pending = [root]
    while pending:
        node = pending.pop()
        node.addr = cursor
        cursor += NODE_SIZE_LEAF if node.is_leaf else NODE_SIZE_INTERNAL
        order.append(node)
        pending.extend(reversed(node.children))

    # 2) encode records:
    image = bytearray(cursor - base_addr)
    for node in order:
        offset = node.addr - base_addr
        if node.is_leaf:
            record = np.zeros(1, dtype=LEAF_DTYPE)
            record['kind'] = KIND_LEAF
            record['prim_id'] = node.triangle.id
            record['verts'][0] = node.triangle.vertices
        else:
            record = np.zeros(1, dtype=INTERNAL_DTYPE)
            record['kind'] = KIND_INTERNAL
            record['count'] = len(node.children)
            children = record['children']
            for i, child in enumerate(node.children):
                children['lo'][0, i] = child.box.lo
                children['hi'][0, i] = child.box.hi
                children['addr'][0, i] = child.addr
        image[offset:offset + record.itemsize] = record.tobytes()

    return FlatBvh(image, base_addr, root.addr, root.box)
