from .layout import (Aabb, BvhNode, ChildRecord, FlatBvh, NodeKind, TreeNode,
                     node_at, node_footprint, layout_tree, load_flat_bvh,
                     SECTOR_SIZE, NODE_SIZE_INTERNAL, NODE_SIZE_LEAF, DEFAULT_BASE_ADDR)
from .builder import build, leaves, tree_stats
from .validation import validate
